#include "ciphen/pattern.hpp"

#include <limits>
#include <optional>

namespace ciphen {

PatternError::PatternError(const std::string& message, std::size_t position)
    : Error(message + " at position " + std::to_string(position)), position_(position) {}

namespace {

using ByteSet = std::bitset<256>;
using Inst = Pattern::Inst;
using Op = Pattern::Inst::Op;

constexpr int kUnbounded = -1;
constexpr int kMaxRepeat = 100;
constexpr std::size_t kMaxProgram = 20000;

struct Node {
  enum class Kind { empty, bytes, concat, alternate, repeat, bol, eol, word_boundary,
                    not_word_boundary };
  Kind kind = Kind::empty;
  ByteSet set;
  std::vector<Node> children;
  int min = 0;
  int max = 0;
};

bool is_word_byte(unsigned char c) { return is_ascii_alnum(c) || c == '_'; }

ByteSet range_set(unsigned char lo, unsigned char hi) {
  ByteSet s;
  for (int c = lo; c <= hi; ++c) s.set(static_cast<std::size_t>(c));
  return s;
}

ByteSet digit_set() { return range_set('0', '9'); }
ByteSet word_set() {
  ByteSet s = range_set('0', '9') | range_set('a', 'z') | range_set('A', 'Z');
  s.set('_');
  return s;
}
ByteSet space_set() {
  ByteSet s;
  for (char c : {' ', '\t', '\n', '\r', '\f', '\v'}) s.set(static_cast<unsigned char>(c));
  return s;
}

ByteSet fold_case(ByteSet s) {
  for (int c = 'a'; c <= 'z'; ++c) {
    const int upper = c - 'a' + 'A';
    if (s.test(c) || s.test(upper)) {
      s.set(c);
      s.set(upper);
    }
  }
  return s;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Node parse() {
    Node node = parse_alternation();
    if (pos_ < src_.size()) throw PatternError("unmatched ')'", pos_);
    return node;
  }

 private:
  bool at_end() const { return pos_ >= src_.size(); }
  char peek() const { return src_[pos_]; }

  Node parse_alternation() {
    Node first = parse_concat();
    if (at_end() || peek() != '|') return first;
    Node alt;
    alt.kind = Node::Kind::alternate;
    alt.children.push_back(std::move(first));
    while (!at_end() && peek() == '|') {
      ++pos_;
      alt.children.push_back(parse_concat());
    }
    return alt;
  }

  Node parse_concat() {
    Node seq;
    seq.kind = Node::Kind::concat;
    while (!at_end() && peek() != '|' && peek() != ')') {
      seq.children.push_back(parse_repeat());
    }
    if (seq.children.size() == 1) return std::move(seq.children.front());
    return seq;
  }

  Node parse_repeat() {
    Node atom = parse_atom();
    while (!at_end()) {
      int min = 0, max = 0;
      const std::size_t q_pos = pos_;
      const char c = peek();
      if (c == '*') {
        min = 0, max = kUnbounded, ++pos_;
      } else if (c == '+') {
        min = 1, max = kUnbounded, ++pos_;
      } else if (c == '?') {
        min = 0, max = 1, ++pos_;
      } else if (c == '{') {
        auto bounds = try_braces();
        if (!bounds) break;
        std::tie(min, max) = *bounds;
      } else {
        break;
      }
      if (!at_end() && peek() == '?') ++pos_;  // lazy flag: same language
      if (atom.kind == Node::Kind::bol || atom.kind == Node::Kind::eol ||
          atom.kind == Node::Kind::word_boundary || atom.kind == Node::Kind::not_word_boundary) {
        throw PatternError("nothing to repeat", q_pos);
      }
      if (max != kUnbounded && (max < min)) throw PatternError("numbers out of order in {}", q_pos);
      if (min > kMaxRepeat || max > kMaxRepeat) {
        throw PatternError("repeat count exceeds " + std::to_string(kMaxRepeat), q_pos);
      }
      Node rep;
      rep.kind = Node::Kind::repeat;
      rep.min = min;
      rep.max = max;
      rep.children.push_back(std::move(atom));
      atom = std::move(rep);
    }
    return atom;
  }

  std::optional<std::pair<int, int>> try_braces() {
    std::size_t p = pos_ + 1;
    const auto read_int = [&](int& out) {
      const std::size_t start = p;
      long value = 0;
      while (p < src_.size() && src_[p] >= '0' && src_[p] <= '9') {
        value = std::min<long>(value * 10 + (src_[p] - '0'), std::numeric_limits<int>::max());
        ++p;
      }
      out = static_cast<int>(value);
      return p > start;
    };
    int min = 0, max = 0;
    if (!read_int(min)) return std::nullopt;
    if (p < src_.size() && src_[p] == '}') {
      pos_ = p + 1;
      return std::make_pair(min, min);
    }
    if (p >= src_.size() || src_[p] != ',') return std::nullopt;
    ++p;
    if (p < src_.size() && src_[p] == '}') {
      pos_ = p + 1;
      return std::make_pair(min, kUnbounded);
    }
    if (!read_int(max)) return std::nullopt;
    if (p >= src_.size() || src_[p] != '}') return std::nullopt;
    pos_ = p + 1;
    return std::make_pair(min, max);
  }

  Node bytes(ByteSet set) {
    Node n;
    n.kind = Node::Kind::bytes;
    n.set = set;
    return n;
  }

  Node parse_atom() {
    const std::size_t start = pos_;
    const char c = peek();
    switch (c) {
      case '*':
      case '+':
      case '?':
        throw PatternError("nothing to repeat", start);
      case '(': {
        ++pos_;
        if (!at_end() && peek() == '?') {
          if (pos_ + 1 < src_.size() && src_[pos_ + 1] == ':') {
            pos_ += 2;
          } else {
            throw PatternError("unsupported group syntax", start);
          }
        }
        Node inner = parse_alternation();
        if (at_end() || peek() != ')') throw PatternError("missing ')'", start);
        ++pos_;
        return inner;
      }
      case ')':
        throw PatternError("unmatched ')'", start);
      case '[':
        return bytes(parse_class());
      case '.': {
        ++pos_;
        ByteSet all;
        all.set();
        all.reset('\n');
        all.reset('\r');
        return bytes(all);
      }
      case '^': {
        ++pos_;
        Node n;
        n.kind = Node::Kind::bol;
        return n;
      }
      case '$': {
        ++pos_;
        Node n;
        n.kind = Node::Kind::eol;
        return n;
      }
      case '\\':
        return parse_escape(false).value_or(Node{});
      default: {
        ++pos_;
        ByteSet s;
        s.set(static_cast<unsigned char>(c));
        return bytes(s);
      }
    }
  }

  // Returns a node outside classes; inside classes only the byte set is used.
  std::optional<Node> parse_escape(bool in_class) {
    const std::size_t start = pos_;
    ++pos_;
    if (at_end()) throw PatternError("trailing backslash", start);
    const char e = peek();
    ++pos_;
    ByteSet s;
    switch (e) {
      case 'd': return bytes(digit_set());
      case 'D': return bytes(~digit_set());
      case 'w': return bytes(word_set());
      case 'W': return bytes(~word_set());
      case 's': return bytes(space_set());
      case 'S': return bytes(~space_set());
      case 'n': s.set('\n'); return bytes(s);
      case 't': s.set('\t'); return bytes(s);
      case 'r': s.set('\r'); return bytes(s);
      case 'f': s.set('\f'); return bytes(s);
      case 'v': s.set('\v'); return bytes(s);
      case 'b':
      case 'B': {
        if (in_class) throw PatternError("\\b is not allowed inside a class", start);
        Node n;
        n.kind = e == 'b' ? Node::Kind::word_boundary : Node::Kind::not_word_boundary;
        return n;
      }
      default:
        if (is_ascii_alnum(static_cast<unsigned char>(e))) {
          throw PatternError(std::string("unsupported escape \\") + e, start);
        }
        s.set(static_cast<unsigned char>(e));
        return bytes(s);
    }
  }

  ByteSet parse_class() {
    const std::size_t start = pos_;
    ++pos_;  // '['
    bool negate = false;
    if (!at_end() && peek() == '^') {
      negate = true;
      ++pos_;
    }
    ByteSet set;
    bool first = true;
    while (true) {
      if (at_end()) throw PatternError("missing ']'", start);
      if (peek() == ']' && !first) break;
      first = false;
      const std::size_t item_pos = pos_;
      ByteSet item;
      bool single = false;
      unsigned char lo = 0;
      if (peek() == '\\') {
        item = parse_escape(true)->set;
        single = item.count() == 1;
        if (single) {
          for (int c = 0; c < 256; ++c) {
            if (item.test(c)) lo = static_cast<unsigned char>(c);
          }
        }
      } else {
        lo = static_cast<unsigned char>(peek());
        item.set(lo);
        single = true;
        ++pos_;
      }
      if (single && pos_ + 1 < src_.size() && peek() == '-' && src_[pos_ + 1] != ']') {
        ++pos_;
        unsigned char hi;
        if (peek() == '\\') {
          const ByteSet h = parse_escape(true)->set;
          if (h.count() != 1) throw PatternError("invalid class range", item_pos);
          hi = 0;
          for (int c = 0; c < 256; ++c) {
            if (h.test(c)) hi = static_cast<unsigned char>(c);
          }
        } else {
          hi = static_cast<unsigned char>(peek());
          ++pos_;
        }
        if (hi < lo) throw PatternError("range out of order in character class", item_pos);
        item = range_set(lo, hi);
      }
      set |= item;
    }
    ++pos_;  // ']'
    set = fold_case(set);
    return negate ? ~set : set;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

class Compiler {
 public:
  Compiler(std::vector<Inst>& program, std::vector<ByteSet>& classes)
      : program_(program), classes_(classes) {}

  void emit_node(const Node& node) {
    switch (node.kind) {
      case Node::Kind::empty:
        return;
      case Node::Kind::bytes: {
        classes_.push_back(fold_case(node.set));
        emit({Op::byte_class, static_cast<int>(classes_.size() - 1), 0});
        return;
      }
      case Node::Kind::bol: emit({Op::assert_bol, 0, 0}); return;
      case Node::Kind::eol: emit({Op::assert_eol, 0, 0}); return;
      case Node::Kind::word_boundary: emit({Op::word_boundary, 0, 0}); return;
      case Node::Kind::not_word_boundary: emit({Op::not_word_boundary, 0, 0}); return;
      case Node::Kind::concat:
        for (const auto& child : node.children) emit_node(child);
        return;
      case Node::Kind::alternate: {
        std::vector<std::size_t> exits;
        for (std::size_t i = 0; i < node.children.size(); ++i) {
          if (i + 1 < node.children.size()) {
            const std::size_t split = emit({Op::split, 0, 0});
            program_[split].x = static_cast<int>(program_.size());
            emit_node(node.children[i]);
            exits.push_back(emit({Op::jump, 0, 0}));
            program_[split].y = static_cast<int>(program_.size());
          } else {
            emit_node(node.children[i]);
          }
        }
        for (std::size_t j : exits) program_[j].x = static_cast<int>(program_.size());
        return;
      }
      case Node::Kind::repeat: {
        const Node& body = node.children.front();
        for (int i = 0; i < node.min; ++i) emit_node(body);
        if (node.max == kUnbounded) {
          const std::size_t loop = emit({Op::split, 0, 0});
          program_[loop].x = static_cast<int>(program_.size());
          emit_node(body);
          emit({Op::jump, static_cast<int>(loop), 0});
          program_[loop].y = static_cast<int>(program_.size());
        } else {
          std::vector<std::size_t> splits;
          for (int i = node.min; i < node.max; ++i) {
            const std::size_t split = emit({Op::split, 0, 0});
            program_[split].x = static_cast<int>(program_.size());
            splits.push_back(split);
            emit_node(body);
          }
          for (std::size_t s : splits) program_[s].y = static_cast<int>(program_.size());
        }
        return;
      }
    }
  }

 private:
  std::size_t emit(Inst inst) {
    if (program_.size() >= kMaxProgram) throw PatternError("pattern too large", 0);
    program_.push_back(inst);
    return program_.size() - 1;
  }

  std::vector<Inst>& program_;
  std::vector<ByteSet>& classes_;
};

}  // namespace

Pattern Pattern::compile(std::string_view source) {
  if (source.empty()) throw PatternError("empty pattern", 0);
  Pattern p;
  p.source_ = std::string(source);
  const Node root = Parser(source).parse();
  Compiler(p.program_, p.classes_).emit_node(root);
  p.program_.push_back({Op::match, 0, 0});
  return p;
}

bool Pattern::search(std::string_view text) const {
  const std::size_t n_inst = program_.size();
  std::vector<int> current, next;
  std::vector<std::size_t> mark(n_inst, std::numeric_limits<std::size_t>::max());
  std::vector<int> stack;
  current.reserve(n_inst);
  next.reserve(n_inst);
  std::size_t generation = 0;

  // Follows epsilon edges from `pc` at text position `pos`; returns true if
  // the match instruction is reachable.
  const auto add_thread = [&](std::vector<int>& list, int start_pc, std::size_t pos) {
    stack.clear();
    stack.push_back(start_pc);
    while (!stack.empty()) {
      const int pc = stack.back();
      stack.pop_back();
      if (mark[pc] == generation) continue;
      mark[pc] = generation;
      const Inst& inst = program_[pc];
      switch (inst.op) {
        case Op::match:
          return true;
        case Op::byte_class:
          list.push_back(pc);
          break;
        case Op::jump:
          stack.push_back(inst.x);
          break;
        case Op::split:
          stack.push_back(inst.y);
          stack.push_back(inst.x);
          break;
        case Op::assert_bol:
          if (pos == 0) stack.push_back(pc + 1);
          break;
        case Op::assert_eol:
          if (pos == text.size()) stack.push_back(pc + 1);
          break;
        case Op::word_boundary:
        case Op::not_word_boundary: {
          const bool before = pos > 0 && is_word_byte(static_cast<unsigned char>(text[pos - 1]));
          const bool after =
              pos < text.size() && is_word_byte(static_cast<unsigned char>(text[pos]));
          if ((before != after) == (inst.op == Op::word_boundary)) stack.push_back(pc + 1);
          break;
        }
      }
    }
    return false;
  };

  for (std::size_t pos = 0;; ++pos) {
    // unanchored: a fresh thread starts at every position
    if (add_thread(current, 0, pos)) return true;
    if (pos == text.size()) break;
    ++generation;
    next.clear();
    const auto byte = static_cast<unsigned char>(text[pos]);
    for (int pc : current) {
      if (classes_[program_[pc].x].test(byte)) {
        if (add_thread(next, pc + 1, pos + 1)) return true;
      }
    }
    std::swap(current, next);
  }
  return false;
}

}  // namespace ciphen
