// Reference scorer for the batch scoring protocol, used in tests.
//
//   ciphen_stub_scorer [--mode uniform|keyword] [--omit ID] [--malformed ID]
//                      [--garbage-line] [--exit-code N] [--sleep-ms N]
//                      [--http HOST:PORT]
//
// uniform answers (1/3, 1/3, 1/3) for every request; keyword answers
// Yes-heavy when the text mentions dementia. --omit drops one id,
// --malformed sends probabilities that do not sum to one for one id.

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>

#include "ciphen/protocol.hpp"

using namespace ciphen;

namespace {

struct Behaviour {
  std::string mode = "uniform";
  std::string omit;
  std::string malformed;
  bool garbage_line = false;
};

std::string answer(const Behaviour& b, std::string_view input) {
  std::string out;
  if (b.garbage_line) out += "this is not json\n";
  for (const auto& line : split_lines(input)) {
    if (trim(line).empty()) continue;
    ScoreRequest req;
    try {
      req = parse_request(line);
    } catch (const ProtocolError& e) {
      out += serialize_response({"", std::nullopt, e.what()}) + "\n";
      continue;
    }
    if (req.id == b.omit) continue;
    ScoreResponse resp{req.id, ClassDistribution{1.0 / 3, 1.0 / 3, 1.0 / 3}, ""};
    if (b.mode == "keyword" && ascii_lower(req.text).find("dementia") != std::string::npos) {
      resp.probs = ClassDistribution{0.8, 0.1, 0.1};
    }
    if (req.id == b.malformed) resp.probs = ClassDistribution{0.5, 0.5, 0.5};
    out += serialize_response(resp) + "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stub scorer for the ciphen scoring protocol"};
  Behaviour b;
  int exit_code = 0;
  long sleep_ms = 0;
  std::string http;
  app.add_option("--mode", b.mode)->check(CLI::IsMember({"uniform", "keyword"}));
  app.add_option("--omit", b.omit);
  app.add_option("--malformed", b.malformed);
  app.add_flag("--garbage-line", b.garbage_line);
  app.add_option("--exit-code", exit_code);
  app.add_option("--sleep-ms", sleep_ms);
  app.add_option("--http", http, "Serve POST /score on HOST:PORT instead of stdio");
  CLI11_PARSE(app, argc, argv);

  if (!http.empty()) {
    const auto colon = http.rfind(':');
    httplib::Server server;
    server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
      res.set_content(answer(b, req.body), "application/x-ndjson");
    });
    return server.listen(http.substr(0, colon), std::stoi(http.substr(colon + 1))) ? 0 : 1;
  }

  std::string input((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
  if (sleep_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));
  std::cout << answer(b, input);
  std::cout.flush();
  return exit_code;
}
