#include "ciphen/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <tuple>

#include "ciphen/lexicon.hpp"

namespace ciphen {

namespace {

// Keyword occurrences are wrapped in [[...]]; everything else in a template
// must be free of lexicon matches.
const std::vector<std::string> kYesTemplates = {
    "Assessment: progressive [[dementia]] with impaired ADLs, now needs help with finances and "
    "medications.",
    "[[MOCA]] score 17/30 today, consistent with mild [[cognitive impairment]].",
    "Diagnosis of [[Alzheimer]] disease, moderate stage; started donepezil.",
    "Exam shows impaired short term [[memory]] with 0/3 recall at five minutes and poor "
    "orientation to date.",
    "[[Neurocognitive]] testing demonstrates deficits across multiple domains, consistent with "
    "major [[neurocognitive]] disorder.",
    "Impression: amnestic [[MCI]] affecting a single domain, follow up in six months.",
    "[[MMSE]] 19/30 with impaired recall and attention.",
    "Clinical picture consistent with [[Lewy]] body [[dementia]] with fluctuations and visual "
    "hallucinations.",
    "Follow up for [[LBD]]; [[cognition]] continues to decline and supervision is required.",
    "Probable [[AD]] [[dementia]], requires supervision for daily activities.",
    "History of [[Picks]] disease with behavioral changes and impaired judgement.",
    "[[Corticobasal]] syndrome with progressive apraxia and executive dysfunction.",
    "Severe [[dementia]], dependent for all activities of daily living.",
    "Worsening [[memory]] loss over two years with getting lost while driving; diagnosed with "
    "[[Alzheimer]] type [[dementia]].",
};

const std::vector<std::string> kNoTemplates = {
    "[[Memory]] grossly intact, alert and oriented to person, place and time.",
    "[[Cognition]] intact; thought content and insight appropriate.",
    "[[MOCA]] 29/30, no evidence of [[cognitive impairment]].",
    "[[MMSE]] 30/30, within normal limits.",
    "Denies [[memory]] problems; sensorium clear, fund of knowledge intact.",
    "[[Neurocognitive]] screen within normal limits, concentration and attention intact.",
    "No signs of [[dementia]] on examination; oriented, judgement intact.",
    "[[Memory]] and [[cognition]] intact per examination, abstract reasoning normal.",
};

const std::vector<std::string> kNeitherTemplates = {
    "[[Cerebral]] angiogram scheduled for next month.",
    "[[Cerebellar]] signs deferred at this visit.",
    "History of [[cerebrovascular]] accident in the remote past, on aspirin.",
    "Transient global [[amnesia]] episode noted in old records, imaging unremarkable.",
    "Outside records mention [[cerebral]] aneurysm screening, results not available.",
};

// Uninformative mention for any keyword; {kw} is replaced by the keyword.
const std::string kGenericTemplate =
    "Provided information sheet on the {kw} research registry at patient request.";

const std::vector<std::string> kConfounderTemplates = {
    "Patient is caregiver for wife who has [[dementia]].",
    "Mother had [[Alzheimer]] disease in her eighties; patient asks about risk.",
    "Brother recently diagnosed with [[Lewy]] body [[dementia]]; patient feels stressed.",
    "Patient volunteers at a [[memory]] care facility on weekends.",
    "Husband has [[dementia]] and patient manages his appointments.",
};

const std::vector<std::string> kFiller = {
    "Blood pressure 132/78, heart rate 72, afebrile.",
    "Continue lisinopril 10 mg daily.",
    "Labs reviewed, potassium within normal range.",
    "Patient reports good appetite and sleeps well.",
    "Knee pain improved with physical therapy.",
    "Discussed diet and exercise at length.",
    "Vaccinations are up to date.",
    "Return to clinic in six months.",
    "Lungs clear to auscultation bilaterally.",
    "Abdomen soft and nontender.",
    "Colonoscopy due next year.",
    "Skin without rashes or lesions.",
    "Follow up with cardiology as scheduled.",
    "A1c 6.8, continue metformin.",
    "No chest pain or shortness of breath.",
    "Weight stable since last visit.",
    "Hearing aids in place, vision corrected with glasses.",
    "Reviewed home medication list with patient.",
    "Mild edema of both ankles, advised compression stockings.",
    "Flu shot given today without complications.",
};

constexpr std::size_t kMinFiller = 430;

struct Rendered {
  std::string text;
  std::vector<std::pair<std::size_t, std::string>> keywords;  // offset, spelling
};

Rendered render(const std::string& tmpl) {
  Rendered r;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("[[", pos);
    if (open == std::string::npos) {
      r.text += tmpl.substr(pos);
      break;
    }
    const auto close = tmpl.find("]]", open);
    r.text += tmpl.substr(pos, open - pos);
    const std::string kw = tmpl.substr(open + 2, close - open - 2);
    r.keywords.emplace_back(r.text.size(), kw);
    r.text += kw;
    pos = close + 2;
  }
  return r;
}

class NoteBuilder {
 public:
  explicit NoteBuilder(std::mt19937_64& rng) : rng_(rng) {}

  void filler() {
    std::uniform_int_distribution<std::size_t> pick(0, kFiller.size() - 1);
    std::size_t added = 0;
    while (added < kMinFiller) {
      const std::string& s = kFiller[pick(rng_)];
      text_ += s;
      text_ += ' ';
      added += s.size() + 1;
    }
  }

  void evidence(const std::string& tmpl, Label label, bool confounder) {
    const Rendered r = render(tmpl);
    for (const auto& [offset, kw] : r.keywords) {
      planted_.push_back({{}, text_.size() + offset, kw.size(), kw, label, confounder});
    }
    text_ += r.text;
    text_ += ' ';
  }

  std::string take_text() {
    std::string out = trim(text_);
    text_.clear();
    return out;
  }
  std::vector<PlantedMatch> take_planted() { return std::exchange(planted_, {}); }

 private:
  std::mt19937_64& rng_;
  std::string text_;
  std::vector<PlantedMatch> planted_;
};

template <typename T>
const T& pick_from(const std::vector<T>& items, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
  return items[pick(rng)];
}

std::string format_id(char prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%0*zu", prefix, width, n);
  return buf;
}

std::string random_date(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> year(2012, 2021), month(1, 12), day(1, 28);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year(rng), month(rng), day(rng));
  return buf;
}

Apoe draw_apoe(bool ci, std::mt19937_64& rng) {
  // Cohort marginals are roughly 12/62/26 percent; e4 is enriched among
  // impaired patients.
  std::discrete_distribution<int> dist = ci ? std::discrete_distribution<int>{0.10, 0.52, 0.38}
                                            : std::discrete_distribution<int>{0.13, 0.645, 0.225};
  switch (dist(rng)) {
    case 0: return Apoe::e2;
    case 1: return Apoe::e3;
    default: return Apoe::e4;
  }
}

}  // namespace

SynthCorpus generate_synthetic_corpus(const SynthConfig& config, std::uint64_t seed) {
  if (config.patients == 0) throw Error("synthetic corpus needs at least one patient");
  if (config.min_notes == 0 || config.min_notes > config.max_notes) {
    throw Error("invalid note count range");
  }
  if (config.max_evidence_per_note == 0) throw Error("max_evidence_per_note must be positive");
  if (!(config.ci_fraction >= 0.0 && config.ci_fraction <= 1.0) ||
      !(config.confounder_rate >= 0.0 && config.confounder_rate <= 1.0)) {
    throw Error("ci_fraction and confounder_rate must lie in [0, 1]");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> age(config.age_mean, config.age_sd);
  std::uniform_int_distribution<std::size_t> note_count(config.min_notes, config.max_notes);
  std::uniform_int_distribution<std::size_t> evidence_count(1, config.max_evidence_per_note);

  const Lexicon lexicon = default_lexicon();
  std::size_t generic_cursor = 0;
  std::size_t note_serial = 0;

  SynthCorpus out;
  for (std::size_t p = 0; p < config.patients; ++p) {
    const bool ci = unit(rng) < config.ci_fraction;
    PatientRecord patient;
    patient.patient_id = format_id('P', p + 1, 6);
    patient.age_years = std::round(std::max(config.min_age, age(rng)) * 10.0) / 10.0;
    patient.gender = unit(rng) < config.male_fraction ? Gender::male : Gender::female;
    patient.apoe = draw_apoe(ci, rng);
    patient.med_icd_flag =
        unit(rng) < (ci ? config.med_icd_given_ci : config.med_icd_given_healthy);
    out.ci_positive[patient.patient_id] = ci;
    out.corpus.add_patient(patient);

    const std::size_t n_notes = note_count(rng);
    for (std::size_t k = 0; k < n_notes; ++k) {
      NoteBuilder builder(rng);
      builder.filler();
      if (k == 0) {
        const auto& entry = lexicon.entries()[generic_cursor++ % lexicon.size()];
        std::string tmpl = kGenericTemplate;
        tmpl.replace(tmpl.find("{kw}"), 4, "[[" + entry.keyword + "]]");
        builder.evidence(tmpl, Label::neither, false);
        builder.filler();
      }
      const std::size_t n_evidence = evidence_count(rng);
      for (std::size_t e = 0; e < n_evidence; ++e) {
        Label label;
        if (ci && k == 0 && e == 0) {
          label = Label::yes;
        } else if (ci) {
          const double u = unit(rng);
          label = u < 0.55 ? Label::yes : (u < 0.85 ? Label::neither : Label::no);
        } else {
          label = unit(rng) < 0.5 ? Label::no : Label::neither;
        }
        const auto& bank = label == Label::yes  ? kYesTemplates
                           : label == Label::no ? kNoTemplates
                                                : kNeitherTemplates;
        builder.evidence(pick_from(bank, rng), label, false);
        builder.filler();
      }
      if (config.confounder_rate > 0.0 && unit(rng) < config.confounder_rate) {
        builder.evidence(pick_from(kConfounderTemplates, rng), Label::neither, true);
        builder.filler();
      }

      Note note;
      note.note_id = format_id('N', ++note_serial, 7);
      note.patient_id = patient.patient_id;
      note.timestamp = random_date(rng);
      note.text = builder.take_text();
      for (auto& m : builder.take_planted()) {
        m.note_id = note.note_id;
        out.planted.push_back(std::move(m));
      }
      out.corpus.add_note(std::move(note));
    }
  }

  // Canonical lexicon spelling for every planted keyword.
  for (auto& m : out.planted) {
    for (const auto& entry : lexicon.entries()) {
      if (ascii_lower(entry.keyword) == ascii_lower(m.keyword)) {
        m.keyword = entry.keyword;
        break;
      }
    }
  }
  std::sort(out.planted.begin(), out.planted.end(), [](const auto& a, const auto& b) {
    return std::tie(a.note_id, a.offset) < std::tie(b.note_id, b.offset);
  });
  return out;
}

std::map<std::string, Label> gold_labels(const SynthCorpus& synth,
                                         const std::vector<Sequence>& sequences) {
  std::map<std::pair<std::string, std::size_t>, Label> by_offset;
  for (const auto& m : synth.planted) by_offset[{m.note_id, m.offset}] = m.label;
  std::map<std::string, Label> gold;
  for (const auto& s : sequences) {
    auto it = by_offset.find({s.note_id, s.match_offset});
    if (it != by_offset.end()) gold[s.sequence_id] = it->second;
  }
  return gold;
}

}  // namespace ciphen
