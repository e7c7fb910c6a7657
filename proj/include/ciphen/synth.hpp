#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ciphen/corpus.hpp"
#include "ciphen/labels.hpp"

namespace ciphen {

struct SynthConfig {
  std::size_t patients = 200;
  double ci_fraction = 0.2;
  // Per-note probability of a third-party mention (e.g. a caregiver for a
  // relative with dementia). Always labeled Neither.
  double confounder_rate = 0.15;
  std::size_t min_notes = 1;
  std::size_t max_notes = 4;
  std::size_t max_evidence_per_note = 3;
  double age_mean = 73.01;
  double age_sd = 7.96;
  double min_age = 60.0;
  double male_fraction = 0.532;
  // P(med/ICD flag | CI) and P(med/ICD flag | no CI)
  double med_icd_given_ci = 0.55;
  double med_icd_given_healthy = 0.03;
};

struct PlantedMatch {
  std::string note_id;
  std::size_t offset = 0;
  std::size_t length = 0;
  std::string keyword;  // lexicon spelling
  Label label = Label::neither;
  bool confounder = false;
};

struct SynthCorpus {
  Corpus corpus;
  std::vector<PlantedMatch> planted;  // ordered by (note_id, offset)
  std::map<std::string, bool> ci_positive;
};

/// Deterministic for a fixed (config, seed). Notes are built from evidence
/// sentences separated by keyword-free filler so that every 800-character
/// window around a keyword sees exactly one evidence sentence. Each
/// patient's first note also carries one uninformative mention whose
/// keyword cycles through the default lexicon, so a corpus of 18 or more
/// patients exercises every keyword.
SynthCorpus generate_synthetic_corpus(const SynthConfig& config, std::uint64_t seed);

// Gold label of each sequence, looked up from the planted match at its
// offset. Sequences without a planted match are omitted.
std::map<std::string, Label> gold_labels(const SynthCorpus& synth,
                                         const std::vector<Sequence>& sequences);

}  // namespace ciphen
