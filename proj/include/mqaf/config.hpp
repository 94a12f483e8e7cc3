#pragma once

#include <cstdint>
#include <string>

#include "mqaf/corpus.hpp"
#include "mqaf/extractor.hpp"
#include "mqaf/matching.hpp"

namespace mqaf {

// Flat key=value run configuration. Every knob has a documented default;
// unknown keys are rejected; parse -> print -> parse is the identity.
struct RunConfig {
  std::uint64_t seed = 42;

  CorpusConfig corpus;

  ExtractorConfig extractor;

  struct Memory {
    std::size_t units = 32;  // key memory.K
    double lambda = 0.1;
    double epsilon = 1e-8;
    CovarianceAxis covariance_axis = CovarianceAxis::kUnits;
    bool enabled = true;
  } memory;

  struct Fusion {
    std::size_t hidden = 64;
    bool alpha_target_inverted = false;
    bool detach_alpha_in_q = false;
  } fusion;

  struct Training {
    double learning_rate = 8e-5;
    double weight_decay = 1e-5;
    std::size_t batch_size = 16;
    std::size_t epochs = 40;
    double mode_mix = 1.0;  // fraction of FR batches
  } training;

  struct Evaluation {
    double gmad_tolerance = 0.02;
    std::size_t gmad_top = 5;
  } evaluation;

  struct Paths {
    std::string corpus_dir = "corpus";
    std::string out_dir = "out";
  } paths;

  void validate() const;

  // Canonical byte-stable rendering (fixed key order and number format).
  std::string print() const;
  std::string config_hash() const;  // 16 hex digits over print()

  // Applies a single "section.key=value" override (CLI flags win over the
  // file). Throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  static RunConfig parse_text(const std::string& text,
                              const std::string& origin);
  static RunConfig parse_file(const std::string& path);
};

// "# <tool> <version>\n# config_hash=.. seed=..\n" block stamped into every
// machine-readable output.
std::string provenance_block(const RunConfig& config);

}  // namespace mqaf
