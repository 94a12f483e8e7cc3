#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mqaf/checkpoint.hpp"
#include "mqaf/corpus.hpp"
#include "mqaf/scoring.hpp"
#include "mqaf/trainer.hpp"

namespace mqaf {

struct TypeCorrelation {
  std::string type;
  double plcc = 0.0;
  double srcc = 0.0;
  std::size_t n = 0;
};

struct EvalReport {
  std::string split;
  ScoreMode mode = ScoreMode::kNoReference;
  double plcc = 0.0;
  double srcc = 0.0;
  std::size_t n = 0;
  std::vector<TypeCorrelation> per_type;  // types with n >= 2 only
  std::size_t skipped = 0;                // samples dropped (missing refs)
};

struct SampleScore {
  std::string id;
  double s_ref = 0.0;
  double s_dist = 0.0;
  double alpha = 0.0;
  double q = 0.0;
  double q_true = 0.0;
  bool has_fr_fields = false;
};

// Deterministic center-crop evaluation over the distorted samples of
// `subset`. FR samples whose reference file cannot be read are skipped and
// counted. Per-sample scores are appended to `dump` when given.
EvalReport evaluate(const ModelState& model,
                    const std::vector<SampleRecord>& subset,
                    const CorpusManifest& manifest, ScoreMode mode,
                    std::vector<SampleScore>* dump = nullptr);

// Leave-one-distortion-out: for each type train on every other type and
// evaluate on the held-out one. Types with fewer than 2 samples are
// skipped with a warning pushed to `warnings`.
std::vector<EvalReport> lodo_eval(
    const std::function<ModelState(const CorpusManifest&)>& train_fn,
    const CorpusManifest& manifest, ScoreMode eval_mode,
    std::vector<std::string>* warnings = nullptr);

struct GmadPair {
  std::string id_a;  // lexicographically first
  std::string id_b;
  double defender_gap = 0.0;
  double attacker_gap = 0.0;
};

// Exhaustive pair scan: among pairs the defender scores within `tolerance`
// of each other, the top_m with the largest attacker disagreement,
// descending, ties broken by (id_a, id_b).
std::vector<GmadPair> gmad_search_scores(const std::vector<std::string>& ids,
                                         const std::vector<double>& defender,
                                         const std::vector<double>& attacker,
                                         double tolerance, std::size_t top_m);

// Scores the manifest's distorted samples with the defender model (NR mode
// unless the attacker needs references) and an arbitrary attacker scorer.
std::vector<GmadPair> gmad_search(
    const ModelState& defender,
    const std::function<double(const SampleRecord&, const CorpusManifest&)>&
        attacker,
    const CorpusManifest& manifest, ScoreMode defender_mode, double tolerance,
    std::size_t top_m);

// PSNR of a distorted sample against its reference; the stock gMAD
// attacker baseline.
double psnr_attacker(const SampleRecord& rec, const CorpusManifest& manifest);

// Renderings (CSV with provenance header).
std::string report_csv(const std::vector<EvalReport>& reports,
                       const RunConfig& config);
std::string sample_dump_csv(const std::vector<SampleScore>& scores,
                            const RunConfig& config);
std::string gmad_csv(const std::vector<GmadPair>& pairs,
                     const RunConfig& config);
std::string bank_cosine_csv(const ModelState& model);

}  // namespace mqaf
