#pragma once

#include <string>
#include <vector>

#include "mqaf/checkpoint.hpp"
#include "mqaf/corpus.hpp"

namespace mqaf {

struct EpochStats {
  std::size_t epoch = 0;
  double l_pre = 0.0;
  double l_memory = 0.0;
  double l_alpha = 0.0;
  double mean_alpha = 0.0;
  double val_plcc = 0.0;  // NaN when there is no validation split
  double val_srcc = 0.0;
};

struct TrainResult {
  ModelState state;  // best validation SRCC (final state if no split)
  std::vector<EpochStats> log;
  std::size_t best_epoch = 0;
  double best_val_srcc = 0.0;
  std::vector<std::string> train_ref_ids;
  std::vector<std::string> val_ref_ids;
};

// Deterministic joint training of extractor, memory bank and AWN. The
// validation split holds out whole reference ids (90/10), never individual
// samples. Batches draw aligned random crops; validation scores use center
// crops. Aborts with a NumericError naming epoch/step when the loss goes
// non-finite.
TrainResult train(const CorpusManifest& manifest, const RunConfig& config);

// CSV rendering of the per-epoch log with the provenance header.
std::string metrics_csv(const TrainResult& result, const RunConfig& config);

// Backward each loss term in isolation on one sample and verify it touches
// exactly the parameter groups it may touch. Runs at the top of every
// training; throws Error on violation.
void audit_gradient_routing(const ModelState& model,
                            const ImageBuffer& ref_crop,
                            const ImageBuffer& dist_crop, double q_true);

}  // namespace mqaf
