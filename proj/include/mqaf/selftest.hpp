#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mqaf/tensor.hpp"

namespace mqaf::selftest {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;  // worst error, counterexample, ...
};

// Central-difference gradient check of a scalar-valued graph builder
// against the recorded adjoints. Returns the max relative error across all
// input elements.
using GraphFn = std::function<Tensor(const std::vector<Tensor>&)>;
double max_rel_grad_error(const GraphFn& f, const std::vector<Tensor>& inputs,
                          double h = 1e-5);

// Every differentiable primitive plus the matching/fusion composites,
// `trials` random instances each, f64, threshold 1e-4.
std::vector<Check> gradient_suite(std::uint64_t seed, std::size_t trials);

// Implementation-vs-oracle equivalences: memory matching vs a triple loop,
// decorrelation loss vs a plain transcription, correlations vs direct
// formulas, Adam vs a 3-step hand trace, gMAD vs exhaustive search, and
// the distortion/PSNR ordering.
std::vector<Check> oracle_suite(std::uint64_t seed);

// Exact contracts: bitwise NR == s_dist, alpha=0 FR == NR, loss routing
// leaves untouched groups bitwise intact, byte-identical checkpoint and
// PPM round trips, corpus determinism.
std::vector<Check> contract_suite(std::uint64_t seed);

std::vector<Check> run_all(std::uint64_t seed = 20240101);
bool all_passed(const std::vector<Check>& checks);

}  // namespace mqaf::selftest
