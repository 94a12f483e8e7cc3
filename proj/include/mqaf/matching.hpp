#pragma once

#include <cstdint>
#include <string>

#include "mqaf/tensor.hpp"

namespace mqaf {

// Which axis the decorrelation covariance runs over: the K memory units
// (rows, default) or the D feature dimensions (columns).
enum class CovarianceAxis { kUnits, kDims };

std::string covariance_axis_name(CovarianceAxis axis);
CovarianceAxis covariance_axis_from_name(const std::string& name);

// K x D matrix of trainable distortion-pattern prototypes.
struct MemoryBank {
  Tensor units;  // [K, D], requires_grad

  std::size_t size() const { return units.shape()[0]; }
  std::size_t dim() const { return units.shape()[1]; }
};

MemoryBank init_memory_bank(std::size_t units, std::size_t dim,
                            std::uint64_t seed);

// Similarity between the pooled reference and distorted feature vectors:
// s_cos is the cosine, s_norm compares magnitudes, s_ref is their product.
struct ReferenceMatch {
  Tensor s_ref;
  Tensor s_cos;
  Tensor s_norm;
  bool degenerate = false;  // either input was exactly the zero vector
};

ReferenceMatch reference_match(const Tensor& f_ref, const Tensor& f_dist);

// Matches every location of the distorted feature map against every bank
// unit (1x1 cross-correlation of unit-normalized vectors), pools the
// responses globally into a K-vector m, and returns ||m|| / sqrt(K), which
// lies in [0,1].
Tensor memory_match(const Tensor& map_dist, const MemoryBank& bank);

// The pooled K-vector m itself (memory_match is its scaled norm).
Tensor memory_response(const Tensor& map_dist, const MemoryBank& bank);

// Decorrelation penalty on the bank: ||C||_F - sum_i sqrt(C_ii^2 + eps)
// where C is the covariance of the units (or of the feature dimensions,
// depending on axis). Can be negative; used exactly as defined.
Tensor decorrelation_loss(const MemoryBank& bank, double eps = 1e-8,
                          CovarianceAxis axis = CovarianceAxis::kUnits);

// K x K matrix of cosines between bank rows (diagnostic export).
std::vector<double> bank_row_cosines(const MemoryBank& bank);

// Mean |cosine| over off-diagonal row pairs; the redundancy statistic the
// decorrelation loss is meant to push down.
double mean_offdiag_abs_cosine(const MemoryBank& bank);

}  // namespace mqaf
