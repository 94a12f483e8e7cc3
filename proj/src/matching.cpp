#include "mqaf/matching.hpp"

#include <cmath>

#include "mqaf/ops.hpp"
#include "mqaf/rng.hpp"

namespace mqaf {

std::string covariance_axis_name(CovarianceAxis axis) {
  return axis == CovarianceAxis::kUnits ? "units" : "dims";
}

CovarianceAxis covariance_axis_from_name(const std::string& name) {
  if (name == "units") return CovarianceAxis::kUnits;
  if (name == "dims") return CovarianceAxis::kDims;
  throw ConfigError("covariance_axis must be 'units' or 'dims', got '" +
                    name + "'");
}

MemoryBank init_memory_bank(std::size_t units, std::size_t dim,
                            std::uint64_t seed) {
  if (units < 1) throw ConfigError("memory bank needs at least one unit");
  if (dim < 2) throw ConfigError("memory bank dimension must be >= 2");
  Rng rng(seed);
  // Gaussian rows scaled to roughly unit norm; matching normalizes rows
  // anyway, the scale only conditions early training.
  std::vector<double> v(units * dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& x : v) x = scale * rng.normal();
  return MemoryBank{Tensor(Shape{units, dim}, std::move(v), true)};
}

ReferenceMatch reference_match(const Tensor& f_ref, const Tensor& f_dist) {
  if (f_ref.rank() != 1 || f_dist.rank() != 1 ||
      f_ref.shape() != f_dist.shape())
    throw ShapeError("reference_match: shape mismatch " +
                     shape_str(f_ref.shape()) + " vs " +
                     shape_str(f_dist.shape()));

  const Tensor norm_ref = l2_norm(f_ref);
  const Tensor norm_dist = l2_norm(f_dist);
  ReferenceMatch out;
  if (norm_ref.item() == 0.0 || norm_dist.item() == 0.0) {
    // Defined fallback for degenerate inputs: both scores zero, no throw.
    out.s_cos = Tensor::scalar(0.0);
    out.s_norm = Tensor::scalar(0.0);
    out.s_ref = Tensor::scalar(0.0);
    out.degenerate = true;
    return out;
  }
  const Tensor dot = sum(mul(f_ref, f_dist));
  out.s_cos = div(dot, mul(norm_ref, norm_dist));
  out.s_norm = add_scalar(
      neg(div(abs_smooth(sub(norm_ref, norm_dist)),
              maximum(norm_ref, norm_dist))),
      1.0);
  out.s_ref = mul(out.s_cos, out.s_norm);
  return out;
}

Tensor memory_response(const Tensor& map_dist, const MemoryBank& bank) {
  if (map_dist.rank() != 3)
    throw ShapeError("memory_match: feature map must be [D,H,W], got " +
                     shape_str(map_dist.shape()));
  if (map_dist.shape()[0] != bank.dim())
    throw ShapeError("memory_match: map channels " +
                     shape_str(map_dist.shape()) + " do not match bank " +
                     shape_str(bank.units.shape()));
  const std::size_t K = bank.size(), D = bank.dim();
  // Unit-normalize both sides so each response is a cosine; normalizing an
  // already unit-norm map is a no-op.
  const Tensor map_n = channel_l2_normalize(map_dist);
  const Tensor bank_n = row_l2_normalize(bank.units);
  const Tensor kernels = reshape(bank_n, {K, D, 1, 1});
  const Tensor responses = conv2d(map_n, kernels, 0);  // [K,H,W] of cosines
  return global_avg_pool(responses);                   // [K]
}

Tensor memory_match(const Tensor& map_dist, const MemoryBank& bank) {
  const Tensor m = memory_response(map_dist, bank);
  const double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(bank.size()));
  return mul_scalar(l2_norm(m), inv_sqrt_k);
}

Tensor decorrelation_loss(const MemoryBank& bank, double eps,
                          CovarianceAxis axis) {
  if (bank.size() < 2)
    throw ShapeError("decorrelation_loss: need at least 2 memory units");
  const Tensor cov = axis == CovarianceAxis::kUnits
                         ? row_covariance(bank.units)             // [K,K]
                         : row_covariance(transpose(bank.units)); // [D,D]
  const Tensor frob = frobenius_norm(cov);
  const Tensor diag_term = sum(sqrt_smooth(square(diagonal(cov)), eps));
  return sub(frob, diag_term);
}

std::vector<double> bank_row_cosines(const MemoryBank& bank) {
  const std::size_t K = bank.size(), D = bank.dim();
  const auto& v = bank.units.values();
  std::vector<double> norms(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    double acc = 0.0;
    for (std::size_t d = 0; d < D; ++d) acc += v[k * D + d] * v[k * D + d];
    norms[k] = std::sqrt(acc);
  }
  std::vector<double> out(K * K, 0.0);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < D; ++d) dot += v[i * D + d] * v[j * D + d];
      const double den = norms[i] * norms[j];
      out[i * K + j] = den == 0.0 ? 0.0 : dot / den;
    }
  return out;
}

double mean_offdiag_abs_cosine(const MemoryBank& bank) {
  const std::size_t K = bank.size();
  if (K < 2) return 0.0;
  const auto cos = bank_row_cosines(bank);
  double acc = 0.0;
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j)
      if (i != j) acc += std::abs(cos[i * K + j]);
  return acc / static_cast<double>(K * (K - 1));
}

}  // namespace mqaf
