#include "mqaf/fusion.hpp"

#include <cmath>

#include "mqaf/ops.hpp"
#include "mqaf/rng.hpp"

namespace mqaf {

AwnParams init_awn(std::size_t feature_dim, std::size_t hidden,
                   std::uint64_t seed) {
  if (feature_dim < 1 || hidden < 1)
    throw ConfigError("init_awn: dimensions must be positive");
  Rng rng(seed);
  const std::size_t in = 2 * feature_dim;
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  std::vector<double> w1(hidden * in);
  for (auto& v : w1) v = rng.uniform(-bound, bound);
  AwnParams awn;
  awn.w1 = Tensor(Shape{hidden, in}, std::move(w1), true);
  awn.b1 = Tensor::zeros({hidden}, true);
  awn.w2 = Tensor::zeros({1, hidden}, true);
  awn.b2 = Tensor::zeros({1}, true);
  return awn;
}

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t out_dim = w.shape()[0];
  const Tensor col = reshape(x, {x.numel(), 1});
  return add(reshape(matmul(w, col), {out_dim}), b);
}

}  // namespace

Tensor adaptive_weight(const Tensor& f_ref, const Tensor& f_dist,
                       const AwnParams& awn) {
  if (f_ref.rank() != 1 || f_dist.rank() != 1)
    throw ShapeError("adaptive_weight: feature vectors must be 1-D");
  const Tensor input = concat(detach(f_dist), detach(f_ref));
  if (input.numel() != awn.input_dim())
    throw ShapeError("adaptive_weight: input " + shape_str(input.shape()) +
                     " does not match AWN " + shape_str(awn.w1.shape()));
  const Tensor h = relu(linear(input, awn.w1, awn.b1));
  const Tensor out = linear(h, awn.w2, awn.b2);
  return reshape(sigmoid(out), {});
}

double alpha_target(double s_ref, double s_dist, double q_true,
                    bool inverted) {
  const double e_dist = std::exp(std::abs(s_dist - q_true));
  const double e_ref = std::exp(std::abs(s_ref - q_true));
  const double num = inverted ? e_ref : e_dist;
  return num / (e_dist + e_ref);
}

Tensor quality_score(const std::optional<Tensor>& s_ref, const Tensor& s_dist,
                     const std::optional<Tensor>& alpha, ScoreMode mode,
                     bool detach_alpha) {
  if (mode == ScoreMode::kNoReference) {
    if (s_ref || alpha)
      throw Error("quality_score: NR mode takes no s_ref or alpha");
    return s_dist;
  }
  if (!s_ref || !alpha)
    throw Error("quality_score: FR mode requires s_ref and alpha");
  const Tensor a = detach_alpha ? detach(*alpha) : *alpha;
  const Tensor one_minus_a = add_scalar(neg(a), 1.0);
  return add(mul(a, *s_ref), mul(one_minus_a, s_dist));
}

LossBreakdown total_loss(const std::vector<SamplePrediction>& batch,
                         const MemoryBank& bank, double lambda,
                         double decorrelation_eps, CovarianceAxis axis,
                         bool memory_enabled) {
  if (batch.empty()) throw Error("total_loss: empty batch");

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Tensor l_pre;
  for (const auto& s : batch) {
    const Tensor err = square(add_scalar(s.q, -s.q_true));
    l_pre = l_pre.defined() ? add(l_pre, err) : err;
  }
  l_pre = mul_scalar(l_pre, inv_n);

  Tensor l_alpha;
  std::size_t fr_count = 0;
  for (const auto& s : batch) {
    if (!s.alpha) continue;
    ++fr_count;
    const Tensor err = square(add_scalar(*s.alpha, -*s.alpha_target));
    l_alpha = l_alpha.defined() ? add(l_alpha, err) : err;
  }
  if (fr_count > 0)
    l_alpha = mul_scalar(l_alpha, 1.0 / static_cast<double>(fr_count));

  LossBreakdown out;
  out.lambda = lambda;
  out.l_pre = l_pre.item();
  out.total = l_pre;
  if (memory_enabled) {
    const Tensor l_mem = decorrelation_loss(bank, decorrelation_eps, axis);
    out.l_memory = l_mem.item();
    if (lambda != 0.0)
      out.total = add(out.total, mul_scalar(l_mem, lambda));
  }
  if (fr_count > 0) {
    out.l_alpha = l_alpha.item();
    out.total = add(out.total, l_alpha);
  }
  out.l_total = out.total.item();
  return out;
}

}  // namespace mqaf
