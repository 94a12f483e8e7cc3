#include "mqaf/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "mqaf/checkpoint.hpp"
#include "mqaf/corpus.hpp"
#include "mqaf/evaluation.hpp"
#include "mqaf/metrics.hpp"
#include "mqaf/ops.hpp"
#include "mqaf/optimizer.hpp"
#include "mqaf/rng.hpp"
#include "mqaf/scoring.hpp"
#include "mqaf/textio.hpp"

namespace fs = std::filesystem;

namespace mqaf::selftest {

namespace {

constexpr double kGradTolerance = 1e-4;

Tensor random_tensor(Rng& rng, Shape shape, bool requires_grad,
                     double lo = 0.2, double hi = 1.5, bool signed_vals = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) {
    x = rng.uniform(lo, hi);
    if (signed_vals && rng.uniform() < 0.5) x = -x;
  }
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Fixed random linear functional turning any op output into a scalar; more
// sensitive to index mix-ups than a plain sum.
Tensor weighted_sum(const Tensor& t, const std::vector<double>& w) {
  Tensor weights(t.shape(), w);
  return sum(mul(t, weights));
}

std::string fmt_err(double err) {
  std::ostringstream os;
  os << "max rel err " << err;
  return os.str();
}

}  // namespace

double max_rel_grad_error(const GraphFn& f, const std::vector<Tensor>& inputs,
                          double h) {
  // Analytic pass on requires_grad clones of the inputs.
  std::vector<Tensor> tracked;
  tracked.reserve(inputs.size());
  for (const auto& in : inputs)
    tracked.emplace_back(in.shape(), in.values(), true);
  const Tensor loss = f(tracked);
  if (loss.numel() != 1)
    throw Error("gradcheck: graph function must return a scalar");
  loss.backward();

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::vector<double> analytic =
        tracked[k].has_grad()
            ? tracked[k].grad()
            : std::vector<double>(tracked[k].numel(), 0.0);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      auto eval_at = [&](double delta) {
        std::vector<Tensor> probe;
        probe.reserve(inputs.size());
        for (std::size_t m = 0; m < inputs.size(); ++m) {
          std::vector<double> vals = inputs[m].values();
          if (m == k) vals[i] += delta;
          probe.emplace_back(inputs[m].shape(), std::move(vals), false);
        }
        return f(probe).item();
      };
      const double fd = (eval_at(h) - eval_at(-h)) / (2.0 * h);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(fd), 1e-6});
      worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
    }
  }
  return worst;
}

namespace {

struct GradCase {
  std::string name;
  // Builds fresh random inputs and the graph function for one trial.
  std::function<double(Rng&)> run;  // returns max rel error for the trial
};

double check_unary(Rng& rng, const std::function<Tensor(const Tensor&)>& op,
                   Shape shape, double lo, double hi, bool signed_vals) {
  const Tensor x = random_tensor(rng, shape, false, lo, hi, signed_vals);
  std::vector<double> w(op(x).numel());
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);
  return max_rel_grad_error(
      [&](const std::vector<Tensor>& in) { return weighted_sum(op(in[0]), w); },
      {x});
}

double check_binary(Rng& rng,
                    const std::function<Tensor(const Tensor&, const Tensor&)>& op,
                    Shape sa, Shape sb, bool avoid_close = false) {
  Tensor a = random_tensor(rng, sa, false);
  Tensor b = random_tensor(rng, sb, false);
  if (avoid_close) {
    // Keep |a-b| away from 0 so max/abs kinks cannot straddle the stencil.
    auto& av = a.mutable_values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i)
      if (std::abs(av[i] - bv[i]) < 0.05) av[i] += av[i] >= bv[i] ? 0.1 : -0.1;
  }
  const Tensor out = op(a, b);
  std::vector<double> w(out.numel());
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);
  return max_rel_grad_error(
      [&](const std::vector<Tensor>& in) {
        return weighted_sum(op(in[0], in[1]), w);
      },
      {a, b});
}

std::vector<GradCase> primitive_grad_cases() {
  std::vector<GradCase> cases;
  auto add_case = [&](std::string name, std::function<double(Rng&)> run) {
    cases.push_back({std::move(name), std::move(run)});
  };

  add_case("add", [](Rng& rng) {
    return check_binary(rng, [](auto& a, auto& b) { return add(a, b); },
                        {3, 4}, {3, 4});
  });
  add_case("sub", [](Rng& rng) {
    return check_binary(rng, [](auto& a, auto& b) { return sub(a, b); },
                        {7}, {7});
  });
  add_case("mul", [](Rng& rng) {
    return check_binary(rng, [](auto& a, auto& b) { return mul(a, b); },
                        {2, 3}, {2, 3});
  });
  add_case("div", [](Rng& rng) {
    // Denominator stays away from zero by construction (|b| >= 0.2).
    return check_binary(rng, [](auto& a, auto& b) { return div(a, b); },
                        {5}, {5});
  });
  add_case("maximum", [](Rng& rng) {
    return check_binary(rng, [](auto& a, auto& b) { return maximum(a, b); },
                        {6}, {6}, /*avoid_close=*/true);
  });
  add_case("add_scalar", [](Rng& rng) {
    const double c = rng.uniform(-2.0, 2.0);
    return check_unary(rng, [c](auto& x) { return add_scalar(x, c); }, {4},
                       0.2, 1.5, true);
  });
  add_case("mul_scalar", [](Rng& rng) {
    const double c = rng.uniform(-2.0, 2.0);
    return check_unary(rng, [c](auto& x) { return mul_scalar(x, c); }, {4},
                       0.2, 1.5, true);
  });
  add_case("neg", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return neg(x); }, {5}, 0.2, 1.5,
                       true);
  });
  add_case("square", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return square(x); }, {5}, 0.2, 1.5,
                       true);
  });
  add_case("reshape", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return reshape(x, {6}); }, {2, 3},
                       0.2, 1.5, true);
  });
  add_case("concat", [](Rng& rng) {
    return check_binary(rng, [](auto& a, auto& b) { return concat(a, b); },
                        {3}, {4});
  });
  add_case("diagonal", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return diagonal(x); }, {4, 4}, 0.2,
                       1.5, true);
  });
  add_case("matmul", [](Rng& rng) {
    return check_binary(rng, [](auto& a, auto& b) { return matmul(a, b); },
                        {3, 4}, {4, 2});
  });
  add_case("transpose", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return transpose(x); }, {3, 5}, 0.2,
                       1.5, true);
  });
  add_case("conv2d_pad0", [](Rng& rng) {
    return check_binary(rng,
                        [](auto& a, auto& b) { return conv2d(a, b, 0); },
                        {2, 5, 5}, {3, 2, 3, 3});
  });
  add_case("conv2d_pad1", [](Rng& rng) {
    return check_binary(rng,
                        [](auto& a, auto& b) { return conv2d(a, b, 1); },
                        {2, 4, 4}, {3, 2, 3, 3});
  });
  add_case("conv2d_1x1", [](Rng& rng) {
    return check_binary(rng,
                        [](auto& a, auto& b) { return conv2d(a, b, 0); },
                        {3, 4, 4}, {2, 3, 1, 1});
  });
  add_case("add_channel_bias", [](Rng& rng) {
    return check_binary(
        rng, [](auto& a, auto& b) { return add_channel_bias(a, b); },
        {3, 4, 4}, {3});
  });
  add_case("relu", [](Rng& rng) {
    // Inputs bounded away from the kink at zero.
    return check_unary(rng, [](auto& x) { return relu(x); }, {8}, 0.2, 1.5,
                       true);
  });
  add_case("exp", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return exp(x); }, {5}, 0.2, 1.5,
                       true);
  });
  add_case("sigmoid", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return sigmoid(x); }, {5}, 0.2, 2.5,
                       true);
  });
  add_case("sqrt_smooth", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return sqrt_smooth(x, 1e-8); }, {5},
                       0.2, 2.0, false);
  });
  add_case("abs_smooth", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return abs_smooth(x); }, {5}, 0.2,
                       1.5, true);
  });
  add_case("sum", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return sum(x); }, {3, 3}, 0.2, 1.5,
                       true);
  });
  add_case("mean", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return mean(x); }, {7}, 0.2, 1.5,
                       true);
  });
  add_case("l2_norm", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return l2_norm(x); }, {6}, 0.2, 1.5,
                       true);
  });
  add_case("frobenius_norm", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return frobenius_norm(x); }, {3, 4},
                       0.2, 1.5, true);
  });
  add_case("avg_pool", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return avg_pool(x, 2); }, {2, 4, 4},
                       0.2, 1.5, true);
  });
  add_case("global_avg_pool", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return global_avg_pool(x); },
                       {3, 4, 4}, 0.2, 1.5, true);
  });
  add_case("l2_normalize", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return l2_normalize(x); }, {6}, 0.2,
                       1.5, true);
  });
  add_case("row_l2_normalize", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return row_l2_normalize(x); },
                       {3, 5}, 0.2, 1.5, true);
  });
  add_case("channel_l2_normalize", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return channel_l2_normalize(x); },
                       {3, 3, 3}, 0.2, 1.5, true);
  });
  add_case("row_covariance", [](Rng& rng) {
    return check_unary(rng, [](auto& x) { return row_covariance(x); }, {4, 6},
                       0.2, 1.5, true);
  });

  // Composites the losses are built from.
  add_case("reference_match_s_ref", [](Rng& rng) {
    const Tensor a = random_tensor(rng, {6}, false);
    const Tensor b = random_tensor(rng, {6}, false);
    return max_rel_grad_error(
        [](const std::vector<Tensor>& in) {
          return reference_match(in[0], in[1]).s_ref;
        },
        {a, b});
  });
  add_case("memory_match", [](Rng& rng) {
    const Tensor map = random_tensor(rng, {4, 3, 3}, false);
    const Tensor bank = random_tensor(rng, {3, 4}, false);
    return max_rel_grad_error(
        [](const std::vector<Tensor>& in) {
          return memory_match(in[0], MemoryBank{in[1]});
        },
        {map, bank});
  });
  add_case("decorrelation_loss", [](Rng& rng) {
    const Tensor bank = random_tensor(rng, {4, 6}, false);
    return max_rel_grad_error(
        [](const std::vector<Tensor>& in) {
          return decorrelation_loss(MemoryBank{in[0]}, 1e-8);
        },
        {bank});
  });
  add_case("fused_quality_score", [](Rng& rng) {
    const Tensor map = random_tensor(rng, {4, 3, 3}, false);
    const Tensor bank = random_tensor(rng, {3, 4}, false);
    const Tensor f_ref = random_tensor(rng, {4}, false);
    const double alpha_v = rng.uniform(0.1, 0.9);
    return max_rel_grad_error(
        [alpha_v](const std::vector<Tensor>& in) {
          const Tensor f_dist = global_avg_pool(in[0]);
          const auto rm = reference_match(in[2], f_dist);
          const Tensor s_dist = memory_match(in[0], MemoryBank{in[1]});
          const Tensor alpha = Tensor::scalar(alpha_v);
          return quality_score(rm.s_ref, s_dist, alpha,
                               ScoreMode::kFullReference);
        },
        {map, bank, f_ref});
  });
  return cases;
}

}  // namespace

std::vector<Check> gradient_suite(std::uint64_t seed, std::size_t trials) {
  std::vector<Check> checks;
  for (auto& c : primitive_grad_cases()) {
    Rng rng(hash_mix(seed, fnv1a64(c.name.data(), c.name.size())));
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t)
      worst = std::max(worst, c.run(rng));
    checks.push_back({"grad/" + c.name, worst < kGradTolerance,
                      fmt_err(worst)});
  }
  return checks;
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

namespace {

double memory_match_bruteforce(const std::vector<double>& map, std::size_t C,
                               std::size_t H, std::size_t W,
                               const std::vector<double>& bank, std::size_t K) {
  std::vector<double> pooled(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    double acc = 0.0;
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w) {
        double dot = 0.0, nv = 0.0, nb = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
          const double mv = map[(c * H + h) * W + w];
          const double bv = bank[k * C + c];
          dot += mv * bv;
          nv += mv * mv;
          nb += bv * bv;
        }
        const double den = std::sqrt(nv) * std::sqrt(nb);
        acc += den == 0.0 ? 0.0 : dot / den;
      }
    pooled[k] = acc / static_cast<double>(H * W);
  }
  double nrm = 0.0;
  for (double m : pooled) nrm += m * m;
  return std::sqrt(nrm) / std::sqrt(static_cast<double>(K));
}

double decorrelation_bruteforce(const std::vector<double>& bank, std::size_t K,
                                std::size_t D, double eps) {
  std::vector<double> centered(K * D);
  for (std::size_t k = 0; k < K; ++k) {
    double mean = 0.0;
    for (std::size_t d = 0; d < D; ++d) mean += bank[k * D + d];
    mean /= static_cast<double>(D);
    for (std::size_t d = 0; d < D; ++d)
      centered[k * D + d] = bank[k * D + d] - mean;
  }
  double frob_sq = 0.0, diag_sum = 0.0;
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      double cij = 0.0;
      for (std::size_t d = 0; d < D; ++d)
        cij += centered[i * D + d] * centered[j * D + d];
      cij /= static_cast<double>(D - 1);
      frob_sq += cij * cij;
      if (i == j) diag_sum += std::sqrt(cij * cij + eps);
    }
  return std::sqrt(frob_sq) - diag_sum;
}

double plcc_direct(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    dx += (x[i] - mx) * (x[i] - mx);
    dy += (y[i] - my) * (y[i] - my);
  }
  return num / (std::sqrt(dx) * std::sqrt(dy));
}

// O(n^2) ranks, valid for tie-free data only.
std::vector<double> simple_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t below = 0;
    for (std::size_t j = 0; j < x.size(); ++j)
      if (x[j] < x[i]) ++below;
    r[i] = static_cast<double>(below) + 1.0;
  }
  return r;
}

double srcc_closed_form(const std::vector<double>& x,
                        const std::vector<double>& y) {
  const auto rx = simple_ranks(x);
  const auto ry = simple_ranks(y);
  const double n = static_cast<double>(x.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

// Straight-line transcription of three Adam steps on f(x) = x^2 from
// x0 = 1, lr = 0.1, default betas, eps 1e-8, no decay.
double adam_three_step_trace() {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double x = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    const double g = 2.0 * x;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double mh = m / (1.0 - std::pow(b1, t));
    const double vh = v / (1.0 - std::pow(b2, t));
    x -= lr * mh / (std::sqrt(vh) + eps);
  }
  return x;
}

std::vector<GmadPair> gmad_bruteforce(const std::vector<std::string>& ids,
                                      const std::vector<double>& def,
                                      const std::vector<double>& att,
                                      double tol, std::size_t top) {
  struct Entry {
    std::string a, b;
    double dgap, agap;
  };
  std::vector<Entry> all;
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (j <= i) continue;
      if (std::abs(def[i] - def[j]) > tol) continue;
      Entry e;
      e.a = std::min(ids[i], ids[j]);
      e.b = std::max(ids[i], ids[j]);
      e.dgap = std::abs(def[i] - def[j]);
      e.agap = std::abs(att[i] - att[j]);
      all.push_back(std::move(e));
    }
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
    if (a.agap != b.agap) return a.agap > b.agap;
    if (a.a != b.a) return a.a < b.a;
    return a.b < b.b;
  });
  if (all.size() > top) all.resize(top);
  std::vector<GmadPair> out;
  for (const auto& e : all) out.push_back({e.a, e.b, e.dgap, e.agap});
  return out;
}

Check run_check(const std::string& name,
                const std::function<std::pair<bool, std::string>()>& body) {
  try {
    auto [ok, detail] = body();
    return {name, ok, detail};
  } catch (const std::exception& e) {
    return {name, false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

std::vector<Check> oracle_suite(std::uint64_t seed) {
  std::vector<Check> checks;

  checks.push_back(run_check("oracle/memory_match_bruteforce", [&] {
    Rng rng(hash_mix(seed, 1));
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t C = 2 + rng.below(7);   // <= 8 channels
      const std::size_t H = 2 + rng.below(4);   // <= 5 spatial
      const std::size_t W = 2 + rng.below(4);
      const std::size_t K = 1 + rng.below(4);   // <= 4 units
      const Tensor map = random_tensor(rng, {C, H, W}, false);
      const Tensor bank = random_tensor(rng, {K, C}, false);
      const double got = memory_match(map, MemoryBank{bank}).item();
      const double want =
          memory_match_bruteforce(map.values(), C, H, W, bank.values(), K);
      worst = std::max(worst, std::abs(got - want));
    }
    return std::make_pair(worst < 1e-10, fmt_err(worst));
  }));

  checks.push_back(run_check("oracle/decorrelation_transcription", [&] {
    Rng rng(hash_mix(seed, 2));
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor bank = random_tensor(rng, {4, 6}, false);
      const double got = decorrelation_loss(MemoryBank{bank}, 1e-8).item();
      const double want =
          decorrelation_bruteforce(bank.values(), 4, 6, 1e-8);
      worst = std::max(worst, std::abs(got - want));
    }
    return std::make_pair(worst < 1e-12, fmt_err(worst));
  }));

  checks.push_back(run_check("oracle/plcc_direct_formula", [&] {
    Rng rng(hash_mix(seed, 3));
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x(50), y(50);
      for (std::size_t i = 0; i < 50; ++i) {
        x[i] = rng.uniform(-5.0, 5.0);
        y[i] = rng.uniform(-5.0, 5.0);
      }
      worst = std::max(worst, std::abs(plcc(x, y) - plcc_direct(x, y)));
    }
    return std::make_pair(worst < 1e-12, fmt_err(worst));
  }));

  checks.push_back(run_check("oracle/srcc_closed_form_tie_free", [&] {
    Rng rng(hash_mix(seed, 4));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> x(30), y(30);
      for (std::size_t i = 0; i < 30; ++i) {
        x[i] = rng.uniform(-5.0, 5.0);
        y[i] = rng.uniform(-5.0, 5.0);
      }
      worst = std::max(worst, std::abs(srcc(x, y) - srcc_closed_form(x, y)));
      // Closed form must also equal Pearson over ranks on tie-free data.
      worst = std::max(
          worst,
          std::abs(srcc(x, y) - plcc_direct(simple_ranks(x), simple_ranks(y))));
    }
    return std::make_pair(worst < 1e-12, fmt_err(worst));
  }));

  checks.push_back(run_check("oracle/srcc_tied_average_ranks", [&] {
    // Hand-checkable tie case plus random tied data vs rank-Pearson.
    const std::vector<double> x = {1.0, 1.0, 2.0};
    const std::vector<double> y = {1.0, 2.0, 3.0};
    const double want = plcc_direct(average_ranks(x), average_ranks(y));
    double worst = std::abs(srcc(x, y) - want);
    Rng rng(hash_mix(seed, 5));
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> a(20), b(20);
      for (std::size_t i = 0; i < 20; ++i) {
        a[i] = static_cast<double>(rng.below(6));  // forced ties
        b[i] = rng.uniform(-1.0, 1.0);
      }
      worst = std::max(
          worst,
          std::abs(srcc(a, b) - plcc_direct(average_ranks(a), average_ranks(b))));
    }
    return std::make_pair(worst < 1e-12, fmt_err(worst));
  }));

  checks.push_back(run_check("oracle/srcc_hand_example", [&] {
    // x=[1,2,3], y=[3,1,2]: d^2 = 4+1+1, srcc = 1 - 36/24 = -0.5.
    const double got = srcc({1.0, 2.0, 3.0}, {3.0, 1.0, 2.0});
    return std::make_pair(std::abs(got + 0.5) < 1e-15, fmt_err(got + 0.5));
  }));

  checks.push_back(run_check("oracle/adam_three_step_trace", [&] {
    Tensor x = Tensor::scalar(1.0, true);
    AdamOptimizer opt({0.1, 0.9, 0.999, 1e-8, 0.0});
    opt.add_group("x", {x});
    for (int t = 0; t < 3; ++t) {
      opt.zero_grad();
      square(x).backward();
      opt.step();
    }
    const double err = std::abs(x.item() - adam_three_step_trace());
    return std::make_pair(err < 1e-12, fmt_err(err));
  }));

  checks.push_back(run_check("oracle/gmad_bruteforce_n20", [&] {
    Rng rng(hash_mix(seed, 6));
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::string> ids;
      std::vector<double> def(20), att(20);
      for (int i = 0; i < 20; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "s%02d", i);
        ids.emplace_back(buf);
        def[static_cast<std::size_t>(i)] = rng.uniform(0.0, 1.0);
        att[static_cast<std::size_t>(i)] = rng.uniform(0.0, 1.0);
      }
      const auto got = gmad_search_scores(ids, def, att, 0.1, 5);
      const auto want = gmad_bruteforce(ids, def, att, 0.1, 5);
      if (got.size() != want.size())
        return std::make_pair(false, std::string("size mismatch"));
      for (std::size_t i = 0; i < got.size(); ++i)
        if (got[i].id_a != want[i].id_a || got[i].id_b != want[i].id_b)
          return std::make_pair(false, "list mismatch at rank " +
                                           std::to_string(i));
    }
    return std::make_pair(true, std::string("top-5 lists identical"));
  }));

  checks.push_back(run_check("oracle/alpha_target_direct", [&] {
    // s_ref 0.9, s_dist 0.5, q 0.5: e^0 / (e^0 + e^0.4) = 1/(1+e^0.4).
    const double got = alpha_target(0.9, 0.5, 0.5);
    const double want = 1.0 / (1.0 + std::exp(0.4));
    const double err = std::abs(got - want);
    bool ok = err < 1e-15 && std::abs(want - 0.4013) < 1e-4;
    // Symmetric errors give exactly one half.
    ok = ok && alpha_target(0.7, 0.3, 0.5) == 0.5;
    // Printed form: a perfect memory score drives the target below 0.5.
    ok = ok && alpha_target(0.9, 0.5, 0.5) < 0.5;
    ok = ok && alpha_target(0.9, 0.5, 0.5, /*inverted=*/true) > 0.5;
    return std::make_pair(ok, fmt_err(err));
  }));

  checks.push_back(run_check("oracle/noise_severity_psnr_ordering", [&] {
    Rng rng(hash_mix(seed, 7));
    double mean1 = 0.0, mean5 = 0.0;
    for (int i = 0; i < 10; ++i) {
      const ImageBuffer ref = synth_reference(48, rng.next_u64());
      const ImageBuffer d1 = apply_distortion(
          ref, DistortionType::kGaussianNoise, 1, rng.next_u64());
      const ImageBuffer d5 = apply_distortion(
          ref, DistortionType::kGaussianNoise, 5, rng.next_u64());
      mean1 += psnr(d1, ref);
      mean5 += psnr(d5, ref);
    }
    std::ostringstream os;
    os << "mean psnr s1 " << mean1 / 10.0 << " vs s5 " << mean5 / 10.0;
    return std::make_pair(mean1 > mean5, os.str());
  }));

  checks.push_back(run_check("oracle/finite_difference_eq9_bank", [&] {
    // 4x6 bank, h = 1e-5, relative error < 1e-4.
    Rng rng(hash_mix(seed, 8));
    const Tensor bank = random_tensor(rng, {4, 6}, false);
    const double err = max_rel_grad_error(
        [](const std::vector<Tensor>& in) {
          return decorrelation_loss(MemoryBank{in[0]}, 1e-8);
        },
        {bank}, 1e-5);
    return std::make_pair(err < 1e-4, fmt_err(err));
  }));

  return checks;
}

// ---------------------------------------------------------------------------
// Exact contracts
// ---------------------------------------------------------------------------

namespace {

RunConfig tiny_config() {
  RunConfig config;
  config.corpus.references = 2;
  config.corpus.image_size = 24;
  config.extractor.input_size = 16;
  config.extractor.blocks = 2;
  config.extractor.channels = {4, 8};
  config.memory.units = 4;
  config.fusion.hidden = 8;
  config.training.epochs = 1;
  config.training.batch_size = 4;
  return config;
}

}  // namespace

std::vector<Check> contract_suite(std::uint64_t seed) {
  std::vector<Check> checks;
  const fs::path tmp =
      fs::temp_directory_path() /
      ("mqaf-selftest-" + hex64(hash_mix(seed, 0xC0FFEE)));
  fs::create_directories(tmp);

  checks.push_back(run_check("contract/ppm_roundtrip_bytes", [&] {
    Rng rng(hash_mix(seed, 11));
    ImageBuffer img = make_image(5, 3);
    for (auto& p : img.pixels)
      p = static_cast<std::uint8_t>(rng.below(256));
    const std::string path = (tmp / "rt.ppm").string();
    save_image(img, path);
    const ImageBuffer back = load_image(path);
    save_image(back, (tmp / "rt2.ppm").string());
    const bool ok = back == img &&
                    read_file_bytes(path) ==
                        read_file_bytes((tmp / "rt2.ppm").string());
    return std::make_pair(ok, std::string("byte-for-byte"));
  }));

  checks.push_back(run_check("contract/checkpoint_roundtrip_bytes", [&] {
    const ModelState state = init_model(tiny_config());
    const std::string p1 = (tmp / "a.ckpt").string();
    const std::string p2 = (tmp / "b.ckpt").string();
    save_checkpoint(state, p1);
    const ModelState loaded = load_checkpoint(p1);
    save_checkpoint(loaded, p2);
    const bool ok = read_file_bytes(p1) == read_file_bytes(p2);
    return std::make_pair(ok, std::string("save-load-save identical"));
  }));

  checks.push_back(run_check("contract/nr_equals_s_dist_bitwise", [&] {
    const RunConfig config = tiny_config();
    const ModelState model = init_model(config);
    const ImageBuffer img = synth_reference(24, hash_mix(seed, 12));
    const QualityResult nr = score_image(model, img, nullptr);
    const QualityResult fr = score_image(model, img, &img);
    const bool ok = nr.q == nr.s_dist && nr.s_dist == fr.s_dist;
    return std::make_pair(
        ok, std::string("NR q == s_dist and FR/NR share s_dist"));
  }));

  checks.push_back(run_check("contract/alpha_zero_fr_equals_nr", [&] {
    Rng rng(hash_mix(seed, 13));
    const Tensor map = random_tensor(rng, {4, 3, 3}, false);
    const Tensor bank_t = random_tensor(rng, {3, 4}, false);
    const Tensor f_ref = random_tensor(rng, {4}, false);
    const MemoryBank bank{bank_t};
    const Tensor s_dist = memory_match(map, bank);
    const auto rm = reference_match(f_ref, global_avg_pool(map));
    const Tensor fr = quality_score(rm.s_ref, s_dist, Tensor::scalar(0.0),
                                    ScoreMode::kFullReference);
    const Tensor nr = quality_score(std::nullopt, s_dist, std::nullopt,
                                    ScoreMode::kNoReference);
    return std::make_pair(fr.item() == nr.item(),
                          std::string("alpha=0 bitwise equality"));
  }));

  checks.push_back(run_check("contract/alpha_step_touches_awn_only", [&] {
    const RunConfig config = tiny_config();
    ModelState model = init_model(config);
    const ImageBuffer ref = synth_reference(16, hash_mix(seed, 14));
    const ImageBuffer dist = apply_distortion(
        ref, DistortionType::kGaussianNoise, 3, hash_mix(seed, 15));

    const auto theta_before = [&] {
      std::vector<std::vector<double>> snap;
      for (const auto& p : model.extractor.parameters())
        snap.push_back(p.values());
      snap.push_back(model.bank.units.values());
      return snap;
    }();
    const auto awn_before = [&] {
      std::vector<std::vector<double>> snap;
      for (const auto& p : model.awn.parameters()) snap.push_back(p.values());
      return snap;
    }();

    AdamOptimizer opt({8e-5, 0.9, 0.999, 1e-8, 1e-5});
    opt.add_group("extractor", model.extractor.parameters());
    opt.add_group("memory", {model.bank.units});
    opt.add_group("awn", model.awn.parameters());

    const CropScore cs =
        score_crops(model, dist, &ref, ScoreMode::kFullReference);
    const double at = alpha_target(cs.s_ref->item(), cs.s_dist.item(), 0.5);
    square(add_scalar(*cs.alpha, -at)).backward();
    opt.step();

    auto theta_after = [&] {
      std::vector<std::vector<double>> snap;
      for (const auto& p : model.extractor.parameters())
        snap.push_back(p.values());
      snap.push_back(model.bank.units.values());
      return snap;
    }();
    bool awn_changed = false;
    const auto awn_params = model.awn.parameters();
    for (std::size_t i = 0; i < awn_params.size(); ++i)
      if (awn_params[i].values() != awn_before[i]) awn_changed = true;
    const bool ok = theta_after == theta_before && awn_changed;
    return std::make_pair(ok,
                          std::string("theta/bank bitwise intact, AWN moved"));
  }));

  checks.push_back(run_check("contract/detach_blocks_upstream", [&] {
    Tensor x = Tensor::scalar(3.0, true);
    Tensor w = Tensor::scalar(2.0, true);
    mul(detach(x), w).backward();
    const bool x_blocked = !x.has_grad();
    const bool w_grad_is_x = w.has_grad() && w.grad()[0] == 3.0;
    return std::make_pair(x_blocked && w_grad_is_x,
                          std::string("d/dx = 0, d/dw = x"));
  }));

  checks.push_back(run_check("contract/corpus_regeneration_identical", [&] {
    CorpusConfig cc;
    cc.references = 2;
    cc.image_size = 24;
    cc.severities = {1, 3};
    const std::string d1 = (tmp / "corpus1").string();
    const std::string d2 = (tmp / "corpus2").string();
    generate_corpus(cc, 7, d1);
    generate_corpus(cc, 7, d2);
    const bool manifests_equal =
        read_file_bytes(d1 + "/manifest.txt") ==
        read_file_bytes(d2 + "/manifest.txt");
    const auto m = load_manifest(d1 + "/manifest.txt");
    bool files_equal = true;
    for (const auto& r : m.records)
      files_equal = files_equal && read_file_bytes(d1 + "/" + r.path) ==
                                       read_file_bytes(d2 + "/" + r.path);
    return std::make_pair(manifests_equal && files_equal,
                          std::string("manifest and files identical"));
  }));

  std::error_code ec;
  fs::remove_all(tmp, ec);
  return checks;
}

std::vector<Check> run_all(std::uint64_t seed) {
  std::vector<Check> all = gradient_suite(seed, 100);
  for (auto& c : oracle_suite(seed)) all.push_back(std::move(c));
  for (auto& c : contract_suite(seed)) all.push_back(std::move(c));
  return all;
}

bool all_passed(const std::vector<Check>& checks) {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

}  // namespace mqaf::selftest
