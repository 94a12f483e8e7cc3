#include "mqaf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mqaf/errors.hpp"

namespace mqaf {

namespace {

void check_inputs(const std::vector<double>& x, const std::vector<double>& y,
                  const char* op) {
  if (x.size() != y.size())
    throw Error(std::string(op) + ": length mismatch " +
                std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  if (x.size() < 2)
    throw Error(std::string(op) + ": need at least 2 samples, got " +
                std::to_string(x.size()));
}

bool has_ties(const std::vector<double>& x) {
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

}  // namespace

double plcc(const std::vector<double>& x, const std::vector<double>& y) {
  check_inputs(x, y, "plcc");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw Error("plcc: degenerate input (zero variance)");
  return sxy / (std::sqrt(sxx) * std::sqrt(syy));
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double srcc(const std::vector<double>& x, const std::vector<double>& y) {
  check_inputs(x, y, "srcc");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  if (has_ties(x) || has_ties(y)) {
    try {
      return plcc(rx, ry);
    } catch (const Error&) {
      throw Error("srcc: degenerate input (zero rank variance)");
    }
  }
  const double n = static_cast<double>(x.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = rx[i] - ry[i];
    d2 += d * d;
  }
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace mqaf
