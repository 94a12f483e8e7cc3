#pragma once

#include <vector>

namespace mqaf {

// Pearson linear correlation. Throws on n < 2 or zero variance in either
// argument (degenerate input, never NaN).
double plcc(const std::vector<double>& x, const std::vector<double>& y);

// Spearman rank correlation. Tie-free inputs use the closed form
// 1 - 6*sum(d^2)/(n(n^2-1)); ties fall back to Pearson over average ranks
// (the two agree when tie-free).
double srcc(const std::vector<double>& x, const std::vector<double>& y);

// Average (fractional) ranks, 1-based; ties share the mean of their span.
std::vector<double> average_ranks(const std::vector<double>& x);

}  // namespace mqaf
