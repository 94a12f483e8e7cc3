#pragma once

#include <string>
#include <vector>

#include "mqaf/tensor.hpp"

namespace mqaf {

// Elementwise (operands must share a shape).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);

// Shape manipulation.
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const Tensor& a, const Tensor& b);  // 1-D vectors
Tensor diagonal(const Tensor& m);                 // [K,K] -> [K]

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]
Tensor transpose(const Tensor& m);                // [m,n] -> [n,m]

// 2-D cross-correlation, stride 1, zero padding `pad` on both spatial axes.
// input [C,H,W], kernels [K,C,kh,kw] -> [K, H+2p-kh+1, W+2p-kw+1].
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t pad);
Tensor add_channel_bias(const Tensor& map, const Tensor& bias);  // [C,H,W]+[C]

// Nonlinearities.
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor sqrt_smooth(const Tensor& a, double eps);        // sqrt(x + eps)
Tensor abs_smooth(const Tensor& a, double eps = 1e-12); // sqrt(x^2 + eps)

// Reductions (to scalar).
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor l2_norm(const Tensor& a);
Tensor frobenius_norm(const Tensor& m);

// Pooling over [C,H,W] maps.
Tensor avg_pool(const Tensor& map, std::size_t window);  // stride == window
Tensor global_avg_pool(const Tensor& map);               // -> [C]

// L2 normalization. Exact zero vectors are left as zero (no exception,
// zero gradient).
Tensor l2_normalize(const Tensor& v);            // 1-D
Tensor row_l2_normalize(const Tensor& m);        // [K,D], each row
Tensor channel_l2_normalize(const Tensor& map);  // [C,H,W], each location

// Covariance of the K rows of m, centering each row across the feature
// dimension: C = Vc * Vc^T / (D-1), shape [K,K].
Tensor row_covariance(const Tensor& m);

// Shares values with `a` but blocks gradient flow upstream.
Tensor detach(const Tensor& a);

// Names of every primitive this module provides with forward and adjoint
// rules.
const std::vector<std::string>& primitive_forward_set();

}  // namespace mqaf
