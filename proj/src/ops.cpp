#include "mqaf/ops.hpp"

#include <cmath>
#include <cstddef>

namespace mqaf {

namespace {

using detail::TensorNode;

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void check_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + " tensor, got shape " +
                     shape_str(t.shape()));
}

// Elementwise op with adjoint df(i) giving dy_i/dx_i as a function of
// (x_i, y_i).
template <typename F, typename DF>
Tensor unary_elementwise(const char* op, const Tensor& a, F f, DF df) {
  const auto& x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return Tensor(detail::make_op(
      op, a.shape(), std::move(y), {a.node()}, [df](TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const auto& x = *p.values;
        const auto& y = *self.values;
        for (std::size_t i = 0; i < x.size(); ++i)
          p.grad[i] += self.grad[i] * df(x[i], y[i]);
      }));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  const auto &xa = a.values(), &xb = b.values();
  std::vector<double> y(xa.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xa[i] + xb[i];
  return Tensor(detail::make_op(
      "add", a.shape(), std::move(y), {a.node(), b.node()},
      [](TensorNode& self) {
        for (int s = 0; s < 2; ++s) {
          auto& p = *self.parents[s];
          if (!p.requires_grad) continue;
          p.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            p.grad[i] += self.grad[i];
        }
      }));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  const auto &xa = a.values(), &xb = b.values();
  std::vector<double> y(xa.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xa[i] - xb[i];
  return Tensor(detail::make_op(
      "sub", a.shape(), std::move(y), {a.node(), b.node()},
      [](TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
          pa.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            pa.grad[i] += self.grad[i];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            pb.grad[i] -= self.grad[i];
        }
      }));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  const auto &xa = a.values(), &xb = b.values();
  std::vector<double> y(xa.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xa[i] * xb[i];
  return Tensor(detail::make_op(
      "mul", a.shape(), std::move(y), {a.node(), b.node()},
      [](TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const auto& va = *pa.values;
        const auto& vb = *pb.values;
        if (pa.requires_grad) {
          pa.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            pa.grad[i] += self.grad[i] * vb[i];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            pb.grad[i] += self.grad[i] * va[i];
        }
      }));
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape("div", a, b);
  const auto &xa = a.values(), &xb = b.values();
  std::vector<double> y(xa.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xa[i] / xb[i];
  return Tensor(detail::make_op(
      "div", a.shape(), std::move(y), {a.node(), b.node()},
      [](TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const auto& vb = *pb.values;
        const auto& y = *self.values;
        if (pa.requires_grad) {
          pa.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            pa.grad[i] += self.grad[i] / vb[i];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            pb.grad[i] -= self.grad[i] * y[i] / vb[i];
        }
      }));
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  check_same_shape("maximum", a, b);
  const auto &xa = a.values(), &xb = b.values();
  std::vector<double> y(xa.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xa[i] >= xb[i] ? xa[i] : xb[i];
  return Tensor(detail::make_op(
      "maximum", a.shape(), std::move(y), {a.node(), b.node()},
      [](TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const auto& va = *pa.values;
        const auto& vb = *pb.values;
        // Subgradient at ties routes to the first operand.
        if (pa.requires_grad) {
          pa.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (va[i] >= vb[i]) pa.grad[i] += self.grad[i];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (va[i] < vb[i]) pb.grad[i] += self.grad[i];
        }
      }));
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_elementwise(
      "add_scalar", a, [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
  return unary_elementwise(
      "mul_scalar", a, [c](double x) { return x * c; },
      [c](double, double) { return c; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor square(const Tensor& a) {
  return unary_elementwise(
      "square", a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  return Tensor(detail::make_op(
      "reshape", std::move(shape), a.values(), {a.node()},
      [](TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          p.grad[i] += self.grad[i];
      }));
}

Tensor concat(const Tensor& a, const Tensor& b) {
  check_rank("concat", a, 1);
  check_rank("concat", b, 1);
  const auto &xa = a.values(), &xb = b.values();
  std::vector<double> y;
  y.reserve(xa.size() + xb.size());
  y.insert(y.end(), xa.begin(), xa.end());
  y.insert(y.end(), xb.begin(), xb.end());
  return Tensor(detail::make_op(
      "concat", {xa.size() + xb.size()}, std::move(y), {a.node(), b.node()},
      [](TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const std::size_t na = pa.values->size();
        if (pa.requires_grad) {
          pa.ensure_grad();
          for (std::size_t i = 0; i < na; ++i) pa.grad[i] += self.grad[i];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t i = 0; i < pb.values->size(); ++i)
            pb.grad[i] += self.grad[na + i];
        }
      }));
}

Tensor diagonal(const Tensor& m) {
  check_rank("diagonal", m, 2);
  const std::size_t k = m.shape()[0];
  if (m.shape()[1] != k)
    throw ShapeError("diagonal: matrix must be square, got " +
                     shape_str(m.shape()));
  const auto& x = m.values();
  std::vector<double> y(k);
  for (std::size_t i = 0; i < k; ++i) y[i] = x[i * k + i];
  return Tensor(detail::make_op(
      "diagonal", {k}, std::move(y), {m.node()}, [k](TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < k; ++i)
          p.grad[i * k + i] += self.grad[i];
      }));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank("matmul", a, 2);
  check_rank("matmul", b, 2);
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const std::size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2)
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  const auto &xa = a.values(), &xb = b.values();
  std::vector<double> y(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = xa[i * k + p];
      for (std::size_t j = 0; j < n; ++j) y[i * n + j] += av * xb[p * n + j];
    }
  return Tensor(detail::make_op(
      "matmul", {m, n}, std::move(y), {a.node(), b.node()},
      [m, k, n](TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const auto& va = *pa.values;
        const auto& vb = *pb.values;
        const auto& g = self.grad;
        if (pa.requires_grad) {
          pa.ensure_grad();  // dA = G * B^T
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j)
                acc += g[i * n + j] * vb[p * n + j];
              pa.grad[i * k + p] += acc;
            }
        }
        if (pb.requires_grad) {
          pb.ensure_grad();  // dB = A^T * G
          for (std::size_t p = 0; p < k; ++p)
            for (std::size_t i = 0; i < m; ++i) {
              const double av = va[i * k + p];
              for (std::size_t j = 0; j < n; ++j)
                pb.grad[p * n + j] += av * g[i * n + j];
            }
        }
      }));
}

Tensor transpose(const Tensor& m) {
  check_rank("transpose", m, 2);
  const std::size_t rows = m.shape()[0], cols = m.shape()[1];
  const auto& x = m.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) y[j * rows + i] = x[i * cols + j];
  return Tensor(detail::make_op(
      "transpose", {cols, rows}, std::move(y), {m.node()},
      [rows, cols](TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j)
            p.grad[i * cols + j] += self.grad[j * rows + i];
      }));
}

namespace {

// out[k,oy,ox] += sum_{c,dy,dx} ker[k,c,dy,dx] * in[c,oy+dy-p,ox+dx-p].
// Shared by conv2d forward and the two adjoint passes; the loops stay dense
// over the valid output range for each (dy,dx) shift.
void conv2d_forward(const double* in, std::size_t C, std::size_t H,
                    std::size_t W, const double* ker, std::size_t K,
                    std::size_t kh, std::size_t kw, std::size_t pad,
                    double* out, std::size_t OH, std::size_t OW) {
  const long p = static_cast<long>(pad);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t dy = 0; dy < kh; ++dy)
        for (std::size_t dx = 0; dx < kw; ++dx) {
          const double w = ker[((k * C + c) * kh + dy) * kw + dx];
          if (w == 0.0) continue;
          const long sy = static_cast<long>(dy) - p;
          const long sx = static_cast<long>(dx) - p;
          const long oy0 = std::max(0L, -sy);
          const long oy1 = std::min(static_cast<long>(OH),
                                    static_cast<long>(H) - sy);
          const long ox0 = std::max(0L, -sx);
          const long ox1 = std::min(static_cast<long>(OW),
                                    static_cast<long>(W) - sx);
          for (long oy = oy0; oy < oy1; ++oy) {
            const double* irow = in + (c * H + (oy + sy)) * W + (ox0 + sx);
            double* orow = out + (k * OH + oy) * OW + ox0;
            for (long i = 0; i < ox1 - ox0; ++i) orow[i] += w * irow[i];
          }
        }
}

void conv2d_backward_input(double* din, std::size_t C, std::size_t H,
                           std::size_t W, const double* ker, std::size_t K,
                           std::size_t kh, std::size_t kw, std::size_t pad,
                           const double* gout, std::size_t OH, std::size_t OW) {
  const long p = static_cast<long>(pad);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t dy = 0; dy < kh; ++dy)
        for (std::size_t dx = 0; dx < kw; ++dx) {
          const double w = ker[((k * C + c) * kh + dy) * kw + dx];
          if (w == 0.0) continue;
          const long sy = static_cast<long>(dy) - p;
          const long sx = static_cast<long>(dx) - p;
          const long oy0 = std::max(0L, -sy);
          const long oy1 = std::min(static_cast<long>(OH),
                                    static_cast<long>(H) - sy);
          const long ox0 = std::max(0L, -sx);
          const long ox1 = std::min(static_cast<long>(OW),
                                    static_cast<long>(W) - sx);
          for (long oy = oy0; oy < oy1; ++oy) {
            double* irow = din + (c * H + (oy + sy)) * W + (ox0 + sx);
            const double* grow = gout + (k * OH + oy) * OW + ox0;
            for (long i = 0; i < ox1 - ox0; ++i) irow[i] += w * grow[i];
          }
        }
}

void conv2d_backward_kernel(const double* in, std::size_t C, std::size_t H,
                            std::size_t W, double* dker, std::size_t K,
                            std::size_t kh, std::size_t kw, std::size_t pad,
                            const double* gout, std::size_t OH,
                            std::size_t OW) {
  const long p = static_cast<long>(pad);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t dy = 0; dy < kh; ++dy)
        for (std::size_t dx = 0; dx < kw; ++dx) {
          const long sy = static_cast<long>(dy) - p;
          const long sx = static_cast<long>(dx) - p;
          const long oy0 = std::max(0L, -sy);
          const long oy1 = std::min(static_cast<long>(OH),
                                    static_cast<long>(H) - sy);
          const long ox0 = std::max(0L, -sx);
          const long ox1 = std::min(static_cast<long>(OW),
                                    static_cast<long>(W) - sx);
          double acc = 0.0;
          for (long oy = oy0; oy < oy1; ++oy) {
            const double* irow = in + (c * H + (oy + sy)) * W + (ox0 + sx);
            const double* grow = gout + (k * OH + oy) * OW + ox0;
            for (long i = 0; i < ox1 - ox0; ++i) acc += irow[i] * grow[i];
          }
          dker[((k * C + c) * kh + dy) * kw + dx] += acc;
        }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t pad) {
  check_rank("conv2d", input, 3);
  check_rank("conv2d", kernels, 4);
  const std::size_t C = input.shape()[0], H = input.shape()[1],
                    W = input.shape()[2];
  const std::size_t K = kernels.shape()[0], kc = kernels.shape()[1],
                    kh = kernels.shape()[2], kw = kernels.shape()[3];
  if (kc != C)
    throw ShapeError("conv2d: shape mismatch " + shape_str(input.shape()) +
                     " vs " + shape_str(kernels.shape()));
  if (H + 2 * pad < kh || W + 2 * pad < kw)
    throw ShapeError("conv2d: kernel " + shape_str(kernels.shape()) +
                     " larger than padded input " + shape_str(input.shape()));
  const std::size_t OH = H + 2 * pad - kh + 1;
  const std::size_t OW = W + 2 * pad - kw + 1;
  std::vector<double> out(K * OH * OW, 0.0);
  conv2d_forward(input.values().data(), C, H, W, kernels.values().data(), K,
                 kh, kw, pad, out.data(), OH, OW);
  return Tensor(detail::make_op(
      "conv2d", {K, OH, OW}, std::move(out), {input.node(), kernels.node()},
      [pad, C, H, W, K, kh, kw, OH, OW](TensorNode& self) {
        auto& pin = *self.parents[0];
        auto& pker = *self.parents[1];
        if (pin.requires_grad) {
          pin.ensure_grad();
          conv2d_backward_input(pin.grad.data(), C, H, W,
                                pker.values->data(), K, kh, kw, pad,
                                self.grad.data(), OH, OW);
        }
        if (pker.requires_grad) {
          pker.ensure_grad();
          conv2d_backward_kernel(pin.values->data(), C, H, W,
                                 pker.grad.data(), K, kh, kw, pad,
                                 self.grad.data(), OH, OW);
        }
      }));
}

Tensor add_channel_bias(const Tensor& map, const Tensor& bias) {
  check_rank("add_channel_bias", map, 3);
  check_rank("add_channel_bias", bias, 1);
  const std::size_t C = map.shape()[0], H = map.shape()[1], W = map.shape()[2];
  if (bias.shape()[0] != C)
    throw ShapeError("add_channel_bias: shape mismatch " +
                     shape_str(map.shape()) + " vs " + shape_str(bias.shape()));
  const auto &x = map.values(), &b = bias.values();
  std::vector<double> y(x.size());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H * W; ++i)
      y[c * H * W + i] = x[c * H * W + i] + b[c];
  return Tensor(detail::make_op(
      "add_channel_bias", map.shape(), std::move(y), {map.node(), bias.node()},
      [C, H, W](TensorNode& self) {
        auto& pm = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pm.requires_grad) {
          pm.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            pm.grad[i] += self.grad[i];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t c = 0; c < C; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < H * W; ++i)
              acc += self.grad[c * H * W + i];
            pb.grad[c] += acc;
          }
        }
      }));
}

Tensor relu(const Tensor& a) {
  return unary_elementwise(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary_elementwise(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_elementwise(
      "sigmoid", a,
      [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor sqrt_smooth(const Tensor& a, double eps) {
  for (double x : a.values())
    if (x + eps < 0.0)
      throw NumericError("sqrt_smooth: negative operand " + std::to_string(x));
  return unary_elementwise(
      "sqrt_smooth", a, [eps](double x) { return std::sqrt(x + eps); },
      [](double, double y) { return 0.5 / y; });
}

Tensor abs_smooth(const Tensor& a, double eps) {
  return unary_elementwise(
      "abs_smooth", a,
      [eps](double x) { return std::sqrt(x * x + eps); },
      [](double x, double y) { return x / y; });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.values()) acc += x;
  return Tensor(detail::make_op(
      "sum", {}, {acc}, {a.node()}, [](TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = self.grad[0];
        for (auto& gi : p.grad) gi += g;
      }));
}

Tensor mean(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.values()) acc += x;
  const double n = static_cast<double>(a.numel());
  return Tensor(detail::make_op(
      "mean", {}, {acc / n}, {a.node()}, [n](TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = self.grad[0] / n;
        for (auto& gi : p.grad) gi += g;
      }));
}

Tensor l2_norm(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.values()) acc += x * x;
  const double nrm = std::sqrt(acc);
  return Tensor(detail::make_op(
      "l2_norm", {}, {nrm}, {a.node()}, [](TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        const double nrm = (*self.values)[0];
        if (nrm == 0.0) return;  // subgradient 0 at the origin
        p.ensure_grad();
        const double g = self.grad[0] / nrm;
        const auto& x = *p.values;
        for (std::size_t i = 0; i < x.size(); ++i) p.grad[i] += g * x[i];
      }));
}

Tensor frobenius_norm(const Tensor& m) {
  check_rank("frobenius_norm", m, 2);
  double acc = 0.0;
  for (double x : m.values()) acc += x * x;
  return Tensor(detail::make_op(
      "frobenius_norm", {}, {std::sqrt(acc)}, {m.node()},
      [](TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        const double nrm = (*self.values)[0];
        if (nrm == 0.0) return;
        p.ensure_grad();
        const double g = self.grad[0] / nrm;
        const auto& x = *p.values;
        for (std::size_t i = 0; i < x.size(); ++i) p.grad[i] += g * x[i];
      }));
}

Tensor avg_pool(const Tensor& map, std::size_t window) {
  check_rank("avg_pool", map, 3);
  if (window == 0) throw ShapeError("avg_pool: window must be positive");
  const std::size_t C = map.shape()[0], H = map.shape()[1], W = map.shape()[2];
  if (H % window != 0 || W % window != 0)
    throw ShapeError("avg_pool: spatial dims " + shape_str(map.shape()) +
                     " not divisible by window " + std::to_string(window));
  const std::size_t OH = H / window, OW = W / window;
  const double inv = 1.0 / static_cast<double>(window * window);
  const auto& x = map.values();
  std::vector<double> y(C * OH * OW, 0.0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t oy = 0; oy < OH; ++oy)
      for (std::size_t ox = 0; ox < OW; ++ox) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < window; ++dy)
          for (std::size_t dx = 0; dx < window; ++dx)
            acc += x[(c * H + oy * window + dy) * W + ox * window + dx];
        y[(c * OH + oy) * OW + ox] = acc * inv;
      }
  return Tensor(detail::make_op(
      "avg_pool", {C, OH, OW}, std::move(y), {map.node()},
      [C, H, W, OH, OW, window, inv](TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
              const double g = self.grad[(c * OH + oy) * OW + ox] * inv;
              for (std::size_t dy = 0; dy < window; ++dy)
                for (std::size_t dx = 0; dx < window; ++dx)
                  p.grad[(c * H + oy * window + dy) * W + ox * window + dx] +=
                      g;
            }
      }));
}

Tensor global_avg_pool(const Tensor& map) {
  check_rank("global_avg_pool", map, 3);
  const std::size_t C = map.shape()[0], H = map.shape()[1], W = map.shape()[2];
  const double inv = 1.0 / static_cast<double>(H * W);
  const auto& x = map.values();
  std::vector<double> y(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < H * W; ++i) acc += x[c * H * W + i];
    y[c] = acc * inv;
  }
  return Tensor(detail::make_op(
      "global_avg_pool", {C}, std::move(y), {map.node()},
      [C, H, W, inv](TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t c = 0; c < C; ++c) {
          const double g = self.grad[c] * inv;
          for (std::size_t i = 0; i < H * W; ++i) p.grad[c * H * W + i] += g;
        }
      }));
}

namespace {

// Normalize `count` vectors of length `dim`; element (v, d) lives at
// offset(v, d). Shared by the three normalization layouts.
template <typename Offset>
void normalize_forward(const std::vector<double>& x, std::vector<double>& y,
                       std::size_t count, std::size_t dim, Offset offset) {
  for (std::size_t v = 0; v < count; ++v) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double e = x[offset(v, d)];
      acc += e * e;
    }
    const double nrm = std::sqrt(acc);
    if (nrm == 0.0) continue;  // zero vector stays zero
    for (std::size_t d = 0; d < dim; ++d) {
      const std::size_t i = offset(v, d);
      y[i] = x[i] / nrm;
    }
  }
}

// dx = (g - y * <y, g>) / ||x||, per vector.
template <typename Offset>
void normalize_backward(TensorNode& self, std::size_t count, std::size_t dim,
                        Offset offset) {
  auto& p = *self.parents[0];
  if (!p.requires_grad) return;
  p.ensure_grad();
  const auto& x = *p.values;
  const auto& y = *self.values;
  for (std::size_t v = 0; v < count; ++v) {
    double nsq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double e = x[offset(v, d)];
      nsq += e * e;
    }
    const double nrm = std::sqrt(nsq);
    if (nrm == 0.0) continue;
    double dot = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const std::size_t i = offset(v, d);
      dot += y[i] * self.grad[i];
    }
    for (std::size_t d = 0; d < dim; ++d) {
      const std::size_t i = offset(v, d);
      p.grad[i] += (self.grad[i] - y[i] * dot) / nrm;
    }
  }
}

}  // namespace

Tensor l2_normalize(const Tensor& v) {
  check_rank("l2_normalize", v, 1);
  const std::size_t n = v.shape()[0];
  std::vector<double> y(n, 0.0);
  auto off = [](std::size_t, std::size_t d) { return d; };
  normalize_forward(v.values(), y, 1, n, off);
  return Tensor(detail::make_op(
      "l2_normalize", v.shape(), std::move(y), {v.node()},
      [n, off](TensorNode& self) { normalize_backward(self, 1, n, off); }));
}

Tensor row_l2_normalize(const Tensor& m) {
  check_rank("row_l2_normalize", m, 2);
  const std::size_t rows = m.shape()[0], dim = m.shape()[1];
  std::vector<double> y(rows * dim, 0.0);
  auto off = [dim](std::size_t v, std::size_t d) { return v * dim + d; };
  normalize_forward(m.values(), y, rows, dim, off);
  return Tensor(detail::make_op(
      "row_l2_normalize", m.shape(), std::move(y), {m.node()},
      [rows, dim, off](TensorNode& self) {
        normalize_backward(self, rows, dim, off);
      }));
}

Tensor channel_l2_normalize(const Tensor& map) {
  check_rank("channel_l2_normalize", map, 3);
  const std::size_t C = map.shape()[0], H = map.shape()[1], W = map.shape()[2];
  const std::size_t hw = H * W;
  std::vector<double> y(C * hw, 0.0);
  auto off = [hw](std::size_t v, std::size_t d) { return d * hw + v; };
  normalize_forward(map.values(), y, hw, C, off);
  return Tensor(detail::make_op(
      "channel_l2_normalize", map.shape(), std::move(y), {map.node()},
      [hw, C, off](TensorNode& self) {
        normalize_backward(self, hw, C, off);
      }));
}

Tensor row_covariance(const Tensor& m) {
  check_rank("row_covariance", m, 2);
  const std::size_t K = m.shape()[0], D = m.shape()[1];
  if (D < 2)
    throw ShapeError("row_covariance: need at least 2 feature dims, got " +
                     shape_str(m.shape()));
  const auto& x = m.values();
  std::vector<double> centered(K * D);
  for (std::size_t k = 0; k < K; ++k) {
    double rm = 0.0;
    for (std::size_t d = 0; d < D; ++d) rm += x[k * D + d];
    rm /= static_cast<double>(D);
    for (std::size_t d = 0; d < D; ++d) centered[k * D + d] = x[k * D + d] - rm;
  }
  const double inv = 1.0 / static_cast<double>(D - 1);
  std::vector<double> cov(K * K, 0.0);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      double acc = 0.0;
      for (std::size_t d = 0; d < D; ++d)
        acc += centered[i * D + d] * centered[j * D + d];
      cov[i * K + j] = acc * inv;
    }
  return Tensor(detail::make_op(
      "row_covariance", {K, K}, std::move(cov), {m.node()},
      [K, D, inv](TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const auto& x = *p.values;
        // Recompute centered rows (cheap relative to storing them).
        std::vector<double> centered(K * D);
        for (std::size_t k = 0; k < K; ++k) {
          double rm = 0.0;
          for (std::size_t d = 0; d < D; ++d) rm += x[k * D + d];
          rm /= static_cast<double>(D);
          for (std::size_t d = 0; d < D; ++d)
            centered[k * D + d] = x[k * D + d] - rm;
        }
        // dVc = (G + G^T) Vc / (D-1); dX = dVc re-centered per row.
        std::vector<double> dvc(K * D, 0.0);
        for (std::size_t i = 0; i < K; ++i)
          for (std::size_t j = 0; j < K; ++j) {
            const double g = (self.grad[i * K + j] + self.grad[j * K + i]) * inv;
            if (g == 0.0) continue;
            for (std::size_t d = 0; d < D; ++d)
              dvc[i * D + d] += g * centered[j * D + d];
          }
        for (std::size_t k = 0; k < K; ++k) {
          double gm = 0.0;
          for (std::size_t d = 0; d < D; ++d) gm += dvc[k * D + d];
          gm /= static_cast<double>(D);
          for (std::size_t d = 0; d < D; ++d)
            p.grad[k * D + d] += dvc[k * D + d] - gm;
        }
      }));
}

Tensor detach(const Tensor& a) {
  auto n = std::make_shared<detail::TensorNode>();
  n->shape = a.shape();
  n->values = a.node()->values;  // shared storage, no graph edge
  n->op = "detach";
  n->requires_grad = false;
  return Tensor(std::move(n));
}

const std::vector<std::string>& primitive_forward_set() {
  static const std::vector<std::string> catalog = {
      "add",         "sub",
      "mul",         "div",
      "maximum",     "add_scalar",
      "mul_scalar",  "neg",
      "square",      "reshape",
      "concat",      "diagonal",
      "matmul",      "transpose",
      "conv2d",
      "add_channel_bias", "relu",
      "exp",         "sigmoid",
      "sqrt_smooth", "abs_smooth",
      "sum",         "mean",
      "l2_norm",     "frobenius_norm",
      "avg_pool",    "global_avg_pool",
      "l2_normalize", "row_l2_normalize",
      "channel_l2_normalize", "row_covariance",
      "detach",
  };
  return catalog;
}

}  // namespace mqaf
