#include "voxelpaint/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <utility>

#include "voxelpaint/error.hpp"
#include "voxelpaint/parallel.hpp"

namespace voxelpaint {

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape() == b.shape(), ErrorCode::kShapeMismatch,
          std::string(op) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

template <typename T>
void require_5d(const Tensor<T>& t, const char* op) {
  require(t.rank() == 5, ErrorCode::kShapeMismatch,
          std::string(op) + ": expected [N,C,D,H,W], got " + shape_string(t.shape()));
}

// Accumulate into parent i's gradient only when it takes part in the graph.
template <typename T>
T* grad_of(detail::Node<T>& node, std::size_t parent) {
  auto& p = *node.parents[parent];
  return p.requires_grad ? p.grad_buffer().data() : nullptr;
}

template <typename T>
const T* value_of(detail::Node<T>& node, std::size_t parent) {
  return node.parents[parent]->value.data();
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (T* g = grad_of(self, p)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    if (T* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (T* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    const T* va = value_of(self, 0);
    const T* vb = value_of(self, 1);
    if (T* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * vb[i];
    }
    if (T* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * va[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * factor;
  return Tensor<T>::from_op(a.shape(), std::move(out), {a}, [factor](detail::Node<T>& self) {
    if (T* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
    }
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + offset;
  return Tensor<T>::from_op(a.shape(), std::move(out), {a}, [](detail::Node<T>& self) {
    if (T* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * a.values()[i];
  return Tensor<T>::from_op(a.shape(), std::move(out), {a}, [](detail::Node<T>& self) {
    const T* x = value_of(self, 0);
    if (T* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += T{2} * x[i] * self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  double acc = 0.0;
  for (T v : a.values()) acc += static_cast<double>(v);
  return Tensor<T>::from_op(Shape{1}, {static_cast<T>(acc)}, {a}, [](detail::Node<T>& self) {
    if (T* g = grad_of(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  require(a.numel() > 0, ErrorCode::kShapeMismatch, "mean of empty tensor");
  return scale(sum(a), static_cast<T>(1.0 / static_cast<double>(a.numel())));
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct ConvGeometry {
  std::size_t n, cin, cout, d, h, w, k, pad, od, oh, ow;

  std::size_t in_plane() const { return d * h * w; }
  std::size_t out_plane() const { return od * oh * ow; }
  std::size_t out_slice() const { return oh * ow; }
  std::size_t kernel_volume() const { return k * k * k; }
  std::size_t patch() const { return cin * kernel_volume(); }
};

// Output depth slices per im2col slab; keeps the column buffer cache-sized.
std::size_t slab_depth(const ConvGeometry& g) {
  constexpr std::size_t kBudget = std::size_t{1} << 17;
  const std::size_t per_slice = g.patch() * g.out_slice();
  return std::clamp<std::size_t>(kBudget / std::max<std::size_t>(per_slice, 1), 1, g.od);
}

// cols[r][p] for r = (ci, kd, kh, kw) and p over output slices [d0, d1).
template <typename T>
void im2col(const ConvGeometry& g, const T* in, std::size_t d0, std::size_t d1, T* cols) {
  const std::size_t cols_width = (d1 - d0) * g.out_slice();
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  parallel_for(g.patch(), [&](std::size_t r) {
    const std::size_t ci = r / g.kernel_volume();
    const std::size_t tap = r % g.kernel_volume();
    const auto kd = static_cast<std::ptrdiff_t>(tap / (g.k * g.k));
    const auto kh = static_cast<std::ptrdiff_t>((tap / g.k) % g.k);
    const auto kw = static_cast<std::ptrdiff_t>(tap % g.k);
    const T* src = in + ci * g.in_plane();
    T* dst = cols + r * cols_width;
    for (std::size_t z = d0; z < d1; ++z) {
      const std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(z) + kd - pad;
      for (std::size_t y = 0; y < g.oh; ++y) {
        T* row = dst + ((z - d0) * g.oh + y) * g.ow;
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y) + kh - pad;
        if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(g.d) || iy < 0 ||
            iy >= static_cast<std::ptrdiff_t>(g.h)) {
          std::fill(row, row + g.ow, T{0});
          continue;
        }
        const T* line = src + (static_cast<std::size_t>(iz) * g.h + static_cast<std::size_t>(iy)) * g.w;
        for (std::size_t x = 0; x < g.ow; ++x) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x) + kw - pad;
          row[x] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? T{0} : line[ix];
        }
      }
    }
  });
}

// Transposed layout: cols_t[p][r].
template <typename T>
void im2col_transposed(const ConvGeometry& g, const T* in, std::size_t d0, std::size_t d1, T* cols_t) {
  const std::size_t patch = g.patch();
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto k = static_cast<std::ptrdiff_t>(g.k);
  parallel_for(d1 - d0, [&](std::size_t dz) {
    const std::size_t z = d0 + dz;
    for (std::size_t y = 0; y < g.oh; ++y) {
      for (std::size_t x = 0; x < g.ow; ++x) {
        T* dst = cols_t + ((dz * g.oh + y) * g.ow + x) * patch;
        for (std::size_t ci = 0; ci < g.cin; ++ci) {
          const T* src = in + ci * g.in_plane();
          for (std::ptrdiff_t kd = 0; kd < k; ++kd) {
            const std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(z) + kd - pad;
            const bool z_ok = iz >= 0 && iz < static_cast<std::ptrdiff_t>(g.d);
            for (std::ptrdiff_t kh = 0; kh < k; ++kh) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y) + kh - pad;
              const bool zy_ok = z_ok && iy >= 0 && iy < static_cast<std::ptrdiff_t>(g.h);
              for (std::ptrdiff_t kw = 0; kw < k; ++kw, ++dst) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x) + kw - pad;
                *dst = (zy_ok && ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w))
                           ? src[(iz * static_cast<std::ptrdiff_t>(g.h) + iy) *
                                     static_cast<std::ptrdiff_t>(g.w) + ix]
                           : T{0};
              }
            }
          }
        }
      }
    }
  });
}

// Inverse of im2col: scatter-adds cols back onto the input gradient.
template <typename T>
void col2im(const ConvGeometry& g, const T* cols, std::size_t d0, std::size_t d1, T* gin) {
  const std::size_t cols_width = (d1 - d0) * g.out_slice();
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  parallel_for(g.cin, [&](std::size_t ci) {
    T* dst = gin + ci * g.in_plane();
    for (std::size_t tap = 0; tap < g.kernel_volume(); ++tap) {
      const auto kd = static_cast<std::ptrdiff_t>(tap / (g.k * g.k));
      const auto kh = static_cast<std::ptrdiff_t>((tap / g.k) % g.k);
      const auto kw = static_cast<std::ptrdiff_t>(tap % g.k);
      const T* src = cols + (ci * g.kernel_volume() + tap) * cols_width;
      for (std::size_t z = d0; z < d1; ++z) {
        const std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(z) + kd - pad;
        if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(g.d)) continue;
        for (std::size_t y = 0; y < g.oh; ++y) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y) + kh - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          const T* row = src + ((z - d0) * g.oh + y) * g.ow;
          T* line = dst + (static_cast<std::size_t>(iz) * g.h + static_cast<std::size_t>(iy)) * g.w;
          const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, pad - kw);
          const std::ptrdiff_t hi =
              std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(g.ow),
                                       static_cast<std::ptrdiff_t>(g.w) + pad - kw);
          for (std::ptrdiff_t x = lo; x < hi; ++x) line[x + kw - pad] += row[x];
        }
      }
    }
  });
}

// C[i][p] += sum_k A(i, k) * B[k][p] with A(i, k) = a[i * a_row + k * a_col].
// Each output sums over k in order, so row partitioning does not change results.
template <typename T>
void gemm_rows(std::size_t i0, std::size_t i1, std::size_t p0, std::size_t kdim, std::size_t width,
               const T* a, std::size_t a_row, std::size_t a_col, const T* b, std::size_t ldb, T* c,
               std::size_t ldc) {
  for (std::size_t i = i0; i < i1; ++i) {
    T* dst = c + i * ldc;
    for (std::size_t k = 0; k < kdim; ++k) {
      const T coef = a[i * a_row + k * a_col];
      const T* src = b + k * ldb;
      for (std::size_t p = p0; p < width; ++p) dst[p] += coef * src[p];
    }
  }
}

template <typename T>
void gemm_accumulate(std::size_t m, std::size_t kdim, std::size_t width, const T* a, std::size_t a_row,
                     std::size_t a_col, const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  parallel_for(m, [&](std::size_t i) {
    gemm_rows(i, i + 1, 0, kdim, width, a, a_row, a_col, b, ldb, c, ldc);
  });
}

using float4 = float __attribute__((vector_size(16)));
constexpr std::size_t kRowTile = 4;
constexpr std::size_t kVecTile = 2;  // float4 vectors per row

template <>
void gemm_accumulate<float>(std::size_t m, std::size_t kdim, std::size_t width, const float* a,
                            std::size_t a_row, std::size_t a_col, const float* b, std::size_t ldb,
                            float* c, std::size_t ldc) {
  constexpr std::size_t cols = 4 * kVecTile;
  const std::size_t tiles = (m + kRowTile - 1) / kRowTile;
  parallel_for(tiles, [&](std::size_t tile) {
    const std::size_t i0 = tile * kRowTile;
    const std::size_t i1 = std::min(m, i0 + kRowTile);
    std::size_t p0 = 0;
    if (i1 - i0 == kRowTile) {
      for (; p0 + cols <= width; p0 += cols) {
        float4 acc[kRowTile][kVecTile];
        for (std::size_t i = 0; i < kRowTile; ++i) {
          for (std::size_t j = 0; j < kVecTile; ++j) {
            std::memcpy(&acc[i][j], c + (i0 + i) * ldc + p0 + 4 * j, sizeof(float4));
          }
        }
        const float* ap = a + i0 * a_row;
        const float* src = b + p0;
        for (std::size_t k = 0; k < kdim; ++k, ap += a_col, src += ldb) {
          float4 s[kVecTile];
          for (std::size_t j = 0; j < kVecTile; ++j) std::memcpy(&s[j], src + 4 * j, sizeof(float4));
          for (std::size_t i = 0; i < kRowTile; ++i) {
            const float coef = ap[i * a_row];
            for (std::size_t j = 0; j < kVecTile; ++j) acc[i][j] += coef * s[j];
          }
        }
        for (std::size_t i = 0; i < kRowTile; ++i) {
          for (std::size_t j = 0; j < kVecTile; ++j) {
            std::memcpy(c + (i0 + i) * ldc + p0 + 4 * j, &acc[i][j], sizeof(float4));
          }
        }
      }
    }
    gemm_rows(i0, i1, p0, kdim, width, a, a_row, a_col, b, ldb, c, ldc);
  });
}

// out[co][p] += sum_r w[co][r] * cols[r][p].
template <typename T>
void gemm_forward(const ConvGeometry& g, const T* wt, const T* cols, std::size_t width, T* out,
                  std::size_t out_stride) {
  gemm_accumulate(g.cout, g.patch(), width, wt, g.patch(), 1, cols, width, out, out_stride);
}

// dcols[r][p] = sum_co w[co][r] * gout[co][p].
template <typename T>
void gemm_input_grad(const ConvGeometry& g, const T* wt, const T* gout, std::size_t gout_stride,
                     std::size_t width, T* dcols) {
  std::fill(dcols, dcols + g.patch() * width, T{0});
  gemm_accumulate(g.patch(), g.cout, width, wt, 1, g.patch(), gout, gout_stride, dcols, width);
}

// gw[co][r] += sum_p gout[co][p] * cols_t[p][r].
template <typename T>
void gemm_weight_grad(const ConvGeometry& g, const T* gout, std::size_t gout_stride, const T* cols_t,
                      std::size_t width, T* gw) {
  gemm_accumulate(g.cout, width, g.patch(), gout, gout_stride, 1, cols_t, g.patch(), gw, g.patch());
}

}  // namespace

template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t padding) {
  require_5d(input, "conv3d input");
  require_5d(weight, "conv3d weight");
  const std::size_t k = weight.dim(2);
  if (weight.dim(3) != k || weight.dim(4) != k) {
    fail(ErrorCode::kShapeMismatch, "conv3d: kernel must be cubic, got " + shape_string(weight.shape()));
  }
  if (input.dim(1) != weight.dim(1)) {
    fail(ErrorCode::kShapeMismatch, "conv3d: input has " + std::to_string(input.dim(1)) +
                                        " channels, weight expects " + std::to_string(weight.dim(1)));
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    fail(ErrorCode::kShapeMismatch, "conv3d: bias " + shape_string(bias.shape()) +
                                        " does not match " + std::to_string(weight.dim(0)) +
                                        " output channels");
  }
  for (std::size_t axis = 2; axis < 5; ++axis) {
    require(input.dim(axis) + 2 * padding >= k, ErrorCode::kShapeMismatch,
            "conv3d: padded input smaller than kernel");
  }

  ConvGeometry g{};
  g.n = input.dim(0);
  g.cin = input.dim(1);
  g.cout = weight.dim(0);
  g.d = input.dim(2);
  g.h = input.dim(3);
  g.w = input.dim(4);
  g.k = k;
  g.pad = padding;
  g.od = g.d + 2 * padding - k + 1;
  g.oh = g.h + 2 * padding - k + 1;
  g.ow = g.w + 2 * padding - k + 1;

  std::vector<T> out(g.n * g.cout * g.out_plane());
  const T* x = input.values().data();
  const T* wt = weight.values().data();
  const T* b = bias.values().data();
  const std::size_t slab = slab_depth(g);
  std::vector<T> cols(g.patch() * slab * g.out_slice());

  for (std::size_t n = 0; n < g.n; ++n) {
    T* o = out.data() + n * g.cout * g.out_plane();
    for (std::size_t co = 0; co < g.cout; ++co) {
      std::fill(o + co * g.out_plane(), o + (co + 1) * g.out_plane(), b[co]);
    }
    for (std::size_t d0 = 0; d0 < g.od; d0 += slab) {
      const std::size_t d1 = std::min(g.od, d0 + slab);
      im2col(g, x + n * g.cin * g.in_plane(), d0, d1, cols.data());
      gemm_forward(g, wt, cols.data(), (d1 - d0) * g.out_slice(), o + d0 * g.out_slice(),
                   g.out_plane());
    }
  }

  const Shape out_shape{g.n, g.cout, g.od, g.oh, g.ow};
  return Tensor<T>::from_op(out_shape, std::move(out), {input, weight, bias},
                            [g](detail::Node<T>& self) {
    const T* gout = self.grad.data();
    const T* x = value_of(self, 0);
    const T* wt = value_of(self, 1);
    T* gx = grad_of(self, 0);
    T* gw = grad_of(self, 1);

    if (gx || gw) {
      const std::size_t slab = slab_depth(g);
      std::vector<T> cols(g.patch() * slab * g.out_slice());
      for (std::size_t n = 0; n < g.n; ++n) {
        const T* go = gout + n * g.cout * g.out_plane();
        for (std::size_t d0 = 0; d0 < g.od; d0 += slab) {
          const std::size_t d1 = std::min(g.od, d0 + slab);
          const std::size_t width = (d1 - d0) * g.out_slice();
          if (gw) {
            im2col_transposed(g, x + n * g.cin * g.in_plane(), d0, d1, cols.data());
            gemm_weight_grad(g, go + d0 * g.out_slice(), g.out_plane(), cols.data(), width, gw);
          }
          if (gx) {
            gemm_input_grad(g, wt, go + d0 * g.out_slice(), g.out_plane(), width, cols.data());
            col2im(g, cols.data(), d0, d1, gx + n * g.cin * g.in_plane());
          }
        }
      }
    }

    if (T* gb = grad_of(self, 2)) {
      for (std::size_t co = 0; co < g.cout; ++co) {
        double acc = 0.0;
        for (std::size_t n = 0; n < g.n; ++n) {
          const T* go = gout + (n * g.cout + co) * g.out_plane();
          for (std::size_t i = 0; i < g.out_plane(); ++i) acc += static_cast<double>(go[i]);
        }
        gb[co] += static_cast<T>(acc);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization and activations

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                        T eps) {
  require_5d(input, "instance_norm");
  const std::size_t n = input.dim(0);
  const std::size_t c = input.dim(1);
  const std::size_t plane = input.dim(2) * input.dim(3) * input.dim(4);
  require(plane >= 1, ErrorCode::kShapeMismatch, "instance_norm: empty spatial volume");
  require(gamma.numel() == c && beta.numel() == c, ErrorCode::kShapeMismatch,
          "instance_norm: gamma/beta must have " + std::to_string(c) + " entries");

  const T* x = input.values().data();
  const T* gm = gamma.values().data();
  const T* bt = beta.values().data();
  std::vector<T> out(input.numel());
  std::vector<T> normalized(input.numel());
  std::vector<T> inv_std(n * c);

  parallel_for(n * c, [&](std::size_t idx) {
    const std::size_t ch = idx % c;
    const T* src = x + idx * plane;
    double mu = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mu += static_cast<double>(src[i]);
    mu /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double dev = static_cast<double>(src[i]) - mu;
      var += dev * dev;
    }
    var /= static_cast<double>(plane);
    const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
    inv_std[idx] = static_cast<T>(is);
    T* xhat = normalized.data() + idx * plane;
    T* dst = out.data() + idx * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      xhat[i] = static_cast<T>((static_cast<double>(src[i]) - mu) * is);
      dst[i] = gm[ch] * xhat[i] + bt[ch];
    }
  });

  return Tensor<T>::from_op(
      input.shape(), std::move(out), {input, gamma, beta},
      [n, c, plane, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](detail::Node<T>& self) {
        const T* gout = self.grad.data();
        const T* gm = value_of(self, 1);
        T* gx = grad_of(self, 0);
        T* gg = grad_of(self, 1);
        T* gb = grad_of(self, 2);
        std::vector<double> sum_dy(n * c), sum_dy_xhat(n * c);
        for (std::size_t idx = 0; idx < n * c; ++idx) {
          const T* dy = gout + idx * plane;
          const T* xhat = normalized.data() + idx * plane;
          double s = 0.0, sx = 0.0;
          for (std::size_t i = 0; i < plane; ++i) {
            s += static_cast<double>(dy[i]);
            sx += static_cast<double>(dy[i]) * static_cast<double>(xhat[i]);
          }
          sum_dy[idx] = s;
          sum_dy_xhat[idx] = sx;
        }
        for (std::size_t ch = 0; ch < c; ++ch) {
          double acc_g = 0.0, acc_b = 0.0;
          for (std::size_t s = 0; s < n; ++s) {
            acc_g += sum_dy_xhat[s * c + ch];
            acc_b += sum_dy[s * c + ch];
          }
          if (gg) gg[ch] += static_cast<T>(acc_g);
          if (gb) gb[ch] += static_cast<T>(acc_b);
        }
        if (!gx) return;
        parallel_for(n * c, [&](std::size_t idx) {
          const std::size_t ch = idx % c;
          const T* dy = gout + idx * plane;
          const T* xhat = normalized.data() + idx * plane;
          T* dst = gx + idx * plane;
          const double inv_n = 1.0 / static_cast<double>(plane);
          const double mean_dy = sum_dy[idx] * inv_n;
          const double mean_dy_xhat = sum_dy_xhat[idx] * inv_n;
          const double factor = static_cast<double>(gm[ch]) * static_cast<double>(inv_std[idx]);
          for (std::size_t i = 0; i < plane; ++i) {
            dst[i] += static_cast<T>(factor * (static_cast<double>(dy[i]) - mean_dy -
                                               static_cast<double>(xhat[i]) * mean_dy_xhat));
          }
        });
      });
}

template <typename T>
Tensor<T> prelu(const Tensor<T>& input, const Tensor<T>& alpha) {
  require(alpha.numel() == 1, ErrorCode::kShapeMismatch, "prelu: alpha must be a single scalar");
  const T a = alpha.values()[0];
  std::vector<T> out(input.numel());
  const auto x = input.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] >= T{0} ? x[i] : a * x[i];
  return Tensor<T>::from_op(input.shape(), std::move(out), {input, alpha}, [](detail::Node<T>& self) {
    const T* x = value_of(self, 0);
    const T a = value_of(self, 1)[0];
    const std::size_t count = self.grad.size();
    if (T* gx = grad_of(self, 0)) {
      for (std::size_t i = 0; i < count; ++i) gx[i] += x[i] >= T{0} ? self.grad[i] : a * self.grad[i];
    }
    if (T* ga = grad_of(self, 1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        if (x[i] < T{0}) acc += static_cast<double>(x[i]) * static_cast<double>(self.grad[i]);
      }
      ga[0] += static_cast<T>(acc);
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  std::vector<T> out(input.numel());
  const auto x = input.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T{0} ? x[i] : T{0};
  return Tensor<T>::from_op(input.shape(), std::move(out), {input}, [](detail::Node<T>& self) {
    const T* x = value_of(self, 0);
    if (T* gx = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (x[i] > T{0}) gx[i] += self.grad[i];
      }
    }
  });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, bool training, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, ErrorCode::kInvalidArgument, "dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return input;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> factor(input.numel());
  for (auto& f : factor) f = uniform01(rng) >= rate ? keep_scale : T{0};
  std::vector<T> out(input.numel());
  const auto x = input.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor[i];
  return Tensor<T>::from_op(input.shape(), std::move(out), {input},
                            [factor = std::move(factor)](detail::Node<T>& self) {
                              if (T* gx = grad_of(self, 0)) {
                                for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                  gx[i] += self.grad[i] * factor[i];
                                }
                              }
                            });
}

// ---------------------------------------------------------------------------
// Resampling

template <typename T>
Tensor<T> maxpool3d(const Tensor<T>& input) {
  require_5d(input, "maxpool3d");
  const std::size_t d = input.dim(2), h = input.dim(3), w = input.dim(4);
  require(d % 2 == 0 && h % 2 == 0 && w % 2 == 0, ErrorCode::kShapeMismatch,
          "maxpool3d: spatial dims must be even, got " + shape_string(input.shape()));
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t od = d / 2, oh = h / 2, ow = w / 2;
  const std::size_t in_plane = d * h * w, out_plane = od * oh * ow;
  const T* x = input.values().data();
  std::vector<T> out(planes * out_plane);
  std::vector<std::uint32_t> argmax(out.size());

  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x + p * in_plane;
    for (std::size_t z = 0; z < od; ++z) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t xo = 0; xo < ow; ++xo) {
          std::size_t best = ((2 * z) * h + 2 * y) * w + 2 * xo;
          for (std::size_t dz = 0; dz < 2; ++dz) {
            for (std::size_t dy = 0; dy < 2; ++dy) {
              for (std::size_t dx = 0; dx < 2; ++dx) {
                const std::size_t at = ((2 * z + dz) * h + 2 * y + dy) * w + 2 * xo + dx;
                if (src[at] > src[best]) best = at;
              }
            }
          }
          const std::size_t o = p * out_plane + (z * oh + y) * ow + xo;
          out[o] = src[best];
          argmax[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }

  Shape out_shape{input.dim(0), input.dim(1), od, oh, ow};
  return Tensor<T>::from_op(std::move(out_shape), std::move(out), {input},
                            [argmax = std::move(argmax), in_plane, out_plane](detail::Node<T>& self) {
                              T* gx = grad_of(self, 0);
                              if (!gx) return;
                              for (std::size_t o = 0; o < argmax.size(); ++o) {
                                gx[(o / out_plane) * in_plane + argmax[o]] += self.grad[o];
                              }
                            });
}

template <typename T>
Tensor<T> upsample3d_nearest(const Tensor<T>& input) {
  require_5d(input, "upsample3d_nearest");
  const std::size_t d = input.dim(2), h = input.dim(3), w = input.dim(4);
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t ud = 2 * d, uh = 2 * h, uw = 2 * w;
  const std::size_t in_plane = d * h * w, out_plane = ud * uh * uw;
  const T* x = input.values().data();
  std::vector<T> out(planes * out_plane);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t z = 0; z < ud; ++z) {
      for (std::size_t y = 0; y < uh; ++y) {
        const T* src = x + p * in_plane + ((z / 2) * h + y / 2) * w;
        T* dst = out.data() + p * out_plane + (z * uh + y) * uw;
        for (std::size_t xo = 0; xo < uw; ++xo) dst[xo] = src[xo / 2];
      }
    }
  }
  Shape out_shape{input.dim(0), input.dim(1), ud, uh, uw};
  return Tensor<T>::from_op(std::move(out_shape), std::move(out), {input},
                            [planes, d, h, w](detail::Node<T>& self) {
                              T* gx = grad_of(self, 0);
                              if (!gx) return;
                              const std::size_t uh = 2 * h, uw = 2 * w;
                              const std::size_t in_plane = d * h * w, out_plane = 8 * in_plane;
                              for (std::size_t p = 0; p < planes; ++p) {
                                for (std::size_t z = 0; z < 2 * d; ++z) {
                                  for (std::size_t y = 0; y < uh; ++y) {
                                    T* dst = gx + p * in_plane + ((z / 2) * h + y / 2) * w;
                                    const T* src = self.grad.data() + p * out_plane + (z * uh + y) * uw;
                                    for (std::size_t xo = 0; xo < uw; ++xo) dst[xo / 2] += src[xo];
                                  }
                                }
                              }
                            });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_5d(a, "concat_channels");
  require_5d(b, "concat_channels");
  require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3) &&
              a.dim(4) == b.dim(4),
          ErrorCode::kShapeMismatch,
          "concat_channels: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  const std::size_t n = a.dim(0);
  const std::size_t plane = a.dim(2) * a.dim(3) * a.dim(4);
  const std::size_t block_a = a.dim(1) * plane, block_b = b.dim(1) * plane;
  std::vector<T> out(n * (block_a + block_b));
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(a.values().data() + s * block_a, block_a, out.data() + s * (block_a + block_b));
    std::copy_n(b.values().data() + s * block_b, block_b,
                out.data() + s * (block_a + block_b) + block_a);
  }
  Shape out_shape{n, a.dim(1) + b.dim(1), a.dim(2), a.dim(3), a.dim(4)};
  return Tensor<T>::from_op(std::move(out_shape), std::move(out), {a, b},
                            [n, block_a, block_b](detail::Node<T>& self) {
                              const std::size_t stride = block_a + block_b;
                              if (T* ga = grad_of(self, 0)) {
                                for (std::size_t s = 0; s < n; ++s) {
                                  for (std::size_t i = 0; i < block_a; ++i) {
                                    ga[s * block_a + i] += self.grad[s * stride + i];
                                  }
                                }
                              }
                              if (T* gb = grad_of(self, 1)) {
                                for (std::size_t s = 0; s < n; ++s) {
                                  for (std::size_t i = 0; i < block_b; ++i) {
                                    gb[s * block_b + i] += self.grad[s * stride + block_a + i];
                                  }
                                }
                              }
                            });
}

#define VOXELPAINT_INSTANTIATE_OPS(T)                                                         \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> scale(const Tensor<T>&, T);                                             \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                        \
  template Tensor<T> square(const Tensor<T>&);                                               \
  template Tensor<T> sum(const Tensor<T>&);                                                  \
  template Tensor<T> mean(const Tensor<T>&);                                                 \
  template Tensor<T> conv3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t); \
  template Tensor<T> instance_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> prelu(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> relu(const Tensor<T>&);                                                 \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng&);                          \
  template Tensor<T> maxpool3d(const Tensor<T>&);                                            \
  template Tensor<T> upsample3d_nearest(const Tensor<T>&);                                   \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);

VOXELPAINT_INSTANTIATE_OPS(float)
VOXELPAINT_INSTANTIATE_OPS(double)

#undef VOXELPAINT_INSTANTIATE_OPS

}  // namespace voxelpaint
