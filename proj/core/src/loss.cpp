#include "voxelpaint/loss.hpp"

#include <cmath>

#include "voxelpaint/error.hpp"
#include "voxelpaint/ops.hpp"

namespace voxelpaint {

std::vector<double> SsimParams::taps() const {
  validate();
  std::vector<double> g(static_cast<std::size_t>(window));
  const double r = 0.5 * static_cast<double>(window - 1);
  double total = 0.0;
  for (int k = 0; k < window; ++k) {
    const double d = static_cast<double>(k) - r;
    g[static_cast<std::size_t>(k)] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += g[static_cast<std::size_t>(k)];
  }
  for (auto& v : g) v /= total;
  return g;
}

void SsimParams::validate() const {
  require(window >= 1 && window % 2 == 1, ErrorCode::kInvalidArgument, "ssim: window must be odd");
  require(sigma > 0.0, ErrorCode::kInvalidArgument, "ssim: sigma must be positive");
  require(dynamic_range > 0.0, ErrorCode::kInvalidArgument, "ssim: dynamic range must be positive");
}

void LossWeights::validate() const {
  require(lambda1 >= 0.0 && lambda2 >= 0.0, ErrorCode::kInvalidArgument,
          "loss weights must be non-negative");
  require(lambda1 > 0.0 || lambda2 > 0.0, ErrorCode::kInvalidArgument,
          "at least one loss weight must be positive");
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> masked_mae(const Tensor<T>& pred, const Tensor<T>& gt, std::span<const std::uint8_t> region) {
  require(pred.shape() == gt.shape(), ErrorCode::kShapeMismatch,
          "masked_mae: pred " + shape_string(pred.shape()) + " vs gt " + shape_string(gt.shape()));
  require(region.size() == pred.numel(), ErrorCode::kShapeMismatch,
          "masked_mae: region has " + std::to_string(region.size()) + " voxels, tensor has " +
              std::to_string(pred.numel()));
  std::vector<std::uint8_t> keep(region.begin(), region.end());
  std::size_t m = 0;
  double acc = 0.0;
  const auto p = pred.values();
  const auto g = gt.values();
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) continue;
    ++m;
    acc += std::abs(static_cast<double>(p[i]) - static_cast<double>(g[i]));
  }
  require(m > 0, ErrorCode::kInvalidArgument, "masked_mae: empty region");
  const double inv_m = 1.0 / static_cast<double>(m);
  return Tensor<T>::from_op(
      Shape{1}, {static_cast<T>(acc * inv_m)}, {pred, gt},
      [keep = std::move(keep), inv_m](detail::Node<T>& self) {
        const T* p = self.parents[0]->value.data();
        const T* g = self.parents[1]->value.data();
        const double scale = static_cast<double>(self.grad[0]) * inv_m;
        T* gp = self.parents[0]->requires_grad ? self.parents[0]->grad_buffer().data() : nullptr;
        T* gg = self.parents[1]->requires_grad ? self.parents[1]->grad_buffer().data() : nullptr;
        for (std::size_t i = 0; i < keep.size(); ++i) {
          if (!keep[i] || p[i] == g[i]) continue;
          const double s = p[i] > g[i] ? scale : -scale;
          if (gp) gp[i] += static_cast<T>(s);
          if (gg) gg[i] -= static_cast<T>(s);
        }
      });
}

// ---------------------------------------------------------------------------
// SSIM

namespace {

struct Grid3 {
  std::size_t d, h, w;
  std::size_t size() const { return d * h * w; }
};

// Valid correlation with `taps` along one axis (0 = D, 1 = H, 2 = W).
std::vector<double> filter_axis(const std::vector<double>& in, Grid3 g, int axis,
                                const std::vector<double>& taps, Grid3& out_grid) {
  const std::size_t k = taps.size();
  out_grid = g;
  std::size_t stride = 1;
  if (axis == 0) {
    out_grid.d = g.d - k + 1;
    stride = g.h * g.w;
  } else if (axis == 1) {
    out_grid.h = g.h - k + 1;
    stride = g.w;
  } else {
    out_grid.w = g.w - k + 1;
  }
  std::vector<double> out(out_grid.size(), 0.0);
  for (std::size_t z = 0; z < out_grid.d; ++z) {
    for (std::size_t y = 0; y < out_grid.h; ++y) {
      const std::size_t src_row = (z * g.h + y) * g.w;
      double* dst = out.data() + (z * out_grid.h + y) * out_grid.w;
      for (std::size_t t = 0; t < k; ++t) {
        const double tap = taps[t];
        const double* src = in.data() + src_row + t * stride;
        for (std::size_t x = 0; x < out_grid.w; ++x) dst[x] += tap * src[x];
      }
    }
  }
  return out;
}

// Adjoint of filter_axis: scatters grad of the filtered grid back to `g`.
std::vector<double> filter_axis_adjoint(const std::vector<double>& grad_out, Grid3 g, int axis,
                                        const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  Grid3 og = g;
  std::size_t stride = 1;
  if (axis == 0) {
    og.d = g.d - k + 1;
    stride = g.h * g.w;
  } else if (axis == 1) {
    og.h = g.h - k + 1;
    stride = g.w;
  } else {
    og.w = g.w - k + 1;
  }
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t z = 0; z < og.d; ++z) {
    for (std::size_t y = 0; y < og.h; ++y) {
      const std::size_t dst_row = (z * g.h + y) * g.w;
      const double* src = grad_out.data() + (z * og.h + y) * og.w;
      for (std::size_t t = 0; t < k; ++t) {
        const double tap = taps[t];
        double* dst = out.data() + dst_row + t * stride;
        for (std::size_t x = 0; x < og.w; ++x) dst[x] += tap * src[x];
      }
    }
  }
  return out;
}

std::vector<double> gaussian_filter(const std::vector<double>& in, Grid3 g,
                                    const std::vector<double>& taps) {
  Grid3 g1, g2, g3;
  auto a = filter_axis(in, g, 2, taps, g1);
  auto b = filter_axis(a, g1, 1, taps, g2);
  return filter_axis(b, g2, 0, taps, g3);
}

std::vector<double> gaussian_filter_adjoint(const std::vector<double>& grad, Grid3 g,
                                            const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const Grid3 g1{g.d, g.h, g.w - k + 1};
  const Grid3 g2{g.d, g.h - k + 1, g.w - k + 1};
  auto b = filter_axis_adjoint(grad, g2, 0, taps);
  auto a = filter_axis_adjoint(b, g1, 1, taps);
  return filter_axis_adjoint(a, g, 2, taps);
}

struct SsimPlaneState {
  std::vector<double> mx, my, a1, a2, b1, b2, s;
};

}  // namespace

template <typename T>
Tensor<T> ssim3d(const Tensor<T>& pred, const Tensor<T>& gt, const SsimParams& params) {
  require(pred.shape() == gt.shape(), ErrorCode::kShapeMismatch,
          "ssim3d: pred " + shape_string(pred.shape()) + " vs gt " + shape_string(gt.shape()));
  require(pred.rank() == 5, ErrorCode::kShapeMismatch,
          "ssim3d: expected [N,C,D,H,W], got " + shape_string(pred.shape()));
  const auto taps = params.taps();
  const auto win = static_cast<std::size_t>(params.window);
  const Grid3 grid{pred.dim(2), pred.dim(3), pred.dim(4)};
  require(grid.d >= win && grid.h >= win && grid.w >= win, ErrorCode::kShapeMismatch,
          "ssim3d: volume " + shape_string(pred.shape()) + " smaller than the " +
              std::to_string(win) + "^3 window");
  const Grid3 valid{grid.d - win + 1, grid.h - win + 1, grid.w - win + 1};
  const std::size_t planes = pred.dim(0) * pred.dim(1);
  const double c1 = params.c1(), c2 = params.c2();
  const double positions = static_cast<double>(planes * valid.size());

  std::vector<SsimPlaneState> states(planes);
  double total = 0.0;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* xs = pred.values().data() + p * grid.size();
    const T* ys = gt.values().data() + p * grid.size();
    std::vector<double> x(grid.size()), y(grid.size()), xx(grid.size()), yy(grid.size()),
        xy(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      x[i] = static_cast<double>(xs[i]);
      y[i] = static_cast<double>(ys[i]);
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    auto& st = states[p];
    st.mx = gaussian_filter(x, grid, taps);
    st.my = gaussian_filter(y, grid, taps);
    const auto exx = gaussian_filter(xx, grid, taps);
    const auto eyy = gaussian_filter(yy, grid, taps);
    const auto exy = gaussian_filter(xy, grid, taps);
    const std::size_t n = valid.size();
    st.a1.resize(n);
    st.a2.resize(n);
    st.b1.resize(n);
    st.b2.resize(n);
    st.s.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double mxy = st.mx[i] * st.my[i];
      const double mxx = st.mx[i] * st.mx[i];
      const double myy = st.my[i] * st.my[i];
      const double sxy = exy[i] - mxy;
      const double sxx = exx[i] - mxx;
      const double syy = eyy[i] - myy;
      st.a1[i] = 2.0 * mxy + c1;
      st.a2[i] = 2.0 * sxy + c2;
      st.b1[i] = mxx + myy + c1;
      st.b2[i] = sxx + syy + c2;
      st.s[i] = (st.a1[i] * st.a2[i]) / (st.b1[i] * st.b2[i]);
      total += st.s[i];
    }
  }

  return Tensor<T>::from_op(
      Shape{1}, {static_cast<T>(total / positions)}, {pred, gt},
      [states = std::move(states), taps, grid, planes, positions](detail::Node<T>& self) {
        const double g_out = static_cast<double>(self.grad[0]) / positions;
        auto& px = *self.parents[0];
        auto& py = *self.parents[1];
        for (std::size_t p = 0; p < planes; ++p) {
          const auto& st = states[p];
          const std::size_t n = st.s.size();
          std::vector<double> dmx(n), dmy(n), dexx(n), deyy(n), dexy(n);
          for (std::size_t i = 0; i < n; ++i) {
            const double den = st.b1[i] * st.b2[i];
            const double s = st.s[i];
            const double mx = st.mx[i], my = st.my[i];
            dmx[i] = g_out * ((2.0 * my * st.a2[i] - 2.0 * my * st.a1[i]) / den -
                              s * (2.0 * mx / st.b1[i] - 2.0 * mx / st.b2[i]));
            dmy[i] = g_out * ((2.0 * mx * st.a2[i] - 2.0 * mx * st.a1[i]) / den -
                              s * (2.0 * my / st.b1[i] - 2.0 * my / st.b2[i]));
            dexy[i] = g_out * 2.0 * st.a1[i] / den;
            dexx[i] = -g_out * s / st.b2[i];
            deyy[i] = dexx[i];
          }
          const auto gmx = gaussian_filter_adjoint(dmx, grid, taps);
          const auto gmy = gaussian_filter_adjoint(dmy, grid, taps);
          const auto gxx = gaussian_filter_adjoint(dexx, grid, taps);
          const auto gyy = gaussian_filter_adjoint(deyy, grid, taps);
          const auto gxy = gaussian_filter_adjoint(dexy, grid, taps);
          const T* xs = px.value.data() + p * grid.size();
          const T* ys = py.value.data() + p * grid.size();
          if (px.requires_grad) {
            T* gx = px.grad_buffer().data() + p * grid.size();
            for (std::size_t i = 0; i < grid.size(); ++i) {
              gx[i] += static_cast<T>(gmx[i] + 2.0 * static_cast<double>(xs[i]) * gxx[i] +
                                      static_cast<double>(ys[i]) * gxy[i]);
            }
          }
          if (py.requires_grad) {
            T* gy = py.grad_buffer().data() + p * grid.size();
            for (std::size_t i = 0; i < grid.size(); ++i) {
              gy[i] += static_cast<T>(gmy[i] + 2.0 * static_cast<double>(ys[i]) * gyy[i] +
                                      static_cast<double>(xs[i]) * gxy[i]);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> composite_loss(const Tensor<T>& pred, const Tensor<T>& gt,
                         std::span<const std::uint8_t> region, const LossWeights& weights,
                         const SsimParams& params) {
  weights.validate();
  Tensor<T> total;
  if (weights.lambda1 > 0.0) {
    total = scale(masked_mae(pred, gt, region), static_cast<T>(weights.lambda1));
  }
  if (weights.lambda2 > 0.0) {
    const Tensor<T> dssim = add_scalar(scale(ssim3d(pred, gt, params), T{-1}), T{1});
    const Tensor<T> term = scale(dssim, static_cast<T>(weights.lambda2));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

template <typename T>
Tensor<T> volume_tensor(const Volume& volume, bool requires_grad) {
  std::vector<T> values(volume.voxels.begin(), volume.voxels.end());
  return Tensor<T>(Shape{1, 1, volume.dims.z, volume.dims.y, volume.dims.x}, std::move(values),
                   requires_grad);
}

template <typename T>
Tensor<T> mask_tensor(const MaskVolume& mask) {
  std::vector<T> values(mask.bits.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = mask.bits[i] ? T{1} : T{0};
  return Tensor<T>(Shape{1, 1, mask.dims.z, mask.dims.y, mask.dims.x}, std::move(values), false);
}

#define VOXELPAINT_INSTANTIATE_LOSS(T)                                                          \
  template Tensor<T> masked_mae(const Tensor<T>&, const Tensor<T>&, std::span<const std::uint8_t>); \
  template Tensor<T> ssim3d(const Tensor<T>&, const Tensor<T>&, const SsimParams&);            \
  template Tensor<T> composite_loss(const Tensor<T>&, const Tensor<T>&,                        \
                                    std::span<const std::uint8_t>, const LossWeights&,         \
                                    const SsimParams&);                                        \
  template Tensor<T> volume_tensor(const Volume&, bool);                                       \
  template Tensor<T> mask_tensor(const MaskVolume&);

VOXELPAINT_INSTANTIATE_LOSS(float)
VOXELPAINT_INSTANTIATE_LOSS(double)

#undef VOXELPAINT_INSTANTIATE_LOSS

}  // namespace voxelpaint
