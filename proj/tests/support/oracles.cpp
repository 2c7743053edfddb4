#include "oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

namespace vptest {

std::vector<double> random_values(std::size_t n, Rng& rng, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * voxelpaint::uniform01(rng);
  return v;
}

std::vector<double> random_nonzero(std::size_t n, Rng& rng, double min_abs, double max_abs) {
  std::vector<double> v(n);
  for (auto& x : v) {
    const double mag = min_abs + (max_abs - min_abs) * voxelpaint::uniform01(rng);
    x = voxelpaint::uniform01(rng) < 0.5 ? -mag : mag;
  }
  return v;
}

std::vector<double> naive_conv3d(const std::vector<double>& input, const Shape& in_shape,
                                 const std::vector<double>& weight, const Shape& w_shape,
                                 const std::vector<double>& bias, std::size_t padding) {
  const std::size_t n = in_shape[0], ci = in_shape[1], d = in_shape[2], h = in_shape[3],
                    w = in_shape[4];
  const std::size_t co = w_shape[0], k = w_shape[2];
  const std::size_t od = d + 2 * padding - k + 1, oh = h + 2 * padding - k + 1,
                    ow = w + 2 * padding - k + 1;
  std::vector<double> out(n * co * od * oh * ow);
  const auto p = static_cast<long>(padding);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t z = 0; z < od; ++z)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t x = 0; x < ow; ++x) {
            double acc = bias[o];
            for (std::size_t c = 0; c < ci; ++c)
              for (std::size_t a = 0; a < k; ++a)
                for (std::size_t bb = 0; bb < k; ++bb)
                  for (std::size_t cc = 0; cc < k; ++cc) {
                    const long iz = long(z + a) - p, iy = long(y + bb) - p, ix = long(x + cc) - p;
                    if (iz < 0 || iy < 0 || ix < 0 || iz >= long(d) || iy >= long(h) || ix >= long(w))
                      continue;
                    acc += weight[(((o * ci + c) * k + a) * k + bb) * k + cc] *
                           input[(((b * ci + c) * d + iz) * h + iy) * w + ix];
                  }
            out[(((b * co + o) * od + z) * oh + y) * ow + x] = acc;
          }
  return out;
}

double brute_force_ssim(const std::vector<double>& x, const std::vector<double>& y,
                        std::size_t d, std::size_t h, std::size_t w, int window, double sigma,
                        double dynamic_range) {
  const auto win = static_cast<std::size_t>(window);
  const double r = 0.5 * (window - 1);
  std::vector<double> kernel(win * win * win);
  double z = 0.0;
  for (std::size_t a = 0; a < win; ++a)
    for (std::size_t b = 0; b < win; ++b)
      for (std::size_t c = 0; c < win; ++c) {
        const double da = a - r, db = b - r, dc = c - r;
        const double v = std::exp(-(da * da + db * db + dc * dc) / (2 * sigma * sigma));
        kernel[(a * win + b) * win + c] = v;
        z += v;
      }
  for (auto& v : kernel) v /= z;
  const double c1 = std::pow(0.01 * dynamic_range, 2), c2 = std::pow(0.03 * dynamic_range, 2);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t k0 = 0; k0 + win <= d; ++k0)
    for (std::size_t j0 = 0; j0 + win <= h; ++j0)
      for (std::size_t i0 = 0; i0 + win <= w; ++i0) {
        double mx = 0, my = 0;
        for (std::size_t a = 0; a < win; ++a)
          for (std::size_t b = 0; b < win; ++b)
            for (std::size_t c = 0; c < win; ++c) {
              const double wt = kernel[(a * win + b) * win + c];
              const std::size_t at = ((k0 + a) * h + (j0 + b)) * w + (i0 + c);
              mx += wt * x[at];
              my += wt * y[at];
            }
        double vx = 0, vy = 0, cxy = 0;
        for (std::size_t a = 0; a < win; ++a)
          for (std::size_t b = 0; b < win; ++b)
            for (std::size_t c = 0; c < win; ++c) {
              const double wt = kernel[(a * win + b) * win + c];
              const std::size_t at = ((k0 + a) * h + (j0 + b)) * w + (i0 + c);
              vx += wt * (x[at] - mx) * (x[at] - mx);
              vy += wt * (y[at] - my) * (y[at] - my);
              cxy += wt * (x[at] - mx) * (y[at] - my);
            }
        total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
  return total / static_cast<double>(count);
}

voxelpaint::MaskVolume naive_dilate(const voxelpaint::MaskVolume& mask, int radius) {
  const auto& dm = mask.dims;
  voxelpaint::MaskVolume out(dm, mask.role);
  std::vector<std::array<long, 3>> set;
  for (std::size_t k = 0; k < dm.z; ++k)
    for (std::size_t j = 0; j < dm.y; ++j)
      for (std::size_t i = 0; i < dm.x; ++i)
        if (mask.at(i, j, k)) set.push_back({long(i), long(j), long(k)});
  for (std::size_t k = 0; k < dm.z; ++k)
    for (std::size_t j = 0; j < dm.y; ++j)
      for (std::size_t i = 0; i < dm.x; ++i)
        for (const auto& s : set) {
          const long dx = long(i) - s[0], dy = long(j) - s[1], dz = long(k) - s[2];
          if (dx * dx + dy * dy + dz * dz <= long(radius) * radius) {
            out.at(i, j, k) = 1;
            break;
          }
        }
  return out;
}

voxelpaint::MaskVolume quarter_turn_xy(const voxelpaint::MaskVolume& in) {
  const voxelpaint::Dims& d = in.dims;
  voxelpaint::MaskVolume out(d, in.role);
  for (std::size_t k = 0; k < d.z; ++k)
    for (std::size_t j = 0; j < d.y; ++j)
      for (std::size_t i = 0; i < d.x; ++i) out.at(d.x - 1 - j, i, k) = in.at(i, j, k);
  return out;
}

voxelpaint::MaskVolume quarter_turn_yz(const voxelpaint::MaskVolume& in) {
  const voxelpaint::Dims& d = in.dims;
  voxelpaint::MaskVolume out(d, in.role);
  for (std::size_t k = 0; k < d.z; ++k)
    for (std::size_t j = 0; j < d.y; ++j)
      for (std::size_t i = 0; i < d.x; ++i) out.at(i, d.y - 1 - k, j) = in.at(i, j, k);
  return out;
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2 * h);
}

double max_relative_error(const std::vector<GradSample>& samples, double floor) {
  double worst = 0.0;
  for (const auto& s : samples) worst = std::max(worst, relative_error(s.analytic, s.numeric, floor));
  return worst;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, Rng& rng) {
  if (count >= n) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  std::set<std::size_t> picked;
  while (picked.size() < count) picked.insert(voxelpaint::uniform_index(rng, n));
  return {picked.begin(), picked.end()};
}

}  // namespace vptest
