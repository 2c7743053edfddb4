#include "voxelpaint/phantom.hpp"

#include <cmath>
#include <numbers>

#include "voxelpaint/error.hpp"
#include "voxelpaint/random.hpp"

namespace voxelpaint {

Phantom make_phantom(const Dims& dims, std::uint64_t seed) {
  require(dims.x >= 8 && dims.y >= 8 && dims.z >= 8, ErrorCode::kInvalidArgument,
          "phantom: dims must be at least 8 per axis");
  Rng rng(seed);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };

  const double c[3] = {(dims.x - 1) / 2.0, (dims.y - 1) / 2.0, (dims.z - 1) / 2.0};
  const double r[3] = {dims.x * between(0.40, 0.46), dims.y * between(0.40, 0.46),
                       dims.z * between(0.40, 0.46)};
  const double freq[3] = {between(0.5, 1.5), between(0.5, 1.5), between(0.5, 1.5)};
  const double phase[3] = {between(0, 2 * std::numbers::pi), between(0, 2 * std::numbers::pi),
                           between(0, 2 * std::numbers::pi)};
  const double base = between(500.0, 700.0);

  // Lesion centre inside the inner half of the brain.
  double lc[3], lr[3];
  for (int a = 0; a < 3; ++a) {
    lc[a] = c[a] + between(-0.35, 0.35) * r[a];
    lr[a] = r[a] * between(0.18, 0.26);
  }

  Phantom p{Volume(dims), MaskVolume(dims, MaskRole::kUnhealthy)};
  for (std::size_t k = 0; k < dims.z; ++k) {
    for (std::size_t j = 0; j < dims.y; ++j) {
      for (std::size_t i = 0; i < dims.x; ++i) {
        const double pos[3] = {double(i), double(j), double(k)};
        double rho = 0.0, lesion = 0.0, wave = 0.0;
        for (int a = 0; a < 3; ++a) {
          const double u = (pos[a] - c[a]) / r[a];
          rho += u * u;
          const double v = (pos[a] - lc[a]) / lr[a];
          lesion += v * v;
          wave += std::sin(freq[a] * std::numbers::pi * u + phase[a]);
        }
        if (rho > 1.0) continue;
        double value = base * (1.0 + 0.25 * wave / 3.0) * (0.75 + 0.25 * (1.0 - rho));
        if (lesion <= 1.0) {
          p.tumor.at(i, j, k) = 1;
          value *= 1.3;
        }
        p.t1n.at(i, j, k) = static_cast<float>(value);
      }
    }
  }
  return p;
}

}  // namespace voxelpaint
