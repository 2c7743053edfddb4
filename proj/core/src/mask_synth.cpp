#include "voxelpaint/mask_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "voxelpaint/error.hpp"

namespace voxelpaint {

void MaskGenParams::validate() const {
  require(margin >= 0, ErrorCode::kInvalidArgument, "mask params: margin must be >= 0");
  require(max_attempts >= 1, ErrorCode::kInvalidArgument, "mask params: max_attempts must be >= 1");
  require(volume_fraction > 0.0 && volume_fraction <= 1.0, ErrorCode::kInvalidArgument,
          "mask params: volume_fraction must be in (0, 1]");
}

// ---------------------------------------------------------------------------
// Morphology

MaskVolume dilate(const MaskVolume& mask, int radius) {
  require(radius >= 0, ErrorCode::kInvalidArgument, "dilate: negative radius");
  if (radius == 0) return mask;
  struct Offset {
    int x, y, z;
  };
  std::vector<Offset> ball;
  for (int z = -radius; z <= radius; ++z) {
    for (int y = -radius; y <= radius; ++y) {
      for (int x = -radius; x <= radius; ++x) {
        if (x * x + y * y + z * z <= radius * radius) ball.push_back({x, y, z});
      }
    }
  }
  const Dims& d = mask.dims;
  MaskVolume out(d, mask.role);
  for (std::size_t k = 0; k < d.z; ++k) {
    for (std::size_t j = 0; j < d.y; ++j) {
      for (std::size_t i = 0; i < d.x; ++i) {
        if (!mask.at(i, j, k)) continue;
        for (const auto& o : ball) {
          const auto x = static_cast<std::ptrdiff_t>(i) + o.x;
          const auto y = static_cast<std::ptrdiff_t>(j) + o.y;
          const auto z = static_cast<std::ptrdiff_t>(k) + o.z;
          if (x < 0 || y < 0 || z < 0 || x >= static_cast<std::ptrdiff_t>(d.x) ||
              y >= static_cast<std::ptrdiff_t>(d.y) || z >= static_cast<std::ptrdiff_t>(d.z)) {
            continue;
          }
          out.bits[d.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                           static_cast<std::size_t>(z))] = 1;
        }
      }
    }
  }
  return out;
}

MaskVolume erode(const MaskVolume& mask) {
  const Dims& d = mask.dims;
  MaskVolume out(d, mask.role);
  for (std::size_t k = 1; k + 1 < d.z; ++k) {
    for (std::size_t j = 1; j + 1 < d.y; ++j) {
      for (std::size_t i = 1; i + 1 < d.x; ++i) {
        out.at(i, j, k) = mask.at(i, j, k) && mask.at(i - 1, j, k) && mask.at(i + 1, j, k) &&
                          mask.at(i, j - 1, k) && mask.at(i, j + 1, k) && mask.at(i, j, k - 1) &&
                          mask.at(i, j, k + 1);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Placement

namespace {

struct Voxel {
  std::ptrdiff_t x, y, z;
};

std::vector<Voxel> set_voxels(const MaskVolume& mask) {
  std::vector<Voxel> out;
  const Dims& d = mask.dims;
  for (std::size_t k = 0; k < d.z; ++k) {
    for (std::size_t j = 0; j < d.y; ++j) {
      for (std::size_t i = 0; i < d.x; ++i) {
        if (mask.at(i, j, k)) {
          out.push_back({static_cast<std::ptrdiff_t>(i), static_cast<std::ptrdiff_t>(j),
                         static_cast<std::ptrdiff_t>(k)});
        }
      }
    }
  }
  return out;
}

// Shape as offsets from the center of its bounding box.
std::vector<Voxel> centered_shape(const MaskVolume& mask) {
  auto voxels = set_voxels(mask);
  if (voxels.empty()) return voxels;
  Voxel lo = voxels.front(), hi = voxels.front();
  for (const auto& v : voxels) {
    lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
    hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
  }
  const Voxel center{(lo.x + hi.x) / 2, (lo.y + hi.y) / 2, (lo.z + hi.z) / 2};
  for (auto& v : voxels) v = {v.x - center.x, v.y - center.y, v.z - center.z};
  return voxels;
}

}  // namespace

MaskVolume sample_healthy_mask(const MaskVolume& brain, const MaskVolume& tumor,
                               const MaskGenParams& params, Rng& rng) {
  params.validate();
  require(brain.dims == tumor.dims, ErrorCode::kDimMismatch,
          "sample_healthy_mask: brain " + to_string(brain.dims) + " vs tumor " + to_string(tumor.dims));
  const auto brain_voxels = set_voxels(brain);
  require(!brain_voxels.empty(), ErrorCode::kInvalidArgument, "sample_healthy_mask: empty brain mask");
  require(mask_subset(tumor, brain), ErrorCode::kInvalidArgument,
          "sample_healthy_mask: tumor extends outside the brain mask");
  const std::size_t tumor_count = tumor.count();
  if (tumor_count == 0) {
    fail(ErrorCode::kPlacementFailure, "sample_healthy_mask: empty tumor gives an empty healthy mask");
  }

  const MaskVolume forbidden = dilate(tumor, params.margin);
  const Dims& d = brain.dims;
  auto allowed = [&](std::ptrdiff_t x, std::ptrdiff_t y, std::ptrdiff_t z) {
    if (x < 0 || y < 0 || z < 0 || x >= static_cast<std::ptrdiff_t>(d.x) ||
        y >= static_cast<std::ptrdiff_t>(d.y) || z >= static_cast<std::ptrdiff_t>(d.z)) {
      return false;
    }
    const std::size_t at = d.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                   static_cast<std::size_t>(z));
    return brain.bits[at] && !forbidden.bits[at];
  };

  MaskVolume shape = tumor;
  const auto target = static_cast<double>(tumor_count) * params.volume_fraction;
  while (static_cast<double>(shape.count()) > target) {
    MaskVolume smaller = erode(shape);
    if (smaller.empty()) break;
    shape = std::move(smaller);
  }

  for (;;) {
    const auto offsets = centered_shape(shape);
    if (offsets.empty()) break;
    for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
      const Voxel& anchor = brain_voxels[uniform_index(rng, brain_voxels.size())];
      const bool fits = std::all_of(offsets.begin(), offsets.end(), [&](const Voxel& o) {
        return allowed(anchor.x + o.x, anchor.y + o.y, anchor.z + o.z);
      });
      if (!fits) continue;
      MaskVolume out(d, MaskRole::kHealthy);
      for (const auto& o : offsets) {
        out.bits[d.index(static_cast<std::size_t>(anchor.x + o.x), static_cast<std::size_t>(anchor.y + o.y),
                         static_cast<std::size_t>(anchor.z + o.z))] = 1;
      }
      return out;
    }
    shape = erode(shape);
  }
  fail(ErrorCode::kPlacementFailure,
       "sample_healthy_mask: no tumor-disjoint placement inside the brain after erosion fallback");
}

// ---------------------------------------------------------------------------
// Augmentation

AugmentDraw draw_augmentation(Rng& rng) {
  AugmentDraw draw;
  for (auto& m : draw.mirror) m = uniform01(rng) < 0.5;
  draw.theta_xy_deg = 360.0 * uniform01(rng);
  draw.theta_yz_deg = 360.0 * uniform01(rng);
  return draw;
}

MaskVolume mirror(const MaskVolume& mask, int axis) {
  require(axis >= 0 && axis < 3, ErrorCode::kInvalidArgument, "mirror: axis must be 0, 1 or 2");
  const Dims& d = mask.dims;
  MaskVolume out(d, mask.role);
  for (std::size_t k = 0; k < d.z; ++k) {
    for (std::size_t j = 0; j < d.y; ++j) {
      for (std::size_t i = 0; i < d.x; ++i) {
        const std::size_t si = axis == 0 ? d.x - 1 - i : i;
        const std::size_t sj = axis == 1 ? d.y - 1 - j : j;
        const std::size_t sk = axis == 2 ? d.z - 1 - k : k;
        out.at(i, j, k) = mask.at(si, sj, sk);
      }
    }
  }
  return out;
}

namespace {

// Rotation in the plane spanned by axes a and b (0 = x, 1 = y, 2 = z).
MaskVolume rotate_plane(const MaskVolume& mask, int a, int b, double degrees) {
  const Dims& d = mask.dims;
  const std::array<std::ptrdiff_t, 3> extent{static_cast<std::ptrdiff_t>(d.x),
                                             static_cast<std::ptrdiff_t>(d.y),
                                             static_cast<std::ptrdiff_t>(d.z)};
  MaskVolume out(d, mask.role);
  const auto voxels = set_voxels(mask);
  if (voxels.empty()) return out;

  std::array<std::ptrdiff_t, 3> lo{extent[0], extent[1], extent[2]}, hi{-1, -1, -1};
  for (const auto& v : voxels) {
    const std::array<std::ptrdiff_t, 3> c{v.x, v.y, v.z};
    for (int ax = 0; ax < 3; ++ax) {
      lo[ax] = std::min(lo[ax], c[ax]);
      hi[ax] = std::max(hi[ax], c[ax]);
    }
  }

  const double radians = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(radians), sn = std::sin(radians);
  const double ca = 0.5 * static_cast<double>(extent[a] - 1);
  const double cb = 0.5 * static_cast<double>(extent[b] - 1);

  // Output window: rotated source bounding box grown by one voxel.
  double min_a = 1e300, max_a = -1e300, min_b = 1e300, max_b = -1e300;
  for (auto pa : {lo[a], hi[a]}) {
    for (auto pb : {lo[b], hi[b]}) {
      const double ra = ca + cs * (static_cast<double>(pa) - ca) - sn * (static_cast<double>(pb) - cb);
      const double rb = cb + sn * (static_cast<double>(pa) - ca) + cs * (static_cast<double>(pb) - cb);
      min_a = std::min(min_a, ra);
      max_a = std::max(max_a, ra);
      min_b = std::min(min_b, rb);
      max_b = std::max(max_b, rb);
    }
  }
  auto clamp_index = [](double v, std::ptrdiff_t n) {
    return std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(v), 0, n - 1);
  };
  const std::ptrdiff_t a0 = clamp_index(std::floor(min_a) - 1, extent[a]);
  const std::ptrdiff_t a1 = clamp_index(std::ceil(max_a) + 1, extent[a]);
  const std::ptrdiff_t b0 = clamp_index(std::floor(min_b) - 1, extent[b]);
  const std::ptrdiff_t b1 = clamp_index(std::ceil(max_b) + 1, extent[b]);
  const int c = 3 - a - b;

  std::array<std::ptrdiff_t, 3> src{}, dst{};
  for (std::ptrdiff_t oa = a0; oa <= a1; ++oa) {
    for (std::ptrdiff_t ob = b0; ob <= b1; ++ob) {
      const double da = static_cast<double>(oa) - ca;
      const double db = static_cast<double>(ob) - cb;
      const auto sa = static_cast<std::ptrdiff_t>(std::lround(ca + cs * da + sn * db));
      const auto sb = static_cast<std::ptrdiff_t>(std::lround(cb - sn * da + cs * db));
      if (sa < 0 || sb < 0 || sa >= extent[a] || sb >= extent[b]) continue;
      src[a] = sa;
      src[b] = sb;
      dst[a] = oa;
      dst[b] = ob;
      for (std::ptrdiff_t oc = lo[c]; oc <= hi[c]; ++oc) {
        src[c] = dst[c] = oc;
        const auto s = d.index(static_cast<std::size_t>(src[0]), static_cast<std::size_t>(src[1]),
                               static_cast<std::size_t>(src[2]));
        if (mask.bits[s]) {
          out.bits[d.index(static_cast<std::size_t>(dst[0]), static_cast<std::size_t>(dst[1]),
                           static_cast<std::size_t>(dst[2]))] = 1;
        }
      }
    }
  }
  return out;
}

}  // namespace

MaskVolume rotate_xy(const MaskVolume& mask, double degrees) { return rotate_plane(mask, 0, 1, degrees); }

MaskVolume rotate_yz(const MaskVolume& mask, double degrees) { return rotate_plane(mask, 1, 2, degrees); }

MaskVolume apply_augmentation(const MaskVolume& mask, const AugmentDraw& draw) {
  MaskVolume out = mask;
  for (int axis = 0; axis < 3; ++axis) {
    if (draw.mirror[static_cast<std::size_t>(axis)]) out = mirror(out, axis);
  }
  if (draw.theta_xy_deg != 0.0) out = rotate_xy(out, draw.theta_xy_deg);
  if (draw.theta_yz_deg != 0.0) out = rotate_yz(out, draw.theta_yz_deg);
  return out;
}

MaskVolume augment_mask(const MaskVolume& mask, Rng& rng) {
  return apply_augmentation(mask, draw_augmentation(rng));
}

std::vector<MaskVolume> generate_mask_set(const Volume& t1n, const MaskVolume& brain,
                                          const MaskVolume& tumor, const MaskGenParams& params,
                                          Rng& rng, int count) {
  params.validate();
  require(t1n.dims == brain.dims && t1n.dims == tumor.dims, ErrorCode::kDimMismatch,
          "generate_mask_set: t1n, brain and tumor dims differ");
  const MaskVolume forbidden = dilate(tumor, params.margin);
  std::vector<MaskVolume> masks;
  masks.reserve(static_cast<std::size_t>(count));
  for (int variant = 0; variant < count; ++variant) {
    bool placed = false;
    for (int attempt = 0; attempt < params.max_attempts && !placed; ++attempt) {
      const MaskVolume base = sample_healthy_mask(brain, tumor, params, rng);
      MaskVolume candidate =
          mask_intersection(augment_mask(base, rng), brain, MaskRole::kHealthy);
      if (candidate.empty() || masks_overlap(candidate, forbidden)) continue;
      masks.push_back(std::move(candidate));
      placed = true;
    }
    if (!placed) {
      fail(ErrorCode::kPlacementFailure, "generate_mask_set: mask " + std::to_string(variant) +
                                             " could not be placed after augmentation");
    }
  }
  return masks;
}

Volume void_image(const Volume& t1n, const MaskVolume& combined, float fill) {
  require(t1n.dims == combined.dims, ErrorCode::kDimMismatch,
          "void_image: image " + to_string(t1n.dims) + " vs mask " + to_string(combined.dims));
  Volume out = t1n;
  for (std::size_t i = 0; i < out.voxels.size(); ++i) {
    if (combined.bits[i]) out.voxels[i] = fill;
  }
  return out;
}

MaskVolume brain_mask_from(const Volume& t1n, const MaskVolume& tumor) {
  require(t1n.dims == tumor.dims, ErrorCode::kDimMismatch, "brain_mask_from: dims differ");
  MaskVolume brain(t1n.dims, MaskRole::kBrain);
  for (std::size_t i = 0; i < brain.bits.size(); ++i) {
    brain.bits[i] = (t1n.voxels[i] > 0.0f) || tumor.bits[i];
  }
  return brain;
}

TrainingSample make_sample(std::string case_id, int variant, const Volume& t1n,
                           const MaskVolume& healthy, const MaskVolume& unhealthy) {
  require(t1n.dims == healthy.dims && t1n.dims == unhealthy.dims, ErrorCode::kDimMismatch,
          "make_sample: component dims differ");
  require(!masks_overlap(healthy, unhealthy), ErrorCode::kInvalidArgument,
          "make_sample: healthy and unhealthy masks overlap");
  TrainingSample sample;
  sample.case_id = std::move(case_id);
  sample.variant = variant;
  sample.t1n = t1n;
  sample.healthy = healthy;
  sample.healthy.role = MaskRole::kHealthy;
  sample.unhealthy = unhealthy;
  sample.unhealthy.role = MaskRole::kUnhealthy;
  sample.combined = mask_union(healthy, unhealthy, MaskRole::kCombined);
  sample.t1n_voided = void_image(t1n, sample.combined);
  return sample;
}

}  // namespace voxelpaint
