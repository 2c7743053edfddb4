#pragma once

#include <array>
#include <string>
#include <vector>

#include "voxelpaint/random.hpp"
#include "voxelpaint/volume.hpp"

namespace voxelpaint {

struct MaskGenParams {
  int margin = 4;                // voxels of dilation around the tumor
  double volume_fraction = 1.0;  // healthy mask size relative to the tumor, in (0, 1]
  int max_attempts = 100;

  void validate() const;
};

/// Union of Euclidean balls of the given radius around every set voxel.
MaskVolume dilate(const MaskVolume& mask, int radius);

/// One 6-neighbour erosion step; voxels on the grid border are removed.
MaskVolume erode(const MaskVolume& mask);

/// Translates the tumor shape to a random location inside the brain that
/// avoids the tumor dilated by params.margin. After max_attempts failed
/// draws the shape is eroded one step and the search restarts; when the
/// shape erodes away the call fails with kPlacementFailure.
MaskVolume sample_healthy_mask(const MaskVolume& brain, const MaskVolume& tumor,
                               const MaskGenParams& params, Rng& rng);

/// One draw of the mirror / rotate augmentation.
struct AugmentDraw {
  std::array<bool, 3> mirror{};  // x, y, z
  double theta_xy_deg = 0.0;
  double theta_yz_deg = 0.0;
};

/// Three Bernoulli(0.5) mirror flags, then two angles uniform in [0, 360).
AugmentDraw draw_augmentation(Rng& rng);

MaskVolume mirror(const MaskVolume& mask, int axis);

/// Rotation about the geometric grid center with nearest-neighbour
/// resampling; voxels mapped from outside the grid are cleared. Positive
/// angles turn +x toward +y (XY) and +y toward +z (YZ).
MaskVolume rotate_xy(const MaskVolume& mask, double degrees);
MaskVolume rotate_yz(const MaskVolume& mask, double degrees);

/// Mirrors, then the XY rotation, then the YZ rotation.
MaskVolume apply_augmentation(const MaskVolume& mask, const AugmentDraw& draw);
MaskVolume augment_mask(const MaskVolume& mask, Rng& rng);

/// `count` healthy masks, each an augmented placement clipped to the brain
/// and disjoint from the dilated tumor. Augmentations that come out empty or
/// touch the dilated tumor are redrawn, up to params.max_attempts per mask.
std::vector<MaskVolume> generate_mask_set(const Volume& t1n, const MaskVolume& brain,
                                          const MaskVolume& tumor, const MaskGenParams& params,
                                          Rng& rng, int count = 5);

/// Voxels under the mask set to fill (0 in the raw or unit domain).
Volume void_image(const Volume& t1n, const MaskVolume& combined, float fill = 0.0f);

/// Voxels with t1n > 0, plus the tumor so that tumor is a subset of the brain.
MaskVolume brain_mask_from(const Volume& t1n, const MaskVolume& tumor);

struct TrainingSample {
  std::string case_id;
  int variant = 0;
  Volume t1n;
  Volume t1n_voided;
  MaskVolume healthy;
  MaskVolume unhealthy;
  MaskVolume combined;
};

/// combined = healthy | unhealthy, voided = t1n with combined occluded.
/// Rejects overlapping healthy and unhealthy masks.
TrainingSample make_sample(std::string case_id, int variant, const Volume& t1n,
                           const MaskVolume& healthy, const MaskVolume& unhealthy);

}  // namespace voxelpaint
