#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "voxelpaint/tensor.hpp"
#include "voxelpaint/volume.hpp"

namespace voxelpaint {

struct SsimParams {
  int window = 7;            // odd, cubic
  double sigma = 1.5;        // Gaussian window
  double dynamic_range = 1;  // L: 2 for signed-unit training data, 1 for evaluation

  double c1() const { return (0.01 * dynamic_range) * (0.01 * dynamic_range); }
  double c2() const { return (0.03 * dynamic_range) * (0.03 * dynamic_range); }

  /// Normalized 1D Gaussian taps; the 3D window is their outer product.
  std::vector<double> taps() const;
  void validate() const;
};

struct LossWeights {
  double lambda1 = 1.0;  // masked MAE
  double lambda2 = 1.0;  // 1 - SSIM

  void validate() const;
};

/// Mean |pred - gt| over elements whose region byte is 1. region has one byte
/// per tensor element. Differentiable in pred (and gt); sign(0) is taken as 0.
template <typename T>
Tensor<T> masked_mae(const Tensor<T>& pred, const Tensor<T>& gt, std::span<const std::uint8_t> region);

/// Mean local SSIM over every valid (unpadded) Gaussian window position of
/// every [N, C] plane. Local statistics use E[xy] - E[x]E[y] forms, so
/// identical inputs give exactly 1.
template <typename T>
Tensor<T> ssim3d(const Tensor<T>& pred, const Tensor<T>& gt, const SsimParams& params);

/// lambda1 * masked_mae(region) + lambda2 * (1 - ssim3d) over the whole
/// volume. A zero weight skips its term.
template <typename T>
Tensor<T> composite_loss(const Tensor<T>& pred, const Tensor<T>& gt,
                         std::span<const std::uint8_t> region, const LossWeights& weights,
                         const SsimParams& params);

/// Volume as a [1, 1, z, y, x] tensor (x fastest, matching the volume buffer).
template <typename T>
Tensor<T> volume_tensor(const Volume& volume, bool requires_grad = false);
template <typename T>
Tensor<T> mask_tensor(const MaskVolume& mask);

}  // namespace voxelpaint
