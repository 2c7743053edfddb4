#pragma once

#include "voxelpaint/random.hpp"
#include "voxelpaint/tensor.hpp"

namespace voxelpaint {

// Elementwise and reductions. Binary ops require identical shapes; the
// network never needs broadcasting.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T offset);
template <typename T> Tensor<T> square(const Tensor<T>& a);
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

/// 3D cross-correlation over [N, Cin, D, H, W] with a cubic kernel
/// [Cout, Cin, k, k, k], stride 1, zero padding. Output spatial extent is
/// D + 2*padding - k + 1 per axis.
template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t padding);

/// Per-(sample, channel) standardization over spatial voxels with biased
/// variance, followed by a per-channel affine map.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                        T eps);

/// Parametric ReLU with a single learnable slope (shape [1]).
template <typename T> Tensor<T> prelu(const Tensor<T>& input, const Tensor<T>& alpha);

/// max(x, 0); the derivative at 0 is taken as 0.
template <typename T> Tensor<T> relu(const Tensor<T>& input);

/// Inverted dropout. Keep decisions come from uniform01(rng) >= rate, one
/// draw per element in buffer order, so the mask is precision independent.
template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, bool training, Rng& rng);

/// Non-overlapping 2x2x2 max; gradient goes to the first maximum in scan order.
template <typename T> Tensor<T> maxpool3d(const Tensor<T>& input);

/// Nearest-neighbour x2 upsampling along D, H and W.
template <typename T> Tensor<T> upsample3d_nearest(const Tensor<T>& input);

/// Channel-axis concatenation of [N, Ca, ...] and [N, Cb, ...], a first.
template <typename T> Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace voxelpaint
