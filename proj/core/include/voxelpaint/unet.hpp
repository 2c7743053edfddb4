#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "voxelpaint/random.hpp"
#include "voxelpaint/tensor.hpp"

namespace voxelpaint {

struct UNetConfig {
  int base_channels = 32;
  int in_channels = 2;   // voided image + combined mask
  int out_channels = 1;
  double dropout_rate = 0.2;
  int kernel_size = 3;

  /// Throws kInvalidArgument unless the config describes the supported topology.
  void validate() const;

  /// Output channels of enc1..enc3, bridge, dec3..dec1.
  std::array<int, 7> channel_ladder() const;

  bool operator==(const UNetConfig&) const = default;
};

/// Closed-form parameter count for a config.
std::size_t unet_parameter_count(const UNetConfig& config);

namespace detail {
// Parameter indices of one conv layer and its norm/activation.
struct UNetLayer {
  std::size_t weight = 0, bias = 0, gamma = 0, beta = 0, alpha = 0;
  bool has_alpha = false;
};
}  // namespace detail

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

/// Three encoder blocks, a bridge, three decoder blocks and a 1x1x1 head.
///
/// Encoder block: (conv3 -> instance norm -> PReLU) x2, then 2x max pooling.
/// Bridge:        (conv3 -> instance norm -> ReLU) x2, dropout.
/// Decoder block: nearest x2 upsampling, concat with the encoder skip,
///                (conv3 -> instance norm -> PReLU) x2, dropout.
/// Head:          linear 1x1x1 convolution to a single channel.
template <typename T>
class UNetModel {
 public:
  UNetModel() = default;

  /// Allocates every parameter with its initial value: fan-in scaled normal
  /// conv weights, zero biases, unit gammas, zero betas, PReLU slope 0.25.
  static UNetModel build(const UNetConfig& config, Rng& rng);

  /// voided and mask are [N, 1, D, H, W]; D, H and W must be divisible by 8.
  /// Dropout consumes rng only when training is true.
  Tensor<T> forward(const Tensor<T>& voided, const Tensor<T>& mask, bool training, Rng& rng) const;

  const UNetConfig& config() const { return config_; }
  const std::vector<NamedParameter<T>>& named_parameters() const { return params_; }
  std::vector<Tensor<T>> parameters() const;
  std::size_t parameter_count() const;

  Tensor<T>& parameter(std::string_view name);
  const Tensor<T>& parameter(std::string_view name) const;

  void zero_grad();

  /// Deep copy into another precision, every parameter a fresh leaf.
  template <typename U>
  UNetModel<U> cast() const {
    UNetModel<U> out;
    out.config_ = config_;
    out.layers_ = layers_;
    for (const auto& p : params_) out.params_.push_back({p.name, tensor_cast<U>(p.tensor, true)});
    return out;
  }

  using ConvLayer = detail::UNetLayer;

 private:
  template <typename U>
  friend class UNetModel;

  std::size_t add_param(std::string name, Shape shape);
  ConvLayer add_conv_layer(const std::string& prefix, int in_ch, int out_ch, bool prelu,
                           bool normalized, Rng& rng);
  Tensor<T> apply_layer(const Tensor<T>& x, const ConvLayer& layer, std::size_t padding) const;

  UNetConfig config_;
  std::vector<NamedParameter<T>> params_;
  // enc1 (2 layers), enc2, enc3, bridge, dec3, dec2, dec1, head
  std::vector<ConvLayer> layers_;
};

extern template class UNetModel<float>;
extern template class UNetModel<double>;

}  // namespace voxelpaint
