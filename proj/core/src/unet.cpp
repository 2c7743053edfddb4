#include "voxelpaint/unet.hpp"

#include <algorithm>
#include <cmath>

#include "voxelpaint/error.hpp"
#include "voxelpaint/ops.hpp"

namespace voxelpaint {

namespace {

constexpr double kInstanceNormEps = 1e-5;
constexpr double kPreluInit = 0.25;
constexpr std::size_t kDivisor = 8;  // three pooling levels

const char* const kBlockNames[] = {"enc1", "enc2", "enc3", "bridge", "dec3", "dec2", "dec1"};

}  // namespace

void UNetConfig::validate() const {
  require(base_channels >= 1, ErrorCode::kInvalidArgument, "unet: base_channels must be >= 1");
  require(in_channels == 2, ErrorCode::kInvalidArgument,
          "unet: in_channels is fixed at 2 (voided image, mask)");
  require(out_channels == 1, ErrorCode::kInvalidArgument, "unet: out_channels is fixed at 1");
  require(kernel_size == 3, ErrorCode::kInvalidArgument, "unet: kernel_size is fixed at 3");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorCode::kInvalidArgument,
          "unet: dropout_rate must be in [0, 1)");
}

std::array<int, 7> UNetConfig::channel_ladder() const {
  const int b = base_channels;
  return {b, 2 * b, 4 * b, 8 * b, 4 * b, 2 * b, b};
}

std::size_t unet_parameter_count(const UNetConfig& config) {
  config.validate();
  const auto ladder = config.channel_ladder();
  const std::size_t taps = static_cast<std::size_t>(config.kernel_size) * config.kernel_size *
                           config.kernel_size;
  auto layer = [taps](std::size_t in, std::size_t out, bool prelu) {
    return out * in * taps + out + 2 * out + (prelu ? 1 : 0);
  };
  std::size_t total = 0;
  std::size_t in = static_cast<std::size_t>(config.in_channels);
  for (int block = 0; block < 4; ++block) {
    const auto out = static_cast<std::size_t>(ladder[block]);
    const bool prelu = block != 3;
    total += layer(in, out, prelu) + layer(out, out, prelu);
    in = out;
  }
  for (int block = 4; block < 7; ++block) {
    const auto out = static_cast<std::size_t>(ladder[block]);
    const auto skip = static_cast<std::size_t>(ladder[6 - block]);
    total += layer(in + skip, out, true) + layer(out, out, true);
    in = out;
  }
  total += in * static_cast<std::size_t>(config.out_channels) + config.out_channels;
  return total;
}

template <typename T>
std::size_t UNetModel<T>::add_param(std::string name, Shape shape) {
  params_.push_back({std::move(name), Tensor<T>::zeros(std::move(shape), true)});
  return params_.size() - 1;
}

template <typename T>
typename UNetModel<T>::ConvLayer UNetModel<T>::add_conv_layer(const std::string& prefix, int in_ch,
                                                               int out_ch, bool prelu,
                                                               bool normalized, Rng& rng) {
  const auto ci = static_cast<std::size_t>(in_ch);
  const auto co = static_cast<std::size_t>(out_ch);
  const std::size_t k = normalized ? static_cast<std::size_t>(config_.kernel_size) : 1;
  ConvLayer layer;
  layer.weight = add_param(prefix + ".weight", {co, ci, k, k, k});
  layer.bias = add_param(prefix + ".bias", {co});

  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(ci * k * k * k)));
  for (auto& w : params_[layer.weight].tensor.mutable_values()) w = static_cast<T>(normal(rng));

  if (normalized) {
    const std::string norm = prefix.substr(0, prefix.rfind('.') + 1) + "norm" + prefix.back();
    layer.gamma = add_param(norm + ".gamma", {co});
    layer.beta = add_param(norm + ".beta", {co});
    for (auto& g : params_[layer.gamma].tensor.mutable_values()) g = T{1};
  }
  if (prelu) {
    const std::string act = prefix.substr(0, prefix.rfind('.') + 1) + "act" + prefix.back();
    layer.alpha = add_param(act + ".alpha", {1});
    layer.has_alpha = true;
    params_[layer.alpha].tensor.mutable_values()[0] = static_cast<T>(kPreluInit);
  }
  return layer;
}

template <typename T>
UNetModel<T> UNetModel<T>::build(const UNetConfig& config, Rng& rng) {
  config.validate();
  UNetModel model;
  model.config_ = config;
  const auto ladder = config.channel_ladder();
  int in = config.in_channels;
  for (int block = 0; block < 7; ++block) {
    const int out = ladder[block];
    const int first_in = block < 4 ? in : in + ladder[6 - block];
    const bool prelu = block != 3;
    const std::string name = kBlockNames[block];
    model.layers_.push_back(model.add_conv_layer(name + ".conv1", first_in, out, prelu, true, rng));
    model.layers_.push_back(model.add_conv_layer(name + ".conv2", out, out, prelu, true, rng));
    in = out;
  }
  model.layers_.push_back(
      model.add_conv_layer("head.conv", in, config.out_channels, false, false, rng));
  return model;
}

template <typename T>
Tensor<T> UNetModel<T>::apply_layer(const Tensor<T>& x, const ConvLayer& layer,
                                    std::size_t padding) const {
  Tensor<T> y = conv3d(x, params_[layer.weight].tensor, params_[layer.bias].tensor, padding);
  if (padding == 0) return y;  // head: linear
  y = instance_norm(y, params_[layer.gamma].tensor, params_[layer.beta].tensor,
                    static_cast<T>(kInstanceNormEps));
  return layer.has_alpha ? prelu(y, params_[layer.alpha].tensor) : relu(y);
}

template <typename T>
Tensor<T> UNetModel<T>::forward(const Tensor<T>& voided, const Tensor<T>& mask, bool training,
                                Rng& rng) const {
  require(voided.rank() == 5 && voided.dim(1) == 1, ErrorCode::kShapeMismatch,
          "unet: voided image must be [N,1,D,H,W], got " + shape_string(voided.shape()));
  require(mask.shape() == voided.shape(), ErrorCode::kShapeMismatch,
          "unet: mask " + shape_string(mask.shape()) + " does not match voided image " +
              shape_string(voided.shape()));
  for (std::size_t axis = 2; axis < 5; ++axis) {
    require(voided.dim(axis) % kDivisor == 0 && voided.dim(axis) > 0, ErrorCode::kShapeMismatch,
            "unet: spatial dims must be divisible by 8, got " + shape_string(voided.shape()));
  }
  require(std::all_of(mask.values().begin(), mask.values().end(),
                      [](T v) { return v == T{0} || v == T{1}; }),
          ErrorCode::kInvalidArgument, "unet: mask values must be 0 or 1");

  const std::size_t pad = static_cast<std::size_t>(config_.kernel_size) / 2;
  const double rate = config_.dropout_rate;
  auto block = [&](const Tensor<T>& x, std::size_t index) {
    return apply_layer(apply_layer(x, layers_[2 * index], pad), layers_[2 * index + 1], pad);
  };

  const Tensor<T> input = concat_channels(voided, mask);
  const Tensor<T> skip1 = block(input, 0);
  const Tensor<T> skip2 = block(maxpool3d(skip1), 1);
  const Tensor<T> skip3 = block(maxpool3d(skip2), 2);
  Tensor<T> x = dropout(block(maxpool3d(skip3), 3), rate, training, rng);
  x = dropout(block(concat_channels(upsample3d_nearest(x), skip3), 4), rate, training, rng);
  x = dropout(block(concat_channels(upsample3d_nearest(x), skip2), 5), rate, training, rng);
  x = dropout(block(concat_channels(upsample3d_nearest(x), skip1), 6), rate, training, rng);
  return apply_layer(x, layers_.back(), 0);
}

template <typename T>
std::vector<Tensor<T>> UNetModel<T>::parameters() const {
  std::vector<Tensor<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

template <typename T>
std::size_t UNetModel<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.tensor.numel();
  return total;
}

template <typename T>
Tensor<T>& UNetModel<T>::parameter(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  fail(ErrorCode::kNameMismatch, "unet: no parameter named '" + std::string(name) + "'");
}

template <typename T>
const Tensor<T>& UNetModel<T>::parameter(std::string_view name) const {
  return const_cast<UNetModel*>(this)->parameter(name);
}

template <typename T>
void UNetModel<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template class UNetModel<float>;
template class UNetModel<double>;

}  // namespace voxelpaint
