#pragma once

#include <cstdint>
#include <vector>

#include "voxelpaint/tensor.hpp"

namespace voxelpaint {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments are kept in double regardless of the
/// parameter precision.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamOptions options);

  /// One update from the gradients currently stored on the parameters.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_count_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<std::vector<double>>& first_moment() const { return m_; }
  const std::vector<std::vector<double>>& second_moment() const { return v_; }

 private:
  std::vector<Tensor<T>> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_count_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace voxelpaint
