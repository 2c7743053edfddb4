#include "voxelpaint/adam.hpp"

#include <cmath>

#include "voxelpaint/error.hpp"

namespace voxelpaint {

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  require(options_.lr >= 0.0, ErrorCode::kInvalidArgument, "adam: lr must be non-negative");
  require(options_.beta1 > 0.0 && options_.beta1 < 1.0 && options_.beta2 > 0.0 &&
              options_.beta2 < 1.0,
          ErrorCode::kInvalidArgument, "adam: betas must lie in (0, 1)");
  require(options_.epsilon > 0.0, ErrorCode::kInvalidArgument, "adam: epsilon must be positive");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::step() {
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double correction1 = 1.0 - std::pow(options_.beta1, t);
  const double correction2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto values = params_[i].mutable_values();
    const auto grad = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = static_cast<double>(grad[j]);
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g;
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      const double update = options_.lr * m_hat / (std::sqrt(v_hat) + options_.epsilon);
      values[j] = static_cast<T>(static_cast<double>(values[j]) - update);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace voxelpaint
