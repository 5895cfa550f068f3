#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace wavemo {

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam moments for one parameter block.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, double learning_rate, AdamSettings settings = {})
      : lr_(learning_rate), s_(settings), m_(size, 0.0), v_(size, 0.0) {}

  /// params -= lr * m_hat / (sqrt(v_hat) + eps)
  void step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
      throw std::invalid_argument("Adam::step: size mismatch");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < m_.size(); ++i) {
      m_[i] = s_.beta1 * m_[i] + (1.0 - s_.beta1) * grad[i];
      v_[i] = s_.beta2 * v_[i] + (1.0 - s_.beta2) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + s_.eps);
    }
  }

  void set_learning_rate(double lr) { lr_ = lr; }
  [[nodiscard]] double learning_rate() const { return lr_; }
  [[nodiscard]] long steps() const { return t_; }

 private:
  double lr_ = 1e-3;
  AdamSettings s_{};
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

}  // namespace wavemo
