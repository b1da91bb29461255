#pragma once

#include <stdexcept>
#include <string>

namespace rdmd {

// Variance-exploding schedule with sigma(t) = t on [sigma_min, T].
struct NoiseSchedule {
  double sigma_min = 0.01;
  double sigma_max = 80.0;

  double sigma(double t) const { return t; }
  // g(t)^2 = d sigma^2 / dt
  double g2(double t) const { return 2.0 * t; }

  bool contains(double sigma) const {
    constexpr double kSlack = 1e-12;
    return sigma >= sigma_min * (1.0 - kSlack) && sigma <= sigma_max * (1.0 + kSlack);
  }
  void require(double sigma, const char* who) const {
    if (!contains(sigma)) {
      throw std::out_of_range(std::string(who) + ": sigma " + std::to_string(sigma) + " outside schedule [" +
                              std::to_string(sigma_min) + ", " + std::to_string(sigma_max) + "]");
    }
  }
  void validate() const {
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min)) throw std::invalid_argument("NoiseSchedule: need 0 < sigma_min < T");
  }

  friend bool operator==(const NoiseSchedule&, const NoiseSchedule&) = default;
};

}  // namespace rdmd
