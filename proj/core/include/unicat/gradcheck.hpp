#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace unicat {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::size_t num_params = 0;
};

// Default denominator floor of the relative error.
inline constexpr double kRelErrorFloor = 1e-8;

// Central differences per coordinate, compared with `analytic_grad` using
// |g_fd - g_an| / max(floor, |g_fd| + |g_an|). Central differences in
// double carry roughly 1e-10·|f| of rounding noise at h = 1e-6, so
// structurally zero gradients need a floor well above that to be judged
// meaningfully. Throws NumericError if `f` returns a non-finite value.
GradCheckReport finite_diff_check(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> params,
                                  std::span<const double> analytic_grad, double h = 1e-6,
                                  double floor = kRelErrorFloor);

double relative_error(double numeric, double analytic, double floor = kRelErrorFloor) noexcept;

}  // namespace unicat
