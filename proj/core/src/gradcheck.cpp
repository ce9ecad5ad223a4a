#include "unicat/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/core.h>

#include "unicat/errors.hpp"

namespace unicat {

double relative_error(double numeric, double analytic, double floor) noexcept {
  return std::abs(numeric - analytic) /
         std::max(floor, std::abs(numeric) + std::abs(analytic));
}

GradCheckReport finite_diff_check(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> params,
                                  std::span<const double> analytic_grad, double h,
                                  double floor) {
  if (params.size() != analytic_grad.size()) {
    throw ShapeError(fmt::format("finite_diff_check: {} params but {} gradient entries",
                                 params.size(), analytic_grad.size()));
  }
  std::vector<double> x(params.begin(), params.end());
  GradCheckReport report;
  report.num_params = x.size();
  auto eval = [&](std::size_t coord) {
    const double v = f(x);
    if (!std::isfinite(v)) {
      throw NumericError(fmt::format("finite_diff_check: f non-finite at coordinate {}", coord));
    }
    return v;
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = eval(i);
    x[i] = saved - h;
    const double down = eval(i);
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err = relative_error(numeric, analytic_grad[i], floor);
    report.max_abs_error = std::max(report.max_abs_error, std::abs(numeric - analytic_grad[i]));
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_coordinate = i;
    }
  }
  return report;
}

}  // namespace unicat
