#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace vlab {

/// Gamma function via the Lanczos approximation (g = 7, 9 coefficients) with
/// reflection below 1/2. Relative accuracy is about 1e-13 on (0, 10).
double lanczos_gamma(double x);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussLegendreRule& gauss_legendre(std::size_t order);

/// Integral of f over [a, b] with `panels` equal panels of `order`-point Gauss-Legendre.
double integrate_composite(const std::function<double(double)>& f, double a, double b,
                           std::size_t panels, std::size_t order);

/// Integral over [a, b] of an integrand that may blow up (integrably) at `b`.
///
/// Uses r = b - (b - a) e^{-y}: unit-width panels in y are a geometric grading of
/// [a, b] towards b. The y-range [0, 40] is covered by panels and the remaining
/// [40, inf) by y = 40 / v, v in (0, 1], which also captures logarithmic
/// singularities such as 1/(h log^2 h).
double integrate_graded_to_right(const std::function<double(double)>& f, double a, double b,
                                 std::size_t order);

/// Integral over d in (0, len] of f(d) given the weighted integrand
/// g(log d) = d * f(d). Working in log d keeps integrands with a logarithmic
/// singularity at d = 0 accurate below the double-precision resolution of d.
/// `breaks` lists extra panel boundaries in log d (e.g. kinks of the integrand).
double integrate_log_graded(const std::function<double(double)>& weighted, double len,
                            std::size_t order, std::span<const double> breaks = {});

/// Same with the singular endpoint on the left.
double integrate_graded_to_left(const std::function<double(double)>& f, double a, double b,
                                std::size_t order);

/// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
  double max_abs_residual = 0.0;
  double rms_residual = 0.0;
};
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Pairwise (recursive halving) summation in index order.
double pairwise_sum(std::span<const double> values);

}  // namespace vlab
