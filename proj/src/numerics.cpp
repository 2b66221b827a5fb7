#include "vlab/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "vlab/errors.hpp"

namespace vlab {

double lanczos_gamma(double x) {
  static constexpr std::array<double, 9> kCoeff = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double kG = 7.0;
  if (!std::isfinite(x)) throw DomainError("kernels", "gamma of a non-finite argument");
  if (x < 0.5) {
    if (x == std::floor(x)) throw DomainError("kernels", "gamma pole at a non-positive integer");
    return std::numbers::pi / (std::sin(std::numbers::pi * x) * lanczos_gamma(1.0 - x));
  }
  const double z = x - 1.0;
  double acc = kCoeff[0];
  for (std::size_t i = 1; i < kCoeff.size(); ++i) acc += kCoeff[i] / (z + static_cast<double>(i));
  const double t = z + kG + 0.5;
  return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, z + 0.5) * std::exp(-t) * acc;
}

namespace {

GaussLegendreRule build_rule(std::size_t n) {
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

}  // namespace

const GaussLegendreRule& gauss_legendre(std::size_t order) {
  if (order < 2) throw DomainError("numerics", "Gauss-Legendre order must be >= 2");
  static std::mutex mutex;
  static std::map<std::size_t, GaussLegendreRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, build_rule(order)).first;
  return it->second;
}

double integrate_composite(const std::function<double(double)>& f, double a, double b,
                           std::size_t panels, std::size_t order) {
  const auto& rule = gauss_legendre(order);
  const double h = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + h * static_cast<double>(p);
    const double mid = lo + 0.5 * h;
    double acc = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      acc += rule.weights[k] * f(mid + 0.5 * h * rule.nodes[k]);
    }
    total += 0.5 * h * acc;
  }
  return total;
}

namespace {

constexpr double kGradedCut = 40.0;

// Integral over [0, inf) of g(y) dy with unit panels on [0, kGradedCut] and the
// substitution y = kGradedCut / v on the tail.
double integrate_exponential_map(const std::function<double(double)>& g, std::size_t order,
                                 std::span<const double> breaks = {}) {
  const auto& rule = gauss_legendre(order);
  std::vector<double> edges;
  for (int k = 0; k <= static_cast<int>(kGradedCut); ++k) edges.push_back(k);
  for (double b : breaks) {
    if (b > 0.0 && b < kGradedCut) edges.push_back(b);
  }
  std::sort(edges.begin(), edges.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    if (edges[k + 1] > edges[k]) total += integrate_composite(g, edges[k], edges[k + 1], 1, order);
  }
  double tail = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double v = 0.5 * (rule.nodes[k] + 1.0);
    const double y = kGradedCut / v;
    const double jac = kGradedCut / (v * v);
    const double val = g(y);
    if (val != 0.0 && std::isfinite(val)) tail += rule.weights[k] * 0.5 * val * jac;
  }
  return total + tail;
}

}  // namespace

double integrate_graded_to_right(const std::function<double(double)>& f, double a, double b,
                                 std::size_t order) {
  const double len = b - a;
  if (len <= 0.0) return 0.0;
  return integrate_exponential_map(
      [&](double y) {
        const double scale = len * std::exp(-y);
        if (scale == 0.0) return 0.0;
        return f(b - scale) * scale;
      },
      order);
}

double integrate_log_graded(const std::function<double(double)>& weighted, double len,
                            std::size_t order, std::span<const double> breaks) {
  if (len <= 0.0) return 0.0;
  const double log_len = std::log(len);
  std::vector<double> y_breaks;
  for (double b : breaks) y_breaks.push_back(log_len - b);
  return integrate_exponential_map([&](double y) { return weighted(log_len - y); }, order,
                                   y_breaks);
}

double integrate_graded_to_left(const std::function<double(double)>& f, double a, double b,
                                std::size_t order) {
  const double len = b - a;
  if (len <= 0.0) return 0.0;
  return integrate_exponential_map(
      [&](double y) {
        const double scale = len * std::exp(-y);
        if (scale == 0.0) return 0.0;
        return f(a + scale) * scale;
      },
      order);
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InsufficientDataError("numerics", "line fit needs at least two (x, y) pairs");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw InsufficientDataError("numerics", "line fit with constant abscissa");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += r * r;
    fit.max_abs_residual = std::max(fit.max_abs_residual, std::abs(r));
  }
  fit.rms_residual = std::sqrt(ss_res / n);
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace vlab
