#include "vlab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vlab/errors.hpp"
#include "vlab/numerics.hpp"

namespace vlab {

namespace {

constexpr double kQuadRelTol = 1e-8;
// The moment conditions are statements about small gaps; exponents are fitted on
// the smallest ones.
constexpr std::size_t kFitGaps = 8;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError("kernels", std::string(what) + " must be finite");
}

}  // namespace

KernelSpec KernelSpec::riemann_liouville(double hurst, KernelRole role) {
  if (!(hurst > 0.0) || !std::isfinite(hurst)) {
    throw DomainError("kernels", "Riemann-Liouville kernel requires H > 0");
  }
  KernelSpec k;
  k.family_ = KernelFamily::RiemannLiouville;
  k.role_ = role;
  k.hurst_ = hurst;
  return k;
}

KernelSpec KernelSpec::fbm(double hurst, KernelRole role) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("kernels", "fBm kernel requires H in (0,1)");
  KernelSpec k;
  k.family_ = KernelFamily::FbmMolchanGolosov;
  k.role_ = role;
  k.hurst_ = hurst;
  return k;
}

KernelSpec KernelSpec::log_fractional(KernelRole role) {
  KernelSpec k;
  k.family_ = KernelFamily::LogFractional;
  k.role_ = role;
  k.hurst_ = 0.5;
  return k;
}

KernelSpec KernelSpec::q_log(double q, KernelRole role) {
  if (!(q > 0.5) || !std::isfinite(q)) throw DomainError("kernels", "q-log kernel requires q > 1/2");
  KernelSpec k;
  k.family_ = KernelFamily::QLog;
  k.role_ = role;
  k.q_ = q;
  return k;
}

KernelSpec KernelSpec::constant(double c, KernelRole role) {
  require_finite(c, "constant kernel value");
  KernelSpec k;
  k.family_ = KernelFamily::Constant;
  k.role_ = role;
  k.constant_ = c;
  return k;
}

KernelSpec KernelSpec::tabulated(KernelTable table, KernelRole role) {
  const std::size_t n = table.grid.n_nodes();
  if (table.lower.size() != n * (n + 1) / 2) {
    throw DomainError("kernels", "tabulated kernel needs (n+1)(n+2)/2 lower-triangle values");
  }
  for (double v : table.lower) require_finite(v, "tabulated kernel value");
  KernelSpec k;
  k.family_ = KernelFamily::Tabulated;
  k.role_ = role;
  k.table_ = std::make_shared<const KernelTable>(std::move(table));
  return k;
}

std::string KernelSpec::name() const {
  switch (family_) {
    case KernelFamily::RiemannLiouville: return "rl";
    case KernelFamily::FbmMolchanGolosov: return "fbm";
    case KernelFamily::LogFractional: return "log";
    case KernelFamily::QLog: return "qlog";
    case KernelFamily::Constant: return "constant";
    case KernelFamily::Tabulated: return "tabulated";
  }
  return "unknown";
}

namespace {

double eval_tabulated(const KernelTable& tab, double t, double s) {
  const double dt = tab.grid.dt();
  const std::size_t last = tab.grid.n_steps();
  auto node = [&](std::size_t i, std::size_t j) { return j <= i ? tab.at(i, j) : 0.0; };
  const double x = std::clamp(t / dt, 0.0, static_cast<double>(last));
  const double y = std::clamp(s / dt, 0.0, static_cast<double>(last));
  const std::size_t i0 = std::min(static_cast<std::size_t>(x), last - 1);
  const std::size_t j0 = std::min(static_cast<std::size_t>(y), last - 1);
  const double fx = x - static_cast<double>(i0);
  const double fy = y - static_cast<double>(j0);
  return (1 - fx) * (1 - fy) * node(i0, j0) + fx * (1 - fy) * node(i0 + 1, j0) +
         (1 - fx) * fy * node(i0, j0 + 1) + fx * fy * node(i0 + 1, j0 + 1);
}

}  // namespace

double eval_kernel(const KernelSpec& spec, double t, double s) {
  require_finite(t, "kernel time t");
  require_finite(s, "kernel time s");
  if (spec.family() == KernelFamily::FbmMolchanGolosov) {
    throw DomainError("kernels",
                      "the fBm kernel is not evaluated pointwise; use the covariance simulator");
  }
  if (s >= t) return 0.0;
  const double h = t - s;
  switch (spec.family()) {
    case KernelFamily::RiemannLiouville:
      return std::pow(h, spec.hurst() - 0.5) / lanczos_gamma(spec.hurst() + 0.5);
    case KernelFamily::LogFractional:
      return std::log1p(1.0 / h);
    case KernelFamily::QLog: {
      if (h >= 1.0) throw DomainError("kernels", "q-log kernel requires t - s < 1");
      const double lg = std::log(1.0 / h);
      return 1.0 / std::sqrt(std::abs(h * std::pow(lg, 2.0 * spec.q())));
    }
    case KernelFamily::Constant:
      return spec.constant_value();
    case KernelFamily::Tabulated:
      return eval_tabulated(*spec.table(), t, s);
    case KernelFamily::FbmMolchanGolosov:
      break;
  }
  return 0.0;
}

namespace {

double ipow(double x, int p) { return p == 1 ? x : x * x; }

// K as a function of the lag h = t - s for the convolution families.
double lag_kernel(const KernelSpec& spec, double h) {
  return h > 0.0 ? eval_kernel(spec, h, 0.0) : std::numeric_limits<double>::infinity();
}

// d * |K(d)|^p at d = exp(log_d), written in log form so that the integrand stays
// accurate where d itself is below double resolution.
double lag_power_times_d(const KernelSpec& spec, int p, double log_d) {
  switch (spec.family()) {
    case KernelFamily::RiemannLiouville:
      return std::exp((p * (spec.hurst() - 0.5) + 1.0) * log_d) /
             ipow(lanczos_gamma(spec.hurst() + 0.5), p);
    case KernelFamily::LogFractional: {
      const double k = log_d < -30.0 ? -log_d + std::log1p(std::exp(log_d))
                                     : std::log1p(std::exp(-log_d));
      return ipow(k, p) * std::exp(log_d);
    }
    case KernelFamily::QLog:
      if (log_d >= 0.0) throw DomainError("kernels", "q-log kernel requires t - s < 1");
      return std::exp((1.0 - 0.5 * p) * log_d) * std::pow(-log_d, -p * spec.q());
    case KernelFamily::Constant:
      return ipow(std::abs(spec.constant_value()), p) * std::exp(log_d);
    default:
      throw DomainError("kernels", "lag form requires a convolution kernel");
  }
}

// Integral of f over [a, b] split at the nodes of a tabulated kernel's grid, where the
// bilinear interpolant is linear in r.
double integrate_piecewise(const std::function<double(double)>& f, double a, double b,
                           const TimeGrid& grid, std::size_t order) {
  const double dt = grid.dt();
  double total = 0.0;
  double lo = a;
  while (lo < b) {
    double hi = (std::floor(lo / dt + 1e-12) + 1.0) * dt;
    if (hi > b || b - hi < 1e-14 * dt) hi = b;
    total += integrate_composite(f, lo, hi, 1, order);
    lo = hi;
  }
  return total;
}

template <class Rule>
double checked(Rule&& rule, std::size_t quad_n, const char* what) {
  const double fine = rule(quad_n);
  const double coarse = rule(std::max<std::size_t>(8, quad_n / 2));
  if (!std::isfinite(fine) ||
      std::abs(fine - coarse) > kQuadRelTol * std::max(std::abs(fine), 1e-300) + 1e-300) {
    throw QuadratureError("kernels", std::string("quadrature for ") + what +
                                         " did not converge (refinements differ by " +
                                         std::to_string(std::abs(fine - coarse)) + ")");
  }
  return fine;
}

}  // namespace

double kernel_power_integral(const KernelSpec& spec, int p, double s, double t,
                             std::size_t quad_n) {
  if (p != 1 && p != 2) throw DomainError("kernels", "kernel moduli are defined for p in {1,2}");
  require_finite(s, "s");
  require_finite(t, "t");
  if (spec.family() == KernelFamily::FbmMolchanGolosov) {
    throw DomainError("kernels", "the fBm kernel is not evaluated pointwise");
  }
  if (t <= s) return 0.0;
  const double h = t - s;
  switch (spec.family()) {
    case KernelFamily::Constant:
      return ipow(std::abs(spec.constant_value()), p) * h;
    case KernelFamily::RiemannLiouville: {
      // r = t - u^m flattens (t-r)^{p(H-1/2)} dr into a constant integrand.
      const double m = 1.0 / (p * (spec.hurst() - 0.5) + 1.0);
      const double upper = std::pow(h, 1.0 / m);
      auto f = [&](double u) {
        const double um = std::pow(u, m);
        return ipow(std::abs(eval_kernel(spec, t, t - um)), p) * m * std::pow(u, m - 1.0);
      };
      return checked([&](std::size_t n) { return integrate_composite(f, 0.0, upper, 1, n); },
                     quad_n, "RL kernel power");
    }
    case KernelFamily::Tabulated: {
      auto f = [&](double r) { return ipow(std::abs(eval_kernel(spec, t, r)), p); };
      return integrate_piecewise(f, s, t, spec.table()->grid, quad_n);
    }
    default: {
      auto g = [&](double log_d) { return lag_power_times_d(spec, p, log_d); };
      return checked([&](std::size_t n) { return integrate_log_graded(g, h, n); }, quad_n,
                     "kernel power");
    }
  }
}

double modulus_omega(const KernelSpec& spec, int p, double s, double t, std::size_t quad_n) {
  if (p != 1 && p != 2) throw DomainError("kernels", "omega_p is implemented for p in {1,2}");
  if (quad_n < 16) throw DomainError("kernels", "quad_n must be at least 16");
  if (!(s >= 0.0) || !(t >= s)) throw DomainError("kernels", "omega_p requires 0 <= s <= t");
  double head = 0.0;
  if (s > 0.0 && t > s && spec.family() == KernelFamily::Tabulated) {
    auto f = [&](double r) {
      return ipow(std::abs(eval_kernel(spec, t, r) - eval_kernel(spec, s, r)), p);
    };
    head = integrate_piecewise(f, 0.0, s, spec.table()->grid, quad_n);
  } else if (s > 0.0 && t > s && spec.family() != KernelFamily::Constant) {
    // Distance d = s - r to the singular end; |K(h+d) - K(d)|^p d = d K(d)^p |1 - K(h+d)/K(d)|^p.
    const double h = t - s;
    auto g = [&](double log_d) {
      const double d = std::exp(log_d);
      const double kd = lag_kernel(spec, d);
      const double kh = lag_kernel(spec, h + d);
      if (std::isinf(kd)) return lag_power_times_d(spec, p, log_d);
      if (kd == 0.0) return ipow(std::abs(kh), p) * d;
      return lag_power_times_d(spec, p, log_d) * ipow(std::abs(1.0 - kh / kd), p);
    };
    // For p = 1 a sign change of K(h+d) - K(d) (non-monotone kernels) is a kink;
    // put a panel boundary on it.
    std::vector<double> kinks;
    if (p == 1) {
      const double log_s = std::log(s);
      auto diff = [&](double log_d) {
        const double d = std::exp(log_d);
        return lag_kernel(spec, h + d) - lag_kernel(spec, d);
      };
      constexpr int kScan = 160;
      double prev_x = log_s;
      double prev_v = diff(prev_x);
      for (int k = 1; k <= kScan; ++k) {
        const double x = log_s - 40.0 * k / kScan;
        const double v = diff(x);
        if (std::isfinite(v) && std::isfinite(prev_v) && (v < 0.0) != (prev_v < 0.0)) {
          double lo = x;
          double hi = prev_x;
          for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if ((diff(mid) < 0.0) == (v < 0.0)) lo = mid; else hi = mid;
          }
          kinks.push_back(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_v = v;
      }
    }
    head = checked([&](std::size_t n) { return integrate_log_graded(g, s, n, kinks); }, quad_n,
                   "omega head");
  }
  const double tail = kernel_power_integral(spec, p, s, t, quad_n);
  return std::pow(head, 1.0 / p) + std::pow(tail, 1.0 / p);
}

KernelCertificate certify_kernel(const KernelSpec& spec, const TimeGrid& grid, double H_hypothesis,
                                 double tolerance) {
  if (!(H_hypothesis > 0.0)) throw DomainError("kernels", "H hypothesis must be positive");
  KernelCertificate cert;
  cert.lnd_H = H_hypothesis;
  cert.tolerance = tolerance;
  if (spec.family() == KernelFamily::FbmMolchanGolosov) {
    cert.reason = "fBm kernel is not evaluated pointwise";
    return cert;
  }

  const std::size_t n = grid.n_steps();
  std::vector<double> env1(n + 1, 0.0);
  std::vector<double> env2(n + 1, 0.0);
  double lnd = std::numeric_limits<double>::infinity();
  std::vector<double> square_by_gap(n + 1, -1.0);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j <= n; ++j) {
      const double s = grid.t(i);
      const double t = grid.t(j);
      const std::size_t gap = j - i;
      if (gap <= kFitGaps) {
        env1[gap] = std::max(env1[gap], modulus_omega(spec, 1, s, t));
        env2[gap] = std::max(env2[gap], modulus_omega(spec, 2, s, t));
      }
      double sq = 0.0;
      if (spec.is_convolution() && square_by_gap[gap] >= 0.0) {
        sq = square_by_gap[gap];
      } else {
        sq = kernel_power_integral(spec, 2, s, t);
        if (spec.is_convolution()) square_by_gap[gap] = sq;
      }
      lnd = std::min(lnd, sq / std::pow(t - s, 2.0 * H_hypothesis));
    }
  }
  cert.lnd_constant = lnd;

  std::vector<double> log_h;
  std::vector<double> log1;
  std::vector<double> log2;
  bool positive = true;
  const std::size_t fit_gaps = std::min<std::size_t>(n, kFitGaps);
  for (std::size_t gap = 1; gap <= fit_gaps; ++gap) {
    if (!(env1[gap] > 0.0) || !(env2[gap] > 0.0)) {
      positive = false;
      break;
    }
    log_h.push_back(std::log(grid.dt() * static_cast<double>(gap)));
    log1.push_back(std::log(env1[gap]));
    log2.push_back(std::log(env2[gap]));
  }
  if (!positive) {
    cert.reason = "kernel modulus vanishes on some gap";
    cert.max_relative_violation = std::numeric_limits<double>::infinity();
    return cert;
  }
  const LinearFit fit1 = fit_line(log_h, log1);
  const LinearFit fit2 = fit_line(log_h, log2);
  cert.gamma_b = fit1.slope;
  cert.gamma_sigma = fit2.slope;
  const LinearFit& role_fit = spec.role() == KernelRole::Drift ? fit1 : fit2;
  const auto& role_log = spec.role() == KernelRole::Drift ? log1 : log2;
  double violation = 0.0;
  for (std::size_t k = 0; k < log_h.size(); ++k) {
    const double predicted = role_fit.intercept + role_fit.slope * log_h[k];
    violation = std::max(violation, std::abs(std::exp(role_log[k] - predicted) - 1.0));
  }
  cert.max_relative_violation = violation;

  if (!(lnd > 0.0) || !std::isfinite(lnd)) {
    cert.reason = "local non-determinism constant is not positive";
  } else if (violation > tolerance) {
    cert.reason = "power-law regression violation exceeds tolerance";
  } else {
    cert.valid = true;
  }
  return cert;
}

nlohmann::json to_json(const KernelSpec& spec) {
  nlohmann::json j;
  j["family"] = spec.name();
  j["role"] = spec.role() == KernelRole::Drift ? "drift" : "diffusion";
  switch (spec.family()) {
    case KernelFamily::RiemannLiouville:
    case KernelFamily::FbmMolchanGolosov:
      j["H"] = spec.hurst();
      break;
    case KernelFamily::QLog:
      j["q"] = spec.q();
      break;
    case KernelFamily::Constant:
      j["c"] = spec.constant_value();
      break;
    case KernelFamily::Tabulated:
      j["T"] = spec.table()->grid.horizon();
      j["n_steps"] = spec.table()->grid.n_steps();
      j["values"] = spec.table()->lower;
      break;
    case KernelFamily::LogFractional:
      break;
  }
  return j;
}

KernelSpec kernel_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string()) {
    throw DomainError("kernels", "kernel block needs a string 'family'");
  }
  const std::string family = j["family"];
  KernelRole role = KernelRole::Diffusion;
  if (j.contains("role")) {
    const std::string r = j["role"];
    if (r == "drift") {
      role = KernelRole::Drift;
    } else if (r != "diffusion") {
      throw DomainError("kernels", "kernel role must be 'drift' or 'diffusion'");
    }
  }
  auto number = [&](const char* key) -> double {
    if (!j.contains(key) || !j[key].is_number()) {
      throw DomainError("kernels", std::string("kernel '") + family + "' needs numeric '" + key + "'");
    }
    return j[key].get<double>();
  };
  if (family == "rl") return KernelSpec::riemann_liouville(number("H"), role);
  if (family == "fbm") return KernelSpec::fbm(number("H"), role);
  if (family == "log") return KernelSpec::log_fractional(role);
  if (family == "qlog") return KernelSpec::q_log(number("q"), role);
  if (family == "constant") return KernelSpec::constant(number("c"), role);
  if (family == "tabulated") {
    KernelTable table{TimeGrid(number("T"), static_cast<std::size_t>(number("n_steps"))),
                      j.at("values").get<std::vector<double>>()};
    return KernelSpec::tabulated(std::move(table), role);
  }
  throw DomainError("kernels", "unknown kernel family '" + family + "'");
}

nlohmann::json to_json(const KernelCertificate& cert) {
  return {{"gamma_b", cert.gamma_b},
          {"gamma_sigma", cert.gamma_sigma},
          {"lnd_H", cert.lnd_H},
          {"lnd_constant", cert.lnd_constant},
          {"max_relative_violation", cert.max_relative_violation},
          {"tolerance", cert.tolerance},
          {"valid", cert.valid},
          {"reason", cert.reason}};
}

}  // namespace vlab
