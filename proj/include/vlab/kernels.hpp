#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlab/grid.hpp"

namespace vlab {

enum class KernelFamily { RiemannLiouville, FbmMolchanGolosov, LogFractional, QLog, Constant, Tabulated };
enum class KernelRole { Drift, Diffusion };

/// Kernel values K(t_i, s_j) on a uniform grid, j <= i, row-major lower triangle.
struct KernelTable {
  TimeGrid grid;
  std::vector<double> lower;  // (n+1)(n+2)/2 entries

  double at(std::size_t i, std::size_t j) const noexcept { return lower[i * (i + 1) / 2 + j]; }
};

/// A Volterra kernel family member plus the metadata the regularity results use.
///
/// Construct through the named factories; they enforce the parameter domains.
class KernelSpec {
 public:
  static KernelSpec riemann_liouville(double hurst, KernelRole role = KernelRole::Diffusion);
  static KernelSpec fbm(double hurst, KernelRole role = KernelRole::Diffusion);
  static KernelSpec log_fractional(KernelRole role = KernelRole::Diffusion);
  static KernelSpec q_log(double q, KernelRole role = KernelRole::Diffusion);
  static KernelSpec constant(double c, KernelRole role = KernelRole::Diffusion);
  static KernelSpec tabulated(KernelTable table, KernelRole role = KernelRole::Diffusion);

  KernelFamily family() const noexcept { return family_; }
  KernelRole role() const noexcept { return role_; }
  double hurst() const noexcept { return hurst_; }
  double q() const noexcept { return q_; }
  double constant_value() const noexcept { return constant_; }
  const KernelTable* table() const noexcept { return table_.get(); }

  /// K(t,s) depends on t-s only (every family except Tabulated).
  bool is_convolution() const noexcept { return family_ != KernelFamily::Tabulated; }

  std::string name() const;

 private:
  KernelFamily family_ = KernelFamily::Constant;
  KernelRole role_ = KernelRole::Diffusion;
  double hurst_ = 0.5;
  double q_ = 1.0;
  double constant_ = 1.0;
  std::shared_ptr<const KernelTable> table_;
};

/// K(t, s); zero when s >= t. Throws DomainError for non-finite input, for the
/// q-log kernel at t - s >= 1 and for the fBm kernel (simulated by covariance).
double eval_kernel(const KernelSpec& spec, double t, double s);

/// omega_p(t, s; K) for p in {1, 2}, by graded quadrature with a refinement check.
/// `quad_n` is the Gauss-Legendre order per panel (>= 16).
double modulus_omega(const KernelSpec& spec, int p, double s, double t, std::size_t quad_n = 16);

/// Integral of |K(t,r)|^p over r in [s, t].
double kernel_power_integral(const KernelSpec& spec, int p, double s, double t,
                             std::size_t quad_n = 16);

struct KernelCertificate {
  double gamma_b = 0.0;
  double gamma_sigma = 0.0;
  double lnd_H = 0.0;
  double lnd_constant = 0.0;
  double max_relative_violation = 0.0;
  double tolerance = 0.0;
  bool valid = false;
  std::string reason;
};

/// Numerical check of the moment conditions and local non-determinism on a grid.
///
/// lnd_constant is the minimum over grid pairs s < t of
/// (t-s)^{-2H} * int_s^t K(t,r)^2 dr. gamma_b and gamma_sigma are log-log slopes
/// of the gap envelopes max_s omega_1 and max_s omega_2 over the eight
/// smallest gaps; the violation of the regression matching the kernel's
/// role is max |envelope / fit - 1| on those gaps.
KernelCertificate certify_kernel(const KernelSpec& spec, const TimeGrid& grid, double H_hypothesis,
                                 double tolerance);

nlohmann::json to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const nlohmann::json& j);
nlohmann::json to_json(const KernelCertificate& cert);

}  // namespace vlab
