#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "vlab/occupation.hpp"
#include "vlab/simulate.hpp"

namespace vlab {

/// A two-time germ A_{s,t} with values in R^dim. evaluate(s, s, .) must vanish.
struct Germ1D {
  std::size_t dim = 1;
  std::function<void(double s, double t, std::span<double> out)> evaluate;
  std::optional<double> kappa1;  // declared, > 1
  double kappa2 = 1.0;           // declared, > 1/2
};

inline constexpr unsigned kMaxSewingLevel = 16;

/// Sum of A over the dyadic partition of [s, t] with 2^level cells. A nonzero
/// `anchor` in (0, 1) shifts the interior points by anchor * h, giving one extra
/// cell at each end.
std::vector<double> sewing_sum(const Germ1D& germ, double s, double t, unsigned level,
                               double anchor = 0.0);

/// delta_r A_{s,t} = A_{s,t} - A_{s,r} - A_{r,t}.
std::vector<double> germ_defect(const Germ1D& germ, double s, double r, double t);

struct SewingRate {
  double rate = 0.0;  // D_l ~ 2^{-rate l}, +inf when exact
  bool exact = false;
  double intercept = 0.0;
  std::vector<unsigned> levels;
  std::vector<double> differences;  // |S_{l+1} - S_l| for l = levels[0..k-2]
  std::vector<double> limit;        // finest-level sum

  /// Cauchy tail sum_{m >= l} D_m extrapolated with the fitted rate.
  double envelope(unsigned level) const;
};

/// Regresses log2 |S_{l+1} - S_l| on l for l in [level_min, level_max - 1].
/// Needs at least 4 levels. Reports `exact` when every difference is at round-off.
SewingRate sewing_rate(const Germ1D& germ, double s, double t, unsigned level_min,
                       unsigned level_max, double anchor = 0.0);

/// The conditional occupation germ of a simulated Volterra Ito path, with the
/// coefficients frozen at the left end of each cell:
///   A_{u,v}(xi) = dt sum_{r in [u,v)} rho_u^delta E_u[e^{i<xi, X^u_r>}],
/// X^u_r = X_r - sum_{u <= j < r} (W_b(r,j)(b_j - b_u) dt + W_s(r,j) sigma_j dB_j)
///         + N(0, sum_{u <= j < r} W_s(r,j)^2 dt sigma_u sigma_u^T).
/// Output is (Re, Im). On single grid cells it equals the left-point occupation
/// transform, so sums at the grid level reproduce occupation_ft.
Germ1D frozen_occupation_germ(const VolterraModel& model, const VolterraRecord& record,
                              std::span<const double> weights, double delta,
                              std::span<const double> xi);

}  // namespace vlab
