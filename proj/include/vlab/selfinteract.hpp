#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vlab/occupation.hpp"
#include "vlab/young2d.hpp"

namespace vlab {

/// A drift b given by its Fourier transform b_hat(xi) = int e^{-i<xi,x>} b(x) dx, so
/// that b(x) = (2 pi)^{-d} int b_hat(xi) e^{i<xi,x>} dxi and grad delta_0 has b_hat = i xi.
struct FourierDrift {
  std::size_t dim = 1;
  std::function<void(std::span<const double> xi, std::span<cplx> out)> b_hat;
  double fl_delta = 0.0;
  double fl_qprime = INFINITY;
  std::string description;

  std::vector<cplx> evaluate(std::span<const double> xi) const;

  /// b(x) = amplitude exp(-|x|^2 / (2 width^2)).
  static FourierDrift gaussian_bump(std::size_t dim, double amplitude, double width);
  /// b_hat(xi) e^{-|xi|^2 / (2 n^2)}: the drift convolved with a heat kernel.
  FourierDrift mollified(double n) const;
};

struct ThresholdPreset {
  FourierDrift drift;
  double h_bound = 0.0;      // admissible Hurst parameters are H < h_bound
  bool delta_strict = false;  // the FL index is a supremum that is not attained
};

enum class PresetName { SkewDelta0, EdwardsGradDelta0, EdwardsFractional, DurrettRogers };

/// The interaction kernels of the examples with their FL indices and Hurst thresholds.
/// `alpha` is used by EdwardsFractional only and must lie in (0, d - 1).
ThresholdPreset threshold_preset(PresetName name, std::size_t dim = 1, double alpha = 0.5,
                                 double strength = 1.0);

/// delta + 1/H - d/q > 3 with 1/q + 1/q' = 1.
bool example_condition(double H, double delta, double qprime, std::size_t dim);

/// A^b(t1, t2, x) = Re (2 pi)^{-d} sum_k w_k b_hat(xi_k) G_{t1,t2}(xi_k) e^{i<xi_k, x>},
/// with G_{t1,t2}(xi) = l_{0,t2}(xi) conj(l_{0,t1}(xi)), i.e.
/// A^b(t1,t2,x) = int_0^t2 int_0^t1 w w b(x + z_r2 - z_r1) for the truncated b.
class SelfInteractionField {
 public:
  SelfInteractionField(const FourierDrift& b, const SelfIntersectionFT& G);

  std::size_t dim() const noexcept { return dim_; }
  const SpectralGrid& spectral() const noexcept { return spectral_; }
  const std::vector<double>& t1_nodes() const noexcept { return t1_; }
  const std::vector<double>& t2_nodes() const noexcept { return t2_; }

  /// Real part at node indices, with the imaginary part returned in `imag` if given.
  void eval(std::size_t i1, std::size_t i2, std::span<const double> x, std::span<double> out,
            std::span<double> imag = {}) const;
  void eval_grad(std::size_t i1, std::size_t i2, std::span<const double> x,
                 std::span<double> out) const;

  /// The field on (t1, t2) node times; throws AlignmentError elsewhere.
  TwoParamField as_field() const;

  /// sum_k w_k |b_hat| |G| over the outermost spectral shell relative to the total,
  /// at the last (t1, t2) node.
  double tail_fraction() const noexcept { return tail_fraction_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// max |Im A| / max |Re A| over the given node pairs and probe points.
  double imag_residue(std::span<const double> probes) const;

  // Solver access: (2 pi)^{-d} w_k b_hat(xi_k) (k-major, d components) and l_{0,t}.
  const std::vector<cplx>& coefficients() const noexcept { return coef_; }
  cplx l(std::size_t node, std::size_t k) const noexcept { return l_[node * spectral_.size() + k]; }
  bool diagonal_nodes() const noexcept { return diagonal_; }

 private:
  std::size_t index(const std::vector<double>& nodes, double t) const;

  std::size_t dim_;
  SpectralGrid spectral_;
  std::vector<double> t1_;
  std::vector<double> t2_;
  std::vector<cplx> coef_;
  std::vector<cplx> l1_;
  std::vector<cplx> l2_;
  std::vector<cplx> l_;  // l1_ when the node sets coincide
  bool diagonal_ = false;
  double tail_fraction_ = 0.0;
  std::vector<std::string> warnings_;
};

/// Builds A^b; throws DomainError when the spectral grid lacks -xi for some xi or
/// b_hat is not conjugate symmetric on it. Records a truncation warning when the
/// outer shell carries more than 1% of the spectral mass.
std::shared_ptr<const SelfInteractionField> build_field(const FourierDrift& b,
                                                        const SelfIntersectionFT& G);

struct SolverConfig {
  double gamma = 0.6;
  std::vector<double> u0 = {0.0};
  double step_tau = 0.0;  // <= 0 selects the step automatically
  double picard_tol = 1e-9;
  std::size_t max_iters = 200;
};

struct WindowReport {
  double start = 0.0;
  double end = 0.0;
  double tau = 0.0;
  std::size_t iterations = 0;
  double contraction = 0.0;  // max ratio of successive update norms
};

struct SolveResult {
  SamplePath u;
  SamplePath theta;
  std::vector<WindowReport> windows;
  double defect = 0.0;  // max_t |theta_t - u0 - int int A(dr, theta_r2 - theta_r1)|
  std::size_t total_iterations = 0;
  double max_contraction = 0.0;
  std::vector<std::string> warnings;
};

/// C^gamma grid norm sup |f| + sup |f_t - f_s| / |t - s|^gamma over nodes [a, b].
double holder_norm_nodes(const SamplePath& f, std::size_t a, std::size_t b, double gamma);

/// theta_t = u0 + int_0^t int_0^t A(dr, theta_r2 - theta_r1) by Picard iteration on
/// windows of length tau, on the partition given by the nodes of z; u = theta + z.
/// The field must be built on every node of z for both time parameters.
SolveResult solve_picard(const SelfInteractionField& A, const SolverConfig& cfg,
                         const SamplePath& z);

/// Same iteration for a general field, evaluated at the grid-cell corners.
SolveResult solve_picard(const TwoParamField& A, const SolverConfig& cfg, const SamplePath& z);

struct StabilityRow {
  double level = 0.0;
  double drift_distance = 0.0;     // fl_norm(b_hat_n - b_hat_ref) at (delta, q')
  double u0_distance = 0.0;
  double solution_distance = 0.0;  // C^gamma proxy of u_n - u_ref
  double ratio = 0.0;
};

struct StabilityTable {
  std::vector<StabilityRow> rows;
  double reference_level = 0.0;  // 0 means the unmollified drift
  SolveResult reference;
};

/// Solves with the heat-kernel mollifications b_n at each level and compares them with
/// the solution for b (reference_level = 0) or for b_{reference_level}.
/// `u0_shifts` (empty, or one per level) perturbs the initial datum of each level.
StabilityTable stability_experiment(const FourierDrift& b, std::span<const double> levels,
                                    const SamplePath& z, std::span<const double> weights,
                                    const SpectralGrid& spectral, const SolverConfig& cfg,
                                    double reference_level = 0.0,
                                    std::span<const double> u0_shifts = {});

/// Solve for a drift on the driving path z with weights w (w = 1 if empty).
SolveResult solve_drift(const FourierDrift& b, const SamplePath& z, std::span<const double> weights,
                        const SpectralGrid& spectral, const SolverConfig& cfg);

}  // namespace vlab
