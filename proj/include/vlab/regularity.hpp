#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "vlab/occupation.hpp"

namespace vlab {

struct RegularityPrediction {
  double H = 0.0;
  double zeta = 0.0;
  double eta = 0.0;
  double delta = 0.0;
  double chi = 0.0;
  double kappa_star = 0.0;
};

/// kappa_*(eta) = min{(1 ^ delta) chi (1 + eta/H), eta (zeta/H - 1)} / (zeta + eta),
/// and eta (zeta/H - 1) / (zeta + eta) when delta = 0. zeta = +inf is allowed and
/// gives the limit (eta/H for delta = 0).
RegularityPrediction predict_kappa(double H, double zeta, double eta, double delta, double chi);

/// The eta grid {0.05, 0.10, ..., 0.45}.
std::vector<double> default_eta_grid();

/// max over `etas` of kappa_*(eta).
double best_kappa(double H, double zeta, double delta, double chi,
                  std::span<const double> etas);

/// Group size of the delete-a-group jackknife: max(1, min(100, M/10)).
std::size_t jackknife_block_size(std::size_t ensemble_size);

/// Per-(pair, xi) Monte Carlo L^p moment (M^-1 sum |l|^p)^{1/p} with jackknife errors.
struct MomentCurve {
  std::vector<std::pair<double, double>> pairs;
  std::vector<double> xi_norm;  // |xi_k|
  std::vector<double> moment;   // pair-major
  std::vector<double> stderr_;
  double p = 2.0;
  std::size_t ensemble = 0;

  std::span<const double> row(std::size_t pair) const noexcept {
    return {moment.data() + pair * xi_norm.size(), xi_norm.size()};
  }
};

/// Per-(pair, xi) Monte Carlo mean of l with the jackknife error of its modulus.
struct MeanCurve {
  std::vector<std::pair<double, double>> pairs;
  std::vector<double> xi_norm;
  std::vector<cplx> mean;
  std::vector<double> stderr_;
  std::size_t ensemble = 0;
};

MomentCurve lp_moment_curve(std::span<const OccupationFT> ensemble, double p);
MeanCurve mean_curve(std::span<const OccupationFT> ensemble);

struct EnsembleStats {
  MomentCurve moment;
  MeanCurve mean;
};

/// Streams `ensemble_size` transforms from `produce(path_index)` without storing
/// them. Paths are processed in jackknife groups on worker threads; group sums are
/// reduced in group order, so results do not depend on the thread count.
EnsembleStats ensemble_statistics(std::size_t ensemble_size, double p,
                                  const std::function<OccupationFT(std::size_t)>& produce);

struct DecayFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::pair<double, double> xi_range{0.0, 0.0};
  double p_moment = 0.0;
  std::size_t points = 0;
};

/// Least squares of log(curve) on log(1 + |xi|) over |xi| in [xi_min, xi_max];
/// exponent = -slope. Needs >= 6 distinct magnitudes.
DecayFit fit_decay(std::span<const double> xi_norm, std::span<const double> curve, double xi_min,
                   double xi_max, double p_moment = 0.0);

/// Slope of log(moment) on log(gap). Needs >= 5 gaps.
double fit_time_exponent(std::span<const double> gaps, std::span<const double> moments);

struct CharFnDecay {
  std::vector<double> xi_norm;
  std::vector<double> curve;  // |E[w e^{i<xi,X>}]|
  std::vector<double> stderr_;
  DecayFit fit;
  bool fitted = false;
};

/// Empirical characteristic function of the weighted law at a fixed time.
/// `samples` is M x d row-major, `weights` holds sigma_*(X)^delta per sample.
/// The decay fit uses the frequencies in [xi_min, xi_max] whose estimate exceeds
/// three standard errors (the Monte Carlo floor is not part of the law).
CharFnDecay char_fn_decay(std::span<const double> samples, std::span<const double> weights,
                          const SpectralGrid& spectral, double xi_min, double xi_max);

}  // namespace vlab
