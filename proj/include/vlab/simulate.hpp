#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vlab/grid.hpp"
#include "vlab/kernels.hpp"

namespace vlab {

/// Brownian increments dB_j ~ N(0, dt I_m), step-major: out[j*m + k].
std::vector<double> sample_brownian(const TimeGrid& grid, std::size_t dim_m, std::uint64_t seed,
                                    std::uint64_t path = 0);

/// Drift or diffusion coefficient of a Volterra Ito process.
///
/// Output length is d for a drift and d*m (row-major) for a diffusion.
struct Coefficient {
  enum class Kind { ConstantVector, StateFunction, PathFunctional };
  using StateFn = std::function<void(std::span<const double> x, std::span<double> out)>;
  // Value at node j given the path on nodes 0..j.
  using PathFn = std::function<void(std::size_t j, const SamplePath& x, std::span<double> out)>;

  Kind kind = Kind::ConstantVector;
  std::vector<double> constant;
  StateFn state_fn;
  PathFn path_fn;
  double holder_alpha = 0.0;

  static Coefficient constant_vector(std::vector<double> value);
  static Coefficient state_function(StateFn fn, double holder_alpha = 1.0);
  static Coefficient path_functional(PathFn fn, double holder_alpha = 0.0);
};

/// The weight rho_t in [0, 1] of the weighted occupation measures.
struct WeightProcess {
  enum class Kind { One, StateFunction, Custom };
  Kind kind = Kind::One;
  std::function<double(std::span<const double> x)> state_fn;
  std::function<double(std::size_t j, const SamplePath& x)> custom_fn;
  double holder_chi = 1.0;

  static WeightProcess one() { return {}; }
  static WeightProcess state_function(std::function<double(std::span<const double>)> fn,
                                      double chi);

  /// rho at every node of `path`, clamped to [0, 1].
  std::vector<double> evaluate(const SamplePath& path) const;
};

/// X_t = g(t) + int K_b(t,s) b_s ds + int K_sigma(t,s) sigma_s dB_s.
struct VolterraModel {
  std::size_t dim = 1;
  std::size_t noise_dim = 1;
  std::function<double(double t, std::size_t k)> g = [](double, std::size_t) { return 0.0; };
  KernelSpec kb = KernelSpec::constant(1.0, KernelRole::Drift);
  KernelSpec ks = KernelSpec::constant(1.0, KernelRole::Diffusion);
  Coefficient b = Coefficient::constant_vector({0.0});
  Coefficient sigma = Coefficient::constant_vector({1.0});
  double overflow_bound = 1e8;
};

/// g read off a path on the simulation grid (throws AlignmentError off-grid).
std::function<double(double, std::size_t)> initial_from_path(SamplePath path);

/// Discretised kernel weights W(i, j) for cells [t_j, t_{j+1}], j < i.
///
/// Riemann-Liouville kernels use exact cell averages: (1/dt) int K in the drift
/// role, sqrt((1/dt) int K^2) in the diffusion role. Other families use the cell
/// midpoint.
class KernelWeights {
 public:
  KernelWeights(const KernelSpec& spec, const TimeGrid& grid, KernelRole role);
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return convolution_ ? lag_[i - j] : full_[i * (i - 1) / 2 + j];
  }
  bool convolution() const noexcept { return convolution_; }
  /// Weight by lag i - j (convolution kernels only).
  std::span<const double> lags() const noexcept { return lag_; }

 private:
  bool convolution_ = true;
  std::vector<double> lag_;
  std::vector<double> full_;
};

/// Left-point Euler-Volterra scheme driven by Brownian increments of (seed, path).
SamplePath simulate_volterra_ito(const VolterraModel& model, const TimeGrid& grid,
                                 std::uint64_t seed, std::uint64_t path = 0);

/// Same scheme with caller-supplied increments (step-major, n_steps * noise_dim).
SamplePath simulate_volterra_ito(const VolterraModel& model, const TimeGrid& grid,
                                 std::span<const double> increments);

/// A simulated path together with the coefficient values that produced it.
struct VolterraRecord {
  SamplePath path;
  std::vector<double> increments;  // dB_j, n_steps x m
  std::vector<double> drift;       // b_j, n_steps x d
  std::vector<double> diffusion;   // sigma_j, n_steps x d x m
};

VolterraRecord simulate_volterra_record(const VolterraModel& model, const TimeGrid& grid,
                                        std::span<const double> increments);

/// X = x0 + int RL_H (b0 + beta X) ds + int RL_H max(X,0)^theta dB.
VolterraModel volterra_power_model(double H, double x0, double b0, double beta, double theta);
SamplePath simulate_volterra_power(double H, double x0, double b0, double beta, double theta,
                                   const TimeGrid& grid, std::uint64_t seed,
                                   std::uint64_t path = 0);

/// Exact fBm on a grid by Cholesky factorisation of the covariance of (B_{t_1}, ..., B_{t_n}).
/// Falls back to eigenvalue clipping when the factorisation fails and records it in
/// warnings(). n_steps <= 8192.
class FbmCholeskySampler {
 public:
  static constexpr std::size_t kMaxSteps = 8192;
  FbmCholeskySampler(double hurst, const TimeGrid& grid);
  SamplePath sample(std::size_t dim, std::uint64_t seed, std::uint64_t path = 0) const;
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  TimeGrid grid_;
  std::vector<double> factor_;  // n x n, row-major lower triangular (or V sqrt(L))
  std::vector<std::string> warnings_;
};

SamplePath simulate_fbm(double hurst, const TimeGrid& grid, std::size_t dim, std::uint64_t seed,
                        std::uint64_t path = 0);

/// Exact fBm by circulant embedding of the fractional Gaussian noise covariance
/// (Davies-Harte), O(n log n) per path. Intended for grids beyond the Cholesky guard.
class FbmCirculantSampler {
 public:
  FbmCirculantSampler(double hurst, const TimeGrid& grid);
  ~FbmCirculantSampler();
  FbmCirculantSampler(const FbmCirculantSampler&) = delete;
  FbmCirculantSampler& operator=(const FbmCirculantSampler&) = delete;

  SamplePath sample(std::size_t dim, std::uint64_t seed, std::uint64_t path = 0) const;
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  struct Plan;
  TimeGrid grid_;
  std::vector<double> sqrt_eigen_;  // sqrt(lambda_k / N), N = 2 n_steps
  std::unique_ptr<Plan> plan_;
  std::vector<std::string> warnings_;
};

}  // namespace vlab
