#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vlab/grid.hpp"

namespace vlab {

using cplx = std::complex<double>;

/// Frequencies xi_k in R^d with positive quadrature weights.
class SpectralGrid {
 public:
  /// Symmetric uniform grid {-n_half..n_half} * (xi_max / n_half) in d = 1 with
  /// trapezoid weights.
  static SpectralGrid uniform(double xi_max, std::size_t n_half);
  /// Uniform grid with spacing <= pi / range, so the inverse transform does not
  /// alias over a window of width `range`.
  static SpectralGrid for_range(double xi_max, double range);
  /// Tensor product of uniform grids in d dimensions (product trapezoid weights).
  static SpectralGrid tensor(std::size_t dim, double xi_max, std::size_t n_half);
  /// Arbitrary points (row-major, size * dim) and weights.
  static SpectralGrid from_points(std::size_t dim, std::vector<double> xi,
                                  std::vector<double> weights);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return weights_.size(); }
  std::span<const double> point(std::size_t k) const noexcept {
    return {xi_.data() + k * dim_, dim_};
  }
  double weight(std::size_t k) const noexcept { return weights_[k]; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double norm(std::size_t k) const noexcept;

  /// Index of -xi_k, or npos when the grid lacks it.
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  const std::vector<std::size_t>& negation() const noexcept { return negation_; }
  bool symmetric() const noexcept;
  /// Per-axis spacing of a uniform or tensor grid (0 for from_points grids).
  double spacing() const noexcept { return spacing_; }
  double xi_max() const noexcept;

 private:
  SpectralGrid(std::size_t dim, std::vector<double> xi, std::vector<double> weights,
               double spacing);

  std::size_t dim_;
  std::vector<double> xi_;
  std::vector<double> weights_;
  std::vector<std::size_t> negation_;
  double spacing_;
};

/// Samples of the weighted occupation transform
/// l^delta_{s,t}(xi) = sum_{t_j in [s,t)} rho_j^delta exp(i <xi, X_j>) dt.
struct OccupationFT {
  SpectralGrid spectral;
  std::vector<std::pair<double, double>> pairs;
  std::vector<cplx> values;  // pair-major: values[p * size + k]
  double delta = 0.0;

  cplx value(std::size_t pair, std::size_t k) const noexcept {
    return values[pair * spectral.size() + k];
  }
  std::span<const cplx> row(std::size_t pair) const noexcept {
    return {values.data() + pair * spectral.size(), spectral.size()};
  }
};

OccupationFT occupation_ft(const SamplePath& path, std::span<const double> weights, double delta,
                           const SpectralGrid& spectral,
                           std::span<const std::pair<double, double>> pairs);

/// Running transforms L_i(xi) = l^delta_{0,t_i}(xi) at every node of the path.
/// Row i has spectral.size() entries.
std::vector<cplx> occupation_prefix(const SamplePath& path, std::span<const double> weights,
                                    double delta, const SpectralGrid& spectral);

/// G_{t1,t2}(xi) = l^w_{0,t2}(xi) l^w_{0,t1}(-xi), kept in factored form.
class SelfIntersectionFT {
 public:
  SelfIntersectionFT(SpectralGrid spectral, std::vector<double> t1_nodes,
                     std::vector<double> t2_nodes, std::vector<cplx> l_t1,
                     std::vector<cplx> l_t2);

  const SpectralGrid& spectral() const noexcept { return spectral_; }
  const std::vector<double>& t1_nodes() const noexcept { return t1_; }
  const std::vector<double>& t2_nodes() const noexcept { return t2_; }

  cplx value(std::size_t i1, std::size_t i2, std::size_t k) const noexcept {
    return l2_[i2 * spectral_.size() + k] * std::conj(l1_[i1 * spectral_.size() + k]);
  }
  /// l^w_{0,t}(xi) at t = t1_nodes[i] (resp. t2_nodes[i]).
  cplx l_t1(std::size_t i, std::size_t k) const noexcept { return l1_[i * spectral_.size() + k]; }
  cplx l_t2(std::size_t i, std::size_t k) const noexcept { return l2_[i * spectral_.size() + k]; }

  /// Materialised tensor [t1 x t2 x xi].
  std::vector<cplx> tensor() const;

 private:
  SpectralGrid spectral_;
  std::vector<double> t1_;
  std::vector<double> t2_;
  std::vector<cplx> l1_;
  std::vector<cplx> l2_;
};

SelfIntersectionFT self_intersection_ft(const SamplePath& path, std::span<const double> weights,
                                        const SpectralGrid& spectral,
                                        std::span<const double> t1_nodes,
                                        std::span<const double> t2_nodes);

/// Discrete Fourier-Lebesgue norm (sum_k w_k <xi_k>^{kappa q} |f_k|^q)^{1/q};
/// q = infinity gives max_k <xi_k>^kappa |f_k|.
double fl_norm(std::span<const cplx> values, const SpectralGrid& spectral, double kappa,
               double q);

struct LocalTime {
  std::vector<double> x;
  std::vector<double> values;
  double imag_residue = 0.0;  // max |imaginary part| of the inverse sum
  std::vector<std::string> warnings;
};

/// (2 pi)^{-1} sum_k w_k e^{-i xi_k x} l_{s,t}(xi_k) on an x lattice (d = 1, symmetric
/// uniform spectral grid).
LocalTime local_time_reconstruct(const OccupationFT& ft, std::size_t pair_index, double x_min,
                                 double x_max, std::size_t n_x);

}  // namespace vlab
