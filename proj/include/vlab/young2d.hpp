#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "vlab/grid.hpp"

namespace vlab {

/// A function on a product of two time grids with values in R^dim.
struct GridFunction2D {
  TimeGrid axis1;
  TimeGrid axis2;
  std::size_t dim = 1;
  std::vector<double> values;  // ((i * n2_nodes) + j) * dim + k

  using Fn = std::function<void(double t1, double t2, std::span<double> out)>;
  static GridFunction2D sample(const TimeGrid& axis1, const TimeGrid& axis2, std::size_t dim,
                               const Fn& fn);

  std::span<const double> at(std::size_t i, std::size_t j) const noexcept {
    return {values.data() + (i * axis2.n_nodes() + j) * dim, dim};
  }
};

using Point2 = std::array<double, 2>;

/// f(t1,t2) - f(t1,s2) - f(s1,t2) + f(s1,s2). Throws AlignmentError off-grid.
std::vector<double> box_increment(const GridFunction2D& f, Point2 s, Point2 t);

struct Holder2 {
  double h10 = 0.0;  // sup |f(t1,x) - f(s1,x)| / |t1-s1|^a1
  double h01 = 0.0;  // sup |f(x,t2) - f(x,s2)| / |t2-s2|^a2
  double h11 = 0.0;  // sup |box f| / (|t1-s1|^a1 |t2-s2|^a2)
  double total() const noexcept { return h10 + h01 + h11; }
};

/// The three grid seminorms of the two-parameter Hoelder space. Needs >= 4 nodes per axis.
Holder2 holder2_seminorms(const GridFunction2D& f, Point2 alpha);

/// A(t1, t2, x) with x in R^dim and values in R^dim.
struct TwoParamField {
  std::size_t dim = 1;
  std::function<void(double t1, double t2, std::span<const double> x, std::span<double> out)> eval;
  // Row-major dim x dim Jacobian in x, when available.
  std::function<void(double t1, double t2, std::span<const double> x, std::span<double> out)>
      eval_grad_x;
  double gamma = 1.0;
  double spatial_kappa = 1.0;
};

using PathFunction = std::function<void(double t, std::span<double> out)>;

/// theta(t) read off a sample path; throws AlignmentError at off-grid times.
PathFunction path_function(const SamplePath& theta);

struct Rect {
  double s1 = 0.0;
  double t1 = 1.0;
  double s2 = 0.0;
  double t2 = 1.0;
};

struct YoungIntegral {
  std::vector<double> value;
  double error_indicator = 0.0;  // |S_level - S_{level-1}|
  bool converged = true;
  std::vector<double> differences;  // |S_l - S_{l-1}| for the last levels, oldest first
};

/// Riemann sum of box_{u,v} A(., theta_{u2} - theta_{u1}) over the 2^level x 2^level
/// dyadic partition of `rect`. Levels level-3 .. level are evaluated; the result is
/// flagged non-converged when the successive differences fail to decrease.
/// `holder_beta` is the Hoelder exponent of theta; gamma + kappa*beta <= 1 is rejected.
YoungIntegral nl_young_integral(const TwoParamField& A, const PathFunction& theta, Rect rect,
                                unsigned level, double holder_beta = 1.0);
YoungIntegral nl_young_integral(const TwoParamField& A, const SamplePath& theta, Rect rect,
                                unsigned level, double holder_beta = 1.0);

/// One Riemann sum at a single level, without the convergence bookkeeping.
std::vector<double> young_riemann_sum(const TwoParamField& A, const PathFunction& theta, Rect rect,
                                      unsigned level);

struct GermErrorFit {
  double exponent = 0.0;  // defect ~ side^exponent, +inf when exact
  bool exact = false;
  std::vector<double> sides;
  std::vector<double> defects;
  double r_squared = 0.0;
};

/// |int_box - box A(theta at corner)| over square boxes [c1, c1+h] x [c2, c2+h],
/// h = side0 * 2^-k for k < n_sizes, against the integral at `oracle_level`.
GermErrorFit germ_error_exponent(const TwoParamField& A, const PathFunction& theta, Point2 corner,
                                 double side0, std::size_t n_sizes, unsigned oracle_level = 12);

/// Stability proxies: grid max of |A - B| and of |grad_x (A - B)| over the nodes of
/// `axis` squared and x in [x_min, x_max] (n_x points, d = 1 sampling per axis).
double field_distance_proxy(const TwoParamField& A, const TwoParamField& B, const TimeGrid& axis,
                            double x_min, double x_max, std::size_t n_x);

/// Grid Hoelder norm sup|f| + sup |f_t - f_s| / |t-s|^beta of f sampled on `grid`.
double path_holder_norm(const PathFunction& f, std::size_t dim, const TimeGrid& grid, double beta);

}  // namespace vlab
