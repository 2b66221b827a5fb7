#include "vlab/young2d.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "vlab/errors.hpp"
#include "vlab/numerics.hpp"
#include "vlab/parallel.hpp"

namespace vlab {

namespace {

double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double diff_norm(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(acc);
}

std::vector<double> dyadic_nodes(double s, double t, std::size_t n) {
  std::vector<double> nodes(n + 1);
  const double h = (t - s) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) nodes[i] = s + static_cast<double>(i) * h;
  nodes[n] = t;
  return nodes;
}

void check_field(const TwoParamField& A) {
  if (!A.eval) throw DomainError("young2d", "field has no eval function");
  if (A.dim == 0) throw DomainError("young2d", "field dimension must be positive");
}

}  // namespace

GridFunction2D GridFunction2D::sample(const TimeGrid& axis1, const TimeGrid& axis2,
                                      std::size_t dim, const Fn& fn) {
  GridFunction2D f{axis1, axis2, dim, std::vector<double>(axis1.n_nodes() * axis2.n_nodes() * dim)};
  for (std::size_t i = 0; i < axis1.n_nodes(); ++i) {
    for (std::size_t j = 0; j < axis2.n_nodes(); ++j) {
      fn(axis1.t(i), axis2.t(j),
         std::span<double>(f.values.data() + (i * axis2.n_nodes() + j) * dim, dim));
    }
  }
  return f;
}

std::vector<double> box_increment(const GridFunction2D& f, Point2 s, Point2 t) {
  if (s[0] > t[0] || s[1] > t[1]) throw DomainError("young2d", "box corners must satisfy s <= t");
  const std::size_t i0 = f.axis1.index_of(s[0]);
  const std::size_t i1 = f.axis1.index_of(t[0]);
  const std::size_t j0 = f.axis2.index_of(s[1]);
  const std::size_t j1 = f.axis2.index_of(t[1]);
  std::vector<double> out(f.dim);
  for (std::size_t k = 0; k < f.dim; ++k) {
    out[k] = f.at(i1, j1)[k] - f.at(i1, j0)[k] - f.at(i0, j1)[k] + f.at(i0, j0)[k];
  }
  return out;
}

Holder2 holder2_seminorms(const GridFunction2D& f, Point2 alpha) {
  const std::size_t n1 = f.axis1.n_nodes();
  const std::size_t n2 = f.axis2.n_nodes();
  if (n1 < 4 || n2 < 4) throw DomainError("young2d", "holder2_seminorms needs >= 4 nodes per axis");
  const std::size_t d = f.dim;
  std::vector<Holder2> rows(n1);
  parallel_for(n1, [&](std::size_t i) {
    Holder2& h = rows[i];
    std::vector<double> box(d);
    for (std::size_t ii = i + 1; ii < n1; ++ii) {
      const double w1 = std::pow(f.axis1.t(ii) - f.axis1.t(i), alpha[0]);
      for (std::size_t j = 0; j < n2; ++j) {
        h.h10 = std::max(h.h10, diff_norm(f.at(ii, j), f.at(i, j)) / w1);
        for (std::size_t jj = j + 1; jj < n2; ++jj) {
          const double w2 = std::pow(f.axis2.t(jj) - f.axis2.t(j), alpha[1]);
          for (std::size_t k = 0; k < d; ++k) {
            box[k] = f.at(ii, jj)[k] - f.at(ii, j)[k] - f.at(i, jj)[k] + f.at(i, j)[k];
          }
          h.h11 = std::max(h.h11, norm(box) / (w1 * w2));
        }
      }
    }
    for (std::size_t j = 0; j < n2; ++j) {
      for (std::size_t jj = j + 1; jj < n2; ++jj) {
        const double w2 = std::pow(f.axis2.t(jj) - f.axis2.t(j), alpha[1]);
        h.h01 = std::max(h.h01, diff_norm(f.at(i, jj), f.at(i, j)) / w2);
      }
    }
  });
  Holder2 out;
  for (const auto& h : rows) {
    out.h10 = std::max(out.h10, h.h10);
    out.h01 = std::max(out.h01, h.h01);
    out.h11 = std::max(out.h11, h.h11);
  }
  return out;
}

PathFunction path_function(const SamplePath& theta) {
  return [theta](double t, std::span<double> out) {
    const auto row = theta.row(theta.grid().index_of(t));
    std::copy(row.begin(), row.end(), out.begin());
  };
}

std::vector<double> young_riemann_sum(const TwoParamField& A, const PathFunction& theta, Rect rect,
                                      unsigned level) {
  check_field(A);
  if (level > 14) throw DomainError("young2d", "level " + std::to_string(level) + " exceeds 14");
  if (rect.s1 > rect.t1 || rect.s2 > rect.t2) throw DomainError("young2d", "rectangle is reversed");
  const std::size_t d = A.dim;
  const std::size_t n = std::size_t{1} << level;
  const auto a = dyadic_nodes(rect.s1, rect.t1, n);
  const auto b = dyadic_nodes(rect.s2, rect.t2, n);
  std::vector<double> th1((n + 1) * d);
  std::vector<double> th2((n + 1) * d);
  for (std::size_t i = 0; i <= n; ++i) {
    theta(a[i], std::span<double>(th1.data() + i * d, d));
    theta(b[i], std::span<double>(th2.data() + i * d, d));
  }

  std::vector<double> rows(d * n);  // component-major row sums
  parallel_for(n, [&](std::size_t i) {
    std::vector<double> x(d), f11(d), f10(d), f01(d), f00(d);
    std::vector<double> cells(d * n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < d; ++k) x[k] = th2[j * d + k] - th1[i * d + k];
      A.eval(a[i + 1], b[j + 1], x, f11);
      A.eval(a[i + 1], b[j], x, f10);
      A.eval(a[i], b[j + 1], x, f01);
      A.eval(a[i], b[j], x, f00);
      for (std::size_t k = 0; k < d; ++k) cells[k * n + j] = f11[k] - f10[k] - f01[k] + f00[k];
    }
    for (std::size_t k = 0; k < d; ++k) {
      rows[k * n + i] = pairwise_sum(std::span<const double>(cells).subspan(k * n, n));
    }
  });
  std::vector<double> out(d);
  for (std::size_t k = 0; k < d; ++k) {
    out[k] = pairwise_sum(std::span<const double>(rows).subspan(k * n, n));
  }
  return out;
}

YoungIntegral nl_young_integral(const TwoParamField& A, const PathFunction& theta, Rect rect,
                                unsigned level, double holder_beta) {
  check_field(A);
  if (!(A.gamma + A.spatial_kappa * holder_beta > 1.0)) {
    throw DomainError("young2d", "need gamma + kappa * beta > 1 for the nonlinear Young integral");
  }
  YoungIntegral out;
  const unsigned first = level >= 3 ? level - 3 : 0;
  std::vector<double> prev;
  for (unsigned l = first; l <= level; ++l) {
    auto s = young_riemann_sum(A, theta, rect, l);
    if (!prev.empty()) out.differences.push_back(diff_norm(s, prev));
    prev = std::move(s);
  }
  out.value = prev;
  if (!out.differences.empty()) out.error_indicator = out.differences.back();
  const double floor = 1e-13 * std::max(1.0, norm(out.value));
  const auto& D = out.differences;
  if (D.size() >= 3 && D.back() > floor) {
    bool decreasing = false;
    for (std::size_t i = D.size() - 2; i < D.size(); ++i) decreasing = decreasing || D[i] < D[i - 1];
    out.converged = decreasing;
  }
  return out;
}

YoungIntegral nl_young_integral(const TwoParamField& A, const SamplePath& theta, Rect rect,
                                unsigned level, double holder_beta) {
  if (theta.dim() != A.dim) throw DomainError("young2d", "path and field dimensions disagree");
  return nl_young_integral(A, path_function(theta), rect, level, holder_beta);
}

GermErrorFit germ_error_exponent(const TwoParamField& A, const PathFunction& theta, Point2 corner,
                                 double side0, std::size_t n_sizes, unsigned oracle_level) {
  check_field(A);
  if (n_sizes < 5) throw InsufficientDataError("young2d", "germ_error_exponent needs >= 5 box sizes");
  if (!(side0 > 0.0)) throw DomainError("young2d", "box side must be positive");
  const std::size_t d = A.dim;
  GermErrorFit out;
  std::vector<double> x(d), th1(d), th2(d), f11(d), f10(d), f01(d), f00(d);
  double scale = 0.0;
  for (std::size_t k = 0; k < n_sizes; ++k) {
    const double h = side0 * std::exp2(-static_cast<double>(k));
    const Rect box{corner[0], corner[0] + h, corner[1], corner[1] + h};
    const auto integral = young_riemann_sum(A, theta, box, oracle_level);
    theta(corner[0], th1);
    theta(corner[1], th2);
    for (std::size_t c = 0; c < d; ++c) x[c] = th2[c] - th1[c];
    A.eval(box.t1, box.t2, x, f11);
    A.eval(box.t1, box.s2, x, f10);
    A.eval(box.s1, box.t2, x, f01);
    A.eval(box.s1, box.s2, x, f00);
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double germ = f11[c] - f10[c] - f01[c] + f00[c];
      acc += (integral[c] - germ) * (integral[c] - germ);
    }
    out.sides.push_back(h);
    out.defects.push_back(std::sqrt(acc));
    scale = std::max(scale, norm(integral));
  }
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t k = 0; k < n_sizes; ++k) {
    if (out.defects[k] > 1e-14 * std::max(scale, 1e-300)) {
      lx.push_back(std::log(out.sides[k]));
      ly.push_back(std::log(out.defects[k]));
    }
  }
  if (lx.empty()) {
    out.exact = true;
    out.exponent = std::numeric_limits<double>::infinity();
    return out;
  }
  if (lx.size() < 2) throw InsufficientDataError("young2d", "fewer than two resolvable defects");
  const auto fit = fit_line(lx, ly);
  out.exponent = fit.slope;
  out.r_squared = fit.r_squared;
  return out;
}

double field_distance_proxy(const TwoParamField& A, const TwoParamField& B, const TimeGrid& axis,
                            double x_min, double x_max, std::size_t n_x) {
  check_field(A);
  check_field(B);
  if (A.dim != B.dim) throw DomainError("young2d", "field dimensions disagree");
  if (n_x < 2 || !(x_max > x_min)) throw DomainError("young2d", "need n_x >= 2 and x_min < x_max");
  const std::size_t d = A.dim;
  std::size_t lattice = 1;
  for (std::size_t k = 0; k < d; ++k) lattice *= n_x;
  if (lattice > 1000000) throw DomainError("young2d", "spatial lattice too large");
  const bool grad = static_cast<bool>(A.eval_grad_x) && static_cast<bool>(B.eval_grad_x);
  const std::size_t nodes = axis.n_nodes();
  std::vector<double> row_max(nodes, 0.0);
  parallel_for(nodes, [&](std::size_t i) {
    std::vector<double> x(d), fa(d), fb(d), ga(d * d), gb(d * d);
    double best = 0.0;
    double best_grad = 0.0;
    for (std::size_t j = 0; j < nodes; ++j) {
      for (std::size_t p = 0; p < lattice; ++p) {
        std::size_t q = p;
        for (std::size_t k = 0; k < d; ++k) {
          x[k] = x_min + (x_max - x_min) * static_cast<double>(q % n_x) / static_cast<double>(n_x - 1);
          q /= n_x;
        }
        A.eval(axis.t(i), axis.t(j), x, fa);
        B.eval(axis.t(i), axis.t(j), x, fb);
        best = std::max(best, diff_norm(fa, fb));
        if (grad) {
          A.eval_grad_x(axis.t(i), axis.t(j), x, ga);
          B.eval_grad_x(axis.t(i), axis.t(j), x, gb);
          best_grad = std::max(best_grad, diff_norm(ga, gb));
        }
      }
    }
    row_max[i] = best + best_grad;
  });
  double out = 0.0;
  for (double v : row_max) out = std::max(out, v);
  return out;
}

double path_holder_norm(const PathFunction& f, std::size_t dim, const TimeGrid& grid, double beta) {
  const std::size_t n = grid.n_nodes();
  std::vector<double> v(n * dim);
  for (std::size_t i = 0; i < n; ++i) f(grid.t(i), std::span<double>(v.data() + i * dim, dim));
  double sup = 0.0;
  double semi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> vi(v.data() + i * dim, dim);
    sup = std::max(sup, norm(vi));
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::span<const double> vj(v.data() + j * dim, dim);
      semi = std::max(semi, diff_norm(vj, vi) / std::pow(grid.t(j) - grid.t(i), beta));
    }
  }
  return sup + semi;
}

}  // namespace vlab
