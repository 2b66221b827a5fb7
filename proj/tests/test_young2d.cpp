#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "vlab/errors.hpp"
#include "vlab/rng.hpp"
#include "vlab/young2d.hpp"

using namespace vlab;

namespace {

TwoParamField product_field(std::function<double(double)> g) {
  TwoParamField A;
  A.eval = [g](double t1, double t2, std::span<const double> x, std::span<double> out) {
    out[0] = t1 * t2 * g(x[0]);
  };
  return A;
}

PathFunction smooth_theta() {
  return [](double t, std::span<double> out) { out[0] = std::sin(2.0 * t); };
}

// Weierstrass-type path, Hoelder of order beta on [0, 1].
PathFunction weierstrass(double beta) {
  return [beta](double t, std::span<double> out) {
    double acc = 0.0;
    for (int k = 0; k < 40; ++k) acc += std::exp2(-k * beta) * std::cos(std::exp2(k) * t + k);
    out[0] = acc;
  };
}

// Midpoint double sum of g(theta(r2) - theta(r1)) over [0,1]^2 on an m x m grid.
double direct_quadrature(const std::function<double(double)>& g, const PathFunction& theta,
                         std::size_t m) {
  std::vector<double> th(m);
  for (std::size_t i = 0; i < m; ++i) {
    double v[1];
    theta((i + 0.5) / m, v);
    th[i] = v[0];
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) row += g(th[j] - th[i]);
    acc += row;
  }
  return acc / (double(m) * double(m));
}

}  // namespace

TEST_CASE("box increments") {
  const TimeGrid ax(1.0, 16);
  const auto sep = GridFunction2D::sample(ax, ax, 1, [](double t1, double t2, std::span<double> o) {
    o[0] = std::exp(t1) + std::sin(5 * t2);
  });
  const auto prod = GridFunction2D::sample(ax, ax, 1, [](double t1, double t2, std::span<double> o) {
    o[0] = t1 * t2;
  });
  std::vector<double> th(17);
  NormalStream(5, 0, 1).fill(0, th);
  const auto diff = GridFunction2D::sample(ax, ax, 1, [&](double t1, double t2, std::span<double> o) {
    o[0] = th[ax.index_of(t2)] - th[ax.index_of(t1)];
  });
  for (std::size_t i = 0; i < 16; i += 3) {
    for (std::size_t j = 0; j < 16; j += 5) {
      const Point2 s{ax.t(i), ax.t(j)};
      const Point2 t{ax.t(std::min<std::size_t>(16, i + 1 + (j % 4))), ax.t(std::min<std::size_t>(16, j + 2 + i % 3))};
      CHECK(std::abs(box_increment(sep, s, t)[0]) <= 1e-14);
      CHECK(box_increment(prod, s, t)[0] == doctest::Approx((t[0] - s[0]) * (t[1] - s[1])).epsilon(1e-13));
      CHECK(std::abs(box_increment(diff, s, t)[0]) <= 1e-14);
    }
  }
  CHECK_THROWS_AS(box_increment(prod, {0.0, 0.0}, {0.03, 0.5}), AlignmentError);
  CHECK_THROWS_AS(box_increment(prod, {0.5, 0.0}, {0.25, 0.5}), DomainError);
}

TEST_CASE("box increment bilinearity is exact") {
  const TimeGrid ax(1.0, 8);
  std::vector<double> a(81), b(81);
  NormalStream(9, 0, 1).fill(0, a);
  NormalStream(9, 1, 1).fill(0, b);
  for (auto* v : {&a, &b}) {
    for (double& x : *v) x = std::round(64.0 * x);  // small integers: arithmetic is exact
  }
  auto from = [&](const std::vector<double>& v) {
    return GridFunction2D{ax, ax, 1, v};
  };
  std::vector<double> sum(81);
  for (std::size_t i = 0; i < 81; ++i) sum[i] = a[i] + b[i];
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      const Point2 s{ax.t(i), ax.t(j)};
      const Point2 t{ax.t(8), ax.t(j + 1)};
      CHECK(box_increment(from(sum), s, t)[0] ==
            box_increment(from(a), s, t)[0] + box_increment(from(b), s, t)[0]);
    }
  }
}

TEST_CASE("two-parameter Hoelder seminorms") {
  const double T = 2.0;
  const TimeGrid ax(T, 12);
  const auto c = GridFunction2D::sample(ax, ax, 1, [](double, double, std::span<double> o) { o[0] = 3.0; });
  const auto h = holder2_seminorms(c, {0.5, 0.5});
  CHECK(h.total() == 0.0);
  const auto lin = GridFunction2D::sample(ax, ax, 1, [](double t1, double, std::span<double> o) { o[0] = t1; });
  const auto hl = holder2_seminorms(lin, {1.0, 1.0});
  CHECK(hl.h10 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hl.h01 == 0.0);
  CHECK(hl.h11 <= 1e-12);
  const auto prod = GridFunction2D::sample(ax, ax, 1, [](double t1, double t2, std::span<double> o) { o[0] = t1 * t2; });
  const auto hp = holder2_seminorms(prod, {1.0, 1.0});
  CHECK(hp.h10 == doctest::Approx(T).epsilon(1e-12));
  CHECK(hp.h01 == doctest::Approx(T).epsilon(1e-12));
  CHECK(hp.h11 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(holder2_seminorms(GridFunction2D::sample(TimeGrid(1.0, 2), ax, 1,
                                                           [](double, double, std::span<double> o) { o[0] = 0; }),
                                    {1.0, 1.0}),
                  DomainError);
}

TEST_CASE("nonlinear Young integral against direct quadrature") {
  const auto g = [](double x) { return std::cos(x) + 0.3 * std::sin(2 * x); };
  const auto A = product_field(g);
  const auto theta = smooth_theta();
  const auto res = nl_young_integral(A, theta, Rect{}, 10);
  const double oracle = direct_quadrature(g, theta, 4096);
  CHECK(std::abs(res.value[0] - oracle) <= 1e-3);
  CHECK(res.converged);
  CHECK(res.error_indicator < 1e-3);
  CHECK(res.differences.size() == 3);
}

TEST_CASE("nonlinear Young integral trivial cases") {
  TwoParamField flat;
  flat.eval = [](double, double, std::span<const double> x, std::span<double> out) {
    out[0] = std::sin(x[0]) + 2.0;
  };
  for (unsigned level = 0; level <= 6; ++level) {
    CHECK(young_riemann_sum(flat, smooth_theta(), Rect{}, level)[0] == 0.0);
  }
  const auto linear = product_field([](double x) { return x; });
  const PathFunction id = [](double t, std::span<double> out) { out[0] = t; };
  CHECK(std::abs(nl_young_integral(linear, id, Rect{}, 8).value[0]) <= 1e-13);

  const TimeGrid grid(1.0, 256);
  SamplePath p(grid, 1);
  for (std::size_t i = 0; i <= 256; ++i) p(i, 0) = std::sin(2.0 * grid.t(i));
  const auto on_path = nl_young_integral(product_field([](double x) { return std::cos(x); }), p, Rect{}, 8);
  const auto on_fn = nl_young_integral(product_field([](double x) { return std::cos(x); }), smooth_theta(), Rect{}, 8);
  CHECK(on_path.value[0] == doctest::Approx(on_fn.value[0]).epsilon(1e-12));
  CHECK_THROWS_AS(nl_young_integral(linear, p, Rect{}, 9), AlignmentError);

  TwoParamField rough = linear;
  rough.gamma = 0.5;
  rough.spatial_kappa = 0.5;
  CHECK_THROWS_AS(nl_young_integral(rough, id, Rect{}, 4, 0.9), DomainError);
}

TEST_CASE("non-convergence flag on an unresolved oscillation") {
  const auto A = product_field([](double x) { return std::cos(x); });
  const PathFunction fast = [](double t, std::span<double> out) { out[0] = 3.0e4 * t * t; };
  const auto res = nl_young_integral(A, fast, Rect{}, 5);
  CHECK_FALSE(res.converged);
}

TEST_CASE("rectangle additivity") {
  const auto A = product_field([](double x) { return std::exp(-x * x); });
  const auto theta = weierstrass(0.7);
  const auto whole = nl_young_integral(A, theta, Rect{}, 9, 0.7);
  const double cut1 = 0.375;
  const double cut2 = 0.625;
  double parts = 0.0;
  double indicators = whole.error_indicator;
  for (auto [a1, b1] : {std::pair{0.0, cut1}, std::pair{cut1, 1.0}}) {
    for (auto [a2, b2] : {std::pair{0.0, cut2}, std::pair{cut2, 1.0}}) {
      const auto r = nl_young_integral(A, theta, Rect{a1, b1, a2, b2}, 8, 0.7);
      parts += r.value[0];
      indicators += r.error_indicator;
    }
  }
  CHECK(std::abs(parts - whole.value[0]) <= indicators);
}

TEST_CASE("germ error exponents") {
  SUBCASE("smooth field and path") {
    const auto fit = germ_error_exponent(product_field([](double x) { return std::cos(x); }),
                                         smooth_theta(), {0.1, 0.5}, 0.2, 5, 10);
    CHECK(fit.exponent >= 3.0 - 0.2);
  }
  SUBCASE("Lipschitz field and Hoelder path") {
    const double beta = 0.5;
    const auto fit = germ_error_exponent(product_field([](double x) { return std::abs(x); }),
                                         weierstrass(beta), {0.1, 0.5}, 0.2, 5, 10);
    CHECK(fit.exponent >= 2.0 + beta - 0.2);
  }
  SUBCASE("field constant in x") {
    const auto fit = germ_error_exponent(product_field([](double) { return 1.5; }), smooth_theta(),
                                         {0.1, 0.5}, 0.2, 5, 8);
    CHECK(fit.exact);
  }
  CHECK_THROWS_AS(germ_error_exponent(product_field([](double x) { return x; }), smooth_theta(),
                                      {0.0, 0.0}, 0.5, 4),
                  InsufficientDataError);
}

TEST_CASE("empirical stability of the nonlinear Young integral") {
  const auto g = [](double x) { return std::cos(x); };
  TwoParamField A = product_field(g);
  A.eval_grad_x = [](double t1, double t2, std::span<const double> x, std::span<double> out) {
    out[0] = -t1 * t2 * std::sin(x[0]);
  };
  const auto theta = smooth_theta();
  const auto base = nl_young_integral(A, theta, Rect{}, 9);
  const TimeGrid proxy_grid(1.0, 32);
  std::vector<double> ratios;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    TwoParamField B;
    B.eval = [eps](double t1, double t2, std::span<const double> x, std::span<double> out) {
      out[0] = t1 * t2 * (std::cos(x[0]) + eps * std::sin(3 * x[0]));
    };
    B.eval_grad_x = [eps](double t1, double t2, std::span<const double> x, std::span<double> out) {
      out[0] = t1 * t2 * (-std::sin(x[0]) + 3 * eps * std::cos(3 * x[0]));
    };
    const PathFunction pert = [eps](double t, std::span<double> out) {
      out[0] = std::sin(2.0 * t) + eps * std::cos(3.0 * t);
    };
    const PathFunction delta = [eps](double t, std::span<double> out) { out[0] = eps * std::cos(3.0 * t); };
    const auto other = nl_young_integral(B, pert, Rect{}, 9);
    const double proxy = field_distance_proxy(A, B, proxy_grid, -2.0, 2.0, 41) +
                         path_holder_norm(delta, 1, proxy_grid, 1.0);
    ratios.push_back(std::abs(other.value[0] - base.value[0]) / proxy);
  }
  std::vector<double> sorted = ratios;
  std::sort(sorted.begin(), sorted.end());
  const double mid = 0.5 * (sorted[1] + sorted[2]);
  for (double r : ratios) {
    CHECK(r >= 0.5 * mid);
    CHECK(r <= 1.5 * mid);
  }
}
