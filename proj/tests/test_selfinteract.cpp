#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "vlab/errors.hpp"
#include "vlab/selfinteract.hpp"
#include "vlab/simulate.hpp"

using namespace vlab;

namespace {

SamplePath smooth_path(std::size_t n, double horizon = 1.0) {
  TimeGrid grid(horizon, n);
  SamplePath z(grid, 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = grid.t(i);
    z(i, 0) = std::sin(3.0 * t) + 0.7 * t * t;
  }
  return z;
}

double bump(double x, double a, double s) { return a * std::exp(-x * x / (2.0 * s * s)); }

std::vector<double> nodes_of(const TimeGrid& g) {
  std::vector<double> v(g.n_nodes());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = g.t(i);
  return v;
}

double path_range(const SamplePath& z) {
  double lo = z(0, 0), hi = z(0, 0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    lo = std::min(lo, z(i, 0));
    hi = std::max(hi, z(i, 0));
  }
  return hi - lo;
}

// theta_m = u0 + sum_{i,j<m} b(u_j - u_i) dt^2 with u = theta + z, built incrementally.
std::vector<double> direct_solution(const SamplePath& z, double u0, double a, double s) {
  const std::size_t n = z.grid().n_steps();
  const double dt = z.grid().dt();
  std::vector<double> u(n + 1);
  u[0] = u0 + z(0, 0);
  double T = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    double inc = bump(0.0, a, s);
    for (std::size_t i = 0; i < m; ++i) inc += bump(u[m] - u[i], a, s) + bump(u[i] - u[m], a, s);
    T += inc * dt * dt;
    u[m + 1] = u0 + T + z(m + 1, 0);
  }
  return u;
}

}  // namespace

TEST_CASE("threshold presets") {
  const auto skew = threshold_preset(PresetName::SkewDelta0);
  const std::vector<double> xi = {3.0};
  CHECK(skew.drift.evaluate(xi)[0] == cplx(1.0, 0.0));
  CHECK(skew.h_bound == doctest::Approx(0.25));

  const auto ed = threshold_preset(PresetName::EdwardsGradDelta0, 2, 0.5, 2.0);
  const std::vector<double> xi2 = {1.5, -0.5};
  const auto v = ed.drift.evaluate(xi2);
  CHECK(v[0] == cplx(0.0, 3.0));
  CHECK(v[1] == cplx(0.0, -1.0));
  CHECK(ed.h_bound == doctest::Approx(1.0 / 6.0));
  CHECK(ed.drift.fl_delta == -1.0);

  const auto fr = threshold_preset(PresetName::EdwardsFractional, 3, 0.5);
  CHECK(fr.h_bound == doctest::Approx(1.0 / 4.5));
  CHECK(fr.delta_strict);
  CHECK(fr.drift.fl_qprime == 1.0);
  const double c = std::pow(std::numbers::pi, 0.5 - 1.5) * std::tgamma(1.25) / std::tgamma(0.25);
  const std::vector<double> xi3 = {0.0, 0.0, 10.0};
  const auto f = fr.drift.evaluate(xi3);
  CHECK(f[2].imag() == doctest::Approx(10.0 * c * std::pow(101.0, -1.25)).epsilon(1e-12));
  CHECK_THROWS_AS(threshold_preset(PresetName::EdwardsFractional, 1, 0.5), DomainError);
  CHECK_THROWS_AS(threshold_preset(PresetName::EdwardsFractional, 3, 2.0), DomainError);

  const auto dr = threshold_preset(PresetName::DurrettRogers);
  CHECK(dr.h_bound == doctest::Approx(1.0 / 3.0));
  // <xi> |b_hat| stays bounded by 2, so delta = 1 is attained in FL_infinity.
  for (double x : {0.5, 1.0, 10.0, 1e4}) {
    const std::vector<double> p = {x};
    CHECK(std::sqrt(1.0 + x * x) * std::abs(dr.drift.evaluate(p)[0]) <= 2.0 + 1e-12);
  }
}

TEST_CASE("example condition reproduces the preset thresholds") {
  struct Case {
    PresetName name;
    std::size_t dim;
  };
  for (Case cs : {Case{PresetName::SkewDelta0, 1}, Case{PresetName::EdwardsGradDelta0, 1},
                  Case{PresetName::EdwardsGradDelta0, 3}, Case{PresetName::EdwardsFractional, 3},
                  Case{PresetName::DurrettRogers, 1}}) {
    const auto p = threshold_preset(cs.name, cs.dim, 0.5);
    const double delta = p.drift.fl_delta;
    CHECK(example_condition(0.98 * p.h_bound, delta, p.drift.fl_qprime, cs.dim));
    CHECK_FALSE(example_condition(1.02 * p.h_bound, delta, p.drift.fl_qprime, cs.dim));
  }
  CHECK_THROWS_AS(example_condition(1.2, 0.0, INFINITY, 1), DomainError);
}

TEST_CASE("field of a Gaussian bump matches the direct double sum") {
  // Off-diagonal times and a path without symmetry fix the sign of the phase.
  const auto z = smooth_path(64);
  const double a = 0.8, s = 0.5;
  const auto nodes = nodes_of(z.grid());
  const std::vector<double> w(z.size(), 1.0);
  const auto sg = SpectralGrid::for_range(20.0, 2.0 * (path_range(z) + 1.0) + 4.0);
  const auto G = self_intersection_ft(z, w, sg, nodes, nodes);
  const auto A = build_field(FourierDrift::gaussian_bump(1, a, s), G);
  CHECK(A->warnings().empty());
  const double dt = z.grid().dt();
  double err = 0.0;
  double scale = 0.0;
  std::vector<double> out(1), im(1);
  for (auto [i1, i2] : {std::pair<std::size_t, std::size_t>{20, 50}, {50, 20}, {64, 10}, {33, 33}}) {
    for (double x : {-0.7, 0.0, 0.4}) {
      double ref = 0.0;
      for (std::size_t r1 = 0; r1 < i1; ++r1) {
        for (std::size_t r2 = 0; r2 < i2; ++r2) ref += bump(x + z(r2, 0) - z(r1, 0), a, s) * dt * dt;
      }
      A->eval(i1, i2, std::vector<double>{x}, out, im);
      err = std::max(err, std::abs(out[0] - ref));
      scale = std::max(scale, std::abs(ref));
      CHECK(std::abs(im[0]) <= 1e-10);
    }
  }
  CHECK(scale > 0.05);
  CHECK(err <= 1e-10);
}

TEST_CASE("constant path gives t1 t2 b") {
  TimeGrid grid(1.0, 16);
  SamplePath z(grid, 1);
  for (std::size_t i = 0; i <= 16; ++i) z(i, 0) = 0.3;
  const auto nodes = nodes_of(grid);
  const std::vector<double> w(z.size(), 1.0);
  const auto sg = SpectralGrid::for_range(20.0, 8.0);
  const auto A = build_field(FourierDrift::gaussian_bump(1, 1.0, 0.5), self_intersection_ft(z, w, sg, nodes, nodes));
  std::vector<double> out(1);
  for (double x : {-1.0, 0.0, 0.25, 1.5}) {
    A->eval(8, 12, std::vector<double>{x}, out);
    CHECK(out[0] == doctest::Approx(0.5 * 0.75 * bump(x, 1.0, 0.5)).epsilon(1e-10));
  }
  // The field, through the generic interface, is only defined at nodes.
  const auto f = A->as_field();
  CHECK_THROWS_AS(f.eval(0.51, 0.5, std::vector<double>{0.0}, out), AlignmentError);
}

TEST_CASE("build_field rejects asymmetric inputs and flags truncation") {
  const auto z = smooth_path(16);
  const auto nodes = nodes_of(z.grid());
  const std::vector<double> w(z.size(), 1.0);
  const auto half = SpectralGrid::from_points(1, {0.5, 1.0, 1.5}, {0.5, 0.5, 0.5});
  CHECK_THROWS_AS(build_field(FourierDrift::gaussian_bump(1, 1.0, 1.0), self_intersection_ft(z, w, half, nodes, nodes)),
                  DomainError);
  const auto sg = SpectralGrid::uniform(8.0, 32);
  FourierDrift odd_real;
  odd_real.b_hat = [](std::span<const double> xi, std::span<cplx> out) { out[0] = xi[0]; };
  CHECK_THROWS_AS(build_field(odd_real, self_intersection_ft(z, w, sg, nodes, nodes)), DomainError);

  const auto skew = threshold_preset(PresetName::SkewDelta0).drift;
  const auto A = build_field(skew, self_intersection_ft(z, w, SpectralGrid::for_range(4.0, 6.0), nodes, nodes));
  CHECK(A->tail_fraction() > 0.01);
  CHECK_FALSE(A->warnings().empty());
}

TEST_CASE("zero drift and odd drifts leave u = u0 + z") {
  const auto z = smooth_path(32);
  const std::vector<double> w(z.size(), 1.0);
  const auto sg = SpectralGrid::for_range(16.0, 8.0);
  SolverConfig cfg;
  cfg.u0 = {0.25};
  FourierDrift zero;
  zero.b_hat = [](std::span<const double>, std::span<cplx> out) { out[0] = 0.0; };
  const auto r0 = solve_drift(zero, z, w, sg, cfg);
  CHECK(r0.total_iterations == 1);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(r0.u(i, 0) == doctest::Approx(0.25 + z(i, 0)).epsilon(1e-15));

  const auto ed = threshold_preset(PresetName::EdwardsGradDelta0).drift;
  const auto r1 = solve_drift(ed, z, w, sg, cfg);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(r1.theta(i, 0) - 0.25) <= 1e-14);
}

TEST_CASE("spectral and corner solvers agree with the direct recursion") {
  const auto z = smooth_path(24);
  const auto nodes = nodes_of(z.grid());
  const std::vector<double> w(z.size(), 1.0);
  const double a = 1.5, s = 0.4;
  const auto sg = SpectralGrid::for_range(25.0, 2.0 * (path_range(z) + 2.0) + 4.0);
  const auto A = build_field(FourierDrift::gaussian_bump(1, a, s), self_intersection_ft(z, w, sg, nodes, nodes));
  SolverConfig cfg;
  cfg.u0 = {0.1};
  cfg.picard_tol = 1e-12;
  const auto fast = solve_picard(*A, cfg, z);
  const auto generic = solve_picard(A->as_field(), cfg, z);
  const auto ref = direct_solution(z, 0.1, a, s);
  for (std::size_t i = 0; i < z.size(); ++i) {
    CHECK(std::abs(fast.u(i, 0) - generic.u(i, 0)) <= 1e-10);
    CHECK(std::abs(fast.u(i, 0) - ref[i]) <= 1e-9);
  }
  CHECK(fast.defect <= 2.0 * cfg.picard_tol);
  CHECK(generic.defect <= 2.0 * cfg.picard_tol);
  CHECK(std::abs(ref.back() - 0.1 - z(24, 0)) > 0.1);
}

TEST_CASE("smooth drift converges to the continuum solution") {
  const double a = 1.0, s = 0.5;
  const auto fine = direct_solution(smooth_path(2048), 0.0, a, s);
  std::vector<double> errs;
  for (std::size_t n : {64, 128, 256}) {
    const auto z = smooth_path(n);
    const std::vector<double> w(z.size(), 1.0);
    const auto sg = SpectralGrid::for_range(20.0, 2.0 * (path_range(z) + 2.0) + 4.0);
    SolverConfig cfg;
    cfg.u0 = {0.0};
    const auto r = solve_drift(FourierDrift::gaussian_bump(1, a, s), z, w, sg, cfg);
    double e = 0.0;
    for (std::size_t i = 0; i <= n; ++i) e = std::max(e, std::abs(r.u(i, 0) - fine[i * (2048 / n)]));
    errs.push_back(e);
  }
  CHECK(errs[0] <= 0.05);
  CHECK(errs[1] < 0.7 * errs[0]);
  CHECK(errs[2] < 0.7 * errs[1]);
}

TEST_CASE("self-repelling delta interaction on rough fBm") {
  TimeGrid grid(1.0, 256);
  FbmCholeskySampler sampler(0.2, grid);
  const auto z = sampler.sample(1, 7);
  const std::vector<double> w(z.size(), 1.0);
  const auto sg = SpectralGrid::for_range(64.0, 1.5 * path_range(z) + 1.0);
  const auto skew = threshold_preset(PresetName::SkewDelta0).drift;
  SolverConfig cfg;
  cfg.u0 = {0.0};
  const auto r = solve_drift(skew, z, w, sg, cfg);
  CHECK(r.defect <= 2.0 * cfg.picard_tol);
  CHECK(std::isfinite(r.u(256, 0)));
  double spread = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) spread = std::max(spread, std::abs(r.theta(i, 0)));
  CHECK(spread > 1e-3);

  // A coarser window reproduces the same fixed point.
  SolverConfig c2 = cfg;
  c2.step_tau = 0.25;
  SolverConfig c3 = cfg;
  c3.step_tau = 0.125;
  const auto r2 = solve_drift(skew, z, w, sg, c2);
  const auto r3 = solve_drift(skew, z, w, sg, c3);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(r2.theta(i, 0) - r3.theta(i, 0)) <= 5.0 * cfg.picard_tol);
  CHECK(r3.windows.size() == 8);
}

TEST_CASE("imaginary residue of the Edwards field is negligible") {
  TimeGrid grid(1.0, 64);
  FbmCholeskySampler sampler(0.3, grid);
  const auto z = sampler.sample(1, 3);
  const auto nodes = nodes_of(grid);
  const std::vector<double> w(z.size(), 1.0);
  const auto sg = SpectralGrid::for_range(32.0, 1.5 * path_range(z) + 1.0);
  const auto A = build_field(threshold_preset(PresetName::EdwardsGradDelta0).drift.mollified(8.0),
                             self_intersection_ft(z, w, sg, nodes, nodes));
  const std::vector<double> probes = {-0.5, 0.0, 0.3, 1.0};
  CHECK(A->imag_residue(probes) <= 0.01);
}

TEST_CASE("stability experiment") {
  const auto z = smooth_path(64);
  const std::vector<double> w(z.size(), 1.0);
  const auto sg = SpectralGrid::for_range(32.0, 2.0 * (path_range(z) + 2.0) + 4.0);
  const auto b = FourierDrift::gaussian_bump(1, 1.0, 0.3);
  SolverConfig cfg;
  cfg.u0 = {0.0};

  // Shifting only u0 translates the solution, so the ratio is exactly 1.
  const std::vector<double> lv = {8.0};
  const std::vector<double> shift = {1e-3};
  const auto t0 = stability_experiment(b, lv, z, w, sg, cfg, 8.0, shift);
  CHECK(t0.rows[0].drift_distance == 0.0);
  CHECK(t0.rows[0].ratio == doctest::Approx(1.0).epsilon(1e-6));

  const std::vector<double> levels = {2.0, 4.0, 8.0};
  const auto t = stability_experiment(b, levels, z, w, sg, cfg, 32.0);
  REQUIRE(t.rows.size() == 3);
  for (std::size_t i = 1; i < 3; ++i) {
    CHECK(t.rows[i].drift_distance < t.rows[i - 1].drift_distance);
    CHECK(t.rows[i].solution_distance < t.rows[i - 1].solution_distance);
  }
  double lo = INFINITY, hi = 0.0;
  for (const auto& r : t.rows) {
    lo = std::min(lo, r.ratio);
    hi = std::max(hi, r.ratio);
  }
  CHECK(lo > 0.0);
  CHECK(hi / lo <= 10.0);
}

TEST_CASE("solver preconditions") {
  const auto z = smooth_path(8);
  const std::vector<double> w(z.size(), 1.0);
  const auto sg = SpectralGrid::uniform(4.0, 8);
  const auto b = FourierDrift::gaussian_bump(1, 1.0, 1.0);
  SolverConfig cfg;
  cfg.u0 = {0.0, 0.0};
  CHECK_THROWS_AS(solve_drift(b, z, w, sg, cfg), DomainError);
  cfg.u0 = {0.0};
  cfg.gamma = 0.4;
  CHECK_THROWS_AS(solve_drift(b, z, w, sg, cfg), DomainError);
  CHECK_THROWS_AS(b.mollified(0.0), DomainError);

  const auto nodes = nodes_of(z.grid());
  const std::vector<double> part(nodes.begin(), nodes.begin() + 4);
  const auto A = build_field(b, self_intersection_ft(z, w, sg, part, part));
  CHECK_THROWS_AS(solve_picard(*A, SolverConfig{}, z), DomainError);
}
