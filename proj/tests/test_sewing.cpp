#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "vlab/errors.hpp"
#include "vlab/sewing.hpp"

using namespace vlab;

namespace {

const std::vector<std::pair<double, double>> kUnit = {{0.0, 1.0}};

Germ1D riemann_germ() {
  Germ1D g;
  g.evaluate = [](double u, double v, std::span<double> out) { out[0] = u * (v - u); };
  g.kappa1 = 2.0;
  return g;
}

Germ1D additive_germ() {
  Germ1D g;
  g.dim = 2;
  g.evaluate = [](double u, double v, std::span<double> out) {
    out[0] = std::sin(3.0 * v) - std::sin(3.0 * u);
    out[1] = v * v - u * u;
  };
  return g;
}

struct BrownianGerm {
  VolterraModel model;
  VolterraRecord record;
  std::vector<double> rho;
  Germ1D germ;
};

BrownianGerm brownian_germ(std::size_t n, double xi, std::uint64_t path) {
  const TimeGrid grid(1.0, n);
  BrownianGerm b{VolterraModel{}, {SamplePath(grid, 1), {}, {}, {}}, {}, {}};
  b.record = simulate_volterra_record(b.model, grid, sample_brownian(grid, 1, 17, path));
  b.rho.assign(grid.n_nodes(), 1.0);
  const double f[] = {xi};
  b.germ = frozen_occupation_germ(b.model, b.record, b.rho, 0.0, f);
  return b;
}

}  // namespace

TEST_CASE("Riemann germ converges to the integral") {
  const auto g = riemann_germ();
  const double T = 1.0;
  const auto s10 = sewing_sum(g, 0.0, T, 10);
  CHECK(std::abs(s10[0] - T * T / 2.0) <= std::exp2(-10.0) * T * T);
  const auto s = sewing_sum(g, 0.25, 0.75, 12);
  CHECK(s[0] == doctest::Approx((0.75 * 0.75 - 0.25 * 0.25) / 2.0).epsilon(1e-3));
  const auto rate = sewing_rate(g, 0.0, 1.0, 4, 12);
  CHECK_FALSE(rate.exact);
  CHECK(rate.rate >= 1.0 - 1e-9);
}

TEST_CASE("additive germ is level independent") {
  const auto g = additive_germ();
  for (unsigned level = 0; level <= 10; ++level) {
    const auto s = sewing_sum(g, 0.1, 0.9, level);
    CHECK(s[0] == doctest::Approx(std::sin(2.7) - std::sin(0.3)).epsilon(1e-14));
    CHECK(s[1] == doctest::Approx(0.8).epsilon(1e-14));
  }
  const auto rate = sewing_rate(g, 0.1, 0.9, 2, 8);
  CHECK(rate.exact);
  CHECK(std::isinf(rate.rate));
  CHECK(rate.envelope(3) == 0.0);
}

TEST_CASE("sewing preconditions") {
  const auto g = riemann_germ();
  CHECK_THROWS_AS(sewing_sum(g, 0.0, 1.0, 17), DomainError);
  CHECK_THROWS_AS(sewing_sum(g, 1.0, 0.0, 3), DomainError);
  CHECK_THROWS_AS(sewing_rate(g, 0.0, 1.0, 3, 5), InsufficientDataError);
  CHECK(sewing_sum(g, 0.3, 0.3, 4)[0] == 0.0);
}

TEST_CASE("delta-consistency characterises additivity") {
  const std::vector<double> rs = {0.2, 0.5, 0.61};
  const auto add = additive_germ();
  for (double r : rs) {
    for (double v : germ_defect(add, 0.1, r, 0.9)) CHECK(std::abs(v) <= 1e-15);
  }
  const auto rie = riemann_germ();
  for (double r : rs) CHECK(std::abs(germ_defect(rie, 0.1, r, 0.9)[0]) > 1e-3);
  CHECK(sewing_sum(rie, 0.1, 0.9, 3)[0] != sewing_sum(rie, 0.1, 0.9, 4)[0]);

  const auto bm = brownian_germ(256, 8.0, 0);
  bool nonzero = false;
  for (double r : {0.25, 0.5, 0.75}) {
    const auto d = germ_defect(bm.germ, 0.0, r, 1.0);
    nonzero = nonzero || std::hypot(d[0], d[1]) > 1e-6;
  }
  CHECK(nonzero);
  CHECK(sewing_sum(bm.germ, 0.0, 1.0, 4)[0] != sewing_sum(bm.germ, 0.0, 1.0, 5)[0]);
}

TEST_CASE("frozen occupation germ") {
  const std::size_t n = 256;
  const double xi = 8.0;
  const auto bm = brownian_germ(n, xi, 3);
  const auto& x = bm.record.path;
  const double dt = x.grid().dt();

  SUBCASE("closed form for Brownian motion") {
    // E_u e^{i xi B_r} = e^{i xi B_u} e^{-xi^2 (r - u) / 2}.
    const std::size_t a = 64;
    const std::size_t e = 96;
    std::complex<double> want = 0.0;
    for (std::size_t r = a; r < e; ++r) {
      want += dt * std::exp(std::complex<double>(-0.5 * xi * xi * (r - a) * dt, xi * x(a, 0)));
    }
    std::vector<double> got(2);
    bm.germ.evaluate(x.grid().t(a), x.grid().t(e), got);
    CHECK(got[0] == doctest::Approx(want.real()).epsilon(1e-12));
    CHECK(got[1] == doctest::Approx(want.imag()).epsilon(1e-12));
  }

  SUBCASE("grid-level sums reproduce occupation_ft") {
    const auto sg = SpectralGrid::from_points(1, std::vector<double>{xi}, std::vector<double>{1.0});
    const std::vector<std::pair<double, double>> pairs = {{0.0, 1.0}, {0.25, 0.75}};
    const auto ft = occupation_ft(x, bm.rho, 0.0, sg, pairs);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const unsigned level = p == 0 ? 8 : 7;
      const auto s = sewing_sum(bm.germ, pairs[p].first, pairs[p].second, level);
      CHECK(std::abs(s[0] - ft.value(p, 0).real()) <= 1e-12);
      CHECK(std::abs(s[1] - ft.value(p, 0).imag()) <= 1e-12);
    }
  }

  SUBCASE("weights enter frozen at the left end") {
    std::vector<double> rho(x.size());
    for (std::size_t j = 0; j < rho.size(); ++j) rho[j] = 0.5 + 0.5 * std::cos(j * 0.1) * 0.9;
    const double f[] = {xi};
    const auto g = frozen_occupation_germ(bm.model, bm.record, rho, 2.0, f);
    const auto sg = SpectralGrid::from_points(1, std::vector<double>{xi}, std::vector<double>{1.0});
    const auto ft = occupation_ft(x, rho, 2.0, sg, kUnit);
    const auto s = sewing_sum(g, 0.0, 1.0, 8);
    CHECK(std::abs(s[0] - ft.value(0, 0).real()) <= 1e-12);
    CHECK(std::abs(s[1] - ft.value(0, 0).imag()) <= 1e-12);
  }

  CHECK_THROWS_AS(sewing_sum(bm.germ, 0.0, 1.0, 9), AlignmentError);
}

TEST_CASE("frozen germ for a Riemann-Liouville model") {
  const TimeGrid grid(1.0, 64);
  VolterraModel model;
  model.kb = KernelSpec::riemann_liouville(0.3, KernelRole::Drift);
  model.ks = KernelSpec::riemann_liouville(0.3);
  model.b = Coefficient::state_function(
      [](std::span<const double> x, std::span<double> out) { out[0] = std::sin(x[0]); });
  model.sigma = Coefficient::state_function(
      [](std::span<const double> x, std::span<double> out) { out[0] = 1.0 + 0.5 * std::cos(x[0]); });
  const auto rec = simulate_volterra_record(model, grid, sample_brownian(grid, 1, 4, 0));
  const std::vector<double> rho(grid.n_nodes(), 1.0);
  const double f[] = {5.0};
  const auto germ = frozen_occupation_germ(model, rec, rho, 0.0, f);
  const auto sg = SpectralGrid::from_points(1, std::vector<double>{5.0}, std::vector<double>{1.0});
  const auto ft = occupation_ft(rec.path, rho, 0.0, sg, kUnit);
  const auto s = sewing_sum(germ, 0.0, 1.0, 6);
  CHECK(std::abs(s[0] - ft.value(0, 0).real()) <= 1e-12);
  CHECK(std::abs(s[1] - ft.value(0, 0).imag()) <= 1e-12);
  // Coarse cells differ from the path functional but stay bounded by the cell mass.
  const auto coarse = sewing_sum(germ, 0.0, 1.0, 2);
  CHECK(std::hypot(coarse[0], coarse[1]) <= 1.0 + 1e-12);
}

TEST_CASE("Brownian frozen germ has a positive Cauchy rate") {
  double mean_rate = 0.0;
  const int paths = 40;
  for (int p = 0; p < paths; ++p) {
    const auto bm = brownian_germ(2048, 8.0, 100 + p);
    mean_rate += sewing_rate(bm.germ, 0.0, 1.0, 5, 10).rate / paths;
  }
  CHECK(mean_rate >= 0.4);
}

TEST_CASE("anchor offsets agree within the Cauchy envelope") {
  const auto g = riemann_germ();
  const auto r0 = sewing_rate(g, 0.0, 1.0, 4, 10);
  const auto rh = sewing_rate(g, 0.0, 1.0, 4, 10, 0.5);
  CHECK(std::abs(r0.limit[0] - rh.limit[0]) <= r0.envelope(10) + rh.envelope(10));

  const auto bm = brownian_germ(1024, 8.0, 7);
  const auto b0 = sewing_rate(bm.germ, 0.0, 1.0, 4, 8);
  const auto bh = sewing_rate(bm.germ, 0.0, 1.0, 4, 8, 0.5);
  const double gap = std::hypot(b0.limit[0] - bh.limit[0], b0.limit[1] - bh.limit[1]);
  CHECK(gap <= b0.envelope(8) + bh.envelope(8));
}
