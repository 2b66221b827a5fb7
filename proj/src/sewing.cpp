#include "vlab/sewing.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "vlab/errors.hpp"
#include "vlab/numerics.hpp"
#include "vlab/parallel.hpp"

namespace vlab {

namespace {

void check_germ(const Germ1D& germ) {
  if (!germ.evaluate) throw DomainError("sewing", "germ has no evaluate function");
  if (germ.dim == 0) throw DomainError("sewing", "germ dimension must be positive");
}

double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

std::vector<double> sewing_sum(const Germ1D& germ, double s, double t, unsigned level,
                               double anchor) {
  check_germ(germ);
  if (level > kMaxSewingLevel) {
    throw DomainError("sewing", "level " + std::to_string(level) + " exceeds 16");
  }
  if (!(t >= s)) throw DomainError("sewing", "need s <= t");
  if (!(anchor >= 0.0 && anchor < 1.0)) throw DomainError("sewing", "anchor must lie in [0, 1)");

  const std::size_t n = std::size_t{1} << level;
  const double h = (t - s) / static_cast<double>(n);
  std::vector<double> points;
  points.reserve(n + 2);
  points.push_back(s);
  if (anchor == 0.0) {
    for (std::size_t i = 1; i < n; ++i) points.push_back(s + static_cast<double>(i) * h);
  } else {
    for (std::size_t i = 0; i < n; ++i) points.push_back(s + (static_cast<double>(i) + anchor) * h);
  }
  points.push_back(t);

  const std::size_t cells = points.size() - 1;
  const std::size_t d = germ.dim;
  std::vector<double> values(d * cells);  // component-major
  parallel_for(cells, [&](std::size_t c) {
    std::vector<double> out(d);
    germ.evaluate(points[c], points[c + 1], out);
    for (std::size_t k = 0; k < d; ++k) values[k * cells + c] = out[k];
  });
  std::vector<double> sum(d);
  for (std::size_t k = 0; k < d; ++k) {
    sum[k] = pairwise_sum(std::span<const double>(values).subspan(k * cells, cells));
  }
  return sum;
}

std::vector<double> germ_defect(const Germ1D& germ, double s, double r, double t) {
  check_germ(germ);
  if (!(s <= r && r <= t)) throw DomainError("sewing", "need s <= r <= t");
  std::vector<double> st(germ.dim), sr(germ.dim), rt(germ.dim);
  germ.evaluate(s, t, st);
  germ.evaluate(s, r, sr);
  germ.evaluate(r, t, rt);
  for (std::size_t k = 0; k < germ.dim; ++k) st[k] -= sr[k] + rt[k];
  return st;
}

double SewingRate::envelope(unsigned level) const {
  if (exact) return 0.0;
  const double d = std::exp2(intercept - rate * static_cast<double>(level));
  return rate > 0.0 ? d / (1.0 - std::exp2(-rate)) : std::numeric_limits<double>::infinity();
}

SewingRate sewing_rate(const Germ1D& germ, double s, double t, unsigned level_min,
                       unsigned level_max, double anchor) {
  if (level_max < level_min || level_max - level_min + 1 < 4) {
    throw InsufficientDataError("sewing", "sewing_rate needs at least 4 levels");
  }
  SewingRate out;
  std::vector<std::vector<double>> sums;
  for (unsigned l = level_min; l <= level_max; ++l) {
    out.levels.push_back(l);
    sums.push_back(sewing_sum(germ, s, t, l, anchor));
  }
  out.limit = sums.back();
  double scale = 1.0;
  for (const auto& v : sums) scale = std::max(scale, norm(v));

  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i + 1 < sums.size(); ++i) {
    std::vector<double> diff(germ.dim);
    for (std::size_t k = 0; k < germ.dim; ++k) diff[k] = sums[i + 1][k] - sums[i][k];
    const double dn = norm(diff);
    out.differences.push_back(dn);
    if (dn > 1e-13 * scale) {
      x.push_back(static_cast<double>(out.levels[i]));
      y.push_back(std::log2(dn));
    }
  }
  if (x.size() < 2) {
    out.exact = x.empty();
    if (out.exact) {
      out.rate = std::numeric_limits<double>::infinity();
      return out;
    }
    throw InsufficientDataError("sewing", "fewer than two resolvable level differences");
  }
  const auto fit = fit_line(x, y);
  out.rate = -fit.slope;
  out.intercept = fit.intercept;
  return out;
}

namespace {

struct FrozenGerm {
  TimeGrid grid;
  std::size_t d = 1;
  std::size_t m = 1;
  KernelWeights wb;
  KernelWeights ws;
  std::vector<double> x;      // (n+1) x d
  std::vector<double> drift;  // n x d
  std::vector<double> sigma;  // n x d x m
  std::vector<double> noise;  // n x d, sigma_j dB_j
  std::vector<double> rho_pow;
  std::vector<double> xi;

  void operator()(double s, double t, std::span<double> out) const {
    const std::size_t a = grid.index_of(s);
    const std::size_t e = grid.index_of(t);
    out[0] = 0.0;
    out[1] = 0.0;
    if (e <= a) return;
    const double dt = grid.dt();
    std::vector<double> sx(m, 0.0);  // sigma_a^T xi
    for (std::size_t l = 0; l < m; ++l) {
      for (std::size_t k = 0; k < d; ++k) sx[l] += sigma[(a * d + k) * m + l] * xi[k];
    }
    double sx2 = 0.0;
    for (double v : sx) sx2 += v * v;
    double re = 0.0;
    double im = 0.0;
    for (std::size_t r = a; r < e; ++r) {
      double var = 0.0;
      for (std::size_t j = a; j < r; ++j) var += ws(r, j) * ws(r, j) * dt;
      double phase = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        double mean = x[r * d + k];
        for (std::size_t j = a; j < r; ++j) {
          mean -= wb(r, j) * (drift[j * d + k] - drift[a * d + k]) * dt + ws(r, j) * noise[j * d + k];
        }
        phase += xi[k] * mean;
      }
      const double amp = std::exp(-0.5 * var * sx2);
      re += amp * std::cos(phase);
      im += amp * std::sin(phase);
    }
    out[0] = dt * rho_pow[a] * re;
    out[1] = dt * rho_pow[a] * im;
  }
};

}  // namespace

Germ1D frozen_occupation_germ(const VolterraModel& model, const VolterraRecord& record,
                              std::span<const double> weights, double delta,
                              std::span<const double> xi) {
  const TimeGrid& grid = record.path.grid();
  const std::size_t n = grid.n_steps();
  const std::size_t d = model.dim;
  const std::size_t m = model.noise_dim;
  if (record.path.dim() != d || xi.size() != d) {
    throw DomainError("sewing", "frequency, path and model dimensions disagree");
  }
  if (record.drift.size() != n * d || record.diffusion.size() != n * d * m ||
      record.increments.size() != n * m) {
    throw DomainError("sewing", "simulation record does not match the model");
  }
  if (weights.size() != grid.n_nodes()) {
    throw DomainError("sewing", "weights must have one entry per grid node");
  }
  if (delta < 0.0) throw DomainError("sewing", "delta must be non-negative");

  auto g = std::make_shared<FrozenGerm>(FrozenGerm{
      grid, d, m, KernelWeights(model.kb, grid, KernelRole::Drift),
      KernelWeights(model.ks, grid, KernelRole::Diffusion), record.path.values(), record.drift,
      record.diffusion, std::vector<double>(n * d, 0.0), std::vector<double>(grid.n_nodes()),
      std::vector<double>(xi.begin(), xi.end())});
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < d; ++k) {
      double acc = 0.0;
      for (std::size_t l = 0; l < m; ++l) {
        acc += record.diffusion[(j * d + k) * m + l] * record.increments[j * m + l];
      }
      g->noise[j * d + k] = acc;
    }
  }
  for (std::size_t j = 0; j < weights.size(); ++j) g->rho_pow[j] = std::pow(weights[j], delta);

  Germ1D germ;
  germ.dim = 2;
  germ.evaluate = [g](double s, double t, std::span<double> out) { (*g)(s, t, out); };
  germ.kappa2 = 1.0;
  return germ;
}

}  // namespace vlab
