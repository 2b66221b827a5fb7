#include "vlab/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vlab/errors.hpp"
#include "vlab/numerics.hpp"
#include "vlab/parallel.hpp"

namespace vlab {

RegularityPrediction predict_kappa(double H, double zeta, double eta, double delta, double chi) {
  if (!(H > 0.0) || !std::isfinite(H)) throw DomainError("regularity", "H must be positive");
  if (!(eta > 0.0 && eta < 0.5)) throw DomainError("regularity", "eta must lie in (0, 1/2)");
  if (!(delta >= 0.0)) throw DomainError("regularity", "delta must be >= 0");
  if (!(chi >= 0.0 && chi <= 1.0)) throw DomainError("regularity", "chi must lie in [0, 1]");
  if (!(zeta > H)) throw DomainError("regularity", "zeta <= H: no smoothing regime");
  RegularityPrediction r{H, zeta, eta, delta, chi, 0.0};
  if (std::isinf(zeta)) {
    // eta (zeta/H - 1)/(zeta + eta) -> eta/H; the weight branch divided by zeta -> 0.
    r.kappa_star = delta == 0.0 ? eta / H : 0.0;
    return r;
  }
  const double noise_branch = eta * (zeta / H - 1.0);
  if (delta == 0.0) {
    r.kappa_star = noise_branch / (zeta + eta);
  } else {
    const double weight_branch = std::min(1.0, delta) * chi * (1.0 + eta / H);
    r.kappa_star = std::min(weight_branch, noise_branch) / (zeta + eta);
  }
  return r;
}

std::vector<double> default_eta_grid() {
  std::vector<double> etas;
  for (int k = 1; k <= 9; ++k) etas.push_back(0.05 * k);
  return etas;
}

double best_kappa(double H, double zeta, double delta, double chi,
                  std::span<const double> etas) {
  if (etas.empty()) throw InsufficientDataError("regularity", "empty eta grid");
  double best = -std::numeric_limits<double>::infinity();
  for (double eta : etas) best = std::max(best, predict_kappa(H, zeta, eta, delta, chi).kappa_star);
  return best;
}

std::size_t jackknife_block_size(std::size_t ensemble_size) {
  return std::max<std::size_t>(1, std::min<std::size_t>(100, ensemble_size / 10));
}

namespace {

struct GroupSums {
  std::size_t count = 0;
  std::vector<double> pow_sum;
  std::vector<cplx> sum;
};

struct Shape {
  std::vector<std::pair<double, double>> pairs;
  std::vector<double> xi_norm;
};

Shape shape_of(const OccupationFT& ft) {
  Shape s{ft.pairs, std::vector<double>(ft.spectral.size())};
  for (std::size_t k = 0; k < ft.spectral.size(); ++k) s.xi_norm[k] = ft.spectral.norm(k);
  return s;
}

void accumulate(GroupSums& g, const OccupationFT& ft, double p) {
  if (g.count == 0) {
    g.pow_sum.assign(ft.values.size(), 0.0);
    g.sum.assign(ft.values.size(), cplx(0.0, 0.0));
  } else if (g.sum.size() != ft.values.size()) {
    throw DomainError("regularity", "ensemble members have different shapes");
  }
  for (std::size_t i = 0; i < ft.values.size(); ++i) {
    g.pow_sum[i] += std::pow(std::abs(ft.values[i]), p);
    g.sum[i] += ft.values[i];
  }
  ++g.count;
}

EnsembleStats finalize(const std::vector<GroupSums>& groups, const Shape& shape, double p) {
  const std::size_t G = groups.size();
  const std::size_t size = groups.front().sum.size();
  std::size_t total_count = 0;
  std::vector<double> pow_total(size, 0.0);
  std::vector<cplx> total(size, cplx(0.0, 0.0));
  for (const auto& g : groups) {
    if (g.sum.size() != size) throw DomainError("regularity", "ensemble members differ in shape");
    total_count += g.count;
    for (std::size_t i = 0; i < size; ++i) {
      pow_total[i] += g.pow_sum[i];
      total[i] += g.sum[i];
    }
  }
  const double n = static_cast<double>(total_count);
  EnsembleStats out;
  out.moment.pairs = out.mean.pairs = shape.pairs;
  out.moment.xi_norm = out.mean.xi_norm = shape.xi_norm;
  out.moment.p = p;
  out.moment.ensemble = out.mean.ensemble = total_count;
  out.moment.moment.resize(size);
  out.moment.stderr_.resize(size);
  out.mean.mean.resize(size);
  out.mean.stderr_.resize(size);
  const double factor = G > 1 ? static_cast<double>(G - 1) / static_cast<double>(G) : 0.0;
  std::vector<double> theta(G);
  std::vector<cplx> mu(G);
  for (std::size_t i = 0; i < size; ++i) {
    out.moment.moment[i] = std::pow(pow_total[i] / n, 1.0 / p);
    out.mean.mean[i] = total[i] / n;
    if (G < 2) continue;
    double theta_bar = 0.0;
    cplx mu_bar(0.0, 0.0);
    for (std::size_t g = 0; g < G; ++g) {
      const double rest = n - static_cast<double>(groups[g].count);
      theta[g] = std::pow(std::max(pow_total[i] - groups[g].pow_sum[i], 0.0) / rest, 1.0 / p);
      mu[g] = (total[i] - groups[g].sum[i]) / rest;
      theta_bar += theta[g];
      mu_bar += mu[g];
    }
    theta_bar /= static_cast<double>(G);
    mu_bar /= static_cast<double>(G);
    double v_theta = 0.0;
    double v_mu = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      v_theta += (theta[g] - theta_bar) * (theta[g] - theta_bar);
      v_mu += std::norm(mu[g] - mu_bar);
    }
    out.moment.stderr_[i] = std::sqrt(factor * v_theta);
    out.mean.stderr_[i] = std::sqrt(factor * v_mu);
  }
  return out;
}

std::vector<GroupSums> group_ensemble(std::span<const OccupationFT> ensemble, double p) {
  if (ensemble.size() < 2) throw InsufficientDataError("regularity", "ensemble needs >= 2 paths");
  const std::size_t block = jackknife_block_size(ensemble.size());
  std::vector<GroupSums> groups((ensemble.size() + block - 1) / block);
  for (std::size_t m = 0; m < ensemble.size(); ++m) accumulate(groups[m / block], ensemble[m], p);
  return groups;
}

void check_p(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError("regularity", "moment p must be >= 1");
}

}  // namespace

MomentCurve lp_moment_curve(std::span<const OccupationFT> ensemble, double p) {
  check_p(p);
  return finalize(group_ensemble(ensemble, p), shape_of(ensemble.front()), p).moment;
}

MeanCurve mean_curve(std::span<const OccupationFT> ensemble) {
  return finalize(group_ensemble(ensemble, 2.0), shape_of(ensemble.front()), 2.0).mean;
}

EnsembleStats ensemble_statistics(std::size_t ensemble_size, double p,
                                  const std::function<OccupationFT(std::size_t)>& produce) {
  check_p(p);
  if (ensemble_size < 2) throw InsufficientDataError("regularity", "ensemble needs >= 2 paths");
  const std::size_t block = jackknife_block_size(ensemble_size);
  std::vector<GroupSums> groups((ensemble_size + block - 1) / block);
  std::vector<Shape> shapes(groups.size());
  parallel_for(groups.size(), [&](std::size_t g) {
    const std::size_t hi = std::min(ensemble_size, (g + 1) * block);
    for (std::size_t m = g * block; m < hi; ++m) {
      const OccupationFT ft = produce(m);
      if (m == g * block) shapes[g] = shape_of(ft);
      accumulate(groups[g], ft, p);
    }
  });
  return finalize(groups, shapes.front(), p);
}

DecayFit fit_decay(std::span<const double> xi_norm, std::span<const double> curve, double xi_min,
                   double xi_max, double p_moment) {
  if (xi_norm.size() != curve.size()) {
    throw DomainError("regularity", "frequency and curve lengths differ");
  }
  std::vector<double> lx;
  std::vector<double> ly;
  std::set<double> distinct;
  for (std::size_t k = 0; k < xi_norm.size(); ++k) {
    if (xi_norm[k] < xi_min || xi_norm[k] > xi_max) continue;
    if (!(curve[k] > 0.0) || !std::isfinite(curve[k])) {
      throw DomainError("regularity", "curve must be positive inside the fit window");
    }
    lx.push_back(std::log1p(xi_norm[k]));
    ly.push_back(std::log(curve[k]));
    distinct.insert(xi_norm[k]);
  }
  if (distinct.size() < 6) {
    throw InsufficientDataError("regularity", "decay fit needs >= 6 frequency magnitudes, got " +
                                                  std::to_string(distinct.size()));
  }
  const LinearFit f = fit_line(lx, ly);
  DecayFit out;
  out.exponent = -f.slope;
  out.intercept = f.intercept;
  out.r_squared = f.r_squared;
  out.xi_range = {*distinct.begin(), *distinct.rbegin()};
  out.p_moment = p_moment;
  out.points = lx.size();
  return out;
}

double fit_time_exponent(std::span<const double> gaps, std::span<const double> moments) {
  if (gaps.size() != moments.size()) throw DomainError("regularity", "gap and moment lengths differ");
  if (gaps.size() < 5) throw InsufficientDataError("regularity", "time fit needs >= 5 gaps");
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    if (!(gaps[i] > 0.0) || !(moments[i] > 0.0)) {
      throw DomainError("regularity", "gaps and moments must be positive");
    }
    lx.push_back(std::log(gaps[i]));
    ly.push_back(std::log(moments[i]));
  }
  return fit_line(lx, ly).slope;
}

CharFnDecay char_fn_decay(std::span<const double> samples, std::span<const double> weights,
                          const SpectralGrid& spectral, double xi_min, double xi_max) {
  const std::size_t d = spectral.dim();
  const std::size_t M = weights.size();
  if (samples.size() != M * d) throw DomainError("regularity", "samples must be M x d");
  if (M < 2) throw InsufficientDataError("regularity", "need >= 2 samples");
  const std::size_t K = spectral.size();
  const std::size_t block = jackknife_block_size(M);
  const std::size_t G = (M + block - 1) / block;
  std::vector<cplx> group_sum(G * K, cplx(0.0, 0.0));
  std::vector<std::size_t> group_count(G, 0);
  for (std::size_t m = 0; m < M; ++m) {
    const std::size_t g = m / block;
    ++group_count[g];
    for (std::size_t k = 0; k < K; ++k) {
      double phase = 0.0;
      for (std::size_t a = 0; a < d; ++a) phase += spectral.point(k)[a] * samples[m * d + a];
      group_sum[g * K + k] += weights[m] * cplx(std::cos(phase), std::sin(phase));
    }
  }
  CharFnDecay out;
  out.xi_norm.resize(K);
  out.curve.resize(K);
  out.stderr_.resize(K);
  const double n = static_cast<double>(M);
  for (std::size_t k = 0; k < K; ++k) {
    out.xi_norm[k] = spectral.norm(k);
    cplx total(0.0, 0.0);
    for (std::size_t g = 0; g < G; ++g) total += group_sum[g * K + k];
    out.curve[k] = std::abs(total / n);
    std::vector<double> theta(G);
    double bar = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      theta[g] = std::abs((total - group_sum[g * K + k]) / (n - static_cast<double>(group_count[g])));
      bar += theta[g];
    }
    bar /= static_cast<double>(G);
    double v = 0.0;
    for (double t : theta) v += (t - bar) * (t - bar);
    out.stderr_[k] = G > 1 ? std::sqrt(v * static_cast<double>(G - 1) / static_cast<double>(G)) : 0.0;
  }
  std::vector<double> fx;
  std::vector<double> fy;
  for (std::size_t k = 0; k < K; ++k) {
    if (out.curve[k] > 3.0 * out.stderr_[k] && out.curve[k] > 0.0) {
      fx.push_back(out.xi_norm[k]);
      fy.push_back(out.curve[k]);
    }
  }
  try {
    out.fit = fit_decay(fx, fy, xi_min, xi_max, 1.0);
    out.fitted = true;
  } catch (const InsufficientDataError&) {
    out.fitted = false;
  }
  return out;
}

}  // namespace vlab
