#include "experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <set>

#include "config.hpp"
#include "vlab/errors.hpp"
#include "vlab/kernels.hpp"
#include "vlab/numerics.hpp"
#include "vlab/occupation.hpp"
#include "vlab/parallel.hpp"
#include "vlab/regularity.hpp"
#include "vlab/selfinteract.hpp"
#include "vlab/sewing.hpp"
#include "vlab/simulate.hpp"
#include "vlab/young2d.hpp"

namespace vlab::cli {

using nlohmann::json;

namespace {

std::string num(double v) { return format_number(v); }

std::size_t as_size(const json& j) { return static_cast<std::size_t>(j.get<long long>()); }

std::vector<double> as_vector(const json& j) { return j.get<std::vector<double>>(); }

TimeGrid make_grid(const json& c) {
  return TimeGrid(c["grid"]["horizon"].get<double>(), as_size(c["grid"]["n_steps"]));
}

// Driving paths of every command: Brownian motion, fBm, or a Volterra Ito process.
class PathSource {
 public:
  explicit PathSource(const json& c)
      : grid_(make_grid(c)),
        type_(c["process"]["type"]),
        dim_(as_size(c["process"]["dim"])),
        seed_(static_cast<std::uint64_t>(c["seed"].get<long long>())),
        x0_(c["process"]["x0"]) {
    const json& p = c["process"];
    const double sc = p["diffusion"]["constant"];
    const double power = p["diffusion"]["power"];
    sigma_ = [sc, power](double x) { return power == 0.0 ? sc : sc * std::pow(std::max(x, 0.0), power); };
    if (type_ == "fbm") {
      const std::string sampler = p["sampler"];
      const bool chol = sampler == "cholesky" ||
                        (sampler == "auto" && grid_.n_steps() <= FbmCholeskySampler::kMaxSteps);
      if (chol) {
        cholesky_ = std::make_unique<FbmCholeskySampler>(p["hurst"].get<double>(), grid_);
      } else {
        circulant_ = std::make_unique<FbmCirculantSampler>(p["hurst"].get<double>(), grid_);
      }
    }
    model_.dim = dim_;
    model_.noise_dim = dim_;
    const double x0 = x0_;
    model_.g = [x0](double, std::size_t) { return x0; };
    if (type_ == "volterra") {
      if (dim_ != 1) throw DomainError("cli", "process.dim must be 1 for a volterra process");
      model_.ks = kernel_from_json(p["kernel"]);
      json dk = p["drift_kernel"];
      if (!dk.contains("role")) dk["role"] = "drift";
      model_.kb = kernel_from_json(dk);
      const double b0 = p["drift"]["constant"];
      const double b1 = p["drift"]["linear"];
      model_.b = (b1 == 0.0) ? Coefficient::constant_vector({b0})
                             : Coefficient::state_function(
                                   [b0, b1](std::span<const double> x, std::span<double> out) {
                                     out[0] = b0 + b1 * x[0];
                                   });
      auto sig = sigma_;
      model_.sigma = (power == 0.0)
                         ? Coefficient::constant_vector({sc})
                         : Coefficient::state_function(
                               [sig](std::span<const double> x, std::span<double> out) { out[0] = sig(x[0]); },
                               std::min(1.0, power));
    } else {
      std::vector<double> id(dim_ * dim_, 0.0);
      for (std::size_t k = 0; k < dim_; ++k) id[k * dim_ + k] = 1.0;
      model_.b = Coefficient::constant_vector(std::vector<double>(dim_, 0.0));
      model_.sigma = Coefficient::constant_vector(id);
    }
    if (c["weights"]["rho"] == "diffusion") {
      auto sig = sigma_;
      rho_ = WeightProcess::state_function(
          [sig](std::span<const double> x) { return std::min(1.0, std::abs(sig(x[0]))); },
          power == 0.0 ? 1.0 : std::min(1.0, power));
    }
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::string& type() const noexcept { return type_; }
  const VolterraModel& model() const noexcept { return model_; }

  SamplePath path(std::size_t i) const {
    if (type_ == "fbm") {
      SamplePath x = cholesky_ ? cholesky_->sample(dim_, seed_, i) : circulant_->sample(dim_, seed_, i);
      for (auto& v : x.values()) v += x0_;
      return x;
    }
    if (type_ == "brownian") {
      const auto inc = sample_brownian(grid_, dim_, seed_, i);
      SamplePath x(grid_, dim_);
      for (std::size_t k = 0; k < dim_; ++k) x(0, k) = x0_;
      for (std::size_t j = 0; j < grid_.n_steps(); ++j) {
        for (std::size_t k = 0; k < dim_; ++k) x(j + 1, k) = x(j, k) + inc[j * dim_ + k];
      }
      return x;
    }
    return record(i).path;
  }

  VolterraRecord record(std::size_t i) const {
    if (type_ == "fbm") throw DomainError("cli", "this command needs a brownian or volterra process");
    return simulate_volterra_record(model_, grid_, sample_brownian(grid_, model_.noise_dim, seed_, i));
  }

  std::vector<double> rho(const SamplePath& x) const { return rho_.evaluate(x); }

  std::vector<std::string> warnings() const {
    if (cholesky_) return cholesky_->warnings();
    if (circulant_) return circulant_->warnings();
    return {};
  }

 private:
  TimeGrid grid_;
  std::string type_;
  std::size_t dim_;
  std::uint64_t seed_;
  double x0_;
  std::function<double(double)> sigma_;
  std::unique_ptr<FbmCholeskySampler> cholesky_;
  std::unique_ptr<FbmCirculantSampler> circulant_;
  VolterraModel model_;
  WeightProcess rho_ = WeightProcess::one();
};

SpectralGrid make_spectral(const json& c, std::size_t dim) {
  const json& s = c["spectral"];
  const auto pts = as_vector(s["xi"]);
  if (!pts.empty()) {
    if (pts.size() % dim != 0) throw DomainError("cli", "spectral.xi length must be a multiple of process.dim");
    return SpectralGrid::from_points(dim, pts, std::vector<double>(pts.size() / dim, 1.0));
  }
  if (dim == 1) return SpectralGrid::uniform(s["xi_max"].get<double>(), as_size(s["n_half"]));
  return SpectralGrid::tensor(dim, s["xi_max"].get<double>(), as_size(s["n_half"]));
}

std::vector<std::pair<double, double>> make_pairs(const json& c) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : c["occupation"]["pairs"]) out.emplace_back(p[0].get<double>(), p[1].get<double>());
  return out;
}

void add_row(Table& t, std::vector<std::string> row) { t.rows.push_back(std::move(row)); }

Report run_simulate(const json& c) {
  PathSource src(c);
  const std::size_t M = as_size(c["ensemble"]["M"]);
  const std::size_t d = src.dim();
  const std::size_t n = src.grid().n_steps();
  const std::size_t shown = std::min<std::size_t>(M, 64);
  std::vector<std::vector<double>> terminal(M);
  std::vector<SamplePath> kept(shown, SamplePath(src.grid(), d));
  parallel_for(M, [&](std::size_t i) {
    auto x = src.path(i);
    terminal[i].assign(x.row(n).begin(), x.row(n).end());
    if (i < shown) kept[i] = std::move(x);
  });
  Report r;
  Table paths;
  paths.columns.push_back("t");
  for (std::size_t p = 0; p < shown; ++p) {
    for (std::size_t k = 0; k < d; ++k) paths.columns.push_back("x" + std::to_string(p) + "_" + std::to_string(k));
  }
  for (std::size_t j = 0; j <= n; ++j) {
    std::vector<std::string> row{num(src.grid().t(j))};
    for (std::size_t p = 0; p < shown; ++p) {
      for (std::size_t k = 0; k < d; ++k) row.push_back(num(kept[p](j, k)));
    }
    add_row(paths, std::move(row));
  }
  Table term;
  term.columns = {"path"};
  for (std::size_t k = 0; k < d; ++k) term.columns.push_back("x_T_" + std::to_string(k));
  std::vector<double> first(M);
  for (std::size_t i = 0; i < M; ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (double v : terminal[i]) row.push_back(num(v));
    add_row(term, std::move(row));
    first[i] = terminal[i][0];
  }
  const double mean = pairwise_sum(first) / static_cast<double>(M);
  std::vector<double> sq(M);
  for (std::size_t i = 0; i < M; ++i) sq[i] = (first[i] - mean) * (first[i] - mean);
  const double var = M > 1 ? pairwise_sum(sq) / static_cast<double>(M - 1) : 0.0;
  r.tables["paths"] = std::move(paths);
  r.tables["terminal"] = std::move(term);
  r.summary["terminal_mean"] = mean;
  r.summary["terminal_variance"] = var;
  if (c["process"]["certify"].get<bool>()) {
    const KernelSpec spec = src.type() == "volterra" ? src.model().ks
                            : src.type() == "fbm"    ? KernelSpec::fbm(c["process"]["hurst"].get<double>())
                                                     : KernelSpec::constant(1.0);
    const double H = src.type() == "brownian" ? 0.5 : c["process"]["hurst"].get<double>();
    const auto cert = certify_kernel(spec, src.grid(), H, c["process"]["certify_tolerance"].get<double>());
    r.results["certificate"] = to_json(cert);
    r.summary["certificate_valid"] = cert.valid ? 1.0 : 0.0;
  }
  r.warnings = src.warnings();
  return r;
}

Report run_occupation(const json& c) {
  PathSource src(c);
  const auto sg = make_spectral(c, src.dim());
  const auto pairs = make_pairs(c);
  const double delta = c["weights"]["delta"];
  const auto x = src.path(0);
  const auto ft = occupation_ft(x, src.rho(x), delta, sg, pairs);
  Report r;
  Table t;
  t.columns = {"pair_s", "pair_t", "k", "xi_norm", "re", "im"};
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    for (std::size_t k = 0; k < sg.size(); ++k) {
      const cplx v = ft.value(p, k);
      add_row(t, {num(pairs[p].first), num(pairs[p].second), std::to_string(k), num(sg.norm(k)), num(v.real()),
                  num(v.imag())});
    }
  }
  r.tables["transform"] = std::move(t);
  std::size_t k0 = 0;
  for (std::size_t k = 0; k < sg.size(); ++k) {
    if (sg.norm(k) < sg.norm(k0)) k0 = k;
  }
  r.summary["mass_at_smallest_xi"] = ft.value(0, k0).real();
  if (src.dim() == 1 && as_vector(c["spectral"]["xi"]).empty()) {
    const json& o = c["occupation"];
    const auto lt = local_time_reconstruct(ft, 0, o["x_min"].get<double>(), o["x_max"].get<double>(), as_size(o["n_x"]));
    Table l;
    l.columns = {"x", "local_time"};
    for (std::size_t i = 0; i < lt.x.size(); ++i) add_row(l, {num(lt.x[i]), num(lt.values[i])});
    r.tables["local_time"] = std::move(l);
    r.summary["local_time_imag_residue"] = lt.imag_residue;
    for (const auto& w : lt.warnings) r.warnings.push_back(w);
  }
  for (const auto& w : src.warnings()) r.warnings.push_back(w);
  return r;
}

double prediction_hurst(const json& c) {
  return c["process"]["type"] == "brownian" ? 0.5 : c["process"]["hurst"].get<double>();
}

Report run_regularity(const json& c) {
  PathSource src(c);
  const auto sg = make_spectral(c, src.dim());
  const auto pairs = make_pairs(c);
  const double delta = c["weights"]["delta"];
  const double p = c["ensemble"]["p"];
  const std::size_t M = as_size(c["ensemble"]["M"]);
  const auto stats = ensemble_statistics(M, p, [&](std::size_t i) {
    const auto x = src.path(i);
    return occupation_ft(x, src.rho(x), delta, sg, pairs);
  });
  const auto& mc = stats.moment;
  const auto& mn = stats.mean;
  const std::size_t K = mc.xi_norm.size();
  Report r;
  Table t;
  t.columns = {"pair_s", "pair_t", "k", "xi_norm", "moment", "stderr", "mean_abs", "mean_stderr"};
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t i = q * K + k;
      add_row(t, {num(pairs[q].first), num(pairs[q].second), std::to_string(k), num(mc.xi_norm[k]),
                  num(mc.moment[i]), num(mc.stderr_[i]), num(std::abs(mn.mean[i])), num(mn.stderr_[i])});
    }
  }
  r.tables["moments"] = std::move(t);

  const json& rg = c["regularity"];
  const double lo = rg["fit_xi_min"], hi = rg["fit_xi_max"];
  const auto fit = fit_decay(mc.xi_norm, mc.row(0), lo, hi, p);
  auto etas = as_vector(rg["etas"]);
  if (etas.empty()) etas = default_eta_grid();
  const double H = prediction_hurst(c);
  const double kstar = best_kappa(H, number_or_inf(rg["zeta"]), delta, rg["chi"].get<double>(), etas);
  const double tol = rg["tolerance"];
  double rel = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < K; ++k) {
    if (mc.xi_norm[k] >= lo && mc.xi_norm[k] <= hi && mc.moment[k] > 0.0) {
      rel += mc.stderr_[k] / mc.moment[k];
      ++used;
    }
  }
  r.summary["kappa_hat"] = fit.exponent;
  r.summary["kappa_star"] = kstar;
  r.summary["r_squared"] = fit.r_squared;
  r.summary["mean_relative_stderr"] = used ? rel / static_cast<double>(used) : 0.0;
  r.summary["pass"] = fit.exponent >= kstar - tol ? 1.0 : 0.0;
  r.results["fit"] = {{"exponent", fit.exponent}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared},
                      {"points", fit.points}, {"xi_range", {fit.xi_range.first, fit.xi_range.second}}};
  r.results["prediction"] = {{"H", H}, {"kappa_star", kstar}, {"tolerance", tol}, {"etas", etas}};
  for (const auto& w : src.warnings()) r.warnings.push_back(w);
  return r;
}

Report run_density(const json& c) {
  PathSource src(c);
  const auto sg = make_spectral(c, src.dim());
  const std::size_t M = as_size(c["ensemble"]["M"]);
  const std::size_t d = src.dim();
  const double delta = c["weights"]["delta"];
  const std::size_t j = src.grid().index_of(c["density"]["time"].get<double>());
  std::vector<double> samples(M * d), weights(M);
  parallel_for(M, [&](std::size_t i) {
    const auto x = src.path(i);
    for (std::size_t k = 0; k < d; ++k) samples[i * d + k] = x(j, k);
    weights[i] = std::pow(src.rho(x)[j], delta);
  });
  const auto cf = char_fn_decay(samples, weights, sg, c["density"]["xi_min"].get<double>(),
                                c["density"]["xi_max"].get<double>());
  Report r;
  Table t;
  t.columns = {"xi_norm", "char_fn", "stderr"};
  for (std::size_t k = 0; k < cf.xi_norm.size(); ++k) add_row(t, {num(cf.xi_norm[k]), num(cf.curve[k]), num(cf.stderr_[k])});
  r.tables["char_fn"] = std::move(t);
  r.summary["fitted"] = cf.fitted ? 1.0 : 0.0;
  r.summary["exponent"] = cf.fitted ? cf.fit.exponent : 0.0;
  r.summary["r_squared"] = cf.fitted ? cf.fit.r_squared : 0.0;
  for (const auto& w : src.warnings()) r.warnings.push_back(w);
  return r;
}

Report run_sewing(const json& c) {
  PathSource src(c);
  const json& s = c["sewing"];
  const std::size_t paths = as_size(s["paths"]);
  const double delta = c["weights"]["delta"];
  std::vector<double> xi(src.dim(), 0.0);
  xi[0] = s["xi"];
  const double a = s["s"], b = s["t"];
  const unsigned lmin = static_cast<unsigned>(s["level_min"].get<long long>());
  const unsigned lmax = static_cast<unsigned>(s["level_max"].get<long long>());
  const double anchor = s["anchor"];
  std::vector<SewingRate> rates;
  rates.reserve(paths);
  for (std::size_t i = 0; i < paths; ++i) {
    const auto rec = src.record(i);
    const auto rho = src.rho(rec.path);
    const auto germ = frozen_occupation_germ(src.model(), rec, rho, delta, xi);
    rates.push_back(sewing_rate(germ, a, b, lmin, lmax, anchor));
  }
  Report r;
  Table t;
  t.columns = {"path", "rate", "exact", "intercept", "limit_re", "limit_im"};
  std::vector<double> finite;
  for (std::size_t i = 0; i < paths; ++i) {
    const auto& sr = rates[i];
    add_row(t, {std::to_string(i), num(sr.rate), sr.exact ? "1" : "0", num(sr.intercept), num(sr.limit[0]),
                num(sr.limit[1])});
    finite.push_back(sr.exact ? 0.0 : sr.rate);
  }
  r.tables["rates"] = std::move(t);
  Table diff;
  diff.columns = {"level", "difference", "envelope"};
  const auto& r0 = rates[0];
  for (std::size_t l = 0; l < r0.differences.size(); ++l) {
    add_row(diff, {std::to_string(r0.levels[l]), num(r0.differences[l]), num(r0.envelope(r0.levels[l]))});
  }
  r.tables["differences"] = std::move(diff);
  std::size_t exact = 0;
  for (const auto& sr : rates) exact += sr.exact ? 1 : 0;
  r.summary["mean_rate"] = exact == paths ? INFINITY : pairwise_sum(finite) / static_cast<double>(paths - exact);
  r.summary["exact_paths"] = static_cast<double>(exact);
  double mn = INFINITY;
  for (const auto& sr : rates) mn = std::min(mn, sr.rate);
  r.summary["min_rate"] = mn;
  return r;
}

TwoParamField young_field(const std::string& kind) {
  TwoParamField f;
  if (kind == "smooth") {
    f.eval = [](double t1, double t2, std::span<const double> x, std::span<double> out) {
      out[0] = t1 * t2 * (std::sin(x[0]) + 0.5 * std::cos(2.0 * x[0]));
    };
    f.eval_grad_x = [](double t1, double t2, std::span<const double> x, std::span<double> out) {
      out[0] = t1 * t2 * (std::cos(x[0]) - std::sin(2.0 * x[0]));
    };
  } else {
    f.eval = [](double t1, double t2, std::span<const double> x, std::span<double> out) {
      out[0] = t1 * t2 * std::abs(x[0]);
    };
    f.eval_grad_x = [](double t1, double t2, std::span<const double> x, std::span<double> out) {
      out[0] = t1 * t2 * (x[0] > 0.0 ? 1.0 : (x[0] < 0.0 ? -1.0 : 0.0));
    };
  }
  return f;
}

Report run_young2d(const json& c) {
  const json& y = c["young2d"];
  const auto A = young_field(y["field"]);
  PathFunction theta;
  std::vector<std::string> warnings;
  if (y["path"] == "smooth") {
    theta = [](double t, std::span<double> out) { out[0] = std::sin(2.0 * std::numbers::pi * t) + t; };
  } else {
    PathSource src(c);
    if (src.dim() != 1) throw DomainError("cli", "young2d needs process.dim = 1");
    theta = path_function(src.path(0));
    warnings = src.warnings();
  }
  const double T = c["grid"]["horizon"];
  const unsigned level = static_cast<unsigned>(y["level"].get<long long>());
  const auto yi = nl_young_integral(A, theta, Rect{0.0, T, 0.0, T}, level, y["holder_beta"].get<double>());
  const auto corner = as_vector(y["corner"]);
  const auto ge = germ_error_exponent(A, theta, {corner[0], corner[1]}, y["side"].get<double>(), as_size(y["n_sizes"]),
                                      static_cast<unsigned>(y["oracle_level"].get<long long>()));
  Report r;
  Table lv;
  lv.columns = {"level", "difference"};
  for (std::size_t i = 0; i < yi.differences.size(); ++i) {
    add_row(lv, {std::to_string(level - yi.differences.size() + 1 + i), num(yi.differences[i])});
  }
  r.tables["levels"] = std::move(lv);
  Table g;
  g.columns = {"side", "defect"};
  for (std::size_t i = 0; i < ge.sides.size(); ++i) add_row(g, {num(ge.sides[i]), num(ge.defects[i])});
  r.tables["germ"] = std::move(g);
  r.summary["value"] = yi.value[0];
  r.summary["error_indicator"] = yi.error_indicator;
  r.summary["converged"] = yi.converged ? 1.0 : 0.0;
  r.summary["germ_exponent"] = ge.exponent;
  r.summary["germ_r_squared"] = ge.r_squared;
  if (!yi.converged) warnings.push_back("young2d: dyadic Riemann sums did not settle");
  r.warnings = warnings;
  return r;
}

struct DriftSetup {
  FourierDrift drift;
  json info;
};

DriftSetup make_drift(const json& c, std::size_t dim) {
  const json& s = c["selfinteract"];
  const std::string name = s["drift"];
  const double strength = s["strength"];
  DriftSetup out;
  if (name == "gaussian_bump") {
    out.drift = FourierDrift::gaussian_bump(dim, strength, s["bump_width"].get<double>());
  } else {
    const PresetName pn = name == "skew_delta0"  ? PresetName::SkewDelta0
                          : name == "edwards"    ? PresetName::EdwardsGradDelta0
                          : name == "edwards_fractional" ? PresetName::EdwardsFractional
                                                         : PresetName::DurrettRogers;
    const auto p = threshold_preset(pn, dim, s["alpha"].get<double>(), strength);
    out.drift = p.drift;
    const double H = c["process"]["hurst"];
    out.info = {{"h_bound", p.h_bound},
                {"delta_strict", p.delta_strict},
                {"example_condition", example_condition(H, p.drift.fl_delta, p.drift.fl_qprime, dim)}};
  }
  out.info["fl_delta"] = out.drift.fl_delta;
  out.info["fl_qprime"] = std::isinf(out.drift.fl_qprime) ? json("inf") : json(out.drift.fl_qprime);
  const double n = s["mollify"];
  if (n > 0.0) out.drift = out.drift.mollified(n);
  out.info["description"] = out.drift.description;
  return out;
}

SpectralGrid interaction_spectral(const json& c, const SamplePath& z) {
  const json& s = c["selfinteract"];
  const double xi_max = s["xi_max"];
  if (z.dim() == 1) {
    double range = s["range"];
    if (!(range > 0.0)) {
      double lo = z(0, 0), hi = z(0, 0);
      for (std::size_t i = 0; i < z.size(); ++i) {
        lo = std::min(lo, z(i, 0));
        hi = std::max(hi, z(i, 0));
      }
      range = 1.5 * (hi - lo) + 1.0;
    }
    return SpectralGrid::for_range(xi_max, range);
  }
  return SpectralGrid::tensor(z.dim(), xi_max, as_size(c["spectral"]["n_half"]));
}

SolverConfig solver_config(const json& c, std::size_t dim) {
  const json& s = c["selfinteract"];
  SolverConfig cfg;
  cfg.gamma = s["gamma"];
  cfg.u0 = as_vector(s["u0"]);
  if (cfg.u0.size() == 1 && dim > 1) cfg.u0.assign(dim, cfg.u0[0]);
  cfg.step_tau = s["step_tau"];
  cfg.picard_tol = s["picard_tol"];
  cfg.max_iters = as_size(s["max_iters"]);
  return cfg;
}

std::vector<double> interaction_weights(const PathSource& src, const SamplePath& z, double delta) {
  auto w = src.rho(z);
  for (auto& v : w) v = std::pow(v, delta);
  return w;
}

Report run_selfinteract(const json& c) {
  PathSource src(c);
  const auto z = src.path(0);
  const auto drift = make_drift(c, src.dim());
  const auto sg = interaction_spectral(c, z);
  const auto cfg = solver_config(c, src.dim());
  const auto w = interaction_weights(src, z, c["weights"]["delta"].get<double>());
  const auto res = solve_drift(drift.drift, z, w, sg, cfg);
  const std::size_t d = src.dim();
  Report r;
  Table sol;
  sol.columns = {"t"};
  for (std::size_t k = 0; k < d; ++k) sol.columns.push_back("u_" + std::to_string(k));
  for (std::size_t k = 0; k < d; ++k) sol.columns.push_back("theta_" + std::to_string(k));
  for (std::size_t k = 0; k < d; ++k) sol.columns.push_back("z_" + std::to_string(k));
  for (std::size_t i = 0; i < z.size(); ++i) {
    std::vector<std::string> row{num(z.grid().t(i))};
    for (std::size_t k = 0; k < d; ++k) row.push_back(num(res.u(i, k)));
    for (std::size_t k = 0; k < d; ++k) row.push_back(num(res.theta(i, k)));
    for (std::size_t k = 0; k < d; ++k) row.push_back(num(z(i, k)));
    add_row(sol, std::move(row));
  }
  r.tables["solution"] = std::move(sol);
  Table win;
  win.columns = {"start", "end", "tau", "iterations", "contraction"};
  for (const auto& wr : res.windows) {
    add_row(win, {num(wr.start), num(wr.end), num(wr.tau), std::to_string(wr.iterations), num(wr.contraction)});
  }
  r.tables["windows"] = std::move(win);
  r.summary["defect"] = res.defect;
  r.summary["picard_tol"] = cfg.picard_tol;
  r.summary["iterations"] = static_cast<double>(res.total_iterations);
  r.summary["max_contraction"] = res.max_contraction;
  r.summary["windows"] = static_cast<double>(res.windows.size());
  r.summary["pass"] = res.defect <= 2.0 * cfg.picard_tol ? 1.0 : 0.0;
  r.results["drift"] = drift.info;
  r.results["spectral"] = {{"size", sg.size()}, {"xi_max", sg.xi_max()}, {"spacing", sg.spacing()}};
  r.warnings = res.warnings;
  for (const auto& w2 : src.warnings()) r.warnings.push_back(w2);
  double re = 0.0, mag = 0.0;
  for (std::size_t k = 0; k < sg.size(); ++k) {
    const auto v = drift.drift.evaluate(sg.point(k));
    for (const auto& x : v) {
      re = std::max(re, std::abs(x.real()));
      mag = std::max(mag, std::abs(x));
    }
  }
  if (re <= 1e-14 * mag) {
    r.warnings.push_back("selfinteract: odd drift; the interaction vanishes on [0,t]^2, so theta = u0");
  }
  return r;
}

Report run_stability(const json& c) {
  PathSource src(c);
  const auto z = src.path(0);
  const auto drift = make_drift(c, src.dim());
  const auto sg = interaction_spectral(c, z);
  const auto cfg = solver_config(c, src.dim());
  const auto w = interaction_weights(src, z, c["weights"]["delta"].get<double>());
  const auto levels = as_vector(c["stability"]["levels"]);
  const double shift = c["stability"]["u0_shift"];
  std::vector<double> shifts;
  if (shift != 0.0) shifts.assign(levels.size(), shift);
  const auto table = stability_experiment(drift.drift, levels, z, w, sg, cfg,
                                          c["stability"]["reference_level"].get<double>(), shifts);
  Report r;
  Table t;
  t.columns = {"level", "drift_distance", "u0_distance", "solution_distance", "ratio"};
  double lo = INFINITY, hi = 0.0;
  for (const auto& row : table.rows) {
    add_row(t, {num(row.level), num(row.drift_distance), num(row.u0_distance), num(row.solution_distance), num(row.ratio)});
    lo = std::min(lo, row.ratio);
    hi = std::max(hi, row.ratio);
  }
  r.tables["stability"] = std::move(t);
  r.summary["ratio_min"] = lo;
  r.summary["ratio_max"] = hi;
  r.summary["ratio_spread"] = lo > 0.0 ? hi / lo : INFINITY;
  r.summary["reference_defect"] = table.reference.defect;
  r.results["drift"] = drift.info;
  r.warnings = table.reference.warnings;
  return r;
}

std::string error_label(const std::exception& e) {
  if (const auto* ve = dynamic_cast<const ValidationError*>(&e)) return "config:" + ve->path();
  if (const auto* me = dynamic_cast<const Error*>(&e)) return me->module();
  return "unknown";
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  return 2;
}

Report run_sweep(const json& c) {
  const json& grid = c["sweep"]["grid"];
  std::vector<std::string> keys;
  std::vector<json> values;
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    keys.push_back(it.key());
    values.push_back(it.value());
  }
  std::size_t total = 1;
  for (const auto& v : values) total *= v.size();
  const long long base_seed = c["seed"];

  struct Entry {
    std::vector<json> params;
    std::string status = "ok";
    std::map<std::string, double> summary;
    json results;
  };
  std::vector<Entry> entries(total);
  for (std::size_t g = 0; g < total; ++g) {
    json run = c;
    run["command"] = c["sweep"]["command"];
    run["sweep"]["grid"] = json::object();
    run["seed"] = base_seed + static_cast<long long>(g);
    std::size_t rem = g;
    Entry& e = entries[g];
    e.params.resize(keys.size());
    for (std::size_t k = keys.size(); k-- > 0;) {
      e.params[k] = values[k][rem % values[k].size()];
      rem /= values[k].size();
    }
    try {
      for (std::size_t k = 0; k < keys.size(); ++k) at_path(run, keys[k]) = e.params[k];
      const json resolved = resolve_config(run);
      const Report sub = run_experiment(resolved);
      e.summary = sub.summary;
      e.results = sub.results;
    } catch (const std::exception& ex) {
      e.status = "error(" + error_label(ex) + "): " + ex.what();
    }
  }

  std::set<std::string> cols;
  for (const auto& e : entries) {
    for (const auto& [k, v] : e.summary) cols.insert(k);
  }
  Report r;
  Table t;
  t.columns = {"index", "seed"};
  for (const auto& k : keys) t.columns.push_back(k);
  t.columns.push_back("status");
  for (const auto& k : cols) t.columns.push_back(k);
  json runs = json::array();
  std::size_t failed = 0;
  for (std::size_t g = 0; g < total; ++g) {
    const Entry& e = entries[g];
    std::vector<std::string> row{std::to_string(g), std::to_string(base_seed + static_cast<long long>(g))};
    json params = json::object();
    for (std::size_t k = 0; k < keys.size(); ++k) {
      row.push_back(e.params[k].is_number() ? num(e.params[k].get<double>())
                    : e.params[k].is_string() ? e.params[k].get<std::string>()
                                              : e.params[k].dump());
      params[keys[k]] = e.params[k];
    }
    std::string status = e.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    row.push_back(status);
    for (const auto& k : cols) {
      const auto it = e.summary.find(k);
      row.push_back(it == e.summary.end() ? "" : num(it->second));
    }
    add_row(t, std::move(row));
    if (e.status != "ok") {
      ++failed;
      r.warnings.push_back("sweep entry " + std::to_string(g) + " failed: " + e.status);
    }
    runs.push_back({{"index", g}, {"params", params}, {"status", e.status}, {"results", e.results}});
  }
  r.tables["sweep"] = std::move(t);
  r.results["runs"] = runs;
  r.summary["entries"] = static_cast<double>(total);
  r.summary["failed"] = static_cast<double>(failed);
  return r;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(format_number(v)); }

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Report run_experiment(const json& c) {
  const std::string cmd = c["command"];
  if (cmd == "simulate") return run_simulate(c);
  if (cmd == "occupation") return run_occupation(c);
  if (cmd == "regularity") return run_regularity(c);
  if (cmd == "density") return run_density(c);
  if (cmd == "sewing") return run_sewing(c);
  if (cmd == "young2d") return run_young2d(c);
  if (cmd == "selfinteract") return run_selfinteract(c);
  if (cmd == "stability") return run_stability(c);
  if (cmd == "sweep") return run_sweep(c);
  throw ValidationError("command", "unknown command '" + cmd + "'");
}

std::string to_csv(const Table& table, const std::string& hash) {
  std::string out = "config_hash";
  for (const auto& col : table.columns) out += "," + col;
  out += "\n";
  for (const auto& row : table.rows) {
    out += hash;
    for (const auto& cell : row) out += "," + cell;
    out += "\n";
  }
  return out;
}

int run_and_write(const json& resolved, const std::string& out_dir, bool verbose) {
  const std::string hash = config_hash(resolved);
  const std::string tag = resolved["output"]["tag"];
  std::filesystem::create_directories(out_dir);
  json env = {{"config", resolved},
              {"config_hash", hash},
              {"command", resolved["command"]},
              {"timestamp", timestamp()}};
  int code = 0;
  try {
    if (verbose) std::cerr << "vlab: running '" << resolved["command"].get<std::string>() << "' (config " << hash << ")\n";
    const Report r = run_experiment(resolved);
    json files = json::array();
    for (const auto& [name, table] : r.tables) {
      const std::string file = tag + "_" + name + ".csv";
      std::ofstream(std::filesystem::path(out_dir) / file) << to_csv(table, hash);
      files.push_back(file);
      if (verbose) std::cerr << "vlab: wrote " << file << " (" << table.rows.size() << " rows)\n";
    }
    json summary = json::object();
    for (const auto& [k, v] : r.summary) summary[k] = finite_or_null(v);
    env["status"] = "ok";
    env["results"] = r.results;
    env["summary"] = summary;
    env["tables"] = files;
    env["warnings"] = r.warnings;
    for (const auto& w : r.warnings) std::cerr << "vlab: warning: " << w << "\n";
  } catch (const std::exception& e) {
    code = exit_code_for(e);
    env["status"] = "error";
    env["error"] = {{"module", error_label(e)}, {"message", e.what()}, {"exit_code", code}};
    std::cerr << "vlab: error [" << error_label(e) << "]: " << e.what() << "\n";
  }
  std::ofstream(std::filesystem::path(out_dir) / (tag + ".json")) << env.dump(2) << "\n";
  return code;
}

}  // namespace vlab::cli
