#include "vlab/simulate.hpp"

#include <fftw3.h>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <mutex>

#include "vlab/errors.hpp"
#include "vlab/numerics.hpp"
#include "vlab/rng.hpp"

namespace vlab {

std::vector<double> sample_brownian(const TimeGrid& grid, std::size_t dim_m, std::uint64_t seed,
                                    std::uint64_t path) {
  std::vector<double> out(grid.n_steps() * dim_m);
  NormalStream(seed, path, streams::kBrownian).fill(0, out);
  const double scale = std::sqrt(grid.dt());
  for (double& v : out) v *= scale;
  return out;
}

Coefficient Coefficient::constant_vector(std::vector<double> value) {
  Coefficient c;
  c.kind = Kind::ConstantVector;
  c.constant = std::move(value);
  c.holder_alpha = 1.0;
  return c;
}

Coefficient Coefficient::state_function(StateFn fn, double holder_alpha) {
  Coefficient c;
  c.kind = Kind::StateFunction;
  c.state_fn = std::move(fn);
  c.holder_alpha = holder_alpha;
  return c;
}

Coefficient Coefficient::path_functional(PathFn fn, double holder_alpha) {
  Coefficient c;
  c.kind = Kind::PathFunctional;
  c.path_fn = std::move(fn);
  c.holder_alpha = holder_alpha;
  return c;
}

WeightProcess WeightProcess::state_function(std::function<double(std::span<const double>)> fn,
                                            double chi) {
  WeightProcess w;
  w.kind = Kind::StateFunction;
  w.state_fn = std::move(fn);
  w.holder_chi = chi;
  return w;
}

std::vector<double> WeightProcess::evaluate(const SamplePath& path) const {
  std::vector<double> rho(path.size(), 1.0);
  if (kind == Kind::One) return rho;
  for (std::size_t j = 0; j < path.size(); ++j) {
    const double v = kind == Kind::StateFunction ? state_fn(path.row(j)) : custom_fn(j, path);
    if (!std::isfinite(v)) throw DomainError("simulate", "weight process is not finite");
    rho[j] = std::clamp(v, 0.0, 1.0);
  }
  return rho;
}

std::function<double(double, std::size_t)> initial_from_path(SamplePath path) {
  return [p = std::move(path)](double t, std::size_t k) { return p(p.grid().index_of(t), k); };
}

namespace {

// x^c - y^c for 0 <= y < x, accurate when y is close to x.
double power_difference(double x, double y, double c) {
  if (y <= 0.0) return std::pow(x, c);
  return -std::pow(x, c) * std::expm1(c * std::log1p(-(x - y) / x));
}

}  // namespace

KernelWeights::KernelWeights(const KernelSpec& spec, const TimeGrid& grid, KernelRole role) {
  const std::size_t n = grid.n_steps();
  const double dt = grid.dt();
  switch (spec.family()) {
    case KernelFamily::FbmMolchanGolosov:
      throw DomainError("simulate",
                        "the fBm kernel has no pointwise discretisation; use the fBm samplers");
    case KernelFamily::RiemannLiouville: {
      const double H = spec.hurst();
      const double gamma = lanczos_gamma(H + 0.5);
      lag_.assign(n + 1, 0.0);
      for (std::size_t k = 1; k <= n; ++k) {
        const double hi = static_cast<double>(k) * dt;
        const double lo = static_cast<double>(k - 1) * dt;
        if (role == KernelRole::Drift) {
          lag_[k] = power_difference(hi, lo, H + 0.5) / ((H + 0.5) * dt * gamma);
        } else {
          lag_[k] = std::sqrt(power_difference(hi, lo, 2.0 * H) / (2.0 * H * dt)) / gamma;
        }
      }
      break;
    }
    case KernelFamily::Tabulated: {
      convolution_ = false;
      full_.assign(n * (n + 1) / 2, 0.0);
      for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
          full_[i * (i - 1) / 2 + j] = eval_kernel(spec, grid.t(i), grid.t(j) + 0.5 * dt);
        }
      }
      break;
    }
    default: {
      lag_.assign(n + 1, 0.0);
      for (std::size_t k = 1; k <= n; ++k) {
        lag_[k] = eval_kernel(spec, (static_cast<double>(k) - 0.5) * dt, 0.0);
      }
      break;
    }
  }
}

namespace {

void check_coefficient(const Coefficient& c, std::size_t size, const char* what) {
  switch (c.kind) {
    case Coefficient::Kind::ConstantVector:
      if (c.constant.size() != size) {
        throw DomainError("simulate", std::string(what) + " constant has the wrong length");
      }
      break;
    case Coefficient::Kind::StateFunction:
      if (!c.state_fn) throw DomainError("simulate", std::string(what) + " function is empty");
      break;
    case Coefficient::Kind::PathFunctional:
      if (!c.path_fn) throw DomainError("simulate", std::string(what) + " functional is empty");
      break;
  }
}

void evaluate_coefficient(const Coefficient& c, std::size_t j, const SamplePath& x,
                          std::span<double> out) {
  switch (c.kind) {
    case Coefficient::Kind::ConstantVector:
      std::copy(c.constant.begin(), c.constant.end(), out.begin());
      return;
    case Coefficient::Kind::StateFunction:
      c.state_fn(x.row(j), out);
      return;
    case Coefficient::Kind::PathFunctional:
      c.path_fn(j, x, out);
      return;
  }
}

}  // namespace

SamplePath simulate_volterra_ito(const VolterraModel& model, const TimeGrid& grid,
                                 std::uint64_t seed, std::uint64_t path) {
  const auto increments = sample_brownian(grid, model.noise_dim, seed, path);
  return simulate_volterra_ito(model, grid, increments);
}

SamplePath simulate_volterra_ito(const VolterraModel& model, const TimeGrid& grid,
                                 std::span<const double> increments) {
  return simulate_volterra_record(model, grid, increments).path;
}

VolterraRecord simulate_volterra_record(const VolterraModel& model, const TimeGrid& grid,
                                        std::span<const double> increments) {
  const std::size_t n = grid.n_steps();
  const std::size_t d = model.dim;
  const std::size_t m = model.noise_dim;
  if (d == 0 || m == 0) throw DomainError("simulate", "dimensions must be positive");
  if (increments.size() != n * m) {
    throw DomainError("simulate", "increments must have n_steps * noise_dim entries");
  }
  check_coefficient(model.b, d, "drift");
  check_coefficient(model.sigma, d * m, "diffusion");

  const KernelWeights wb(model.kb, grid, KernelRole::Drift);
  const KernelWeights ws(model.ks, grid, KernelRole::Diffusion);
  const double dt = grid.dt();

  VolterraRecord rec{SamplePath(grid, d), std::vector<double>(increments.begin(), increments.end()),
                     std::vector<double>(n * d), std::vector<double>(n * d * m)};
  SamplePath& x = rec.path;
  std::vector<double> drift(n * d, 0.0);  // b_j dt
  std::vector<double> noise(n * d, 0.0);  // sigma_j dB_j

  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      double acc = model.g(grid.t(i), k);
      for (std::size_t j = 0; j < i; ++j) {
        acc += wb(i, j) * drift[j * d + k] + ws(i, j) * noise[j * d + k];
      }
      if (!std::isfinite(acc) || std::abs(acc) > model.overflow_bound) {
        throw OverflowError("simulate", "|X| exceeded the overflow bound at t = " +
                                            std::to_string(grid.t(i)));
      }
      x(i, k) = acc;
    }
    if (i == n) break;
    const std::span<double> b_val(rec.drift.data() + i * d, d);
    const std::span<double> s_val(rec.diffusion.data() + i * d * m, d * m);
    evaluate_coefficient(model.b, i, x, b_val);
    evaluate_coefficient(model.sigma, i, x, s_val);
    for (std::size_t k = 0; k < d; ++k) {
      drift[i * d + k] = b_val[k] * dt;
      double acc = 0.0;
      for (std::size_t l = 0; l < m; ++l) acc += s_val[k * m + l] * increments[i * m + l];
      noise[i * d + k] = acc;
    }
  }
  return rec;
}

VolterraModel volterra_power_model(double H, double x0, double b0, double beta, double theta) {
  if (!(x0 >= 0.0) || !(b0 >= 0.0)) throw DomainError("simulate", "x0 and b0 must be >= 0");
  if (!(theta >= 0.5 && theta <= 1.0)) throw DomainError("simulate", "theta must lie in [1/2, 1]");
  if (!std::isfinite(beta)) throw DomainError("simulate", "beta must be finite");
  VolterraModel model;
  model.g = [x0](double, std::size_t) { return x0; };
  model.kb = KernelSpec::riemann_liouville(H, KernelRole::Drift);
  model.ks = KernelSpec::riemann_liouville(H, KernelRole::Diffusion);
  model.b = Coefficient::state_function(
      [b0, beta](std::span<const double> x, std::span<double> out) { out[0] = b0 + beta * x[0]; });
  model.sigma = Coefficient::state_function(
      [theta](std::span<const double> x, std::span<double> out) {
        out[0] = std::pow(std::max(x[0], 0.0), theta);
      },
      theta);
  return model;
}

SamplePath simulate_volterra_power(double H, double x0, double b0, double beta, double theta,
                                   const TimeGrid& grid, std::uint64_t seed, std::uint64_t path) {
  return simulate_volterra_ito(volterra_power_model(H, x0, b0, beta, theta), grid, seed, path);
}

namespace {

void check_hurst(double H) {
  if (!(H > 0.0 && H < 1.0)) throw DomainError("simulate", "fBm requires H in (0, 1)");
}

}  // namespace

FbmCholeskySampler::FbmCholeskySampler(double hurst, const TimeGrid& grid) : grid_(grid) {
  check_hurst(hurst);
  const std::size_t n = grid.n_steps();
  if (n > kMaxSteps) {
    throw DomainError("simulate", "Cholesky fBm is limited to n_steps <= 8192; use the "
                                  "circulant sampler");
  }
  Eigen::MatrixXd cov(n, n);
  const double h2 = 2.0 * hurst;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double ti = grid.t(i + 1);
      const double tj = grid.t(j + 1);
      const double c = 0.5 * (std::pow(ti, h2) + std::pow(tj, h2) - std::pow(ti - tj, h2));
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  Eigen::MatrixXd factor;
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    factor = eig.eigenvectors() * clipped.asDiagonal();
    warnings_.push_back("fBm covariance Cholesky failed; used eigenvalue clipping at 0 (min "
                        "eigenvalue " +
                        std::to_string(eig.eigenvalues().minCoeff()) + ")");
  }
  factor_.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) factor_[i * n + j] = factor(i, j);
  }
}

SamplePath FbmCholeskySampler::sample(std::size_t dim, std::uint64_t seed,
                                      std::uint64_t path) const {
  const std::size_t n = grid_.n_steps();
  SamplePath x(grid_, dim);
  x.warnings = warnings_;
  const NormalStream normals(seed, path, streams::kFbmCholesky);
  std::vector<double> z(n);
  for (std::size_t k = 0; k < dim; ++k) {
    normals.fill(static_cast<std::uint64_t>(k) * n, z);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = factor_.data() + i * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += row[j] * z[j];
      x(i + 1, k) = acc;
    }
  }
  return x;
}

SamplePath simulate_fbm(double hurst, const TimeGrid& grid, std::size_t dim, std::uint64_t seed,
                        std::uint64_t path) {
  return FbmCholeskySampler(hurst, grid).sample(dim, seed, path);
}

struct FbmCirculantSampler::Plan {
  std::size_t size = 0;
  fftw_plan forward = nullptr;
};

namespace {

// FFTW's planner is not thread-safe; execution with new arrays is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

FbmCirculantSampler::FbmCirculantSampler(double hurst, const TimeGrid& grid)
    : grid_(grid), plan_(std::make_unique<Plan>()) {
  check_hurst(hurst);
  const std::size_t n = grid.n_steps();
  const std::size_t big = 2 * n;
  plan_->size = big;
  const double h2 = 2.0 * hurst;
  const double scale = std::pow(grid.dt(), h2);
  auto fgn_cov = [&](double k) {
    return 0.5 * scale *
           (std::pow(std::abs(k + 1.0), h2) - 2.0 * std::pow(std::abs(k), h2) +
            std::pow(std::abs(k - 1.0), h2));
  };

  fftw_complex* buf = fftw_alloc_complex(big);
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan_->forward = fftw_plan_dft_1d(static_cast<int>(big), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t k = 0; k < big; ++k) {
    const double lag = static_cast<double>(k <= n ? k : big - k);
    buf[k][0] = fgn_cov(lag);
    buf[k][1] = 0.0;
  }
  fftw_execute_dft(plan_->forward, buf, buf);
  sqrt_eigen_.resize(big);
  double min_eigen = 0.0;
  double max_eigen = 0.0;
  for (std::size_t k = 0; k < big; ++k) {
    const double lambda = buf[k][0];
    min_eigen = std::min(min_eigen, lambda);
    max_eigen = std::max(max_eigen, lambda);
    sqrt_eigen_[k] = std::sqrt(std::max(lambda, 0.0) / static_cast<double>(big));
  }
  fftw_free(buf);
  if (min_eigen < -1e-12 * max_eigen) {
    warnings_.push_back("circulant embedding has negative eigenvalues (min " +
                        std::to_string(min_eigen) + "); clipped at 0");
  }
}

FbmCirculantSampler::~FbmCirculantSampler() {
  if (plan_ && plan_->forward) {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_->forward);
  }
}

SamplePath FbmCirculantSampler::sample(std::size_t dim, std::uint64_t seed,
                                       std::uint64_t path) const {
  const std::size_t n = grid_.n_steps();
  const std::size_t big = plan_->size;
  SamplePath x(grid_, dim);
  x.warnings = warnings_;
  const NormalStream normals(seed, path, streams::kFbmCirculant);
  fftw_complex* buf = fftw_alloc_complex(big);
  std::vector<double> z(2 * big);
  for (std::size_t k = 0; k < dim; ++k) {
    normals.fill(static_cast<std::uint64_t>(k) * 2 * big, z);
    for (std::size_t j = 0; j < big; ++j) {
      buf[j][0] = sqrt_eigen_[j] * z[2 * j];
      buf[j][1] = sqrt_eigen_[j] * z[2 * j + 1];
    }
    fftw_execute_dft(plan_->forward, buf, buf);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += buf[i][0];
      x(i + 1, k) = acc;
    }
  }
  fftw_free(buf);
  return x;
}

}  // namespace vlab
