#include "vlab/selfinteract.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vlab/errors.hpp"
#include "vlab/numerics.hpp"
#include "vlab/parallel.hpp"

namespace vlab {

namespace {

constexpr std::size_t kSpectralBlocks = 64;

double sup_coordinate(std::span<const double> xi) {
  double m = 0.0;
  for (double v : xi) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

std::vector<cplx> FourierDrift::evaluate(std::span<const double> xi) const {
  if (!b_hat) throw DomainError("selfinteract", "drift has no Fourier transform");
  if (xi.size() != dim) throw DomainError("selfinteract", "frequency dimension mismatch");
  std::vector<cplx> out(dim);
  b_hat(xi, out);
  return out;
}

FourierDrift FourierDrift::gaussian_bump(std::size_t dim, double amplitude, double width) {
  if (dim == 0 || !(width > 0.0)) throw DomainError("selfinteract", "bad Gaussian bump parameters");
  FourierDrift b;
  b.dim = dim;
  const double scale = amplitude * std::pow(std::sqrt(2.0 * std::numbers::pi) * width, double(dim));
  b.b_hat = [dim, scale, width](std::span<const double> xi, std::span<cplx> out) {
    double r2 = 0.0;
    for (double v : xi) r2 += v * v;
    const double v = scale * std::exp(-0.5 * width * width * r2);
    for (std::size_t k = 0; k < dim; ++k) out[k] = v;
  };
  b.fl_delta = 0.0;
  b.fl_qprime = 1.0;
  b.description = "gaussian_bump";
  return b;
}

FourierDrift FourierDrift::mollified(double n) const {
  if (!(n > 0.0)) throw DomainError("selfinteract", "mollification level must be positive");
  FourierDrift out = *this;
  const auto base = b_hat;
  out.b_hat = [base, n](std::span<const double> xi, std::span<cplx> o) {
    base(xi, o);
    double r2 = 0.0;
    for (double v : xi) r2 += v * v;
    const double damp = std::exp(-r2 / (2.0 * n * n));
    for (auto& c : o) c *= damp;
  };
  out.description = description + " (mollified n=" + std::to_string(n) + ")";
  return out;
}

ThresholdPreset threshold_preset(PresetName name, std::size_t dim, double alpha, double strength) {
  if (dim == 0) throw DomainError("selfinteract", "dimension must be positive");
  ThresholdPreset p;
  FourierDrift& b = p.drift;
  b.dim = dim;
  b.fl_qprime = INFINITY;
  const double d = static_cast<double>(dim);
  switch (name) {
    case PresetName::SkewDelta0:
      if (dim != 1) throw DomainError("selfinteract", "skew_delta0 is defined for d = 1");
      b.b_hat = [strength](std::span<const double>, std::span<cplx> out) { out[0] = strength; };
      b.fl_delta = 0.0;
      b.description = "skew_delta0";
      p.h_bound = 0.25;
      break;
    case PresetName::EdwardsGradDelta0:
      b.b_hat = [strength](std::span<const double> xi, std::span<cplx> out) {
        for (std::size_t k = 0; k < xi.size(); ++k) out[k] = cplx(0.0, strength * xi[k]);
      };
      b.fl_delta = -1.0;
      b.description = "edwards_grad_delta0";
      p.h_bound = 1.0 / (d + 4.0);
      break;
    case PresetName::EdwardsFractional: {
      if (!(alpha > 0.0 && alpha < d - 1.0)) {
        throw DomainError("selfinteract", "edwards_fractional needs alpha in (0, d - 1)");
      }
      // |x|^-alpha has transform C |xi|^{alpha-d}; the cutoff is taken as the smooth
      // profile (1 + |xi|^2)^{(alpha-d)/2}, which crosses over at |xi| = 1.
      const double c = std::pow(std::numbers::pi, alpha - 0.5 * d) * std::tgamma(0.5 * (d - alpha)) /
                       std::tgamma(0.5 * alpha);
      b.b_hat = [c, alpha, d, strength](std::span<const double> xi, std::span<cplx> out) {
        double r2 = 0.0;
        for (double v : xi) r2 += v * v;
        const double f = strength * c * std::pow(1.0 + r2, 0.5 * (alpha - d));
        for (std::size_t k = 0; k < xi.size(); ++k) out[k] = cplx(0.0, xi[k] * f);
      };
      b.fl_qprime = 1.0;
      b.fl_delta = -alpha - 1.0;
      b.description = "edwards_fractional";
      p.h_bound = 1.0 / (4.0 + alpha);
      p.delta_strict = true;
      break;
    }
    case PresetName::DurrettRogers:
      if (dim != 1) throw DomainError("selfinteract", "durrett_rogers is defined for d = 1");
      // b(x) = sgn(x) e^{-|x|}.
      b.b_hat = [strength](std::span<const double> xi, std::span<cplx> out) {
        out[0] = cplx(0.0, -2.0 * strength * xi[0] / (1.0 + xi[0] * xi[0]));
      };
      b.fl_delta = 1.0;
      b.description = "durrett_rogers";
      p.h_bound = 1.0 / 3.0;
      break;
  }
  return p;
}

bool example_condition(double H, double delta, double qprime, std::size_t dim) {
  if (!(H > 0.0 && H < 1.0)) throw DomainError("selfinteract", "H must lie in (0, 1)");
  if (!(qprime >= 1.0)) throw DomainError("selfinteract", "q' must be >= 1");
  const double inv_q = 1.0 - (std::isinf(qprime) ? 0.0 : 1.0 / qprime);
  return delta + 1.0 / H - static_cast<double>(dim) * inv_q > 3.0;
}

SelfInteractionField::SelfInteractionField(const FourierDrift& b, const SelfIntersectionFT& G)
    : dim_(b.dim), spectral_(G.spectral()), t1_(G.t1_nodes()), t2_(G.t2_nodes()) {
  if (!b.b_hat) throw DomainError("selfinteract", "drift has no Fourier transform");
  if (spectral_.dim() != dim_) {
    throw DomainError("selfinteract", "drift and spectral grid dimensions disagree");
  }
  if (!spectral_.symmetric()) {
    throw DomainError("selfinteract", "spectral grid lacks -xi for some xi (symmetry error)");
  }
  const std::size_t K = spectral_.size();
  const double norm = std::pow(2.0 * std::numbers::pi, -static_cast<double>(dim_));
  coef_.resize(K * dim_);
  std::vector<cplx> v(dim_);
  for (std::size_t k = 0; k < K; ++k) {
    b.b_hat(spectral_.point(k), v);
    for (std::size_t c = 0; c < dim_; ++c) coef_[k * dim_ + c] = norm * spectral_.weight(k) * v[c];
  }
  double asym = 0.0;
  double scale = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t nk = spectral_.negation()[k];
    for (std::size_t c = 0; c < dim_; ++c) {
      const cplx a = coef_[k * dim_ + c] / spectral_.weight(k);
      const cplx m = coef_[nk * dim_ + c] / spectral_.weight(nk);
      asym = std::max(asym, std::abs(a - std::conj(m)));
      scale = std::max(scale, std::abs(a));
    }
  }
  if (asym > 1e-12 * std::max(scale, 1e-300)) {
    throw DomainError("selfinteract", "b_hat is not conjugate symmetric on the spectral grid");
  }

  l1_.resize(t1_.size() * K);
  l2_.resize(t2_.size() * K);
  for (std::size_t i = 0; i < t1_.size(); ++i) {
    for (std::size_t k = 0; k < K; ++k) l1_[i * K + k] = G.l_t1(i, k);
  }
  for (std::size_t i = 0; i < t2_.size(); ++i) {
    for (std::size_t k = 0; k < K; ++k) l2_[i * K + k] = G.l_t2(i, k);
  }
  diagonal_ = t1_ == t2_ && l1_ == l2_;
  if (diagonal_) l_ = l1_;

  if (!t1_.empty() && !t2_.empty()) {
    double edge = 0.0;
    for (std::size_t k = 0; k < K; ++k) edge = std::max(edge, sup_coordinate(spectral_.point(k)));
    double total = 0.0;
    double tail = 0.0;
    const std::size_t i1 = t1_.size() - 1;
    const std::size_t i2 = t2_.size() - 1;
    for (std::size_t k = 0; k < K; ++k) {
      double bmag = 0.0;
      for (std::size_t c = 0; c < dim_; ++c) bmag += std::norm(coef_[k * dim_ + c]);
      const double m = std::sqrt(bmag) * std::abs(l2_[i2 * K + k] * std::conj(l1_[i1 * K + k]));
      total += m;
      if (sup_coordinate(spectral_.point(k)) >= edge * (1.0 - 1e-12)) tail += m;
    }
    tail_fraction_ = total > 0.0 ? tail / total : 0.0;
    if (tail_fraction_ > 0.01) {
      warnings_.push_back("spectral truncation: the outer shell carries " +
                          std::to_string(100.0 * tail_fraction_) + "% of the field mass");
    }
  }
}

void SelfInteractionField::eval(std::size_t i1, std::size_t i2, std::span<const double> x,
                                std::span<double> out, std::span<double> imag) const {
  const std::size_t K = spectral_.size();
  std::fill(out.begin(), out.end(), 0.0);
  if (!imag.empty()) std::fill(imag.begin(), imag.end(), 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto xi = spectral_.point(k);
    double phase = 0.0;
    for (std::size_t c = 0; c < dim_; ++c) phase += xi[c] * x[c];
    const cplx g = l2_[i2 * K + k] * std::conj(l1_[i1 * K + k]) * std::polar(1.0, phase);
    for (std::size_t c = 0; c < dim_; ++c) {
      const cplx v = coef_[k * dim_ + c] * g;
      out[c] += v.real();
      if (!imag.empty()) imag[c] += v.imag();
    }
  }
}

void SelfInteractionField::eval_grad(std::size_t i1, std::size_t i2, std::span<const double> x,
                                     std::span<double> out) const {
  const std::size_t K = spectral_.size();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto xi = spectral_.point(k);
    double phase = 0.0;
    for (std::size_t c = 0; c < dim_; ++c) phase += xi[c] * x[c];
    const cplx g = l2_[i2 * K + k] * std::conj(l1_[i1 * K + k]) * std::polar(1.0, phase);
    for (std::size_t c = 0; c < dim_; ++c) {
      const cplx v = coef_[k * dim_ + c] * g * cplx(0.0, 1.0);
      for (std::size_t l = 0; l < dim_; ++l) out[c * dim_ + l] += (v * xi[l]).real();
    }
  }
}

std::size_t SelfInteractionField::index(const std::vector<double>& nodes, double t) const {
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), t - 1e-12 * (1.0 + std::abs(t)));
  if (it == nodes.end() || std::abs(*it - t) > 1e-12 * (1.0 + std::abs(t))) {
    throw AlignmentError("selfinteract", "time " + std::to_string(t) + " is not a field node");
  }
  return static_cast<std::size_t>(it - nodes.begin());
}

TwoParamField SelfInteractionField::as_field() const {
  auto self = std::make_shared<SelfInteractionField>(*this);
  TwoParamField f;
  f.dim = dim_;
  f.eval = [self](double t1, double t2, std::span<const double> x, std::span<double> out) {
    self->eval(self->index(self->t1_, t1), self->index(self->t2_, t2), x, out);
  };
  f.eval_grad_x = [self](double t1, double t2, std::span<const double> x, std::span<double> out) {
    self->eval_grad(self->index(self->t1_, t1), self->index(self->t2_, t2), x, out);
  };
  return f;
}

double SelfInteractionField::imag_residue(std::span<const double> probes) const {
  if (probes.size() % dim_ != 0) throw DomainError("selfinteract", "probe length must be a multiple of d");
  std::vector<double> re(dim_), im(dim_);
  double max_re = 0.0;
  double max_im = 0.0;
  for (std::size_t i1 = 0; i1 < t1_.size(); ++i1) {
    for (std::size_t i2 = 0; i2 < t2_.size(); ++i2) {
      for (std::size_t p = 0; p < probes.size(); p += dim_) {
        eval(i1, i2, probes.subspan(p, dim_), re, im);
        for (std::size_t c = 0; c < dim_; ++c) {
          max_re = std::max(max_re, std::abs(re[c]));
          max_im = std::max(max_im, std::abs(im[c]));
        }
      }
    }
  }
  return max_re > 0.0 ? max_im / max_re : max_im;
}

std::shared_ptr<const SelfInteractionField> build_field(const FourierDrift& b,
                                                        const SelfIntersectionFT& G) {
  return std::make_shared<const SelfInteractionField>(b, G);
}

double holder_norm_nodes(const SamplePath& f, std::size_t a, std::size_t b, double gamma) {
  const std::size_t d = f.dim();
  const TimeGrid& g = f.grid();
  double sup = 0.0;
  double semi = 0.0;
  for (std::size_t i = a; i <= b; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += f(i, c) * f(i, c);
    sup = std::max(sup, std::sqrt(s));
    for (std::size_t j = i + 1; j <= b; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += (f(j, c) - f(i, c)) * (f(j, c) - f(i, c));
      semi = std::max(semi, std::sqrt(acc) / std::pow(g.t(j) - g.t(i), gamma));
    }
  }
  return sup + semi;
}

namespace {

// Evaluates T(theta)_m = sum_{i,j<m} box_{ij} A(theta_j - theta_i) for m in (a, b],
// given theta on [0, b]. State before node a is summarised by the caller.
class Integrator {
 public:
  virtual ~Integrator() = default;
  /// Accepts theta on [0, a] as final and caches whatever the next window needs.
  virtual void commit(const SamplePath& theta, std::size_t a) = 0;
  /// T at nodes a+1..b written to out[(m - a - 1) * d + c].
  virtual void window(const SamplePath& theta, std::size_t a, std::size_t b,
                      std::vector<double>& out) const = 0;
  virtual double committed_value(std::size_t c) const = 0;  // T at the committed node
};

// Spectral path: sum_{i,j<m} box_{ij} = Re sum_k c_k |P_m(k)|^2 with
// P_m(k) = sum_{j<m} (l_{j+1} - l_j)(xi_k) e^{i<xi_k, theta_j>}. The update
// |P_{m+1}|^2 - |P_m|^2 = 2 Re(conj(P_m) D_m) + |D_m|^2 carries the new x old,
// old x new and new x new pieces of [0, t_{m+1}]^2 \ [0, t_m]^2.
class SpectralIntegrator final : public Integrator {
 public:
  explicit SpectralIntegrator(const SelfInteractionField& A)
      : A_(A), K_(A.spectral().size()), d_(A.dim()), P_(K_, cplx(0.0, 0.0)), T_(d_, 0.0) {}

  void commit(const SamplePath& theta, std::size_t a) override {
    for (; committed_ < a; ++committed_) advance(P_, theta, committed_, 0, K_);
    std::fill(T_.begin(), T_.end(), 0.0);
    accumulate(P_, 0, K_, T_);
  }

  void window(const SamplePath& theta, std::size_t a, std::size_t b,
              std::vector<double>& out) const override {
    const std::size_t L = b - a;
    out.assign(L * d_, 0.0);
    const std::size_t blocks = std::min(kSpectralBlocks, K_);
    std::vector<std::vector<double>> partial(blocks, std::vector<double>(L * d_, 0.0));
    parallel_for(blocks, [&](std::size_t blk) {
      const std::size_t lo = K_ * blk / blocks;
      const std::size_t hi = K_ * (blk + 1) / blocks;
      std::vector<cplx> P(P_.begin(), P_.end());
      std::vector<double> t(d_);
      for (std::size_t m = a; m < b; ++m) {
        advance(P, theta, m, lo, hi);
        std::fill(t.begin(), t.end(), 0.0);
        accumulate(P, lo, hi, t);
        for (std::size_t c = 0; c < d_; ++c) partial[blk][(m - a) * d_ + c] = t[c];
      }
    });
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += partial[blk][i];
    }
  }

  double committed_value(std::size_t c) const override { return T_[c]; }

 private:
  void advance(std::vector<cplx>& P, const SamplePath& theta, std::size_t j, std::size_t lo,
               std::size_t hi) const {
    for (std::size_t k = lo; k < hi; ++k) {
      const auto xi = A_.spectral().point(k);
      double phase = 0.0;
      for (std::size_t c = 0; c < d_; ++c) phase += xi[c] * theta(j, c);
      P[k] += (A_.l(j + 1, k) - A_.l(j, k)) * std::polar(1.0, phase);
    }
  }

  void accumulate(const std::vector<cplx>& P, std::size_t lo, std::size_t hi,
                  std::vector<double>& t) const {
    const auto& coef = A_.coefficients();
    for (std::size_t k = lo; k < hi; ++k) {
      const double p2 = std::norm(P[k]);
      for (std::size_t c = 0; c < d_; ++c) t[c] += coef[k * d_ + c].real() * p2;
    }
  }

  const SelfInteractionField& A_;
  std::size_t K_;
  std::size_t d_;
  std::vector<cplx> P_;
  std::vector<double> T_;
  std::size_t committed_ = 0;
};

// General field: T_{m+1} = T_m + sum_{i<m} box_{i,m} A(theta_m - theta_i)
//                        + sum_{j<m} box_{m,j} A(theta_j - theta_m) + box_{m,m} A(0).
class CornerIntegrator final : public Integrator {
 public:
  CornerIntegrator(const TwoParamField& A, const TimeGrid& grid)
      : A_(A), grid_(grid), d_(A.dim), T_(d_, 0.0) {}

  void commit(const SamplePath& theta, std::size_t a) override {
    std::vector<double> step(d_);
    for (; committed_ < a; ++committed_) {
      increment(theta, committed_, step);
      for (std::size_t c = 0; c < d_; ++c) T_[c] += step[c];
    }
  }

  void window(const SamplePath& theta, std::size_t a, std::size_t b,
              std::vector<double>& out) const override {
    out.assign((b - a) * d_, 0.0);
    std::vector<double> increments((b - a) * d_);
    parallel_for(b - a, [&](std::size_t i) {
      increment(theta, a + i, std::span<double>(increments.data() + i * d_, d_));
    });
    std::vector<double> t(T_);
    for (std::size_t i = 0; i < b - a; ++i) {
      for (std::size_t c = 0; c < d_; ++c) {
        t[c] += increments[i * d_ + c];
        out[i * d_ + c] = t[c];
      }
    }
  }

  double committed_value(std::size_t c) const override { return T_[c]; }

 private:
  void box(std::size_t i, std::size_t j, std::span<const double> x, std::span<double> acc) const {
    std::vector<double> f11(d_), f10(d_), f01(d_), f00(d_);
    A_.eval(grid_.t(i + 1), grid_.t(j + 1), x, f11);
    A_.eval(grid_.t(i + 1), grid_.t(j), x, f10);
    A_.eval(grid_.t(i), grid_.t(j + 1), x, f01);
    A_.eval(grid_.t(i), grid_.t(j), x, f00);
    for (std::size_t c = 0; c < d_; ++c) acc[c] += f11[c] - f10[c] - f01[c] + f00[c];
  }

  void increment(const SamplePath& theta, std::size_t m, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> x(d_);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < d_; ++c) x[c] = theta(m, c) - theta(i, c);
      box(i, m, x, out);
      for (std::size_t c = 0; c < d_; ++c) x[c] = -x[c];
      box(m, i, x, out);
    }
    std::fill(x.begin(), x.end(), 0.0);
    box(m, m, x, out);
  }

  const TwoParamField& A_;
  TimeGrid grid_;
  std::size_t d_;
  std::vector<double> T_;
  std::size_t committed_ = 0;
};

double window_norm(const std::vector<double>& v, std::size_t d, const TimeGrid& grid,
                   std::size_t a, double gamma) {
  // C^gamma proxy over nodes a..b of a difference that vanishes at node a.
  const std::size_t L = v.size() / d;
  double sup = 0.0;
  double semi = 0.0;
  auto at = [&](std::size_t i, std::size_t c) { return i == 0 ? 0.0 : v[(i - 1) * d + c]; };
  for (std::size_t i = 0; i <= L; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += at(i, c) * at(i, c);
    sup = std::max(sup, std::sqrt(s));
    for (std::size_t j = i + 1; j <= L; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += (at(j, c) - at(i, c)) * (at(j, c) - at(i, c));
      semi = std::max(semi, std::sqrt(acc) / std::pow(grid.t(a + j) - grid.t(a + i), gamma));
    }
  }
  return sup + semi;
}

SolveResult run_picard(Integrator& integ, std::size_t d, const SolverConfig& cfg,
                       const SamplePath& z) {
  if (cfg.u0.size() != d) throw DomainError("selfinteract", "u0 must have d components");
  if (!(cfg.gamma > 0.5 && cfg.gamma <= 1.0)) throw DomainError("selfinteract", "gamma must lie in (1/2, 1]");
  if (!(cfg.picard_tol > 0.0)) throw DomainError("selfinteract", "picard_tol must be positive");
  if (cfg.max_iters == 0) throw DomainError("selfinteract", "max_iters must be positive");
  const TimeGrid& grid = z.grid();
  const std::size_t n = grid.n_steps();
  const double dt = grid.dt();
  const bool auto_tau = !(cfg.step_tau > 0.0);
  double tau = auto_tau ? grid.horizon() : cfg.step_tau;

  SolveResult res{SamplePath(grid, d), SamplePath(grid, d), {}, 0.0, 0, 0.0, {}};
  SamplePath& theta = res.theta;
  for (std::size_t c = 0; c < d; ++c) theta(0, c) = cfg.u0[c];

  std::size_t a = 0;
  std::vector<double> T;
  while (a < n) {
    integ.commit(theta, a);
    const std::size_t steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(tau / dt + 1e-9)));
    const std::size_t b = std::min(n, a + steps);
    for (std::size_t m = a + 1; m <= b; ++m) {
      for (std::size_t c = 0; c < d; ++c) theta(m, c) = theta(a, c);
    }
    WindowReport rep{grid.t(a), grid.t(b), tau, 0, 0.0};
    double last = -1.0;
    bool converged = false;
    std::vector<double> update((b - a) * d);
    for (std::size_t k = 0; k < cfg.max_iters; ++k) {
      integ.window(theta, a, b, T);
      for (std::size_t m = a + 1; m <= b; ++m) {
        for (std::size_t c = 0; c < d; ++c) {
          const double next = cfg.u0[c] + T[(m - a - 1) * d + c];
          if (!std::isfinite(next)) throw OverflowError("selfinteract", "Picard iterate is not finite");
          update[(m - a - 1) * d + c] = next - theta(m, c);
          theta(m, c) = next;
        }
      }
      ++rep.iterations;
      const double u = window_norm(update, d, grid, a, cfg.gamma);
      if (last > cfg.picard_tol && u > 0.0) rep.contraction = std::max(rep.contraction, u / last);
      last = u;
      if (u <= cfg.picard_tol) {
        converged = true;
        break;
      }
    }
    const bool contracting = rep.contraction <= 0.5;
    if (auto_tau && (!converged || !contracting) && b - a > 1) {
      tau = std::max(dt, 0.5 * tau);
      continue;
    }
    if (!converged || (b - a == 1 && rep.contraction > 0.9)) {
      throw ContractionError("selfinteract",
                             "no contraction on [" + std::to_string(rep.start) + ", " +
                                 std::to_string(rep.end) + "] with tau = " + std::to_string(tau) +
                                 " (measured factor " + std::to_string(rep.contraction) + ")");
    }
    res.total_iterations += rep.iterations;
    res.max_contraction = std::max(res.max_contraction, rep.contraction);
    res.windows.push_back(rep);
    a = b;
  }
  return res;
}

// Post-hoc defect of the assembled solution on all of [0, T], then u = theta + z.
void finish(SolveResult& res, Integrator& fresh, const SolverConfig& cfg, const SamplePath& z) {
  const std::size_t n = z.grid().n_steps();
  const std::size_t d = z.dim();
  fresh.commit(res.theta, 0);
  std::vector<double> T;
  fresh.window(res.theta, 0, n, T);
  double defect = 0.0;
  for (std::size_t m = 1; m <= n; ++m) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double r = res.theta(m, c) - cfg.u0[c] - T[(m - 1) * d + c];
      acc += r * r;
    }
    defect = std::max(defect, std::sqrt(acc));
  }
  res.defect = defect;
  if (defect > 2.0 * cfg.picard_tol) {
    res.warnings.push_back("post-hoc defect " + std::to_string(defect) + " exceeds 2 * picard_tol");
  }
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t c = 0; c < d; ++c) res.u(i, c) = res.theta(i, c) + z(i, c);
  }
}

void check_nodes(const std::vector<double>& nodes, const TimeGrid& grid) {
  if (nodes.size() != grid.n_nodes()) {
    throw DomainError("selfinteract", "the field must be built on every node of the driving path");
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (std::abs(nodes[i] - grid.t(i)) > 1e-12 * (1.0 + grid.horizon())) {
      throw AlignmentError("selfinteract", "field nodes do not match the driving path grid");
    }
  }
}

}  // namespace

SolveResult solve_picard(const SelfInteractionField& A, const SolverConfig& cfg,
                         const SamplePath& z) {
  if (z.dim() != A.dim()) throw DomainError("selfinteract", "path and field dimensions disagree");
  if (!A.diagonal_nodes()) {
    throw DomainError("selfinteract", "the field must use the same nodes for t1 and t2");
  }
  check_nodes(A.t1_nodes(), z.grid());
  SpectralIntegrator integ(A);
  auto res = run_picard(integ, A.dim(), cfg, z);
  SpectralIntegrator fresh(A);
  finish(res, fresh, cfg, z);
  for (const auto& w : A.warnings()) res.warnings.push_back(w);
  return res;
}

SolveResult solve_picard(const TwoParamField& A, const SolverConfig& cfg, const SamplePath& z) {
  if (!A.eval) throw DomainError("selfinteract", "field has no eval function");
  if (z.dim() != A.dim) throw DomainError("selfinteract", "path and field dimensions disagree");
  CornerIntegrator integ(A, z.grid());
  auto res = run_picard(integ, A.dim, cfg, z);
  CornerIntegrator fresh(A, z.grid());
  finish(res, fresh, cfg, z);
  return res;
}

SolveResult solve_drift(const FourierDrift& b, const SamplePath& z, std::span<const double> weights,
                        const SpectralGrid& spectral, const SolverConfig& cfg) {
  const TimeGrid& grid = z.grid();
  std::vector<double> w(weights.begin(), weights.end());
  if (w.empty()) w.assign(grid.n_nodes(), 1.0);
  std::vector<double> nodes(grid.n_nodes());
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = grid.t(i);
  const auto G = self_intersection_ft(z, w, spectral, nodes, nodes);
  const auto field = build_field(b, G);
  return solve_picard(*field, cfg, z);
}

StabilityTable stability_experiment(const FourierDrift& b, std::span<const double> levels,
                                    const SamplePath& z, std::span<const double> weights,
                                    const SpectralGrid& spectral, const SolverConfig& cfg,
                                    double reference_level, std::span<const double> u0_shifts) {
  if (levels.empty()) throw DomainError("selfinteract", "stability_experiment needs levels");
  if (!u0_shifts.empty() && u0_shifts.size() != levels.size()) {
    throw DomainError("selfinteract", "u0_shifts must be empty or one per level");
  }
  const FourierDrift ref = reference_level > 0.0 ? b.mollified(reference_level) : b;
  StabilityTable table{{}, reference_level, solve_drift(ref, z, weights, spectral, cfg)};

  const std::size_t K = spectral.size();
  const std::size_t d = b.dim;
  const std::size_t n = z.grid().n_steps();
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const FourierDrift bn = b.mollified(levels[l]);
    SolverConfig c = cfg;
    const double shift = u0_shifts.empty() ? 0.0 : u0_shifts[l];
    for (auto& v : c.u0) v += shift;
    const auto sol = solve_drift(bn, z, weights, spectral, c);

    std::vector<cplx> diff(K);
    for (std::size_t k = 0; k < K; ++k) {
      const auto a = bn.evaluate(spectral.point(k));
      const auto r = ref.evaluate(spectral.point(k));
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += std::norm(a[i] - r[i]);
      diff[k] = std::sqrt(acc);
    }
    SamplePath du(z.grid(), d);
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t k = 0; k < d; ++k) du(i, k) = sol.u(i, k) - table.reference.u(i, k);
    }
    StabilityRow row;
    row.level = levels[l];
    row.drift_distance = fl_norm(diff, spectral, b.fl_delta, b.fl_qprime);
    row.u0_distance = std::abs(shift) * std::sqrt(static_cast<double>(d));
    row.solution_distance = holder_norm_nodes(du, 0, n, cfg.gamma);
    const double denom = row.drift_distance + row.u0_distance;
    row.ratio = denom > 0.0 ? row.solution_distance / denom : 0.0;
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace vlab
