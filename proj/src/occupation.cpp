#include "vlab/occupation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "vlab/errors.hpp"

namespace vlab {

SpectralGrid::SpectralGrid(std::size_t dim, std::vector<double> xi, std::vector<double> weights,
                           double spacing)
    : dim_(dim), xi_(std::move(xi)), weights_(std::move(weights)), spacing_(spacing) {
  if (dim_ == 0) throw DomainError("occupation", "spectral dimension must be positive");
  if (weights_.empty() || xi_.size() != weights_.size() * dim_) {
    throw DomainError("occupation", "spectral grid needs size * dim coordinates and size weights");
  }
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw DomainError("occupation", "spectral quadrature weights must be positive");
    }
  }
  std::map<std::vector<double>, std::size_t> index;
  for (std::size_t k = 0; k < size(); ++k) {
    std::vector<double> p(point(k).begin(), point(k).end());
    for (double v : p) {
      if (!std::isfinite(v)) throw DomainError("occupation", "frequencies must be finite");
    }
    if (!index.emplace(std::move(p), k).second) {
      throw DomainError("occupation", "spectral points must be distinct");
    }
  }
  negation_.assign(size(), npos);
  for (std::size_t k = 0; k < size(); ++k) {
    std::vector<double> p(dim_);
    for (std::size_t a = 0; a < dim_; ++a) p[a] = -xi_[k * dim_ + a];
    auto it = index.find(p);
    if (it != index.end()) negation_[k] = it->second;
  }
}

SpectralGrid SpectralGrid::uniform(double xi_max, std::size_t n_half) {
  return tensor(1, xi_max, n_half);
}

SpectralGrid SpectralGrid::for_range(double xi_max, double range) {
  if (!(xi_max > 0.0) || !(range > 0.0)) {
    throw DomainError("occupation", "xi_max and range must be positive");
  }
  const auto n_half = static_cast<std::size_t>(std::ceil(xi_max * range / std::numbers::pi));
  return uniform(xi_max, std::max<std::size_t>(1, n_half));
}

SpectralGrid SpectralGrid::tensor(std::size_t dim, double xi_max, std::size_t n_half) {
  if (!(xi_max > 0.0) || n_half == 0) {
    throw DomainError("occupation", "uniform spectral grid needs xi_max > 0 and n_half >= 1");
  }
  const double h = xi_max / static_cast<double>(n_half);
  const std::size_t per_axis = 2 * n_half + 1;
  std::vector<double> axis(per_axis);
  std::vector<double> axis_w(per_axis, h);
  for (std::size_t i = 0; i < per_axis; ++i) {
    const auto k = static_cast<double>(i) - static_cast<double>(n_half);
    axis[i] = k * h;
  }
  axis_w.front() = axis_w.back() = 0.5 * h;
  std::size_t total = 1;
  for (std::size_t a = 0; a < dim; ++a) total *= per_axis;
  std::vector<double> xi(total * dim);
  std::vector<double> w(total, 1.0);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t rest = k;
    for (std::size_t a = dim; a-- > 0;) {
      const std::size_t i = rest % per_axis;
      rest /= per_axis;
      xi[k * dim + a] = axis[i];
      w[k] *= axis_w[i];
    }
  }
  return SpectralGrid(dim, std::move(xi), std::move(w), h);
}

SpectralGrid SpectralGrid::from_points(std::size_t dim, std::vector<double> xi,
                                       std::vector<double> weights) {
  return SpectralGrid(dim, std::move(xi), std::move(weights), 0.0);
}

double SpectralGrid::norm(std::size_t k) const noexcept {
  double acc = 0.0;
  for (double v : point(k)) acc += v * v;
  return std::sqrt(acc);
}

bool SpectralGrid::symmetric() const noexcept {
  return std::none_of(negation_.begin(), negation_.end(), [](std::size_t i) { return i == npos; });
}

double SpectralGrid::xi_max() const noexcept {
  double m = 0.0;
  for (double v : xi_) m = std::max(m, std::abs(v));
  return m;
}

namespace {

void check_inputs(const SamplePath& path, std::span<const double> weights, double delta,
                  const SpectralGrid& spectral) {
  if (weights.size() != path.size()) {
    throw AlignmentError("occupation", "weights must have one entry per path node");
  }
  for (double w : weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw DomainError("occupation", "weights must lie in [0, 1]");
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw DomainError("occupation", "weight exponent delta must be >= 0");
  }
  if (spectral.dim() != path.dim()) {
    throw DomainError("occupation", "spectral and path dimensions differ");
  }
}

// Adds rho_j^delta e^{i<xi_k, X_j>} dt to acc for every frequency. Frequencies
// whose negation was handled earlier are filled by conjugation, which makes the
// conjugate symmetry exact.
class PhaseAccumulator {
 public:
  PhaseAccumulator(const SamplePath& path, std::span<const double> weights, double delta,
                   const SpectralGrid& spectral)
      : path_(path), weights_(weights), delta_(delta), spectral_(spectral) {
    for (std::size_t k = 0; k < spectral.size(); ++k) {
      const std::size_t neg = spectral.negation()[k];
      if (neg != SpectralGrid::npos && neg < k) {
        mirrored_.emplace_back(k, neg);
      } else {
        direct_.push_back(k);
      }
    }
  }

  void add(std::size_t j, std::span<cplx> acc) const {
    const double w = std::pow(weights_[j], delta_) * path_.grid().dt();
    if (w == 0.0) return;
    const auto x = path_.row(j);
    for (std::size_t k : direct_) {
      const auto xi = spectral_.point(k);
      double phase = 0.0;
      for (std::size_t a = 0; a < x.size(); ++a) phase += xi[a] * x[a];
      acc[k] += cplx(w * std::cos(phase), w * std::sin(phase));
    }
  }

  void mirror(std::span<cplx> values) const {
    for (const auto& [k, neg] : mirrored_) values[k] = std::conj(values[neg]);
  }

 private:
  const SamplePath& path_;
  std::span<const double> weights_;
  double delta_;
  const SpectralGrid& spectral_;
  std::vector<std::size_t> direct_;
  std::vector<std::pair<std::size_t, std::size_t>> mirrored_;
};

}  // namespace

OccupationFT occupation_ft(const SamplePath& path, std::span<const double> weights, double delta,
                           const SpectralGrid& spectral,
                           std::span<const std::pair<double, double>> pairs) {
  check_inputs(path, weights, delta, spectral);
  const TimeGrid& grid = path.grid();
  const std::size_t K = spectral.size();

  std::vector<std::size_t> ends;
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  for (const auto& [s, t] : pairs) {
    const std::size_t is = grid.index_of(s);
    const std::size_t it = grid.index_of(t);
    if (is > it) throw DomainError("occupation", "time pairs need s <= t");
    idx.emplace_back(is, it);
    ends.push_back(is);
    ends.push_back(it);
  }
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());

  // Running sums recorded at each distinct endpoint.
  const PhaseAccumulator phases(path, weights, delta, spectral);
  std::vector<cplx> running(K, cplx(0.0, 0.0));
  std::vector<cplx> at_end(ends.size() * K);
  std::size_t next = 0;
  for (std::size_t j = 0; next < ends.size(); ++j) {
    while (next < ends.size() && ends[next] == j) {
      std::copy(running.begin(), running.end(), at_end.begin() + next * K);
      ++next;
    }
    if (next < ends.size()) phases.add(j, running);
  }

  OccupationFT ft{spectral, {pairs.begin(), pairs.end()}, std::vector<cplx>(pairs.size() * K),
                  delta};
  for (std::size_t p = 0; p < idx.size(); ++p) {
    const auto a = static_cast<std::size_t>(
        std::lower_bound(ends.begin(), ends.end(), idx[p].first) - ends.begin());
    const auto b = static_cast<std::size_t>(
        std::lower_bound(ends.begin(), ends.end(), idx[p].second) - ends.begin());
    std::span<cplx> out(ft.values.data() + p * K, K);
    for (std::size_t k = 0; k < K; ++k) out[k] = at_end[b * K + k] - at_end[a * K + k];
    phases.mirror(out);
  }
  return ft;
}

std::vector<cplx> occupation_prefix(const SamplePath& path, std::span<const double> weights,
                                    double delta, const SpectralGrid& spectral) {
  check_inputs(path, weights, delta, spectral);
  const std::size_t K = spectral.size();
  const std::size_t n = path.grid().n_steps();
  const PhaseAccumulator phases(path, weights, delta, spectral);
  std::vector<cplx> out((n + 1) * K, cplx(0.0, 0.0));
  std::vector<cplx> running(K, cplx(0.0, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    phases.add(j, running);
    std::copy(running.begin(), running.end(), out.begin() + (j + 1) * K);
  }
  for (std::size_t i = 0; i <= n; ++i) phases.mirror({out.data() + i * K, K});
  return out;
}

SelfIntersectionFT::SelfIntersectionFT(SpectralGrid spectral, std::vector<double> t1_nodes,
                                       std::vector<double> t2_nodes, std::vector<cplx> l_t1,
                                       std::vector<cplx> l_t2)
    : spectral_(std::move(spectral)),
      t1_(std::move(t1_nodes)),
      t2_(std::move(t2_nodes)),
      l1_(std::move(l_t1)),
      l2_(std::move(l_t2)) {
  if (l1_.size() != t1_.size() * spectral_.size() || l2_.size() != t2_.size() * spectral_.size()) {
    throw DomainError("occupation", "self-intersection factors have the wrong shape");
  }
}

std::vector<cplx> SelfIntersectionFT::tensor() const {
  const std::size_t K = spectral_.size();
  std::vector<cplx> out(t1_.size() * t2_.size() * K);
  for (std::size_t a = 0; a < t1_.size(); ++a) {
    for (std::size_t b = 0; b < t2_.size(); ++b) {
      for (std::size_t k = 0; k < K; ++k) out[(a * t2_.size() + b) * K + k] = value(a, b, k);
    }
  }
  return out;
}

SelfIntersectionFT self_intersection_ft(const SamplePath& path, std::span<const double> weights,
                                        const SpectralGrid& spectral,
                                        std::span<const double> t1_nodes,
                                        std::span<const double> t2_nodes) {
  const auto prefix = occupation_prefix(path, weights, 1.0, spectral);
  const std::size_t K = spectral.size();
  auto gather = [&](std::span<const double> nodes) {
    std::vector<cplx> rows(nodes.size() * K);
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      const std::size_t i = path.grid().index_of(nodes[a]);
      std::copy_n(prefix.begin() + static_cast<std::ptrdiff_t>(i * K), K, rows.begin() + a * K);
    }
    return rows;
  };
  return SelfIntersectionFT(spectral, {t1_nodes.begin(), t1_nodes.end()},
                            {t2_nodes.begin(), t2_nodes.end()}, gather(t1_nodes),
                            gather(t2_nodes));
}

double fl_norm(std::span<const cplx> values, const SpectralGrid& spectral, double kappa,
               double q) {
  if (values.size() != spectral.size()) {
    throw DomainError("occupation", "values must match the spectral grid");
  }
  if (!(q >= 1.0)) throw DomainError("occupation", "q must be >= 1 or infinity");
  if (std::isinf(q)) {
    double m = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double bracket = std::sqrt(1.0 + spectral.norm(k) * spectral.norm(k));
      m = std::max(m, std::pow(bracket, kappa) * std::abs(values[k]));
    }
    return m;
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double bracket2 = 1.0 + spectral.norm(k) * spectral.norm(k);
    acc += spectral.weight(k) * std::pow(bracket2, 0.5 * kappa * q) * std::pow(std::abs(values[k]), q);
  }
  return std::pow(acc, 1.0 / q);
}

LocalTime local_time_reconstruct(const OccupationFT& ft, std::size_t pair_index, double x_min,
                                 double x_max, std::size_t n_x) {
  const SpectralGrid& sg = ft.spectral;
  if (sg.dim() != 1) throw DomainError("occupation", "local time reconstruction is 1-d");
  if (!sg.symmetric() || sg.spacing() <= 0.0) {
    throw DomainError("occupation", "local time reconstruction needs a symmetric uniform grid");
  }
  if (pair_index >= ft.pairs.size()) throw DomainError("occupation", "pair index out of range");
  if (n_x < 2 || !(x_max > x_min)) throw DomainError("occupation", "x window is empty");
  LocalTime lt;
  lt.x.resize(n_x);
  lt.values.resize(n_x);
  const auto row = ft.row(pair_index);
  double sup = 0.0;
  for (std::size_t i = 0; i < n_x; ++i) {
    const double x = x_min + (x_max - x_min) * static_cast<double>(i) / static_cast<double>(n_x - 1);
    cplx acc(0.0, 0.0);
    for (std::size_t k = 0; k < sg.size(); ++k) {
      const double phase = -sg.point(k)[0] * x;
      acc += sg.weight(k) * cplx(std::cos(phase), std::sin(phase)) * row[k];
    }
    acc /= 2.0 * std::numbers::pi;
    lt.x[i] = x;
    lt.values[i] = acc.real();
    lt.imag_residue = std::max(lt.imag_residue, std::abs(acc.imag()));
    sup = std::max(sup, std::abs(acc.real()));
  }
  if (lt.imag_residue > 0.01 * sup) {
    lt.warnings.push_back("imaginary residue " + std::to_string(lt.imag_residue) +
                          " exceeds 1% of the real sup; spectral grid may be truncated");
  }
  return lt;
}

}  // namespace vlab
