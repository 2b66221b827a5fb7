#include "vlab/grid.hpp"

#include <cmath>

#include "vlab/errors.hpp"

namespace vlab {

TimeGrid::TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw DomainError("simulate", "time grid horizon must be positive and finite");
  }
  if (n_steps < 2) throw DomainError("simulate", "time grid needs at least 2 steps");
}

bool TimeGrid::is_node(double t) const noexcept {
  if (!std::isfinite(t) || t < -1e-12 * horizon_ || t > horizon_ * (1.0 + 1e-12)) return false;
  const double x = t / dt();
  return std::abs(x - std::round(x)) <= 1e-8;
}

std::size_t TimeGrid::index_of(double t) const {
  if (!is_node(t)) {
    throw AlignmentError("grid", "time " + std::to_string(t) + " is not a grid node");
  }
  return static_cast<std::size_t>(std::llround(t / dt()));
}

SamplePath::SamplePath(TimeGrid grid, std::size_t dim)
    : grid_(grid), dim_(dim), values_(grid.n_nodes() * dim, 0.0) {
  if (dim == 0) throw DomainError("simulate", "path dimension must be positive");
}

SamplePath::SamplePath(TimeGrid grid, std::size_t dim, std::vector<double> values)
    : grid_(grid), dim_(dim), values_(std::move(values)) {
  if (dim == 0) throw DomainError("simulate", "path dimension must be positive");
  if (values_.size() != grid_.n_nodes() * dim_) {
    throw DomainError("simulate", "path values must have (n_steps+1)*dim entries");
  }
}

bool SamplePath::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace vlab
