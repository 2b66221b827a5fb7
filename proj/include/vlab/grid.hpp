#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vlab {

/// Uniform discretisation t_i = i*T/n of [0, T].
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t n_steps);

  double horizon() const noexcept { return horizon_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  std::size_t n_nodes() const noexcept { return n_steps_ + 1; }
  double dt() const noexcept { return horizon_ / static_cast<double>(n_steps_); }
  double t(std::size_t i) const noexcept {
    return i == n_steps_ ? horizon_ : static_cast<double>(i) * dt();
  }

  /// Index of the node at time `t`; throws AlignmentError when `t` is not a node.
  std::size_t index_of(double t) const;
  bool is_node(double t) const noexcept;

  bool operator==(const TimeGrid& other) const noexcept {
    return horizon_ == other.horizon_ && n_steps_ == other.n_steps_;
  }

 private:
  double horizon_;
  std::size_t n_steps_;
};

/// A d-dimensional trajectory sampled on every node of a TimeGrid.
class SamplePath {
 public:
  SamplePath(TimeGrid grid, std::size_t dim);
  SamplePath(TimeGrid grid, std::size_t dim, std::vector<double> values);

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return grid_.n_nodes(); }

  std::span<double> row(std::size_t i) noexcept { return {values_.data() + i * dim_, dim_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {values_.data() + i * dim_, dim_};
  }
  double& operator()(std::size_t i, std::size_t k) noexcept { return values_[i * dim_ + k]; }
  double operator()(std::size_t i, std::size_t k) const noexcept { return values_[i * dim_ + k]; }

  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }

  /// Free-form diagnostics attached by producers (e.g. factorisation fallbacks).
  std::vector<std::string> warnings;

  bool all_finite() const noexcept;

 private:
  TimeGrid grid_;
  std::size_t dim_;
  std::vector<double> values_;
};

}  // namespace vlab
