#include "arcfit/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "arcfit/errors.hpp"

namespace arcfit {

std::vector<double> Segmentation::interior_breakpoints() const {
  if (breakpoints.size() < 2) return {};
  return {breakpoints.begin() + 1, breakpoints.end() - 1};
}

std::vector<std::size_t> Segmentation::interior_breakpoint_indices() const {
  if (breakpoint_indices.size() < 2) return {};
  return {breakpoint_indices.begin() + 1, breakpoint_indices.end() - 1};
}

double Segmentation::value_at(double x) const {
  if (arcs.empty()) throw DomainError("segmentation has no arcs");
  if (!(x >= start_pos() && x <= end_pos())) {
    throw DomainError("position " + std::to_string(x) + " is outside the segmentation span");
  }
  const auto it = std::lower_bound(arcs.begin(), arcs.end(), x,
                                   [](const FittedArc& arc, double v) { return arc.end_pos < v; });
  return it->value_at(x);
}

SegmenterState::SegmenterState(PriorSet priors, std::size_t max_lookback, FitOptions fit_options)
    : priors_(priors), max_lookback_(max_lookback), fit_options_(fit_options) {
  priors_.validate();
  fit_options_.optimizer.validate();
  if (max_lookback_ < 1) throw DomainError("max lookback must be at least 1");
}

DataWindow SegmenterState::window(std::size_t start, std::size_t last,
                                  std::optional<double> end_override) const {
  DataWindow w;
  w.positions = std::span<const double>(positions_).subspan(start, last - start + 1);
  w.values = std::span<const double>(values_).subspan(start, last - start + 1);
  if (start > 0) w.start_constraint = cells_[start].arc->end_value();
  w.end_position = end_override;
  return w;
}

void SegmenterState::update(Observation datum) {
  if (!std::isfinite(datum.position) || !std::isfinite(datum.value)) {
    throw DomainError("datum must be finite");
  }
  if (!positions_.empty() && !(datum.position > positions_.back())) {
    throw DomainError("datum position " + std::to_string(datum.position) +
                      " does not exceed the previous position " +
                      std::to_string(positions_.back()));
  }
  positions_.push_back(datum.position);
  values_.push_back(datum.value);
  const std::size_t n = positions_.size() - 1;

  if (n == 0) {
    cells_.push_back(ViterbiCell{0, 0.0, 0, std::nullopt});
    last_update_fits_ = 0;
    return;
  }

  ViterbiCell best;
  best.index = n;
  best.cum_log_map = -std::numeric_limits<double>::infinity();
  const std::size_t kmax = std::min(n, max_lookback_);
  try {
    for (std::size_t k = 1; k <= kmax; ++k) {
      const std::size_t start = n - k;
      FittedArc arc = fit_arc(window(start, n, std::nullopt), priors_, fit_options_);
      const double score = cells_[start].cum_log_map + arc.log_map;
      // strict: on ties the shorter final arc (smaller k) is kept
      if (score > best.cum_log_map) {
        best.cum_log_map = score;
        best.back_index = start;
        best.arc = arc;
      }
    }
  } catch (...) {
    positions_.pop_back();
    values_.pop_back();
    throw;
  }
  last_update_fits_ = kmax;
  total_fits_ += kmax;
  cells_.push_back(std::move(best));
}

Segmentation SegmenterState::finalize() const {
  if (cells_.size() < 2) throw DomainError("finalize needs at least two data");
  Segmentation seg;
  std::size_t i = cells_.size() - 1;
  seg.total_log_map = cells_[i].cum_log_map;
  seg.breakpoint_indices.push_back(i);
  while (i > 0) {
    const ViterbiCell& cell = cells_[i];
    seg.arcs.push_back(*cell.arc);
    i = cell.back_index;
    seg.breakpoint_indices.push_back(i);
  }
  std::reverse(seg.arcs.begin(), seg.arcs.end());
  std::reverse(seg.breakpoint_indices.begin(), seg.breakpoint_indices.end());
  for (std::size_t idx : seg.breakpoint_indices) seg.breakpoints.push_back(positions_[idx]);
  return seg;
}

std::vector<double> SegmenterState::default_grid() const {
  if (positions_.size() < 2) return {};
  std::vector<double> gaps;
  gaps.reserve(positions_.size() - 1);
  for (std::size_t i = 1; i < positions_.size(); ++i) {
    gaps.push_back(positions_[i] - positions_[i - 1]);
  }
  const auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
  std::nth_element(gaps.begin(), mid, gaps.end());
  double step = *mid;
  if (gaps.size() % 2 == 0) {
    step = 0.5 * (step + *std::max_element(gaps.begin(), mid));
  }
  std::vector<double> grid;
  grid.reserve(max_lookback_);
  for (std::size_t j = 1; j <= max_lookback_; ++j) {
    grid.push_back(positions_.back() + static_cast<double>(j) * step);
  }
  return grid;
}

Prediction SegmenterState::predict(std::span<const double> grid) const {
  if (cells_.empty()) throw DomainError("predict needs at least one datum");
  const double last_pos = positions_.back();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!std::isfinite(grid[j]) || !(grid[j] > last_pos) || (j > 0 && !(grid[j] > grid[j - 1]))) {
      throw DomainError("prediction grid must be strictly increasing and after the last datum");
    }
  }
  const std::size_t n = cells_.size() - 1;
  if (n == 0 && grid.empty()) {
    throw DomainError("predict needs two data or a non-empty grid");
  }

  Prediction best;
  best.total_log_map = -std::numeric_limits<double>::infinity();
  if (n > 0) {
    const ViterbiCell& cell = cells_[n];
    best.chosen_end = last_pos;
    best.hypothetical = false;
    best.arc_start_index = cell.back_index;
    best.arc = *cell.arc;
    best.total_log_map = cell.cum_log_map;
  }

  // Each grid point is scored as if it were the next datum: the final arc
  // starts at one of the last max_lookback real data and runs past the
  // observations to the grid point.
  const std::size_t kmax = std::min(n + 1, max_lookback_);
  for (double end : grid) {
    for (std::size_t k = 1; k <= kmax; ++k) {
      const std::size_t start = n + 1 - k;
      const FittedArc arc = fit_arc(window(start, n, end), priors_, fit_options_);
      const double score = cells_[start].cum_log_map + arc.log_map;
      if (score > best.total_log_map) {
        best.total_log_map = score;
        best.chosen_end = end;
        best.hypothetical = true;
        best.arc_start_index = start;
        best.arc = arc;
      }
    }
  }

  for (std::size_t i = best.arc_start_index; i <= n; ++i) {
    best.trajectory.push_back({positions_[i], best.arc.value_at(positions_[i])});
  }
  if (best.hypothetical) {
    for (double g : grid) {
      if (g > best.chosen_end) break;
      best.trajectory.push_back({g, best.arc.value_at(g)});
    }
  }
  return best;
}

Segmentation fit_series(const TempoSeries& data, const PriorSet& priors, std::size_t max_lookback,
                        const FitOptions& fit_options) {
  if (data.size() < 2) throw DomainError("fit_series needs at least two data");
  SegmenterState state(priors, max_lookback, fit_options);
  for (const Observation& obs : data.points) state.update(obs);
  return state.finalize();
}

namespace {

struct Candidate {
  double score;
  std::vector<std::size_t> cuts;  // breakpoint indices, both ends included
  std::vector<FittedArc> arcs;
};

// Higher score first; then fewer arcs; then lexicographically earliest cuts.
bool preferred(const Candidate& lhs, const Candidate& rhs) {
  if (lhs.score != rhs.score) return lhs.score > rhs.score;
  if (lhs.arcs.size() != rhs.arcs.size()) return lhs.arcs.size() < rhs.arcs.size();
  return lhs.cuts < rhs.cuts;
}

class Enumerator {
 public:
  Enumerator(const TempoSeries& data, const PriorSet& priors, const FitOptions& options)
      : positions_(data.positions()), values_(data.values()), priors_(priors), options_(options) {}

  BruteForceResult run() {
    Candidate prefix{0.0, {0}, {}};
    extend(prefix, std::nullopt);
    BruteForceResult out;
    out.evaluated = evaluated_;
    out.runner_up_log_map = runner_up_;
    out.best.arcs = best_->arcs;
    out.best.total_log_map = best_->score;
    out.best.breakpoint_indices = best_->cuts;
    for (std::size_t idx : best_->cuts) out.best.breakpoints.push_back(positions_[idx]);
    return out;
  }

 private:
  // Arcs are fit left to right so each one inherits its predecessor's end
  // value, and sums accumulate in the same order as the online recursion.
  void extend(Candidate& prefix, std::optional<double> start_value) {
    const std::size_t start = prefix.cuts.back();
    const std::size_t last = positions_.size() - 1;
    for (std::size_t end = start + 1; end <= last; ++end) {
      DataWindow w;
      w.positions = std::span<const double>(positions_).subspan(start, end - start + 1);
      w.values = std::span<const double>(values_).subspan(start, end - start + 1);
      w.start_constraint = start_value;
      const FittedArc arc = fit_arc(w, priors_, options_);

      const double saved = prefix.score;
      prefix.score = saved + arc.log_map;
      prefix.cuts.push_back(end);
      prefix.arcs.push_back(arc);
      if (end == last) {
        record(prefix);
      } else {
        extend(prefix, arc.end_value());
      }
      prefix.arcs.pop_back();
      prefix.cuts.pop_back();
      prefix.score = saved;
    }
  }

  void record(const Candidate& c) {
    ++evaluated_;
    if (!best_) {
      best_ = c;
      return;
    }
    if (preferred(c, *best_)) {
      runner_up_ = std::max(runner_up_, best_->score);
      best_ = c;
    } else {
      runner_up_ = std::max(runner_up_, c.score);
    }
  }

  std::vector<double> positions_;
  std::vector<double> values_;
  const PriorSet& priors_;
  const FitOptions& options_;
  std::optional<Candidate> best_;
  double runner_up_ = -std::numeric_limits<double>::infinity();
  std::size_t evaluated_ = 0;
};

}  // namespace

BruteForceResult brute_force_search(const TempoSeries& data, const PriorSet& priors,
                                    const FitOptions& fit_options) {
  if (data.size() < 2) throw DomainError("brute force segmentation needs at least two data");
  if (data.size() > kBruteForceMaxPoints) {
    throw DomainError("brute force segmentation refused for " + std::to_string(data.size()) +
                      " points (limit " + std::to_string(kBruteForceMaxPoints) + ")");
  }
  data.validate();
  priors.validate();
  return Enumerator(data, priors, fit_options).run();
}

Segmentation brute_force_segment(const TempoSeries& data, const PriorSet& priors,
                                 const FitOptions& fit_options) {
  return brute_force_search(data, priors, fit_options).best;
}

}  // namespace arcfit
