#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "arcfit/arc_model.hpp"
#include "arcfit/series.hpp"

namespace arcfit {

inline constexpr std::size_t kDefaultMaxLookback = 32;

/// A chain of continuous arcs covering a series.
struct Segmentation {
  std::vector<FittedArc> arcs;
  double total_log_map = 0.0;
  /// Arc boundaries, series start and end included (arcs.size() + 1 entries).
  std::vector<double> breakpoints;
  /// Datum indices of the same boundaries.
  std::vector<std::size_t> breakpoint_indices;

  std::vector<double> interior_breakpoints() const;
  std::vector<std::size_t> interior_breakpoint_indices() const;

  double start_pos() const { return arcs.front().start_pos; }
  double end_pos() const { return arcs.back().end_pos; }

  /// Model value at x. At a shared boundary both arcs agree; the earlier arc
  /// is used. Throws DomainError outside [start_pos, end_pos].
  double value_at(double x) const;

  friend bool operator==(const Segmentation&, const Segmentation&) = default;
};

/// Best chain ending with a breakpoint at one datum.
struct ViterbiCell {
  std::size_t index = 0;
  double cum_log_map = 0.0;
  std::size_t back_index = 0;
  std::optional<FittedArc> arc;  // empty only for the sentinel at index 0

  friend bool operator==(const ViterbiCell&, const ViterbiCell&) = default;
};

struct Prediction {
  double chosen_end = 0.0;
  bool hypothetical = false;  // chosen_end is a grid point rather than real data
  std::size_t arc_start_index = 0;
  FittedArc arc;
  double total_log_map = 0.0;
  std::vector<Observation> trajectory;
};

/// Online MAP segmentation. Each datum is treated in turn as a definite
/// breakpoint, and the best arc chain ending there is recorded by searching
/// back over at most max_lookback candidate arc starts.
class SegmenterState {
 public:
  explicit SegmenterState(PriorSet priors, std::size_t max_lookback = kDefaultMaxLookback,
                          FitOptions fit_options = {});

  /// Appends one datum. Throws DomainError if its position does not exceed
  /// the last received position or if it is non-finite.
  void update(Observation datum);

  /// Backtracks from the last datum. Requires at least two data.
  Segmentation finalize() const;

  /// Best chain if the final arc may still be in progress. Grid points act as
  /// candidate breakpoints without observations. The state is not modified.
  Prediction predict(std::span<const double> grid) const;

  /// max_lookback future points spaced at the median inter-datum interval.
  std::vector<double> default_grid() const;

  std::size_t size() const noexcept { return cells_.size(); }
  bool empty() const noexcept { return cells_.empty(); }
  const std::vector<ViterbiCell>& cells() const noexcept { return cells_; }
  std::span<const double> positions() const noexcept { return positions_; }
  std::span<const double> values() const noexcept { return values_; }
  const PriorSet& priors() const noexcept { return priors_; }
  std::size_t max_lookback() const noexcept { return max_lookback_; }

  /// Arc fits performed by the most recent update, and over the lifetime.
  std::size_t last_update_fits() const noexcept { return last_update_fits_; }
  std::uint64_t total_fits() const noexcept { return total_fits_; }

  friend bool operator==(const SegmenterState&, const SegmenterState&) = default;

 private:
  DataWindow window(std::size_t start, std::size_t last,
                    std::optional<double> end_override) const;

  PriorSet priors_;
  std::size_t max_lookback_;
  FitOptions fit_options_;
  std::vector<double> positions_;
  std::vector<double> values_;
  std::vector<ViterbiCell> cells_;
  std::size_t last_update_fits_ = 0;
  std::uint64_t total_fits_ = 0;
};

/// Streams the whole series through a SegmenterState and finalizes.
Segmentation fit_series(const TempoSeries& data, const PriorSet& priors,
                        std::size_t max_lookback = kDefaultMaxLookback,
                        const FitOptions& fit_options = {});

inline constexpr std::size_t kBruteForceMaxPoints = 16;

struct BruteForceResult {
  Segmentation best;
  std::size_t evaluated = 0;  // segmentations scored, 2^(M-2)
  /// Second highest total among all segmentations; -inf when only one exists.
  double runner_up_log_map = 0.0;
};

/// Exhaustive search over every subset of interior data as breakpoints.
/// Ties go to fewer arcs, then to the lexicographically earliest breakpoint
/// set. Refuses series longer than kBruteForceMaxPoints.
BruteForceResult brute_force_search(const TempoSeries& data, const PriorSet& priors,
                                    const FitOptions& fit_options = {});

Segmentation brute_force_segment(const TempoSeries& data, const PriorSet& priors,
                                 const FitOptions& fit_options = {});

}  // namespace arcfit
