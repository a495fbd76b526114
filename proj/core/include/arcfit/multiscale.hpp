#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "arcfit/segmenter.hpp"

namespace arcfit {

/// Long-timescale fit plus a short-timescale fit to its residuals.
struct TwoLevelAnalysis {
  Segmentation long_scale;
  Segmentation short_scale;
  PriorSet long_priors;
  PriorSet short_priors;
  /// observed - long-scale model, per datum; the input of the second pass.
  std::vector<double> residuals;
};

/// Throws DomainError unless the long duration prior median exceeds the short one.
TwoLevelAnalysis decompose(const TempoSeries& data, const PriorSet& long_priors,
                           const PriorSet& short_priors,
                           std::size_t max_lookback = kDefaultMaxLookback,
                           const FitOptions& fit_options = {});

/// Long-scale plus short-scale model value at each position.
std::vector<double> reconstruct(const TwoLevelAnalysis& analysis,
                                std::span<const double> positions);

struct DevianceReport {
  /// (breakpoint position, distance to nearest barline as a fraction of a bar)
  std::vector<std::pair<double, double>> per_breakpoint;
  /// Empty when the segmentation has no interior breakpoints.
  std::optional<double> mean_deviance;
};

/// Distance of interior breakpoints from the nearest barline, barlines at
/// integer multiples of bar_length.
DevianceReport mean_barline_deviance(const Segmentation& seg, double bar_length);

}  // namespace arcfit
