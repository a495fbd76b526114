#pragma once

#include <span>
#include <vector>

namespace arcfit {

struct Observation {
  double position = 0.0;  // beats
  double value = 0.0;     // BPM, or any real-valued signal

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Ordered observations with strictly increasing positions.
struct TempoSeries {
  std::vector<Observation> points;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  std::vector<double> positions() const;
  std::vector<double> values() const;

  /// Throws ValidationError on non-finite entries or non-increasing positions.
  void validate() const;

  static TempoSeries from_columns(std::span<const double> positions,
                                  std::span<const double> values);

  friend bool operator==(const TempoSeries&, const TempoSeries&) = default;
};

}  // namespace arcfit
