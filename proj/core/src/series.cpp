#include "arcfit/series.hpp"

#include <cmath>
#include <string>

#include "arcfit/errors.hpp"

namespace arcfit {

std::vector<double> TempoSeries::positions() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.position);
  return out;
}

std::vector<double> TempoSeries::values() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.value);
  return out;
}

void TempoSeries::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.position) || !std::isfinite(p.value)) {
      throw ValidationError("non-finite observation at index " + std::to_string(i));
    }
    if (i > 0 && !(p.position > points[i - 1].position)) {
      throw ValidationError("positions not strictly increasing at index " + std::to_string(i));
    }
  }
}

TempoSeries TempoSeries::from_columns(std::span<const double> positions,
                                      std::span<const double> values) {
  if (positions.size() != values.size()) {
    throw ValidationError("position and value columns differ in length");
  }
  TempoSeries s;
  s.points.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) s.points.push_back({positions[i], values[i]});
  return s;
}

}  // namespace arcfit
