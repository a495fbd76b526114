#include "arcfit/multiscale.hpp"

#include <cmath>

#include "arcfit/errors.hpp"

namespace arcfit {

TwoLevelAnalysis decompose(const TempoSeries& data, const PriorSet& long_priors,
                           const PriorSet& short_priors, std::size_t max_lookback,
                           const FitOptions& fit_options) {
  long_priors.validate();
  short_priors.validate();
  if (!(long_priors.duration.log_mean > short_priors.duration.log_mean)) {
    throw DomainError("long-scale duration prior median must exceed the short-scale one");
  }
  TwoLevelAnalysis out;
  out.long_priors = long_priors;
  out.short_priors = short_priors;
  out.long_scale = fit_series(data, long_priors, max_lookback, fit_options);

  TempoSeries residual;
  residual.points.reserve(data.size());
  out.residuals.reserve(data.size());
  for (const Observation& obs : data.points) {
    const double r = obs.value - out.long_scale.value_at(obs.position);
    out.residuals.push_back(r);
    residual.points.push_back({obs.position, r});
  }
  out.short_scale = fit_series(residual, short_priors, max_lookback, fit_options);
  return out;
}

std::vector<double> reconstruct(const TwoLevelAnalysis& analysis,
                                std::span<const double> positions) {
  std::vector<double> out;
  out.reserve(positions.size());
  for (double x : positions) {
    out.push_back(analysis.long_scale.value_at(x) + analysis.short_scale.value_at(x));
  }
  return out;
}

DevianceReport mean_barline_deviance(const Segmentation& seg, double bar_length) {
  if (!std::isfinite(bar_length) || !(bar_length > 0.0)) {
    throw DomainError("bar length must be finite and positive");
  }
  if (seg.arcs.empty()) throw DomainError("segmentation has no arcs");
  DevianceReport report;
  double sum = 0.0;
  for (double p : seg.interior_breakpoints()) {
    double phase = std::fmod(p, bar_length);
    if (phase < 0.0) phase += bar_length;
    const double dev = std::min(phase, bar_length - phase) / bar_length;
    report.per_breakpoint.emplace_back(p, dev);
    sum += dev;
  }
  if (!report.per_breakpoint.empty()) {
    report.mean_deviance = sum / static_cast<double>(report.per_breakpoint.size());
  }
  return report;
}

}  // namespace arcfit
