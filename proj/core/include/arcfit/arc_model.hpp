#pragma once

#include <array>
#include <optional>
#include <span>

#include "arcfit/optimizer.hpp"

namespace arcfit {

/// One arc in normalized coordinates: f(u) = a + b u - exp(c) u^2 with
/// u = 0 at the arc start and u = 1 at its end. Parameterizing curvature as
/// -exp(c) makes every arc concave.
struct ArcParams {
  double a = 0.0;  // value at the arc start
  double b = 0.0;  // slope per normalized duration
  double c = 0.0;  // log-curvature

  friend bool operator==(const ArcParams&, const ArcParams&) = default;
};

double eval_arc(const ArcParams& params, double u) noexcept;

struct GaussianPrior {
  double mean = 0.0;
  double sd = 1.0;

  double neg_log_density(double x) const noexcept;
  void validate(const char* name) const;

  friend bool operator==(const GaussianPrior&, const GaussianPrior&) = default;
};

/// Log-normal prior over arc duration in beats.
struct LogNormalPrior {
  double log_mean = 0.0;
  double log_sd = 1.0;

  double neg_log_density(double duration) const noexcept;
  double median() const noexcept;
  void validate() const;

  friend bool operator==(const LogNormalPrior&, const LogNormalPrior&) = default;
};

/// Model hyperparameters. The arc start value has an improper uniform prior,
/// which is why there is no field for it.
struct PriorSet {
  GaussianPrior slope{0.0, 10.0};
  GaussianPrior curvature{2.0794415416798357, 1.0};  // ln 8
  LogNormalPrior duration{2.772588722239781, 0.5};   // median 16 beats
  double noise_sd = 3.0;

  /// Throws DomainError if any field is non-finite or any scale is <= 0.
  void validate() const;

  friend bool operator==(const PriorSet&, const PriorSet&) = default;
};

/// Ridge penalty weight equivalent to a gaussian prior: noise variance over
/// prior variance.
double regularization_coefficient(double noise_sd, double prior_sd);

/// A non-owning view of the observations an arc is fit to.
///
/// positions.front() is the arc start. When start_constraint is set the arc
/// must begin at that value and the start datum is not part of the
/// likelihood (the preceding arc already accounted for it). Without a
/// constraint the start value is free and every datum is counted.
///
/// end_position overrides the arc end for arcs that extend past the observed
/// data (hypothetical future breakpoints); by default the arc ends at
/// positions.back().
struct DataWindow {
  std::span<const double> positions;
  std::span<const double> values;
  std::optional<double> start_constraint;
  std::optional<double> end_position;

  double start_pos() const { return positions.front(); }
  double end_pos() const { return end_position ? *end_position : positions.back(); }
  double duration() const { return end_pos() - start_pos(); }

  /// First index of the data counted in the likelihood.
  std::size_t first_counted() const noexcept { return start_constraint ? 1 : 0; }

  /// Throws DomainError when the window is empty, mismatched, non-finite,
  /// not strictly increasing, or has zero duration.
  void validate() const;
};

struct FittedArc {
  double start_pos = 0.0;
  double end_pos = 0.0;
  ArcParams params;
  double log_map = 0.0;  // this arc's additive contribution to a path score

  double duration() const noexcept { return end_pos - start_pos; }
  double normalized(double x) const noexcept { return (x - start_pos) / (end_pos - start_pos); }
  double value_at(double x) const noexcept { return eval_arc(params, normalized(x)); }
  double end_value() const noexcept { return eval_arc(params, 1.0); }

  friend bool operator==(const FittedArc&, const FittedArc&) = default;
};

/// Negative log posterior density of one arc: gaussian likelihood of the
/// counted residuals, gaussian priors on b and c, and the log-normal prior on
/// the duration, all with their normalizing constants.
double neg_log_posterior(const DataWindow& window, const ArcParams& params,
                         const PriorSet& priors);

/// Analytic gradient of neg_log_posterior with respect to (a, b, c). The a
/// component is reported even when the window is constrained; callers that
/// hold a fixed simply ignore it.
std::array<double, 3> neg_log_posterior_gradient(const DataWindow& window,
                                                 const ArcParams& params,
                                                 const PriorSet& priors);

struct FitOptions {
  optim::MinimizeConfig optimizer{};
  /// Holds c at this value and optimizes only over the remaining parameters.
  std::optional<double> fixed_curvature;

  friend bool operator==(const FitOptions&, const FitOptions&) = default;
};

/// MAP fit of one arc to a window.
///
/// With a start constraint, a is pinned and the search runs over (b, c).
/// Without one, a is free; for any (b, c) its optimum is the mean of the
/// counted data minus the arc shape, so it is profiled out analytically and
/// the numerical search still runs over (b, c) only. The search result is
/// refined by Newton steps on the analytic gradient and Hessian.
///
/// Throws OptimizerError if the search does not converge.
FittedArc fit_arc(const DataWindow& window, const PriorSet& priors,
                  const FitOptions& options = {});

}  // namespace arcfit
