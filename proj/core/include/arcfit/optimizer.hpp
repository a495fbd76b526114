#pragma once

#include <functional>
#include <span>
#include <vector>

namespace arcfit::optim {

enum class Method { simplex, gradient_descent };

struct MinimizeConfig {
  double param_tol = 1e-8;
  double func_tol = 1e-12;
  int max_iters = 500;
  Method method = Method::simplex;

  void validate() const;

  friend bool operator==(const MinimizeConfig&, const MinimizeConfig&) = default;
};

struct MinimizeResult {
  std::vector<double> argmin;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;
/// Writes the gradient at x into the output span (same length as x).
using Gradient = std::function<void(std::span<const double> x, std::span<double> grad)>;

/// Local minimization of a smooth scalar objective in a few dimensions.
///
/// The simplex method is Nelder-Mead with reflection/expansion/contraction/
/// shrink coefficients (1, 2, 0.5, 0.5) and an initial edge of
/// max(0.1, 0.1 |x0_i|) along each axis. It stops once every vertex lies
/// within param_tol of the best vertex (per coordinate) and the objective
/// spread is below func_tol * (1 + |f_best|).
///
/// The gradient method uses Barzilai-Borwein step lengths safeguarded by an
/// Armijo backtracking search, so every accepted step decreases the
/// objective. Without an analytic gradient it falls back to central
/// differences.
///
/// A NaN or infinite objective value anywhere along the search throws
/// OptimizerError carrying the offending point. Running out of iterations is
/// not an error; the result reports converged = false.
MinimizeResult minimize(const Objective& objective, std::span<const double> x0,
                        const MinimizeConfig& config = {}, const Gradient& gradient = {});

/// Central-difference gradient with step h along each axis.
std::vector<double> numeric_gradient(const Objective& objective, std::span<const double> x,
                                     double h = 1e-5);

}  // namespace arcfit::optim
