#include "arcfit/arc_model.hpp"

#include <cmath>
#include <utility>
#include <numbers>
#include <string>
#include <vector>

#include "arcfit/errors.hpp"

namespace arcfit {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void require_finite_positive(double v, const char* what) {
  if (!std::isfinite(v) || !(v > 0.0)) {
    throw DomainError(std::string(what) + " must be finite and positive");
  }
}

// Normalized positions and values of the counted data in a window, plus the
// parts of the objective that do not depend on the arc parameters.
struct PreparedWindow {
  std::vector<double> u;
  std::vector<double> y;
  double constant = 0.0;
};

PreparedWindow prepare(const DataWindow& w, const PriorSet& priors) {
  PreparedWindow p;
  const double start = w.start_pos();
  const double dur = w.duration();
  const std::size_t first = w.first_counted();
  p.u.reserve(w.positions.size());
  p.y.reserve(w.positions.size());
  for (std::size_t i = first; i < w.positions.size(); ++i) {
    p.u.push_back((w.positions[i] - start) / dur);
    p.y.push_back(w.values[i]);
  }
  p.constant = static_cast<double>(p.u.size()) * (std::log(priors.noise_sd) + kHalfLog2Pi) +
               std::log(priors.slope.sd) + kHalfLog2Pi +
               std::log(priors.curvature.sd) + kHalfLog2Pi +
               priors.duration.neg_log_density(dur);
  return p;
}

double objective(const PreparedWindow& p, const PriorSet& priors, double a, double b, double c) {
  const double curv = std::exp(c);
  double sse = 0.0;
  for (std::size_t i = 0; i < p.u.size(); ++i) {
    const double u = p.u[i];
    const double r = p.y[i] - (a + b * u - curv * u * u);
    sse += r * r;
  }
  const double zb = (b - priors.slope.mean) / priors.slope.sd;
  const double zc = (c - priors.curvature.mean) / priors.curvature.sd;
  return p.constant + 0.5 * sse / (priors.noise_sd * priors.noise_sd) + 0.5 * zb * zb +
         0.5 * zc * zc;
}

// Optimal free start value for given (b, c): with a flat prior on a the
// likelihood is minimized by the mean of y - (b u - e^c u^2).
double profiled_start(const PreparedWindow& p, double b, double c) {
  const double curv = std::exp(c);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.u.size(); ++i) {
    const double u = p.u[i];
    sum += p.y[i] - b * u + curv * u * u;
  }
  return sum / static_cast<double>(p.u.size());
}

// Newton refinement of a search result. Within about sqrt(eps) of the
// optimum the objective is flat to rounding, so a search driven by function
// values stops there; steps from the analytic gradient and Hessian continue
// to near machine precision. A step is kept only while it shrinks the
// gradient without raising the objective beyond rounding.
ArcParams polish(const PreparedWindow& p, const PriorSet& priors, ArcParams x, bool free_a,
                 bool free_c) {
  std::array<int, 3> active{};
  int n = 0;
  if (free_a) active[n++] = 0;
  active[n++] = 1;
  if (free_c) active[n++] = 2;

  const double inv_var = 1.0 / (priors.noise_sd * priors.noise_sd);
  const double inv_vb = 1.0 / (priors.slope.sd * priors.slope.sd);
  const double inv_vc = 1.0 / (priors.curvature.sd * priors.curvature.sd);

  auto derivatives = [&](const ArcParams& q, std::array<double, 3>& g,
                         std::array<std::array<double, 3>, 3>& h) {
    const double curv = std::exp(q.c);
    g = {};
    h = {};
    for (std::size_t i = 0; i < p.u.size(); ++i) {
      const double u = p.u[i];
      const double k = curv * u * u;
      const double r = p.y[i] - (q.a + q.b * u - k);
      g[0] -= r;
      g[1] -= r * u;
      g[2] += r * k;
      h[0][0] += 1.0;
      h[0][1] += u;
      h[0][2] -= k;
      h[1][1] += u * u;
      h[1][2] -= k * u;
      h[2][2] += k * k + r * k;
    }
    for (auto& row : h) {
      for (double& v : row) v *= inv_var;
    }
    for (double& v : g) v *= inv_var;
    g[1] += (q.b - priors.slope.mean) * inv_vb;
    g[2] += (q.c - priors.curvature.mean) * inv_vc;
    h[1][1] += inv_vb;
    h[2][2] += inv_vc;
    h[1][0] = h[0][1];
    h[2][0] = h[0][2];
    h[2][1] = h[1][2];
  };
  auto active_norm = [&](const std::array<double, 3>& g) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += g[active[i]] * g[active[i]];
    return std::sqrt(s);
  };

  std::array<double, 3> g;
  std::array<std::array<double, 3>, 3> h;
  derivatives(x, g, h);
  double gnorm = active_norm(g);
  double f = objective(p, priors, x.a, x.b, x.c);
  for (int iter = 0; iter < 8 && gnorm > 0.0; ++iter) {
    // Solve H d = -g on the active block by Gaussian elimination.
    double m[3][4];
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) m[i][j] = h[active[i]][active[j]];
      m[i][n] = -g[active[i]];
    }
    bool singular = false;
    for (int col = 0; col < n && !singular; ++col) {
      int piv = col;
      for (int r = col + 1; r < n; ++r) {
        if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
      }
      if (!(std::abs(m[piv][col]) > 0.0)) {
        singular = true;
        break;
      }
      for (int j = 0; j <= n; ++j) std::swap(m[col][j], m[piv][j]);
      for (int r = col + 1; r < n; ++r) {
        const double factor = m[r][col] / m[col][col];
        for (int j = col; j <= n; ++j) m[r][j] -= factor * m[col][j];
      }
    }
    if (singular) break;
    std::array<double, 3> d{};
    for (int i = n - 1; i >= 0; --i) {
      double s = m[i][n];
      for (int j = i + 1; j < n; ++j) s -= m[i][j] * d[active[j]];
      d[active[i]] = s / m[i][i];
    }
    ArcParams next{x.a + d[0], x.b + d[1], x.c + d[2]};
    std::array<double, 3> g_next;
    std::array<std::array<double, 3>, 3> h_next;
    derivatives(next, g_next, h_next);
    const double f_next = objective(p, priors, next.a, next.b, next.c);
    const double gnorm_next = active_norm(g_next);
    if (!std::isfinite(f_next) || !(gnorm_next < gnorm) ||
        f_next > f + 1e-12 * (1.0 + std::abs(f))) {
      break;
    }
    x = next;
    g = g_next;
    h = h_next;
    gnorm = gnorm_next;
    f = f_next;
  }
  return x;
}

}  // namespace

double eval_arc(const ArcParams& params, double u) noexcept {
  return params.a + params.b * u - std::exp(params.c) * u * u;
}

double GaussianPrior::neg_log_density(double x) const noexcept {
  const double z = (x - mean) / sd;
  return 0.5 * z * z + std::log(sd) + kHalfLog2Pi;
}

void GaussianPrior::validate(const char* name) const {
  if (!std::isfinite(mean)) throw DomainError(std::string(name) + " prior mean must be finite");
  require_finite_positive(sd, name);
}

double LogNormalPrior::neg_log_density(double duration) const noexcept {
  const double ld = std::log(duration);
  const double z = (ld - log_mean) / log_sd;
  return 0.5 * z * z + ld + std::log(log_sd) + kHalfLog2Pi;
}

double LogNormalPrior::median() const noexcept { return std::exp(log_mean); }

void LogNormalPrior::validate() const {
  if (!std::isfinite(log_mean)) throw DomainError("duration prior log-mean must be finite");
  require_finite_positive(log_sd, "duration prior log-sd");
}

void PriorSet::validate() const {
  slope.validate("slope");
  curvature.validate("curvature");
  duration.validate();
  require_finite_positive(noise_sd, "noise sd");
}

double regularization_coefficient(double noise_sd, double prior_sd) {
  require_finite_positive(noise_sd, "noise sd");
  require_finite_positive(prior_sd, "prior sd");
  return (noise_sd * noise_sd) / (prior_sd * prior_sd);
}

void DataWindow::validate() const {
  if (positions.empty()) throw DomainError("data window is empty");
  if (positions.size() != values.size()) {
    throw DomainError("data window positions and values differ in length");
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!std::isfinite(positions[i]) || !std::isfinite(values[i])) {
      throw DomainError("data window has a non-finite entry at index " + std::to_string(i));
    }
    if (i > 0 && !(positions[i] > positions[i - 1])) {
      throw DomainError("data window positions must be strictly increasing");
    }
  }
  if (start_constraint && !std::isfinite(*start_constraint)) {
    throw DomainError("start constraint must be finite");
  }
  if (end_position) {
    if (!std::isfinite(*end_position) || *end_position < positions.back()) {
      throw DomainError("window end must not precede its last datum");
    }
  }
  if (!(duration() > 0.0)) throw DomainError("data window has zero duration");
}

double neg_log_posterior(const DataWindow& window, const ArcParams& params,
                         const PriorSet& priors) {
  window.validate();
  priors.validate();
  if (window.start_constraint && params.a != *window.start_constraint) {
    throw DomainError("arc start value does not match the window constraint");
  }
  const PreparedWindow p = prepare(window, priors);
  return objective(p, priors, params.a, params.b, params.c);
}

std::array<double, 3> neg_log_posterior_gradient(const DataWindow& window,
                                                 const ArcParams& params,
                                                 const PriorSet& priors) {
  window.validate();
  priors.validate();
  const PreparedWindow p = prepare(window, priors);
  const double curv = std::exp(params.c);
  const double inv_var = 1.0 / (priors.noise_sd * priors.noise_sd);
  double ga = 0.0, gb = 0.0, gc = 0.0;
  for (std::size_t i = 0; i < p.u.size(); ++i) {
    const double u = p.u[i];
    const double r = p.y[i] - eval_arc(params, u);
    ga -= r;
    gb -= r * u;
    gc += r * curv * u * u;
  }
  ga *= inv_var;
  gb = gb * inv_var + (params.b - priors.slope.mean) / (priors.slope.sd * priors.slope.sd);
  gc = gc * inv_var +
       (params.c - priors.curvature.mean) / (priors.curvature.sd * priors.curvature.sd);
  return {ga, gb, gc};
}

FittedArc fit_arc(const DataWindow& window, const PriorSet& priors, const FitOptions& options) {
  window.validate();
  priors.validate();
  if (options.fixed_curvature && !std::isfinite(*options.fixed_curvature)) {
    throw DomainError("fixed curvature must be finite");
  }
  const PreparedWindow p = prepare(window, priors);
  const std::optional<double> constraint = window.start_constraint;
  const std::optional<double> fixed_c = options.fixed_curvature;

  auto unpack = [&](std::span<const double> x) {
    ArcParams ap;
    ap.b = x[0];
    ap.c = fixed_c ? *fixed_c : x[1];
    ap.a = constraint ? *constraint : profiled_start(p, ap.b, ap.c);
    return ap;
  };
  const optim::Objective f = [&](std::span<const double> x) {
    const ArcParams ap = unpack(x);
    return objective(p, priors, ap.a, ap.b, ap.c);
  };
  // With a profiled out, the envelope theorem makes the partial derivatives
  // in (b, c) at the optimal a the gradient of the reduced objective.
  const optim::Gradient grad = [&](std::span<const double> x, std::span<double> g) {
    const ArcParams ap = unpack(x);
    const double curv = std::exp(ap.c);
    const double inv_var = 1.0 / (priors.noise_sd * priors.noise_sd);
    double gb = 0.0, gc = 0.0;
    for (std::size_t i = 0; i < p.u.size(); ++i) {
      const double u = p.u[i];
      const double r = p.y[i] - (ap.a + ap.b * u - curv * u * u);
      gb -= r * u;
      gc += r * curv * u * u;
    }
    g[0] = gb * inv_var + (ap.b - priors.slope.mean) / (priors.slope.sd * priors.slope.sd);
    if (!fixed_c) {
      g[1] = gc * inv_var +
             (ap.c - priors.curvature.mean) / (priors.curvature.sd * priors.curvature.sd);
    }
  };

  std::vector<double> x0{priors.slope.mean};
  if (!fixed_c) x0.push_back(priors.curvature.mean);

  const optim::MinimizeResult res = optim::minimize(f, x0, options.optimizer, grad);
  if (!res.converged) {
    throw OptimizerError("arc fit did not converge within " +
                             std::to_string(options.optimizer.max_iters) +
                             " iterations over [" + std::to_string(window.start_pos()) + ", " +
                             std::to_string(window.end_pos()) + "]",
                         res.argmin, res.value);
  }

  FittedArc arc;
  arc.start_pos = window.start_pos();
  arc.end_pos = window.end_pos();
  ArcParams best = polish(p, priors, unpack(res.argmin), !constraint, !fixed_c);
  if (!constraint) best.a = profiled_start(p, best.b, best.c);
  arc.params = best;
  arc.log_map = -objective(p, priors, best.a, best.b, best.c);
  return arc;
}

}  // namespace arcfit
