#include "arcfit/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "arcfit/errors.hpp"

namespace arcfit::optim {
namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;

std::string describe(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

double checked(const Objective& f, std::span<const double> x) {
  const double v = f(x);
  if (!std::isfinite(v)) {
    throw OptimizerError("objective is not finite at " + describe(x),
                         std::vector<double>(x.begin(), x.end()), v);
  }
  return v;
}

MinimizeResult nelder_mead(const Objective& f, std::span<const double> x0,
                           const MinimizeConfig& cfg) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(x0.begin(), x0.end()));
  for (std::size_t i = 0; i < n; ++i) {
    simplex[i + 1][i] += std::max(0.1, 0.1 * std::abs(x0[i]));
  }
  std::vector<double> fx(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fx[i] = checked(f, simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);

  MinimizeResult result;
  int it = 0;
  for (;; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // stable so equal values keep vertex order; keeps runs bit-reproducible
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t l, std::size_t r) { return fx[l] < fx[r]; });

    const auto& best = simplex[order[0]];
    double xspread = 0.0;
    double fspread = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      const auto& v = simplex[order[i]];
      for (std::size_t j = 0; j < n; ++j) xspread = std::max(xspread, std::abs(v[j] - best[j]));
      fspread = std::max(fspread, std::abs(fx[order[i]] - fx[order[0]]));
    }
    if (xspread <= cfg.param_tol && fspread <= cfg.func_tol * (1.0 + std::abs(fx[order[0]]))) {
      result.converged = true;
      break;
    }
    if (it >= cfg.max_iters) break;

    const std::size_t worst = order[n];
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[order[i]][j];
    }
    for (auto& v : centroid) v /= static_cast<double>(n);

    const auto& xw = simplex[worst];
    for (std::size_t j = 0; j < n; ++j) xr[j] = centroid[j] + kReflect * (centroid[j] - xw[j]);
    const double fr = checked(f, xr);

    if (fr < fx[order[0]]) {
      for (std::size_t j = 0; j < n; ++j) xe[j] = centroid[j] + kExpand * (xr[j] - centroid[j]);
      const double fe = checked(f, xe);
      if (fe < fr) {
        simplex[worst] = xe;
        fx[worst] = fe;
      } else {
        simplex[worst] = xr;
        fx[worst] = fr;
      }
      continue;
    }
    if (fr < fx[order[n - 1]]) {
      simplex[worst] = xr;
      fx[worst] = fr;
      continue;
    }

    const bool outside = fr < fx[worst];
    const auto& toward = outside ? xr : xw;
    for (std::size_t j = 0; j < n; ++j) {
      xc[j] = centroid[j] + kContract * (toward[j] - centroid[j]);
    }
    const double fc = checked(f, xc);
    if (fc < (outside ? fr : fx[worst])) {
      simplex[worst] = xc;
      fx[worst] = fc;
      continue;
    }

    const std::vector<double> anchor = simplex[order[0]];
    for (std::size_t i = 1; i <= n; ++i) {
      auto& v = simplex[order[i]];
      for (std::size_t j = 0; j < n; ++j) v[j] = anchor[j] + kShrink * (v[j] - anchor[j]);
      fx[order[i]] = checked(f, v);
    }
  }

  const auto best = static_cast<std::size_t>(
      std::min_element(fx.begin(), fx.end()) - fx.begin());
  result.argmin = simplex[best];
  result.value = fx[best];
  result.iterations = it;
  return result;
}

MinimizeResult gradient_descent(const Objective& f, std::span<const double> x0,
                                const MinimizeConfig& cfg, const Gradient& grad) {
  const std::size_t n = x0.size();
  auto gradient_at = [&](std::span<const double> x, std::span<double> g) {
    if (grad) {
      grad(x, g);
    } else {
      const auto ng = numeric_gradient(f, x);
      std::copy(ng.begin(), ng.end(), g.begin());
    }
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw OptimizerError("gradient is not finite at " + describe(x),
                             std::vector<double>(x.begin(), x.end()), f(x));
      }
    }
  };

  std::vector<double> x(x0.begin(), x0.end()), g(n), xn(n), gn(n);
  double fxv = checked(f, x);
  gradient_at(x, g);

  MinimizeResult result;
  double step = 1.0;
  const double gnorm0 = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
  if (gnorm0 > 0.0) step = std::min(1.0, 1.0 / gnorm0);

  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    const double gg = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    if (gg == 0.0) {
      result.converged = true;
      break;
    }
    double fnew = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < n; ++j) xn[j] = x[j] - step * g[j];
      fnew = f(xn);
      if (std::isfinite(fnew) && fnew <= fxv - 1e-4 * step * gg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // no measurable decrease left along -g
      result.converged = true;
      break;
    }
    gradient_at(xn, gn);

    double sy = 0.0, ss = 0.0, dx = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double s = xn[j] - x[j];
      sy += s * (gn[j] - g[j]);
      ss += s * s;
      dx = std::max(dx, std::abs(s));
    }
    const double df = fxv - fnew;
    x.swap(xn);
    g.swap(gn);
    fxv = fnew;
    if (dx <= cfg.param_tol && df <= cfg.func_tol * (1.0 + std::abs(fxv))) {
      result.converged = true;
      ++it;
      break;
    }
    step = sy > 0.0 ? ss / sy : std::min(1.0, 2.0 * step);
  }

  result.argmin = std::move(x);
  result.value = fxv;
  result.iterations = it;
  return result;
}

}  // namespace

void MinimizeConfig::validate() const {
  if (!(param_tol > 0.0) || !(func_tol > 0.0)) {
    throw DomainError("minimize: tolerances must be positive");
  }
  if (max_iters <= 0) throw DomainError("minimize: max_iters must be positive");
}

MinimizeResult minimize(const Objective& objective, std::span<const double> x0,
                        const MinimizeConfig& config, const Gradient& gradient) {
  config.validate();
  if (x0.empty()) throw DomainError("minimize: empty starting point");
  switch (config.method) {
    case Method::simplex:
      return nelder_mead(objective, x0, config);
    case Method::gradient_descent:
      return gradient_descent(objective, x0, config, gradient);
  }
  throw DomainError("minimize: unknown method");
}

std::vector<double> numeric_gradient(const Objective& objective, std::span<const double> x,
                                     double h) {
  if (!(h > 0.0)) throw DomainError("numeric_gradient: step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = checked(objective, probe);
    probe[i] = x[i] - h;
    const double down = checked(objective, probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace arcfit::optim
