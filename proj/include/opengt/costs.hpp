#pragma once

// Local cost functions and cluster objectives.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "opengt/errors.hpp"

namespace opengt {

// f(x) = a/2 (x - b)^2
struct Quadratic {
  double a;
  double b;
};

// Arbitrary smooth convex cost given by value and gradient callbacks.
struct Custom {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> gradient;
  std::optional<double> mu;  // declared strong-convexity modulus, if known
};

class CostFunction {
 public:
  static CostFunction quadratic(double a, double b, std::size_t valid_from = 0) {
    if (!(a > 0) || !std::isfinite(a)) throw ConfigError("quadratic curvature must be positive, got " + std::to_string(a));
    if (!std::isfinite(b)) throw ConfigError("quadratic target must be finite");
    return CostFunction(Quadratic{a, b}, a, valid_from);
  }

  static CostFunction custom(Custom fn, double lipschitz, std::size_t valid_from = 0) {
    if (!(lipschitz > 0) || !std::isfinite(lipschitz))
      throw ConfigError("lipschitz constant must be positive, got " + std::to_string(lipschitz));
    if (!fn.value || !fn.gradient) throw ConfigError("custom cost '" + fn.name + "' needs value and gradient");
    return CostFunction(std::move(fn), lipschitz, valid_from);
  }

  const std::variant<Quadratic, Custom>& kind() const noexcept { return kind_; }
  bool is_quadratic() const noexcept { return std::holds_alternative<Quadratic>(kind_); }
  double lipschitz() const noexcept { return lipschitz_; }
  std::size_t valid_from() const noexcept { return valid_from_; }

  CostFunction with_valid_from(std::size_t round) const {
    CostFunction copy = *this;
    copy.valid_from_ = round;
    return copy;
  }

 private:
  CostFunction(std::variant<Quadratic, Custom> kind, double lipschitz, std::size_t valid_from)
      : kind_(std::move(kind)), lipschitz_(lipschitz), valid_from_(valid_from) {}

  std::variant<Quadratic, Custom> kind_;
  double lipschitz_;
  std::size_t valid_from_;
};

namespace detail {

inline double checked(double v, const char* what, const std::string& name, double x) {
  if (!std::isfinite(v))
    throw EvaluationError(std::string(what) + " of '" + name + "' is not finite at x=" + std::to_string(x));
  return v;
}

}  // namespace detail

inline double gradient(const CostFunction& c, double x) {
  if (const auto* q = std::get_if<Quadratic>(&c.kind())) return q->a * (x - q->b);
  const auto& fn = std::get<Custom>(c.kind());
  double g;
  try {
    g = fn.gradient(x);
  } catch (const EvaluationError&) {
    throw;
  } catch (const std::exception& e) {
    throw EvaluationError("gradient of '" + fn.name + "' failed: " + e.what());
  }
  return detail::checked(g, "gradient", fn.name, x);
}

inline double value(const CostFunction& c, double x) {
  if (const auto* q = std::get_if<Quadratic>(&c.kind())) return 0.5 * q->a * (x - q->b) * (x - q->b);
  const auto& fn = std::get<Custom>(c.kind());
  double v;
  try {
    v = fn.value(x);
  } catch (const EvaluationError&) {
    throw;
  } catch (const std::exception& e) {
    throw EvaluationError("value of '" + fn.name + "' failed: " + e.what());
  }
  return detail::checked(v, "value", fn.name, x);
}

// a * log(cosh(x - b)): smooth, convex, L = a, but only locally strongly convex.
inline CostFunction logcosh_cost(double a, double b, std::size_t valid_from = 0) {
  if (!(a > 0)) throw ConfigError("logcosh weight must be positive");
  Custom fn{"logcosh",
            [a, b](double x) {
              // log(cosh(t)) = |t| + log1p(exp(-2|t|)) - log 2, stable for large |t|
              const double t = std::abs(x - b);
              return a * (t + std::log1p(std::exp(-2.0 * t)) - std::log(2.0));
            },
            [a, b](double x) { return a * std::tanh(x - b); },
            std::nullopt};
  return CostFunction::custom(std::move(fn), a, valid_from);
}

struct ClusterObjective {
  std::vector<CostFunction> costs;

  bool all_quadratic() const {
    for (const auto& c : costs)
      if (!c.is_quadratic()) return false;
    return true;
  }

  double total_lipschitz() const {
    double sum = 0;
    for (const auto& c : costs) sum += c.lipschitz();
    return sum;
  }

  // Strong-convexity modulus of the sum: exact for quadratics, the declared
  // value for custom costs, nullopt if any custom cost declares none.
  std::optional<double> mu() const {
    double sum = 0;
    for (const auto& c : costs) {
      if (const auto* q = std::get_if<Quadratic>(&c.kind())) {
        sum += q->a;
      } else if (auto m = std::get<Custom>(c.kind()).mu) {
        sum += *m;
      } else {
        return std::nullopt;
      }
    }
    return sum;
  }
};

inline double cluster_objective_value(const ClusterObjective& obj, double x) {
  if (obj.costs.empty()) throw ConfigError("cluster objective has no members");
  double sum = 0;
  for (const auto& c : obj.costs) sum += value(c, x);
  return sum;
}

inline double cluster_gradient(const ClusterObjective& obj, double x) {
  double sum = 0;
  for (const auto& c : obj.costs) sum += gradient(c, x);
  return sum;
}

struct MinimizerOptions {
  double tolerance = 1e-12;
  std::size_t max_iterations = 1'000'000;
};

// Centralized gradient descent with step 1/sum(L_j), stopped once the gradient
// of the sum has absolute value <= tolerance. Used as the reference minimizer
// for costs without a closed form.
inline double gradient_descent_minimizer(const ClusterObjective& obj, MinimizerOptions opts = {}) {
  if (obj.costs.empty()) throw ConfigError("cluster objective has no members");
  const double step = 1.0 / obj.total_lipschitz();
  double x = 0.0;
  double g = cluster_gradient(obj, x);
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    if (std::abs(g) <= opts.tolerance) return x;
    const double next = x - step * g;
    if (next == x) break;  // stalled at floating-point resolution
    x = next;
    g = cluster_gradient(obj, x);
  }
  if (std::abs(g) <= opts.tolerance) return x;
  throw EvaluationError("gradient descent did not reach |grad| <= " + std::to_string(opts.tolerance) +
                        " (residual " + std::to_string(std::abs(g)) + " at x=" + std::to_string(x) + ")");
}

inline double cluster_minimizer(const ClusterObjective& obj) {
  if (obj.costs.empty()) throw ConfigError("cluster objective has no members");
  if (!obj.all_quadratic()) return gradient_descent_minimizer(obj);
  double num = 0, den = 0;
  for (const auto& c : obj.costs) {
    const auto& q = std::get<Quadratic>(c.kind());
    num += q.a * q.b;
    den += q.a;
  }
  return num / den;
}

struct GradientCheck {
  bool ok = true;
  double worst_relative_error = 0;
  double worst_x = 0;
};

// Compares the gradient callback against central finite differences of the
// value callback at `points` uniform samples from [lo, hi].
inline GradientCheck check_gradient(const CostFunction& c, std::mt19937_64& rng, std::size_t points = 100,
                                    double lo = -10.0, double hi = 10.0, double tolerance = 1e-5) {
  std::uniform_real_distribution<double> dist(lo, hi);
  GradientCheck result;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = dist(rng);
    const double h = 1e-5 * std::max(1.0, std::abs(x));
    const double fd = (value(c, x + h) - value(c, x - h)) / (2 * h);
    const double g = gradient(c, x);
    const double rel = std::abs(fd - g) / std::max(1.0, std::abs(g));
    if (rel > result.worst_relative_error) {
      result.worst_relative_error = rel;
      result.worst_x = x;
    }
  }
  result.ok = result.worst_relative_error <= tolerance;
  return result;
}

}  // namespace opengt
