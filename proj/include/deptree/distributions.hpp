#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "deptree/errors.hpp"
#include "deptree/rng.hpp"

namespace deptree {

/// Nonparametric CDF over increasing support times, linear between support
/// points. Mass not covered by the final CDF value never fires within the
/// mission (censored).
struct EmpiricalDistribution {
  std::string id;
  std::vector<double> times;
  std::vector<double> cdf;

  void validate() const {
    if (times.size() < 2 || times.size() != cdf.size())
      throw ValidationError("empirical distribution '" + id +
                            "': need >= 2 aligned support points");
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!std::isfinite(times[i]) || !std::isfinite(cdf[i]))
        throw ValidationError("empirical distribution '" + id +
                              "': non-finite support point");
      if (cdf[i] < 0.0 || cdf[i] > 1.0)
        throw ValidationError("empirical distribution '" + id +
                              "': CDF value outside [0,1]");
      if (i > 0 && times[i] <= times[i - 1])
        throw ValidationError("empirical distribution '" + id +
                              "': support times not strictly increasing");
      if (i > 0 && cdf[i] < cdf[i - 1])
        throw ValidationError("empirical distribution '" + id +
                              "': CDF not nondecreasing");
    }
    if (times.front() < 0.0)
      throw ValidationError("empirical distribution '" + id +
                            "': negative support time");
  }

  /// CDF evaluated at t; clamped to the boundary values outside the support.
  double cdf_at(double t) const {
    if (t <= times.front()) return t < times.front() ? 0.0 : cdf.front();
    if (t >= times.back()) return cdf.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - times.begin());
    std::size_t lo = hi - 1;
    double w = (t - times[lo]) / (times[hi] - times[lo]);
    return cdf[lo] + w * (cdf[hi] - cdf[lo]);
  }

  /// Inverse CDF. Draws beyond the final CDF value are censored: +infinity.
  double quantile(double u) const {
    if (u > cdf.back()) return std::numeric_limits<double>::infinity();
    if (u <= cdf.front()) return times.front();
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    std::size_t hi = static_cast<std::size_t>(it - cdf.begin());
    std::size_t lo = hi - 1;
    // Skip over flat segments: interpolate within the first segment that
    // actually gains mass.
    double dp = cdf[hi] - cdf[lo];
    if (dp <= 0.0) return times[hi];
    double w = (u - cdf[lo]) / dp;
    return times[lo] + w * (times[hi] - times[lo]);
  }
};

struct ExponentialDelay {
  double rate = 0.0;  // per hour; rate 0 never fires
};

struct ImmediateDelay {};

/// Reference to a model-level empirical distribution by id.
struct DistributionRef {
  std::string id;
};

using TransitionDelay =
    std::variant<ExponentialDelay, EmpiricalDistribution, DistributionRef,
                 ImmediateDelay>;

/// Samples a firing delay (hours from enabling). Empirical references must be
/// resolved before sampling.
inline double sample_delay(const TransitionDelay& delay, RandomStream& rng) {
  if (std::holds_alternative<ImmediateDelay>(delay)) return 0.0;
  if (const auto* exp = std::get_if<ExponentialDelay>(&delay)) {
    if (exp->rate <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log1p(-rng.uniform01()) / exp->rate;
  }
  if (const auto* emp = std::get_if<EmpiricalDistribution>(&delay))
    return emp->quantile(rng.uniform01());
  throw AnalysisError("unresolved distribution reference '" +
                      std::get<DistributionRef>(delay).id + "'");
}

}  // namespace deptree
