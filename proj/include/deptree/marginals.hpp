#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "deptree/errors.hpp"
#include "deptree/model.hpp"

namespace deptree {

namespace detail {

inline double interpolate_series(const std::vector<double>& times,
                                 const std::vector<double>& values, double t) {
  if (t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t hi = static_cast<std::size_t>(it - times.begin());
  std::size_t lo = hi - 1;
  double w = (t - times[lo]) / (times[hi] - times[lo]);
  return values[lo] + w * (values[hi] - values[lo]);
}

}  // namespace detail

/// Unavailability q(E, t) of a basic event at mission time t. Constant-rate
/// events follow the two-state closed form lambda/(lambda+nu) *
/// (1 - exp(-(lambda+nu) t)); nu = 0 degenerates to 1 - exp(-lambda t).
inline double unavailability_at(const SystemModel& model, const BasicEvent& be,
                                double t) {
  if (const auto* f = std::get_if<FixedProbability>(&be.model)) return f->q;
  if (const auto* r = std::get_if<ConstantRates>(&be.model)) {
    double a = r->lambda + r->nu;
    if (a <= 0.0) return 0.0;
    return r->lambda / a * (1.0 - std::exp(-a * t));
  }
  if (const auto* ref = std::get_if<DistributionRef>(&be.model)) {
    const EmpiricalDistribution* d = model.find_distribution(ref->id);
    if (!d)
      throw ValidationError("basic event '" + be.id +
                            "': unknown distribution '" + ref->id + "'");
    return d->cdf_at(t);
  }
  const auto& u = std::get<UnavailabilitySeries>(be.model);
  return detail::interpolate_series(u.times, u.values, t);
}

/// Unconditional failure intensity w(E, t) = lambda * (1 - q(t)); only
/// constant-rate models carry one.
inline std::optional<double> failure_intensity_at(const SystemModel& model,
                                                  const BasicEvent& be,
                                                  double t) {
  if (const auto* r = std::get_if<ConstantRates>(&be.model))
    return r->lambda * (1.0 - unavailability_at(model, be, t));
  return std::nullopt;
}

}  // namespace deptree
