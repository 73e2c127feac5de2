#include "colorser/circular_stats.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "colorser/error.hpp"

namespace colorser::circular {
namespace {

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw DomainError(std::string(what) + ": non-finite angle");
}

struct ComponentMeans {
  double sin_mean;
  double cos_mean;
};

ComponentMeans component_means(std::span<const double> angles_deg, const char* what) {
  if (angles_deg.empty()) throw DomainError(std::string(what) + ": empty angle list");
  double sum_sin = 0.0;
  double sum_cos = 0.0;
  for (double a : angles_deg) {
    require_finite(a, what);
    // Reduce first so large inputs keep full precision in sin/cos.
    const double rad = normalize_deg(a) * kRadPerDeg;
    sum_sin += std::sin(rad);
    sum_cos += std::cos(rad);
  }
  const auto n = static_cast<double>(angles_deg.size());
  return {sum_sin / n, sum_cos / n};
}

double resultant(const ComponentMeans& m) {
  // Perfect agreement can round to a few ulps either side of 1, and sqrt(-ln R) amplifies that.
  const double r = std::hypot(m.sin_mean, m.cos_mean);
  return 1.0 - r <= 8.0 * std::numeric_limits<double>::epsilon() ? 1.0 : r;
}

CircularStd std_from_resultant(double r) {
  if (r < kUndefinedMeanTolerance) return {std::numeric_limits<double>::infinity(), true};
  return {std::sqrt(-2.0 * std::log(r)) * kDegPerRad, false};
}

}  // namespace

double normalize_deg(double angle_deg) {
  require_finite(angle_deg, "normalize_deg");
  double wrapped = std::fmod(angle_deg, 360.0);
  if (wrapped < 0.0) wrapped += 360.0;
  // fmod of a tiny negative value plus 360 can round to exactly 360.
  if (wrapped >= 360.0) wrapped = 0.0;
  return wrapped == 0.0 ? 0.0 : wrapped;
}

double mean_resultant_length(std::span<const double> angles_deg) {
  return resultant(component_means(angles_deg, "mean_resultant_length"));
}

double circular_mean(std::span<const double> angles_deg) {
  const ComponentMeans m = component_means(angles_deg, "circular_mean");
  if (resultant(m) < kUndefinedMeanTolerance) {
    throw UndefinedMeanError("circular_mean: resultant length below tolerance, mean is undefined");
  }
  return normalize_deg(std::atan2(m.sin_mean, m.cos_mean) * kDegPerRad);
}

CircularStd circular_std(std::span<const double> angles_deg) {
  return std_from_resultant(resultant(component_means(angles_deg, "circular_std")));
}

AngleSetSummary summarize(std::span<const double> angles_deg) {
  const ComponentMeans m = component_means(angles_deg, "summarize");
  const double r = resultant(m);
  if (r < kUndefinedMeanTolerance) {
    throw UndefinedMeanError("summarize: resultant length below tolerance, mean is undefined");
  }
  return AngleSetSummary{
      .n = angles_deg.size(),
      .mean_deg = normalize_deg(std::atan2(m.sin_mean, m.cos_mean) * kDegPerRad),
      .resultant_length = r,
      .circ_std_deg = std_from_resultant(r).deg,
  };
}

double angular_error(double truth_deg, double pred_deg) {
  require_finite(truth_deg, "angular_error");
  require_finite(pred_deg, "angular_error");
  const double gap = std::abs(normalize_deg(truth_deg) - normalize_deg(pred_deg));
  return std::min(gap, 360.0 - gap);
}

std::pair<double, double> hue_to_components(double hue_deg) {
  require_finite(hue_deg, "hue_to_components");
  const double rad = normalize_deg(hue_deg) * kRadPerDeg;
  return {std::sin(rad), std::cos(rad)};
}

double components_to_hue(double sin_component, double cos_component) {
  if (!std::isfinite(sin_component) || !std::isfinite(cos_component)) {
    throw DomainError("components_to_hue: non-finite component");
  }
  if (std::hypot(sin_component, cos_component) < kUndefinedAngleTolerance) {
    throw UndefinedAngleError("components_to_hue: near-zero component vector, hue is undefined");
  }
  return normalize_deg(std::atan2(sin_component, cos_component) * kDegPerRad);
}

}  // namespace colorser::circular
