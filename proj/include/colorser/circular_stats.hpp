#pragma once

// Directional statistics for hue angles. The public API works in degrees;
// all trigonometry is done in radians internally.

#include <cstddef>
#include <span>
#include <utility>

namespace colorser::circular {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegPerRad = 180.0 / kPi;
inline constexpr double kRadPerDeg = kPi / 180.0;

/// Below this resultant length the circular mean is reported as undefined.
inline constexpr double kUndefinedMeanTolerance = 1e-12;

/// Below this vector norm a (sin, cos) pair does not determine an angle.
inline constexpr double kUndefinedAngleTolerance = 1e-12;

struct AngleSetSummary {
  std::size_t n = 0;
  double mean_deg = 0.0;
  double resultant_length = 0.0;
  double circ_std_deg = 0.0;
};

struct CircularStd {
  double deg = 0.0;
  /// Set when R == 0; `deg` then holds +infinity.
  bool infinite_dispersion = false;
};

/// Maps a finite angle into [0, 360). 360 maps to 0.
double normalize_deg(double angle_deg);

double mean_resultant_length(std::span<const double> angles_deg);

/// Throws UndefinedMeanError when the resultant length is below
/// kUndefinedMeanTolerance.
double circular_mean(std::span<const double> angles_deg);

/// sqrt(-2 ln R), reported in degrees. R below kUndefinedMeanTolerance counts as zero.
CircularStd circular_std(std::span<const double> angles_deg);

/// Mean, resultant length and dispersion in one pass. Throws like
/// circular_mean when the mean is undefined.
AngleSetSummary summarize(std::span<const double> angles_deg);

/// Shortest arc between two hues, in [0, 180].
double angular_error(double truth_deg, double pred_deg);

/// (sin, cos) of the hue.
std::pair<double, double> hue_to_components(double hue_deg);

/// atan2(sin, cos) in [0, 360). Scale-invariant; throws UndefinedAngleError
/// for a near-zero vector.
double components_to_hue(double sin_component, double cos_component);

}  // namespace colorser::circular
