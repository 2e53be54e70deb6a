#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "swarical/core_model.hpp"
#include "swarical/rng.hpp"

namespace swarical {

/// Distance-dependent percentage error of a tracking device.
struct CalibrationCurve {
  struct Point {
    double distance_mm;
    double error_pct;
  };
  std::vector<Point> breakpoints;  // strictly increasing distance
  double d_lo = 20.0;              // detection fails below
  double d_hi = 300.0;             // and above

  void validate() const;

  /// Same percentage at every distance.
  static CalibrationCurve flat(double pct, double d_lo = 20.0, double d_hi = 300.0);
};

/// Piecewise-linear interpolation, clamped outside the breakpoint span.
double error_pct_at(const CalibrationCurve& curve, double d);

struct NoiseModel {
  CalibrationCurve curve = CalibrationCurve::flat(0.0);
  double sd_factor = 1.0 / 3.0;          // sd of the percentage = mean * sd_factor
  Vec3 orientation_sigma_deg{0.0, 0.0, 0.0};  // roll, pitch, yaw
  double fov_half_angle = 90.0;          // degrees
  bool fov_gating = true;

  static NoiseModel noiseless();
};

enum class DetectionFailure { Range, FieldOfView };

std::string_view to_string(DetectionFailure f);

using Measurement = std::variant<RelativePose, DetectionFailure>;

/// Observes the vector from an observer to its target through the camera.
///
/// `target_vec` = pos(target) - pos(observer). The returned pose carries the
/// scaled observation of that vector; callers negate it to obtain the
/// observer's position relative to the target. `side_heading_deg` is the
/// horizontal direction a Side camera faces.
Measurement measure_relative_pose(const Vec3& target_vec, MountType observer_mount,
                                  double side_heading_deg, const NoiseModel& model, Rng& rng);

/// Final position after dead-reckoning flight from `origin` to `target`:
/// the travel vector is rotated about a random perpendicular axis by an
/// angle drawn uniformly from [0, dr_epsilon_deg].
Vec3 deploy_with_dead_reckoning(const Vec3& target, const Vec3& origin, double dr_epsilon_deg, Rng& rng);

/// Longest distance interval inside [d_lo, d_hi] whose error stays at or
/// below `max_error_pct`, as (t_min, t_max). nullopt when none qualifies.
std::optional<std::pair<double, double>> range_for_error_pct(const CalibrationCurve& curve, double max_error_pct);

/// CSV `distance_mm,error_pct` preceded by `# d_lo=<mm> d_hi=<mm>`.
CalibrationCurve read_calibration_csv(std::istream& in);
CalibrationCurve load_calibration(const std::filesystem::path& path);
void write_calibration_csv(const CalibrationCurve& curve, std::ostream& out);

/// Wide lens with an LCD marker; 1.5% between 60 and 80 mm.
CalibrationCurve default_calibration();

}  // namespace swarical
