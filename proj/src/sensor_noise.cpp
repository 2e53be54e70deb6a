#include "swarical/sensor_noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

#include "swarical/text.hpp"

namespace swarical {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

void CalibrationCurve::validate() const {
  if (breakpoints.empty()) throw ValidationError("calibration curve has no breakpoints");
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i].error_pct >= 0.0)) throw ValidationError("calibration error_pct must be >= 0");
    if (i > 0 && !(breakpoints[i].distance_mm > breakpoints[i - 1].distance_mm))
      throw ValidationError("calibration distances must be strictly increasing");
  }
  if (!(d_lo < d_hi)) throw ValidationError("calibration requires d_lo < d_hi");
}

CalibrationCurve CalibrationCurve::flat(double pct, double d_lo, double d_hi) {
  CalibrationCurve c;
  c.breakpoints = {{d_lo, pct}, {d_hi, pct}};
  c.d_lo = d_lo;
  c.d_hi = d_hi;
  return c;
}

double error_pct_at(const CalibrationCurve& curve, double d) {
  const auto& b = curve.breakpoints;
  if (b.empty()) return 0.0;
  if (d <= b.front().distance_mm) return b.front().error_pct;
  if (d >= b.back().distance_mm) return b.back().error_pct;
  const auto hi = std::upper_bound(b.begin(), b.end(), d,
                                   [](double v, const CalibrationCurve::Point& p) { return v < p.distance_mm; });
  const auto lo = hi - 1;
  const double t = (d - lo->distance_mm) / (hi->distance_mm - lo->distance_mm);
  return lo->error_pct + t * (hi->error_pct - lo->error_pct);
}

std::optional<std::pair<double, double>> range_for_error_pct(const CalibrationCurve& curve, double max_error_pct) {
  // The curve is linear between these points, so each piece crosses the
  // limit at most once.
  std::vector<double> xs{curve.d_lo};
  for (const auto& b : curve.breakpoints)
    if (b.distance_mm > curve.d_lo && b.distance_mm < curve.d_hi) xs.push_back(b.distance_mm);
  xs.push_back(curve.d_hi);

  std::optional<std::pair<double, double>> best;
  bool inside = false;
  double start = 0.0;
  auto close = [&](double end) {
    if (inside && (!best || end - start > best->second - best->first)) best = std::pair{start, end};
    inside = false;
  };
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double a = xs[i], b = xs[i + 1];
    const double fa = error_pct_at(curve, a), fb = error_pct_at(curve, b);
    const bool in_a = fa <= max_error_pct, in_b = fb <= max_error_pct;
    if (in_a && !inside) {
      inside = true;
      start = a;
    }
    if (in_a != in_b) {
      const double cross = a + (max_error_pct - fa) / (fb - fa) * (b - a);
      if (in_a) {
        close(cross);
      } else {
        inside = true;
        start = cross;
      }
    }
  }
  if (error_pct_at(curve, xs.back()) <= max_error_pct) close(xs.back());
  return best;
}

NoiseModel NoiseModel::noiseless() {
  NoiseModel m;
  m.curve = CalibrationCurve::flat(0.0);
  m.sd_factor = 0.0;
  return m;
}

std::string_view to_string(DetectionFailure f) {
  return f == DetectionFailure::Range ? "range" : "fov";
}

Measurement measure_relative_pose(const Vec3& target_vec, MountType observer_mount,
                                  double side_heading_deg, const NoiseModel& model, Rng& rng) {
  const double d = target_vec.norm();
  if (!(d > 0.0)) throw ValidationError("cannot measure a zero-length vector");
  if (d < model.curve.d_lo || d > model.curve.d_hi) return DetectionFailure::Range;

  if (model.fov_gating) {
    Vec3 axis;
    switch (observer_mount) {
      case MountType::Top:
        axis = {0, 0, 1};
        break;
      case MountType::Bottom:
        axis = {0, 0, -1};
        break;
      case MountType::Side:
        axis = {std::cos(side_heading_deg * kDeg), std::sin(side_heading_deg * kDeg), 0};
        break;
    }
    const double c = std::clamp(target_vec.dot(axis) / d, -1.0, 1.0);
    if (std::acos(c) > model.fov_half_angle * kDeg) return DetectionFailure::FieldOfView;
  }

  const double mean = error_pct_at(model.curve, d);
  const double sd = mean * model.sd_factor;
  double p = rng.normal(mean, sd);
  for (int tries = 0; p < 0.0 && tries < 64; ++tries) p = rng.normal(mean, sd);
  p = std::max(p, 0.0);

  RelativePose pose;
  pose.vec = target_vec * (1.0 + p / 100.0);
  pose.error_pct = p;
  pose.orientation_deg = {rng.normal(0.0, model.orientation_sigma_deg.x),
                          rng.normal(0.0, model.orientation_sigma_deg.y),
                          rng.normal(0.0, model.orientation_sigma_deg.z)};
  return pose;
}

Vec3 deploy_with_dead_reckoning(const Vec3& target, const Vec3& origin, double dr_epsilon_deg, Rng& rng) {
  const Vec3 travel = target - origin;
  const double len = travel.norm();
  if (len == 0.0) return target;
  const Vec3 dir = travel / len;
  // Any vector not parallel to dir seeds an orthonormal basis.
  const Vec3 seed = std::abs(dir.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  const Vec3 e1 = dir.cross(seed).normalized();
  const Vec3 e2 = dir.cross(e1);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double theta = rng.uniform(0.0, dr_epsilon_deg) * kDeg;
  const Vec3 axis = e1 * std::cos(phi) + e2 * std::sin(phi);
  // Rodrigues with axis perpendicular to the travel vector.
  const Vec3 rotated = travel * std::cos(theta) + axis.cross(travel) * std::sin(theta);
  if (dr_epsilon_deg == 0.0) return target;
  return origin + rotated;
}

CalibrationCurve read_calibration_csv(std::istream& in) {
  CalibrationCurve c;
  c.breakpoints.clear();
  bool limits = false;
  bool header = false;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto s = trim(raw);
    if (s.empty()) continue;
    if (s.front() == '#') {
      for (auto tok : tokens(s.substr(1))) {
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos) continue;
        double v = 0.0;
        if (!parse_double(tok.substr(eq + 1), v)) throw ValidationError("bad calibration limit on line " + std::to_string(line));
        if (tok.substr(0, eq) == "d_lo") c.d_lo = v;
        if (tok.substr(0, eq) == "d_hi") c.d_hi = v;
        limits = true;
      }
      continue;
    }
    if (!header) {
      if (s != "distance_mm,error_pct")
        throw ValidationError("calibration header must be distance_mm,error_pct");
      header = true;
      continue;
    }
    const auto cols = split(s, ',');
    CalibrationCurve::Point p{};
    if (cols.size() != 2 || !parse_double(cols[0], p.distance_mm) || !parse_double(cols[1], p.error_pct))
      throw ValidationError("bad calibration row on line " + std::to_string(line));
    c.breakpoints.push_back(p);
  }
  if (!limits) throw ValidationError("calibration file lacks '# d_lo=<mm> d_hi=<mm>'");
  c.validate();
  return c;
}

CalibrationCurve load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return read_calibration_csv(in);
}

void write_calibration_csv(const CalibrationCurve& curve, std::ostream& out) {
  out << "# d_lo=" << fmt17(curve.d_lo) << " d_hi=" << fmt17(curve.d_hi) << '\n';
  out << "distance_mm,error_pct\n";
  for (const auto& p : curve.breakpoints) out << fmt17(p.distance_mm) << ',' << fmt17(p.error_pct) << '\n';
}

CalibrationCurve default_calibration() {
  CalibrationCurve c;
  c.breakpoints = {{30, 1.2}, {50, 1.3}, {60, 1.5}, {80, 1.5}, {100, 1.9}, {150, 2.8}, {200, 4.0}, {300, 6.5}};
  c.d_lo = 20.0;
  c.d_hi = 300.0;
  return c;
}

}  // namespace swarical
