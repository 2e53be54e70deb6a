#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "swarical/vec3.hpp"

namespace swarical {

Vec3 centroid(std::span<const Vec3> pts);

/// Translates `e` so its centroid coincides with that of `p`.
std::vector<Vec3> align_centroids(std::span<const Vec3> e, std::span<const Vec3> p);

/// Exact nearest-neighbour queries over a uniform grid.
class NearestNeighborIndex {
 public:
  explicit NearestNeighborIndex(std::span<const Vec3> pts);

  /// Squared distance from `q` to the closest indexed point.
  [[nodiscard]] double nearest_distance2(const Vec3& q) const;

 private:
  [[nodiscard]] long cell_coord(double v, int axis) const;

  std::vector<Vec3> pts_;
  Vec3 origin_;
  double cell_ = 1.0;
  long dims_[3] = {1, 1, 1};
  std::vector<int> cell_start_;  // CSR layout over cells
  std::vector<int> cell_items_;
};

/// Symmetric Hausdorff distance (mm).
double hausdorff(std::span<const Vec3> a, std::span<const Vec3> b);

/// Chamfer distance: mean squared nearest distance in both directions (mm^2).
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

/// Expected Hausdorff distance for a camera with a positive `cam_epsilon_pct`
/// range error: the cloud shrunk about its centroid against the original.
double estimate_hd(std::span<const Vec3> p, double cam_epsilon_pct);

struct MetricSample {
  double t_ms = 0.0;
  double hd_mm = 0.0;
  double cd_mm2 = 0.0;
  double total_distance_mm = 0.0;
  long moves = 0;

  friend bool operator==(const MetricSample&, const MetricSample&) = default;
};

using MetricSeries = std::vector<MetricSample>;

/// HD/CD of the estimated cloud against ground truth after centroid alignment.
MetricSample measure_cloud(double t_ms, std::span<const Vec3> estimated, std::span<const Vec3> truth,
                           double total_distance_mm, long moves);

/// Mean HD over the trailing `fraction` of the samples.
double steady_state_hd(const MetricSeries& series, double fraction = 0.25);
double steady_state_cd(const MetricSeries& series, double fraction = 0.25);

/// CSV with header `t_ms,hd_mm,cd_mm2,total_distance_mm,moves`.
void write_series_csv(const MetricSeries& series, std::ostream& out);
MetricSeries read_series_csv(std::istream& in);
MetricSeries load_series_csv(const std::filesystem::path& path);

}  // namespace swarical
