#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "swarical/core_model.hpp"

namespace swarical {

struct PointSample {
  Vec3 position;
  Vec3 normal;
};
using PointCloud = std::vector<PointSample>;

std::vector<Vec3> positions(const PointCloud& cloud);
PointCloud cloud_from_positions(const std::vector<Vec3>& pts);

class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;  // zero-based
  std::vector<Vec3> normals;              // unit, one per face
  int dropped_degenerate = 0;

  [[nodiscard]] double face_area(std::size_t f) const;
  [[nodiscard]] double total_area() const;

  /// Appends a triangle, computing its normal. Degenerate triangles are
  /// counted and skipped. Returns false when the face was dropped.
  bool add_face(int a, int b, int c);
};

/// Wavefront OBJ subset: `v` and `f` records; larger polygons are fan
/// triangulated. Other record types are ignored.
TriangleMesh parse_obj(std::istream& in);
TriangleMesh parse_obj(std::string_view text);
TriangleMesh load_obj(const std::filesystem::path& path);
void write_obj(const TriangleMesh& mesh, std::ostream& out);

struct DensityBounds {
  double d_min = 0.0;  // FLSs per mm^2
  double d_max = 0.0;
  long n_min = 0;
  long n_max = 0;
};

/// Min/max FLS density for a sensor's usable range and the resulting counts
/// for a surface of `total_area` mm^2.
DensityBounds density_bounds(const SensorSpec& spec, double total_area);

struct SamplingReport {
  PointCloud cloud;
  double min_distance = 0.0;  // rejection radius finally in effect
  int relaxations = 0;        // number of 5% radius reductions
};

/// Blue-noise dart throwing over the surface, area-weighted face choice.
/// Returns exactly `n` samples, each carrying its face normal.
SamplingReport sample_surface_report(const TriangleMesh& mesh, int n, std::uint64_t seed);
PointCloud sample_surface(const TriangleMesh& mesh, int n, std::uint64_t seed);

/// Rejection radius used by the sampler before any relaxation.
double blue_noise_radius(double total_area, int n);

/// CSV with header `id,x,y,z,nx,ny,nz`.
void write_cloud_csv(const PointCloud& cloud, std::ostream& out);
PointCloud read_cloud_csv(std::istream& in);
void save_cloud_csv(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud load_cloud_csv(const std::filesystem::path& path);

}  // namespace swarical
