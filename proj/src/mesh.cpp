#include "swarical/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "swarical/rng.hpp"
#include "swarical/text.hpp"

namespace swarical {

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool parse_int(std::string_view s, long& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<Vec3> positions(const PointCloud& cloud) {
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const auto& s : cloud) out.push_back(s.position);
  return out;
}

PointCloud cloud_from_positions(const std::vector<Vec3>& pts) {
  PointCloud out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back({p, {}});
  return out;
}

double TriangleMesh::face_area(std::size_t f) const {
  const auto& t = faces[f];
  const Vec3& a = vertices[static_cast<std::size_t>(t[0])];
  const Vec3& b = vertices[static_cast<std::size_t>(t[1])];
  const Vec3& c = vertices[static_cast<std::size_t>(t[2])];
  return 0.5 * (b - a).cross(c - a).norm();
}

double TriangleMesh::total_area() const {
  double sum = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) sum += face_area(f);
  return sum;
}

bool TriangleMesh::add_face(int a, int b, int c) {
  const Vec3& pa = vertices[static_cast<std::size_t>(a)];
  const Vec3& pb = vertices[static_cast<std::size_t>(b)];
  const Vec3& pc = vertices[static_cast<std::size_t>(c)];
  const Vec3 n = (pb - pa).cross(pc - pa);
  const double len = n.norm();
  const double scale = std::max({(pb - pa).norm2(), (pc - pa).norm2(), (pc - pb).norm2()});
  if (!(len > 1e-12 * scale) || len == 0.0) {
    ++dropped_degenerate;
    return false;
  }
  faces.push_back({a, b, c});
  normals.push_back(n / len);
  return true;
}

namespace {

// Resolves one OBJ face corner ("7", "7/1", "7//3", "-1") to a zero-based index.
long face_index(std::string_view tok, std::size_t vertex_count, std::size_t line) {
  const auto slash = tok.find('/');
  long idx = 0;
  if (!parse_int(tok.substr(0, slash), idx) || idx == 0)
    throw ParseError(line, "malformed face index '" + std::string(tok) + "'");
  if (idx < 0) idx = static_cast<long>(vertex_count) + idx + 1;
  return idx - 1;
}

}  // namespace

TriangleMesh parse_obj(std::istream& in) {
  TriangleMesh mesh;
  struct PendingFace {
    std::vector<long> idx;
    std::size_t line;
  };
  std::vector<PendingFace> pending;

  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = raw;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    const auto tok = tokens(s);
    if (tok.empty()) continue;
    if (tok[0] == "v") {
      if (tok.size() < 4 || tok.size() > 5) throw ParseError(line, "vertex needs 3 coordinates");
      double xyz[3];
      for (int k = 0; k < 3; ++k)
        if (!parse_double(tok[static_cast<std::size_t>(k) + 1], xyz[k]))
          throw ParseError(line, "bad vertex coordinate '" +
                                     std::string(tok[static_cast<std::size_t>(k) + 1]) + "'");
      mesh.vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw ParseError(line, "face needs at least 3 vertices");
      PendingFace f{{}, line};
      for (std::size_t k = 1; k < tok.size(); ++k)
        f.idx.push_back(face_index(tok[k], mesh.vertices.size(), line));
      pending.push_back(std::move(f));
    }
  }

  for (const auto& f : pending) {
    for (long i : f.idx)
      if (i < 0 || static_cast<std::size_t>(i) >= mesh.vertices.size())
        throw ParseError(f.line, "face index " + std::to_string(i + 1) + " out of range (" +
                                     std::to_string(mesh.vertices.size()) + " vertices)");
    for (std::size_t k = 1; k + 1 < f.idx.size(); ++k)
      mesh.add_face(static_cast<int>(f.idx[0]), static_cast<int>(f.idx[k]),
                    static_cast<int>(f.idx[k + 1]));
  }
  if (mesh.faces.empty()) throw ValidationError("mesh has no (non-degenerate) faces");
  return mesh;
}

TriangleMesh parse_obj(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_obj(in);
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return parse_obj(in);
}

void write_obj(const TriangleMesh& mesh, std::ostream& out) {
  for (const auto& v : mesh.vertices)
    out << "v " << fmt17(v.x) << ' ' << fmt17(v.y) << ' ' << fmt17(v.z) << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

DensityBounds density_bounds(const SensorSpec& spec, double total_area) {
  spec.validate();
  if (!(total_area > 0.0)) throw ValidationError("total area must be positive");
  if (spec.radius_r > spec.t_max) throw ValidationError("FLS radius exceeds t_max");
  const double pi = std::numbers::pi;
  const double r_lo = std::max(spec.t_max / 2.0, spec.radius_r);
  const double r_hi = std::max(spec.t_min / 2.0, spec.radius_r);
  DensityBounds b;
  b.d_min = 1.0 / (pi * r_lo * r_lo);
  b.d_max = 1.0 / (pi * r_hi * r_hi);
  b.n_min = static_cast<long>(std::ceil(b.d_min * total_area));
  b.n_max = static_cast<long>(std::floor(b.d_max * total_area));
  b.n_min = std::max(1L, std::min(b.n_min, std::max(1L, b.n_max)));
  b.n_max = std::max(b.n_max, b.n_min);
  return b;
}

double blue_noise_radius(double total_area, int n) {
  return 0.6 * std::sqrt(total_area / (static_cast<double>(n) * std::numbers::pi));
}

namespace {

class HashGrid {
 public:
  explicit HashGrid(double cell) : cell_(cell) {}

  void insert(const Vec3& p, int id) { cells_[key(cell_of(p))].push_back(id); }

  /// True if any stored point lies strictly closer than `r` (r <= cell).
  bool any_within(const Vec3& p, double r, const std::vector<Vec3>& pts) const {
    const auto c = cell_of(p);
    const double r2 = r * r;
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells_.end()) continue;
          for (int id : it->second)
            if (distance2(pts[static_cast<std::size_t>(id)], p) < r2) return true;
        }
    return false;
  }

 private:
  [[nodiscard]] std::array<long, 3> cell_of(const Vec3& p) const {
    return {static_cast<long>(std::floor(p.x / cell_)), static_cast<long>(std::floor(p.y / cell_)),
            static_cast<long>(std::floor(p.z / cell_))};
  }
  static std::uint64_t key(const std::array<long, 3>& c) {
    std::uint64_t h = 0;
    for (long v : c) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
    return h;
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

}  // namespace

SamplingReport sample_surface_report(const TriangleMesh& mesh, int n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("sample count must be >= 1");
  if (mesh.faces.empty()) throw ValidationError("cannot sample an empty mesh");

  std::vector<double> cumulative(mesh.faces.size());
  double acc = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    acc += mesh.face_area(f);
    cumulative[f] = acc;
  }
  const double area = acc;

  Rng rng(derive_seed(seed, 0x5a3f1e));
  auto dart = [&](std::size_t& face) {
    const double u = rng.uniform() * area;
    face = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                    cumulative.begin());
    face = std::min(face, mesh.faces.size() - 1);
    const auto& t = mesh.faces[face];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
    return a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2);
  };

  SamplingReport report;
  double radius = blue_noise_radius(area, n);
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n));
  const long failure_budget = 2000 + 50L * n;

  while (static_cast<int>(pts.size()) < n) {
    HashGrid grid(radius);
    for (std::size_t i = 0; i < pts.size(); ++i) grid.insert(pts[i], static_cast<int>(i));
    long failures = 0;
    while (static_cast<int>(pts.size()) < n && failures < failure_budget) {
      std::size_t face = 0;
      const Vec3 p = dart(face);
      if (grid.any_within(p, radius, pts)) {
        ++failures;
        continue;
      }
      failures = 0;
      grid.insert(p, static_cast<int>(pts.size()));
      pts.push_back(p);
      report.cloud.push_back({p, mesh.normals[face]});
    }
    if (static_cast<int>(pts.size()) < n) {
      radius *= 0.95;
      ++report.relaxations;
    }
  }
  report.min_distance = radius;
  return report;
}

PointCloud sample_surface(const TriangleMesh& mesh, int n, std::uint64_t seed) {
  return sample_surface_report(mesh, n, seed).cloud;
}

void write_cloud_csv(const PointCloud& cloud, std::ostream& out) {
  out << "id,x,y,z,nx,ny,nz\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& s = cloud[i];
    out << i << ',' << fmt17(s.position.x) << ',' << fmt17(s.position.y) << ','
        << fmt17(s.position.z) << ',' << fmt17(s.normal.x) << ',' << fmt17(s.normal.y) << ','
        << fmt17(s.normal.z) << '\n';
  }
}

PointCloud read_cloud_csv(std::istream& in) {
  PointCloud cloud;
  std::string raw;
  std::size_t line = 0;
  bool header_seen = false;
  while (std::getline(in, raw)) {
    ++line;
    const auto s = trim(raw);
    if (s.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (s != "id,x,y,z,nx,ny,nz") throw ParseError(line, "expected header id,x,y,z,nx,ny,nz");
      continue;
    }
    const auto cols = split(s, ',');
    if (cols.size() != 7) throw ParseError(line, "expected 7 columns");
    double v[6];
    for (int k = 0; k < 6; ++k)
      if (!parse_double(cols[static_cast<std::size_t>(k) + 1], v[k]))
        throw ParseError(line, "bad number");
    cloud.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
  }
  if (cloud.empty()) throw ValidationError("point cloud is empty");
  return cloud;
}

void save_cloud_csv(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_cloud_csv(cloud, out);
}

PointCloud load_cloud_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return read_cloud_csv(in);
}

}  // namespace swarical
