#include "swarical/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "swarical/core_model.hpp"
#include "swarical/text.hpp"

namespace swarical {

Vec3 centroid(std::span<const Vec3> pts) {
  if (pts.empty()) throw ValidationError("centroid of an empty cloud");
  Vec3 s;
  for (const auto& p : pts) s += p;
  return s / static_cast<double>(pts.size());
}

std::vector<Vec3> align_centroids(std::span<const Vec3> e, std::span<const Vec3> p) {
  if (e.size() != p.size()) throw ValidationError("align_centroids: cloud sizes differ");
  if (e.empty()) throw ValidationError("align_centroids: empty cloud");
  const Vec3 shift = centroid(p) - centroid(e);
  std::vector<Vec3> out(e.begin(), e.end());
  for (auto& v : out) v += shift;
  return out;
}

NearestNeighborIndex::NearestNeighborIndex(std::span<const Vec3> pts) : pts_(pts.begin(), pts.end()) {
  if (pts_.empty()) throw ValidationError("nearest-neighbour index over an empty cloud");
  Vec3 lo = pts_.front(), hi = pts_.front();
  for (const auto& p : pts_) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  origin_ = lo;
  const double ext[3] = {hi.x - lo.x, hi.y - lo.y, hi.z - lo.z};
  const double longest = std::max({ext[0], ext[1], ext[2]});
  const double n = static_cast<double>(pts_.size());
  if (longest > 0.0) {
    double vol = 1.0;
    for (double e : ext) vol *= std::max(e, longest * 1e-3);
    cell_ = std::max(std::cbrt(2.0 * vol / n), longest / 1024.0);
    // Keep the cell count within a small multiple of the point count.
    auto count = [&] {
      double c = 1.0;
      for (double e : ext) c *= std::floor(e / cell_) + 1.0;
      return c;
    };
    while (count() > 8.0 * n + 64.0) cell_ *= 1.25;
  }
  for (int a = 0; a < 3; ++a) dims_[a] = static_cast<long>(std::floor(ext[a] / cell_)) + 1;

  const auto n_cells = static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
  std::vector<std::size_t> cell_of(pts_.size());
  cell_start_.assign(n_cells + 1, 0);
  for (std::size_t i = 0; i < pts_.size(); ++i) {
    const auto& p = pts_[i];
    const long c = (cell_coord(p.z, 2) * dims_[1] + cell_coord(p.y, 1)) * dims_[0] + cell_coord(p.x, 0);
    cell_of[i] = static_cast<std::size_t>(c);
    ++cell_start_[cell_of[i] + 1];
  }
  for (std::size_t c = 0; c < n_cells; ++c) cell_start_[c + 1] += cell_start_[c];
  cell_items_.resize(pts_.size());
  std::vector<int> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < pts_.size(); ++i)
    cell_items_[static_cast<std::size_t>(fill[cell_of[i]]++)] = static_cast<int>(i);
}

long NearestNeighborIndex::cell_coord(double v, int axis) const {
  const double o = axis == 0 ? origin_.x : axis == 1 ? origin_.y : origin_.z;
  const long c = static_cast<long>(std::floor((v - o) / cell_));
  return std::clamp(c, 0L, dims_[axis] - 1);
}

double NearestNeighborIndex::nearest_distance2(const Vec3& q) const {
  const long c[3] = {cell_coord(q.x, 0), cell_coord(q.y, 1), cell_coord(q.z, 2)};
  const double qv[3] = {q.x, q.y, q.z};
  const double ov[3] = {origin_.x, origin_.y, origin_.z};
  double best = std::numeric_limits<double>::infinity();
  const long max_ring = std::max({dims_[0], dims_[1], dims_[2]});

  for (long r = 0; r <= max_ring; ++r) {
    const long lo[3] = {c[0] - r, c[1] - r, c[2] - r};
    const long hi[3] = {c[0] + r, c[1] + r, c[2] + r};
    for (long z = std::max(lo[2], 0L); z <= std::min(hi[2], dims_[2] - 1); ++z)
      for (long y = std::max(lo[1], 0L); y <= std::min(hi[1], dims_[1] - 1); ++y)
        for (long x = std::max(lo[0], 0L); x <= std::min(hi[0], dims_[0] - 1); ++x) {
          // Only the shell of the ring is new.
          if (r > 0 && x != lo[0] && x != hi[0] && y != lo[1] && y != hi[1] && z != lo[2] && z != hi[2])
            continue;
          const auto cell = static_cast<std::size_t>((z * dims_[1] + y) * dims_[0] + x);
          for (int k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k)
            best = std::min(best, distance2(q, pts_[static_cast<std::size_t>(cell_items_[static_cast<std::size_t>(k)])]));
        }

    // Lower bound on the distance to any cell outside the visited block.
    double bound = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (lo[a] > 0) bound = std::min(bound, qv[a] - (ov[a] + static_cast<double>(lo[a]) * cell_));
      if (hi[a] < dims_[a] - 1) bound = std::min(bound, ov[a] + static_cast<double>(hi[a] + 1) * cell_ - qv[a]);
    }
    if (std::isinf(bound)) break;  // whole grid visited
    if (bound > 0.0 && best <= bound * bound) break;
  }
  return best;
}

double hausdorff(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw ValidationError("hausdorff: empty cloud");
  const NearestNeighborIndex ia(a), ib(b);
  double worst = 0.0;
  for (const auto& p : a) worst = std::max(worst, ib.nearest_distance2(p));
  for (const auto& p : b) worst = std::max(worst, ia.nearest_distance2(p));
  return std::sqrt(worst);
}

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw ValidationError("chamfer: empty cloud");
  const NearestNeighborIndex ia(a), ib(b);
  double sa = 0.0, sb = 0.0;
  for (const auto& p : a) sa += ib.nearest_distance2(p);
  for (const auto& p : b) sb += ia.nearest_distance2(p);
  return sa / static_cast<double>(a.size()) + sb / static_cast<double>(b.size());
}

double estimate_hd(std::span<const Vec3> p, double cam_epsilon_pct) {
  if (cam_epsilon_pct < 0.0) throw ValidationError("epsilon must be >= 0");
  const Vec3 c = centroid(p);
  const double f = cam_epsilon_pct / 100.0;
  std::vector<Vec3> shrunk;
  shrunk.reserve(p.size());
  // Written as an offset from each point so that zero error is exact.
  for (const auto& v : p) shrunk.push_back(v - (v - c) * f);
  const auto aligned = align_centroids(shrunk, p);
  return hausdorff(aligned, p);
}

MetricSample measure_cloud(double t_ms, std::span<const Vec3> estimated, std::span<const Vec3> truth,
                           double total_distance_mm, long moves) {
  const auto aligned = align_centroids(estimated, truth);
  return {t_ms, hausdorff(aligned, truth), chamfer(aligned, truth), total_distance_mm, moves};
}

namespace {
template <class F>
double tail_mean(const MetricSeries& series, double fraction, F field) {
  if (series.empty()) throw ValidationError("empty metric series");
  const double t_end = series.back().t_ms;
  const double t_from = t_end - fraction * (t_end - series.front().t_ms);
  double sum = 0.0;
  long n = 0;
  for (const auto& s : series)
    if (s.t_ms >= t_from) {
      sum += field(s);
      ++n;
    }
  return sum / static_cast<double>(n);
}
}  // namespace

double steady_state_hd(const MetricSeries& series, double fraction) {
  return tail_mean(series, fraction, [](const MetricSample& s) { return s.hd_mm; });
}

double steady_state_cd(const MetricSeries& series, double fraction) {
  return tail_mean(series, fraction, [](const MetricSample& s) { return s.cd_mm2; });
}

void write_series_csv(const MetricSeries& series, std::ostream& out) {
  out << "t_ms,hd_mm,cd_mm2,total_distance_mm,moves\n";
  for (const auto& s : series)
    out << fmt17(s.t_ms) << ',' << fmt17(s.hd_mm) << ',' << fmt17(s.cd_mm2) << ','
        << fmt17(s.total_distance_mm) << ',' << s.moves << '\n';
}

MetricSeries read_series_csv(std::istream& in) {
  MetricSeries out;
  std::string raw;
  std::size_t line = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line;
    const auto s = trim(raw);
    if (s.empty()) continue;
    if (!header) {
      if (s != "t_ms,hd_mm,cd_mm2,total_distance_mm,moves")
        throw ValidationError("series header must be t_ms,hd_mm,cd_mm2,total_distance_mm,moves");
      header = true;
      continue;
    }
    const auto cols = split(s, ',');
    MetricSample m;
    long moves = 0;
    if (cols.size() != 5 || !parse_double(cols[0], m.t_ms) || !parse_double(cols[1], m.hd_mm) ||
        !parse_double(cols[2], m.cd_mm2) || !parse_double(cols[3], m.total_distance_mm) ||
        !parse_int(cols[4], moves))
      throw ValidationError("bad series row on line " + std::to_string(line));
    m.moves = moves;
    out.push_back(m);
  }
  if (!header) throw ValidationError("series file is empty");
  return out;
}

MetricSeries load_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return read_series_csv(in);
}

}  // namespace swarical
