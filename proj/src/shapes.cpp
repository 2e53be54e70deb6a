#include "swarical/shapes.hpp"

#include <cmath>
#include <numbers>

namespace swarical::shapes {

TriangleMesh box(const Vec3& lo, const Vec3& hi) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back(i & 1 ? hi.x : lo.x, i & 2 ? hi.y : lo.y, i & 4 ? hi.z : lo.z);
  // Counter-clockwise seen from outside.
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                           {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.add_face(q[0], q[1], q[2]);
    m.add_face(q[0], q[2], q[3]);
  }
  return m;
}

TriangleMesh cylinder_y(const Vec3& center, double radius, double width, int segments) {
  TriangleMesh m;
  const double y0 = center.y - width / 2.0;
  const double y1 = center.y + width / 2.0;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    const double x = center.x + radius * std::cos(a);
    const double z = center.z + radius * std::sin(a);
    m.vertices.emplace_back(x, y0, z);
    m.vertices.emplace_back(x, y1, z);
  }
  const int c0 = static_cast<int>(m.vertices.size());
  m.vertices.emplace_back(center.x, y0, center.z);
  m.vertices.emplace_back(center.x, y1, center.z);
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    const int a0 = 2 * i, a1 = 2 * i + 1, b0 = 2 * j, b1 = 2 * j + 1;
    m.add_face(a0, b0, b1);
    m.add_face(a0, b1, a1);
    m.add_face(c0, a0, b0);
    m.add_face(c0 + 1, b1, a1);
  }
  return m;
}

TriangleMesh rectangle_xy(const Vec3& center, double size_x, double size_y) {
  TriangleMesh m;
  const double hx = size_x / 2.0, hy = size_y / 2.0;
  m.vertices = {{center.x - hx, center.y - hy, center.z},
                {center.x + hx, center.y - hy, center.z},
                {center.x + hx, center.y + hy, center.z},
                {center.x - hx, center.y + hy, center.z}};
  m.add_face(0, 1, 2);
  m.add_face(0, 2, 3);
  return m;
}

TriangleMesh merge(const std::vector<TriangleMesh>& parts) {
  TriangleMesh out;
  for (const auto& p : parts) {
    const int base = static_cast<int>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), p.vertices.begin(), p.vertices.end());
    for (std::size_t f = 0; f < p.faces.size(); ++f) {
      out.faces.push_back({p.faces[f][0] + base, p.faces[f][1] + base, p.faces[f][2] + base});
      out.normals.push_back(p.normals[f]);
    }
    out.dropped_degenerate += p.dropped_degenerate;
  }
  return out;
}

TriangleMesh skateboard() {
  std::vector<TriangleMesh> parts;
  parts.push_back(box({-1200, -300, 400}, {1200, 300, 520}));  // deck
  for (double x : {-800.0, 800.0}) {
    parts.push_back(box({x - 60, -200, 320}, {x + 60, 200, 400}));  // truck
    for (double y : {-250.0, 250.0}) parts.push_back(cylinder_y({x, y, 200}, 120, 100));
  }
  return merge(parts);
}

TriangleMesh panel() { return rectangle_xy({0, 0, 1000}, 2000, 600); }

}  // namespace swarical::shapes
