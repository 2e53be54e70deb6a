#pragma once

#include "swarical/mesh.hpp"

namespace swarical::shapes {

/// Axis-aligned closed box with outward-facing triangles.
TriangleMesh box(const Vec3& lo, const Vec3& hi);

/// Closed cylinder whose axis is parallel to y.
TriangleMesh cylinder_y(const Vec3& center, double radius, double width, int segments = 24);

/// Single-sided horizontal rectangle centered on `center`.
TriangleMesh rectangle_xy(const Vec3& center, double size_x, double size_y);

/// Concatenates meshes.
TriangleMesh merge(const std::vector<TriangleMesh>& parts);

/// Elongated flat deck on two trucks and four wheels; about 4.4 m^2 of surface.
TriangleMesh skateboard();

/// Flat 2000 x 600 mm panel used for the localization experiments.
TriangleMesh panel();

}  // namespace swarical::shapes
