#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "swarical/metrics.hpp"

using namespace swarical;

TEST_CASE("align_centroids") {
  const std::vector<Vec3> e{{0, 0, 0}, {2, 0, 0}, {0, 5, 0}};
  const std::vector<Vec3> p{{10, 10, 10}, {12, 10, 10}, {11, 13, 10}};
  const auto a = align_centroids(e, p);
  CHECK(centroid(a).x == doctest::Approx(centroid(p).x));
  CHECK(centroid(a).y == doctest::Approx(centroid(p).y));
  CHECK(centroid(a).z == doctest::Approx(centroid(p).z));
  CHECK(distance(a[1] - a[0], Vec3{2, 0, 0}) < 1e-12);
  CHECK_THROWS_AS(align_centroids(e, std::vector<Vec3>{{1, 1, 1}}), ValidationError);
}

TEST_CASE("Hausdorff and Chamfer on small sets") {
  const std::vector<Vec3> a{{0, 0, 0}};
  const std::vector<Vec3> b{{10, 0, 0}};
  CHECK(hausdorff(a, b) == 10.0);
  CHECK(chamfer(a, b) == 200.0);

  // Chamfer can exceed Hausdorff numerically since it is in squared units.
  CHECK(chamfer(a, b) > hausdorff(a, b));

  const std::vector<Vec3> c{{0, 0, 0}, {1, 0, 0}};
  const std::vector<Vec3> d{{0, 0, 0}, {1, 0, 0}, {5, 0, 0}};
  CHECK(hausdorff(c, d) == 4.0);
  // (0 + 0)/2 + (0 + 0 + 16)/3
  CHECK(chamfer(c, d) == doctest::Approx(16.0 / 3.0));
  CHECK(hausdorff(c, c) == 0.0);
  CHECK(chamfer(d, d) == 0.0);
}

TEST_CASE("metrics agree with brute force") {
  Rng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const int na = 1 + static_cast<int>(rng.below(300));
    const int nb = 1 + static_cast<int>(rng.below(300));
    const double spread = rep % 2 ? 1000.0 : 5.0;
    const auto a = testing::random_cloud(rng, na, 0, spread);
    const auto b = testing::random_cloud(rng, nb, 0, spread);
    CHECK(hausdorff(a, b) == doctest::Approx(testing::brute_hausdorff(a, b)).epsilon(1e-12));
    CHECK(chamfer(a, b) == doctest::Approx(testing::brute_chamfer(a, b)).epsilon(1e-12));
    CHECK(hausdorff(a, b) == hausdorff(b, a));
    CHECK(chamfer(a, b) == doctest::Approx(chamfer(b, a)).epsilon(1e-14));
  }
  // Duplicate and collinear points.
  const std::vector<Vec3> dup{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {2, 1, 1}};
  const std::vector<Vec3> line{{0, 0, 0}, {0, 0, 0}, {3, 0, 0}};
  CHECK(hausdorff(dup, line) == doctest::Approx(testing::brute_hausdorff(dup, line)));
  CHECK(chamfer(dup, line) == doctest::Approx(testing::brute_chamfer(dup, line)));
}

TEST_CASE("nearest neighbour index") {
  Rng rng(7);
  const auto pts = testing::random_cloud(rng, 500);
  const NearestNeighborIndex idx(pts);
  for (int i = 0; i < 200; ++i) {
    const Vec3 q{rng.uniform(-200, 1200), rng.uniform(-200, 1200), rng.uniform(-200, 1200)};
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) best = std::min(best, distance2(p, q));
    CHECK(idx.nearest_distance2(q) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("measure_cloud aligns before measuring") {
  const std::vector<Vec3> truth{{0, 0, 0}, {100, 0, 0}, {0, 100, 0}};
  std::vector<Vec3> shifted;
  for (const auto& p : truth) shifted.push_back(p + Vec3{7, -3, 2});
  const auto s = measure_cloud(5.0, shifted, truth, 12.0, 3);
  CHECK(s.hd_mm == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.cd_mm2 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.t_ms == 5.0);
  CHECK(s.total_distance_mm == 12.0);
  CHECK(s.moves == 3);
}

TEST_CASE("estimate_hd on cube corners") {
  std::vector<Vec3> cube;
  for (int i = 0; i < 8; ++i) cube.push_back({100.0 * (i & 1), 100.0 * ((i >> 1) & 1), 100.0 * ((i >> 2) & 1)});
  // Every corner sits 50*sqrt(3) from the centre.
  const double r = 50.0 * std::sqrt(3.0);
  CHECK(r == doctest::Approx(86.603).epsilon(1e-5));
  CHECK(estimate_hd(cube, 1.15) == doctest::Approx(0.0115 * r).epsilon(1e-9));
  CHECK(estimate_hd(cube, 0.0) == 0.0);
}

TEST_CASE("estimate_hd is linear in epsilon") {
  const auto cloud = positions(sample_surface(shapes::skateboard(), 300, 3));
  const double one = estimate_hd(cloud, 1.0);
  CHECK(one > 0.0);
  for (double eps : {0.5, 1.15, 2.0, 3.5}) CHECK(estimate_hd(cloud, eps) == doctest::Approx(eps * one).epsilon(1e-9));
  CHECK(estimate_hd(std::vector<Vec3>{{4, 5, 6}}, 2.0) == 0.0);
}

TEST_CASE("steady state and series CSV") {
  MetricSeries s;
  for (int i = 0; i < 8; ++i) s.push_back({i * 100.0, static_cast<double>(i), 2.0 * i, 10.0 * i, i});
  // Last quarter is samples 6 and 7.
  CHECK(steady_state_hd(s) == doctest::Approx(6.5));
  CHECK(steady_state_cd(s) == doctest::Approx(13.0));
  CHECK(steady_state_hd(s, 1.0) == doctest::Approx(3.5));

  std::stringstream ss;
  write_series_csv(s, ss);
  CHECK(ss.str().rfind("t_ms,hd_mm,cd_mm2,total_distance_mm,moves\n", 0) == 0);
  CHECK(read_series_csv(ss) == s);

  std::stringstream bad("t_ms,hd\n1,2\n");
  CHECK_THROWS(read_series_csv(bad));
}
