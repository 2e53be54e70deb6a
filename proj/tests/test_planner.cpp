#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "support.hpp"
#include "swarical/planner.hpp"

using namespace swarical;

namespace {

std::vector<FlsRecord> records(std::span<const Vec3> pts, FlsId first_id = 0, SwarmId swarm = 0) {
  std::vector<FlsRecord> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    FlsRecord r;
    r.id = first_id + static_cast<FlsId>(i);
    r.coordinate = pts[i];
    r.swarm_id = swarm;
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("k is ceil(F / g)") {
  Rng rng(1);
  CHECK(cluster_kmeans(testing::random_cloud(rng, 1372), 50, 1).k == 28);
  CHECK(cluster_kmeans(testing::random_cloud(rng, 7), 50, 1).k == 1);
  CHECK(cluster_kmeans(testing::random_cloud(rng, 100), 50, 1).k == 2);
  CHECK(cluster_kmeans(testing::random_cloud(rng, 101), 50, 1).k == 3);
  CHECK_THROWS_AS(cluster_kmeans(testing::random_cloud(rng, 5), 0, 1), ValidationError);
}

TEST_CASE("k-means separates two blobs") {
  Rng rng(2);
  auto a = testing::random_cloud(rng, 20, 0, 10);
  const auto b = testing::random_cloud(rng, 20, 1000, 1010);
  a.insert(a.end(), b.begin(), b.end());
  const auto c = cluster_kmeans(a, 20, 3);
  REQUIRE(c.k == 2);
  for (int i = 1; i < 20; ++i) CHECK(c.labels[static_cast<std::size_t>(i)] == c.labels[0]);
  for (int i = 21; i < 40; ++i) CHECK(c.labels[static_cast<std::size_t>(i)] == c.labels[20]);
  CHECK(c.labels[0] != c.labels[20]);
}

TEST_CASE("k-means SSE never increases and is deterministic") {
  Rng rng(3);
  const auto pts = testing::random_cloud(rng, 400);
  const auto c = cluster_kmeans(pts, 30, 11);
  REQUIRE(!c.sse_history.empty());
  for (std::size_t i = 1; i < c.sse_history.size(); ++i)
    CHECK(c.sse_history[i] <= c.sse_history[i - 1] * (1 + 1e-12));
  CHECK(c.labels == cluster_kmeans(pts, 30, 11).labels);
  std::set<int> used(c.labels.begin(), c.labels.end());
  CHECK(static_cast<int>(used.size()) == c.k);
}

TEST_CASE("MST on simple layouts") {
  const std::vector<Vec3> chain{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  const auto e = build_mst(chain);
  REQUIRE(e.size() == 3);
  CHECK(total_weight(e) == doctest::Approx(3.0));
  for (const auto& edge : e) CHECK(edge.b - edge.a == 1);

  const std::vector<Vec3> square{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  const auto s = build_mst(square);
  CHECK(total_weight(s) == doctest::Approx(3.0));
  // Ties break on endpoints, so the diagonal-free tree is fixed.
  CHECK(s == build_mst(square));

  CHECK(build_mst(std::vector<Vec3>{{1, 2, 3}}).empty());
  CHECK_THROWS_AS(build_mst(std::vector<Vec3>{}), ValidationError);
}

TEST_CASE("MST weight matches exhaustive enumeration") {
  Rng rng(4);
  for (int n = 2; n <= 8; ++n) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto pts = testing::random_cloud(rng, n);
      const auto e = build_mst(pts);
      CHECK(e.size() == static_cast<std::size_t>(n - 1));
      CHECK(total_weight(e) == doctest::Approx(testing::exhaustive_mst_weight(pts)).epsilon(1e-12));
    }
  }
}

TEST_CASE("orient_swarm_tree picks the highest degree vertex") {
  // Star around 2.
  const std::vector<MstEdge> star{{0, 2, 1}, {1, 2, 1}, {2, 3, 1}};
  const auto t = orient_swarm_tree(4, star);
  CHECK(t.root == 2);
  CHECK(t.parent[0] == 2);
  CHECK(t.parent[2] == -1);
  CHECK(t.bfs_order.front() == 2);

  // Path 0-1-2-3: vertices 1 and 2 tie, lowest id wins.
  const std::vector<MstEdge> path{{0, 1, 1}, {1, 2, 1}, {2, 3, 1}};
  const auto p = orient_swarm_tree(4, path);
  CHECK(p.root == 1);
  CHECK(p.parent[3] == 2);
  CHECK(p.children[1] == std::vector<int>{0, 2});

  CHECK(orient_swarm_tree(1, {}).root == 0);
  CHECK_THROWS_AS(orient_tree(3, std::vector<MstEdge>{{0, 1, 1}}, 0), ValidationError);
}

TEST_CASE("select_primary_anchor picks the closest pair") {
  const std::vector<Vec3> pa{{0, 0, 0}, {10, 0, 0}, {20, 0, 0}};
  const std::vector<Vec3> pc{{100, 0, 0}, {31, 0, 0}, {50, 0, 0}};
  const auto a = records(pa, 0);
  const auto c = records(pc, 3, 1);
  const auto [anchor, primary] = select_primary_anchor(a, c);
  CHECK(anchor == 2);
  CHECK(primary == 4);
  CHECK_THROWS_AS(select_primary_anchor(a, {}), ValidationError);
}

TEST_CASE("build_fls_tree") {
  const std::vector<Vec3> pts{{0, 0, 0}, {70, 0, 0}, {140, 0, 0}, {70, 70, 0}};
  const auto members = records(pts, 10);
  const auto t = build_fls_tree(members, 12);
  CHECK(t.root_id == 12);
  CHECK(t.members.front() == 12);
  CHECK(t.members.size() == 4);
  CHECK(t.edges.size() == 3);
  const std::map<FlsId, FlsId> parent_of = [&] {
    std::map<FlsId, FlsId> m;
    for (const auto& [p, c] : t.edges) m[c] = p;
    return m;
  }();
  CHECK(parent_of.at(11) == 12);
  CHECK(parent_of.at(10) == 11);
  CHECK(parent_of.at(13) == 11);
  CHECK_THROWS_AS(build_fls_tree(members, 99), ValidationError);
}

TEST_CASE("assign_mount_type") {
  CHECK(assign_mount_type({0, 0, 0}, {0, 0, 70}) == MountType::Top);
  CHECK(assign_mount_type({0, 0, 0}, {0, 0, -70}) == MountType::Bottom);
  CHECK(assign_mount_type({0, 0, 0}, {70, 0, 0}) == MountType::Side);
  CHECK(assign_mount_type({0, 0, 0}, {50, 0, 50 * std::tan(44 * std::numbers::pi / 180)}) == MountType::Side);
  CHECK(assign_mount_type({0, 0, 0}, {50, 0, 50 * std::tan(46 * std::numbers::pi / 180)}) == MountType::Top);
  CHECK(assign_mount_type({0, 0, 0}, {50, 0, -50 * std::tan(46 * std::numbers::pi / 180)}) == MountType::Bottom);
  CHECK_THROWS_AS(assign_mount_type({1, 2, 3}, {1, 2, 3}), ValidationError);
}

TEST_CASE("insert_dark_fls") {
  for (double t_max : {70.0, 80.0}) {
    for (double len : {70.0, 150.0, 240.0, 10.0, 1000.0}) {
      const Vec3 a{5, -3, 2}, b = a + Vec3{len, 0, 0};
      const auto d = insert_dark_fls(a, b, t_max);
      const auto expect = static_cast<std::size_t>(std::ceil(len / t_max) - 1);
      CHECK(d.size() == expect);
      // Every hop, including the two ends, fits in t_max and is equal.
      std::vector<Vec3> chain{a};
      chain.insert(chain.end(), d.begin(), d.end());
      chain.push_back(b);
      for (std::size_t i = 1; i < chain.size(); ++i) {
        CHECK(distance(chain[i - 1], chain[i]) <= t_max + 1e-9);
        CHECK(distance(chain[i - 1], chain[i]) == doctest::Approx(len / static_cast<double>(expect + 1)));
      }
    }
  }
  CHECK(insert_dark_fls({0, 0, 0}, {150, 0, 0}, 70).size() == 2);
  CHECK(insert_dark_fls({0, 0, 0}, {70, 0, 0}, 70).empty());
  CHECK(insert_dark_fls({0, 0, 0}, {240, 0, 0}, 80).size() == 2);
  CHECK_THROWS_AS(insert_dark_fls({0, 0, 0}, {1, 0, 0}, 0), ValidationError);
}

TEST_CASE("a 28-point plan") {
  Rng rng(5);
  PointCloud cloud;
  for (int i = 0; i < 28; ++i) cloud.push_back({{rng.uniform(0, 300), rng.uniform(0, 300), rng.uniform(0, 50)}, {0, 0, 1}});
  const auto pr = plan(cloud, 7, SensorSpec{}, 3);
  CHECK(pr.summary.n_swarms == 4);
  CHECK(pr.summary.f == 28);
  CHECK(pr.plan.swarm_tree.edges.size() == 3);
  CHECK(static_cast<int>(pr.plan.fls.size()) == 28 + pr.summary.dark_count);
  CHECK_NOTHROW(validate_plan(pr.plan));
  for (int i = 0; i < 28; ++i) CHECK_FALSE(pr.plan.fls[static_cast<std::size_t>(i)].is_dark);
  for (std::size_t i = 28; i < pr.plan.fls.size(); ++i) CHECK(pr.plan.fls[i].is_dark);
}

TEST_CASE("planning is deterministic") {
  const auto a = testing::reference_plan();
  const auto b = testing::reference_plan();
  CHECK(a.plan == b.plan);
  CHECK(a.summary.to_json() == b.summary.to_json());
}

TEST_CASE("every localizing pair is within t_max") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto cloud = sample_surface(shapes::skateboard(), 200, seed);
    SensorSpec s;
    const auto pr = plan(cloud, 20, s, seed);
    const auto pairs = localizing_pairs(pr.plan);
    // One pair per non-root FLS plus one per swarm-tree edge... which is every FLS but the root.
    CHECK(pairs.size() == pr.plan.fls.size() - 1);
    for (const auto& [u, v] : pairs) CHECK(distance(pr.plan.at(u).coordinate, pr.plan.at(v).coordinate) <= s.t_max + 1e-9);
    // Each swarm has exactly one root and every other member a parent in the same swarm.
    for (const auto& tree : pr.plan.fls_trees) {
      CHECK_FALSE(pr.plan.at(tree.root_id).parent_id);
      for (FlsId m : tree.members) {
        CHECK(pr.plan.at(m).swarm_id == tree.swarm_id);
        if (m != tree.root_id) CHECK(pr.plan.at(*pr.plan.at(m).parent_id).swarm_id == tree.swarm_id);
      }
    }
  }
}

TEST_CASE("dark count does not grow with t_max") {
  const auto cloud = sample_surface(shapes::panel(), 150, 7);
  int prev = std::numeric_limits<int>::max();
  for (double t_max : {80.0, 100.0, 120.0, 160.0, 240.0}) {
    SensorSpec s;
    s.t_min = 60;
    s.t_max = t_max;
    const auto pr = plan(cloud, 25, s, 7);
    CHECK(pr.summary.dark_count <= prev);
    prev = pr.summary.dark_count;
  }
}

TEST_CASE("reference plan summary") {
  const auto pr = testing::reference_plan();
  CHECK(pr.summary.n_swarms == 6);
  CHECK(pr.summary.f == 150);
  CHECK(pr.plan.fls.size() == 155);
  CHECK(pr.summary.dark_count == 5);
  CHECK(pr.summary.top + pr.summary.side + pr.summary.bottom == 155);
  int sizes = 0;
  for (int s : pr.summary.swarm_sizes) sizes += s;
  CHECK(sizes == 155);
  const auto j = pr.summary.to_json();
  CHECK(j.at("mount_counts").at("side").get<int>() == pr.summary.side);
}
