#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "transmot/geometry.hpp"
#include "transmot/graph.hpp"

using namespace transmot;

TEST_CASE("iou analytic cases") {
  const BoundingBox a{0, 0, 2, 2};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {5, 5, 1, 1}) == 0.0);
  // overlap 1x2=2, union 4+4-2=6
  CHECK(iou({0, 0, 2, 2}, {1, 0, 2, 2}) == doctest::Approx(1.0 / 3).epsilon(1e-13));
}

TEST_CASE("touching boxes are not connected") {
  CHECK(iou({0, 0, 1, 1}, {1, 0, 1, 1}) == 0.0);
  const auto g = build_tracklet_graph(2, {{0, {0, 0, 1, 1}}, {1, {1, 0, 1, 1}}});
  CHECK(g.edges.empty());
}

TEST_CASE("iou is symmetric with self-IoU one on random boxes") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const BoundingBox a = testutil::random_box(rng);
    const BoundingBox b = testutil::random_box(rng);
    CHECK(iou(a, b) == iou(b, a));
    CHECK(iou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(iou(a, b) >= 0.0);
    CHECK(iou(a, b) <= 1.0);
  }
}

TEST_CASE("tracklet graph construction") {
  SUBCASE("three disjoint boxes yield no cross edges") {
    const auto g = build_tracklet_graph(
        3, {{0, {0, 0, 1, 1}}, {1, {10, 0, 1, 1}}, {2, {20, 0, 1, 1}}});
    CHECK(g.num_nodes == 3);
    CHECK(g.edges.empty());
    for (int i = 0; i < 3; ++i) CHECK(g.connected(i, i));
  }
  SUBCASE("identical boxes get a weight-1 edge") {
    const auto g = build_tracklet_graph(2, {{0, {0, 0, 4, 4}}, {1, {0, 0, 4, 4}}});
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].weight == 1.0);
  }
  SUBCASE("one-third overlap carries the IoU weight") {
    const auto g = build_tracklet_graph(2, {{0, {0, 0, 2, 2}}, {1, {1, 0, 2, 2}}});
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].weight == doctest::Approx(1.0 / 3).epsilon(1e-13));
  }
  SUBCASE("absent indices stay isolated") {
    const auto g = build_tracklet_graph(4, {{1, {0, 0, 2, 2}}, {3, {1, 0, 2, 2}}});
    CHECK(g.num_nodes == 4);
    CHECK(g.connected(1, 3));
    CHECK(!g.connected(0, 1));
    CHECK(!g.connected(0, 2));
  }
}

TEST_CASE("candidate graph carries the 0.5-weight sink") {
  SUBCASE("empty frame leaves only the sink") {
    const auto g = build_candidate_graph({});
    CHECK(g.num_nodes == 1);
    CHECK(g.has_virtual_sink);
    CHECK(g.sink_index() == 0);
    CHECK(g.edges.empty());
  }
  SUBCASE("two disjoint detections") {
    Detection d1, d2;
    d1.bbox = {0, 0, 1, 1};
    d2.bbox = {50, 50, 1, 1};
    const auto g = build_candidate_graph({d1, d2});
    CHECK(g.num_nodes == 3);
    CHECK(g.edge_weight(0, 2) == 0.5);
    CHECK(g.edge_weight(1, 2) == 0.5);
    CHECK(!g.connected(0, 1));
  }
  SUBCASE("identical detections also connect to each other") {
    Detection d1, d2;
    d1.bbox = d2.bbox = {0, 0, 4, 4};
    const auto g = build_candidate_graph({d1, d2});
    CHECK(g.edge_weight(0, 1) == 1.0);
    CHECK(g.edge_weight(0, 2) == 0.5);
    CHECK(g.edge_weight(1, 2) == 0.5);
  }
}

TEST_CASE("normalize_box divides componentwise") {
  const NormalizedBox full = normalize_box({0, 0, 640, 480}, 640, 480);
  CHECK(full.u == 0.0);
  CHECK(full.v == 0.0);
  CHECK(full.w == 1.0);
  CHECK(full.h == 1.0);

  const NormalizedBox nb = normalize_box({10, 20, 30, 40}, 100, 200);
  CHECK(nb.u == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(nb.v == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(nb.w == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(nb.h == doctest::Approx(0.2).epsilon(1e-15));

  const NormalizedBox tiny = normalize_box({0, 0, 1e-6, 1e-6}, 640, 480);
  CHECK(tiny.w > 0.0);
  CHECK(tiny.h > 0.0);
}

TEST_CASE("dense adjacency layouts") {
  SUBCASE("no edges: identity") {
    const auto g = build_tracklet_graph(2, {{0, {0, 0, 1, 1}}, {1, {10, 0, 1, 1}}});
    const Tensor w = dense_adjacency(g);
    CHECK(w.at(0) == 1.0);
    CHECK(w.at(1) == 0.0);
    CHECK(w.at(2) == 0.0);
    CHECK(w.at(3) == 1.0);
  }
  SUBCASE("identical boxes: all ones") {
    const auto g = build_tracklet_graph(2, {{0, {0, 0, 1, 1}}, {1, {0, 0, 1, 1}}});
    const Tensor w = dense_adjacency(g);
    for (int i = 0; i < 4; ++i) CHECK(w.at(i) == 1.0);
  }
  SUBCASE("single candidate plus sink") {
    Detection d;
    d.bbox = {0, 0, 5, 5};
    const Tensor w = dense_adjacency(build_candidate_graph({d}));
    CHECK(w.at(0) == 1.0);
    CHECK(w.at(1) == 0.5);
    CHECK(w.at(2) == 0.5);
    CHECK(w.at(3) == 1.0);
  }
}

TEST_CASE("dense adjacency is symmetric with unit diagonal on random graphs") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::pair<int, BoundingBox>> boxes;
    const int n = 2 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) boxes.emplace_back(i, testutil::random_box(rng, 60.0));
    const Tensor w = dense_adjacency(build_tracklet_graph(n, boxes));
    for (int i = 0; i < n; ++i) {
      CHECK(w.at(i * n + i) == 1.0);
      for (int j = 0; j < n; ++j) CHECK(w.at(i * n + j) == w.at(j * n + i));
    }
  }
}

TEST_CASE("graph building commutes with node relabeling") {
  std::mt19937_64 rng(23);
  const int n = 5;
  std::vector<std::pair<int, BoundingBox>> boxes;
  for (int i = 0; i < n; ++i) boxes.emplace_back(i, testutil::random_box(rng, 50.0));

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::pair<int, BoundingBox>> relabeled;
  for (const auto& [idx, box] : boxes) relabeled.emplace_back(perm[idx], box);

  const auto g = build_tracklet_graph(n, boxes);
  const auto gp = build_tracklet_graph(n, relabeled);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      CHECK(g.edge_weight(i, j) == gp.edge_weight(perm[i], perm[j]));
    }
  }
}

TEST_CASE("scaled laplacian hand cases") {
  SUBCASE("single node") {
    const auto g = build_tracklet_graph(1, {{0, {0, 0, 2, 2}}});
    const Tensor lhat = scaled_laplacian(g);
    CHECK(lhat.at(0) == doctest::Approx(-1.0).epsilon(1e-14));
  }
  SUBCASE("two-node unit path") {
    const auto g = build_tracklet_graph(2, {{0, {0, 0, 4, 4}}, {1, {0, 0, 4, 4}}});
    const Tensor lhat = scaled_laplacian(g);
    for (int i = 0; i < 4; ++i) CHECK(lhat.at(i) == doctest::Approx(-0.5).epsilon(1e-13));
  }
}
