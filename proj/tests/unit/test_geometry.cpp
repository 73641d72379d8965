#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>

#include "ssc/geometry/delaunay.hpp"
#include "ssc/geometry/features.hpp"
#include "ssc/geometry/regions.hpp"
#include "ssc/geometry/stats.hpp"
#include "support/oracles.hpp"

using namespace ssc;
using namespace ssc::geometry;
using wsi::Cell;
using wsi::Component;
using testing::circumcircle_ok;
using testing::percentile_oracle;

namespace {

std::vector<Point> random_points(Rng& rng, int n, double scale = 100.0) {
  std::vector<Point> p;
  for (int i = 0; i < n; ++i) p.push_back({uniform(rng, 0, scale), uniform(rng, 0, scale)});
  return p;
}

std::set<std::pair<Point, Point>> edge_set(const DelaunayGraph& g) {
  std::set<std::pair<Point, Point>> s;
  for (auto [i, j] : g.edges) s.insert({std::min(g.nodes[i], g.nodes[j]), std::max(g.nodes[i], g.nodes[j])});
  return s;
}

Component block(int r0, int c0, int h, int w) {
  Component out;
  for (int r = r0; r < r0 + h; ++r)
    for (int c = c0; c < c0 + w; ++c) out.push_back({r, c});
  return out;
}

Mask random_mask(Rng& rng, int rows, int cols, double p) {
  Mask m(rows, cols);
  for (auto& v : m.cells()) v = uniform01(rng) < p;
  return m;
}

}  // namespace

TEST_CASE("stats4 examples") {
  std::vector<double> a{5, 5, 5, 5};
  auto s = stats4(a);
  CHECK(s.mean == 5);
  CHECK(s.std == 0);
  CHECK(s.median == 5);
  CHECK(s.iqr == 0);
  std::vector<double> b{1, 2, 3, 4};
  s = stats4(b);
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.std == doctest::Approx(1.1180339887).epsilon(1e-9));
  CHECK(s.median == doctest::Approx(2.5));
  CHECK(s.iqr == doctest::Approx(1.5));
  std::vector<double> one{7.25};
  s = stats4(one);
  CHECK(s.mean == 7.25);
  CHECK(s.median == 7.25);
  CHECK(s.std == 0);
  CHECK(s.iqr == 0);
  CHECK_THROWS_AS(stats4(std::vector<double>{}), Error);
}

TEST_CASE("stats4 matches a sort-based oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 40));
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(uniform(rng, -50, 50));
    const auto s = stats4(v);
    double mean = 0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    CHECK(std::abs(s.mean - mean) < 1e-12);
    CHECK(std::abs(s.std - std::sqrt(var / n)) < 1e-12);
    CHECK(std::abs(s.median - percentile_oracle(v, 50)) < 1e-12);
    CHECK(std::abs(s.iqr - (percentile_oracle(v, 75) - percentile_oracle(v, 25))) < 1e-12);
  }
}

TEST_CASE("region_props") {
  RegionProps one = region_props({{3, 4}}, 2.0);
  CHECK(one.area_cells == 1);
  CHECK(one.area_um2 == 4.0);
  CHECK(one.eccentricity == doctest::Approx(0.0));
  CHECK(one.centroid == Point{4, 3});
  CHECK(region_props(block(0, 0, 1, 9), 1.0).eccentricity > 0.99);
  CHECK(region_props(block(0, 0, 5, 5), 1.0).eccentricity == doctest::Approx(0.0));
  CHECK(region_props(block(0, 0, 2, 40), 1.0).eccentricity > 0.99);
  Component disc;
  for (int r = -20; r <= 20; ++r)
    for (int c = -20; c <= 20; ++c)
      if (r * r + c * c <= 400) disc.push_back({r + 20, c + 20});
  CHECK(region_props(disc, 1.0).eccentricity < 0.1);
  CHECK_THROWS(region_props({}, 1.0));
}

TEST_CASE("orientation and incircle predicates are exact") {
  CHECK(orient2d({0, 0}, {1, 0}, {0, 1}) == 1);
  CHECK(orient2d({0, 0}, {0, 1}, {1, 0}) == -1);
  CHECK(orient2d({0, 0}, {1, 1}, {2, 2}) == 0);
  // nearly collinear points that defeat naive double arithmetic
  const double e = std::ldexp(1.0, -50);
  CHECK(orient2d({0.5, 0.5}, {12, 12}, {24, 24}) == 0);
  CHECK(orient2d({0.5 + e, 0.5}, {12, 12}, {24, 24}) == -1);
  CHECK(incircle({0, 0}, {1, 0}, {1, 1}, {0, 1}) == 0);
  CHECK(incircle({0, 0}, {1, 0}, {0, 1}, {0.5, 0.5}) == 1);
  CHECK(incircle({0, 0}, {1, 0}, {0, 1}, {5, 5}) == -1);
}

TEST_CASE("delaunay small cases") {
  const double h = 10.0 * std::sqrt(3.0) / 2.0;
  std::vector<Point> tri{{0, 0}, {10, 0}, {5, h}};
  DelaunayGraph g = delaunay(tri);
  CHECK(g.edges.size() == 3);
  CHECK(g.degrees() == std::vector<int>{2, 2, 2});
  auto s = delaunay_stats(g);
  CHECK(s[0] == 2);
  CHECK(s[1] == 0);
  CHECK(s[2] == 2);
  CHECK(s[3] == 0);
  CHECK(s[4] == doctest::Approx(10.0));
  CHECK(s[5] == doctest::Approx(0.0).epsilon(1e-9));

  std::vector<Point> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  g = delaunay(square);
  CHECK(g.edges.size() == 5);
  auto d = g.degrees();
  std::sort(d.begin(), d.end());
  CHECK(d == std::vector<int>{2, 2, 3, 3});
  CHECK(delaunay_stats(g)[0] == doctest::Approx(2.5));

  CHECK_THROWS_AS(delaunay(std::vector<Point>{{0, 0}, {1, 1}}), DegenerateGeometry);
  CHECK_THROWS_AS(delaunay(std::vector<Point>{{0, 0}, {1, 1}, {2, 2}, {3, 3}}),
                  DegenerateGeometry);
  CHECK_THROWS_AS(delaunay(std::vector<Point>{{0, 0}, {1, 1}, {0, 0}, {1, 1}}),
                  DegenerateGeometry);
  // duplicates are removed before triangulating
  std::vector<Point> dup{{0, 0}, {1, 0}, {0, 1}, {1, 0}};
  CHECK(delaunay(dup).nodes.size() == 3);
}

TEST_CASE("delaunay empty circumcircle on random and degenerate sets") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    auto pts = random_points(rng, 50);
    DelaunayGraph g = delaunay(pts);
    CHECK(circumcircle_ok(g, 1e-9));
    // Euler: t = 2n - 2 - hull vertices, so at least n - 2 triangles
    CHECK(g.triangles.size() >= pts.size() - 2);
  }
  std::vector<Point> lattice;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) lattice.push_back({double(i), double(j)});
  DelaunayGraph g = delaunay(lattice);
  CHECK(g.triangles.size() == 50);
  CHECK(circumcircle_ok(g, 1e-9));
  // collinear leading points
  std::vector<Point> chain{{0, 0}, {0, 1}, {0, 2}, {0, 3}, {1, 5}, {2, 1}};
  CHECK(circumcircle_ok(delaunay(chain), 1e-9));
}

TEST_CASE("delaunay is permutation invariant and scale covariant") {
  Rng rng(5);
  auto pts = random_points(rng, 40);
  DelaunayGraph a = delaunay(pts);
  std::shuffle(pts.begin(), pts.end(), rng);
  DelaunayGraph b = delaunay(pts);
  CHECK(edge_set(a) == edge_set(b));
  std::vector<Point> scaled;
  for (auto p : pts) scaled.push_back({p.x * 2, p.y * 2});
  auto sa = delaunay_stats(a);
  auto sc = delaunay_stats(delaunay(scaled));
  for (int i = 0; i < 4; ++i) CHECK(sc[i] == doctest::Approx(sa[i]));
  for (int i = 4; i < 8; ++i) CHECK(sc[i] == doctest::Approx(2 * sa[i]));
}

TEST_CASE("connected components against a flood-fill oracle") {
  Mask m(10, 10);
  for (auto c : block(1, 1, 3, 3)) m.at(c.row, c.col) = 1;
  for (auto c : block(6, 6, 3, 3)) m.at(c.row, c.col) = 1;
  auto comps = wsi::connected_components(m);
  REQUIRE(comps.size() == 2);
  CHECK(comps[0].size() == 9);
  CHECK(comps[1].size() == 9);
  CHECK(wsi::connected_components(Mask(5, 5)).empty());
  Mask diag(3, 3);
  diag.at(0, 0) = diag.at(1, 1) = diag.at(2, 2) = 1;
  CHECK(wsi::connected_components(diag).size() == 1);

  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    Mask r = random_mask(rng, 64, 64, 0.45);
    auto got = wsi::connected_components(r);
    // BFS labelling in a different visiting order
    Grid<int> lab(64, 64, -1);
    int next = 0;
    for (int c = 63; c >= 0; --c)
      for (int row = 63; row >= 0; --row) {
        if (!r.at(row, c) || lab.at(row, c) >= 0) continue;
        std::deque<Cell> q{{row, c}};
        lab.at(row, c) = next;
        while (!q.empty()) {
          Cell cur = q.front();
          q.pop_front();
          for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
              int rr = cur.row + dr, cc = cur.col + dc;
              if (r.contains(rr, cc) && r.at(rr, cc) && lab.at(rr, cc) < 0) {
                lab.at(rr, cc) = next;
                q.push_back({rr, cc});
              }
            }
        }
        ++next;
      }
    REQUIRE(static_cast<int>(got.size()) == next);
    std::size_t total = 0;
    for (std::size_t k = 0; k < got.size(); ++k) {
      total += got[k].size();
      const int id = lab.at(got[k][0].row, got[k][0].col);
      int count = 0;
      for (auto c : got[k]) CHECK(lab.at(c.row, c.col) == id);
      for (int v : lab.cells()) count += v == id;
      CHECK(count == static_cast<int>(got[k].size()));
      if (k > 0) {
        const auto& p = got[k - 1][0];
        const auto& q = got[k][0];
        CHECK((p.row < q.row || (p.row == q.row && p.col < q.col)));
      }
    }
    CHECK(total == static_cast<std::size_t>(std::count(r.cells().begin(), r.cells().end(), 1)));
  }
}

TEST_CASE("threshold and stroma restriction") {
  wsi::LikelihoodMap lm;
  lm.values = Grid<float>(1, 2);
  lm.values[0] = 0.95f;
  lm.values[1] = 0.5f;
  lm.applicable = Mask(1, 2, 1);
  Mask t = wsi::threshold_map(lm, 0.9);
  CHECK(t[0] == 1);
  CHECK(t[1] == 0);
  CHECK(wsi::threshold_map(lm, 0.0).cells() == std::vector<std::uint8_t>{1, 1});
  lm.values[1] = 1.0f;
  CHECK(wsi::threshold_map(lm, 1.0).cells() == std::vector<std::uint8_t>{0, 1});
  CHECK_THROWS(wsi::threshold_map(lm, 1.5));

  wsi::LabelMap lab;
  lab.labels = Grid<std::uint8_t>(4, 4, 3);
  wsi::LikelihoodMap l4;
  l4.values = Grid<float>(4, 4, 0.7f);
  l4.applicable = Mask(4, 4, 1);
  auto none = wsi::restrict_to_stroma(l4, lab);
  CHECK(std::count(none.applicable.cells().begin(), none.applicable.cells().end(), 1) == 0);
  lab.labels = Grid<std::uint8_t>(4, 4, 2);
  auto all = wsi::restrict_to_stroma(l4, lab);
  CHECK(all.applicable == l4.applicable);
  CHECK(all.values == l4.values);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 2; ++c) lab.labels.at(r, c) = 1;
  auto half = wsi::restrict_to_stroma(l4, lab);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK(half.applicable.at(r, c) == (c >= 2));
  wsi::LabelMap other = lab;
  other.geometry.stride = 8;
  CHECK_THROWS_AS(wsi::restrict_to_stroma(l4, other), ShapeError);
}

TEST_CASE("area voronoi equals brute-force nearest region") {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    Mask domain = random_mask(rng, 64, 64, 0.85);
    std::vector<Component> regions;
    for (int k = 0; k < 3; ++k) {
      const int r0 = static_cast<int>(uniform_index(rng, 56));
      const int c0 = static_cast<int>(uniform_index(rng, 56));
      Component comp;
      for (auto c : block(r0, c0, 8, 8))
        if (uniform01(rng) < 0.7) comp.push_back(c);
      regions.push_back(comp);
    }
    // drop overlaps so regions stay disjoint
    std::set<std::pair<int, int>> taken;
    for (auto& reg : regions) {
      Component kept;
      for (auto c : reg)
        if (taken.insert({c.row, c.col}).second) kept.push_back(c);
      reg = kept;
    }
    AreaVoronoi v = area_voronoi(regions, domain);
    int sum = 0;
    for (int z : v.zoi_cells) sum += z;
    CHECK(sum == std::count(domain.cells().begin(), domain.cells().end(), 1));
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) {
        if (!domain.at(r, c)) {
          CHECK(v.owner.at(r, c) == -1);
          continue;
        }
        CHECK(v.owner.at(r, c) == testing::nearest_region(regions, r, c));
      }
  }
}

TEST_CASE("area voronoi special cases") {
  Mask domain(20, 20, 1);
  AreaVoronoi one = area_voronoi({block(2, 2, 3, 3)}, domain);
  CHECK(one.zoi_cells[0] == 400);
  AreaVoronoi two = area_voronoi({block(8, 2, 4, 3), block(8, 15, 4, 3)}, domain);
  CHECK(two.zoi_cells[0] == two.zoi_cells[1]);
  CHECK_THROWS(area_voronoi({}, domain));
}

TEST_CASE("tissue amounts") {
  wsi::LabelMap m;
  m.geometry.stride = 16;
  m.geometry.spacing_um = 0.455;
  m.labels = Grid<std::uint8_t>(10, 10, 2);
  auto a = tissue_amounts(m);
  CHECK(a[1] == doctest::Approx(100 * 7.28 * 7.28));
  CHECK(a[3] == 0);
  CHECK(a[4] == 1);
  CHECK(a[5] == 0);
  m.labels = Grid<std::uint8_t>(3, 1);
  m.labels[0] = 1;
  m.labels[1] = 2;
  m.labels[2] = 3;
  a = tissue_amounts(m);
  for (int i = 3; i < 6; ++i) CHECK(a[i] == doctest::Approx(1.0 / 3.0));
  CHECK(std::abs(a[3] + a[4] + a[5] - 1.0) < 1e-9);
  CHECK_THROWS_AS(tissue_amounts(wsi::LabelMap{{}, Grid<std::uint8_t>(2, 2)}), DegenerateGeometry);
}

namespace {

wsi::LabelMap feature_label_map(double spacing) {
  wsi::LabelMap m;
  m.geometry.stride = 4;
  m.geometry.spacing_um = spacing;
  m.labels = Grid<std::uint8_t>(40, 40, 2);
  for (auto c : block(0, 30, 40, 10)) m.labels.at(c.row, c.col) = 3;
  for (auto [r, c] : std::vector<std::pair<int, int>>{{3, 3}, {5, 20}, {18, 8}, {25, 22}, {33, 5}})
    for (auto cell : block(r, c, 3, 2 + r % 3)) m.labels.at(cell.row, cell.col) = 1;
  return m;
}

wsi::LikelihoodMap feature_likelihood(const wsi::LabelMap& lm, bool with_tumour) {
  wsi::LikelihoodMap l;
  l.geometry = lm.geometry;
  l.values = Grid<float>(40, 40, 0.1f);
  l.applicable = Mask(40, 40, 1);
  if (with_tumour) {
    for (auto c : block(10, 12, 6, 6)) l.values.at(c.row, c.col) = 0.97f;
    for (auto c : block(30, 12, 4, 9)) l.values.at(c.row, c.col) = 0.93f;
    for (auto c : block(2, 25, 3, 3)) l.values.at(c.row, c.col) = 1.0f;
  }
  return wsi::restrict_to_stroma(l, lm);
}

double feature(const FeatureVector& f, const std::string& name) {
  auto it = std::find(f.names.begin(), f.names.end(), name);
  REQUIRE(it != f.names.end());
  return f.values[it - f.names.begin()];
}

}  // namespace

TEST_CASE("default manifest layout") {
  const auto& m = default_manifest();
  CHECK(m.features.size() == 67);
  int a = 0, b = 0;
  for (const auto& f : m.features) (f.source == "CNN_I" ? a : b) += 1;
  CHECK(a == 31);
  CHECK(b == 36);
  std::set<std::string> names;
  for (const auto& f : m.features) names.insert(f.name);
  CHECK(names.size() == 67);
  CHECK(manifest_from_json(manifest_to_json(m)) == m);
}

TEST_CASE("assemble_features") {
  auto lm = feature_label_map(0.455);
  auto with = assemble_features(lm, feature_likelihood(lm, true), 0.9);
  auto without = assemble_features(lm, feature_likelihood(lm, false), 0.9);
  CHECK(with.values.size() == 67);
  CHECK(without.values.size() == 67);
  for (double v : with.values) CHECK(std::isfinite(v));
  for (std::size_t i = 31; i < 67; ++i) CHECK(without.values[i] == 0.0);
  CHECK(feature(with, "ts_area_um2") > 0.0);
  CHECK(feature(with, "ts_component_count") == 3);
  CHECK(feature(with, "epi_region_count") == 5);
  CHECK(feature(with, "ts_max_likelihood_median") == doctest::Approx(0.97));

  // doubling the cell size: areas x4, distances x2, the rest unchanged
  auto lm2 = feature_label_map(0.91);
  auto scaled = assemble_features(lm2, feature_likelihood(lm2, true), 0.9);
  for (std::size_t i = 0; i < with.names.size(); ++i) {
    const auto& n = with.names[i];
    double factor = 1.0;
    if (n.find("area_um2") != std::string::npos) factor = 4.0;
    if (n.find("distance_um") != std::string::npos) factor = 2.0;
    CHECK_MESSAGE(scaled.values[i] == doctest::Approx(factor * with.values[i]).epsilon(1e-9), n);
  }

  FeatureManifest sub;
  sub.version = "subset";
  sub.features = {default_manifest().features[7], default_manifest().features[0]};
  auto picked = assemble_features(lm, feature_likelihood(lm, true), 0.9, sub);
  CHECK(picked.values == std::vector<double>{with.values[7], with.values[0]});
  sub.features.push_back({"no_such_feature", "x", "CNN_I", "value"});
  CHECK_THROWS_AS(assemble_features(lm, feature_likelihood(lm, true), 0.9, sub), ConfigError);
}

TEST_CASE("map PNG round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "ssc_test_maps";
  auto lm = feature_label_map(0.455);
  lm.geometry.window = 32;
  lm.geometry.origin = 16;
  wsi::write_label_map(dir / "a.png", lm);
  auto back = wsi::read_label_map(dir / "a.png");
  CHECK(back.labels == lm.labels);
  CHECK(back.geometry == lm.geometry);
  auto l = feature_likelihood(lm, true);
  wsi::write_likelihood_map(dir / "b.png", l);
  auto lb = wsi::read_likelihood_map(dir / "b.png");
  CHECK(lb.applicable == l.applicable);
  for (std::size_t i = 0; i < l.values.size(); ++i)
    if (l.applicable[i]) CHECK(std::abs(lb.values[i] - l.values[i]) <= 0.5 / 65534 + 1e-7);
  std::filesystem::remove_all(dir);
}
