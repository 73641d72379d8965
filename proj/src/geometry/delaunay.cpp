#include "ssc/geometry/delaunay.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ssc/common.hpp"
#include "ssc/geometry/stats.hpp"

namespace ssc::geometry {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon() / 2;
// Error bounds from Shewchuk's adaptive predicates.
constexpr double kOrientBound = (3.0 + 16.0 * kEps) * kEps;
constexpr double kIncircleBound = (10.0 + 96.0 * kEps) * kEps;

int sign(const mpq_class& v) { return sgn(v); }

}  // namespace

int orient2d(Point a, Point b, Point c) {
  const double l = (a.x - c.x) * (b.y - c.y);
  const double r = (a.y - c.y) * (b.x - c.x);
  const double det = l - r;
  const double bound = kOrientBound * (std::abs(l) + std::abs(r));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  const mpq_class ax(a.x), ay(a.y), bx(b.x), by(b.y), cx(c.x), cy(c.y);
  return sign((ax - cx) * (by - cy) - (ay - cy) * (bx - cx));
}

int incircle(Point a, Point b, Point c, Point d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double bc = bdx * cdy - cdx * bdy;
  const double ca = cdx * ady - adx * cdy;
  const double ab = adx * bdy - bdx * ady;
  const double det = alift * bc + blift * ca + clift * ab;
  const double permanent =
      (std::abs(bdx * cdy) + std::abs(cdx * bdy)) * alift +
      (std::abs(cdx * ady) + std::abs(adx * cdy)) * blift +
      (std::abs(adx * bdy) + std::abs(bdx * ady)) * clift;
  const double bound = kIncircleBound * permanent;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  const mpq_class dx(d.x), dy(d.y);
  const mpq_class qax = mpq_class(a.x) - dx, qay = mpq_class(a.y) - dy;
  const mpq_class qbx = mpq_class(b.x) - dx, qby = mpq_class(b.y) - dy;
  const mpq_class qcx = mpq_class(c.x) - dx, qcy = mpq_class(c.y) - dy;
  const mpq_class e = (qax * qax + qay * qay) * (qbx * qcy - qcx * qby) +
                      (qbx * qbx + qby * qby) * (qcx * qay - qax * qcy) +
                      (qcx * qcx + qcy * qcy) * (qax * qby - qbx * qay);
  return sign(e);
}

std::vector<int> DelaunayGraph::degrees() const {
  std::vector<int> d(nodes.size(), 0);
  for (auto [i, j] : edges) {
    ++d[i];
    ++d[j];
  }
  return d;
}

std::vector<double> DelaunayGraph::mean_incident_lengths() const {
  std::vector<double> sum(nodes.size(), 0.0);
  std::vector<int> count(nodes.size(), 0);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    sum[edges[e].first] += lengths[e];
    sum[edges[e].second] += lengths[e];
    ++count[edges[e].first];
    ++count[edges[e].second];
  }
  for (std::size_t i = 0; i < sum.size(); ++i)
    if (count[i]) sum[i] /= count[i];
  return sum;
}

namespace {

using EdgeKey = std::pair<int, int>;
EdgeKey key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

class Triangulation {
 public:
  explicit Triangulation(const std::vector<Point>& p) : p_(p) {}

  void add(int a, int b, int c) {
    if (orient2d(p_[a], p_[b], p_[c]) < 0) std::swap(b, c);
    const int t = static_cast<int>(tris_.size());
    tris_.push_back({a, b, c});
    link(t);
  }

  /// Lawson flips until every interior edge is locally Delaunay.
  void legalize() {
    std::vector<EdgeKey> stack;
    for (const auto& [k, _] : adj_) stack.push_back(k);
    while (!stack.empty()) {
      EdgeKey e = stack.back();
      stack.pop_back();
      auto it = adj_.find(e);
      if (it == adj_.end() || it->second[1] < 0) continue;
      const int t1 = it->second[0], t2 = it->second[1];
      const int c = opposite(t1, e), d = opposite(t2, e);
      // Orient so that (a, b, c) is counter-clockwise in t1.
      int a = e.first, b = e.second;
      if (orient2d(p_[a], p_[b], p_[c]) < 0) std::swap(a, b);
      if (incircle(p_[a], p_[b], p_[c], p_[d]) <= 0) continue;
      unlink(t1);
      unlink(t2);
      tris_[t1] = {a, d, c};
      tris_[t2] = {d, b, c};
      link(t1);
      link(t2);
      for (EdgeKey k : {key(a, d), key(d, b), key(b, c), key(c, a)}) stack.push_back(k);
    }
  }

  const std::vector<std::array<int, 3>>& triangles() const { return tris_; }
  std::vector<EdgeKey> edges() const {
    std::vector<EdgeKey> out;
    for (const auto& [k, _] : adj_) out.push_back(k);
    return out;
  }

 private:
  int opposite(int t, EdgeKey e) const {
    for (int v : tris_[t])
      if (v != e.first && v != e.second) return v;
    throw DegenerateGeometry("corrupt triangulation");
  }
  void link(int t) {
    const auto& v = tris_[t];
    for (int i = 0; i < 3; ++i) {
      auto& slot = adj_.try_emplace(key(v[i], v[(i + 1) % 3]), std::array<int, 2>{-1, -1})
                       .first->second;
      (slot[0] < 0 ? slot[0] : slot[1]) = t;
    }
  }
  void unlink(int t) {
    const auto& v = tris_[t];
    for (int i = 0; i < 3; ++i) {
      auto it = adj_.find(key(v[i], v[(i + 1) % 3]));
      auto& slot = it->second;
      if (slot[0] == t) {
        slot[0] = slot[1];
        slot[1] = -1;
      } else {
        slot[1] = -1;
      }
      if (slot[0] < 0) adj_.erase(it);
    }
  }

  const std::vector<Point>& p_;
  std::vector<std::array<int, 3>> tris_;
  std::map<EdgeKey, std::array<int, 2>> adj_;
};

}  // namespace

DelaunayGraph delaunay(std::span<const Point> points) {
  for (const Point& q : points)
    if (!std::isfinite(q.x) || !std::isfinite(q.y))
      throw NonFiniteError("delaunay: non-finite coordinate");
  DelaunayGraph g;
  g.nodes.assign(points.begin(), points.end());
  std::sort(g.nodes.begin(), g.nodes.end());
  g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end()), g.nodes.end());
  const auto& p = g.nodes;
  const int n = static_cast<int>(p.size());
  if (n < 3) throw DegenerateGeometry("delaunay needs at least 3 distinct points");

  // Sweep in lexicographic order. The first non-collinear point closes a fan
  // over the leading collinear chain; later points attach to every hull edge
  // they see.
  int k = 2;
  while (k < n && orient2d(p[0], p[1], p[k]) == 0) ++k;
  if (k == n) throw DegenerateGeometry("delaunay: all points are collinear");

  Triangulation tri(p);
  for (int i = 0; i + 1 < k; ++i) tri.add(i, i + 1, k);
  // Hull as a counter-clockwise cycle of vertex ids.
  std::vector<int> hull;
  if (orient2d(p[0], p[k - 1], p[k]) > 0) {
    for (int i = 0; i < k; ++i) hull.push_back(i);
    hull.push_back(k);
  } else {
    hull.push_back(k);
    for (int i = k - 1; i >= 0; --i) hull.push_back(i);
  }
  for (int q = k + 1; q < n; ++q) {
    const int h = static_cast<int>(hull.size());
    std::vector<char> visible(h);
    bool any = false;
    for (int i = 0; i < h; ++i) {
      visible[i] = orient2d(p[hull[i]], p[hull[(i + 1) % h]], p[q]) < 0;
      any = any || visible[i];
    }
    if (!any) throw DegenerateGeometry("delaunay: sweep point inside hull");
    // Visible edges form one contiguous run; find its start.
    int start = 0;
    while (!(visible[start] && !visible[(start + h - 1) % h])) ++start;
    int len = 0;
    while (visible[(start + len) % h]) {
      tri.add(hull[(start + len) % h], hull[(start + len + 1) % h], q);
      ++len;
    }
    std::vector<int> next;
    for (int i = 0; i <= h - len; ++i) next.push_back(hull[(start + len + i) % h]);
    next.push_back(q);
    hull = std::move(next);
  }
  tri.legalize();

  g.triangles = tri.triangles();
  g.edges = tri.edges();
  for (auto [i, j] : g.edges) g.lengths.push_back(std::hypot(p[i].x - p[j].x, p[i].y - p[j].y));
  return g;
}

std::array<double, 8> delaunay_stats(const DelaunayGraph& graph) {
  std::vector<double> deg;
  for (int d : graph.degrees()) deg.push_back(d);
  const auto len = graph.mean_incident_lengths();
  const auto a = stats4(deg).values();
  const auto b = stats4(len).values();
  return {a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]};
}

}  // namespace ssc::geometry
