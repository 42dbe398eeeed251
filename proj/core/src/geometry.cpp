#include "diffplan/geometry.hpp"

#include <algorithm>
#include <limits>

#include "diffplan/error.hpp"

namespace diffplan {

double wrap_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

Quat2 yaw_to_quat(double phi) {
  if (!std::isfinite(phi)) throw_invalid("yaw must be finite");
  const double half = 0.5 * wrap_angle(phi);
  return {std::sin(half), std::cos(half)};
}

double quat_to_yaw(double qz, double qw) { return wrap_angle(2.0 * std::atan2(qz, qw)); }

Pose Pose::from_yaw(double x, double y, double yaw) {
  const Quat2 q = yaw_to_quat(yaw);
  return {x, y, q.qz, q.qw};
}

double Pose::yaw() const { return quat_to_yaw(qz, qw); }

Pose Pose::normalized() const {
  double n = std::hypot(qz, qw);
  Pose p = *this;
  if (n == 0.0) {
    p.qz = 0.0;
    p.qw = 1.0;
    return p;
  }
  p.qz = qz / n;
  p.qw = qw / n;
  if (p.qw < 0.0 || (p.qw == 0.0 && p.qz < 0.0)) {
    p.qz = -p.qz;
    p.qw = -p.qw;
  }
  return p;
}

ConvexPolygon ConvexPolygon::rectangle(double xmin, double ymin, double xmax, double ymax) {
  return {{{xmin, ymin}, {xmax, ymin}, {xmax, ymax}, {xmin, ymax}}};
}

ConvexPolygon ConvexPolygon::oriented_box(Vec2 center, double yaw, double length, double width) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  const std::array<Vec2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  ConvexPolygon poly;
  poly.vertices.reserve(4);
  for (const Vec2& l : local) {
    poly.vertices.push_back({center.x + c * l.x - s * l.y, center.y + s * l.x + c * l.y});
  }
  return poly;
}

double ConvexPolygon::area() const {
  const std::size_t n = vertices.size();
  if (n < 3) return 0.0;
  double a = 0.0;
  for (std::size_t i = 0; i < n; ++i) a += vertices[i].cross(vertices[(i + 1) % n]);
  return 0.5 * std::abs(a);
}

bool ConvexPolygon::contains(Vec2 p) const {
  const std::size_t n = vertices.size();
  if (n < 3) return false;
  // Orientation-agnostic: p is inside when it lies on one side of every edge.
  bool pos = false;
  bool neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = vertices[i];
    const Vec2 b = vertices[(i + 1) % n];
    const double c = (b - a).cross(p - a);
    if (c > 0.0) pos = true;
    if (c < 0.0) neg = true;
    if (pos && neg) return false;
  }
  return true;
}

void ConvexPolygon::bounds(Vec2& lo, Vec2& hi) const {
  lo = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  hi = {-lo.x, -lo.y};
  for (const Vec2& v : vertices) {
    lo.x = std::min(lo.x, v.x);
    lo.y = std::min(lo.y, v.y);
    hi.x = std::max(hi.x, v.x);
    hi.y = std::max(hi.y, v.y);
  }
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.dot(ab);
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

namespace {

int orientation(Vec2 a, Vec2 b, Vec2 c) {
  const double v = (b - a).cross(c - a);
  return (v > 0.0) - (v < 0.0);
}

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

template <typename Fn>
void for_each_edge(const ConvexPolygon& poly, Fn&& fn) {
  const std::size_t n = poly.vertices.size();
  if (n == 0) return;
  if (n == 1) {
    fn(poly.vertices[0], poly.vertices[0]);
    return;
  }
  if (n == 2) {
    fn(poly.vertices[0], poly.vertices[1]);
    return;
  }
  for (std::size_t i = 0; i < n; ++i) fn(poly.vertices[i], poly.vertices[(i + 1) % n]);
}

}  // namespace

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const int o1 = orientation(a, b, c);
  const int o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a);
  const int o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

double bbox_distance(Vec2 lo_a, Vec2 hi_a, Vec2 lo_b, Vec2 hi_b) {
  const double dx = std::max({0.0, lo_b.x - hi_a.x, lo_a.x - hi_b.x});
  const double dy = std::max({0.0, lo_b.y - hi_a.y, lo_a.y - hi_b.y});
  return std::hypot(dx, dy);
}

double polygon_distance(const ConvexPolygon& a, const ConvexPolygon& b) {
  if (a.vertices.empty() || b.vertices.empty()) return std::numeric_limits<double>::infinity();
  for (const Vec2& v : a.vertices) {
    if (b.contains(v)) return 0.0;
  }
  for (const Vec2& v : b.vertices) {
    if (a.contains(v)) return 0.0;
  }
  bool hit = false;
  double best = std::numeric_limits<double>::infinity();
  for_each_edge(a, [&](Vec2 p0, Vec2 p1) {
    for_each_edge(b, [&](Vec2 q0, Vec2 q1) {
      if (hit) return;
      if (segments_intersect(p0, p1, q0, q1)) {
        hit = true;
        return;
      }
      best = std::min({best, point_segment_distance(p0, q0, q1), point_segment_distance(p1, q0, q1),
                       point_segment_distance(q0, p0, p1), point_segment_distance(q1, p0, p1)});
    });
  });
  return hit ? 0.0 : best;
}

}  // namespace diffplan
