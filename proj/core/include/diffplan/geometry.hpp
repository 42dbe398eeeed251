#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace diffplan {

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

/// Planar pose with the yaw stored as the (z, w) components of a unit quaternion.
/// This is the per-waypoint layout of every trajectory: [x, y, q_z, q_w].
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double qz = 0.0;
  double qw = 1.0;

  static Pose from_yaw(double x, double y, double yaw);

  double yaw() const;
  Vec2 position() const { return {x, y}; }

  /// Rescales (qz, qw) to unit norm and canonicalizes the sign so qw >= 0
  /// (qz >= 0 when qw == 0).
  Pose normalized() const;

  bool operator==(const Pose&) const = default;
};

struct Quat2 {
  double qz;
  double qw;
};

/// q_z = sin(phi/2), q_w = cos(phi/2) with phi wrapped to (-pi, pi] first.
/// Throws kInvalidArgument for a non-finite yaw.
Quat2 yaw_to_quat(double phi);
/// 2 atan2(q_z, q_w), wrapped to (-pi, pi].
double quat_to_yaw(double qz, double qw);

/// Convex polygon, counter-clockwise. One- and two-vertex polygons are
/// allowed and behave as a point and a segment.
struct ConvexPolygon {
  std::vector<Vec2> vertices;

  static ConvexPolygon rectangle(double xmin, double ymin, double xmax, double ymax);
  static ConvexPolygon oriented_box(Vec2 center, double yaw, double length, double width);

  double area() const;
  bool contains(Vec2 p) const;
  void bounds(Vec2& lo, Vec2& hi) const;
};

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);
bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d);

/// Minimum Euclidean distance between two convex polygons; exactly 0 when they
/// touch or overlap.
double polygon_distance(const ConvexPolygon& a, const ConvexPolygon& b);

/// Lower bound on polygon_distance from axis-aligned bounding boxes.
double bbox_distance(Vec2 lo_a, Vec2 hi_a, Vec2 lo_b, Vec2 hi_b);

}  // namespace diffplan
