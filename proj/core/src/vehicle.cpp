#include "diffplan/vehicle.hpp"

#include <algorithm>
#include <cmath>

#include "diffplan/error.hpp"

namespace diffplan {

void VehicleParams::validate() const {
  if (!(wheelbase > 0.0 && width >= 0.0 && length >= 0.0 && max_yaw_rate > 0.0))
    throw_invalid("vehicle dimensions must be positive");
  if (!(v_min < v_max && delta_max > 0.0 && a_max > 0.0))
    throw_invalid("vehicle bounds must satisfy min < max");
}

VehicleState vehicle_derivative(const VehicleState& s, const Control& u, const VehicleParams& params) {
  return {s.v * std::cos(s.phi), s.v * std::sin(s.phi), s.v * std::tan(u.delta) / params.wheelbase, u.a};
}

Control clamp_control(const Control& u, const VehicleParams& params) {
  return {std::clamp(u.delta, -params.delta_max, params.delta_max), std::clamp(u.a, -params.a_max, params.a_max)};
}

VehicleState kinematic_step(const VehicleState& s, const Control& u_in, double ts, const VehicleParams& params) {
  if (!(ts > 0.0)) throw_invalid("kinematic_step: T_s must be positive");
  const Control u = clamp_control(u_in, params);
  const VehicleState k1 = vehicle_derivative(s, u, params);
  const VehicleState mid{s.x + ts * k1.x, s.y + ts * k1.y, s.phi + ts * k1.phi, s.v + ts * k1.v};
  const VehicleState k2 = vehicle_derivative(mid, u, params);
  VehicleState out;
  out.x = s.x + 0.5 * ts * (k1.x + k2.x);
  out.y = s.y + 0.5 * ts * (k1.y + k2.y);
  out.phi = wrap_angle(s.phi + 0.5 * ts * (k1.phi + k2.phi));
  out.v = std::clamp(s.v + 0.5 * ts * (k1.v + k2.v), params.v_min, params.v_max);
  return out;
}

std::array<Vec2, 4> footprint_vertices(const Pose& pose, const VehicleParams& params) {
  const ConvexPolygon box = ConvexPolygon::oriented_box(pose.position(), pose.yaw(), params.length, params.width);
  return {box.vertices[0], box.vertices[1], box.vertices[2], box.vertices[3]};
}

ConvexPolygon footprint_polygon(const Pose& pose, const VehicleParams& params) {
  if (params.length == 0.0 && params.width == 0.0) return {{pose.position()}};
  return ConvexPolygon::oriented_box(pose.position(), pose.yaw(), params.length, params.width);
}

}  // namespace diffplan
