#pragma once

#include <array>

#include "diffplan/geometry.hpp"

namespace diffplan {

/// Bicycle-model state [x, y, phi, v].
struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
  double v = 0.0;

  Pose pose() const { return Pose::from_yaw(x, y, phi); }
  Vec2 position() const { return {x, y}; }
};

/// Steering angle and longitudinal acceleration.
struct Control {
  double delta = 0.0;
  double a = 0.0;
};

/// F1TENTH-class defaults.
struct VehicleParams {
  double wheelbase = 0.33;
  double width = 0.28;
  double length = 0.5;
  double max_yaw_rate = 3.2;

  double v_min = -1.0;
  double v_max = 1.0;
  double delta_max = 0.5;
  double a_max = 1.0;

  /// Throws kInvalidArgument unless every dimension is positive and bounds are ordered.
  void validate() const;
};

/// f(zeta, u) = [v cos phi, v sin phi, v tan(delta) / l_w, a].
VehicleState vehicle_derivative(const VehicleState& s, const Control& u, const VehicleParams& params);

Control clamp_control(const Control& u, const VehicleParams& params);

/// One explicit Heun (improved Euler) step of the kinematic bicycle model.
/// The control is clamped to its box, v to [v_min, v_max] and phi wrapped.
VehicleState kinematic_step(const VehicleState& s, const Control& u, double ts, const VehicleParams& params);

/// Corners of the length x width rectangle centered on the pose, CCW.
std::array<Vec2, 4> footprint_vertices(const Pose& pose, const VehicleParams& params);
ConvexPolygon footprint_polygon(const Pose& pose, const VehicleParams& params);

}  // namespace diffplan
