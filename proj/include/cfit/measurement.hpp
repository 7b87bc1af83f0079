#pragma once

#include <cfit/so3.hpp>

#include <vector>

namespace cfit {

/// Synchronized samples of all IMUs at one timestep plus the external orientation of I_e.
struct MeasurementFrame {
  double t = 0.0;
  std::vector<Vec3> accel;  // specific force, IMU frame (m/s^2)
  std::vector<Vec3> gyro;   // angular velocity, IMU frame (rad/s)
  Quat orientation = Quat::Identity();  // y_R = q^{NI_e}
};

}  // namespace cfit
