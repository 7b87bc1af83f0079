#pragma once

#include <cfit/chain.hpp>
#include <cfit/measurement.hpp>

#include <cstdint>
#include <vector>

namespace cfit {

/// Standard gravity used by every simulation path, navigation z-axis up.
inline const Vec3 kGravity(0.0, 0.0, -9.81);

/// theta(t) = amplitude * sin(2 pi frequency t + phase) + rate * t (rad).
struct Sinusoid {
  double amplitude = 0.0;
  double frequency = 0.0;
  double phase = 0.0;
  double rate = 0.0;
};

/// One revolute DOF. Frame transform: Rz(theta + theta_offset) Tz(d) Tx(a) Rx(alpha).
struct DhAxis {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
  Sinusoid motion;
};

/**
 * A rigid segment carrying one IMU (segment k carries IMU k).
 *
 * The joint driving the segment sits at `attach`, given in the parent segment frame
 * (world frame for the root, parent = -1). The joint's DOFs are `axes`; for non-root
 * segments the axes must all pass through the attach point (a = d = 0), which makes it
 * the shared joint center. The segment frame origin is that joint center.
 */
struct SegmentSpec {
  int parent = -1;
  Vec3 attach = Vec3::Zero();
  std::vector<DhAxis> axes;
  Vec3 imu_position = Vec3::Zero();
  Quat imu_orientation = Quat::Identity();
};

struct ManipulatorSpec {
  std::vector<SegmentSpec> segments;
  int external_imu = 0;

  ChainTopology topology() const;
  /// Throws InvalidSpec / EmptySpec.
  void validate() const;
};

/// Parameters of the default desk-scale manipulator.
struct DefaultManipulatorOptions {
  int segment_count = 3;
  double lever_arm = 0.26;
  double amplitude = 30.0 * M_PI / 180.0;
  std::vector<double> frequencies{0.2, 0.3, 0.5};
};

ManipulatorSpec defaultManipulator(const DefaultManipulatorOptions& options = {});

/// Pelvis with two three-segment legs: seven IMUs, six joints, external IMU on the pelvis.
ManipulatorSpec lowerBodyManipulator(const DefaultManipulatorOptions& options = {});

struct NoiseSpec {
  double gyro_variance = 8.25e-5;
  double accel_variance = 0.0075;
  std::uint64_t seed = 1;
};

struct SimulatedTrial {
  double rate = 0.0;
  ChainTopology topology;
  std::vector<MeasurementFrame> frames;
  // Ground truth, one entry per frame.
  std::vector<ImuPose> poses;
  std::vector<std::vector<Vec3>> angular_velocity;      // IMU frame
  std::vector<std::vector<Vec3>> angular_acceleration;  // IMU frame
  std::vector<std::vector<Vec3>> specific_force;        // noiseless accelerometer, IMU frame
  ChainGeometry geometry;

  double dt() const { return 1.0 / rate; }
  int imuCount() const { return topology.imu_count; }
};

/// True joint positions implied by the segment layout.
ChainGeometry manipulatorGeometry(const ManipulatorSpec& spec);

/// Noiseless analytic kinematics of every IMU at time t.
struct ImuKinematics {
  std::vector<Vec3> position;
  std::vector<Vec3> velocity;
  std::vector<Vec3> acceleration;  // navigation frame
  std::vector<Quat> orientation;
  std::vector<Vec3> angular_velocity;      // IMU frame
  std::vector<Vec3> angular_acceleration;  // IMU frame
};
ImuKinematics manipulatorKinematics(const ManipulatorSpec& spec, double t);

SimulatedTrial simulateManipulator(const ManipulatorSpec& spec, double duration, double rate,
                                   const NoiseSpec& noise);

/**
 * Synthesizes IMU data from a uniformly sampled pose series: angular velocity from
 * five-point central differences of the body-frame rotation vector log(q_t^{-1} q_{t+k}),
 * acceleration from five-point central differences of the positions, one-sided stencils
 * near the ends. The topology is copied into the trial.
 */
SimulatedTrial resimulateFromPoses(const std::vector<ImuPose>& poses, const ChainTopology& topology,
                                   const NoiseSpec& noise);

struct JointAccelerationSeries {
  std::vector<Vec3> first;   // seen from I_i, navigation frame
  std::vector<Vec3> second;  // seen from I_j
};

/// Gravity-including joint-center acceleration reconstructed from each adjacent IMU.
JointAccelerationSeries groundTruthJointAcceleration(const SimulatedTrial& trial, int joint);

}  // namespace cfit
