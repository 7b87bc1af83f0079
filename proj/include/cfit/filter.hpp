#pragma once

#include <cfit/chain.hpp>
#include <cfit/measurement.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace cfit {

/// Isotropic variances (each multiplies a 3x3 identity).
struct NoiseConfig {
  double q_omega = 1e-8;            // process noise on angular velocity, per step
  double sigma_omega = 1e-3;        // gyroscope residual
  double sigma_accel = 1e-1;        // joint-acceleration residual
  double sigma_orientation = 1e-3;  // external orientation residual (rad^2)
  double p0_mrp = 1e-6;
  double p0_omega = 1e-1;
  double p0_joint = 1e-4;

  void validate() const;
  bool operator==(const NoiseConfig&) const = default;
};

enum class JacobianMode { Analytic, FiniteDifference };

struct SolverConfig {
  int max_iterations = 10;
  double step_tolerance = 1e-8;
  JacobianMode jacobian = JacobianMode::Analytic;
  double fd_step = 1e-6;

  void validate() const;
  bool operator==(const SolverConfig&) const = default;
};

/**
 * Posterior (or predicted) filter state.
 *
 * `mean` stacks global MRPs, angular velocities and IMU-centered joint positions in
 * StateLayout order. `covariance` is expressed in local coordinates: the orientation
 * blocks describe a right-multiplicative MRP error, q = q(mean) * q(delta).
 */
struct FilterState {
  StateLayout layout;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  long step = 0;

  Vec3 mrp(int imu) const { return mean.segment<3>(layout.orientation(imu)); }
  Quat orientation(int imu) const { return quatFromMrp(mrp(imu)); }
  Vec3 angularVelocity(int imu) const { return mean.segment<3>(layout.angularVelocity(imu)); }
  Vec3 jointPosition(int joint, JointSide side) const
  {
    return mean.segment<3>(layout.jointPosition(joint, side));
  }
};

/// Joint-position initialization: explicit geometry, or uniform in [-range, range] per axis.
struct JointInit {
  std::optional<ChainGeometry> explicit_positions;
  std::uint64_t seed = 0;
  double range = 0.3;
};

FilterState initState(const ChainTopology& topo, const NoiseConfig& noise, const std::vector<Vec3>& init_mrps,
                      const JointInit& joints);

/// Constant angular velocity time update; process noise only on the angular velocities.
FilterState predict(const FilterState& state, double dt, const NoiseConfig& noise);

/// Backward difference of the raw gyro sample at t against the filtered rate at t-1.
Vec3 angularAccelerationEstimate(const Vec3& gyro, const Vec3& previous_omega, double dt);

/// Composes a local perturbation onto a state mean (MRP blocks multiplicatively).
Eigen::VectorXd retract(const StateLayout& layout, const Eigen::VectorXd& mean, const Eigen::VectorXd& delta);

/// Local difference a - b, the inverse of retract(b, .).
Eigen::VectorXd localDifference(const StateLayout& layout, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/**
 * Stacked measurement residuals: gyroscope (3 per IMU), joint acceleration (3 per
 * joint) and external orientation (3). Rows are whitened by the inverse standard
 * deviations; the Jacobian is taken with respect to the local perturbation of retract().
 */
class MeasurementModel {
 public:
  MeasurementModel(ChainTopology topology, NoiseConfig noise);

  int rows() const { return 3 * topo_.imu_count + 3 * static_cast<int>(topo_.joints.size()) + 3; }
  const StateLayout& layout() const { return layout_; }

  /// Unweighted residual vector.
  Eigen::VectorXd residual(const Eigen::VectorXd& mean, const MeasurementFrame& frame,
                           const std::vector<Vec3>& angular_accel) const;

  /// Row weights 1 / sigma.
  Eigen::VectorXd whitening() const;

  struct Linearization {
    Eigen::VectorXd residual;  // whitened
    Eigen::MatrixXd jacobian;  // whitened
  };

  Linearization linearize(const Eigen::VectorXd& mean, const MeasurementFrame& frame,
                          const std::vector<Vec3>& angular_accel, JacobianMode mode = JacobianMode::Analytic,
                          double fd_step = 1e-6) const;

  int jointRow(int joint) const { return 3 * topo_.imu_count + 3 * joint; }
  int orientationRow() const { return rows() - 3; }

 private:
  Eigen::MatrixXd analyticJacobian(const Eigen::VectorXd& mean, const MeasurementFrame& frame,
                                   const std::vector<Vec3>& angular_accel) const;

  ChainTopology topo_;
  NoiseConfig noise_;
  StateLayout layout_;
};

struct UpdateResult {
  FilterState state;
  int iterations = 0;
  bool converged = false;
  double cost = 0.0;
  double gradient_norm = 0.0;
};

/**
 * Gauss-Newton solution of the per-step MAP problem
 *   min 1/2 |X (-) X_pred|^2_{P^-1} + 1/2 sum |r(X)|^2_{Sigma^-1}
 * starting at the predicted mean. The posterior covariance is the inverse of the
 * normal-equations matrix at the returned iterate.
 */
UpdateResult mapUpdate(const ChainTopology& topo, const FilterState& predicted, const MeasurementFrame& frame,
                       const std::vector<Vec3>& angular_accel, const NoiseConfig& noise,
                       const SolverConfig& solver);

/// Stateful recursive filter: angular-acceleration input, predict, MAP update per frame.
class ChainFilter {
 public:
  ChainFilter(ChainTopology topology, NoiseConfig noise, SolverConfig solver, FilterState initial);

  /// Processes one frame. The first frame is an update on the initial state without a
  /// time update and with zero angular acceleration.
  const UpdateResult& step(const MeasurementFrame& frame);

  const FilterState& state() const { return state_; }
  long nonConvergedSteps() const { return nonconverged_; }

 private:
  ChainTopology topo_;
  NoiseConfig noise_;
  SolverConfig solver_;
  FilterState state_;
  UpdateResult last_;
  std::optional<double> last_t_;
  long nonconverged_ = 0;
};

struct FilterRun {
  std::vector<Eigen::VectorXd> means;
  std::vector<double> step_seconds;
  long nonconverged_steps = 0;
  FilterState final_state;
};

FilterRun runFilter(const std::vector<MeasurementFrame>& frames, const ChainTopology& topo,
                    const NoiseConfig& noise, const SolverConfig& solver, const FilterState& initial);

}  // namespace cfit
