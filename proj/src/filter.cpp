#include <cfit/error.hpp>
#include <cfit/filter.hpp>

#include <chrono>
#include <cmath>
#include <random>
#include <string>

namespace cfit {

void NoiseConfig::validate() const
{
  const double all[] = {q_omega, sigma_omega, sigma_accel, sigma_orientation, p0_mrp, p0_omega, p0_joint};
  for (double v : all) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::ConfigError, "noise variances must be >= 0");
  }
  if (!(sigma_omega > 0.0 && sigma_accel > 0.0 && sigma_orientation > 0.0)) {
    throw Error(ErrorCode::ConfigError, "measurement variances must be > 0");
  }
}

void SolverConfig::validate() const
{
  if (max_iterations < 1) throw Error(ErrorCode::ConfigError, "max_iterations must be >= 1");
  if (!(step_tolerance > 0.0) || !(fd_step > 0.0)) {
    throw Error(ErrorCode::ConfigError, "solver tolerances must be > 0");
  }
}

FilterState initState(const ChainTopology& topo, const NoiseConfig& noise, const std::vector<Vec3>& init_mrps,
                      const JointInit& joints)
{
  validateTopology(topo);
  if (static_cast<int>(init_mrps.size()) != topo.imu_count) {
    throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(topo.imu_count) +
                                                  " initial orientations, got " + std::to_string(init_mrps.size()));
  }
  const int joint_count = static_cast<int>(topo.joints.size());
  if (joints.explicit_positions && static_cast<int>(joints.explicit_positions->joint_positions.size()) != joint_count) {
    throw Error(ErrorCode::DimensionMismatch, "explicit joint positions do not match the joint count");
  }

  FilterState s;
  s.layout = StateLayout(topo);
  s.mean = Eigen::VectorXd::Zero(s.layout.dim());
  s.covariance = Eigen::MatrixXd::Zero(s.layout.dim(), s.layout.dim());
  for (int i = 0; i < topo.imu_count; ++i) {
    s.mean.segment<3>(s.layout.orientation(i)) = mrpNormalize(init_mrps[i]);
    s.covariance.diagonal().segment<3>(s.layout.orientation(i)).setConstant(noise.p0_mrp);
    s.covariance.diagonal().segment<3>(s.layout.angularVelocity(i)).setConstant(noise.p0_omega);
  }

  std::mt19937_64 engine(joints.seed);
  std::uniform_real_distribution<double> uniform(-joints.range, joints.range);
  for (int k = 0; k < joint_count; ++k) {
    for (JointSide side : {JointSide::First, JointSide::Second}) {
      Vec3 value;
      if (joints.explicit_positions) {
        value = joints.explicit_positions->at(k, side);
      } else {
        for (int a = 0; a < 3; ++a) value[a] = uniform(engine);
      }
      s.mean.segment<3>(s.layout.jointPosition(k, side)) = value;
      s.covariance.diagonal().segment<3>(s.layout.jointPosition(k, side)).setConstant(noise.p0_joint);
    }
  }
  return s;
}

FilterState predict(const FilterState& state, double dt, const NoiseConfig& noise)
{
  if (!(dt > 0.0)) throw Error(ErrorCode::NonPositiveDt, "dt must be > 0");
  const StateLayout& L = state.layout;
  FilterState out = state;
  Eigen::MatrixXd F = Eigen::MatrixXd::Identity(L.dim(), L.dim());
  for (int i = 0; i < L.imuCount(); ++i) {
    const int o = L.orientation(i);
    const int w = L.angularVelocity(i);
    const Vec3 omega = state.mean.segment<3>(w);
    const Quat increment = quatExp(0.5 * dt * omega);
    const Quat q = quatMultiply(quatFromMrp(Vec3(state.mean.segment<3>(o))), increment);
    out.mean.segment<3>(o) = mrpFromQuat(q);
    // Local MRP error is conjugated by the increment; an angular velocity error enters
    // through the right Jacobian of the increment (rotation vector ~ 4 * MRP).
    F.block<3, 3>(o, o) = rotationMatrix(increment).transpose();
    F.block<3, 3>(o, w) = 0.25 * dt * rightJacobian(Vec3(dt * omega));
  }
  out.covariance = F * state.covariance * F.transpose();
  for (int i = 0; i < L.imuCount(); ++i) {
    out.covariance.diagonal().segment<3>(L.angularVelocity(i)).array() += noise.q_omega;
  }
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  out.step = state.step + 1;
  return out;
}

Vec3 angularAccelerationEstimate(const Vec3& gyro, const Vec3& previous_omega, double dt)
{
  if (!(dt > 0.0)) throw Error(ErrorCode::NonPositiveDt, "dt must be > 0");
  return (gyro - previous_omega) / dt;
}

Eigen::VectorXd retract(const StateLayout& layout, const Eigen::VectorXd& mean, const Eigen::VectorXd& delta)
{
  Eigen::VectorXd out = mean + delta;
  for (int i = 0; i < layout.imuCount(); ++i) {
    const int o = layout.orientation(i);
    const Quat q = quatMultiply(quatFromMrp(Vec3(mean.segment<3>(o))), quatFromMrp(Vec3(delta.segment<3>(o))));
    out.segment<3>(o) = mrpFromQuat(q);
  }
  return out;
}

Eigen::VectorXd localDifference(const StateLayout& layout, const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
  Eigen::VectorXd out = a - b;
  for (int i = 0; i < layout.imuCount(); ++i) {
    const int o = layout.orientation(i);
    const Quat qa = quatFromMrp(Vec3(a.segment<3>(o)));
    const Quat qb = quatFromMrp(Vec3(b.segment<3>(o)));
    out.segment<3>(o) = mrpFromQuat(quatMultiply(qb.conjugate(), qa));
  }
  return out;
}

MeasurementModel::MeasurementModel(ChainTopology topology, NoiseConfig noise)
    : topo_(std::move(topology)), noise_(noise), layout_(topo_)
{
}

namespace {

Mat3 lumpedRotationMatrix(const Vec3& omega, const Vec3& omega_dot)
{
  const Mat3 W = crossMatrix(omega);
  return W * W + crossMatrix(omega_dot);
}

// d/d omega of omega x (omega x J).
Mat3 centripetalJacobian(const Vec3& omega, const Vec3& lever)
{
  return omega.dot(lever) * Mat3::Identity() + omega * lever.transpose() - 2.0 * lever * omega.transpose();
}

}  // namespace

Eigen::VectorXd MeasurementModel::residual(const Eigen::VectorXd& mean, const MeasurementFrame& frame,
                                           const std::vector<Vec3>& angular_accel) const
{
  Eigen::VectorXd r(rows());
  const int n = topo_.imu_count;
  for (int i = 0; i < n; ++i) {
    r.segment<3>(3 * i) = frame.gyro[i] - mean.segment<3>(layout_.angularVelocity(i));
  }
  // Joint-center acceleration seen from one side, navigation frame.
  auto joint_accel = [&](int imu, int joint, JointSide side) {
    const Vec3 omega = mean.segment<3>(layout_.angularVelocity(imu));
    const Vec3 lever = mean.segment<3>(layout_.jointPosition(joint, side));
    const Mat3 R = rotationFromMrp(Vec3(mean.segment<3>(layout_.orientation(imu))));
    return Vec3(R * (frame.accel[imu] + lumpedRotationMatrix(omega, angular_accel[imu]) * lever));
  };
  for (int k = 0; k < static_cast<int>(topo_.joints.size()); ++k) {
    const Joint& j = topo_.joints[k];
    r.segment<3>(jointRow(k)) =
        joint_accel(j.first, k, JointSide::First) - joint_accel(j.second, k, JointSide::Second);
  }
  const Quat q_e = quatFromMrp(Vec3(mean.segment<3>(layout_.orientation(topo_.external_imu))));
  r.segment<3>(orientationRow()) = rotationVectorFromQuat(quatMultiply(q_e.conjugate(), frame.orientation));
  return r;
}

Eigen::VectorXd MeasurementModel::whitening() const
{
  Eigen::VectorXd w(rows());
  const int n = topo_.imu_count;
  w.head(3 * n).setConstant(1.0 / std::sqrt(noise_.sigma_omega));
  w.segment(3 * n, 3 * static_cast<int>(topo_.joints.size())).setConstant(1.0 / std::sqrt(noise_.sigma_accel));
  w.tail<3>().setConstant(1.0 / std::sqrt(noise_.sigma_orientation));
  return w;
}

Eigen::MatrixXd MeasurementModel::analyticJacobian(const Eigen::VectorXd& mean, const MeasurementFrame& frame,
                                                   const std::vector<Vec3>& angular_accel) const
{
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(rows(), layout_.dim());
  const int n = topo_.imu_count;
  for (int i = 0; i < n; ++i) {
    J.block<3, 3>(3 * i, layout_.angularVelocity(i)) = -Mat3::Identity();
  }
  for (int k = 0; k < static_cast<int>(topo_.joints.size()); ++k) {
    const Joint& jt = topo_.joints[k];
    const int row = jointRow(k);
    for (JointSide side : {JointSide::First, JointSide::Second}) {
      const int imu = side == JointSide::First ? jt.first : jt.second;
      const double sign = side == JointSide::First ? 1.0 : -1.0;
      const Vec3 omega = mean.segment<3>(layout_.angularVelocity(imu));
      const Vec3 lever = mean.segment<3>(layout_.jointPosition(k, side));
      const Mat3 R = rotationFromMrp(Vec3(mean.segment<3>(layout_.orientation(imu))));
      const Mat3 C = lumpedRotationMatrix(omega, angular_accel[imu]);
      const Vec3 local = frame.accel[imu] + C * lever;
      // R(q * q(d)) v ~= R (v + 4 d x v)
      J.block<3, 3>(row, layout_.orientation(imu)) += sign * -4.0 * R * crossMatrix(local);
      J.block<3, 3>(row, layout_.angularVelocity(imu)) += sign * R * centripetalJacobian(omega, lever);
      J.block<3, 3>(row, layout_.jointPosition(k, side)) = sign * R * C;
    }
  }
  const int e = topo_.external_imu;
  const Quat q_e = quatFromMrp(Vec3(mean.segment<3>(layout_.orientation(e))));
  const Vec3 phi = rotationVectorFromQuat(quatMultiply(q_e.conjugate(), frame.orientation));
  J.block<3, 3>(orientationRow(), layout_.orientation(e)) = -4.0 * leftJacobianInverse(phi);
  return J;
}

MeasurementModel::Linearization MeasurementModel::linearize(const Eigen::VectorXd& mean,
                                                            const MeasurementFrame& frame,
                                                            const std::vector<Vec3>& angular_accel,
                                                            JacobianMode mode, double fd_step) const
{
  Linearization lin;
  const Eigen::VectorXd w = whitening();
  lin.residual = w.asDiagonal() * residual(mean, frame, angular_accel);
  if (mode == JacobianMode::Analytic) {
    lin.jacobian = w.asDiagonal() * analyticJacobian(mean, frame, angular_accel);
  } else {
    lin.jacobian.resize(rows(), layout_.dim());
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(layout_.dim());
    for (int c = 0; c < layout_.dim(); ++c) {
      delta[c] = fd_step;
      const Eigen::VectorXd plus = residual(retract(layout_, mean, delta), frame, angular_accel);
      delta[c] = -fd_step;
      const Eigen::VectorXd minus = residual(retract(layout_, mean, delta), frame, angular_accel);
      delta[c] = 0.0;
      lin.jacobian.col(c) = w.asDiagonal() * ((plus - minus) / (2.0 * fd_step));
    }
  }
  return lin;
}

namespace {

struct NormalEquations {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double cost = 0.0;
};

NormalEquations buildNormalEquations(const MeasurementModel& model, const Eigen::VectorXd& mean,
                                     const FilterState& predicted, const Eigen::MatrixXd& prior_information,
                                     const MeasurementFrame& frame, const std::vector<Vec3>& angular_accel,
                                     const SolverConfig& solver)
{
  const StateLayout& L = predicted.layout;
  const Eigen::VectorXd e = localDifference(L, mean, predicted.mean);
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(L.dim(), L.dim());
  for (int i = 0; i < L.imuCount(); ++i) {
    const int o = L.orientation(i);
    A.block<3, 3>(o, o) = mrpRightComposeJacobian(Vec3(e.segment<3>(o)));
  }
  const auto lin = model.linearize(mean, frame, angular_accel, solver.jacobian, solver.fd_step);
  const Eigen::MatrixXd AtI = A.transpose() * prior_information;

  NormalEquations ne;
  ne.H = AtI * A;
  ne.H.noalias() += lin.jacobian.transpose() * lin.jacobian;
  ne.g = AtI * e;
  ne.g.noalias() += lin.jacobian.transpose() * lin.residual;
  ne.cost = 0.5 * e.dot(prior_information * e) + 0.5 * lin.residual.squaredNorm();
  return ne;
}

Eigen::MatrixXd invertSpd(const Eigen::MatrixXd& M, const char* what)
{
  constexpr double kRegularization = 1e-12;
  const Eigen::MatrixXd reg = M + kRegularization * Eigen::MatrixXd::Identity(M.rows(), M.cols());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any()) {
    throw Error(ErrorCode::SingularNormalEquations, what);
  }
  Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(M.rows(), M.cols()));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

UpdateResult mapUpdate(const ChainTopology& topo, const FilterState& predicted, const MeasurementFrame& frame,
                       const std::vector<Vec3>& angular_accel, const NoiseConfig& noise,
                       const SolverConfig& solver)
{
  const MeasurementModel model(topo, noise);
  const Eigen::MatrixXd prior_information = invertSpd(predicted.covariance, "predicted covariance");

  UpdateResult result;
  result.state = predicted;
  Eigen::VectorXd mean = predicted.mean;
  NormalEquations ne = buildNormalEquations(model, mean, predicted, prior_information, frame, angular_accel, solver);
  for (int it = 0; it < solver.max_iterations; ++it) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ne.H + 1e-12 * Eigen::MatrixXd::Identity(ne.H.rows(), ne.H.cols()));
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw Error(ErrorCode::SingularNormalEquations, "normal equations at iteration " + std::to_string(it));
    }
    const Eigen::VectorXd step = -ldlt.solve(ne.g);
    if (!step.allFinite()) {
      throw Error(ErrorCode::SingularNormalEquations, "non-finite step at iteration " + std::to_string(it));
    }
    mean = retract(predicted.layout, mean, step);
    ne = buildNormalEquations(model, mean, predicted, prior_information, frame, angular_accel, solver);
    result.iterations = it + 1;
    if (step.norm() < solver.step_tolerance && ne.g.norm() < solver.step_tolerance) {
      result.converged = true;
      break;
    }
  }
  result.state.mean = mean;
  result.state.covariance = invertSpd(ne.H, "posterior normal equations");
  result.cost = ne.cost;
  result.gradient_norm = ne.g.norm();
  return result;
}

ChainFilter::ChainFilter(ChainTopology topology, NoiseConfig noise, SolverConfig solver, FilterState initial)
    : topo_(std::move(topology)), noise_(noise), solver_(solver), state_(std::move(initial))
{
  validateTopology(topo_);
  noise_.validate();
  solver_.validate();
  if (state_.layout.dim() != StateLayout(topo_).dim() || state_.mean.size() != state_.layout.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "initial state does not match the topology");
  }
}

const UpdateResult& ChainFilter::step(const MeasurementFrame& frame)
{
  const int n = topo_.imu_count;
  if (static_cast<int>(frame.gyro.size()) != n || static_cast<int>(frame.accel.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "frame at t=" + std::to_string(frame.t) + " has wrong IMU count");
  }
  std::vector<Vec3> angular_accel(n, Vec3::Zero());
  FilterState prior = state_;
  if (last_t_) {
    const double dt = frame.t - *last_t_;
    for (int i = 0; i < n; ++i) {
      angular_accel[i] = angularAccelerationEstimate(frame.gyro[i], state_.angularVelocity(i), dt);
    }
    prior = predict(state_, dt, noise_);
  }
  last_ = mapUpdate(topo_, prior, frame, angular_accel, noise_, solver_);
  if (!last_.converged) ++nonconverged_;
  state_ = last_.state;
  last_t_ = frame.t;
  return last_;
}

FilterRun runFilter(const std::vector<MeasurementFrame>& frames, const ChainTopology& topo,
                    const NoiseConfig& noise, const SolverConfig& solver, const FilterState& initial)
{
  if (frames.size() >= 2) {
    const double dt = frames[1].t - frames[0].t;
    for (std::size_t s = 1; s < frames.size(); ++s) {
      if (!(frames[s].t - frames[s - 1].t > 0.0) || std::abs((frames[s].t - frames[s - 1].t) - dt) > 1e-9) {
        throw Error(ErrorCode::NonUniformSampling, "frame " + std::to_string(s) + " breaks the sampling interval");
      }
    }
  }
  ChainFilter filter(topo, noise, solver, initial);
  FilterRun run;
  run.means.reserve(frames.size());
  run.step_seconds.reserve(frames.size());
  for (std::size_t s = 0; s < frames.size(); ++s) {
    const auto start = std::chrono::steady_clock::now();
    try {
      filter.step(frames[s]);
    } catch (const Error& e) {
      throw Error(e.code(), "timestep " + std::to_string(s) + ": " + e.what());
    }
    const auto stop = std::chrono::steady_clock::now();
    run.step_seconds.push_back(std::chrono::duration<double>(stop - start).count());
    run.means.push_back(filter.state().mean);
  }
  run.nonconverged_steps = filter.nonConvergedSteps();
  run.final_state = filter.state();
  return run;
}

}  // namespace cfit
