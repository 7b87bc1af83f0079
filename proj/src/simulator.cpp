#include <cfit/error.hpp>
#include <cfit/simulator.hpp>

#include <cmath>
#include <random>
#include <string>

namespace cfit {

namespace {

// World-frame kinematic state of a moving frame origin.
struct FrameKinematics {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 w = Vec3::Zero();   // angular velocity, world
  Vec3 dw = Vec3::Zero();  // angular acceleration, world

  // Kinematics of a point rigidly attached at body offset r (world-frame vector).
  void transport(const Vec3& r, Vec3& p_out, Vec3& v_out, Vec3& a_out) const
  {
    p_out = p + r;
    v_out = v + w.cross(r);
    a_out = a + dw.cross(r) + w.cross(w.cross(r));
  }
};

Mat3 rotZ(double angle)
{
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

Mat3 rotX(double angle)
{
  return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix();
}

void applyAxis(FrameKinematics& k, const DhAxis& axis, double t)
{
  const Sinusoid& s = axis.motion;
  const double omega = 2.0 * M_PI * s.frequency;
  const double arg = omega * t + s.phase;
  const double theta = axis.theta_offset + s.amplitude * std::sin(arg) + s.rate * t;
  const double theta_dot = s.amplitude * omega * std::cos(arg) + s.rate;
  const double theta_ddot = -s.amplitude * omega * omega * std::sin(arg);

  const Vec3 z = k.R.col(2);
  const Vec3 w_rel = theta_dot * z;
  k.dw += theta_ddot * z + k.w.cross(w_rel);
  k.w += w_rel;

  const Mat3 R_joint = k.R * rotZ(theta);
  const Vec3 r = R_joint * Vec3(axis.a, 0.0, axis.d);
  Vec3 p, v, a;
  k.transport(r, p, v, a);
  k.p = p;
  k.v = v;
  k.a = a;
  k.R = R_joint * rotX(axis.alpha);
}

std::vector<FrameKinematics> segmentKinematics(const ManipulatorSpec& spec, double t)
{
  std::vector<FrameKinematics> seg(spec.segments.size());
  for (std::size_t k = 0; k < spec.segments.size(); ++k) {
    const SegmentSpec& s = spec.segments[k];
    FrameKinematics f;
    if (s.parent < 0) {
      f.p = s.attach;
    } else {
      f = seg[s.parent];
      Vec3 p, v, a;
      f.transport(f.R * s.attach, p, v, a);
      f.p = p;
      f.v = v;
      f.a = a;
    }
    for (const DhAxis& axis : s.axes) {
      applyAxis(f, axis, t);
    }
    seg[k] = f;
  }
  return seg;
}

void requireFinite(const Vec3& v, const std::string& what)
{
  if (!v.allFinite()) throw Error(ErrorCode::InvalidSpec, what + " is not finite");
}

}  // namespace

ChainTopology ManipulatorSpec::topology() const
{
  ChainTopology topo;
  topo.imu_count = static_cast<int>(segments.size());
  topo.external_imu = external_imu;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (segments[k].parent >= 0) topo.joints.push_back({segments[k].parent, static_cast<int>(k)});
  }
  return topo;
}

void ManipulatorSpec::validate() const
{
  if (segments.empty()) throw Error(ErrorCode::EmptySpec, "manipulator has no segments");
  int roots = 0;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const SegmentSpec& s = segments[k];
    const std::string name = "segment " + std::to_string(k);
    if (s.parent >= static_cast<int>(k)) {
      throw Error(ErrorCode::InvalidSpec, name + ": parent must precede the segment");
    }
    if (s.parent < 0) ++roots;
    requireFinite(s.attach, name + " attach");
    requireFinite(s.imu_position, name + " imu_position");
    if (std::abs(s.imu_orientation.norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::InvalidSpec, name + ": imu_orientation is not a unit quaternion");
    }
    std::vector<double> freqs;
    for (const DhAxis& axis : s.axes) {
      const Sinusoid& m = axis.motion;
      if (!(m.amplitude >= 0.0 && m.amplitude < M_PI)) {
        throw Error(ErrorCode::InvalidSpec, name + ": amplitude outside [0, pi)");
      }
      if (m.amplitude > 0.0) {
        if (!(m.frequency > 0.0)) throw Error(ErrorCode::InvalidSpec, name + ": frequency must be > 0");
        for (double f : freqs) {
          if (f == m.frequency) {
            throw Error(ErrorCode::InvalidSpec, name + ": DOF frequencies must be distinct");
          }
        }
        freqs.push_back(m.frequency);
      }
      if (s.parent >= 0 && (axis.a != 0.0 || axis.d != 0.0)) {
        throw Error(ErrorCode::InvalidSpec, name + ": joint axes must intersect (a = d = 0)");
      }
    }
  }
  if (roots != 1) throw Error(ErrorCode::InvalidSpec, "manipulator needs exactly one root segment");
  validateTopology(topology());
}

namespace {

// Spherical joint from three intersecting DH axes; the middle offset keeps the axes
// mutually orthogonal around the rest pose.
std::vector<DhAxis> sphericalJoint(const DefaultManipulatorOptions& o, double phase = 0.0)
{
  std::vector<DhAxis> axes(3);
  axes[0].alpha = -M_PI / 2.0;
  axes[1].alpha = M_PI / 2.0;
  axes[1].theta_offset = M_PI / 2.0;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    axes[i].motion.amplitude = o.amplitude;
    axes[i].motion.frequency = o.frequencies.at(i % o.frequencies.size());
    axes[i].motion.phase = phase;
  }
  return axes;
}

Quat mountRotation(const Vec3& rotation_vector)
{
  return quatFromRotationVector(rotation_vector);
}

}  // namespace

ManipulatorSpec defaultManipulator(const DefaultManipulatorOptions& o)
{
  // Segments extend along their z-axis; each IMU sits half-way with a small offset, so
  // both lever arms are about `lever_arm` long.
  const double length = 2.0 * o.lever_arm;
  const std::vector<Vec3> mounts{Vec3(0.3, -0.2, 0.5), Vec3(-0.4, 0.1, 0.2), Vec3(0.2, 0.5, -0.3),
                                 Vec3(-0.1, -0.3, 0.4)};
  ManipulatorSpec spec;
  for (int k = 0; k < o.segment_count; ++k) {
    SegmentSpec s;
    s.parent = k - 1;
    s.attach = k == 0 ? Vec3::Zero() : Vec3(0.0, 0.0, length);
    s.axes = sphericalJoint(o);
    s.imu_position = Vec3(0.03, 0.0, o.lever_arm);
    s.imu_orientation = mountRotation(mounts[k % mounts.size()]);
    spec.segments.push_back(s);
  }
  spec.external_imu = 0;
  return spec;
}

ManipulatorSpec lowerBodyManipulator(const DefaultManipulatorOptions& o)
{
  ManipulatorSpec spec;
  SegmentSpec pelvis;
  pelvis.axes = sphericalJoint(o);
  for (auto& axis : pelvis.axes) axis.motion.amplitude *= 0.5;
  pelvis.imu_position = Vec3(0.0, -0.08, 0.0);
  pelvis.imu_orientation = mountRotation(Vec3(0.1, 0.2, -0.1));
  spec.segments.push_back(pelvis);

  const double lengths[3] = {0.42, 0.40, 0.15};
  const double imu_offsets[3] = {0.21, 0.20, 0.09};
  for (int leg = 0; leg < 2; ++leg) {
    const double side = leg == 0 ? 1.0 : -1.0;
    for (int k = 0; k < 3; ++k) {
      SegmentSpec s;
      s.parent = k == 0 ? 0 : static_cast<int>(spec.segments.size()) - 1;
      s.attach = k == 0 ? Vec3(0.0, side * 0.1, 0.0) : Vec3(0.0, 0.0, lengths[k - 1]);
      // Phase-shift the legs against each other.
      s.axes = sphericalJoint(o, leg == 0 ? 0.0 : M_PI);
      s.imu_position = Vec3(0.02 * side, 0.03, imu_offsets[k]);
      s.imu_orientation = mountRotation(Vec3(0.2 * side, -0.3 + 0.2 * k, 0.4 * side));
      spec.segments.push_back(s);
    }
  }
  spec.external_imu = 0;
  return spec;
}

ChainGeometry manipulatorGeometry(const ManipulatorSpec& spec)
{
  ChainGeometry g;
  for (std::size_t k = 0; k < spec.segments.size(); ++k) {
    const SegmentSpec& child = spec.segments[k];
    if (child.parent < 0) continue;
    const SegmentSpec& parent = spec.segments[child.parent];
    const Vec3 in_parent = parent.imu_orientation.conjugate() * (child.attach - parent.imu_position);
    const Vec3 in_child = child.imu_orientation.conjugate() * (-child.imu_position);
    g.joint_positions.emplace_back(in_parent, in_child);
  }
  return g;
}

ImuKinematics manipulatorKinematics(const ManipulatorSpec& spec, double t)
{
  const std::vector<FrameKinematics> seg = segmentKinematics(spec, t);
  ImuKinematics out;
  for (std::size_t k = 0; k < seg.size(); ++k) {
    const SegmentSpec& s = spec.segments[k];
    const FrameKinematics& f = seg[k];
    Vec3 p, v, a;
    f.transport(f.R * s.imu_position, p, v, a);
    const Mat3 R_imu = f.R * s.imu_orientation.toRotationMatrix();
    out.position.push_back(p);
    out.velocity.push_back(v);
    out.acceleration.push_back(a);
    out.orientation.push_back(canonicalize(Quat(R_imu).normalized()));
    out.angular_velocity.push_back(R_imu.transpose() * f.w);
    out.angular_acceleration.push_back(R_imu.transpose() * f.dw);
  }
  return out;
}

namespace {

class NoiseSource {
 public:
  explicit NoiseSource(const NoiseSpec& spec)
      : engine_(spec.seed), gyro_sd_(std::sqrt(spec.gyro_variance)), accel_sd_(std::sqrt(spec.accel_variance))
  {
    if (!(spec.gyro_variance >= 0.0) || !(spec.accel_variance >= 0.0)) {
      throw Error(ErrorCode::InvalidSpec, "noise variances must be >= 0");
    }
  }

  Vec3 gyro() { return draw(gyro_sd_); }
  Vec3 accel() { return draw(accel_sd_); }

 private:
  Vec3 draw(double sd)
  {
    Vec3 n;
    for (int i = 0; i < 3; ++i) n[i] = sd * normal_(engine_);
    return n;
  }

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  double gyro_sd_;
  double accel_sd_;
};

// Builds frames from noiseless truth; noise drawn per step, per IMU: gyro xyz, accel xyz.
void synthesizeFrames(SimulatedTrial& trial, const NoiseSpec& noise)
{
  NoiseSource source(noise);
  const int n = trial.imuCount();
  trial.frames.resize(trial.poses.size());
  for (std::size_t s = 0; s < trial.poses.size(); ++s) {
    MeasurementFrame& f = trial.frames[s];
    f.t = trial.poses[s].t;
    f.accel.resize(n);
    f.gyro.resize(n);
    for (int i = 0; i < n; ++i) {
      f.gyro[i] = trial.angular_velocity[s][i] + source.gyro();
      f.accel[i] = trial.specific_force[s][i] + source.accel();
    }
    f.orientation = trial.poses[s].orientation.at(trial.topology.external_imu);
  }
}

}  // namespace

SimulatedTrial simulateManipulator(const ManipulatorSpec& spec, double duration, double rate,
                                   const NoiseSpec& noise)
{
  if (!(rate > 0.0) || !std::isfinite(rate)) throw Error(ErrorCode::InvalidRate, "rate must be > 0");
  if (!(duration > 0.0)) throw Error(ErrorCode::InvalidRate, "duration must be > 0");
  spec.validate();

  SimulatedTrial trial;
  trial.rate = rate;
  trial.topology = spec.topology();
  trial.geometry = manipulatorGeometry(spec);

  const long steps = std::lround(duration * rate);
  trial.poses.reserve(steps);
  for (long s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) / rate;
    ImuKinematics k = manipulatorKinematics(spec, t);
    ImuPose pose;
    pose.t = t;
    pose.position = k.position;
    pose.orientation = k.orientation;
    std::vector<Vec3> force(k.position.size());
    for (std::size_t i = 0; i < force.size(); ++i) {
      force[i] = k.orientation[i].conjugate() * (k.acceleration[i] - kGravity);
    }
    trial.poses.push_back(std::move(pose));
    trial.angular_velocity.push_back(std::move(k.angular_velocity));
    trial.angular_acceleration.push_back(std::move(k.angular_acceleration));
    trial.specific_force.push_back(std::move(force));
  }
  synthesizeFrames(trial, noise);
  return trial;
}

namespace {

// Fornberg weights for the `order`-th derivative at sample `at` from samples
// first .. first + count - 1 on a unit grid.
Eigen::VectorXd finiteDifferenceWeights(std::size_t first, std::size_t at, std::size_t count, int order)
{
  const double x0 = static_cast<double>(at) - static_cast<double>(first);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(count, order + 1);
  double c1 = 1.0;
  double c4 = -x0;
  c(0, 0) = 1.0;
  for (std::size_t i = 1; i < count; ++i) {
    const int mn = std::min<int>(static_cast<int>(i), order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = static_cast<double>(i) - x0;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = static_cast<double>(i) - static_cast<double>(j);
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k) c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return c.col(order);
}

}  // namespace

SimulatedTrial resimulateFromPoses(const std::vector<ImuPose>& poses, const ChainTopology& topology,
                                   const NoiseSpec& noise)
{
  const std::size_t n = poses.size();
  if (n < 5) throw Error(ErrorCode::TooShort, "need at least 5 poses, got " + std::to_string(n));
  const double dt = poses[1].t - poses[0].t;
  if (!(dt > 0.0)) throw Error(ErrorCode::NonUniformSampling, "timestamps must increase");
  for (std::size_t s = 1; s < n; ++s) {
    if (std::abs((poses[s].t - poses[s - 1].t) - dt) > 1e-9) {
      throw Error(ErrorCode::NonUniformSampling, "sample " + std::to_string(s) + " breaks the interval");
    }
  }
  const int imus = topology.imu_count;
  for (const ImuPose& p : poses) {
    if (static_cast<int>(p.position.size()) != imus || static_cast<int>(p.orientation.size()) != imus) {
      throw Error(ErrorCode::DimensionMismatch, "pose at t=" + std::to_string(p.t) + " has wrong IMU count");
    }
  }

  SimulatedTrial trial;
  trial.rate = 1.0 / dt;
  trial.topology = topology;
  trial.poses = poses;
  trial.angular_velocity.assign(n, std::vector<Vec3>(imus));
  trial.angular_acceleration.assign(n, std::vector<Vec3>(imus));
  trial.specific_force.assign(n, std::vector<Vec3>(imus));

  auto q = [&](std::size_t s, int i) { return poses[s].orientation[i]; };

  // Stencil of `width` consecutive samples around s, shifted inward at the ends.
  auto window = [&](std::size_t s, std::size_t width) {
    const std::size_t half = width / 2;
    return std::min(s >= half ? s - half : 0, n - width);
  };

  for (int i = 0; i < imus; ++i) {
    for (std::size_t s = 0; s < n; ++s) {
      // Angular velocity: derivative of the body-frame rotation vector log(q_s^{-1} q_{s+k}).
      const std::size_t w0 = window(s, 5);
      const Eigen::VectorXd dw = finiteDifferenceWeights(w0, s, 5, 1);
      Vec3 w = Vec3::Zero();
      for (std::size_t k = 0; k < 5; ++k) {
        if (w0 + k == s) continue;
        w += dw[k] * rotationVectorFromQuat(quatMultiply(q(s, i).conjugate(), q(w0 + k, i)));
      }
      trial.angular_velocity[s][i] = w / dt;

      const bool centered = s >= 2 && s + 2 < n;
      const std::size_t width = centered ? 5 : std::min<std::size_t>(n, 6);
      const std::size_t a0 = window(s, width);
      const Eigen::VectorXd da = finiteDifferenceWeights(a0, s, width, 2);
      Vec3 acc = Vec3::Zero();
      for (std::size_t k = 0; k < width; ++k) acc += da[k] * poses[a0 + k].position[i];
      acc /= dt * dt;
      trial.specific_force[s][i] = q(s, i).conjugate() * (acc - kGravity);
    }
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t w0 = window(s, 5);
      const Eigen::VectorXd dw = finiteDifferenceWeights(w0, s, 5, 1);
      Vec3 alpha = Vec3::Zero();
      for (std::size_t k = 0; k < 5; ++k) alpha += dw[k] * trial.angular_velocity[w0 + k][i];
      trial.angular_acceleration[s][i] = alpha / dt;
    }
  }
  synthesizeFrames(trial, noise);
  return trial;
}

JointAccelerationSeries groundTruthJointAcceleration(const SimulatedTrial& trial, int joint)
{
  if (joint < 0 || joint >= static_cast<int>(trial.topology.joints.size()) ||
      joint >= static_cast<int>(trial.geometry.joint_positions.size())) {
    throw Error(ErrorCode::UnknownJoint, "joint " + std::to_string(joint));
  }
  const Joint& jt = trial.topology.joints[joint];
  JointAccelerationSeries out;
  auto side = [&](std::size_t s, int imu, const Vec3& lever) {
    const Vec3& w = trial.angular_velocity[s][imu];
    const Vec3& dw = trial.angular_acceleration[s][imu];
    const Vec3 local = trial.specific_force[s][imu] + w.cross(w.cross(lever)) + dw.cross(lever);
    return Vec3(trial.poses[s].orientation[imu] * local);
  };
  for (std::size_t s = 0; s < trial.poses.size(); ++s) {
    out.first.push_back(side(s, jt.first, trial.geometry.at(joint, JointSide::First)));
    out.second.push_back(side(s, jt.second, trial.geometry.at(joint, JointSide::Second)));
  }
  return out;
}

}  // namespace cfit
