#include <cfit/error.hpp>
#include <cfit/simulator.hpp>

#include <gtest/gtest.h>

using namespace cfit;

namespace {

NoiseSpec noiseless()
{
  NoiseSpec n;
  n.gyro_variance = 0.0;
  n.accel_variance = 0.0;
  return n;
}

ManipulatorSpec staticChain()
{
  DefaultManipulatorOptions o;
  o.amplitude = 0.0;
  return defaultManipulator(o);
}

// Chain whose root spins about the vertical at a constant rate; all other DOFs fixed.
ManipulatorSpec spinningChain(double rate)
{
  ManipulatorSpec spec = staticChain();
  spec.segments[0].axes[0].motion.rate = rate;
  return spec;
}

double variance(const std::vector<double>& v)
{
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / (v.size() - 1);
}

}  // namespace

TEST(Simulator, StaticChainMeasuresGravityOnly)
{
  const SimulatedTrial trial = simulateManipulator(staticChain(), 2.0, 100.0, noiseless());
  ASSERT_EQ(trial.frames.size(), 200u);
  for (const MeasurementFrame& f : trial.frames) {
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(f.accel[i].norm(), 9.81, 1e-12);
      EXPECT_LT(f.gyro[i].norm(), 1e-14);
    }
  }
}

TEST(Simulator, CentripetalOracle)
{
  const double rate = 2.0;
  const SimulatedTrial trial = simulateManipulator(spinningChain(rate), 3.0, 100.0, noiseless());
  const Vec3 omega(0.0, 0.0, rate);
  for (std::size_t s = 0; s < trial.frames.size(); s += 37) {
    for (int i = 0; i < 3; ++i) {
      const Vec3& p = trial.poses[s].position[i];
      const Vec3 a = omega.cross(omega.cross(p));  // -[w x]^2 r with sign folded in
      const Vec3 expected = trial.poses[s].orientation[i].conjugate() * (a - kGravity);
      EXPECT_LT((trial.frames[s].accel[i] - expected).norm(), 1e-9);
      const double radial = p.head<2>().norm();
      EXPECT_NEAR(trial.frames[s].accel[i].norm(), std::hypot(rate * rate * radial, 9.81), 1e-9);
      EXPECT_NEAR(trial.frames[s].gyro[i].norm(), rate, 1e-12);
    }
  }
}

TEST(Simulator, FrameCountFollowsDurationAndRate)
{
  const SimulatedTrial trial = simulateManipulator(defaultManipulator(), 600.0, 100.0, NoiseSpec{});
  EXPECT_EQ(trial.frames.size(), 60000u);
  EXPECT_EQ(trial.poses.size(), 60000u);
  EXPECT_DOUBLE_EQ(trial.frames.back().t, 599.99);
}

TEST(Simulator, NoiseVarianceMatchesSpec)
{
  NoiseSpec noise;
  noise.seed = 11;
  const SimulatedTrial trial = simulateManipulator(defaultManipulator(), 60.0, 100.0, noise);
  std::vector<double> g, a;
  for (std::size_t s = 0; s < trial.frames.size(); ++s) {
    for (int i = 0; i < 3; ++i) {
      const Vec3 dg = trial.frames[s].gyro[i] - trial.angular_velocity[s][i];
      const Vec3 da = trial.frames[s].accel[i] - trial.specific_force[s][i];
      for (int k = 0; k < 3; ++k) {
        g.push_back(dg[k]);
        a.push_back(da[k]);
      }
    }
  }
  EXPECT_NEAR(variance(g) / noise.gyro_variance, 1.0, 0.05);
  EXPECT_NEAR(variance(a) / noise.accel_variance, 1.0, 0.05);
}

TEST(Simulator, SameSeedIsBitIdentical)
{
  NoiseSpec noise;
  noise.seed = 5;
  const SimulatedTrial a = simulateManipulator(defaultManipulator(), 5.0, 100.0, noise);
  const SimulatedTrial b = simulateManipulator(defaultManipulator(), 5.0, 100.0, noise);
  noise.seed = 6;
  const SimulatedTrial c = simulateManipulator(defaultManipulator(), 5.0, 100.0, noise);
  bool differs = false;
  for (std::size_t s = 0; s < a.frames.size(); ++s) {
    for (int i = 0; i < 3; ++i) {
      EXPECT_EQ(a.frames[s].accel[i], b.frames[s].accel[i]);
      EXPECT_EQ(a.frames[s].gyro[i], b.frames[s].gyro[i]);
      differs = differs || a.frames[s].gyro[i] != c.frames[s].gyro[i];
    }
  }
  EXPECT_TRUE(differs);
}

TEST(Simulator, KinematicsMatchFiniteDifferences)
{
  const ManipulatorSpec spec = defaultManipulator();
  const double h = 1e-5;
  for (double t : {0.3, 1.7, 4.2}) {
    const ImuKinematics k0 = manipulatorKinematics(spec, t);
    const ImuKinematics kp = manipulatorKinematics(spec, t + h);
    const ImuKinematics km = manipulatorKinematics(spec, t - h);
    for (int i = 0; i < 3; ++i) {
      EXPECT_LT(((kp.position[i] - km.position[i]) / (2 * h) - k0.velocity[i]).norm(), 1e-7);
      EXPECT_LT(((kp.velocity[i] - km.velocity[i]) / (2 * h) - k0.acceleration[i]).norm(), 1e-6);
      const Vec3 w = rotationVectorFromQuat(Quat(km.orientation[i].conjugate() * kp.orientation[i])) / (2 * h);
      EXPECT_LT((w - k0.angular_velocity[i]).norm(), 1e-6);
      EXPECT_LT(((kp.angular_velocity[i] - km.angular_velocity[i]) / (2 * h) - k0.angular_acceleration[i]).norm(),
                1e-5);
    }
  }
}

TEST(Simulator, RigidityOfJointAcceleration)
{
  const SimulatedTrial trial = simulateManipulator(defaultManipulator(), 10.0, 100.0, noiseless());
  for (int j = 0; j < 2; ++j) {
    const JointAccelerationSeries acc = groundTruthJointAcceleration(trial, j);
    for (std::size_t s = 0; s < acc.first.size(); ++s) {
      EXPECT_LT((acc.first[s] - acc.second[s]).norm(), 1e-6);
    }
  }
}

TEST(Simulator, StaticJointAccelerationIsGravityReaction)
{
  const SimulatedTrial trial = simulateManipulator(staticChain(), 1.0, 100.0, noiseless());
  const JointAccelerationSeries acc = groundTruthJointAcceleration(trial, 1);
  for (std::size_t s = 0; s < acc.first.size(); ++s) {
    EXPECT_LT((acc.first[s] - Vec3(0, 0, 9.81)).norm(), 1e-12);
    EXPECT_LT((acc.second[s] - Vec3(0, 0, 9.81)).norm(), 1e-12);
  }
}

TEST(Simulator, NoisyJointAccelerationDisagreementHasZeroMean)
{
  NoiseSpec noise;
  noise.seed = 3;
  const SimulatedTrial trial = simulateManipulator(defaultManipulator(), 60.0, 100.0, noise);
  const Joint jt = trial.topology.joints[0];
  Vec3 sum = Vec3::Zero();
  for (std::size_t s = 0; s < trial.frames.size(); ++s) {
    auto side = [&](int imu, const Vec3& lever) {
      const Vec3& w = trial.angular_velocity[s][imu];
      const Vec3& dw = trial.angular_acceleration[s][imu];
      return Vec3(trial.poses[s].orientation[imu] *
                  (trial.frames[s].accel[imu] + w.cross(w.cross(lever)) + dw.cross(lever)));
    };
    sum += side(jt.first, trial.geometry.at(0, JointSide::First)) -
           side(jt.second, trial.geometry.at(0, JointSide::Second));
  }
  const double n = static_cast<double>(trial.frames.size());
  const double sd_of_mean = std::sqrt(2.0 * noise.accel_variance / n);
  for (int k = 0; k < 3; ++k) EXPECT_LT(std::abs(sum[k] / n), 4.0 * sd_of_mean);
}

TEST(Simulator, ResimulationMatchesAnalyticPath)
{
  const SimulatedTrial direct = simulateManipulator(defaultManipulator(), 20.0, 100.0, noiseless());
  const SimulatedTrial resim = resimulateFromPoses(direct.poses, direct.topology, noiseless());
  ASSERT_EQ(resim.frames.size(), direct.frames.size());
  double max_gyro = 0.0, max_accel = 0.0;
  for (std::size_t s = 0; s < direct.frames.size(); ++s) {
    for (int i = 0; i < 3; ++i) {
      max_gyro = std::max(max_gyro, (resim.frames[s].gyro[i] - direct.frames[s].gyro[i]).norm());
      max_accel = std::max(max_accel, (resim.frames[s].accel[i] - direct.frames[s].accel[i]).norm());
    }
  }
  EXPECT_LT(max_gyro, 1e-3);
  EXPECT_LT(max_accel, 1e-2);
}

TEST(Simulator, ConstantPosesGiveGravityOnly)
{
  std::vector<ImuPose> poses;
  const Quat q0 = quatFromRotationVector(Vec3(0.3, -0.1, 0.7));
  for (int s = 0; s < 10; ++s) {
    poses.push_back(ImuPose{0.01 * s, {Vec3(1, 2, 3), Vec3(0, 0, 1)}, {q0, Quat::Identity()}});
  }
  const SimulatedTrial trial = resimulateFromPoses(poses, ChainTopology::serial(2), noiseless());
  for (const MeasurementFrame& f : trial.frames) {
    EXPECT_LT(f.gyro[0].norm(), 1e-12);
    EXPECT_LT((f.accel[0] - q0.conjugate() * Vec3(0, 0, 9.81)).norm(), 1e-9);
    EXPECT_LT((f.accel[1] - Vec3(0, 0, 9.81)).norm(), 1e-9);
  }
}

TEST(Simulator, CircularTranslationOracle)
{
  const double r = 0.5, rate = 3.0, dt = 0.01;
  std::vector<ImuPose> poses;
  for (int s = 0; s < 300; ++s) {
    const double t = s * dt;
    poses.push_back(ImuPose{t,
                            {Vec3::Zero(), Vec3(r * std::cos(rate * t), r * std::sin(rate * t), 0.0)},
                            {Quat::Identity(), Quat::Identity()}});
  }
  const SimulatedTrial trial = resimulateFromPoses(poses, ChainTopology::serial(2), noiseless());
  const double expected = std::hypot(rate * rate * r, 9.81);
  for (const MeasurementFrame& f : trial.frames) {
    EXPECT_NEAR(f.accel[1].norm(), expected, 0.005 * expected);
  }
}

TEST(Simulator, HeadingRotationOfTruthLeavesImuDataUnchanged)
{
  const SimulatedTrial direct = simulateManipulator(defaultManipulator(), 3.0, 100.0, noiseless());
  const Quat heading = quatFromRotationVector(Vec3(0, 0, 0.8));
  std::vector<ImuPose> rotated = direct.poses;
  for (ImuPose& p : rotated) {
    for (int i = 0; i < 3; ++i) {
      p.position[i] = heading * p.position[i];
      p.orientation[i] = heading * p.orientation[i];
    }
  }
  const SimulatedTrial a = resimulateFromPoses(direct.poses, direct.topology, noiseless());
  const SimulatedTrial b = resimulateFromPoses(rotated, direct.topology, noiseless());
  for (std::size_t s = 0; s < a.frames.size(); ++s) {
    for (int i = 0; i < 3; ++i) {
      EXPECT_LT((a.frames[s].gyro[i] - b.frames[s].gyro[i]).norm(), 1e-9);
      EXPECT_LT((a.frames[s].accel[i] - b.frames[s].accel[i]).norm(), 1e-7);
    }
    EXPECT_LT(rotationAngle(Mat3(rotationMatrix(b.frames[s].orientation).transpose() *
                                 rotationMatrix(Quat(heading * a.frames[s].orientation)))),
              1e-12);
  }
}

TEST(Simulator, ExternalStreamIsTruthOfExternalImu)
{
  ManipulatorSpec spec = defaultManipulator();
  spec.external_imu = 2;
  const SimulatedTrial trial = simulateManipulator(spec, 1.0, 100.0, NoiseSpec{});
  for (std::size_t s = 0; s < trial.frames.size(); ++s) {
    EXPECT_EQ(trial.frames[s].orientation.coeffs(), trial.poses[s].orientation[2].coeffs());
  }
}

TEST(Simulator, GeometryMatchesLeverArms)
{
  const ChainGeometry g = manipulatorGeometry(defaultManipulator());
  ASSERT_EQ(g.joint_positions.size(), 2u);
  for (const auto& [a, b] : g.joint_positions) {
    EXPECT_NEAR(a.norm(), std::hypot(0.03, 0.26), 1e-12);
    EXPECT_NEAR(b.norm(), std::hypot(0.03, 0.26), 1e-12);
  }
}

TEST(Simulator, LowerBodyHasSevenImus)
{
  const ManipulatorSpec spec = lowerBodyManipulator();
  EXPECT_NO_THROW(spec.validate());
  const ChainTopology topo = spec.topology();
  EXPECT_EQ(topo.imu_count, 7);
  EXPECT_EQ(topo.joints.size(), 6u);
  EXPECT_NO_THROW(validateTopology(topo));
  const SimulatedTrial trial = simulateManipulator(spec, 2.0, 100.0, noiseless());
  for (int j = 0; j < 6; ++j) {
    const JointAccelerationSeries acc = groundTruthJointAcceleration(trial, j);
    for (std::size_t s = 0; s < acc.first.size(); ++s) EXPECT_LT((acc.first[s] - acc.second[s]).norm(), 1e-6);
  }
}

TEST(Simulator, Errors)
{
  auto code = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::EmptyInput;
  };
  EXPECT_EQ(code([] { simulateManipulator(defaultManipulator(), 1.0, 0.0, NoiseSpec{}); }), ErrorCode::InvalidRate);
  EXPECT_EQ(code([] { simulateManipulator(ManipulatorSpec{}, 1.0, 100.0, NoiseSpec{}); }), ErrorCode::EmptySpec);
  EXPECT_EQ(code([] {
              ManipulatorSpec spec = defaultManipulator();
              spec.segments[1].axes[0].motion.frequency = spec.segments[1].axes[1].motion.frequency;
              spec.validate();
            }),
            ErrorCode::InvalidSpec);

  const SimulatedTrial trial = simulateManipulator(defaultManipulator(), 1.0, 100.0, NoiseSpec{});
  std::vector<ImuPose> few(trial.poses.begin(), trial.poses.begin() + 4);
  EXPECT_EQ(code([&] { resimulateFromPoses(few, trial.topology, NoiseSpec{}); }), ErrorCode::TooShort);
  std::vector<ImuPose> jitter = trial.poses;
  jitter[10].t += 1e-4;
  EXPECT_EQ(code([&] { resimulateFromPoses(jitter, trial.topology, NoiseSpec{}); }), ErrorCode::NonUniformSampling);
  EXPECT_EQ(code([&] { groundTruthJointAcceleration(trial, 2); }), ErrorCode::UnknownJoint);
}
