#pragma once

#include <cfit/so3.hpp>

#include <cstddef>
#include <utility>
#include <vector>

namespace cfit {

/// A joint connects two IMUs; `first` and `second` are the i and j of J_(i,j).
struct Joint {
  int first = 0;
  int second = 0;

  bool operator==(const Joint&) const = default;
};

enum class JointSide { First = 0, Second = 1 };

/**
 * IMUs, joint connectivity and the one IMU that receives absolute orientation
 * measurements. Joints must form a connected acyclic graph with imu_count - 1 edges
 * (a chain, or a tree such as a pelvis with two legs).
 */
struct ChainTopology {
  int imu_count = 0;
  std::vector<Joint> joints;
  int external_imu = 0;

  bool operator==(const ChainTopology&) const = default;

  /// Serial chain 0-1-...-(n-1) with the external orientation on IMU 0.
  static ChainTopology serial(int imu_count, int external_imu = 0);
};

/// Throws cfit::Error naming the violated rule.
void validateTopology(const ChainTopology& topo);

/// Number of joint hops between two IMUs.
int chainDistance(const ChainTopology& topo, int from, int to);

/**
 * Offsets of each block in the flat state vector:
 * per IMU i [mrp(3), omega(3)], then per joint k [J^{I_first}(3), J^{I_second}(3)].
 */
class StateLayout {
 public:
  StateLayout() = default;
  explicit StateLayout(const ChainTopology& topo);

  int imuCount() const { return imu_count_; }
  int jointCount() const { return joint_count_; }
  int dim() const { return 6 * imu_count_ + 6 * joint_count_; }

  int orientation(int imu) const { return 6 * imu; }
  int angularVelocity(int imu) const { return 6 * imu + 3; }
  int jointPosition(int joint, JointSide side) const
  {
    return 6 * imu_count_ + 6 * joint + 3 * static_cast<int>(side);
  }

 private:
  int imu_count_ = 0;
  int joint_count_ = 0;
};

/// True joint positions in each adjacent IMU frame (m), indexed like topology joints.
struct ChainGeometry {
  std::vector<std::pair<Vec3, Vec3>> joint_positions;

  const Vec3& at(int joint, JointSide side) const
  {
    return side == JointSide::First ? joint_positions.at(joint).first : joint_positions.at(joint).second;
  }
};

/// Ground-truth (or re-simulation input) pose of every IMU at one instant.
struct ImuPose {
  double t = 0.0;
  std::vector<Vec3> position;     // p^N (m)
  std::vector<Quat> orientation;  // q^{NI}
};

}  // namespace cfit
