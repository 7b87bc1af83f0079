#include <cfit/chain.hpp>
#include <cfit/error.hpp>

#include <numeric>
#include <queue>
#include <string>

namespace cfit {

ChainTopology ChainTopology::serial(int imu_count, int external_imu)
{
  ChainTopology topo;
  topo.imu_count = imu_count;
  topo.external_imu = external_imu;
  for (int i = 0; i + 1 < imu_count; ++i) {
    topo.joints.push_back({i, i + 1});
  }
  return topo;
}

namespace {

// Union-find over IMU indices.
struct DisjointSets {
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x)
  {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  bool unite(int a, int b)
  {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
  std::vector<int> parent;
};

}  // namespace

void validateTopology(const ChainTopology& topo)
{
  if (topo.imu_count < 2) {
    throw Error(ErrorCode::TooFewImus, "need at least 2 IMUs, got " + std::to_string(topo.imu_count));
  }
  if (topo.external_imu < 0 || topo.external_imu >= topo.imu_count) {
    throw Error(ErrorCode::BadExternalIndex, "external IMU index " + std::to_string(topo.external_imu) +
                                                 " outside [0, " + std::to_string(topo.imu_count) + ")");
  }
  DisjointSets sets(topo.imu_count);
  for (std::size_t k = 0; k < topo.joints.size(); ++k) {
    const Joint& j = topo.joints[k];
    const std::string name = "joint " + std::to_string(k) + " (" + std::to_string(j.first) + "," +
                             std::to_string(j.second) + ")";
    if (j.first < 0 || j.first >= topo.imu_count || j.second < 0 || j.second >= topo.imu_count) {
      throw Error(ErrorCode::BadJointIndex, name + " references an unknown IMU");
    }
    if (j.first == j.second) {
      throw Error(ErrorCode::SelfJoint, name + " connects an IMU to itself");
    }
    if (!sets.unite(j.first, j.second)) {
      throw Error(ErrorCode::CyclicChain, name + " closes a cycle or duplicates a joint");
    }
  }
  if (static_cast<int>(topo.joints.size()) != topo.imu_count - 1) {
    // Fewer joints than imu_count - 1 on an acyclic set means a disconnected graph.
    throw Error(ErrorCode::DisconnectedChain, "expected " + std::to_string(topo.imu_count - 1) +
                                                  " joints, got " + std::to_string(topo.joints.size()));
  }
}

int chainDistance(const ChainTopology& topo, int from, int to)
{
  std::vector<int> dist(topo.imu_count, -1);
  std::queue<int> open;
  dist.at(from) = 0;
  open.push(from);
  while (!open.empty()) {
    const int cur = open.front();
    open.pop();
    for (const Joint& j : topo.joints) {
      const int other = j.first == cur ? j.second : (j.second == cur ? j.first : -1);
      if (other >= 0 && dist[other] < 0) {
        dist[other] = dist[cur] + 1;
        open.push(other);
      }
    }
  }
  return dist.at(to);
}

StateLayout::StateLayout(const ChainTopology& topo)
    : imu_count_(topo.imu_count), joint_count_(static_cast<int>(topo.joints.size()))
{
}

}  // namespace cfit
