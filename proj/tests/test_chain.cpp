#include <cfit/chain.hpp>
#include <cfit/error.hpp>

#include <gtest/gtest.h>

#include <set>

using namespace cfit;

namespace {

ErrorCode codeOf(const ChainTopology& topo)
{
  try {
    validateTopology(topo);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::EmptyInput;
}

}  // namespace

TEST(Chain, ThreeImuSerialChainIsValid)
{
  ChainTopology topo{3, {{0, 1}, {1, 2}}, 0};
  EXPECT_NO_THROW(validateTopology(topo));
  EXPECT_EQ(topo, ChainTopology::serial(3));
}

TEST(Chain, RejectsInvalidTopologies)
{
  EXPECT_EQ(codeOf({2, {}, 0}), ErrorCode::DisconnectedChain);
  EXPECT_EQ(codeOf({1, {}, 0}), ErrorCode::TooFewImus);
  EXPECT_EQ(codeOf({3, {{0, 1}, {0, 1}}, 0}), ErrorCode::CyclicChain);
  EXPECT_EQ(codeOf({3, {{0, 1}, {1, 2}, {2, 0}}, 0}), ErrorCode::CyclicChain);
  EXPECT_EQ(codeOf({3, {{0, 1}, {1, 2}}, 3}), ErrorCode::BadExternalIndex);
  EXPECT_EQ(codeOf({3, {{0, 1}, {1, 1}}, 0}), ErrorCode::SelfJoint);
  EXPECT_EQ(codeOf({3, {{0, 1}, {1, 5}}, 0}), ErrorCode::BadJointIndex);
  EXPECT_EQ(codeOf({4, {{0, 1}, {2, 3}}, 0}), ErrorCode::DisconnectedChain);
}

TEST(Chain, AcceptsTree)
{
  // Pelvis with two legs.
  ChainTopology topo{7, {{0, 1}, {1, 2}, {2, 3}, {0, 4}, {4, 5}, {5, 6}}, 0};
  EXPECT_NO_THROW(validateTopology(topo));
  EXPECT_EQ(chainDistance(topo, 0, 3), 3);
  EXPECT_EQ(chainDistance(topo, 3, 6), 6);
  EXPECT_EQ(chainDistance(topo, 4, 4), 0);
}

TEST(Chain, StateDimensions)
{
  EXPECT_EQ(StateLayout(ChainTopology::serial(3)).dim(), 30);
  EXPECT_EQ(StateLayout(ChainTopology::serial(2)).dim(), 18);
  EXPECT_EQ(StateLayout(ChainTopology::serial(7)).dim(), 78);
}

TEST(Chain, LayoutIsBijection)
{
  for (int n = 2; n <= 7; ++n) {
    const ChainTopology topo = ChainTopology::serial(n);
    const StateLayout layout(topo);
    std::vector<int> owner(layout.dim(), 0);
    auto mark = [&](int offset) {
      for (int k = 0; k < 3; ++k) owner.at(offset + k) += 1;
    };
    for (int i = 0; i < n; ++i) {
      mark(layout.orientation(i));
      mark(layout.angularVelocity(i));
    }
    for (int j = 0; j < n - 1; ++j) {
      mark(layout.jointPosition(j, JointSide::First));
      mark(layout.jointPosition(j, JointSide::Second));
    }
    for (int c : owner) EXPECT_EQ(c, 1);
    // Joint blocks follow all IMU blocks.
    EXPECT_EQ(layout.jointPosition(0, JointSide::First), 6 * n);
  }
}

TEST(Chain, LayoutIsStable)
{
  const ChainTopology topo = ChainTopology::serial(4);
  const StateLayout a(topo), b(topo);
  EXPECT_EQ(a.dim(), b.dim());
  EXPECT_EQ(a.jointPosition(2, JointSide::Second), b.jointPosition(2, JointSide::Second));
}

TEST(Chain, ErrorMessageNamesRule)
{
  try {
    validateTopology({3, {{0, 1}, {0, 1}}, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("CyclicChain"), std::string::npos);
  }
}
