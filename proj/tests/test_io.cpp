#include <cfit/error.hpp>
#include <cfit/io.hpp>
#include <cfit/simulator.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace cfit;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override
  {
    dir_ = fs::temp_directory_path() / ("cfit_io_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const
  {
    std::ofstream(path(name)) << text;
  }

  fs::path dir_;
};

std::string parseMessage(const std::function<void()>& f)
{
  try {
    f();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    return e.what();
  }
  ADD_FAILURE() << "expected ParseError";
  return {};
}

}  // namespace

TEST(FormatNumber, RoundTripsExactly)
{
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 9.81, 0.0}) {
    EXPECT_EQ(std::stod(formatNumber(v)), v);
  }
  EXPECT_EQ(formatNumber(0.5), "0.5");
}

TEST_F(IoTest, MeasurementsRoundTripBitExact)
{
  const SimulatedTrial trial = simulateManipulator(defaultManipulator(), 0.5, 100.0, NoiseSpec{});
  writeMeasurementsCsv(path("m.csv"), trial.frames);
  writeOrientationCsv(path("o.csv"), trial.frames);
  const auto frames = readMeasurements(path("m.csv"), path("o.csv"));
  ASSERT_EQ(frames.size(), trial.frames.size());
  for (std::size_t s = 0; s < frames.size(); ++s) {
    EXPECT_EQ(frames[s].t, trial.frames[s].t);
    for (int i = 0; i < 3; ++i) {
      EXPECT_EQ(frames[s].accel[i], trial.frames[s].accel[i]);
      EXPECT_EQ(frames[s].gyro[i], trial.frames[s].gyro[i]);
    }
    EXPECT_LT((frames[s].orientation.coeffs() - trial.frames[s].orientation.coeffs()).norm(), 1e-15);
  }
}

TEST_F(IoTest, PosesAndGeometryRoundTrip)
{
  const SimulatedTrial trial = simulateManipulator(defaultManipulator(), 0.2, 100.0, NoiseSpec{});
  writePosesCsv(path("p.csv"), trial.poses);
  writeGeometryCsv(path("g.csv"), trial.geometry);
  const auto poses = readPosesCsv(path("p.csv"));
  ASSERT_EQ(poses.size(), trial.poses.size());
  for (std::size_t s = 0; s < poses.size(); ++s) {
    EXPECT_EQ(poses[s].t, trial.poses[s].t);
    for (int i = 0; i < 3; ++i) {
      EXPECT_EQ(poses[s].position[i], trial.poses[s].position[i]);
      EXPECT_LT((poses[s].orientation[i].coeffs() - trial.poses[s].orientation[i].coeffs()).norm(), 1e-15);
    }
  }
  const ChainGeometry g = readGeometryCsv(path("g.csv"), 2);
  for (int k = 0; k < 2; ++k) {
    EXPECT_EQ(g.at(k, JointSide::First), trial.geometry.at(k, JointSide::First));
    EXPECT_EQ(g.at(k, JointSide::Second), trial.geometry.at(k, JointSide::Second));
  }
}

TEST_F(IoTest, EstimatesFileLayout)
{
  const ChainTopology topo = ChainTopology::serial(2);
  const StateLayout L(topo);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(L.dim());
  m.segment<3>(L.angularVelocity(1)) = Vec3(1, 2, 3);
  m.segment<3>(L.jointPosition(0, JointSide::Second)) = Vec3(0.1, 0.2, 0.3);
  writeEstimatesCsv(path("i.csv"), path("j.csv"), L, {0.0, 0.01}, {m, m});
  std::ifstream in(path("i.csv"));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], "t,imu,qw,qx,qy,qz,wx,wy,wz");
  EXPECT_EQ(lines[2], "0,1,1,0,0,0,1,2,3");
  std::ifstream jin(path("j.csv"));
  lines.clear();
  while (std::getline(jin, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[2], "0,0,1,0.1,0.2,0.3");
  EXPECT_THROW(writeEstimatesCsv(path("i.csv"), path("j.csv"), L, {0.0}, {m, m}), Error);
}

TEST_F(IoTest, ParseErrorsCarryLineNumbers)
{
  write("o.csv", "t,qw,qx,qy,qz\n0,1,0,0,0\n");
  write("bad_number.csv", "t,imu,ax,ay,az,gx,gy,gz\n0,0,1,2,3,4,5,6\n0,1,1,2,x,4,5,6\n");
  EXPECT_NE(parseMessage([&] { readMeasurements(path("bad_number.csv"), path("o.csv")); }).find("bad_number.csv:3:"),
            std::string::npos);

  write("short_row.csv", "t,imu,ax,ay,az,gx,gy,gz\n0,0,1,2,3,4,5\n");
  EXPECT_NE(parseMessage([&] { readMeasurements(path("short_row.csv"), path("o.csv")); }).find(":2:"),
            std::string::npos);

  write("header.csv", "time,imu,ax,ay,az,gx,gy,gz\n0,0,1,2,3,4,5,6\n");
  EXPECT_NE(parseMessage([&] { readMeasurements(path("header.csv"), path("o.csv")); }).find(":1:"),
            std::string::npos);

  write("order.csv", "t,imu,ax,ay,az,gx,gy,gz\n0,1,1,2,3,4,5,6\n");
  EXPECT_NE(parseMessage([&] { readMeasurements(path("order.csv"), path("o.csv")); }).find(":2:"),
            std::string::npos);

  write("incomplete.csv",
        "t,imu,ax,ay,az,gx,gy,gz\n0,0,1,2,3,4,5,6\n0,1,1,2,3,4,5,6\n0.01,0,1,2,3,4,5,6\n0.02,0,1,2,3,4,5,6\n");
  EXPECT_NE(parseMessage([&] { readMeasurements(path("incomplete.csv"), path("o.csv")); }).find(":5:"),
            std::string::npos);

  write("m.csv", "t,imu,ax,ay,az,gx,gy,gz\n0,0,1,2,3,4,5,6\n0.01,0,1,2,3,4,5,6\n");
  write("o_mismatch.csv", "t,qw,qx,qy,qz\n0,1,0,0,0\n0.02,1,0,0,0\n");
  EXPECT_NE(parseMessage([&] { readMeasurements(path("m.csv"), path("o_mismatch.csv")); }).find("o_mismatch.csv:3:"),
            std::string::npos);

  write("o_norm.csv", "t,qw,qx,qy,qz\n0,2,0,0,0\n0.01,1,0,0,0\n");
  EXPECT_NE(parseMessage([&] { readMeasurements(path("m.csv"), path("o_norm.csv")); }).find(":2:"),
            std::string::npos);

  write("empty.csv", "t,imu,px,py,pz,qw,qx,qy,qz\n");
  parseMessage([&] { readPosesCsv(path("empty.csv")); });

  write("geometry.csv", "joint,side,jx,jy,jz\n0,0,1,2,3\n");
  parseMessage([&] { readGeometryCsv(path("geometry.csv"), 1); });
}

TEST_F(IoTest, MissingFileIsIoError)
{
  try {
    readPosesCsv(path("does_not_exist.csv"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}
