#include <cfit/error.hpp>
#include <cfit/io.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cfit {

namespace {

std::ofstream openOut(const std::string& path)
{
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  return out;
}

std::ifstream openIn(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  return in;
}

void writeRow(std::ostream& out, std::initializer_list<double> values)
{
  bool first = true;
  for (double v : values) {
    if (!first) out << ',';
    out << formatNumber(v);
    first = false;
  }
  out << '\n';
}

class CsvReader {
 public:
  CsvReader(const std::string& path, const std::string& header) : path_(path), in_(openIn(path))
  {
    std::string line;
    if (!std::getline(in_, line)) fail("missing header");
    ++line_no_;
    if (trim(line) != header) fail("expected header '" + header + "', got '" + trim(line) + "'");
  }

  /// Next non-empty row, parsed as `columns` numbers. False at end of file.
  bool next(std::vector<double>& row, std::size_t columns)
  {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      line = trim(line);
      if (line.empty()) continue;
      row.clear();
      std::size_t pos = 0;
      while (true) {
        const std::size_t comma = line.find(',', pos);
        const std::string field = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        double v = 0.0;
        const char* begin = field.data();
        const char* end = field.data() + field.size();
        auto [ptr, ec] = std::from_chars(begin, end, v);
        if (ec != std::errc() || ptr != end || field.empty()) fail("bad number '" + field + "'");
        row.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      if (row.size() != columns) {
        fail("expected " + std::to_string(columns) + " columns, got " + std::to_string(row.size()));
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& message) const
  {
    throw Error(ErrorCode::ParseError, path_ + ":" + std::to_string(line_no_) + ": " + message);
  }

  int index(double v) const
  {
    if (v != std::floor(v) || v < 0) fail("expected a non-negative integer index");
    return static_cast<int>(v);
  }

 private:
  static std::string trim(const std::string& s)
  {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::string path_;
  std::ifstream in_;
  long line_no_ = 0;
};

}  // namespace

std::string formatNumber(double value)
{
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(ErrorCode::IoError, "number formatting failed");
  return std::string(buf, ptr);
}

void writePosesCsv(const std::string& path, const std::vector<ImuPose>& poses)
{
  std::ofstream out = openOut(path);
  out << "t,imu,px,py,pz,qw,qx,qy,qz\n";
  for (const ImuPose& pose : poses) {
    for (std::size_t i = 0; i < pose.position.size(); ++i) {
      const Vec3& p = pose.position[i];
      const Quat& q = pose.orientation[i];
      writeRow(out, {pose.t, double(i), p.x(), p.y(), p.z(), q.w(), q.x(), q.y(), q.z()});
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

std::vector<ImuPose> readPosesCsv(const std::string& path)
{
  CsvReader reader(path, "t,imu,px,py,pz,qw,qx,qy,qz");
  std::vector<ImuPose> poses;
  std::vector<double> row;
  int imu_count = -1;
  while (reader.next(row, 9)) {
    const int imu = reader.index(row[1]);
    if (imu == 0) {
      if (!poses.empty() && imu_count < 0) imu_count = static_cast<int>(poses.back().position.size());
      if (!poses.empty() && static_cast<int>(poses.back().position.size()) != imu_count) {
        reader.fail("incomplete instant before this row");
      }
      poses.push_back(ImuPose{row[0], {}, {}});
    } else if (poses.empty() || static_cast<int>(poses.back().position.size()) != imu) {
      reader.fail("IMU rows must be listed 0..n-1 per instant");
    } else if (row[0] != poses.back().t) {
      reader.fail("timestamp differs within one instant");
    }
    Quat q(row[5], row[6], row[7], row[8]);
    if (std::abs(q.norm() - 1.0) > 1e-6) reader.fail("quaternion is not unit length");
    poses.back().position.emplace_back(row[2], row[3], row[4]);
    poses.back().orientation.push_back(q.normalized());
  }
  if (poses.empty()) reader.fail("no data rows");
  if (imu_count < 0) imu_count = static_cast<int>(poses.back().position.size());
  if (static_cast<int>(poses.back().position.size()) != imu_count) reader.fail("incomplete last instant");
  return poses;
}

void writeMeasurementsCsv(const std::string& path, const std::vector<MeasurementFrame>& frames)
{
  std::ofstream out = openOut(path);
  out << "t,imu,ax,ay,az,gx,gy,gz\n";
  for (const MeasurementFrame& f : frames) {
    for (std::size_t i = 0; i < f.accel.size(); ++i) {
      const Vec3& a = f.accel[i];
      const Vec3& g = f.gyro[i];
      writeRow(out, {f.t, double(i), a.x(), a.y(), a.z(), g.x(), g.y(), g.z()});
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

void writeOrientationCsv(const std::string& path, const std::vector<MeasurementFrame>& frames)
{
  std::ofstream out = openOut(path);
  out << "t,qw,qx,qy,qz\n";
  for (const MeasurementFrame& f : frames) {
    const Quat& q = f.orientation;
    writeRow(out, {f.t, q.w(), q.x(), q.y(), q.z()});
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

std::vector<MeasurementFrame> readMeasurements(const std::string& measurements_path,
                                               const std::string& orientation_path)
{
  CsvReader reader(measurements_path, "t,imu,ax,ay,az,gx,gy,gz");
  std::vector<MeasurementFrame> frames;
  std::vector<double> row;
  while (reader.next(row, 8)) {
    const int imu = reader.index(row[1]);
    if (imu == 0) {
      if (!frames.empty() && frames.back().accel.size() != frames.front().accel.size()) {
        reader.fail("incomplete instant before this row");
      }
      MeasurementFrame f;
      f.t = row[0];
      frames.push_back(f);
    } else if (frames.empty() || static_cast<int>(frames.back().accel.size()) != imu) {
      reader.fail("IMU rows must be listed 0..n-1 per instant");
    } else if (row[0] != frames.back().t) {
      reader.fail("timestamp differs within one instant");
    }
    frames.back().accel.emplace_back(row[2], row[3], row[4]);
    frames.back().gyro.emplace_back(row[5], row[6], row[7]);
  }
  if (frames.empty()) reader.fail("no data rows");
  if (frames.back().accel.size() != frames.front().accel.size()) reader.fail("incomplete last instant");

  CsvReader orient(orientation_path, "t,qw,qx,qy,qz");
  std::size_t k = 0;
  while (orient.next(row, 5)) {
    if (k >= frames.size()) orient.fail("more orientation rows than measurement instants");
    if (row[0] != frames[k].t) orient.fail("timestamp does not match measurement instant " + std::to_string(k));
    Quat q(row[1], row[2], row[3], row[4]);
    if (std::abs(q.norm() - 1.0) > 1e-6) orient.fail("quaternion is not unit length");
    frames[k].orientation = q.normalized();
    ++k;
  }
  if (k != frames.size()) orient.fail("fewer orientation rows than measurement instants");
  return frames;
}

void writeGeometryCsv(const std::string& path, const ChainGeometry& geometry)
{
  std::ofstream out = openOut(path);
  out << "joint,side,jx,jy,jz\n";
  for (std::size_t k = 0; k < geometry.joint_positions.size(); ++k) {
    const auto& [a, b] = geometry.joint_positions[k];
    writeRow(out, {double(k), 0.0, a.x(), a.y(), a.z()});
    writeRow(out, {double(k), 1.0, b.x(), b.y(), b.z()});
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

ChainGeometry readGeometryCsv(const std::string& path, int joint_count)
{
  CsvReader reader(path, "joint,side,jx,jy,jz");
  ChainGeometry geometry;
  geometry.joint_positions.resize(joint_count);
  std::vector<std::vector<bool>> seen(joint_count, std::vector<bool>(2, false));
  std::vector<double> row;
  while (reader.next(row, 5)) {
    const int k = reader.index(row[0]);
    const int side = reader.index(row[1]);
    if (k >= joint_count) reader.fail("joint index out of range");
    if (side > 1) reader.fail("side must be 0 or 1");
    const Vec3 v(row[2], row[3], row[4]);
    (side == 0 ? geometry.joint_positions[k].first : geometry.joint_positions[k].second) = v;
    seen[k][side] = true;
  }
  for (int k = 0; k < joint_count; ++k) {
    if (!seen[k][0] || !seen[k][1]) reader.fail("joint " + std::to_string(k) + " is incomplete");
  }
  return geometry;
}

void writeEstimatesCsv(const std::string& imu_path, const std::string& joint_path, const StateLayout& layout,
                       const std::vector<double>& t, const std::vector<Eigen::VectorXd>& means)
{
  if (t.size() != means.size()) throw Error(ErrorCode::DimensionMismatch, "timestamps and estimates differ in length");
  std::ofstream imu_out = openOut(imu_path);
  std::ofstream joint_out = openOut(joint_path);
  imu_out << "t,imu,qw,qx,qy,qz,wx,wy,wz\n";
  joint_out << "t,joint,side,jx,jy,jz\n";
  for (std::size_t k = 0; k < means.size(); ++k) {
    const Eigen::VectorXd& m = means[k];
    for (int i = 0; i < layout.imuCount(); ++i) {
      const Quat q = quatFromMrp(Vec3(m.segment<3>(layout.orientation(i))));
      const Vec3 w = m.segment<3>(layout.angularVelocity(i));
      writeRow(imu_out, {t[k], double(i), q.w(), q.x(), q.y(), q.z(), w.x(), w.y(), w.z()});
    }
    for (int j = 0; j < layout.jointCount(); ++j) {
      for (int side = 0; side < 2; ++side) {
        const Vec3 p = m.segment<3>(layout.jointPosition(j, static_cast<JointSide>(side)));
        writeRow(joint_out, {t[k], double(j), double(side), p.x(), p.y(), p.z()});
      }
    }
  }
  if (!imu_out || !joint_out) throw Error(ErrorCode::IoError, "write failed: " + imu_path);
}

}  // namespace cfit
