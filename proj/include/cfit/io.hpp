#pragma once

#include <cfit/chain.hpp>
#include <cfit/filter.hpp>
#include <cfit/measurement.hpp>

#include <string>
#include <vector>

namespace cfit {

/// Shortest text that parses back to the same double.
std::string formatNumber(double value);

/// `t,imu,px,py,pz,qw,qx,qy,qz`
void writePosesCsv(const std::string& path, const std::vector<ImuPose>& poses);
/// Rows grouped by time; every instant must list IMUs 0..n-1. Throws ParseError with line numbers.
std::vector<ImuPose> readPosesCsv(const std::string& path);

/// `t,imu,ax,ay,az,gx,gy,gz`
void writeMeasurementsCsv(const std::string& path, const std::vector<MeasurementFrame>& frames);
/// `t,qw,qx,qy,qz`
void writeOrientationCsv(const std::string& path, const std::vector<MeasurementFrame>& frames);
/// Joins the two files above back into frames. Timestamps must match row by row.
std::vector<MeasurementFrame> readMeasurements(const std::string& measurements_path,
                                               const std::string& orientation_path);

/// `joint,side,jx,jy,jz` (side 0 = first IMU, 1 = second)
void writeGeometryCsv(const std::string& path, const ChainGeometry& geometry);
ChainGeometry readGeometryCsv(const std::string& path, int joint_count);

/// `t,imu,qw,qx,qy,qz,wx,wy,wz` and `t,joint,side,jx,jy,jz`
void writeEstimatesCsv(const std::string& imu_path, const std::string& joint_path, const StateLayout& layout,
                       const std::vector<double>& t, const std::vector<Eigen::VectorXd>& means);

}  // namespace cfit
