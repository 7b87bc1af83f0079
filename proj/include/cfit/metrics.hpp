#pragma once

#include <cfit/chain.hpp>

#include <optional>
#include <string>
#include <vector>

namespace cfit {

/// Error angle of est relative to truth: angle(truth * est^T), in [0, pi].
double orientationError(const Mat3& estimate, const Mat3& truth);

/// R^{I_i I_j} = (R^{N I_i})^T R^{N I_j}.
Mat3 relativeOrientation(const Mat3& orientation_i, const Mat3& orientation_j);

double jointPositionError(const Vec3& estimate, const Vec3& truth);

/// Error values over time; radians for orientations, meters for positions.
struct ErrorSeries {
  std::string label;
  std::vector<double> t;
  std::vector<double> values;
};

struct Batch {
  double start = 0.0;
  double end = 0.0;
  double mae = 0.0;
  std::size_t samples = 0;
};

struct BatchReport {
  std::string label;
  std::vector<Batch> batches;
  double mae = 0.0;    // over the whole evaluated interval
  double drift = 0.0;  // last batch MAE - first batch MAE
};

/**
 * Drops the first `skip_initial` seconds, then splits the rest into
 * round(span / batch_length) equally sized batches (at least one). Throws
 * SeriesTooShort if less than one batch length remains.
 */
BatchReport batchMae(const ErrorSeries& series, double batch_length, double skip_initial);

/// First time after which the error stays below `threshold` for `hold` seconds.
std::optional<double> convergenceTime(const ErrorSeries& series, double threshold, double hold);

struct AggregateStat {
  std::string label;
  double median = 0.0;
  double stddev = 0.0;
  std::vector<double> batch_median;
  std::vector<double> batch_stddev;
  std::size_t trials = 0;
};

double median(std::vector<double> values);
/// Sample standard deviation; 0 for fewer than two values.
double standardDeviation(const std::vector<double>& values);

/**
 * Median and standard deviation of the per-trial MAEs for every label, plus the same
 * statistics per batch index. Labels are reported in first-seen order.
 */
std::vector<AggregateStat> aggregateTrials(const std::vector<std::vector<BatchReport>>& trials);

}  // namespace cfit
