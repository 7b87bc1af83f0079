#include <cfit/error.hpp>
#include <cfit/metrics.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace cfit {

double orientationError(const Mat3& estimate, const Mat3& truth)
{
  return rotationAngle(Mat3(truth * estimate.transpose()));
}

Mat3 relativeOrientation(const Mat3& orientation_i, const Mat3& orientation_j)
{
  return orientation_i.transpose() * orientation_j;
}

double jointPositionError(const Vec3& estimate, const Vec3& truth)
{
  return (truth - estimate).norm();
}

BatchReport batchMae(const ErrorSeries& series, double batch_length, double skip_initial)
{
  if (!(batch_length > 0.0)) throw Error(ErrorCode::SeriesTooShort, "batch length must be > 0");
  if (series.t.size() != series.values.size()) {
    throw Error(ErrorCode::DimensionMismatch, series.label + ": time and value counts differ");
  }
  if (series.t.size() < 2) throw Error(ErrorCode::SeriesTooShort, series.label + ": fewer than 2 samples");

  const double dt = series.t[1] - series.t[0];
  const double start_time = series.t.front() + skip_initial - 1e-9;
  const auto first = std::lower_bound(series.t.begin(), series.t.end(), start_time) - series.t.begin();
  const std::size_t count = series.t.size() - first;
  const double span = static_cast<double>(count) * dt;
  if (span < batch_length - 1e-9) {
    throw Error(ErrorCode::SeriesTooShort, series.label + ": " + std::to_string(span) +
                                               " s after skip, batch needs " + std::to_string(batch_length));
  }
  const std::size_t batches = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(span / batch_length + 0.5)));

  BatchReport report;
  report.label = series.label;
  double total = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t lo = first + b * count / batches;
    const std::size_t hi = first + (b + 1) * count / batches;
    Batch batch;
    batch.start = series.t[lo];
    batch.end = series.t[hi - 1] + dt;
    batch.samples = hi - lo;
    const double sum = std::accumulate(series.values.begin() + lo, series.values.begin() + hi, 0.0,
                                       [](double acc, double v) { return acc + std::abs(v); });
    batch.mae = sum / static_cast<double>(batch.samples);
    total += sum;
    report.batches.push_back(batch);
  }
  report.mae = total / static_cast<double>(count);
  report.drift = report.batches.back().mae - report.batches.front().mae;
  return report;
}

std::optional<double> convergenceTime(const ErrorSeries& series, double threshold, double hold)
{
  std::optional<double> candidate;
  for (std::size_t k = 0; k < series.values.size(); ++k) {
    if (series.values[k] < threshold) {
      if (!candidate) candidate = series.t[k];
      if (series.t[k] - *candidate >= hold - 1e-9) return candidate;
    } else {
      candidate.reset();
    }
  }
  return std::nullopt;
}

double median(std::vector<double> values)
{
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

double standardDeviation(const std::vector<double>& values)
{
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return std::sqrt(sq / static_cast<double>(values.size() - 1));
}

std::vector<AggregateStat> aggregateTrials(const std::vector<std::vector<BatchReport>>& trials)
{
  if (trials.empty()) throw Error(ErrorCode::EmptyInput, "no trials to aggregate");

  std::vector<std::string> order;
  std::map<std::string, std::vector<const BatchReport*>> by_label;
  for (const auto& trial : trials) {
    for (const BatchReport& r : trial) {
      auto [it, inserted] = by_label.try_emplace(r.label);
      if (inserted) order.push_back(r.label);
      it->second.push_back(&r);
    }
  }

  std::vector<AggregateStat> out;
  for (const std::string& label : order) {
    const auto& reports = by_label[label];
    AggregateStat stat;
    stat.label = label;
    stat.trials = reports.size();
    std::vector<double> maes;
    std::size_t batch_count = reports.front()->batches.size();
    for (const BatchReport* r : reports) {
      maes.push_back(r->mae);
      batch_count = std::min(batch_count, r->batches.size());
    }
    stat.median = median(maes);
    stat.stddev = standardDeviation(maes);
    for (std::size_t b = 0; b < batch_count; ++b) {
      std::vector<double> values;
      for (const BatchReport* r : reports) values.push_back(r->batches[b].mae);
      stat.batch_median.push_back(median(values));
      stat.batch_stddev.push_back(standardDeviation(values));
    }
    out.push_back(std::move(stat));
  }
  return out;
}

}  // namespace cfit
