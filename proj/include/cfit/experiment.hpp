#pragma once

#include <cfit/filter.hpp>
#include <cfit/metrics.hpp>
#include <cfit/simulator.hpp>

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cfit {

enum class SourceKind { Manipulator, Poses };
enum class ManipulatorPreset { Serial, LowerBody };
enum class OrientationInit { Identity, Truth };

struct InitConfig {
  OrientationInit orientation = OrientationInit::Truth;
  // Random rotation applied to every initial orientation, redrawn per seed.
  bool perturb_orientation = false;
  double perturbation_deg = 5.0;
  bool joints_from_truth = false;
  double joint_range = 0.3;

  bool operator==(const InitConfig&) const = default;
};

struct ExperimentConfig {
  std::optional<ChainTopology> topology;  // required for pose input, checked otherwise
  SourceKind source = SourceKind::Manipulator;
  ManipulatorPreset preset = ManipulatorPreset::Serial;
  DefaultManipulatorOptions manipulator;
  int external_imu = 0;
  std::string pose_path;
  std::string geometry_path;  // optional ground-truth joint positions for pose input

  NoiseSpec simulation;
  NoiseConfig filter;
  SolverConfig solver;
  InitConfig init;

  double duration = 120.0;
  double rate = 100.0;
  int seeds = 10;
  double batch_length = 55.0;
  double skip_initial = 10.0;
  double convergence_threshold = 0.02;
  double convergence_hold = 2.0;
  int workers = 1;
  std::string output_dir = "out";

  /// Throws ConfigError with the offending field path.
  void validate() const;
  /// Topology implied by the source, checked against `topology` when both exist.
  ChainTopology effectiveTopology() const;
  ManipulatorSpec manipulatorSpec() const;

  bool operator==(const ExperimentConfig&) const;
};

nlohmann::json toJson(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys and type errors throw ConfigError.
ExperimentConfig configFromJson(const nlohmann::json& j);
ExperimentConfig loadConfig(const std::string& path);

struct RuntimeStats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  std::size_t steps = 0;
};
RuntimeStats runtimeStats(const std::vector<double>& step_seconds);

struct ConvergenceEntry {
  std::string label;
  std::optional<double> time;
};

struct TrialReport {
  std::uint64_t seed = 0;
  std::vector<BatchReport> errors;
  std::vector<ConvergenceEntry> convergence;
  RuntimeStats runtime;
  long solver_failures = 0;
  bool failed = false;
  std::string failure;
};

/// Ground truth available for evaluation; either pointer may be null.
struct GroundTruth {
  const std::vector<ImuPose>* poses = nullptr;
  const ChainGeometry* geometry = nullptr;
};

/**
 * Error series of a filter run against ground truth. Labels:
 *   abs/imu<i>, rel/joint<k>(<a>-<b>), pos/joint<k>(<a>-<b>)/imu<a|b>.
 * Orientation values in rad, positions in m.
 */
std::vector<ErrorSeries> errorSeries(const ChainTopology& topo, const std::vector<double>& t,
                                     const std::vector<Eigen::VectorXd>& means, const GroundTruth& truth);

TrialReport evaluateRun(const ExperimentConfig& config, const ChainTopology& topo, const std::vector<double>& t,
                        const FilterRun& run, const GroundTruth& truth);

/// Builds the trial for a seed: simulated manipulator or re-simulated poses.
SimulatedTrial makeTrial(const ExperimentConfig& config, std::uint64_t seed);

/// Initial filter state following config.init; `truth` may be null for identity init.
FilterState initialState(const ExperimentConfig& config, const ChainTopology& topo, const ImuPose* truth,
                         const ChainGeometry* geometry, std::uint64_t seed);

struct TrialOutcome {
  SimulatedTrial trial;
  FilterRun run;
  TrialReport report;
};

/// simulate + track + evaluate. Numerical failures are recorded in the report.
TrialOutcome runTrial(const ExperimentConfig& config, std::uint64_t seed);

struct MonteCarloReport {
  std::vector<TrialReport> trials;
  std::vector<AggregateStat> aggregate;
  RuntimeStats runtime;
  int failed_trials = 0;
};

/// Worker count from CFIT_WORKERS when set, else the config value.
int workerCount(const ExperimentConfig& config);

/// Seeds simulation.seed .. simulation.seed + seeds - 1.
MonteCarloReport runMonteCarlo(const ExperimentConfig& config, int workers);

inline constexpr const char* kReportSchema = "cfit-report/1";

nlohmann::json toJson(const TrialReport& report);
TrialReport trialReportFromJson(const nlohmann::json& j);
nlohmann::json toJson(const MonteCarloReport& report);

/// Text and CSV renderings; orientations in degrees, positions in cm.
std::string formatTrialReport(const TrialReport& report);
std::string formatMonteCarloReport(const MonteCarloReport& report);
std::string monteCarloCsv(const MonteCarloReport& report);

struct ReportColumn {
  std::string name;
  nlohmann::json report;  // as written by toJson
};

struct ComparisonTable {
  std::vector<std::string> columns;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;  // [label][column], display units
};

/// Side-by-side MAE table (median MAE for Monte Carlo reports). Throws SchemaMismatch.
ComparisonTable compareReports(const std::vector<ReportColumn>& reports);
std::string formatComparison(const ComparisonTable& table);
std::string comparisonCsv(const ComparisonTable& table);

/// Human-facing scale: degrees for orientation labels, centimeters for positions.
double displayValue(const std::string& label, double value);
std::string displayUnit(const std::string& label);

}  // namespace cfit
