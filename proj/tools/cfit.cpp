// Command-line front end: simulate, track, montecarlo, report.

#include <cfit/error.hpp>
#include <cfit/experiment.hpp>
#include <cfit/io.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kNumericalError = 4;

int exitCodeFor(cfit::ErrorCode code)
{
  switch (code) {
    case cfit::ErrorCode::ConfigError:
    case cfit::ErrorCode::TooFewImus:
    case cfit::ErrorCode::JointCountMismatch:
    case cfit::ErrorCode::SelfJoint:
    case cfit::ErrorCode::BadJointIndex:
    case cfit::ErrorCode::CyclicChain:
    case cfit::ErrorCode::DisconnectedChain:
    case cfit::ErrorCode::BadExternalIndex:
    case cfit::ErrorCode::InvalidSpec:
    case cfit::ErrorCode::EmptySpec:
    case cfit::ErrorCode::InvalidRate:
      return kConfigError;
    case cfit::ErrorCode::SingularNormalEquations:
      return kNumericalError;
    default:
      return kDataError;
  }
}

void writeText(const fs::path& path, const std::string& text)
{
  std::ofstream out(path);
  if (!out) throw cfit::Error(cfit::ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

void prepareDir(const fs::path& dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw cfit::Error(cfit::ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

json reportEnvelope(const char* kind, const cfit::ExperimentConfig& config)
{
  return {{"schema", cfit::kReportSchema}, {"kind", kind}, {"config", cfit::toJson(config)}};
}

cfit::ExperimentConfig loadWithOverrides(const std::string& path, std::optional<std::uint64_t> seed)
{
  cfit::ExperimentConfig config = cfit::loadConfig(path);
  if (seed) config.simulation.seed = *seed;
  return config;
}

int cmdSimulate(const std::string& config_path, const fs::path& out_dir, std::optional<std::uint64_t> seed)
{
  const cfit::ExperimentConfig config = loadWithOverrides(config_path, seed);
  const cfit::SimulatedTrial trial = cfit::makeTrial(config, config.simulation.seed);
  prepareDir(out_dir);
  cfit::writeMeasurementsCsv((out_dir / "measurements.csv").string(), trial.frames);
  cfit::writeOrientationCsv((out_dir / "orientation.csv").string(), trial.frames);
  cfit::writePosesCsv((out_dir / "poses.csv").string(), trial.poses);
  if (!trial.geometry.joint_positions.empty()) {
    cfit::writeGeometryCsv((out_dir / "geometry.csv").string(), trial.geometry);
  }
  writeText(out_dir / "effective_config.json", cfit::toJson(config).dump(2) + "\n");
  std::cout << "wrote " << trial.frames.size() << " frames x " << trial.imuCount() << " IMUs to " << out_dir.string()
            << "\n";
  return kOk;
}

int cmdTrack(const std::string& config_path, const fs::path& trial_dir, const fs::path& out_dir,
             std::optional<std::uint64_t> seed)
{
  const cfit::ExperimentConfig config = loadWithOverrides(config_path, seed);
  const cfit::ChainTopology topo = config.effectiveTopology();

  const std::vector<cfit::MeasurementFrame> frames = cfit::readMeasurements(
      (trial_dir / "measurements.csv").string(), (trial_dir / "orientation.csv").string());
  if (static_cast<int>(frames.front().accel.size()) != topo.imu_count) {
    throw cfit::Error(cfit::ErrorCode::DimensionMismatch,
                      "trial has " + std::to_string(frames.front().accel.size()) + " IMUs, config expects " +
                          std::to_string(topo.imu_count));
  }
  std::optional<std::vector<cfit::ImuPose>> poses;
  if (fs::exists(trial_dir / "poses.csv")) {
    poses = cfit::readPosesCsv((trial_dir / "poses.csv").string());
    if (poses->size() != frames.size()) {
      throw cfit::Error(cfit::ErrorCode::DimensionMismatch, "poses.csv and measurements.csv differ in length");
    }
  }
  std::optional<cfit::ChainGeometry> geometry;
  if (fs::exists(trial_dir / "geometry.csv")) {
    geometry = cfit::readGeometryCsv((trial_dir / "geometry.csv").string(), static_cast<int>(topo.joints.size()));
  }

  const cfit::FilterState initial = cfit::initialState(config, topo, poses ? &poses->front() : nullptr,
                                                       geometry ? &*geometry : nullptr, config.simulation.seed);
  const cfit::FilterRun run = cfit::runFilter(frames, topo, config.filter, config.solver, initial);

  std::vector<double> t;
  for (const cfit::MeasurementFrame& f : frames) t.push_back(f.t);
  prepareDir(out_dir);
  cfit::writeEstimatesCsv((out_dir / "imu_estimates.csv").string(), (out_dir / "joint_estimates.csv").string(),
                          initial.layout, t, run.means);

  const cfit::GroundTruth truth{poses ? &*poses : nullptr, geometry ? &*geometry : nullptr};
  cfit::TrialReport report = cfit::evaluateRun(config, topo, t, run, truth);
  report.seed = config.simulation.seed;

  json j = reportEnvelope("trial", config);
  j["trial"] = cfit::toJson(report);
  writeText(out_dir / "report.json", j.dump(2) + "\n");
  const std::string text = cfit::formatTrialReport(report);
  writeText(out_dir / "report.txt", text);
  std::string csv = "label,unit,batch,mae,drift\n";
  for (const cfit::BatchReport& b : report.errors) {
    csv += b.label + "," + cfit::displayUnit(b.label) + ",all," + cfit::formatNumber(cfit::displayValue(b.label, b.mae)) +
           "," + cfit::formatNumber(cfit::displayValue(b.label, b.drift)) + "\n";
    for (std::size_t k = 0; k < b.batches.size(); ++k) {
      csv += b.label + "," + cfit::displayUnit(b.label) + "," + std::to_string(k + 1) + "," +
             cfit::formatNumber(cfit::displayValue(b.label, b.batches[k].mae)) + ",\n";
    }
  }
  writeText(out_dir / "report.csv", csv);
  writeText(out_dir / "effective_config.json", cfit::toJson(config).dump(2) + "\n");
  std::cout << text;
  return kOk;
}

int cmdMonteCarlo(const std::string& config_path, std::optional<int> seeds, const fs::path& out_dir,
                  std::optional<std::uint64_t> seed)
{
  cfit::ExperimentConfig config = loadWithOverrides(config_path, seed);
  if (seeds) {
    if (*seeds < 1) throw cfit::Error(cfit::ErrorCode::ConfigError, "--seeds: must be >= 1");
    config.seeds = *seeds;
  }
  config.validate();
  const cfit::MonteCarloReport report = cfit::runMonteCarlo(config, cfit::workerCount(config));

  prepareDir(out_dir);
  json j = reportEnvelope("montecarlo", config);
  j.update(cfit::toJson(report));
  writeText(out_dir / "report.json", j.dump(2) + "\n");
  const std::string text = cfit::formatMonteCarloReport(report);
  writeText(out_dir / "report.txt", text);
  writeText(out_dir / "report.csv", cfit::monteCarloCsv(report));
  writeText(out_dir / "effective_config.json", cfit::toJson(config).dump(2) + "\n");
  std::cout << text;
  return report.failed_trials > 0 ? kNumericalError : kOk;
}

int cmdReport(const std::vector<std::string>& dirs, const std::string& out_dir)
{
  std::vector<cfit::ReportColumn> columns;
  for (const std::string& dir : dirs) {
    const fs::path path = fs::path(dir) / "report.json";
    std::ifstream in(path);
    if (!in) throw cfit::Error(cfit::ErrorCode::IoError, "cannot read " + path.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw cfit::Error(cfit::ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    columns.push_back({fs::path(dir).filename().empty() ? dir : fs::path(dir).filename().string(), j});
  }
  const cfit::ComparisonTable table = cfit::compareReports(columns);
  const std::string text = cfit::formatComparison(table);
  if (!out_dir.empty()) {
    prepareDir(out_dir);
    writeText(fs::path(out_dir) / "comparison.txt", text);
    writeText(fs::path(out_dir) / "comparison.csv", cfit::comparisonCsv(table));
  }
  std::cout << text;
  return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Calibration-free inertial tracking of kinematic chains"};
  app.require_subcommand(1);

  std::string config_path, out_dir, trial_dir, report_out;
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
  std::vector<std::string> dirs;

  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic trial");
  simulate->add_option("--config", config_path, "Experiment config (JSON)")->required();
  simulate->add_option("--out", out_dir, "Output directory")->required();
  simulate->add_option("--seed", seed, "Override simulation.seed");

  CLI::App* track = app.add_subcommand("track", "Run the filter on a trial directory");
  track->add_option("--config", config_path, "Experiment config (JSON)")->required();
  track->add_option("--trial", trial_dir, "Trial directory written by simulate")->required();
  track->add_option("--out", out_dir, "Output directory")->required();
  track->add_option("--seed", seed, "Override simulation.seed (joint initialization)");

  CLI::App* mc = app.add_subcommand("montecarlo", "Monte Carlo battery of simulate + track");
  mc->add_option("--config", config_path, "Experiment config (JSON)")->required();
  mc->add_option("--seeds", seeds, "Number of trials");
  mc->add_option("--out", out_dir, "Output directory")->required();
  mc->add_option("--seed", seed, "First seed");

  CLI::App* report = app.add_subcommand("report", "Side-by-side comparison of result directories");
  report->add_option("dirs", dirs, "Result directories")->required();
  report->add_option("--out", report_out, "Write comparison.csv/.txt here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (simulate->parsed()) return cmdSimulate(config_path, out_dir, seed);
    if (track->parsed()) return cmdTrack(config_path, trial_dir, out_dir, seed);
    if (mc->parsed()) return cmdMonteCarlo(config_path, seeds, out_dir, seed);
    if (report->parsed()) return cmdReport(dirs, report_out);
  } catch (const cfit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}
