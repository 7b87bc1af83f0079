#include <cfit/error.hpp>
#include <cfit/experiment.hpp>
#include <cfit/io.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace cfit {

using nlohmann::json;

namespace {

[[noreturn]] void configError(const std::string& path, const std::string& message)
{
  throw Error(ErrorCode::ConfigError, path + ": " + message);
}

/// Reads keys of one JSON object, remembering which were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path))
  {
    if (!j_.is_object()) configError(path_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out)
  {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      configError(path_ + "." + key, e.what());
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  void skip(const char* key) { seen_.insert(key); }

  Section child(const char* key)
  {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, path_ + "." + key);
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const
  {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) configError(path_ + "." + it.key(), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Enum>
Enum parseEnum(const std::string& path, const std::string& value,
               std::initializer_list<std::pair<const char*, Enum>> options)
{
  std::string names;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    names += std::string(names.empty() ? "" : ", ") + name;
  }
  configError(path, "'" + value + "' is not one of " + names);
}

const char* sourceName(SourceKind s) { return s == SourceKind::Manipulator ? "manipulator" : "poses"; }
const char* presetName(ManipulatorPreset p) { return p == ManipulatorPreset::Serial ? "serial" : "lower_body"; }
const char* initName(OrientationInit o) { return o == OrientationInit::Truth ? "truth" : "identity"; }
const char* jacobianName(JacobianMode m) { return m == JacobianMode::Analytic ? "analytic" : "finite_difference"; }

json topologyJson(const ChainTopology& topo)
{
  json joints = json::array();
  for (const Joint& jt : topo.joints) joints.push_back({jt.first, jt.second});
  return {{"imu_count", topo.imu_count}, {"joints", joints}, {"external_imu", topo.external_imu}};
}

bool startsWith(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

std::string formatFixed(double v, int precision)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

std::uint64_t mixSeed(std::uint64_t seed, std::uint64_t stream)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

// ---------------------------------------------------------------------------
// config

void ExperimentConfig::validate() const
{
  if (!(duration > 0.0)) configError("trial.duration", "must be > 0");
  if (!(rate > 0.0)) configError("trial.rate", "must be > 0");
  if (seeds < 1) configError("evaluation.seeds", "must be >= 1");
  if (!(batch_length > 0.0)) configError("evaluation.batch_length", "must be > 0");
  if (skip_initial < 0.0) configError("evaluation.skip_initial", "must be >= 0");
  if (!(convergence_threshold > 0.0)) configError("evaluation.convergence_threshold", "must be > 0");
  if (convergence_hold < 0.0) configError("evaluation.convergence_hold", "must be >= 0");
  if (workers < 1) configError("workers", "must be >= 1");
  if (simulation.gyro_variance < 0.0) configError("simulation.gyro_variance", "must be >= 0");
  if (simulation.accel_variance < 0.0) configError("simulation.accel_variance", "must be >= 0");
  if (init.perturbation_deg < 0.0) configError("init.perturbation_deg", "must be >= 0");
  if (!(init.joint_range > 0.0)) configError("init.joint_range", "must be > 0");
  if (source == SourceKind::Manipulator) {
    if (manipulator.segment_count < 2) configError("source.segment_count", "must be >= 2");
    if (!(manipulator.lever_arm > 0.0)) configError("source.lever_arm", "must be > 0");
  } else {
    if (pose_path.empty()) configError("source.pose_path", "required for pose input");
    if (!topology) configError("topology", "required for pose input");
  }
  try {
    filter.validate();
  } catch (const Error& e) {
    configError("filter", e.what());
  }
  try {
    solver.validate();
  } catch (const Error& e) {
    configError("solver", e.what());
  }
  const ChainTopology topo = effectiveTopology();
  try {
    validateTopology(topo);
  } catch (const Error& e) {
    configError("topology", e.what());
  }
}

ManipulatorSpec ExperimentConfig::manipulatorSpec() const
{
  ManipulatorSpec spec =
      preset == ManipulatorPreset::Serial ? defaultManipulator(manipulator) : lowerBodyManipulator(manipulator);
  spec.external_imu = external_imu;
  return spec;
}

ChainTopology ExperimentConfig::effectiveTopology() const
{
  if (source == SourceKind::Poses) {
    if (!topology) configError("topology", "required for pose input");
    return *topology;
  }
  ManipulatorSpec spec;
  try {
    spec = manipulatorSpec();
    spec.validate();
  } catch (const Error& e) {
    configError("source", e.what());
  }
  const ChainTopology implied = spec.topology();
  if (topology && !(*topology == implied)) {
    configError("topology", "does not match the manipulator (" + std::to_string(implied.imu_count) + " IMUs, " +
                                std::to_string(implied.joints.size()) + " joints, external " +
                                std::to_string(implied.external_imu) + ")");
  }
  return implied;
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const
{
  return toJson(*this) == toJson(o);
}

json toJson(const ExperimentConfig& c)
{
  json j;
  j["topology"] = c.topology ? topologyJson(*c.topology) : json(nullptr);
  j["source"] = {{"kind", sourceName(c.source)},
                 {"preset", presetName(c.preset)},
                 {"segment_count", c.manipulator.segment_count},
                 {"lever_arm", c.manipulator.lever_arm},
                 {"amplitude", c.manipulator.amplitude},
                 {"frequencies", c.manipulator.frequencies},
                 {"external_imu", c.external_imu},
                 {"pose_path", c.pose_path},
                 {"geometry_path", c.geometry_path}};
  j["simulation"] = {{"gyro_variance", c.simulation.gyro_variance},
                     {"accel_variance", c.simulation.accel_variance},
                     {"seed", c.simulation.seed}};
  j["filter"] = {{"q_omega", c.filter.q_omega},
                 {"sigma_omega", c.filter.sigma_omega},
                 {"sigma_accel", c.filter.sigma_accel},
                 {"sigma_orientation", c.filter.sigma_orientation},
                 {"p0_mrp", c.filter.p0_mrp},
                 {"p0_omega", c.filter.p0_omega},
                 {"p0_joint", c.filter.p0_joint}};
  j["solver"] = {{"max_iterations", c.solver.max_iterations},
                 {"step_tolerance", c.solver.step_tolerance},
                 {"jacobian", jacobianName(c.solver.jacobian)},
                 {"fd_step", c.solver.fd_step}};
  j["init"] = {{"orientation", initName(c.init.orientation)},
               {"perturb_orientation", c.init.perturb_orientation},
               {"perturbation_deg", c.init.perturbation_deg},
               {"joints_from_truth", c.init.joints_from_truth},
               {"joint_range", c.init.joint_range}};
  j["trial"] = {{"duration", c.duration}, {"rate", c.rate}};
  j["evaluation"] = {{"seeds", c.seeds},
                     {"batch_length", c.batch_length},
                     {"skip_initial", c.skip_initial},
                     {"convergence_threshold", c.convergence_threshold},
                     {"convergence_hold", c.convergence_hold}};
  j["workers"] = c.workers;
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig configFromJson(const json& j)
{
  ExperimentConfig c;
  Section root(j, "config");

  if (root.has("topology")) {
    Section t = root.child("topology");
    ChainTopology topo;
    std::vector<std::vector<int>> joints;
    t.get("imu_count", topo.imu_count);
    t.get("joints", joints);
    t.get("external_imu", topo.external_imu);
    t.finish();
    for (std::size_t k = 0; k < joints.size(); ++k) {
      if (joints[k].size() != 2) configError(t.path("joints") + "[" + std::to_string(k) + "]", "expected [i, j]");
      topo.joints.push_back(Joint{joints[k][0], joints[k][1]});
    }
    c.topology = topo;
  } else {
    root.skip("topology");
  }

  {
    Section s = root.child("source");
    std::string kind = sourceName(c.source);
    std::string preset = presetName(c.preset);
    s.get("kind", kind);
    s.get("preset", preset);
    c.source = parseEnum<SourceKind>(s.path("kind"), kind,
                                     {{"manipulator", SourceKind::Manipulator}, {"poses", SourceKind::Poses}});
    c.preset = parseEnum<ManipulatorPreset>(
        s.path("preset"), preset, {{"serial", ManipulatorPreset::Serial}, {"lower_body", ManipulatorPreset::LowerBody}});
    s.get("segment_count", c.manipulator.segment_count);
    s.get("lever_arm", c.manipulator.lever_arm);
    s.get("amplitude", c.manipulator.amplitude);
    s.get("frequencies", c.manipulator.frequencies);
    s.get("external_imu", c.external_imu);
    s.get("pose_path", c.pose_path);
    s.get("geometry_path", c.geometry_path);
    s.finish();
  }
  {
    Section s = root.child("simulation");
    s.get("gyro_variance", c.simulation.gyro_variance);
    s.get("accel_variance", c.simulation.accel_variance);
    s.get("seed", c.simulation.seed);
    s.finish();
  }
  {
    Section s = root.child("filter");
    s.get("q_omega", c.filter.q_omega);
    s.get("sigma_omega", c.filter.sigma_omega);
    s.get("sigma_accel", c.filter.sigma_accel);
    s.get("sigma_orientation", c.filter.sigma_orientation);
    s.get("p0_mrp", c.filter.p0_mrp);
    s.get("p0_omega", c.filter.p0_omega);
    s.get("p0_joint", c.filter.p0_joint);
    s.finish();
  }
  {
    Section s = root.child("solver");
    std::string jac = jacobianName(c.solver.jacobian);
    s.get("max_iterations", c.solver.max_iterations);
    s.get("step_tolerance", c.solver.step_tolerance);
    s.get("jacobian", jac);
    s.get("fd_step", c.solver.fd_step);
    s.finish();
    c.solver.jacobian = parseEnum<JacobianMode>(
        s.path("jacobian"), jac,
        {{"analytic", JacobianMode::Analytic}, {"finite_difference", JacobianMode::FiniteDifference}});
  }
  {
    Section s = root.child("init");
    std::string orientation = initName(c.init.orientation);
    s.get("orientation", orientation);
    s.get("perturb_orientation", c.init.perturb_orientation);
    s.get("perturbation_deg", c.init.perturbation_deg);
    s.get("joints_from_truth", c.init.joints_from_truth);
    s.get("joint_range", c.init.joint_range);
    s.finish();
    c.init.orientation = parseEnum<OrientationInit>(
        s.path("orientation"), orientation,
        {{"truth", OrientationInit::Truth}, {"identity", OrientationInit::Identity}});
  }
  {
    Section s = root.child("trial");
    s.get("duration", c.duration);
    s.get("rate", c.rate);
    s.finish();
  }
  {
    Section s = root.child("evaluation");
    s.get("seeds", c.seeds);
    s.get("batch_length", c.batch_length);
    s.get("skip_initial", c.skip_initial);
    s.get("convergence_threshold", c.convergence_threshold);
    s.get("convergence_hold", c.convergence_hold);
    s.finish();
  }
  root.get("workers", c.workers);
  root.get("output_dir", c.output_dir);
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig loadConfig(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
  return configFromJson(j);
}

// ---------------------------------------------------------------------------
// evaluation

RuntimeStats runtimeStats(const std::vector<double>& step_seconds)
{
  if (step_seconds.empty()) throw Error(ErrorCode::EmptyInput, "no runtime samples");
  RuntimeStats s;
  s.steps = step_seconds.size();
  double total = 0.0;
  for (double v : step_seconds) total += v;
  s.mean = total / static_cast<double>(s.steps);
  s.median = median(step_seconds);
  std::vector<double> sorted = step_seconds;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t idx = std::min(sorted.size() - 1, static_cast<std::size_t>(std::ceil(0.95 * sorted.size())) - 1);
  s.p95 = sorted[idx];
  return s;
}

std::vector<ErrorSeries> errorSeries(const ChainTopology& topo, const std::vector<double>& t,
                                     const std::vector<Eigen::VectorXd>& means, const GroundTruth& truth)
{
  if (t.size() != means.size()) throw Error(ErrorCode::DimensionMismatch, "timestamps and estimates differ in length");
  const StateLayout layout(topo);
  std::vector<ErrorSeries> out;
  const int n = topo.imu_count;
  const int joints = static_cast<int>(topo.joints.size());

  auto jointName = [&](int k) {
    return "joint" + std::to_string(k) + "(" + std::to_string(topo.joints[k].first) + "-" +
           std::to_string(topo.joints[k].second) + ")";
  };

  if (truth.poses) {
    if (truth.poses->size() != means.size()) {
      throw Error(ErrorCode::DimensionMismatch, "ground truth and estimates differ in length");
    }
    std::vector<ErrorSeries> abs(n), rel(joints);
    for (int i = 0; i < n; ++i) abs[i].label = "abs/imu" + std::to_string(i);
    for (int k = 0; k < joints; ++k) rel[k].label = "rel/" + jointName(k);
    for (std::size_t s = 0; s < means.size(); ++s) {
      const ImuPose& pose = (*truth.poses)[s];
      if (static_cast<int>(pose.orientation.size()) != n) {
        throw Error(ErrorCode::DimensionMismatch, "ground truth pose has the wrong IMU count");
      }
      std::vector<Mat3> est(n), ref(n);
      for (int i = 0; i < n; ++i) {
        est[i] = rotationFromMrp(Vec3(means[s].segment<3>(layout.orientation(i))));
        ref[i] = rotationMatrix(pose.orientation[i]);
        abs[i].t.push_back(t[s]);
        abs[i].values.push_back(orientationError(est[i], ref[i]));
      }
      for (int k = 0; k < joints; ++k) {
        const Joint& jt = topo.joints[k];
        rel[k].t.push_back(t[s]);
        rel[k].values.push_back(orientationError(relativeOrientation(est[jt.first], est[jt.second]),
                                                 relativeOrientation(ref[jt.first], ref[jt.second])));
      }
    }
    out.insert(out.end(), abs.begin(), abs.end());
    out.insert(out.end(), rel.begin(), rel.end());
  }

  if (truth.geometry && static_cast<int>(truth.geometry->joint_positions.size()) == joints) {
    for (int k = 0; k < joints; ++k) {
      for (JointSide side : {JointSide::First, JointSide::Second}) {
        const int imu = side == JointSide::First ? topo.joints[k].first : topo.joints[k].second;
        ErrorSeries series;
        series.label = "pos/" + jointName(k) + "/imu" + std::to_string(imu);
        const Vec3& ref = truth.geometry->at(k, side);
        for (std::size_t s = 0; s < means.size(); ++s) {
          series.t.push_back(t[s]);
          series.values.push_back(jointPositionError(Vec3(means[s].segment<3>(layout.jointPosition(k, side))), ref));
        }
        out.push_back(std::move(series));
      }
    }
  }
  return out;
}

TrialReport evaluateRun(const ExperimentConfig& config, const ChainTopology& topo, const std::vector<double>& t,
                        const FilterRun& run, const GroundTruth& truth)
{
  TrialReport report;
  report.runtime = runtimeStats(run.step_seconds);
  report.solver_failures = run.nonconverged_steps;
  for (ErrorSeries& series : errorSeries(topo, t, run.means, truth)) {
    report.errors.push_back(batchMae(series, config.batch_length, config.skip_initial));
    if (startsWith(series.label, "pos/")) {
      ErrorSeries shifted = series;
      for (double& v : shifted.t) v -= series.t.front();
      report.convergence.push_back(
          {series.label, convergenceTime(shifted, config.convergence_threshold, config.convergence_hold)});
    }
  }
  return report;
}

SimulatedTrial makeTrial(const ExperimentConfig& config, std::uint64_t seed)
{
  NoiseSpec noise = config.simulation;
  noise.seed = seed;
  if (config.source == SourceKind::Manipulator) {
    return simulateManipulator(config.manipulatorSpec(), config.duration, config.rate, noise);
  }
  const ChainTopology topo = config.effectiveTopology();
  SimulatedTrial trial = resimulateFromPoses(readPosesCsv(config.pose_path), topo, noise);
  if (!config.geometry_path.empty()) {
    trial.geometry = readGeometryCsv(config.geometry_path, static_cast<int>(topo.joints.size()));
  }
  return trial;
}

FilterState initialState(const ExperimentConfig& config, const ChainTopology& topo, const ImuPose* truth,
                         const ChainGeometry* geometry, std::uint64_t seed)
{
  std::vector<Vec3> mrps(topo.imu_count, Vec3::Zero());
  if (config.init.orientation == OrientationInit::Truth) {
    if (!truth) throw Error(ErrorCode::ConfigError, "init.orientation: 'truth' needs ground-truth poses");
    if (static_cast<int>(truth->orientation.size()) != topo.imu_count) {
      throw Error(ErrorCode::DimensionMismatch, "ground truth pose has the wrong IMU count");
    }
    for (int i = 0; i < topo.imu_count; ++i) mrps[i] = mrpFromQuat(truth->orientation[i]);
  }
  if (config.init.perturb_orientation) {
    std::mt19937_64 engine(mixSeed(seed, 2));
    std::normal_distribution<double> normal;
    const double angle = config.init.perturbation_deg * M_PI / 180.0;
    for (Vec3& chi : mrps) {
      Vec3 axis(normal(engine), normal(engine), normal(engine));
      axis.normalize();
      chi = mrpFromQuat(Quat(quatFromMrp(chi) * quatFromRotationVector(Vec3(angle * axis))));
    }
  }
  JointInit joints;
  joints.seed = mixSeed(seed, 1);
  joints.range = config.init.joint_range;
  if (config.init.joints_from_truth) {
    if (!geometry || geometry->joint_positions.empty()) {
      throw Error(ErrorCode::ConfigError, "init.joints_from_truth: no ground-truth joint positions");
    }
    joints.explicit_positions = *geometry;
  }
  return initState(topo, config.filter, mrps, joints);
}

TrialOutcome runTrial(const ExperimentConfig& config, std::uint64_t seed)
{
  TrialOutcome out;
  out.trial = makeTrial(config, seed);
  const ChainTopology& topo = out.trial.topology;
  const ChainGeometry* geometry = out.trial.geometry.joint_positions.empty() ? nullptr : &out.trial.geometry;
  const FilterState initial = initialState(config, topo, &out.trial.poses.front(), geometry, seed);
  out.report.seed = seed;
  try {
    out.run = runFilter(out.trial.frames, topo, config.filter, config.solver, initial);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularNormalEquations) throw;
    out.report.failed = true;
    out.report.failure = e.what();
    return out;
  }
  std::vector<double> t;
  for (const MeasurementFrame& f : out.trial.frames) t.push_back(f.t);
  TrialReport report = evaluateRun(config, topo, t, out.run, GroundTruth{&out.trial.poses, geometry});
  report.seed = seed;
  out.report = std::move(report);
  return out;
}

int workerCount(const ExperimentConfig& config)
{
  if (const char* env = std::getenv("CFIT_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw Error(ErrorCode::ConfigError, "CFIT_WORKERS: expected a positive integer");
    return static_cast<int>(v);
  }
  return config.workers;
}

MonteCarloReport runMonteCarlo(const ExperimentConfig& config, int workers)
{
  config.validate();
  const int n = config.seeds;
  MonteCarloReport report;
  report.trials.resize(n);

  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      const int idx = next.fetch_add(1);
      if (idx >= n) return;
      try {
        report.trials[idx] = runTrial(config, config.simulation.seed + static_cast<std::uint64_t>(idx)).report;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  const int threads = std::max(1, std::min(workers, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<std::vector<BatchReport>> ok;
  std::vector<double> step_medians;
  for (const TrialReport& t : report.trials) {
    if (t.failed) {
      ++report.failed_trials;
      continue;
    }
    ok.push_back(t.errors);
    step_medians.push_back(t.runtime.median);
  }
  if (!ok.empty()) {
    report.aggregate = aggregateTrials(ok);
    // Across-trial summary of the per-trial statistics.
    std::vector<double> means, p95s;
    for (const TrialReport& t : report.trials) {
      if (t.failed) continue;
      means.push_back(t.runtime.mean);
      p95s.push_back(t.runtime.p95);
      report.runtime.steps += t.runtime.steps;
    }
    report.runtime.mean = median(means);
    report.runtime.median = median(step_medians);
    report.runtime.p95 = median(p95s);
  }
  return report;
}

// ---------------------------------------------------------------------------
// reports

double displayValue(const std::string& label, double value)
{
  return startsWith(label, "pos/") ? value * 100.0 : value * 180.0 / M_PI;
}

std::string displayUnit(const std::string& label) { return startsWith(label, "pos/") ? "cm" : "deg"; }

namespace {

json runtimeJson(const RuntimeStats& r)
{
  return {{"mean_ms", r.mean * 1e3}, {"median_ms", r.median * 1e3}, {"p95_ms", r.p95 * 1e3}, {"steps", r.steps}};
}

RuntimeStats runtimeFromJson(const json& j)
{
  RuntimeStats r;
  r.mean = j.at("mean_ms").get<double>() * 1e-3;
  r.median = j.at("median_ms").get<double>() * 1e-3;
  r.p95 = j.at("p95_ms").get<double>() * 1e-3;
  r.steps = j.at("steps").get<std::size_t>();
  return r;
}

}  // namespace

json toJson(const TrialReport& r)
{
  json errors = json::array();
  for (const BatchReport& b : r.errors) {
    json batches = json::array();
    for (const Batch& x : b.batches) {
      batches.push_back({{"start", x.start}, {"end", x.end}, {"mae", x.mae}, {"samples", x.samples}});
    }
    errors.push_back({{"label", b.label}, {"mae", b.mae}, {"drift", b.drift}, {"batches", batches}});
  }
  json conv = json::array();
  for (const ConvergenceEntry& c : r.convergence) {
    conv.push_back({{"label", c.label}, {"time", c.time ? json(*c.time) : json(nullptr)}});
  }
  return {{"seed", r.seed},
          {"errors", errors},
          {"convergence", conv},
          {"runtime", runtimeJson(r.runtime)},
          {"solver_failures", r.solver_failures},
          {"failed", r.failed},
          {"failure", r.failure}};
}

TrialReport trialReportFromJson(const json& j)
{
  try {
    TrialReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const json& e : j.at("errors")) {
      BatchReport b;
      b.label = e.at("label").get<std::string>();
      b.mae = e.at("mae").get<double>();
      b.drift = e.at("drift").get<double>();
      for (const json& x : e.at("batches")) {
        b.batches.push_back(Batch{x.at("start").get<double>(), x.at("end").get<double>(), x.at("mae").get<double>(),
                                  x.at("samples").get<std::size_t>()});
      }
      r.errors.push_back(std::move(b));
    }
    for (const json& c : j.at("convergence")) {
      ConvergenceEntry entry{c.at("label").get<std::string>(), std::nullopt};
      if (!c.at("time").is_null()) entry.time = c.at("time").get<double>();
      r.convergence.push_back(entry);
    }
    r.runtime = runtimeFromJson(j.at("runtime"));
    r.solver_failures = j.at("solver_failures").get<long>();
    r.failed = j.at("failed").get<bool>();
    r.failure = j.at("failure").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("trial report: ") + e.what());
  }
}

json toJson(const MonteCarloReport& r)
{
  json trials = json::array();
  for (const TrialReport& t : r.trials) trials.push_back(toJson(t));
  json aggregate = json::array();
  for (const AggregateStat& a : r.aggregate) {
    aggregate.push_back({{"label", a.label},
                         {"median", a.median},
                         {"stddev", a.stddev},
                         {"batch_median", a.batch_median},
                         {"batch_stddev", a.batch_stddev},
                         {"trials", a.trials}});
  }
  return {{"trials", trials},
          {"aggregate", aggregate},
          {"runtime", runtimeJson(r.runtime)},
          {"failed_trials", r.failed_trials}};
}

std::string formatTrialReport(const TrialReport& r)
{
  std::ostringstream out;
  out << "seed " << r.seed << "\n";
  if (r.failed) {
    out << "FAILED: " << r.failure << "\n";
    return out.str();
  }
  out << "label                          unit      MAE    drift  batches\n";
  for (const BatchReport& b : r.errors) {
    std::string label = b.label;
    label.resize(std::max<std::size_t>(label.size(), 30), ' ');
    out << label << " " << displayUnit(b.label) << "  " << formatFixed(displayValue(b.label, b.mae), 4) << "  "
        << formatFixed(displayValue(b.label, b.drift), 4) << " ";
    for (const Batch& x : b.batches) out << " " << formatFixed(displayValue(b.label, x.mae), 4);
    out << "\n";
  }
  for (const ConvergenceEntry& c : r.convergence) {
    out << "convergence " << c.label << ": " << (c.time ? formatFixed(*c.time, 2) + " s" : "not converged") << "\n";
  }
  out << "runtime per step: mean " << formatFixed(r.runtime.mean * 1e3, 4) << " ms, median "
      << formatFixed(r.runtime.median * 1e3, 4) << " ms, p95 " << formatFixed(r.runtime.p95 * 1e3, 4) << " ms over "
      << r.runtime.steps << " steps\n";
  out << "solver steps without convergence: " << r.solver_failures << "\n";
  return out.str();
}

std::string formatMonteCarloReport(const MonteCarloReport& r)
{
  std::ostringstream out;
  out << "trials: " << r.trials.size() << " (" << r.failed_trials << " failed)\n";
  out << "label                          unit  median(MAE)/std(MAE)   per-batch median/std\n";
  for (const AggregateStat& a : r.aggregate) {
    std::string label = a.label;
    label.resize(std::max<std::size_t>(label.size(), 30), ' ');
    out << label << " " << displayUnit(a.label) << "   " << formatFixed(displayValue(a.label, a.median), 4) << "/"
        << formatFixed(displayValue(a.label, a.stddev), 4) << "   ";
    for (std::size_t b = 0; b < a.batch_median.size(); ++b) {
      out << " " << formatFixed(displayValue(a.label, a.batch_median[b]), 4) << "/"
          << formatFixed(displayValue(a.label, a.batch_stddev[b]), 4);
    }
    out << "\n";
  }
  out << "runtime per step (median over trials): mean " << formatFixed(r.runtime.mean * 1e3, 4) << " ms, median "
      << formatFixed(r.runtime.median * 1e3, 4) << " ms, p95 " << formatFixed(r.runtime.p95 * 1e3, 4) << " ms\n";
  for (const TrialReport& t : r.trials) {
    if (t.failed) out << "seed " << t.seed << " FAILED: " << t.failure << "\n";
  }
  return out.str();
}

std::string monteCarloCsv(const MonteCarloReport& r)
{
  std::ostringstream out;
  out << "label,unit,batch,median,std,drift\n";
  for (const AggregateStat& a : r.aggregate) {
    const double drift = a.batch_median.empty() ? 0.0 : a.batch_median.back() - a.batch_median.front();
    out << a.label << "," << displayUnit(a.label) << ",all," << formatNumber(displayValue(a.label, a.median)) << ","
        << formatNumber(displayValue(a.label, a.stddev)) << "," << formatNumber(displayValue(a.label, drift)) << "\n";
    for (std::size_t b = 0; b < a.batch_median.size(); ++b) {
      out << a.label << "," << displayUnit(a.label) << "," << b + 1 << ","
          << formatNumber(displayValue(a.label, a.batch_median[b])) << ","
          << formatNumber(displayValue(a.label, a.batch_stddev[b])) << ",\n";
    }
  }
  return out.str();
}

ComparisonTable compareReports(const std::vector<ReportColumn>& reports)
{
  if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no reports to compare");
  ComparisonTable table;
  std::vector<std::vector<std::pair<std::string, double>>> columns;
  for (const ReportColumn& col : reports) {
    const json& j = col.report;
    if (!j.is_object() || j.value("schema", "") != kReportSchema) {
      throw Error(ErrorCode::SchemaMismatch, col.name + ": expected schema " + kReportSchema);
    }
    std::vector<std::pair<std::string, double>> values;
    try {
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "trial") {
        for (const json& e : j.at("trial").at("errors")) {
          values.emplace_back(e.at("label").get<std::string>(), e.at("mae").get<double>());
        }
      } else if (kind == "montecarlo") {
        for (const json& a : j.at("aggregate")) {
          values.emplace_back(a.at("label").get<std::string>(), a.at("median").get<double>());
        }
      } else {
        throw Error(ErrorCode::SchemaMismatch, col.name + ": unknown report kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch, col.name + ": " + e.what());
    }
    columns.push_back(std::move(values));
    table.columns.push_back(col.name);
  }
  for (const auto& [label, v] : columns.front()) table.labels.push_back(label);
  for (std::size_t c = 1; c < columns.size(); ++c) {
    std::vector<std::string> labels;
    for (const auto& [label, v] : columns[c]) labels.push_back(label);
    if (labels != table.labels) {
      throw Error(ErrorCode::SchemaMismatch, table.columns[c] + ": error labels differ from " + table.columns[0]);
    }
  }
  for (std::size_t r = 0; r < table.labels.size(); ++r) {
    std::vector<double> row;
    for (const auto& col : columns) row.push_back(displayValue(table.labels[r], col[r].second));
    table.values.push_back(std::move(row));
  }
  return table;
}

std::string formatComparison(const ComparisonTable& t)
{
  std::ostringstream out;
  std::string head = "label";
  head.resize(36, ' ');
  out << head << "unit";
  for (const std::string& c : t.columns) out << "  " << c;
  out << "\n";
  for (std::size_t r = 0; r < t.labels.size(); ++r) {
    std::string label = t.labels[r];
    label.resize(std::max<std::size_t>(label.size(), 36), ' ');
    out << label << displayUnit(t.labels[r]) << " ";
    for (double v : t.values[r]) out << "  " << formatFixed(v, 4);
    out << "\n";
  }
  return out.str();
}

std::string comparisonCsv(const ComparisonTable& t)
{
  std::ostringstream out;
  out << "label,unit";
  for (const std::string& c : t.columns) out << "," << c;
  out << "\n";
  for (std::size_t r = 0; r < t.labels.size(); ++r) {
    out << t.labels[r] << "," << displayUnit(t.labels[r]);
    for (double v : t.values[r]) out << "," << formatNumber(v);
    out << "\n";
  }
  return out.str();
}

}  // namespace cfit
