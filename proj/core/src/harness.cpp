#include "qrk/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "qrk/error.hpp"
#include "qrk/svg.hpp"
#include "qrk/theory.hpp"

#ifndef QRK_SOURCE_REVISION
#define QRK_SOURCE_REVISION "unknown"
#endif

namespace qrk::harness {

using nlohmann::json;

namespace {

constexpr std::uint64_t kFullSentinel = ~std::uint64_t{0};
constexpr std::uint64_t kSharedTag = 0x5348415245440001ULL;
constexpr std::uint64_t kLowerBoundTag = 0x4c4f574552420001ULL;
constexpr std::uint64_t kVerifyTag = 0x5645524946590001ULL;

std::string real(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string d_text(const SubsampleSize& d) { return d.full ? "full" : std::to_string(d.D); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  return os;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

QuantileSpec quantile_spec(double q, const SubsampleSize& d, SamplingMode mode, std::size_t m) {
  if (d.full) {
    if (mode == SamplingMode::WithReplacement) return {q, m, SamplingMode::WithReplacement};
    return {q, m, SamplingMode::FullSample};
  }
  return {q, d.D, mode};
}

// Type-7 (linear interpolation) sample quantile of sorted data.
double interpolated_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Runs job(i) for i in [0, count) on a pool of jthreads. Results land in
// caller-owned slots, so the output never depends on scheduling. The first
// failure in job order is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& job) {
  if (count == 0) return;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  std::vector<std::exception_ptr> failures(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        job(i);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

json corruption_to_json(const CorruptionSpec& c) {
  json out;
  out["placement"] = c.placement == CorruptionPlacement::FirstRows ? "first_rows" : "uniform";
  if (const auto* u = std::get_if<UniformInterval>(&c.magnitude)) {
    out["magnitude"] = {{"type", "uniform"}, {"lo", u->lo}, {"hi", u->hi}};
  } else if (const auto* f = std::get_if<FixedMagnitude>(&c.magnitude)) {
    out["magnitude"] = {{"type", "fixed"}, {"value", f->value}};
  } else {
    out["magnitude"] = {{"type", "signed"}, {"value", std::get<SignedFixed>(c.magnitude).value}};
  }
  return out;
}

CorruptionSpec corruption_from_json(const json& j) {
  CorruptionSpec c;
  if (j.contains("placement")) {
    const auto p = j.at("placement").get<std::string>();
    if (p == "first_rows") c.placement = CorruptionPlacement::FirstRows;
    else if (p == "uniform") c.placement = CorruptionPlacement::UniformRandom;
    else throw Error(ErrorCode::InvalidArgument, "unknown corruption placement '" + p + "'");
  }
  if (j.contains("magnitude")) {
    const json& mj = j.at("magnitude");
    const auto type = mj.at("type").get<std::string>();
    if (type == "uniform") {
      c.magnitude = UniformInterval{mj.value("lo", -5.0), mj.value("hi", 5.0)};
    } else if (type == "fixed") {
      c.magnitude = FixedMagnitude{mj.at("value").get<double>()};
    } else if (type == "signed") {
      c.magnitude = SignedFixed{mj.at("value").get<double>()};
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown corruption magnitude '" + type + "'");
    }
  }
  return c;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (name.empty() || name.find('/') != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "experiment name must be a plain file name");
  }
  if (n == 0 || m < n) throw Error(ErrorCode::InvalidDimension, "need 1 <= n <= m");
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::DomainError, "q must lie in (0, 1)");
  if (T == 0) throw Error(ErrorCode::InvalidArgument, "T must be positive");
  if (trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be at least 1");
  if (trace_stride == 0) throw Error(ErrorCode::InvalidArgument, "trace_stride must be positive");
  if (beta_grid.empty() || D_grid.empty() || sampling_modes.empty()) {
    throw Error(ErrorCode::InvalidArgument, "beta_grid, D_grid and sampling_modes must be non-empty");
  }
  for (double b : beta_grid) {
    if (!(b >= 0.0 && b < 1.0)) throw Error(ErrorCode::DomainError, "beta must lie in [0, 1)");
  }
  for (auto mode : sampling_modes) {
    if (mode == SamplingMode::FullSample) {
      throw Error(ErrorCode::InvalidArgument, "use the 'full' D entry instead of a full sampling mode");
    }
  }
  for (const auto& d : D_grid) {
    if (d.full) continue;
    if (d.D == 0) throw Error(ErrorCode::DomainError, "D must be positive");
    for (auto mode : sampling_modes) {
      if (mode == SamplingMode::WithoutReplacement && d.D > m) {
        throw Error(ErrorCode::SubsampleTooLarge, "D exceeds m for sampling without replacement");
      }
    }
  }
}

ExperimentSpec preset(const std::string& name) {
  ExperimentSpec s;
  s.name = name;
  const bool small = name.rfind("small-", 0) == 0;
  const std::string figure = small ? name.substr(6) : name;
  if (figure != "fig1" && figure != "fig2") {
    throw Error(ErrorCode::InvalidArgument, "unknown preset '" + name + "'");
  }
  s.m = small ? 5000 : 50000;
  s.n = small ? 50 : 100;
  s.q = 0.5;
  s.T = 200 * s.n;
  s.trials = 10;
  s.corruption = CorruptionSpec{0.0, CorruptionPlacement::FirstRows, UniformInterval{-5.0, 5.0}};
  s.output_dir = "out";
  if (figure == "fig1") {
    s.beta_grid = {0.01};
    s.D_grid = {SubsampleSize::fixed(4), SubsampleSize::fixed(40),
                SubsampleSize::fixed(small ? 1000 : 5000), SubsampleSize::full_sample()};
    s.sampling_modes = {SamplingMode::WithReplacement, SamplingMode::WithoutReplacement};
  } else {
    s.beta_grid = {0.01, 0.06, 0.11};
    s.D_grid = {SubsampleSize::fixed(4), SubsampleSize::fixed(8), SubsampleSize::fixed(12)};
    s.sampling_modes = {SamplingMode::WithReplacement};
  }
  return s;
}

std::vector<std::string> preset_names() { return {"fig1", "fig2", "small-fig1", "small-fig2"}; }

std::string spec_to_json(const ExperimentSpec& s, int indent) {
  json j;
  j["name"] = s.name;
  j["m"] = s.m;
  j["n"] = s.n;
  j["q"] = s.q;
  j["beta_grid"] = s.beta_grid;
  json dg = json::array();
  for (const auto& d : s.D_grid) {
    if (d.full) dg.push_back("full");
    else dg.push_back(d.D);
  }
  j["D_grid"] = dg;
  j["T"] = s.T;
  j["trials"] = s.trials;
  j["corruption"] = corruption_to_json(s.corruption);
  json modes = json::array();
  for (auto mode : s.sampling_modes) modes.push_back(std::string(to_string(mode)));
  j["sampling_modes"] = modes;
  j["base_seed"] = s.base_seed;
  j["output_dir"] = s.output_dir.string();
  j["trace_stride"] = s.trace_stride;
  j["shared_instance"] = s.shared_instance;
  j["write_traces"] = s.write_traces;
  j["write_svg"] = s.write_svg;
  j["threads"] = s.threads;
  return j.dump(indent);
}

ExperimentSpec spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "spec must be a JSON object");
  static const std::set<std::string> known{
      "name", "m", "n", "q", "beta_grid", "D_grid", "T", "trials", "corruption", "sampling_modes",
      "base_seed", "output_dir", "trace_stride", "shared_instance", "write_traces", "write_svg",
      "threads"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw Error(ErrorCode::InvalidArgument, "unknown spec field '" + key + "'");
  }
  ExperimentSpec s;
  try {
    s.name = j.value("name", s.name);
    s.m = j.value("m", s.m);
    s.n = j.value("n", s.n);
    s.q = j.value("q", s.q);
    if (j.contains("beta_grid")) s.beta_grid = j.at("beta_grid").get<std::vector<double>>();
    if (j.contains("D_grid")) {
      s.D_grid.clear();
      for (const auto& d : j.at("D_grid")) {
        if (d.is_string()) {
          if (d.get<std::string>() != "full") {
            throw Error(ErrorCode::InvalidArgument, "D_grid strings must be \"full\"");
          }
          s.D_grid.push_back(SubsampleSize::full_sample());
        } else {
          s.D_grid.push_back(SubsampleSize::fixed(d.get<std::size_t>()));
        }
      }
    }
    s.T = j.value("T", s.T);
    s.trials = j.value("trials", s.trials);
    if (j.contains("corruption")) s.corruption = corruption_from_json(j.at("corruption"));
    if (j.contains("sampling_modes")) {
      s.sampling_modes.clear();
      for (const auto& mj : j.at("sampling_modes")) {
        s.sampling_modes.push_back(parse_sampling_mode(mj.get<std::string>()));
      }
    }
    s.base_seed = j.value("base_seed", s.base_seed);
    s.output_dir = j.value("output_dir", s.output_dir.string());
    s.trace_stride = j.value("trace_stride", s.trace_stride);
    s.shared_instance = j.value("shared_instance", s.shared_instance);
    s.write_traces = j.value("write_traces", s.write_traces);
    s.write_svg = j.value("write_svg", s.write_svg);
    s.threads = j.value("threads", s.threads);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad spec field: ") + e.what());
  }
  s.validate();
  return s;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return spec_from_json(buf.str());
}

std::string CurveKey::label() const {
  return "beta=" + short_real(beta) + " D=" + d_text(D) + " " + std::string(to_string(mode));
}

std::uint64_t trial_seed(std::uint64_t base_seed, const CurveKey& key, std::size_t trial) {
  return mix_seed({base_seed, std::bit_cast<std::uint64_t>(key.beta),
                   key.D.full ? kFullSentinel : static_cast<std::uint64_t>(key.D.D),
                   static_cast<std::uint64_t>(key.mode), static_cast<std::uint64_t>(trial)});
}

std::uint64_t shared_instance_seed(std::uint64_t base_seed, double beta) {
  return mix_seed({base_seed, std::bit_cast<std::uint64_t>(beta), kSharedTag});
}

namespace {

std::vector<CurveKey> curve_keys(const ExperimentSpec& spec) {
  std::vector<CurveKey> keys;
  for (double beta : spec.beta_grid) {
    for (const auto& d : spec.D_grid) {
      for (auto mode : spec.sampling_modes) keys.push_back({beta, d, mode});
    }
  }
  return keys;
}

struct TrialRun {
  TrialSummary summary;
  std::vector<std::size_t> iterations;
  std::vector<double> errors;
  std::vector<double> wall;
};

TrialRun run_trial(const ExperimentSpec& spec, const CurveKey& key, std::size_t trial,
                   const LinearSystem* shared, const std::filesystem::path* trace_path) {
  const std::uint64_t seed = trial_seed(spec.base_seed, key, trial);
  std::optional<LinearSystem> own;
  if (!shared) {
    CorruptionSpec corruption = spec.corruption;
    corruption.beta = key.beta;
    own.emplace(generate_system(spec.m, spec.n, corruption, RngHandle{seed, 0}));
  }
  const LinearSystem& sys = shared ? *shared : *own;

  SolverConfig config;
  config.quantile = quantile_spec(spec.q, key.D, key.mode, spec.m);
  config.T = spec.T;
  config.seed = RngHandle{seed, 0};
  config.trace_stride = spec.trace_stride;
  const IterationTrace trace = run_qrk(sys, config);
  if (trace_path) write_trace_csv(trace, *trace_path);

  TrialRun run;
  run.summary.trial = trial;
  run.summary.seed = seed;
  run.summary.initial_error = trace.initial_error;
  run.summary.final_error = trace.final_error;
  run.summary.jump_count = trace.jump_count;
  if (!trace.jump_iterations.empty()) run.summary.first_jump = trace.jump_iterations.front();
  run.summary.last_corrupted_projection = trace.last_corrupted_projection;
  run.summary.accepted_steps = trace.accepted_steps;
  run.summary.total_wall_ns = trace.total_wall_ns;
  for (const auto& rec : trace.records) {
    run.iterations.push_back(rec.k + 1);
    run.errors.push_back(rec.error);
    run.wall.push_back(static_cast<double>(rec.wall_time_ns));
  }
  return run;
}

AggregateCurve aggregate(const CurveKey& key, const std::vector<TrialRun>& runs) {
  AggregateCurve c;
  c.key = key;
  c.trials = runs.size();
  c.iterations = runs.front().iterations;
  const std::size_t len = c.iterations.size();
  c.mean_error.assign(len, 0.0);
  c.mean_wall_ns.assign(len, 0.0);
  std::vector<double> first_jumps;
  std::size_t jumped = 0;
  for (const auto& r : runs) {
    for (std::size_t i = 0; i < len; ++i) {
      c.mean_error[i] += r.errors[i];
      c.mean_wall_ns[i] += r.wall[i];
    }
    c.mean_initial_error += r.summary.initial_error;
    c.mean_final_error += r.summary.final_error;
    if (r.summary.first_jump) {
      ++jumped;
      first_jumps.push_back(static_cast<double>(*r.summary.first_jump));
    }
    c.per_trial.push_back(r.summary);
  }
  const auto t = static_cast<double>(c.trials);
  for (std::size_t i = 0; i < len; ++i) {
    c.mean_error[i] /= t;
    c.mean_wall_ns[i] /= t;
  }
  c.mean_initial_error /= t;
  c.mean_final_error /= t;
  c.jump_fraction = static_cast<double>(jumped) / t;
  std::sort(first_jumps.begin(), first_jumps.end());
  c.first_jump_q25 = interpolated_quantile(first_jumps, 0.25);
  c.first_jump_median = interpolated_quantile(first_jumps, 0.5);
  c.first_jump_q75 = interpolated_quantile(first_jumps, 0.75);
  return c;
}

std::vector<AggregateCurve> execute(const ExperimentSpec& spec,
                                    const std::filesystem::path* trace_dir) {
  spec.validate();
  check_seed_collisions(spec);
  const auto keys = curve_keys(spec);

  std::map<double, LinearSystem> shared;
  if (spec.shared_instance) {
    for (double beta : spec.beta_grid) {
      CorruptionSpec corruption = spec.corruption;
      corruption.beta = beta;
      shared.emplace(beta, generate_system(spec.m, spec.n, corruption,
                                           RngHandle{shared_instance_seed(spec.base_seed, beta), 0}));
    }
  }

  const std::size_t jobs = keys.size() * spec.trials;
  std::vector<TrialRun> runs(jobs);
  parallel_for(jobs, spec.threads, [&](std::size_t j) {
    const CurveKey& key = keys[j / spec.trials];
    const std::size_t trial = j % spec.trials;
    const LinearSystem* sys = spec.shared_instance ? &shared.at(key.beta) : nullptr;
    std::filesystem::path path;
    if (trace_dir) path = *trace_dir / trace_file_name(key, trial);
    runs[j] = run_trial(spec, key, trial, sys, trace_dir ? &path : nullptr);
  });

  std::vector<AggregateCurve> curves;
  for (std::size_t c = 0; c < keys.size(); ++c) {
    std::vector<TrialRun> group(std::make_move_iterator(runs.begin() + c * spec.trials),
                                std::make_move_iterator(runs.begin() + (c + 1) * spec.trials));
    curves.push_back(aggregate(keys[c], group));
  }
  return curves;
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void check_seed_collisions(const ExperimentSpec& spec) {
  std::set<std::uint64_t> seen;
  for (const auto& key : curve_keys(spec)) {
    for (std::size_t t = 0; t < spec.trials; ++t) {
      if (!seen.insert(trial_seed(spec.base_seed, key, t)).second) {
        throw Error(ErrorCode::InvalidArgument,
                    "derived seed collision at " + key.label() + " trial " + std::to_string(t));
      }
    }
  }
}

std::string trace_file_name(const CurveKey& key, std::size_t trial) {
  return "beta" + short_real(key.beta) + "_D" + d_text(key.D) + "_" + std::string(to_string(key.mode)) +
         "_t" + std::to_string(trial) + ".csv";
}

std::vector<AggregateCurve> simulate(const ExperimentSpec& spec) { return execute(spec, nullptr); }

void write_curves_csv(const std::vector<AggregateCurve>& curves, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "beta,D,mode,iteration,mean_error\n";
  for (const auto& c : curves) {
    const std::string prefix =
        real(c.key.beta) + ',' + d_text(c.key.D) + ',' + std::string(to_string(c.key.mode)) + ',';
    os << prefix << 0 << ',' << real(c.mean_initial_error) << '\n';
    for (std::size_t i = 0; i < c.iterations.size(); ++i) {
      os << prefix << c.iterations[i] << ',' << real(c.mean_error[i]) << '\n';
    }
  }
  finish(os, path);
}

void write_runtime_csv(const std::vector<AggregateCurve>& curves, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "beta,D,mode,iteration,mean_wall_ns\n";
  for (const auto& c : curves) {
    const std::string prefix =
        real(c.key.beta) + ',' + d_text(c.key.D) + ',' + std::string(to_string(c.key.mode)) + ',';
    for (std::size_t i = 0; i < c.iterations.size(); ++i) {
      os << prefix << c.iterations[i] << ',' << real(c.mean_wall_ns[i]) << '\n';
    }
  }
  finish(os, path);
}

void write_jumps_csv(const std::vector<AggregateCurve>& curves, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "beta,D,mode,trial,seed,initial_error,final_error,jump_count,first_jump,"
        "last_corrupted_projection\n";
  for (const auto& c : curves) {
    for (const auto& t : c.per_trial) {
      os << real(c.key.beta) << ',' << d_text(c.key.D) << ',' << to_string(c.key.mode) << ','
         << t.trial << ',' << t.seed << ',' << real(t.initial_error) << ',' << real(t.final_error)
         << ',' << t.jump_count << ',';
      if (t.first_jump) os << *t.first_jump;
      os << ',';
      if (t.last_corrupted_projection) os << *t.last_corrupted_projection;
      os << '\n';
    }
  }
  finish(os, path);
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const std::filesystem::path dir = spec.output_dir / spec.name;
  const std::filesystem::path trace_dir = dir / "traces";
  std::error_code ec;
  std::filesystem::create_directories(spec.write_traces ? trace_dir : dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  ExperimentResult result;
  result.curves = execute(spec, spec.write_traces ? &trace_dir : nullptr);

  auto add = [&](const std::filesystem::path& p) { result.files.push_back(p); };
  write_curves_csv(result.curves, dir / "curves.csv");
  add(dir / "curves.csv");
  write_runtime_csv(result.curves, dir / "runtime.csv");
  add(dir / "runtime.csv");
  write_jumps_csv(result.curves, dir / "jumps.csv");
  add(dir / "jumps.csv");
  if (spec.write_svg) {
    svg::emit_svg(result.curves, svg::Axis::Iteration, true, dir / "curves.svg",
                  spec.name + ": error vs iteration");
    add(dir / "curves.svg");
    svg::emit_svg(result.curves, svg::Axis::Runtime, true, dir / "curves_runtime.svg",
                  spec.name + ": error vs runtime");
    add(dir / "curves_runtime.svg");
  }

  json manifest;
  manifest["name"] = spec.name;
  manifest["spec"] = json::parse(spec_to_json(spec));
  manifest["source_revision"] = QRK_SOURCE_REVISION;
  manifest["timestamp"] = timestamp_utc();
  json files = json::array();
  for (const auto& f : result.files) files.push_back(f.filename().string());
  manifest["files"] = files;
  const auto manifest_path = dir / "manifest.json";
  auto os = open_out(manifest_path);
  os << manifest.dump(2) << '\n';
  finish(os, manifest_path);
  add(manifest_path);
  return result;
}

LowerBoundReport run_lower_bound_demo(const LowerBoundConfig& cfg) {
  if (cfg.trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be at least 1");
  if (cfg.n < 2 || cfg.m < cfg.n) throw Error(ErrorCode::InvalidDimension, "need 2 <= n <= m");
  if (!(cfg.magnitude >= 0.0)) throw Error(ErrorCode::DomainError, "magnitude must be non-negative");

  LowerBoundReport report;
  report.config = cfg;
  report.max_D = theory::max_subsample_lower(cfg.beta, static_cast<double>(cfg.T), cfg.c0);
  const std::size_t D = cfg.D.full ? cfg.m : cfg.D.D;
  if (cfg.enforce_threshold && D > report.max_D) {
    throw Error(ErrorCode::DomainError, "D = " + std::to_string(D) +
                                            " exceeds the lower-bound threshold " +
                                            std::to_string(report.max_D));
  }
  report.window = theory::lower_bound_window(cfg.n);
  report.error_floor = theory::lower_bound_error_floor(cfg.n, cfg.magnitude);

  const CorruptionSpec corruption{cfg.beta, CorruptionPlacement::FirstRows,
                                  FixedMagnitude{cfg.magnitude}};
  report.trials.resize(cfg.trials);
  parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
    const std::uint64_t seed = mix_seed({cfg.base_seed, kLowerBoundTag, static_cast<std::uint64_t>(t)});
    const LinearSystem sys = generate_system(cfg.m, cfg.n, corruption, RngHandle{seed, 0});
    SolverConfig config;
    config.quantile = quantile_spec(cfg.q, cfg.D, cfg.mode, cfg.m);
    config.T = cfg.T;
    config.seed = RngHandle{seed, 0};
    config.record_trace = false;
    const IterationTrace trace = run_qrk(sys, config);

    LowerBoundTrial& out = report.trials[t];
    out.trial = t;
    out.seed = seed;
    out.final_error = trace.final_error;
    out.final_error_sq = trace.final_error * trace.final_error;
    out.last_corrupted_projection = trace.last_corrupted_projection;
    out.corrupted_projections = trace.corrupted_projections;
    out.below_floor_failed = out.final_error_sq >= report.error_floor;
    out.late_projection = trace.last_corrupted_projection &&
                          *trace.last_corrupted_projection + report.window >= cfg.T;
  });

  std::size_t failed = 0;
  std::size_t late = 0;
  for (const auto& t : report.trials) {
    failed += t.below_floor_failed ? 1 : 0;
    late += t.late_projection ? 1 : 0;
  }
  report.failure_fraction = static_cast<double>(failed) / static_cast<double>(cfg.trials);
  report.late_fraction = static_cast<double>(late) / static_cast<double>(cfg.trials);
  return report;
}

void write_lower_bound_csv(const LowerBoundReport& report, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "trial,seed,final_error,final_error_sq,error_floor,floor_reached,corrupted_projections,"
        "last_corrupted_projection,window_start,late_projection\n";
  const std::size_t start = report.config.T > report.window ? report.config.T - report.window : 0;
  for (const auto& t : report.trials) {
    os << t.trial << ',' << t.seed << ',' << real(t.final_error) << ',' << real(t.final_error_sq)
       << ',' << real(report.error_floor) << ',' << (t.below_floor_failed ? 1 : 0) << ','
       << t.corrupted_projections << ',';
    if (t.last_corrupted_projection) os << *t.last_corrupted_projection;
    os << ',' << start << ',' << (t.late_projection ? 1 : 0) << '\n';
  }
  finish(os, path);
}

namespace {

verify::MonteCarloReport deterministic_report(std::string name, std::string params,
                                              std::size_t cases, std::size_t violations) {
  auto r = verify::MonteCarloReport::from_counts(std::move(name), std::move(params), cases,
                                                 violations, 0.0);
  r.pass = violations == 0;
  return r;
}

Vector random_iterate(const LinearSystem& sys, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(sys.cols_count());
  Vector x(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.normal() * scale;
  return *sys.truth() + x;
}

}  // namespace

VerificationOutcome run_verification_suite(const VerificationGrid& grid) {
  VerificationOutcome out;
  if (grid.beta_grid.empty()) return out;

  if (grid.chernoff_N_max > 0) {
    const auto c = verify::verify_chernoff_grid(grid.chernoff_N_max);
    out.reports.push_back(deterministic_report(
        "chernoff_grid", "N_max=" + std::to_string(grid.chernoff_N_max), c.cases, c.violations));
  }

  for (double beta : grid.beta_grid) {
    const std::string params = "m=" + std::to_string(grid.m) + ";n=" + std::to_string(grid.n) +
                               ";beta=" + short_real(beta) + ";q=" + short_real(grid.q);
    const CorruptionSpec corruption{beta, CorruptionPlacement::FirstRows, UniformInterval{-5.0, 5.0}};

    std::size_t sandwich_violations = 0;
    std::size_t chain_violations = 0;
    const auto tp = theory::TheoryParams::make(grid.q, beta, grid.eps_u, grid.eps_l);
    for (std::size_t i = 0; i < grid.sandwich_instances; ++i) {
      const std::uint64_t seed = mix_seed({grid.base_seed, kVerifyTag, std::bit_cast<std::uint64_t>(beta), i});
      const LinearSystem sys = generate_system(grid.m, grid.n, corruption, RngHandle{seed, 0});
      Rng rng(RngHandle{seed, static_cast<std::uint64_t>(Stream::Verify)});
      const Vector x = random_iterate(sys, rng);
      if (!verify::full_sample_sandwich(sys, x, grid.q, beta).holds()) ++sandwich_violations;
      if (!verify::lower_chain_holds(sys, x, tp)) ++chain_violations;
    }
    out.reports.push_back(deterministic_report("full_sample_sandwich", params,
                                               grid.sandwich_instances, sandwich_violations));
    out.reports.push_back(
        deterministic_report("lower_chain", params, grid.sandwich_instances, chain_violations));

    const std::uint64_t seed = mix_seed({grid.base_seed, kVerifyTag, std::bit_cast<std::uint64_t>(beta)});
    const LinearSystem sys = generate_system(grid.m, grid.n, corruption, RngHandle{seed, 0});
    Rng rng(RngHandle{seed, static_cast<std::uint64_t>(Stream::Verify)});
    const Vector x = random_iterate(sys, rng);
    for (std::size_t D : grid.D_grid) {
      const std::uint64_t s = mix_seed({seed, static_cast<std::uint64_t>(D)});
      out.reports.push_back(
          verify::verify_subquantile_upper(sys, x, tp, D, grid.draws, RngHandle{s, 0}));
      out.reports.push_back(
          verify::verify_subquantile_lower(sys, x, tp, D, grid.draws, RngHandle{s + 1, 0}));
    }
  }
  for (const auto& r : out.reports) out.all_passed = out.all_passed && r.pass;
  return out;
}

void write_verification_report(const VerificationOutcome& outcome,
                               const std::filesystem::path& path) {
  verify::write_verification_csv(outcome.reports, path);
}

}  // namespace qrk::harness
