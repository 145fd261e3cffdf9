#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qrk/quantile.hpp"
#include "qrk/solvers.hpp"
#include "qrk/system.hpp"
#include "qrk/verify.hpp"

namespace qrk::harness {

/// One entry of the D grid. `full` means D = m: the FullSample
/// implementation under without-replacement sampling, D = m i.i.d. draws
/// under with-replacement sampling.
struct SubsampleSize {
  std::size_t D = 1;
  bool full = false;

  static SubsampleSize fixed(std::size_t d) { return {d, false}; }
  static SubsampleSize full_sample() { return {0, true}; }
  friend bool operator==(const SubsampleSize&, const SubsampleSize&) = default;
};

struct ExperimentSpec {
  std::string name = "experiment";
  std::size_t m = 5000;
  std::size_t n = 50;
  double q = 0.5;
  std::vector<double> beta_grid{0.01};
  std::vector<SubsampleSize> D_grid{SubsampleSize::fixed(40)};
  std::size_t T = 10000;
  std::size_t trials = 10;
  /// beta is taken from beta_grid; placement and magnitude from here.
  CorruptionSpec corruption;
  std::vector<SamplingMode> sampling_modes{SamplingMode::WithReplacement};
  std::uint64_t base_seed = 20240601;
  std::filesystem::path output_dir = "out";
  std::size_t trace_stride = 10;
  /// Draw one instance per beta and reuse it across trials, D and modes.
  bool shared_instance = false;
  /// Write one trace CSV per (beta, D, mode, trial).
  bool write_traces = true;
  bool write_svg = true;
  /// Worker threads; 0 picks the hardware concurrency.
  std::size_t threads = 0;

  /// Throws InvalidArgument / DomainError / SubsampleTooLarge.
  void validate() const;
};

/// fig1, fig2, small-fig1, small-fig2. Throws InvalidArgument otherwise.
ExperimentSpec preset(const std::string& name);
std::vector<std::string> preset_names();

ExperimentSpec spec_from_json(const std::string& text);
ExperimentSpec load_spec(const std::filesystem::path& path);
std::string spec_to_json(const ExperimentSpec& spec, int indent = 2);

struct CurveKey {
  double beta = 0.0;
  SubsampleSize D;
  SamplingMode mode = SamplingMode::WithReplacement;

  std::string label() const;
  friend bool operator==(const CurveKey&, const CurveKey&) = default;
};

/// Per-run seed: mix_seed(base, bits(beta), D or the full sentinel, mode, trial).
std::uint64_t trial_seed(std::uint64_t base_seed, const CurveKey& key, std::size_t trial);
/// Instance seed under shared_instance: mix_seed(base, bits(beta), tag).
std::uint64_t shared_instance_seed(std::uint64_t base_seed, double beta);

/// Throws InvalidArgument if two grid points of `spec` map to the same seed.
void check_seed_collisions(const ExperimentSpec& spec);

struct TrialSummary {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double initial_error = 0.0;
  double final_error = 0.0;
  std::size_t jump_count = 0;
  std::optional<std::size_t> first_jump;
  std::optional<std::size_t> last_corrupted_projection;
  std::size_t accepted_steps = 0;
  std::int64_t total_wall_ns = 0;
};

struct AggregateCurve {
  CurveKey key;
  std::size_t trials = 0;
  /// Step counts k+1 of the recorded iterations.
  std::vector<std::size_t> iterations;
  std::vector<double> mean_error;
  std::vector<double> mean_wall_ns;
  double mean_initial_error = 0.0;
  double mean_final_error = 0.0;
  /// Fraction of trials with at least one jump.
  double jump_fraction = 0.0;
  /// 25%, 50%, 75% quantiles of the first-jump iteration over the trials
  /// that jumped (NaN when none did).
  double first_jump_q25 = 0.0;
  double first_jump_median = 0.0;
  double first_jump_q75 = 0.0;
  std::vector<TrialSummary> per_trial;
};

struct ExperimentResult {
  std::vector<AggregateCurve> curves;
  std::vector<std::filesystem::path> files;
};

/// Runs every (beta, D, mode, trial) and writes, under output_dir/name:
/// curves.csv, runtime.csv, jumps.csv, manifest.json, the SVG charts and
/// traces/<label>_t<trial>.csv. Curves are ordered beta, then D, then mode.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Just the aggregation, without touching the file system.
std::vector<AggregateCurve> simulate(const ExperimentSpec& spec);

/// Trace CSV file name for a run.
std::string trace_file_name(const CurveKey& key, std::size_t trial);

/// curves.csv: beta,D,mode,iteration,mean_error
/// runtime.csv: beta,D,mode,iteration,mean_wall_ns
/// jumps.csv: beta,D,mode,trial,seed,initial_error,final_error,jump_count,
///            first_jump,last_corrupted_projection
void write_curves_csv(const std::vector<AggregateCurve>& curves, const std::filesystem::path& path);
void write_runtime_csv(const std::vector<AggregateCurve>& curves, const std::filesystem::path& path);
void write_jumps_csv(const std::vector<AggregateCurve>& curves, const std::filesystem::path& path);

struct LowerBoundConfig {
  std::size_t m = 5000;
  std::size_t n = 100;
  double beta = 0.1;
  SubsampleSize D = SubsampleSize::fixed(1);
  SamplingMode mode = SamplingMode::WithReplacement;
  double q = 0.5;
  std::size_t T = 10000;
  double magnitude = 1e6;
  std::size_t trials = 10;
  std::uint64_t base_seed = 20240601;
  double c0 = 0.5;
  /// Refuse D above max_subsample_lower(beta, T, c0).
  bool enforce_threshold = true;
  std::size_t threads = 0;
};

struct LowerBoundTrial {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double final_error = 0.0;
  double final_error_sq = 0.0;
  std::optional<std::size_t> last_corrupted_projection;
  std::size_t corrupted_projections = 0;
  /// final_error^2 >= floor
  bool below_floor_failed = false;
  /// k* >= T - window
  bool late_projection = false;
};

struct LowerBoundReport {
  LowerBoundConfig config;
  std::size_t max_D = 0;
  std::size_t window = 0;
  /// (1/2)^floor(n/ln n) magnitude^2
  double error_floor = 0.0;
  /// Fraction of trials with final_error^2 >= error_floor.
  double failure_fraction = 0.0;
  /// Fraction of trials whose k* lies in the final window.
  double late_fraction = 0.0;
  std::vector<LowerBoundTrial> trials;
};

/// Repeated runs with FixedMagnitude corruption at the configured D.
LowerBoundReport run_lower_bound_demo(const LowerBoundConfig& config);
void write_lower_bound_csv(const LowerBoundReport& report, const std::filesystem::path& path);

struct VerificationGrid {
  std::size_t m = 2000;
  std::size_t n = 20;
  double q = 0.5;
  std::vector<double> beta_grid{0.05};
  std::vector<std::size_t> D_grid{10, 20, 40};
  double eps_l = 0.125;
  double eps_u = 0.2;
  std::size_t draws = 10000;
  std::size_t sandwich_instances = 100;
  std::size_t chernoff_N_max = 30;
  std::uint64_t base_seed = 20240601;
};

struct VerificationOutcome {
  std::vector<verify::MonteCarloReport> reports;
  bool all_passed = true;
};

/// Chernoff grid, full-sample sandwich and the subsampled Monte-Carlo
/// checks for every (beta, D). Random iterates are x* + N(0, I/n). An empty
/// beta grid yields an empty report.
VerificationOutcome run_verification_suite(const VerificationGrid& grid);

/// Writes the reports to `path` in the verification CSV format.
void write_verification_report(const VerificationOutcome& outcome,
                               const std::filesystem::path& path);

}  // namespace qrk::harness
