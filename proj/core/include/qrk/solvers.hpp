#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "qrk/quantile.hpp"
#include "qrk/rng.hpp"
#include "qrk/system.hpp"

namespace qrk {

inline constexpr double kDefaultJumpFactor = 1.5;

struct SolverConfig {
  QuantileSpec quantile;
  std::size_t T = 1;
  /// Only the seed is used; update and quantile draws use the Update and
  /// Quantile substreams of it.
  RngHandle seed;
  bool record_trace = true;
  std::size_t trace_stride = 1;
  /// Track ||x_k - x*|| and jumps (needs the ground truth).
  bool oracle_flags = true;
  /// Also evaluate the subsampled-quantile sandwich flags at every step.
  /// Costs O(mn) per step; implies oracle_flags.
  bool quantile_bound_flags = false;
  double jump_factor = kDefaultJumpFactor;
  /// Lower slack for the sandwich flags; q/4 when unset.
  std::optional<double> eps_l;
  /// Upper slack for the sandwich flags; (1 - q - beta)/2 when unset.
  std::optional<double> eps_u;

  void validate() const;
};

/// One iteration x_k -> x_{k+1}. `error` is the post-step error.
struct StepRecord {
  std::size_t k = 0;
  double error = std::numeric_limits<double>::quiet_NaN();
  bool accepted = false;
  std::size_t update_index = 0;
  bool update_corrupted = false;
  double quantile_value = 0.0;
  double residual_abs = 0.0;
  std::optional<bool> upper_violation;
  std::optional<bool> lower_violation;
  /// Cumulative solver time through this step (diagnostics excluded).
  std::int64_t wall_time_ns = 0;
};

struct IterationTrace {
  std::vector<StepRecord> records;
  Vector final_x;
  double initial_error = std::numeric_limits<double>::quiet_NaN();
  double final_error = std::numeric_limits<double>::quiet_NaN();
  bool has_errors = false;
  double jump_factor = kDefaultJumpFactor;
  std::size_t jump_count = 0;
  /// Every step k with error_{k+1} > jump_factor * error_k, at full
  /// resolution regardless of trace_stride.
  std::vector<std::size_t> jump_iterations;
  /// Last step that accepted a corrupted row.
  std::optional<std::size_t> last_corrupted_projection;
  std::size_t corrupted_projections = 0;
  std::size_t accepted_steps = 0;
  std::size_t steps = 0;
  std::int64_t total_wall_ns = 0;
};

enum class SolverKind { Randomized, Quantile };

/// x - (<row_i, x> - b_i) row_i. Rows are unit norm so no division.
Vector rk_step(const LinearSystem& sys, const Vector& x, std::size_t i);

/// Step-at-a-time Kaczmarz iteration. Randomized accepts every update;
/// Quantile accepts only when |h_r| <= the q-quantile of the subsampled
/// absolute residuals. Within a step the quantile subsample is drawn before
/// the update row.
class KaczmarzIteration {
 public:
  KaczmarzIteration(const LinearSystem& sys, const SolverConfig& config, SolverKind kind,
                    Vector x0);

  StepRecord step();

  const Vector& x() const noexcept { return x_; }
  std::size_t iteration() const noexcept { return k_; }
  /// ||x_k - x*|| or NaN when oracle flags are off.
  double error() const noexcept { return error_; }
  double initial_error() const noexcept { return initial_error_; }

 private:
  double compute_quantile();
  void annotate_bounds(StepRecord& rec) const;

  const LinearSystem& sys_;
  SolverConfig config_;
  SolverKind kind_;
  Vector x_;
  std::size_t k_ = 0;
  Rng update_rng_;
  Rng quantile_rng_;
  std::optional<SubsampleDrawer> drawer_;
  IndexSet sample_;
  std::vector<double> values_;
  bool track_error_;
  double error_;
  double initial_error_;
  std::int64_t wall_ns_ = 0;
  double upper_level_ = 0.0;
  double lower_level_ = 0.0;
  IndexSet clean_rows_;
};

/// Baseline randomized Kaczmarz with uniform row choice.
IterationTrace run_rk(const LinearSystem& sys, const SolverConfig& config,
                      std::optional<Vector> x0 = std::nullopt);

/// Quantile-based randomized Kaczmarz; FullSample mode gives the
/// full-sample variant. x0 defaults to zero.
IterationTrace run_qrk(const LinearSystem& sys, const SolverConfig& config,
                       std::optional<Vector> x0 = std::nullopt);

IterationTrace run_solver(const LinearSystem& sys, const SolverConfig& config, SolverKind kind,
                          std::optional<Vector> x0 = std::nullopt);

/// All recorded k with error_{k+1} > jump_factor * error_k. Needs a
/// contiguous trace with errors (MissingOracle otherwise); throws
/// InvariantViolation if a flagged step is not an accepted corrupted update.
std::vector<std::size_t> detect_jumps(const IterationTrace& trace, double jump_factor);

// Trace CSV: header then one row per record,
// k,error,accepted,update_index,update_corrupted,quantile_value,residual_abs,
// upper_violation,lower_violation,wall_time_ns
// Reals use 17 significant digits; missing values are blank.
void write_trace_csv(const IterationTrace& trace, std::ostream& os);
void write_trace_csv(const IterationTrace& trace, const std::filesystem::path& path);
std::vector<StepRecord> read_trace_csv(const std::filesystem::path& path);

}  // namespace qrk
