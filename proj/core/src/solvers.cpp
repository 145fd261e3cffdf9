#include "qrk/solvers.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "qrk/error.hpp"

namespace qrk {

void SolverConfig::validate() const {
  quantile.validate();
  if (T == 0) throw Error(ErrorCode::InvalidArgument, "iteration count T must be positive");
  if (trace_stride == 0) throw Error(ErrorCode::InvalidArgument, "trace_stride must be positive");
  if (!(jump_factor >= 1.0)) throw Error(ErrorCode::InvalidArgument, "jump_factor must be >= 1");
}

Vector rk_step(const LinearSystem& sys, const Vector& x, std::size_t i) {
  const double h = residual(sys, x, i);
  return x - h * sys.rows().row(static_cast<Eigen::Index>(i)).transpose();
}

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count();
}

}  // namespace

KaczmarzIteration::KaczmarzIteration(const LinearSystem& sys, const SolverConfig& config,
                                     SolverKind kind, Vector x0)
    : sys_(sys),
      config_(config),
      kind_(kind),
      x_(std::move(x0)),
      update_rng_(config.seed.with_stream(Stream::Update)),
      quantile_rng_(config.seed.with_stream(Stream::Quantile)) {
  config_.validate();
  if (x_.size() != static_cast<Eigen::Index>(sys.cols_count())) {
    throw Error(ErrorCode::InvalidDimension, "x0 has wrong length");
  }
  if (config_.quantile_bound_flags) config_.oracle_flags = true;
  track_error_ = config_.oracle_flags;
  if (track_error_ && !sys.truth()) {
    throw Error(ErrorCode::MissingTruth, "oracle flags need the ground truth");
  }
  error_ = track_error_ ? error_norm(sys, x_) : std::numeric_limits<double>::quiet_NaN();
  initial_error_ = error_;

  if (kind_ == SolverKind::Quantile) {
    drawer_.emplace(sys.rows_count(), config_.quantile);
    sample_.reserve(drawer_->size());
    values_.reserve(drawer_->size());
  }

  if (kind_ == SolverKind::Quantile && config_.quantile_bound_flags) {
    const double q = config_.quantile.q;
    const double beta =
        static_cast<double>(sys.corrupted_set().size()) / static_cast<double>(sys.rows_count());
    const double eps_l = config_.eps_l.value_or(q / 4.0);
    const double eps_u = config_.eps_u.value_or((1.0 - q - beta) / 2.0);
    if (!(eps_l > 0.0 && eps_l < q) || !(eps_u > 0.0 && eps_u < 1.0 - q) ||
        !(beta < q - eps_l && beta < 1.0 - q - eps_u)) {
      throw Error(ErrorCode::DomainError,
                  "sandwich flags need 0<eps_l<q, 0<eps_u<1-q and beta<min(q-eps_l, 1-q-eps_u)");
    }
    upper_level_ = q + beta + eps_u;
    lower_level_ = (q - beta - eps_l) / (1.0 - beta);
    clean_rows_ = sys.uncorrupted_set();
  }
}

double KaczmarzIteration::compute_quantile() {
  drawer_->draw(quantile_rng_, sample_);
  values_.resize(sample_.size());
  const auto& rows = sys_.rows();
  const auto& rhs = sys_.rhs();
  for (std::size_t j = 0; j < sample_.size(); ++j) {
    const auto row = static_cast<Eigen::Index>(sample_[j]);
    values_[j] = std::abs(rows.row(row).dot(x_) - rhs[row]);
  }
  return select_quantile(values_, config_.quantile.q);
}

void KaczmarzIteration::annotate_bounds(StepRecord& rec) const {
  // Evaluated at x_k, the iterate the quantile was computed from.
  const Vector& x_prev = x_;
  const double upper = uncorrupted_quantile(sys_, x_prev, upper_level_);
  const double lower = uncorrupted_quantile(sys_, x_prev, lower_level_, clean_rows_);
  rec.upper_violation = rec.quantile_value > upper;
  rec.lower_violation = rec.quantile_value < lower;
}

StepRecord KaczmarzIteration::step() {
  StepRecord rec;
  rec.k = k_;

  const auto start = Clock::now();
  double quantile = std::numeric_limits<double>::infinity();
  if (kind_ == SolverKind::Quantile) quantile = compute_quantile();
  const std::size_t r = update_rng_.uniform_index(sys_.rows_count());
  const auto row = static_cast<Eigen::Index>(r);
  const double h = sys_.rows().row(row).dot(x_) - sys_.rhs()[row];
  const bool accepted = std::abs(h) <= quantile;

  rec.quantile_value = quantile;
  rec.residual_abs = std::abs(h);
  rec.update_index = r;
  rec.update_corrupted = sys_.is_corrupted(r);
  rec.accepted = accepted;

  auto resume = start;
  if (kind_ == SolverKind::Quantile && config_.quantile_bound_flags) {
    // Diagnostics need x_k, so they run before the update and off the clock.
    const auto pause = Clock::now();
    annotate_bounds(rec);
    resume = Clock::now();
    wall_ns_ += elapsed_ns(start, pause);
  }

  if (accepted) x_.noalias() -= h * sys_.rows().row(row).transpose();
  wall_ns_ += elapsed_ns(resume, Clock::now());
  rec.wall_time_ns = wall_ns_;

  if (track_error_) {
    if (accepted) error_ = error_norm(sys_, x_);
    rec.error = error_;
  }
  ++k_;
  return rec;
}

IterationTrace run_solver(const LinearSystem& sys, const SolverConfig& config, SolverKind kind,
                          std::optional<Vector> x0) {
  Vector start = x0 ? std::move(*x0) : Vector::Zero(static_cast<Eigen::Index>(sys.cols_count()));
  KaczmarzIteration it(sys, config, kind, std::move(start));

  IterationTrace trace;
  trace.has_errors = config.oracle_flags || config.quantile_bound_flags;
  trace.jump_factor = config.jump_factor;
  trace.initial_error = it.initial_error();
  if (config.record_trace) trace.records.reserve(config.T / config.trace_stride + 1);

  double previous = it.error();
  for (std::size_t k = 0; k < config.T; ++k) {
    StepRecord rec = it.step();
    if (rec.accepted) {
      ++trace.accepted_steps;
      if (rec.update_corrupted) {
        ++trace.corrupted_projections;
        trace.last_corrupted_projection = k;
      }
    }
    if (trace.has_errors) {
      if (rec.error > config.jump_factor * previous) trace.jump_iterations.push_back(k);
      previous = rec.error;
    }
    if (config.record_trace && ((k + 1) % config.trace_stride == 0 || k + 1 == config.T)) {
      trace.records.push_back(rec);
    }
    trace.total_wall_ns = rec.wall_time_ns;
  }
  trace.steps = config.T;
  trace.jump_count = trace.jump_iterations.size();
  trace.final_x = it.x();
  if (sys.truth()) trace.final_error = error_norm(sys, trace.final_x);
  return trace;
}

IterationTrace run_rk(const LinearSystem& sys, const SolverConfig& config,
                      std::optional<Vector> x0) {
  return run_solver(sys, config, SolverKind::Randomized, std::move(x0));
}

IterationTrace run_qrk(const LinearSystem& sys, const SolverConfig& config,
                       std::optional<Vector> x0) {
  return run_solver(sys, config, SolverKind::Quantile, std::move(x0));
}

std::vector<std::size_t> detect_jumps(const IterationTrace& trace, double jump_factor) {
  if (!trace.has_errors) throw Error(ErrorCode::MissingOracle, "trace was recorded without errors");
  std::vector<std::size_t> jumps;
  double previous = trace.initial_error;
  for (std::size_t j = 0; j < trace.records.size(); ++j) {
    const StepRecord& rec = trace.records[j];
    if (rec.k != j) {
      throw Error(ErrorCode::InvalidArgument, "detect_jumps needs an unthinned trace");
    }
    if (rec.error > jump_factor * previous) {
      if (!(rec.accepted && rec.update_corrupted)) {
        throw Error(ErrorCode::InvariantViolation,
                    "error grew at step " + std::to_string(rec.k) +
                        " without an accepted corrupted update");
      }
      jumps.push_back(rec.k);
    }
    previous = rec.error;
  }
  return jumps;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

void put_real(std::ostream& os, double v) {
  if (std::isnan(v)) return;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

void put_flag(std::ostream& os, const std::optional<bool>& v) {
  if (v) os << (*v ? '1' : '0');
}

constexpr const char* kTraceHeader =
    "k,error,accepted,update_index,update_corrupted,quantile_value,residual_abs,"
    "upper_violation,lower_violation,wall_time_ns";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::strtod(s.c_str(), nullptr);
}

std::optional<bool> parse_flag(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s == "1";
}

}  // namespace

void write_trace_csv(const IterationTrace& trace, std::ostream& os) {
  os << kTraceHeader << '\n';
  for (const StepRecord& rec : trace.records) {
    os << rec.k << ',';
    put_real(os, rec.error);
    os << ',' << (rec.accepted ? 1 : 0) << ',' << rec.update_index << ','
       << (rec.update_corrupted ? 1 : 0) << ',';
    put_real(os, rec.quantile_value);
    os << ',';
    put_real(os, rec.residual_abs);
    os << ',';
    put_flag(os, rec.upper_violation);
    os << ',';
    put_flag(os, rec.lower_violation);
    os << ',' << rec.wall_time_ns << '\n';
  }
}

void write_trace_csv(const IterationTrace& trace, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  write_trace_csv(trace, os);
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<StepRecord> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kTraceHeader) {
    throw Error(ErrorCode::IoError, "missing trace header in " + path.string());
  }
  std::vector<StepRecord> records;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 10) throw Error(ErrorCode::IoError, "malformed trace row: " + line);
    StepRecord rec;
    rec.k = std::stoull(cells[0]);
    rec.error = parse_real(cells[1]);
    rec.accepted = cells[2] == "1";
    rec.update_index = std::stoull(cells[3]);
    rec.update_corrupted = cells[4] == "1";
    rec.quantile_value = parse_real(cells[5]);
    rec.residual_abs = parse_real(cells[6]);
    rec.upper_violation = parse_flag(cells[7]);
    rec.lower_violation = parse_flag(cells[8]);
    rec.wall_time_ns = std::stoll(cells[9]);
    records.push_back(rec);
  }
  return records;
}

}  // namespace qrk
