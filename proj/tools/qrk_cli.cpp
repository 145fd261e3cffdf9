#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qrk/error.hpp"
#include "qrk/harness.hpp"
#include "qrk/solvers.hpp"
#include "qrk/theory.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kBadArgs = 1;
constexpr int kCheckFailed = 2;
constexpr int kIoError = 3;

int exit_code_for(qrk::ErrorCode code) {
  switch (code) {
    case qrk::ErrorCode::IoError: return kIoError;
    case qrk::ErrorCode::InvariantViolation:
    case qrk::ErrorCode::ConvergenceFailure: return kCheckFailed;
    default: return kBadArgs;
  }
}

qrk::harness::SubsampleSize parse_D(const std::string& text) {
  if (text == "full") return qrk::harness::SubsampleSize::full_sample();
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != text.size() || v == 0) {
    throw qrk::Error(qrk::ErrorCode::InvalidArgument, "D must be a positive count or 'full'");
  }
  return qrk::harness::SubsampleSize::fixed(v);
}

struct SolveArgs {
  std::size_t m = 5000;
  std::size_t n = 50;
  double beta = 0.01;
  double q = 0.5;
  std::string D = "40";
  std::size_t T = 10000;
  std::string mode = "with";
  std::uint64_t seed = 1;
  std::string trace;
  std::size_t stride = 1;
  std::string solver = "qrk";
  std::optional<double> fixed;
};

int run_solve(const SolveArgs& a) {
  qrk::CorruptionSpec corruption{a.beta, qrk::CorruptionPlacement::FirstRows, qrk::UniformInterval{}};
  if (a.fixed) corruption.magnitude = qrk::FixedMagnitude{*a.fixed};
  const qrk::LinearSystem sys = qrk::generate_system(a.m, a.n, corruption, qrk::RngHandle{a.seed, 0});

  qrk::SolverConfig config;
  const auto d = parse_D(a.D);
  auto mode = qrk::parse_sampling_mode(a.mode);
  if (d.full) mode = qrk::SamplingMode::FullSample;
  config.quantile = {a.q, d.full ? a.m : d.D, mode};
  config.T = a.T;
  config.seed = qrk::RngHandle{a.seed, 0};
  config.trace_stride = a.stride;
  config.record_trace = !a.trace.empty();

  qrk::SolverKind kind;
  if (a.solver == "qrk") kind = qrk::SolverKind::Quantile;
  else if (a.solver == "rk") kind = qrk::SolverKind::Randomized;
  else throw qrk::Error(qrk::ErrorCode::InvalidArgument, "solver must be qrk or rk");

  const qrk::IterationTrace trace = qrk::run_solver(sys, config, kind);
  if (!a.trace.empty()) qrk::write_trace_csv(trace, a.trace);

  std::printf("initial_error          %.6e\n", trace.initial_error);
  std::printf("final_error            %.6e\n", trace.final_error);
  std::printf("reduction              %.6e\n", trace.final_error / trace.initial_error);
  std::printf("accepted_steps         %zu / %zu\n", trace.accepted_steps, trace.steps);
  std::printf("corrupted_projections  %zu\n", trace.corrupted_projections);
  std::printf("jumps                  %zu\n", trace.jump_count);
  std::printf("wall_time_ms           %.3f\n", static_cast<double>(trace.total_wall_ns) * 1e-6);
  return kOk;
}

int run_experiment_cmd(const std::string& preset, const std::string& spec_path,
                       const std::string& output_dir, bool shared, std::optional<std::size_t> trials,
                       std::optional<std::size_t> threads, std::optional<std::uint64_t> seed) {
  qrk::harness::ExperimentSpec spec =
      spec_path.empty() ? qrk::harness::preset(preset) : qrk::harness::load_spec(spec_path);
  if (!output_dir.empty()) spec.output_dir = output_dir;
  if (shared) spec.shared_instance = true;
  if (trials) spec.trials = *trials;
  if (threads) spec.threads = *threads;
  if (seed) spec.base_seed = *seed;

  const auto result = qrk::harness::run_experiment(spec);
  std::printf("%-34s %14s %14s %10s %12s\n", "curve", "initial", "final", "jump_frac", "wall_ms");
  for (const auto& c : result.curves) {
    const double wall = c.mean_wall_ns.empty() ? 0.0 : c.mean_wall_ns.back() * 1e-6;
    std::printf("%-34s %14.6e %14.6e %10.2f %12.2f\n", c.key.label().c_str(), c.mean_initial_error,
                c.mean_final_error, c.jump_fraction, wall);
  }
  for (const auto& f : result.files) std::printf("wrote %s\n", f.string().c_str());
  return kOk;
}

int run_lower_bound_cmd(qrk::harness::LowerBoundConfig cfg, const std::string& D,
                        const std::string& mode, const std::string& out) {
  cfg.D = parse_D(D);
  cfg.mode = qrk::parse_sampling_mode(mode);
  const auto report = qrk::harness::run_lower_bound_demo(cfg);
  if (!out.empty()) qrk::harness::write_lower_bound_csv(report, out);
  std::printf("max_D (c0=%g)          %zu\n", cfg.c0, report.max_D);
  std::printf("window ceil(n/ln n)    %zu\n", report.window);
  std::printf("error_floor            %.6e\n", report.error_floor);
  std::printf("%6s %16s %8s %10s %6s\n", "trial", "final_error", "floor", "k*", "late");
  for (const auto& t : report.trials) {
    std::string k = t.last_corrupted_projection ? std::to_string(*t.last_corrupted_projection) : "-";
    std::printf("%6zu %16.6e %8d %10s %6d\n", t.trial, t.final_error, t.below_floor_failed ? 1 : 0,
                k.c_str(), t.late_projection ? 1 : 0);
  }
  std::printf("floor_fraction         %.2f\n", report.failure_fraction);
  std::printf("late_fraction          %.2f\n", report.late_fraction);
  return kOk;
}

int run_verify_cmd(const qrk::harness::VerificationGrid& grid, const std::string& out) {
  const auto outcome = qrk::harness::run_verification_suite(grid);
  if (!out.empty()) qrk::harness::write_verification_report(outcome, out);
  for (const auto& r : outcome.reports) {
    std::printf("%-5s %-22s %-48s rate=%.4g bound=%.4g (%zu/%zu)\n", r.pass ? "PASS" : "FAIL",
                r.check_name.c_str(), r.instance_params.c_str(), r.empirical_rate,
                r.theoretical_bound, r.violations, r.trials);
  }
  return outcome.all_passed ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantile-based randomized Kaczmarz solvers and experiments"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Run one solver on a random corrupted system");
  s->add_option("--m", solve.m, "Rows")->capture_default_str();
  s->add_option("--n", solve.n, "Columns")->capture_default_str();
  s->add_option("--beta", solve.beta, "Corrupted fraction")->capture_default_str();
  s->add_option("--q", solve.q, "Quantile")->capture_default_str();
  s->add_option("--D", solve.D, "Subsample size or 'full'")->capture_default_str();
  s->add_option("--T", solve.T, "Iterations")->capture_default_str();
  s->add_option("--mode", solve.mode, "with | without | full")->capture_default_str();
  s->add_option("--seed", solve.seed, "Seed")->capture_default_str();
  s->add_option("--trace", solve.trace, "Write the trace CSV here");
  s->add_option("--stride", solve.stride, "Record every k-th step")->capture_default_str();
  s->add_option("--solver", solve.solver, "qrk | rk")->capture_default_str();
  s->add_option("--fixed-magnitude", solve.fixed, "Use +value corruption instead of U[-5,5]");

  std::string preset = "small-fig1";
  std::string spec_path;
  std::string output_dir;
  bool shared = false;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> base_seed;
  auto* e = app.add_subcommand("experiment", "Run a figure preset or a JSON experiment spec");
  auto* preset_opt = e->add_option("--preset", preset, "fig1 | fig2 | small-fig1 | small-fig2")
                         ->capture_default_str();
  e->add_option("--spec", spec_path, "Experiment spec JSON")->excludes(preset_opt);
  e->add_option("--output-dir", output_dir, "Override the output directory");
  e->add_flag("--shared-instance", shared, "One instance per beta, shared across runs");
  e->add_option("--trials", trials, "Override the trial count");
  e->add_option("--threads", threads, "Worker threads (0 = hardware)");
  e->add_option("--base-seed", base_seed, "Override the base seed");

  qrk::harness::LowerBoundConfig lb;
  std::string lb_D = "1";
  std::string lb_mode = "with";
  std::string lb_out;
  bool lb_free = false;
  auto* l = app.add_subcommand("lower-bound", "Adversarial demo with large fixed corruptions");
  l->add_option("--m", lb.m)->capture_default_str();
  l->add_option("--n", lb.n)->capture_default_str();
  l->add_option("--beta", lb.beta)->capture_default_str();
  l->add_option("--D", lb_D, "Subsample size or 'full'")->capture_default_str();
  l->add_option("--mode", lb_mode)->capture_default_str();
  l->add_option("--q", lb.q)->capture_default_str();
  l->add_option("--T", lb.T)->capture_default_str();
  l->add_option("--magnitude", lb.magnitude)->capture_default_str();
  l->add_option("--trials", lb.trials)->capture_default_str();
  l->add_option("--seed", lb.base_seed)->capture_default_str();
  l->add_option("--c0", lb.c0)->capture_default_str();
  l->add_option("--threads", lb.threads)->capture_default_str();
  l->add_flag("--no-threshold", lb_free, "Allow D above the lower-bound threshold");
  l->add_option("--out", lb_out, "Write per-trial CSV here");

  qrk::harness::VerificationGrid grid;
  std::string verify_out;
  auto* v = app.add_subcommand("verify", "Chernoff, sandwich and Monte-Carlo bound checks");
  v->add_option("--m", grid.m)->capture_default_str();
  v->add_option("--n", grid.n)->capture_default_str();
  v->add_option("--q", grid.q)->capture_default_str();
  v->add_option("--beta", grid.beta_grid, "Corruption levels")->capture_default_str();
  v->add_option("--D", grid.D_grid, "Subsample sizes")->capture_default_str();
  v->add_option("--eps-l", grid.eps_l)->capture_default_str();
  v->add_option("--eps-u", grid.eps_u)->capture_default_str();
  v->add_option("--draws", grid.draws)->capture_default_str();
  v->add_option("--instances", grid.sandwich_instances)->capture_default_str();
  v->add_option("--chernoff-n-max", grid.chernoff_N_max)->capture_default_str();
  v->add_option("--seed", grid.base_seed)->capture_default_str();
  v->add_option("--out", verify_out, "Write the verification CSV here");

  double t_q = 0.5;
  double t_beta = 0.01;
  double t_T = 10000;
  double t_c0 = 0.5;
  std::optional<double> t_C;
  auto* t = app.add_subcommand("threshold", "Subsample-size thresholds for q, beta, T");
  t->add_option("--q", t_q)->capture_default_str();
  t->add_option("--beta", t_beta)->capture_default_str();
  t->add_option("--T", t_T)->capture_default_str();
  t->add_option("--c0", t_c0)->capture_default_str();
  t->add_option("--C", t_C, "Override the upper constant 24/(1-q)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kBadArgs;
  }

  try {
    if (*s) return run_solve(solve);
    if (*e) return run_experiment_cmd(preset, spec_path, output_dir, shared, trials, threads, base_seed);
    if (*l) {
      lb.enforce_threshold = !lb_free;
      return run_lower_bound_cmd(lb, lb_D, lb_mode, lb_out);
    }
    if (*v) return run_verify_cmd(grid, verify_out);
    if (*t) {
      const std::size_t upper = qrk::theory::min_subsample_upper(t_q, t_beta, t_T, t_C);
      const std::size_t lower = qrk::theory::max_subsample_lower(t_beta, t_T, t_c0);
      std::printf("min_subsample_upper %zu\n", upper);
      std::printf("max_subsample_lower %zu\n", lower);
      return kOk;
    }
  } catch (const qrk::Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code_for(err.code());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kBadArgs;
  }
  return kOk;
}
