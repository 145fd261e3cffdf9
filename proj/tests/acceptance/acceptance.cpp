// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails.
//
//   qrk_acceptance                  all criteria
//   qrk_acceptance --criterion 4    just one (repeatable)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qrk/harness.hpp"
#include "qrk/quantile.hpp"
#include "qrk/solvers.hpp"
#include "qrk/system.hpp"
#include "qrk/theory.hpp"
#include "qrk/verify.hpp"

namespace {

using namespace qrk;
using harness::AggregateCurve;
using harness::ExperimentSpec;
using harness::SubsampleSize;

constexpr std::uint64_t kBaseSeed = 20240601;

// Desk-scale convergence setting shared by criteria 1-3.
constexpr std::size_t kM = 5000;
constexpr std::size_t kN = 50;
constexpr std::size_t kT = 200 * kN;
constexpr std::size_t kTrials = 10;

constexpr double kReductionFactor = 1e-4;
constexpr std::size_t kMinCleanTrials = 9;
constexpr double kCurveAgreement = 3.0;
constexpr double kChernoffSeconds = 1.0;
constexpr double kProjectionTol = 1e-12;
constexpr double kNonExpansiveTol = 1e-12;
constexpr double kCorruptedFloorTol = 1e-9;
constexpr std::size_t kMinPropertySteps = 1000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ExperimentSpec desk_spec(std::vector<SubsampleSize> D, SamplingMode mode, double beta = 0.01) {
  ExperimentSpec s;
  s.name = "acceptance";
  s.m = kM;
  s.n = kN;
  s.q = 0.5;
  s.beta_grid = {beta};
  s.D_grid = std::move(D);
  s.sampling_modes = {mode};
  s.T = kT;
  s.trials = kTrials;
  s.base_seed = kBaseSeed;
  s.trace_stride = 50;
  s.threads = 1;  // timing comparisons run without contention
  s.write_traces = false;
  s.write_svg = false;
  return s;
}

// The four curves of the small-fig1 setting, computed once per process.
const std::vector<AggregateCurve>& fig1_curves() {
  static const std::vector<AggregateCurve> curves = [] {
    auto subsampled = harness::simulate(desk_spec(
        {SubsampleSize::fixed(4), SubsampleSize::fixed(40), SubsampleSize::fixed(1000)},
        SamplingMode::WithReplacement));
    auto full = harness::simulate(
        desk_spec({SubsampleSize::full_sample()}, SamplingMode::WithoutReplacement));
    subsampled.push_back(std::move(full.front()));
    return subsampled;
  }();
  return curves;
}

Outcome criterion1() {
  const AggregateCurve& c = fig1_curves()[1];  // D = 40
  const double ratio = c.mean_final_error / c.mean_initial_error;
  std::size_t clean = 0;
  for (const auto& t : c.per_trial) clean += t.jump_count == 0;
  Outcome o;
  o.pass = ratio <= kReductionFactor && clean >= kMinCleanTrials;
  o.detail = fmt("m=%zu n=%zu beta=0.01 D=40 T=%zu: mean final/initial error %.3e (need <= %.0e); "
                 "trials without jumps %zu/%zu (need >= %zu)",
                 kM, kN, kT, ratio, kReductionFactor, clean, c.trials, kMinCleanTrials);
  return o;
}

Outcome criterion2() {
  const auto& curves = fig1_curves();
  Outcome o;
  o.pass = true;
  std::string spreads;
  for (std::size_t target : {kT / 4, kT / 2, kT}) {
    double lo = INFINITY, hi = 0.0;
    for (const auto& c : curves) {
      const auto it = std::find(c.iterations.begin(), c.iterations.end(), target);
      if (it == c.iterations.end()) return {false, fmt("iteration %zu not recorded", target)};
      const double v = c.mean_error[static_cast<std::size_t>(it - c.iterations.begin())];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double spread = hi / lo;
    o.pass = o.pass && spread <= kCurveAgreement;
    spreads += fmt(" k=%zu:%.3f", target, spread);
  }
  o.detail = "D in {4,40,1000,full}, max/min mean error at" + spreads +
             fmt(" (need <= %.0f)", kCurveAgreement);
  return o;
}

Outcome criterion3() {
  const auto& curves = fig1_curves();
  std::size_t ordered = 0;
  for (std::size_t t = 0; t < kTrials; ++t) {
    bool ok = true;
    for (std::size_t c = 1; c < curves.size(); ++c) {
      ok = ok && curves[c - 1].per_trial[t].total_wall_ns < curves[c].per_trial[t].total_wall_ns;
    }
    ordered += ok;
  }
  std::string means;
  for (const auto& c : curves) {
    double total = 0.0;
    for (const auto& t : c.per_trial) total += static_cast<double>(t.total_wall_ns);
    means += fmt(" D=%s:%.1fms", c.key.D.full ? "full" : std::to_string(c.key.D.D).c_str(),
                 total / static_cast<double>(c.trials) * 1e-6);
  }
  return {ordered == kTrials,
          fmt("trials with wall(4) < wall(40) < wall(1000) < wall(full): %zu/%zu; mean",
              ordered, kTrials) + means};
}

Outcome criterion4() {
  const auto curves = harness::simulate(desk_spec({SubsampleSize::fixed(8), SubsampleSize::fixed(12)},
                                                  SamplingMode::WithReplacement, 0.11));
  const AggregateCurve& d8 = curves[0];
  const AggregateCurve& d12 = curves[1];
  const bool finite_median = std::isfinite(d8.first_jump_median);
  Outcome o;
  o.pass = d8.jump_fraction > d12.jump_fraction && finite_median && d12.jump_fraction <= 0.2;
  o.detail = fmt("beta=0.11: jump fraction D=8 %.1f vs D=12 %.1f (need D8 > D12, D12 <= 0.2); "
                 "median first jump D=8 %s",
                 d8.jump_fraction, d12.jump_fraction,
                 finite_median ? fmt("%.0f", d8.first_jump_median).c_str() : "none");
  return o;
}

Outcome criterion5() {
  const auto start = std::chrono::steady_clock::now();
  const auto r = verify::verify_chernoff_grid(30);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {r.violations == 0 && seconds < kChernoffSeconds,
          fmt("N<=30, r in {0.05..0.95}: %zu cases, %zu violations, max exact/bound %.6f, %.3fs "
              "(need 0 violations, < %.0fs)",
              r.cases, r.violations, r.max_ratio, seconds, kChernoffSeconds)};
}

Vector random_iterate(const LinearSystem& sys, Rng& rng) {
  Vector x = *sys.truth();
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.size()));
  for (Eigen::Index j = 0; j < x.size(); ++j) x[j] += scale * rng.normal();
  return x;
}

Outcome criterion6() {
  std::size_t violations = 0;
  const CorruptionSpec corruption{0.05};
  for (std::uint64_t i = 0; i < 100; ++i) {
    const std::uint64_t seed = mix_seed({kBaseSeed, 6, i});
    const auto sys = generate_system(2000, 20, corruption, RngHandle{seed, 0});
    Rng rng(RngHandle{seed, static_cast<std::uint64_t>(Stream::Verify)});
    if (!verify::full_sample_sandwich(sys, random_iterate(sys, rng), 0.5, 0.05).holds()) ++violations;
  }
  return {violations == 0,
          fmt("100 instances m=2000 n=20 beta=0.05 q=0.5: %zu sandwich violations (need 0)", violations)};
}

Outcome criterion7() {
  const std::uint64_t seed = mix_seed({kBaseSeed, 7});
  const auto sys = generate_system(2000, 20, CorruptionSpec{0.05}, RngHandle{seed, 0});
  Rng rng(RngHandle{seed, static_cast<std::uint64_t>(Stream::Verify)});
  const Vector x = random_iterate(sys, rng);
  const auto params = theory::TheoryParams::make(0.5, 0.05, 0.2, 0.125);
  Outcome o;
  o.pass = true;
  for (std::size_t D : {10, 20, 40}) {
    const auto up = verify::verify_subquantile_upper(sys, x, params, D, 10000, RngHandle{seed + D, 0});
    const auto lo = verify::verify_subquantile_lower(sys, x, params, D, 10000, RngHandle{seed + D + 1000, 0});
    o.pass = o.pass && up.pass && lo.pass;
    o.detail += fmt("%sD=%zu upper %.4f<=%.4f+3*%.4f lower %.4f<=%.4f+3*%.4f", D == 10 ? "" : "; ", D,
                    up.empirical_rate, up.theoretical_bound, up.mc_stderr, lo.empirical_rate,
                    lo.theoretical_bound, lo.mc_stderr);
  }
  return o;
}

Outcome criterion8() {
  harness::LowerBoundConfig cfg;
  cfg.m = 5000;
  cfg.n = 100;
  cfg.beta = 0.1;
  cfg.D = SubsampleSize::fixed(1);
  cfg.T = 10000;
  cfg.magnitude = 1e6;
  cfg.trials = 10;
  cfg.base_seed = kBaseSeed;
  const auto report = harness::run_lower_bound_demo(cfg);
  std::size_t failing = 0;
  std::size_t late = 0;
  std::string ks;
  for (const auto& t : report.trials) {
    if (!(t.final_error >= 1.0)) continue;
    ++failing;
    const bool in_window =
        t.last_corrupted_projection && *t.last_corrupted_projection + report.window >= cfg.T;
    late += in_window;
    ks += t.last_corrupted_projection ? fmt(" %zu", *t.last_corrupted_projection) : " -";
  }
  return {failing >= 8 && late == failing,
          fmt("D=1 beta=0.1 |eps|=1e6 n=100 T=%zu: final error >= 1 in %zu/10 (need >= 8); "
              "k* >= T-%zu=%zu in %zu/%zu failing trials (need all); k*:",
              cfg.T, failing, report.window, cfg.T - report.window, late, failing) + ks};
}

Outcome criterion9() {
  std::size_t steps = 0, accepted_steps = 0, clean_accepts = 0, rejections = 0, corrupted_accepts = 0;
  std::size_t projection_bad = 0, expansive = 0, rejection_bad = 0, floor_bad = 0;
  for (std::uint64_t inst = 0; inst < 40; ++inst) {
    const std::uint64_t seed = mix_seed({kBaseSeed, 9, inst});
    const CorruptionSpec corruption{0.3, inst % 2 ? CorruptionPlacement::UniformRandom
                                                  : CorruptionPlacement::FirstRows};
    const auto sys = generate_system(400, 10, corruption, RngHandle{seed, 0});
    SolverConfig cfg;
    cfg.quantile = QuantileSpec{0.5, 1 + inst % 3,
                                inst % 4 < 2 ? SamplingMode::WithReplacement : SamplingMode::WithoutReplacement};
    cfg.T = 1;
    cfg.seed = RngHandle{seed, 0};
    const double min_eps = sys.min_corruption_magnitude();
    KaczmarzIteration it(sys, cfg, SolverKind::Quantile, Vector::Zero(10));
    double prev_error = it.error();
    for (int s = 0; s < 250; ++s) {
      const Vector before = it.x();
      const StepRecord rec = it.step();
      ++steps;
      const auto row = static_cast<Eigen::Index>(rec.update_index);
      if (rec.accepted) {
        ++accepted_steps;
        const double b = sys.rhs()[row];
        if (!(std::abs(sys.rows().row(row).dot(it.x()) - b) < kProjectionTol * (1 + std::abs(b)))) ++projection_bad;
        if (rec.update_corrupted) {
          ++corrupted_accepts;
          if (!(rec.error >= min_eps - kCorruptedFloorTol)) ++floor_bad;
        } else {
          ++clean_accepts;
          if (!(rec.error <= prev_error + kNonExpansiveTol)) ++expansive;
        }
      } else {
        ++rejections;
        if (std::memcmp(before.data(), it.x().data(), sizeof(double) * 10) != 0) ++rejection_bad;
      }
      prev_error = rec.error;
    }
  }

  // Bitwise determinism of whole runs.
  std::size_t det_steps = 0, det_bad = 0;
  for (std::uint64_t r = 0; r < 5; ++r) {
    const std::uint64_t seed = mix_seed({kBaseSeed, 90, r});
    const auto sys = generate_system(1000, 20, CorruptionSpec{0.1}, RngHandle{seed, 0});
    SolverConfig cfg;
    cfg.quantile = QuantileSpec{0.5, 8, SamplingMode::WithReplacement};
    cfg.T = 400;
    cfg.seed = RngHandle{seed, 0};
    const auto a = run_qrk(sys, cfg);
    const auto b = run_qrk(sys, cfg);
    for (std::size_t k = 0; k < a.records.size(); ++k) {
      const auto& x = a.records[k];
      const auto& y = b.records[k];
      ++det_steps;
      if (std::memcmp(&x.error, &y.error, sizeof(double)) || x.accepted != y.accepted ||
          x.update_index != y.update_index ||
          std::memcmp(&x.quantile_value, &y.quantile_value, sizeof(double)) ||
          std::memcmp(&x.residual_abs, &y.residual_abs, sizeof(double))) {
        ++det_bad;
      }
    }
    if (a.final_x != b.final_x) ++det_bad;
  }

  const bool enough = steps >= kMinPropertySteps && accepted_steps >= kMinPropertySteps &&
                      clean_accepts >= kMinPropertySteps && rejections >= kMinPropertySteps &&
                      det_steps >= kMinPropertySteps && corrupted_accepts > 0;
  const bool clean = projection_bad + expansive + rejection_bad + floor_bad + det_bad == 0;
  return {enough && clean,
          fmt("%zu steps: projection %zu/%zu bad, non-expansive %zu/%zu bad, rejection identity "
              "%zu/%zu bad, corrupted floor %zu/%zu bad; determinism %zu/%zu steps bad",
              steps, projection_bad, accepted_steps, expansive, clean_accepts, rejection_bad,
              rejections, floor_bad, corrupted_accepts, det_bad, det_steps)};
}

Outcome criterion10() {
  Rng rng(RngHandle{mix_seed({kBaseSeed, 10}), 0});
  std::size_t mismatches = 0, ties = 0, fallback = 0;
  for (int c = 0; c < 10000; ++c) {
    const std::size_t N = 1 + rng.uniform_index(8);
    std::vector<double> v(N);
    for (auto& x : v) x = static_cast<double>(rng.uniform_index(5)) - 2.0;
    const std::uint64_t den = 2 + rng.uniform_index(19);
    const std::uint64_t num = 1 + rng.uniform_index(den - 1);
    const double q = static_cast<double>(num) / static_cast<double>(den);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const std::uint64_t rank = std::max<std::uint64_t>(1, num * N / den);
    if (num * N < den) ++fallback;
    if (std::set<double>(v.begin(), v.end()).size() < N) ++ties;
    if (multiset_quantile(v, q) != sorted[rank - 1]) ++mismatches;
  }

  std::size_t state_bad = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const std::uint64_t seed = mix_seed({kBaseSeed, 100, s});
    const std::size_t m = 50 + rng.uniform_index(400);
    const auto sys = generate_system(m, 5, CorruptionSpec{0.1}, RngHandle{seed, 0});
    Rng xr(RngHandle{seed, 7});
    const Vector x = random_iterate(sys, xr);
    const double q = 0.05 + 0.9 * xr.uniform01();
    const double dm = subsampled_residual_quantile(
        sys, x, QuantileSpec{q, m, SamplingMode::WithoutReplacement}, RngHandle{seed, 2});
    const double full = subsampled_residual_quantile(
        sys, x, QuantileSpec{q, 1, SamplingMode::FullSample}, RngHandle{seed, 2});
    if (dm != full) ++state_bad;
  }
  return {mismatches == 0 && state_bad == 0 && ties > 0 && fallback > 0,
          fmt("10000 cases N<=8 (%zu with ties, %zu with qN<1): %zu mismatches; "
              "D=m without vs full on 100 states: %zu mismatches",
              ties, fallback, mismatches, state_bad)};
}

const std::map<int, std::pair<const char*, std::function<Outcome()>>>& criteria() {
  static const std::map<int, std::pair<const char*, std::function<Outcome()>>> all{
      {1, {"convergence at desk scale", criterion1}},
      {2, {"per-iteration rate independent of D", criterion2}},
      {3, {"runtime ordering in D", criterion3}},
      {4, {"jump phenomenology", criterion4}},
      {5, {"Chernoff dominance", criterion5}},
      {6, {"full-sample sandwich", criterion6}},
      {7, {"subsampled sandwich Monte Carlo", criterion7}},
      {8, {"lower-bound failure demo", criterion8}},
      {9, {"solver invariants", criterion9}},
      {10, {"quantile oracle", criterion10}},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      const int c = std::atoi(argv[++i]);
      if (!criteria().count(c)) {
        std::fprintf(stderr, "unknown criterion %s\n", argv[i]);
        return 2;
      }
      selected.push_back(c);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]...\n", argv[0]);
      return 2;
    }
  }
  if (selected.empty()) {
    for (const auto& [id, _] : criteria()) selected.push_back(id);
  }

  int failures = 0;
  for (int id : selected) {
    const auto& [name, run] = criteria().at(id);
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
