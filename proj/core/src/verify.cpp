#include "qrk/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "qrk/error.hpp"

namespace qrk::verify {

MonteCarloReport MonteCarloReport::from_counts(std::string name, std::string params,
                                               std::size_t trials, std::size_t violations,
                                               double bound) {
  MonteCarloReport r;
  r.check_name = std::move(name);
  r.instance_params = std::move(params);
  r.trials = trials;
  r.violations = violations;
  r.theoretical_bound = bound;
  if (trials > 0) {
    r.empirical_rate = static_cast<double>(violations) / static_cast<double>(trials);
    r.mc_stderr = std::sqrt(r.empirical_rate * (1.0 - r.empirical_rate) / static_cast<double>(trials));
  }
  r.pass = r.empirical_rate <= r.theoretical_bound + 3.0 * r.mc_stderr;
  return r;
}

namespace {

void check_sparsity(const LinearSystem& sys, double beta) {
  const double allowed = std::ceil(beta * static_cast<double>(sys.rows_count()) - 1e-9);
  if (static_cast<double>(sys.corrupted_set().size()) > allowed) {
    throw Error(ErrorCode::DomainError, "corrupted set is larger than beta m");
  }
}

std::string describe(const LinearSystem& sys, const theory::TheoryParams& p, std::size_t D,
                     SamplingMode mode, bool upper) {
  std::ostringstream os;
  os << "m=" << sys.rows_count() << ";n=" << sys.cols_count() << ";beta=" << p.beta
     << ";q=" << p.q << ';' << (upper ? "eps_u=" : "eps_l=") << (upper ? p.eps_u : p.eps_l)
     << ";D=" << D << ";mode=" << to_string(mode);
  return os.str();
}

// Counts trials whose subsampled quantile lands on the wrong side of
// `threshold`.
template <typename Violates>
std::size_t count_violations(const LinearSystem& sys, const Vector& x, const QuantileSpec& spec,
                             std::size_t trials, RngHandle handle, Violates violates) {
  Rng rng(handle.with_stream(Stream::Verify));
  SubsampleDrawer drawer(sys.rows_count(), spec);
  IndexSet sample;
  std::vector<double> values;
  std::size_t violations = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    drawer.draw(rng, sample);
    values.resize(sample.size());
    for (std::size_t j = 0; j < sample.size(); ++j) {
      const auto row = static_cast<Eigen::Index>(sample[j]);
      values[j] = std::abs(sys.rows().row(row).dot(x) - sys.rhs()[row]);
    }
    if (violates(select_quantile(values, spec.q))) ++violations;
  }
  return violations;
}

}  // namespace

MonteCarloReport verify_subquantile_upper(const LinearSystem& sys, const Vector& x,
                                          const theory::TheoryParams& params, std::size_t D,
                                          std::size_t trials, RngHandle rng, SamplingMode mode) {
  params.validate();
  check_sparsity(sys, params.beta);
  const double threshold = uncorrupted_quantile(sys, x, params.q + params.beta + params.eps_u);
  const QuantileSpec spec{params.q, D, mode};
  const std::size_t violations =
      count_violations(sys, x, spec, trials, rng, [threshold](double v) { return v > threshold; });
  const double bound = mode == SamplingMode::FullSample
                           ? 0.0
                           : theory::quantile_bound_failure(params, D, theory::TailSide::Upper);
  return MonteCarloReport::from_counts("subquantile_upper", describe(sys, params, D, mode, true),
                                       trials, violations, bound);
}

MonteCarloReport verify_subquantile_lower(const LinearSystem& sys, const Vector& x,
                                          const theory::TheoryParams& params, std::size_t D,
                                          std::size_t trials, RngHandle rng, SamplingMode mode) {
  params.validate();
  check_sparsity(sys, params.beta);
  const IndexSet clean = sys.uncorrupted_set();
  const double level = (params.q - params.beta - params.eps_l) / (1.0 - params.beta);
  const double threshold = uncorrupted_quantile(sys, x, level, clean);
  const QuantileSpec spec{params.q, D, mode};
  const std::size_t violations =
      count_violations(sys, x, spec, trials, rng, [threshold](double v) { return v < threshold; });
  const double bound = mode == SamplingMode::FullSample
                           ? 0.0
                           : theory::quantile_bound_failure(params, D, theory::TailSide::Lower);
  return MonteCarloReport::from_counts("subquantile_lower", describe(sys, params, D, mode, false),
                                       trials, violations, bound);
}

bool lower_chain_holds(const LinearSystem& sys, const Vector& x, const theory::TheoryParams& params) {
  params.validate();
  check_sparsity(sys, params.beta);
  const IndexSet clean = sys.uncorrupted_set();
  const double all_rows = uncorrupted_quantile(sys, x, params.q - params.beta - params.eps_l);
  const double clean_rows = uncorrupted_quantile(
      sys, x, (params.q - params.beta - params.eps_l) / (1.0 - params.beta), clean);
  return all_rows <= clean_rows;
}

Sandwich full_sample_sandwich(const LinearSystem& sys, const Vector& x, double q, double beta) {
  if (!(beta >= 0.0 && beta < std::min(q, 1.0 - q))) {
    throw Error(ErrorCode::DomainError, "sandwich needs beta < min(q, 1 - q)");
  }
  check_sparsity(sys, beta);
  Sandwich s;
  s.value = full_residual_quantile(sys, x, q);
  s.lower = beta > 0.0 ? uncorrupted_quantile(sys, x, q - beta) : uncorrupted_quantile(sys, x, q);
  s.upper = beta > 0.0 ? uncorrupted_quantile(sys, x, q + beta) : uncorrupted_quantile(sys, x, q);
  return s;
}

double power_iteration_sigma_max(const Matrix& a, RngHandle handle, double tolerance,
                                 std::size_t max_iterations, std::size_t* iterations) {
  if (a.rows() == 0 || a.cols() == 0) throw Error(ErrorCode::InvalidDimension, "empty matrix");
  Rng rng(handle.with_stream(Stream::PowerIteration));
  Vector v = sample_unit_sphere(static_cast<std::size_t>(a.cols()), rng);
  double lambda = 0.0;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    Vector w = a.transpose() * (a * v);
    const double next = w.norm();
    if (next == 0.0) {
      if (iterations) *iterations = it;
      return 0.0;
    }
    v = w / next;
    if (it > 1 && std::abs(next - lambda) <= tolerance * next) {
      if (iterations) *iterations = it;
      return std::sqrt(next);
    }
    lambda = next;
  }
  throw Error(ErrorCode::ConvergenceFailure, "power iteration did not converge");
}

double smallest_singular_value(const Matrix& a) {
  if (a.rows() < a.cols()) return 0.0;
  const Eigen::MatrixXd gram = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, solver.eigenvalues().minCoeff()));
}

SpectralReport spectral_check(const LinearSystem& sys, double alpha0, std::size_t subset_trials,
                              RngHandle handle) {
  if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw Error(ErrorCode::DomainError, "alpha0 must lie in (0, 1]");
  const std::size_t m = sys.rows_count();
  const std::size_t n = sys.cols_count();
  if (m < n) throw Error(ErrorCode::InvalidDimension, "spectral check needs m >= n");
  const double scale = std::sqrt(static_cast<double>(n) / static_cast<double>(m));

  SpectralReport report;
  report.sigma_max = power_iteration_sigma_max(sys.rows(), handle, 1e-10, 10000, &report.power_iterations);
  report.sigma_max_scaled = report.sigma_max * scale;
  report.alpha0 = alpha0;
  report.subset_size = std::min(
      m, static_cast<std::size_t>(std::ceil(alpha0 * static_cast<double>(m) - 1e-9)));
  report.subset_trials = subset_trials;
  report.reference_lower_bound = std::sqrt(2.0 * std::numbers::pi) * std::pow(alpha0, 1.5) / 24.0;

  Rng rng(handle.with_stream(Stream::Verify));
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Matrix subset(static_cast<Eigen::Index>(report.subset_size), static_cast<Eigen::Index>(n));
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < subset_trials; ++t) {
    for (std::size_t j = 0; j < report.subset_size; ++j) {
      std::swap(perm[j], perm[j + rng.uniform_index(m - j)]);
      subset.row(static_cast<Eigen::Index>(j)) = sys.rows().row(static_cast<Eigen::Index>(perm[j]));
    }
    best = std::min(best, smallest_singular_value(subset) * scale);
  }
  report.sampled_min_sigma_scaled = subset_trials > 0 ? best : std::numeric_limits<double>::quiet_NaN();
  return report;
}

long double exact_binomial_tail(std::size_t N, double r, std::size_t k, theory::TailSide side) {
  if (N == 0 || N > 64) throw Error(ErrorCode::DomainError, "exact tail supports 1 <= N <= 64");
  if (k > N) throw Error(ErrorCode::DomainError, "k must not exceed N");
  if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::DomainError, "r must lie in [0, 1]");
  // Pascal row by additions: every entry is an integer below 2^64, exact in
  // the 64-bit long double mantissa.
  std::vector<long double> choose(N + 1, 0.0L);
  choose[0] = 1.0L;
  for (std::size_t row = 1; row <= N; ++row) {
    for (std::size_t j = row; j > 0; --j) choose[j] += choose[j - 1];
  }
  const long double p = r;
  const long double q = 1.0L - p;
  const std::size_t lo = side == theory::TailSide::Lower ? 0 : k;
  const std::size_t hi = side == theory::TailSide::Lower ? k : N;
  long double sum = 0.0L;
  for (std::size_t j = lo; j <= hi; ++j) {
    sum += choose[j] * std::pow(p, static_cast<long double>(j)) *
           std::pow(q, static_cast<long double>(N - j));
  }
  return sum;
}

ChernoffGridReport verify_chernoff_grid(std::size_t N_max) {
  if (N_max > 64) throw Error(ErrorCode::DomainError, "N_max must not exceed 64");
  ChernoffGridReport report;
  report.N_max = N_max;
  for (std::size_t N = 1; N <= N_max; ++N) {
    for (int step = 1; step <= 19; ++step) {
      const double r = static_cast<double>(step) / 20.0;
      for (std::size_t k = 0; k <= N; ++k) {
        for (auto side : {theory::TailSide::Lower, theory::TailSide::Upper}) {
          double bound = 0.0;
          try {
            bound = theory::chernoff_tail(N, r, k, side);
          } catch (const Error& e) {
            if (e.code() == ErrorCode::SideMismatch) continue;
            throw;
          }
          const long double exact = exact_binomial_tail(N, r, k, side);
          ++report.cases;
          report.max_ratio = std::max(report.max_ratio, static_cast<double>(exact / bound));
          if (exact > static_cast<long double>(bound) * (1.0L + 1e-12L)) ++report.violations;
        }
      }
    }
  }
  return report;
}

void write_verification_csv(const std::vector<MonteCarloReport>& reports, std::ostream& os) {
  os << "check_name,instance_params,trials,violations,empirical_rate,bound,stderr,pass\n";
  char buf[3][40];
  for (const auto& r : reports) {
    std::snprintf(buf[0], sizeof buf[0], "%.17g", r.empirical_rate);
    std::snprintf(buf[1], sizeof buf[1], "%.17g", r.theoretical_bound);
    std::snprintf(buf[2], sizeof buf[2], "%.17g", r.mc_stderr);
    os << r.check_name << ',' << r.instance_params << ',' << r.trials << ',' << r.violations << ','
       << buf[0] << ',' << buf[1] << ',' << buf[2] << ',' << (r.pass ? 1 : 0) << '\n';
  }
}

void write_verification_csv(const std::vector<MonteCarloReport>& reports,
                            const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  write_verification_csv(reports, os);
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace qrk::verify
