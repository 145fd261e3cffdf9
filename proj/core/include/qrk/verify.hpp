#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "qrk/quantile.hpp"
#include "qrk/rng.hpp"
#include "qrk/system.hpp"
#include "qrk/theory.hpp"

namespace qrk::verify {

/// Outcome of a Monte-Carlo check of a one-sided probability bound.
struct MonteCarloReport {
  std::string check_name;
  std::string instance_params;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double empirical_rate = 0.0;
  double theoretical_bound = 0.0;
  double mc_stderr = 0.0;
  /// empirical_rate <= theoretical_bound + 3 mc_stderr
  bool pass = false;

  static MonteCarloReport from_counts(std::string name, std::string params, std::size_t trials,
                                      std::size_t violations, double bound);
};

/// Draws `trials` subsamples at the fixed iterate x and counts how often the
/// subsampled q-quantile exceeds the uncorrupted (q+beta+eps_u)-quantile.
/// The bound is exp(-KL(q||q+eps_u) D); in FullSample mode the inequality is
/// deterministic and the bound is 0.
MonteCarloReport verify_subquantile_upper(const LinearSystem& sys, const Vector& x,
                                          const theory::TheoryParams& params, std::size_t D,
                                          std::size_t trials, RngHandle rng,
                                          SamplingMode mode = SamplingMode::WithReplacement);

/// Mirror of the upper check: violation when the subsampled quantile falls
/// below the uncorrupted ((q-beta-eps_l)/(1-beta))-quantile over the clean
/// rows. Bound exp(-KL(q||q-eps_l) D).
MonteCarloReport verify_subquantile_lower(const LinearSystem& sys, const Vector& x,
                                          const theory::TheoryParams& params, std::size_t D,
                                          std::size_t trials, RngHandle rng,
                                          SamplingMode mode = SamplingMode::WithReplacement);

/// Deterministic chain Q~_{q-beta-eps_l}(x) <= Q~_{(q-beta-eps_l)/(1-beta)}(x, clean rows).
bool lower_chain_holds(const LinearSystem& sys, const Vector& x, const theory::TheoryParams& params);

struct Sandwich {
  double lower = 0.0;  ///< Q~_{q-beta}(x)
  double value = 0.0;  ///< full-sample Q_q(x)
  double upper = 0.0;  ///< Q~_{q+beta}(x)
  bool holds() const noexcept { return lower <= value && value <= upper; }
};

/// Full-sample quantile bracketed by uncorrupted quantiles. Requires
/// beta < min(q, 1-q) and |B| <= beta m.
Sandwich full_sample_sandwich(const LinearSystem& sys, const Vector& x, double q, double beta);

struct SpectralReport {
  double sigma_max = 0.0;
  double sigma_max_scaled = 0.0;  ///< sigma_max(A) sqrt(n/m)
  std::size_t power_iterations = 0;
  double alpha0 = 0.0;
  std::size_t subset_size = 0;
  std::size_t subset_trials = 0;
  /// Minimum over sampled subsets of sigma_min(A_S) sqrt(n/m). An upper
  /// estimate of the uniform smallest singular value, which is an infimum
  /// over all subsets.
  double sampled_min_sigma_scaled = 0.0;
  /// sqrt(2 pi) alpha0^1.5 / 24
  double reference_lower_bound = 0.0;
};

/// Largest singular value by power iteration on A^T A from a seeded start.
/// Converged when successive eigenvalue estimates agree to `tolerance`
/// (relative). Throws ConvergenceFailure after `max_iterations`.
double power_iteration_sigma_max(const Matrix& a, RngHandle rng, double tolerance = 1e-10,
                                 std::size_t max_iterations = 10000,
                                 std::size_t* iterations = nullptr);

/// Smallest singular value (the n-th; zero when rank deficient) via the
/// eigenvalues of the Gram matrix.
double smallest_singular_value(const Matrix& a);

SpectralReport spectral_check(const LinearSystem& sys, double alpha0, std::size_t subset_trials,
                              RngHandle rng);

/// P(X <= k) or P(X >= k) for X ~ Bin(N, r), summed in long double with
/// exact binomial coefficients (N <= 64).
long double exact_binomial_tail(std::size_t N, double r, std::size_t k, theory::TailSide side);

struct ChernoffGridReport {
  std::size_t N_max = 0;
  std::size_t cases = 0;
  std::size_t violations = 0;
  /// max over the grid of exact tail / Chernoff bound (<= 1 when dominated)
  double max_ratio = 0.0;
};

/// Every N <= N_max, r in {0.05, ..., 0.95}, every valid k on both sides.
/// A violation is an exact tail above the bound by more than 1e-12 relative;
/// the slack only absorbs rounding in the k = 0 and k = N cases, where the
/// two agree exactly in real arithmetic.
ChernoffGridReport verify_chernoff_grid(std::size_t N_max);

// Verification CSV:
// check_name,instance_params,trials,violations,empirical_rate,bound,stderr,pass
void write_verification_csv(const std::vector<MonteCarloReport>& reports, std::ostream& os);
void write_verification_csv(const std::vector<MonteCarloReport>& reports,
                            const std::filesystem::path& path);

}  // namespace qrk::verify
