#include "qrk/theory.hpp"

#include <algorithm>
#include <cmath>

#include "qrk/error.hpp"

namespace qrk::theory {

namespace {

// Closed forms such as log(e)/log(e) can land one ulp off an integer before
// ceil/floor; snap those back.
double snap(double x) {
  const double nearest = std::round(x);
  return std::abs(x - nearest) <= 1e-12 * std::max(1.0, std::abs(x)) ? nearest : x;
}

double xlogx_over(double a, double b) { return a == 0.0 ? 0.0 : a * std::log(a / b); }

}  // namespace

double default_upper_constant(double q) {
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::DomainError, "q must lie in (0, 1)");
  return 6.0 / ((1.0 - q) / 4.0);
}

TheoryParams TheoryParams::make(double q, double beta, double eps_u, std::optional<double> eps_l) {
  TheoryParams p;
  p.q = q;
  p.beta = beta;
  p.eps_u = eps_u;
  p.eps_l = eps_l.value_or(q / 4.0);
  p.C1_upper = default_upper_constant(q);
  p.validate();
  return p;
}

void TheoryParams::validate() const {
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::DomainError, "q must lie in (0, 1)");
  if (!(eps_l > 0.0 && eps_l < q)) throw Error(ErrorCode::DomainError, "eps_l must lie in (0, q)");
  if (!(eps_u > 0.0 && eps_u < 1.0 - q)) {
    throw Error(ErrorCode::DomainError, "eps_u must lie in (0, 1 - q)");
  }
  if (!(beta >= 0.0 && beta < std::min(q - eps_l, 1.0 - q - eps_u))) {
    throw Error(ErrorCode::DomainError, "beta must lie in [0, min(q - eps_l, 1 - q - eps_u))");
  }
}

double kl_bernoulli(double p, double r) {
  if (!(r > 0.0 && r < 1.0)) throw Error(ErrorCode::DomainError, "r must lie in (0, 1)");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::DomainError, "p must lie in [0, 1]");
  const double value = xlogx_over(p, r) + xlogx_over(1.0 - p, 1.0 - r);
  return std::max(0.0, value);
}

double chernoff_tail(std::size_t N, double r, std::size_t k, TailSide side) {
  if (N == 0) throw Error(ErrorCode::DomainError, "N must be positive");
  if (k > N) throw Error(ErrorCode::DomainError, "k must not exceed N");
  const double mean = snap(static_cast<double>(N) * r);
  const auto kk = static_cast<double>(k);
  if (side == TailSide::Lower && kk > mean) {
    throw Error(ErrorCode::SideMismatch, "lower tail needs k <= N r");
  }
  if (side == TailSide::Upper && kk < mean) {
    throw Error(ErrorCode::SideMismatch, "upper tail needs k >= N r");
  }
  return std::exp(-static_cast<double>(N) * kl_bernoulli(kk / static_cast<double>(N), r));
}

double quantile_bound_failure(const TheoryParams& params, std::size_t D, TailSide side) {
  params.validate();
  if (D == 0) throw Error(ErrorCode::DomainError, "D must be positive");
  const double shifted = side == TailSide::Upper ? params.q + params.eps_u : params.q - params.eps_l;
  return std::exp(-kl_bernoulli(params.q, shifted) * static_cast<double>(D));
}

double union_failure_bound(const TheoryParams& params, std::size_t D, std::size_t T) {
  if (T == 0) throw Error(ErrorCode::DomainError, "T must be positive");
  return std::min(1.0, static_cast<double>(T) * quantile_bound_failure(params, D, TailSide::Upper));
}

double theorem_failure_bound(double q, double beta, std::size_t D, double T) {
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::DomainError, "q must lie in (0, 1)");
  if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorCode::DomainError, "beta must lie in (0, 1)");
  if (!(T >= 1.0)) throw Error(ErrorCode::DomainError, "T must be >= 1");
  return std::pow(T, -5.0) *
         std::exp(-(1.0 - q) / 4.0 * std::log(1.0 / beta) * static_cast<double>(D));
}

std::size_t min_subsample_upper(double q, double beta, double T, std::optional<double> C_override) {
  if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorCode::DomainError, "beta must lie in (0, 1)");
  if (!(T > 1.0)) throw Error(ErrorCode::DomainError, "T must exceed 1");
  const double C = C_override ? *C_override : default_upper_constant(q);
  if (!(C > 0.0)) throw Error(ErrorCode::DomainError, "constant must be positive");
  const double ratio = snap(C * std::log(T) / std::log(1.0 / beta));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(ratio)));
}

std::size_t max_subsample_lower(double beta, double T, double c0) {
  if (!(beta > 0.0 && beta <= 1.0)) throw Error(ErrorCode::DomainError, "beta must lie in (0, 1]");
  if (!(T >= 1.0)) throw Error(ErrorCode::DomainError, "T must be >= 1");
  if (!(c0 > 0.0 && c0 < 1.0)) throw Error(ErrorCode::DomainError, "c0 must lie in (0, 1)");
  const double ratio = snap(c0 * std::log(T) / std::log(2.0 / beta));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(ratio)));
}

double disaster_probability(double beta, std::size_t D) {
  if (!(beta > 0.0 && beta <= 1.0)) throw Error(ErrorCode::DomainError, "beta must lie in (0, 1]");
  if (D == 0) throw Error(ErrorCode::DomainError, "D must be positive");
  return std::pow(beta / 2.0, static_cast<double>(D + 1));
}

double fast_contraction_floor(std::size_t n, double kappa, double C) {
  if (n == 0) throw Error(ErrorCode::DomainError, "n must be positive");
  if (!(kappa > 0.0 && kappa < 1.0)) throw Error(ErrorCode::DomainError, "kappa must lie in (0, 1)");
  if (!(C > 0.0)) throw Error(ErrorCode::DomainError, "C must be positive");
  const double floor = 1.0 - C / (kappa * static_cast<double>(n));
  if (!(floor > 0.0)) throw Error(ErrorCode::DomainError, "C/(kappa n) must be below 1");
  return floor;
}

double phi_bound(double sigma_max_scaled, double q_prime) {
  if (!(sigma_max_scaled > 0.0)) throw Error(ErrorCode::DomainError, "sigma_max must be positive");
  if (!(q_prime >= 0.0 && q_prime < 1.0)) {
    throw Error(ErrorCode::DomainError, "q' must lie in [0, 1)");
  }
  return sigma_max_scaled / std::sqrt(1.0 - q_prime);
}

double lower_bound_error_floor(std::size_t n, double min_corruption) {
  if (n < 2) throw Error(ErrorCode::DomainError, "n must be at least 2");
  const double exponent = std::floor(snap(static_cast<double>(n) / std::log(static_cast<double>(n))));
  return std::pow(0.5, exponent) * min_corruption * min_corruption;
}

std::size_t lower_bound_window(std::size_t n) {
  if (n < 2) throw Error(ErrorCode::DomainError, "n must be at least 2");
  return static_cast<std::size_t>(
      std::ceil(snap(static_cast<double>(n) / std::log(static_cast<double>(n)))));
}

}  // namespace qrk::theory
