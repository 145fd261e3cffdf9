#pragma once

#include <cstddef>
#include <optional>

namespace qrk::theory {

enum class TailSide { Lower, Upper };

/// Parameters of the two-sided subsampled-quantile bounds and of the
/// subsample-size thresholds. Natural logarithms throughout.
struct TheoryParams {
  double q = 0.5;
  double beta = 0.0;
  double eps_l = 0.125;
  double eps_u = 0.25;
  /// alpha' = C1' beta in the convergence argument; matrix dependent, so it
  /// is carried for reporting only.
  double alpha_prime = 0.0;
  double C1_upper = 48.0;
  double c0_lower = 0.5;
  double kappa = 0.5;

  /// eps_l defaults to q/4 and C1_upper to 24/(1-q).
  static TheoryParams make(double q, double beta, double eps_u,
                           std::optional<double> eps_l = std::nullopt);

  /// alpha = q - beta - eps_l, the guaranteed fraction of acceptable clean rows.
  double alpha() const noexcept { return q - beta - eps_l; }

  /// Throws DomainError unless 0 < eps_l < q, 0 < eps_u < 1 - q and
  /// 0 <= beta < min(q - eps_l, 1 - q - eps_u).
  void validate() const;
};

/// Proof-derived constant 24/(1-q) for the upper threshold.
double default_upper_constant(double q);

/// Bernoulli relative entropy p log(p/r) + (1-p) log((1-p)/(1-r)) with
/// 0 log 0 = 0. Requires p in [0,1], r in (0,1).
double kl_bernoulli(double p, double r);

/// exp(-N KL(k/N || r)), an upper bound on P(X <= k) (Lower, k <= Nr) or
/// P(X >= k) (Upper, k >= Nr) for X ~ Bin(N, r). Throws SideMismatch when k
/// is on the wrong side of Nr.
double chernoff_tail(std::size_t N, double r, std::size_t k, TailSide side);

/// Per-step probability bound that the subsampled quantile escapes the
/// uncorrupted sandwich: exp(-KL(q || q+eps_u) D) for Upper and
/// exp(-KL(q || q-eps_l) D) for Lower.
double quantile_bound_failure(const TheoryParams& params, std::size_t D, TailSide side);

/// min{1, T * quantile_bound_failure(params, D, Upper)}.
double union_failure_bound(const TheoryParams& params, std::size_t D, std::size_t T);

/// T^-5 exp(-(1-q)/4 log(1/beta) D): the failure bound that holds once D
/// clears the upper threshold.
double theorem_failure_bound(double q, double beta, std::size_t D, double T);

/// ceil(C log T / log(1/beta)) with C = C_override or 24/(1-q). T is a real
/// horizon so that T = e is expressible. Requires beta in (0,1), T > 1.
std::size_t min_subsample_upper(double q, double beta, double T,
                                std::optional<double> C_override = std::nullopt);

/// max{floor(c0 log T / log(2/beta)), 1}. Requires c0 in (0,1), T >= 1,
/// beta in (0,1].
std::size_t max_subsample_lower(double beta, double T, double c0);

/// (beta/2)^(D+1): per-step lower bound on accepting a corrupted row.
double disaster_probability(double beta, std::size_t D);

/// 1 - C/(kappa n). Throws DomainError when the result would be <= 0.
double fast_contraction_floor(std::size_t n, double kappa, double C);

/// sigma_max_scaled / sqrt(1 - q'), where sigma_max_scaled is
/// sigma_max(A) sqrt(n/m).
double phi_bound(double sigma_max_scaled, double q_prime);

/// (1/2)^floor(n / ln n) * min|eps|^2: the squared-error floor after a late
/// corrupted projection.
double lower_bound_error_floor(std::size_t n, double min_corruption);

/// ceil(n / ln n), the length of the final window that must contain a
/// corrupted projection for the squared-error floor to apply.
std::size_t lower_bound_window(std::size_t n);

}  // namespace qrk::theory
