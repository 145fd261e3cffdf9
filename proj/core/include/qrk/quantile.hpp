#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qrk/rng.hpp"
#include "qrk/system.hpp"

namespace qrk {

enum class SamplingMode { WithReplacement, WithoutReplacement, FullSample };

std::string_view to_string(SamplingMode mode) noexcept;
/// Accepts "with", "without", "full" and the enumerator spellings.
SamplingMode parse_sampling_mode(std::string_view text);

struct QuantileSpec {
  double q = 0.5;
  std::size_t D = 1;  ///< ignored in FullSample mode
  SamplingMode mode = SamplingMode::WithReplacement;

  /// Throws DomainError unless 0 < q < 1 and D >= 1.
  void validate() const;
};

/// 1-based rank of the q-quantile in a multiset of N values: floor(qN),
/// or 1 when qN < 1. A product qN within 1e-12 (relative) of an integer is
/// taken as that integer so that e.g. 0.55 * 2000 selects rank 1100.
std::size_t quantile_rank(std::size_t N, double q);

/// q-quantile of a multiset: the quantile_rank(N, q)-th smallest value.
/// Throws EmptyInput for N = 0 and DomainError unless 0 < q < 1.
double multiset_quantile(std::span<const double> values, double q);

/// Same as multiset_quantile but partially reorders `values` in place
/// (expected linear time, no allocation).
double select_quantile(std::span<double> values, double q);

/// Reusable subsample generator. Without replacement it keeps a permutation
/// of [0, m) between draws and partially shuffles its prefix, so each draw
/// costs O(D) after an O(m) setup.
class SubsampleDrawer {
 public:
  SubsampleDrawer(std::size_t m, const QuantileSpec& spec);

  /// Fills `out` with D indices (or all m for FullSample).
  void draw(Rng& rng, IndexSet& out);

  std::size_t size() const noexcept { return draw_size_; }

 private:
  std::size_t m_;
  QuantileSpec spec_;
  std::size_t draw_size_;
  std::vector<std::size_t> perm_;
};

/// D indices uniform on [0, m): i.i.d. with replacement, distinct without,
/// or the full index set. Throws SubsampleTooLarge when D > m without
/// replacement.
IndexSet draw_subsample(std::size_t m, const QuantileSpec& spec, Rng& rng);
IndexSet draw_subsample(std::size_t m, const QuantileSpec& spec, RngHandle rng);

/// q-quantile of |residual| over a drawn subsample, counting repeated
/// indices with multiplicity.
double subsampled_residual_quantile(const LinearSystem& sys, const Vector& x,
                                    const QuantileSpec& spec, Rng& rng);
double subsampled_residual_quantile(const LinearSystem& sys, const Vector& x,
                                    const QuantileSpec& spec, RngHandle rng);

/// q-quantile of |residual| over an explicit index multiset.
double residual_quantile(const LinearSystem& sys, const Vector& x, double q,
                         std::span<const std::size_t> indices);

/// Full-sample quantile of |residual| over all m rows.
double full_residual_quantile(const LinearSystem& sys, const Vector& x, double q);

/// Quantile of the ideal residuals |<row_i, x - truth>| over `restrict`
/// (all rows by default). Verification only: needs the ground truth.
double uncorrupted_quantile(const LinearSystem& sys, const Vector& x, double q,
                            std::optional<std::span<const std::size_t>> restrict = std::nullopt);

}  // namespace qrk
