#include "qrk/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qrk/error.hpp"

namespace qrk {

std::string_view to_string(SamplingMode mode) noexcept {
  switch (mode) {
    case SamplingMode::WithReplacement: return "with";
    case SamplingMode::WithoutReplacement: return "without";
    case SamplingMode::FullSample: return "full";
  }
  return "unknown";
}

SamplingMode parse_sampling_mode(std::string_view text) {
  if (text == "with" || text == "WithReplacement") return SamplingMode::WithReplacement;
  if (text == "without" || text == "WithoutReplacement") return SamplingMode::WithoutReplacement;
  if (text == "full" || text == "FullSample") return SamplingMode::FullSample;
  throw Error(ErrorCode::InvalidArgument, "unknown sampling mode '" + std::string(text) + "'");
}

void QuantileSpec::validate() const {
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::DomainError, "q must lie in (0, 1)");
  if (mode != SamplingMode::FullSample && D == 0) {
    throw Error(ErrorCode::DomainError, "subsample size D must be positive");
  }
}

std::size_t quantile_rank(std::size_t N, double q) {
  if (N == 0) throw Error(ErrorCode::EmptyInput, "quantile of an empty multiset");
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::DomainError, "q must lie in (0, 1)");
  const double product = q * static_cast<double>(N);
  const double nearest = std::round(product);
  const double rank =
      std::abs(product - nearest) <= 1e-12 * std::max(1.0, product) ? nearest : std::floor(product);
  if (rank < 1.0) return 1;
  return std::min(static_cast<std::size_t>(rank), N);
}

double select_quantile(std::span<double> values, double q) {
  const std::size_t rank = quantile_rank(values.size(), q);
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

double multiset_quantile(std::span<const double> values, double q) {
  std::vector<double> scratch(values.begin(), values.end());
  return select_quantile(scratch, q);
}

SubsampleDrawer::SubsampleDrawer(std::size_t m, const QuantileSpec& spec)
    : m_(m), spec_(spec), draw_size_(spec.mode == SamplingMode::FullSample ? m : spec.D) {
  spec_.validate();
  if (m == 0) throw Error(ErrorCode::InvalidDimension, "cannot subsample from zero rows");
  if (spec.mode == SamplingMode::WithoutReplacement) {
    if (spec.D > m) {
      throw Error(ErrorCode::SubsampleTooLarge, "D exceeds m for sampling without replacement");
    }
    perm_.resize(m);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  }
}

void SubsampleDrawer::draw(Rng& rng, IndexSet& out) {
  out.resize(draw_size_);
  switch (spec_.mode) {
    case SamplingMode::WithReplacement:
      for (auto& idx : out) idx = rng.uniform_index(m_);
      break;
    case SamplingMode::WithoutReplacement:
      // A partial Fisher-Yates pass over any permutation yields a uniformly
      // random ordered D-subset, so the buffer is never reset.
      for (std::size_t j = 0; j < draw_size_; ++j) {
        const std::size_t pick = j + rng.uniform_index(m_ - j);
        std::swap(perm_[j], perm_[pick]);
        out[j] = perm_[j];
      }
      break;
    case SamplingMode::FullSample:
      std::iota(out.begin(), out.end(), std::size_t{0});
      break;
  }
}

IndexSet draw_subsample(std::size_t m, const QuantileSpec& spec, Rng& rng) {
  SubsampleDrawer drawer(m, spec);
  IndexSet out;
  drawer.draw(rng, out);
  return out;
}

IndexSet draw_subsample(std::size_t m, const QuantileSpec& spec, RngHandle handle) {
  Rng rng(handle);
  return draw_subsample(m, spec, rng);
}

double residual_quantile(const LinearSystem& sys, const Vector& x, double q,
                         std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorCode::EmptyInput, "empty index multiset");
  std::vector<double> values(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) values[j] = std::abs(residual(sys, x, indices[j]));
  return select_quantile(values, q);
}

double full_residual_quantile(const LinearSystem& sys, const Vector& x, double q) {
  if (x.size() != static_cast<Eigen::Index>(sys.cols_count())) {
    throw Error(ErrorCode::InvalidDimension, "iterate has wrong length");
  }
  // Row-by-row dots so the values match the subsampled path bit for bit.
  std::vector<double> values(sys.rows_count());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    values[i] = std::abs(sys.rows().row(row).dot(x) - sys.rhs()[row]);
  }
  return select_quantile(values, q);
}

double subsampled_residual_quantile(const LinearSystem& sys, const Vector& x,
                                    const QuantileSpec& spec, Rng& rng) {
  if (spec.mode == SamplingMode::FullSample) {
    spec.validate();
    return full_residual_quantile(sys, x, spec.q);
  }
  const IndexSet indices = draw_subsample(sys.rows_count(), spec, rng);
  return residual_quantile(sys, x, spec.q, indices);
}

double subsampled_residual_quantile(const LinearSystem& sys, const Vector& x,
                                    const QuantileSpec& spec, RngHandle handle) {
  Rng rng(handle);
  return subsampled_residual_quantile(sys, x, spec, rng);
}

double uncorrupted_quantile(const LinearSystem& sys, const Vector& x, double q,
                            std::optional<std::span<const std::size_t>> restrict) {
  if (!sys.truth()) throw Error(ErrorCode::MissingTruth, "ideal residuals need the ground truth");
  if (x.size() != sys.truth()->size()) {
    throw Error(ErrorCode::InvalidDimension, "iterate has wrong length");
  }
  const Vector err = x - *sys.truth();
  if (!restrict) {
    std::vector<double> values(sys.rows_count());
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = std::abs(sys.rows().row(static_cast<Eigen::Index>(i)).dot(err));
    }
    return select_quantile(values, q);
  }
  if (restrict->empty()) throw Error(ErrorCode::EmptyInput, "empty restriction set");
  std::vector<double> values;
  values.reserve(restrict->size());
  for (std::size_t i : *restrict) {
    if (i >= sys.rows_count()) throw Error(ErrorCode::IndexOutOfRange, "row index out of range");
    values.push_back(std::abs(sys.rows().row(static_cast<Eigen::Index>(i)).dot(err)));
  }
  return select_quantile(values, q);
}

}  // namespace qrk
