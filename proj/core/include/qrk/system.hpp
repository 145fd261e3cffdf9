#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "qrk/rng.hpp"

namespace qrk {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using IndexSet = std::vector<std::size_t>;

inline constexpr double kRowNormTolerance = 1e-12;

enum class CorruptionPlacement { FirstRows, UniformRandom };

/// Corruption values drawn i.i.d. from U[lo, hi].
struct UniformInterval {
  double lo = -5.0;
  double hi = 5.0;
};
/// Every corrupted entry equals +value.
struct FixedMagnitude {
  double value = 0.0;
};
/// Every corrupted entry is +value or -value with equal probability.
struct SignedFixed {
  double value = 0.0;
};

using CorruptionMagnitude = std::variant<UniformInterval, FixedMagnitude, SignedFixed>;

struct CorruptionSpec {
  double beta = 0.0;
  CorruptionPlacement placement = CorruptionPlacement::FirstRows;
  CorruptionMagnitude magnitude = UniformInterval{};

  /// Number of corrupted rows for an m-row system: floor(beta * m), at least
  /// one when beta > 0.
  std::size_t corrupted_count(std::size_t m) const;
};

/// A sparsely corrupted system A x* + eps = b with unit-norm rows.
///
/// Immutable after construction. `truth` is present for synthetic instances;
/// `corrupted_set` is sorted and `corruption` is zero outside it.
class LinearSystem {
 public:
  /// Validates and assembles a system. Throws InvalidDimension on shape
  /// mismatches, InvalidArgument if a row is not unit norm, if the
  /// corrupted set is unsorted or out of range, or if the corruption vector
  /// is nonzero outside the corrupted set.
  static LinearSystem from_parts(Matrix rows, Vector rhs, std::optional<Vector> truth,
                                 IndexSet corrupted_set, Vector corruption, double beta = 0.0);

  /// Builds b = A x* + eps from the pieces.
  static LinearSystem with_truth(Matrix rows, Vector truth, IndexSet corrupted_set,
                                 Vector corruption, double beta = 0.0);

  std::size_t rows_count() const noexcept { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t cols_count() const noexcept { return static_cast<std::size_t>(rows_.cols()); }

  const Matrix& rows() const noexcept { return rows_; }
  const Vector& rhs() const noexcept { return rhs_; }
  const std::optional<Vector>& truth() const noexcept { return truth_; }
  const IndexSet& corrupted_set() const noexcept { return corrupted_set_; }
  const Vector& corruption() const noexcept { return corruption_; }
  /// The corruption level the instance was generated with (0 if unknown).
  double beta() const noexcept { return beta_; }

  bool is_corrupted(std::size_t i) const noexcept { return corrupted_mask_[i] != 0; }
  /// Sorted complement of the corrupted set.
  IndexSet uncorrupted_set() const;
  /// min over the corrupted set of |eps_i|; +inf when the set is empty.
  double min_corruption_magnitude() const;

 private:
  LinearSystem() = default;

  Matrix rows_;
  Vector rhs_;
  std::optional<Vector> truth_;
  IndexSet corrupted_set_;
  Vector corruption_;
  std::vector<unsigned char> corrupted_mask_;
  double beta_ = 0.0;
};

/// Random instance: rows and truth i.i.d. uniform on the unit sphere,
/// corruption per `corruption`. Only the Instance substream of `rng` is used.
LinearSystem generate_system(std::size_t m, std::size_t n, const CorruptionSpec& corruption,
                             RngHandle rng);

/// Uniform point on the unit sphere in R^n (normalized Gaussian vector).
/// Throws DegenerateRow after 100 consecutive draws with norm below 1e-300.
Vector sample_unit_sphere(std::size_t n, Rng& rng);

/// <row_i, x> - b_i.
double residual(const LinearSystem& sys, const Vector& x, std::size_t i);

/// ||x - truth||. Throws MissingTruth.
double error_norm(const LinearSystem& sys, const Vector& x);

// Binary instance dump used for test fixtures. Little-endian throughout:
// magic "QRKS", u32 version, u64 m, u64 n, f64 beta, then rows row-major,
// rhs, truth (NaN-filled when absent), corruption. The corrupted set is
// recovered on load as the support of the corruption vector.
inline constexpr std::uint32_t kSystemFormatVersion = 1;

void save_system(const LinearSystem& sys, const std::filesystem::path& path);
LinearSystem load_system(const std::filesystem::path& path);

}  // namespace qrk
