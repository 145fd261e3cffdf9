#include "qrk/system.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "qrk/error.hpp"

namespace qrk {

std::size_t CorruptionSpec::corrupted_count(std::size_t m) const {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw Error(ErrorCode::DomainError, "corruption beta must lie in [0, 1)");
  }
  if (beta == 0.0 || m == 0) return 0;
  const auto count = static_cast<std::size_t>(std::floor(beta * static_cast<double>(m)));
  return std::max<std::size_t>(count, 1);
}

LinearSystem LinearSystem::from_parts(Matrix rows, Vector rhs, std::optional<Vector> truth,
                                      IndexSet corrupted_set, Vector corruption, double beta) {
  const auto m = rows.rows();
  const auto n = rows.cols();
  if (m == 0 || n == 0) throw Error(ErrorCode::InvalidDimension, "empty system");
  if (rhs.size() != m || corruption.size() != m) {
    throw Error(ErrorCode::InvalidDimension, "rhs and corruption must have one entry per row");
  }
  if (truth && truth->size() != n) {
    throw Error(ErrorCode::InvalidDimension, "truth must have one entry per column");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::abs(rows.row(i).norm() - 1.0) > kRowNormTolerance) {
      std::ostringstream os;
      os << "row " << i << " is not unit norm";
      throw Error(ErrorCode::InvalidArgument, os.str());
    }
  }
  if (!std::is_sorted(corrupted_set.begin(), corrupted_set.end()) ||
      std::adjacent_find(corrupted_set.begin(), corrupted_set.end()) != corrupted_set.end()) {
    throw Error(ErrorCode::InvalidArgument, "corrupted set must be sorted and distinct");
  }
  std::vector<unsigned char> mask(static_cast<std::size_t>(m), 0);
  for (std::size_t i : corrupted_set) {
    if (i >= static_cast<std::size_t>(m)) {
      throw Error(ErrorCode::IndexOutOfRange, "corrupted index beyond row count");
    }
    mask[i] = 1;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!mask[static_cast<std::size_t>(i)] && corruption[i] != 0.0) {
      throw Error(ErrorCode::InvalidArgument, "corruption must vanish outside the corrupted set");
    }
  }

  LinearSystem sys;
  sys.rows_ = std::move(rows);
  sys.rhs_ = std::move(rhs);
  sys.truth_ = std::move(truth);
  sys.corrupted_set_ = std::move(corrupted_set);
  sys.corruption_ = std::move(corruption);
  sys.corrupted_mask_ = std::move(mask);
  sys.beta_ = beta;
  return sys;
}

LinearSystem LinearSystem::with_truth(Matrix rows, Vector truth, IndexSet corrupted_set,
                                      Vector corruption, double beta) {
  if (rows.cols() != truth.size()) {
    throw Error(ErrorCode::InvalidDimension, "truth must have one entry per column");
  }
  if (corruption.size() != rows.rows()) {
    throw Error(ErrorCode::InvalidDimension, "corruption must have one entry per row");
  }
  Vector rhs = rows * truth + corruption;
  return from_parts(std::move(rows), std::move(rhs), std::move(truth), std::move(corrupted_set),
                    std::move(corruption), beta);
}

IndexSet LinearSystem::uncorrupted_set() const {
  IndexSet out;
  out.reserve(rows_count() - corrupted_set_.size());
  for (std::size_t i = 0; i < rows_count(); ++i) {
    if (!corrupted_mask_[i]) out.push_back(i);
  }
  return out;
}

double LinearSystem::min_corruption_magnitude() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i : corrupted_set_) {
    best = std::min(best, std::abs(corruption_[static_cast<Eigen::Index>(i)]));
  }
  return best;
}

Vector sample_unit_sphere(std::size_t n, Rng& rng) {
  Vector v(static_cast<Eigen::Index>(n));
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = rng.normal();
    const double norm = v.norm();
    if (norm >= 1e-300) return v / norm;
  }
  throw Error(ErrorCode::DegenerateRow, "100 consecutive near-zero Gaussian draws");
}

namespace {

double draw_corruption(const CorruptionMagnitude& magnitude, Rng& rng) {
  return std::visit(
      [&rng](const auto& spec) -> double {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, UniformInterval>) {
          if (spec.lo == 0.0 && spec.hi == 0.0) return 0.0;
          // Support of eps must be exactly the corrupted set.
          double v = 0.0;
          do {
            v = rng.uniform(spec.lo, spec.hi);
          } while (v == 0.0);
          return v;
        } else if constexpr (std::is_same_v<T, FixedMagnitude>) {
          return std::abs(spec.value);
        } else {
          const double mag = std::abs(spec.value);
          return (rng.next_u64() >> 63) ? -mag : mag;
        }
      },
      magnitude);
}

}  // namespace

LinearSystem generate_system(std::size_t m, std::size_t n, const CorruptionSpec& corruption,
                             RngHandle handle) {
  if (n == 0 || m < n) {
    throw Error(ErrorCode::InvalidDimension, "generate_system requires m >= n >= 1");
  }
  const std::size_t corrupted = corruption.corrupted_count(m);
  Rng rng(handle.with_stream(Stream::Instance));

  Matrix rows(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < m; ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = sample_unit_sphere(n, rng).transpose();
  }
  Vector truth = sample_unit_sphere(n, rng);

  IndexSet support;
  if (corruption.placement == CorruptionPlacement::FirstRows) {
    support.resize(corrupted);
    std::iota(support.begin(), support.end(), std::size_t{0});
  } else {
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t j = 0; j < corrupted; ++j) {
      const std::size_t pick = j + rng.uniform_index(m - j);
      std::swap(perm[j], perm[pick]);
    }
    support.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(corrupted));
    std::sort(support.begin(), support.end());
  }

  Vector eps = Vector::Zero(static_cast<Eigen::Index>(m));
  for (std::size_t i : support) {
    eps[static_cast<Eigen::Index>(i)] = draw_corruption(corruption.magnitude, rng);
  }
  return LinearSystem::with_truth(std::move(rows), std::move(truth), std::move(support),
                                  std::move(eps), corruption.beta);
}

double residual(const LinearSystem& sys, const Vector& x, std::size_t i) {
  if (i >= sys.rows_count()) throw Error(ErrorCode::IndexOutOfRange, "row index out of range");
  if (x.size() != static_cast<Eigen::Index>(sys.cols_count())) {
    throw Error(ErrorCode::InvalidDimension, "iterate has wrong length");
  }
  const auto row = static_cast<Eigen::Index>(i);
  return sys.rows().row(row).dot(x) - sys.rhs()[row];
}

double error_norm(const LinearSystem& sys, const Vector& x) {
  if (!sys.truth()) throw Error(ErrorCode::MissingTruth, "system has no ground truth");
  if (x.size() != sys.truth()->size()) {
    throw Error(ErrorCode::InvalidDimension, "iterate has wrong length");
  }
  return (x - *sys.truth()).norm();
}

// ---------------------------------------------------------------------------
// Binary dump

namespace {

constexpr char kMagic[4] = {'Q', 'R', 'K', 'S'};

void put_u64(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xff);
  os.write(bytes, 8);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  char bytes[4];
  for (int b = 0; b < 4; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xff);
  os.write(bytes, 4);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& is) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) {
    throw Error(ErrorCode::IoError, "truncated instance file");
  }
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | bytes[b];
  return v;
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char bytes[4];
  if (!is.read(reinterpret_cast<char*>(bytes), 4)) {
    throw Error(ErrorCode::IoError, "truncated instance file");
  }
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | bytes[b];
  return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace

void save_system(const LinearSystem& sys, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  const auto m = static_cast<Eigen::Index>(sys.rows_count());
  const auto n = static_cast<Eigen::Index>(sys.cols_count());
  os.write(kMagic, 4);
  put_u32(os, kSystemFormatVersion);
  put_u64(os, static_cast<std::uint64_t>(m));
  put_u64(os, static_cast<std::uint64_t>(n));
  put_f64(os, sys.beta());
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) put_f64(os, sys.rows()(i, j));
  }
  for (Eigen::Index i = 0; i < m; ++i) put_f64(os, sys.rhs()[i]);
  for (Eigen::Index j = 0; j < n; ++j) {
    put_f64(os, sys.truth() ? (*sys.truth())[j] : std::numeric_limits<double>::quiet_NaN());
  }
  for (Eigen::Index i = 0; i < m; ++i) put_f64(os, sys.corruption()[i]);
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

LinearSystem load_system(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw Error(ErrorCode::IoError, "bad magic in " + path.string());
  }
  if (const auto version = get_u32(is); version != kSystemFormatVersion) {
    throw Error(ErrorCode::IoError, "unsupported instance version " + std::to_string(version));
  }
  const auto m = static_cast<Eigen::Index>(get_u64(is));
  const auto n = static_cast<Eigen::Index>(get_u64(is));
  const double beta = get_f64(is);
  if (m <= 0 || n <= 0 || m > (Eigen::Index{1} << 32) || n > (Eigen::Index{1} << 24)) {
    throw Error(ErrorCode::IoError, "implausible dimensions in " + path.string());
  }
  Matrix rows(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) rows(i, j) = get_f64(is);
  }
  Vector rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) rhs[i] = get_f64(is);
  Vector truth(n);
  for (Eigen::Index j = 0; j < n; ++j) truth[j] = get_f64(is);
  Vector eps(m);
  IndexSet support;
  for (Eigen::Index i = 0; i < m; ++i) {
    eps[i] = get_f64(is);
    if (eps[i] != 0.0) support.push_back(static_cast<std::size_t>(i));
  }
  std::optional<Vector> maybe_truth;
  if (!truth.hasNaN()) maybe_truth = std::move(truth);
  return LinearSystem::from_parts(std::move(rows), std::move(rhs), std::move(maybe_truth),
                                  std::move(support), std::move(eps), beta);
}

}  // namespace qrk
