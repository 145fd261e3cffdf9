#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qrk {

/// Substream identifiers. Each solver run draws its update rows and its
/// quantile subsamples from different streams so that changing one sampling
/// rule never perturbs the other.
enum class Stream : std::uint64_t {
  Instance = 0,
  Update = 1,
  Quantile = 2,
  Verify = 3,
  PowerIteration = 4,
};

/// Identifies a reproducible random sequence.
struct RngHandle {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  RngHandle with_stream(Stream s) const { return {seed, static_cast<std::uint64_t>(s)}; }
  RngHandle with_stream(std::uint64_t s) const { return {seed, s}; }

  friend bool operator==(const RngHandle&, const RngHandle&) = default;
};

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a list of 64-bit words into one seed. Order-sensitive.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words) noexcept;

/// Deterministic generator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard, seeded with splitmix64(seed ^ splitmix64(stream_id)). All
/// distributions are implemented here rather than taken from <random>, whose
/// distribution algorithms are implementation-defined; this keeps sample
/// sequences identical across standard libraries.
class Rng {
 public:
  explicit Rng(RngHandle handle);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n). Lemire's multiply-shift with rejection, so
  /// the result is exactly uniform. n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via the Marsaglia polar method.
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qrk
