#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "qrk/error.hpp"
#include "qrk/system.hpp"

namespace {

using namespace qrk;

LinearSystem small_system() {
  Matrix rows(2, 2);
  rows << 1.0, 0.0, 0.0, 1.0;
  Vector rhs(2);
  rhs << 0.0, 0.0;
  return LinearSystem::from_parts(rows, rhs, std::nullopt, {}, Vector::Zero(2));
}

TEST(GenerateSystem, FirstRowsPlacement) {
  const auto sys = generate_system(100, 10, CorruptionSpec{0.05}, RngHandle{1, 0});
  EXPECT_EQ(sys.corrupted_set(), (IndexSet{0, 1, 2, 3, 4}));
}

TEST(GenerateSystem, NoCorruptionIsConsistent) {
  const auto sys = generate_system(10, 10, CorruptionSpec{0.0}, RngHandle{2, 0});
  EXPECT_TRUE(sys.corrupted_set().empty());
  EXPECT_EQ(sys.corruption(), Vector::Zero(10));
  const Vector ax = sys.rows() * *sys.truth();
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(sys.rhs()[i], ax[i], 1e-15);
}

TEST(GenerateSystem, FixedMagnitude) {
  const CorruptionSpec spec{0.1, CorruptionPlacement::FirstRows, FixedMagnitude{1e6}};
  const auto sys = generate_system(50, 5, spec, RngHandle{3, 0});
  ASSERT_EQ(sys.corrupted_set().size(), 5u);
  for (auto i : sys.corrupted_set()) EXPECT_EQ(std::abs(sys.corruption()[i]), 1e6);
  EXPECT_EQ(sys.min_corruption_magnitude(), 1e6);
}

TEST(GenerateSystem, SignedFixedUsesBothSigns) {
  const CorruptionSpec spec{0.2, CorruptionPlacement::UniformRandom, SignedFixed{3.0}};
  const auto sys = generate_system(500, 5, spec, RngHandle{4, 0});
  int pos = 0, neg = 0;
  for (auto i : sys.corrupted_set()) {
    EXPECT_EQ(std::abs(sys.corruption()[i]), 3.0);
    (sys.corruption()[i] > 0 ? pos : neg)++;
  }
  EXPECT_GT(pos, 0);
  EXPECT_GT(neg, 0);
}

TEST(GenerateSystem, UniformPlacementIsSortedAndDistinct) {
  const CorruptionSpec spec{0.3, CorruptionPlacement::UniformRandom, UniformInterval{}};
  const auto sys = generate_system(200, 4, spec, RngHandle{5, 0});
  const auto& B = sys.corrupted_set();
  ASSERT_EQ(B.size(), 60u);
  for (std::size_t j = 1; j < B.size(); ++j) EXPECT_LT(B[j - 1], B[j]);
  EXPECT_NE(B.back(), 59u);  // not simply the first rows
}

TEST(GenerateSystem, CorruptedCountFloorWithMinimumOne) {
  EXPECT_EQ(CorruptionSpec{0.001}.corrupted_count(100), 1u);
  EXPECT_EQ(CorruptionSpec{0.11}.corrupted_count(5000), 550u);
  EXPECT_EQ(CorruptionSpec{0.0}.corrupted_count(100), 0u);
  EXPECT_THROW(CorruptionSpec{1.0}.corrupted_count(100), Error);
}

TEST(GenerateSystem, Invariants) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const CorruptionSpec spec{0.1, seed % 2 ? CorruptionPlacement::UniformRandom
                                             : CorruptionPlacement::FirstRows};
    const auto sys = generate_system(300, 12, spec, RngHandle{seed, 0});
    const Vector ax = sys.rows() * *sys.truth();
    for (std::size_t i = 0; i < 300; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      ASSERT_LT(std::abs(sys.rows().row(r).norm() - 1.0), 1e-12);
      if (!sys.is_corrupted(i)) {
        ASSERT_EQ(sys.corruption()[r], 0.0);
        ASSERT_LT(std::abs(ax[r] - sys.rhs()[r]), 1e-12);
      } else {
        ASSERT_NEAR(sys.rhs()[r], ax[r] + sys.corruption()[r], 1e-12);
      }
    }
  }
}

TEST(GenerateSystem, Deterministic) {
  const auto a = generate_system(200, 8, CorruptionSpec{0.05}, RngHandle{99, 0});
  const auto b = generate_system(200, 8, CorruptionSpec{0.05}, RngHandle{99, 0});
  EXPECT_EQ(a.rows(), b.rows());
  EXPECT_EQ(a.rhs(), b.rhs());
  EXPECT_EQ(*a.truth(), *b.truth());
  EXPECT_EQ(a.corruption(), b.corruption());
  // The stream id of the handle is irrelevant; the Instance substream is used.
  const auto c = generate_system(200, 8, CorruptionSpec{0.05}, RngHandle{99, 7});
  EXPECT_EQ(a.rows(), c.rows());
}

TEST(GenerateSystem, SphereUniformity) {
  const auto sys = generate_system(100000, 3, CorruptionSpec{0.0}, RngHandle{12, 0});
  const Eigen::RowVectorXd mean = sys.rows().colwise().mean();
  EXPECT_LT(mean.norm(), 0.02);
}

TEST(GenerateSystem, DimensionErrors) {
  try {
    generate_system(5, 10, CorruptionSpec{}, RngHandle{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidDimension);
  }
  EXPECT_THROW(generate_system(5, 0, CorruptionSpec{}, RngHandle{}), Error);
}

TEST(Residual, Examples) {
  Matrix rows(2, 2);
  rows << 1.0, 0.0, 0.0, 1.0;
  Vector rhs = Vector::Zero(2);
  const auto sys = LinearSystem::from_parts(rows, rhs, std::nullopt, {}, Vector::Zero(2));
  Vector x(2);
  x << 3.0, 4.0;
  EXPECT_EQ(residual(sys, x, 0), 3.0);
  try {
    residual(sys, x, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
  }
}

TEST(Residual, AtTruth) {
  const auto sys = generate_system(100, 10, CorruptionSpec{0.05}, RngHandle{6, 0});
  for (std::size_t i = 0; i < 100; ++i) {
    const double r = residual(sys, *sys.truth(), i);
    if (sys.is_corrupted(i)) {
      EXPECT_NEAR(r, -sys.corruption()[static_cast<Eigen::Index>(i)], 1e-12);
    } else {
      EXPECT_NEAR(r, 0.0, 1e-12);
    }
  }
}

TEST(ErrorNorm, Examples) {
  const auto sys = generate_system(20, 4, CorruptionSpec{0.0}, RngHandle{8, 0});
  const Vector& t = *sys.truth();
  EXPECT_EQ(error_norm(sys, t), 0.0);
  EXPECT_NEAR(error_norm(sys, Vector::Zero(4)), 1.0, 1e-15);
  EXPECT_NEAR(error_norm(sys, 2.0 * t), 1.0, 1e-15);
  try {
    error_norm(small_system(), Vector::Zero(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingTruth);
  }
}

TEST(FromParts, Validation) {
  Matrix rows(2, 2);
  rows << 2.0, 0.0, 0.0, 1.0;
  EXPECT_THROW(LinearSystem::from_parts(rows, Vector::Zero(2), std::nullopt, {}, Vector::Zero(2)),
               Error);
  rows(0, 0) = 1.0;
  Vector eps = Vector::Zero(2);
  eps[1] = 1.0;
  EXPECT_THROW(LinearSystem::from_parts(rows, Vector::Zero(2), std::nullopt, {0}, eps), Error);
  EXPECT_THROW(LinearSystem::from_parts(rows, Vector::Zero(2), std::nullopt, {1, 0}, eps), Error);
  EXPECT_NO_THROW(LinearSystem::from_parts(rows, Vector::Zero(2), std::nullopt, {1}, eps));
}

TEST(Serialization, RoundTrip) {
  const auto sys = generate_system(40, 6, CorruptionSpec{0.1}, RngHandle{10, 0});
  const auto path = std::filesystem::temp_directory_path() / "qrk_roundtrip.bin";
  save_system(sys, path);
  const auto back = load_system(path);
  EXPECT_EQ(back.rows(), sys.rows());
  EXPECT_EQ(back.rhs(), sys.rhs());
  EXPECT_EQ(*back.truth(), *sys.truth());
  EXPECT_EQ(back.corrupted_set(), sys.corrupted_set());
  EXPECT_EQ(back.beta(), sys.beta());

  std::ifstream is(path, std::ios::binary);
  char magic[4];
  is.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "QRKS");
  std::filesystem::remove(path);
}

TEST(Serialization, WithoutTruth) {
  const auto path = std::filesystem::temp_directory_path() / "qrk_notruth.bin";
  save_system(small_system(), path);
  EXPECT_FALSE(load_system(path).truth().has_value());
  std::filesystem::remove(path);
}

TEST(Serialization, Errors) {
  try {
    load_system("/nonexistent/qrk.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
  const auto path = std::filesystem::temp_directory_path() / "qrk_bad.bin";
  std::ofstream(path) << "NOPE";
  EXPECT_THROW(load_system(path), Error);
  std::filesystem::remove(path);
}

}  // namespace
