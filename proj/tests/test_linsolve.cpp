#include <gtest/gtest.h>

#include <random>

#include "mhmm/linsolve.hpp"

using namespace mhmm;

TEST(SolveDirect, Identity) {
  SparseSystem<double> s(4, SymmetryTag::real_spd, "identity");
  for (int i = 0; i < 4; ++i) s.add(i, i, 1.0);
  Eigen::VectorXd b = Eigen::VectorXd::Unit(4, 0);
  EXPECT_EQ(solve_direct(s, b), b);
}

TEST(SolveDirect, ComplexDiagonal) {
  SparseSystem<cplx> s(2, SymmetryTag::complex_symmetric, "diag");
  s.add(0, 0, cplx(1, -1));
  s.add(1, 1, 2.0);
  Eigen::VectorXcd b(2);
  b << cplx(1, -1), 2.0;
  const Eigen::VectorXcd x = solve_direct(s, b);
  EXPECT_LT((x - Eigen::VectorXcd::Ones(2)).norm(), 1e-15);
}

TEST(SolveDirect, RandomSpdResidual) {
  std::mt19937 rng(1);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(50, 50);
  for (auto& v : a.reshaped()) v = nd(rng);
  const Eigen::MatrixXd spd = a.transpose() * a + Eigen::MatrixXd::Identity(50, 50);
  SparseSystem<double> s(50, SymmetryTag::real_spd, "random");
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) s.add(i, j, spd(i, j));
  Eigen::VectorXd b(50);
  for (auto& v : b) v = nd(rng);
  const Eigen::VectorXd x = solve_direct(s, b);
  EXPECT_LE(relative_residual(s, x, b), 1e-10);
  EXPECT_LE(s.symmetry_defect(), 1e-12);
  Factorization<double> f(s);
  EXPECT_TRUE(f.used_ldlt());
}

TEST(SolveDirect, IndefiniteRealFallsBackToLu) {
  SparseSystem<double> s(2, SymmetryTag::real_spd, "indefinite");
  s.add(0, 0, 1.0);
  s.add(1, 1, -1.0);
  s.compress();
  Factorization<double> f(s);
  EXPECT_FALSE(f.used_ldlt());
  Eigen::VectorXd b(2);
  b << 1, 1;
  const Eigen::VectorXd x = f.solve(b);
  EXPECT_NEAR(x[1], -1.0, 1e-15);
}

TEST(SolveDirect, SingularNamesTag) {
  SparseSystem<cplx> s(3, SymmetryTag::complex_symmetric, "toy");
  s.add(0, 0, 1.0);
  s.add(1, 1, 1.0);
  s.add(2, 2, 1e-20);
  s.compress();
  try {
    Factorization<cplx> f(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::singular_matrix);
    EXPECT_NE(std::string(e.what()).find("complex-symmetric"), std::string::npos);
  }
}

TEST(SparseSystem, DeterministicUnderPermutation) {
  std::mt19937 rng(4);
  std::normal_distribution<double> nd;
  std::vector<std::tuple<int, int, cplx>> trip;
  for (int k = 0; k < 400; ++k) {
    const int i = static_cast<int>(rng() % 30);
    const int j = static_cast<int>(rng() % 30);
    const cplx v(nd(rng), nd(rng));
    trip.emplace_back(i, j, v);
    trip.emplace_back(j, i, v);
  }
  for (int i = 0; i < 30; ++i) trip.emplace_back(i, i, cplx(40, -40));
  auto build = [&](const auto& list) {
    SparseSystem<cplx> s(30, SymmetryTag::complex_symmetric);
    for (const auto& [i, j, v] : list) s.add(i, j, v);
    s.compress();
    return s;
  };
  auto s1 = build(trip);
  auto shuffled = trip;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  auto s2 = build(shuffled);
  const auto& m1 = s1.matrix();
  const auto& m2 = s2.matrix();
  ASSERT_EQ(m1.nonZeros(), m2.nonZeros());
  for (Eigen::Index k = 0; k < m1.nonZeros(); ++k) {
    EXPECT_EQ(m1.valuePtr()[k], m2.valuePtr()[k]);
    EXPECT_EQ(m1.innerIndexPtr()[k], m2.innerIndexPtr()[k]);
  }
  EXPECT_LE(s1.symmetry_defect(), 1e-12);
  // Row indices sorted within each column.
  for (Eigen::Index c = 0; c < m1.outerSize(); ++c)
    for (auto p = m1.outerIndexPtr()[c] + 1; p < m1.outerIndexPtr()[c + 1]; ++p)
      EXPECT_LT(m1.innerIndexPtr()[p - 1], m1.innerIndexPtr()[p]);
  Eigen::MatrixXcd b(30, 3);
  for (auto& v : b.reshaped()) v = cplx(nd(rng), nd(rng));
  const Eigen::MatrixXcd x1 = solve_direct(s1, b);
  const Eigen::MatrixXcd x2 = solve_direct(s2, b);
  EXPECT_EQ(x1, x2);
  // Multi-rhs equals sequential solves.
  for (int k = 0; k < 3; ++k) {
    const Eigen::VectorXcd xk = solve_direct(s1, Eigen::VectorXcd(b.col(k)));
    EXPECT_LT((xk - x1.col(k)).norm(), 1e-12 * xk.norm());
    EXPECT_LE(relative_residual(s1, xk, Eigen::VectorXcd(b.col(k))), 1e-10);
  }
}

TEST(SolveDirect, ComplexSymmetricUsesSymmetricFactorization) {
  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  const int n = 120;
  SparseSystem<cplx> s(n, SymmetryTag::complex_symmetric, "banded");
  for (int i = 0; i < n; ++i) {
    s.add(i, i, cplx(6.0, -2.0));
    for (int d : {1, 7, 30})
      if (i + d < n) {
        const cplx v(nd(rng), nd(rng));
        s.add(i, i + d, v);
        s.add(i + d, i, v);
      }
  }
  s.compress();
  Factorization<cplx> f(s);
  EXPECT_TRUE(f.used_ldlt());
  Eigen::MatrixXcd b(n, 2);
  for (auto& v : b.reshaped()) v = cplx(nd(rng), nd(rng));
  const Eigen::MatrixXcd x = f.solve(b);
  const Eigen::MatrixXcd dense = Eigen::MatrixXcd(s.matrix());
  EXPECT_LE((dense * x - b).norm() / b.norm(), 1e-13);
  EXPECT_LE((x - dense.lu().solve(b)).norm() / x.norm(), 1e-12);
}

TEST(SolveDirect, ZeroPivotFallsBackToLu) {
  SparseSystem<cplx> s(2, SymmetryTag::complex_symmetric, "saddle");
  s.add(0, 1, 1.0);
  s.add(1, 0, 1.0);
  s.compress();
  Factorization<cplx> f(s);
  EXPECT_FALSE(f.used_ldlt());
  Eigen::VectorXcd b(2);
  b << cplx(1.0, 2.0), 3.0;
  const Eigen::VectorXcd x = f.solve(b);
  EXPECT_NEAR(std::abs(x[0] - 3.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(x[1] - cplx(1.0, 2.0)), 0.0, 1e-15);
}
