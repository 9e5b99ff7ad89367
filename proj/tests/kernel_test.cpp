#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>

#include "parbayes/kernel.hpp"

using namespace parbayes;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (double& v : m.entries()) v = nd(rng);
  return m;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

double rel_diff(const Matrix& a, const Eigen::MatrixXd& b) { return (to_eigen(a) - b).norm() / b.norm(); }

}  // namespace

TEST(Matmul, IdentityTimesMatrixCharges16) {
  const Matrix x{{1, 2}, {3, 4}};
  FlopLedger ledger;
  EXPECT_EQ(matmul(Matrix::identity(2), x, ledger), x);
  EXPECT_EQ(ledger.total(), 16u);
  EXPECT_EQ(ledger.flops(flop_tag::gemm), 16u);
}

TEST(Matmul, ScalarCharges2) {
  FlopLedger ledger;
  const Matrix r = matmul(Matrix{{2}}, Matrix{{3}}, ledger);
  EXPECT_EQ(r(0, 0), 6.0);
  EXPECT_EQ(ledger.total(), 2u);
}

TEST(Matmul, MatchesTripleLoopAndCharges48) {
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(rng, 3, 4), b = random_matrix(rng, 4, 2);
  FlopLedger ledger;
  const Matrix c = matmul(a, b, ledger);
  EXPECT_EQ(ledger.total(), 48u);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      EXPECT_DOUBLE_EQ(c(i, j), s);
    }
}

TEST(Matmul, MatchesEigenOnRandomShapes) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const std::size_t m = 1 + t % 7, k = 1 + (t / 7) % 5, n = 1 + t % 4;
    const Matrix a = random_matrix(rng, m, k), b = random_matrix(rng, k, n);
    FlopLedger ledger;
    EXPECT_LT(rel_diff(matmul(a, b, ledger), to_eigen(a) * to_eigen(b)), 1e-14);
    EXPECT_EQ(ledger.total(), 2 * m * k * n);
  }
}

TEST(Matmul, MatrixVectorCharge) {
  FlopLedger ledger;
  const Vector y = matmul(Matrix{{1, 2, 3}, {4, 5, 6}}, Vector{1, 1, 1}, ledger);
  EXPECT_EQ(y, (Vector{6, 15}));
  EXPECT_EQ(ledger.total(), 12u);
}

TEST(Matmul, RejectsNonConformingShapes) {
  FlopLedger ledger;
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3), ledger), DimensionError);
  EXPECT_THROW(matmul(Matrix(2, 3), Vector(2), ledger), DimensionError);
  EXPECT_EQ(ledger.total(), 0u);
}

TEST(Matmul, AssociativeWithin1e12) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const std::size_t p = 1 + t % 5, q = 1 + t % 3, r = 1 + t % 4, s = 1 + t % 6;
    const Matrix a = random_matrix(rng, p, q), b = random_matrix(rng, q, r), c = random_matrix(rng, r, s);
    FlopLedger l;
    EXPECT_LT(relative_error(matmul(matmul(a, b, l), c, l), matmul(a, matmul(b, c, l), l)), 1e-12);
  }
}

TEST(AddSub, ChargesMnAndRejectsShapes) {
  FlopLedger ledger;
  const Matrix a{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(add(a, a, ledger), (Matrix{{2, 4, 6}, {8, 10, 12}}));
  EXPECT_EQ(sub(a, a, ledger), Matrix::zeros(2, 3));
  EXPECT_EQ(ledger.flops(flop_tag::add), 12u);
  EXPECT_THROW(add(a, Matrix(3, 2), ledger), DimensionError);
  EXPECT_THROW(sub(Vector(2), Vector(3), ledger), DimensionError);
}

TEST(Solve, IdentityReturnsRhs) {
  std::mt19937_64 rng(4);
  const Matrix b = random_matrix(rng, 3, 5);
  FlopLedger ledger;
  EXPECT_EQ(solve(Matrix::identity(3), b, ledger), b);
}

TEST(Solve, ScalarChargesLuPlusTriangular) {
  FlopLedger ledger;
  const Matrix x = solve(Matrix{{2}}, Matrix{{6}}, ledger);
  EXPECT_DOUBLE_EQ(x(0, 0), 3.0);
  // ceil(2/3) + 2 * 1^2 * 1
  EXPECT_EQ(ledger.total(), 3u);
  EXPECT_EQ(ledger.flops(flop_tag::lu), 1u);
  EXPECT_EQ(ledger.flops(flop_tag::trsv), 2u);
}

TEST(Solve, ChargesLuModel) {
  std::mt19937_64 rng(5);
  Matrix a = random_matrix(rng, 4, 4);
  for (std::size_t i = 0; i < 4; ++i) a(i, i) += 5;
  FlopLedger ledger;
  solve(a, random_matrix(rng, 4, 3), ledger);
  EXPECT_EQ(ledger.flops(flop_tag::lu), lu_flops(4));
  EXPECT_EQ(lu_flops(4), 43u);  // ceil(128 / 3)
  EXPECT_EQ(ledger.flops(flop_tag::trsv), 2u * 16u * 3u);
}

TEST(Solve, MultiplyBackResidualOnWellConditionedSystems) {
  std::mt19937_64 rng(6);
  int checked = 0;
  while (checked < 1000) {
    const std::size_t n = 1 + checked % 8, r = 1 + checked % 3;
    const Matrix a = random_matrix(rng, n, n);
    const Eigen::MatrixXd ea = to_eigen(a);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ea);
    const auto sv = svd.singularValues();
    if (sv(0) / sv(n - 1) > 1e6) continue;
    const Matrix b = random_matrix(rng, n, r);
    FlopLedger ledger;
    const Matrix x = solve(a, b, ledger);
    const Matrix residual = sub(matmul(a, x, ledger), b, ledger);
    EXPECT_LE(frobenius_norm(residual), 1e-10 * frobenius_norm(b));
    EXPECT_LT(rel_diff(x, ea.partialPivLu().solve(to_eigen(b))), 1e-8);
    ++checked;
  }
}

TEST(Solve, SingularThrowsExplicitError) {
  FlopLedger ledger;
  EXPECT_THROW(solve(Matrix{{1, 2}, {2, 4}}, Matrix::identity(2), ledger), SingularMatrixError);
  EXPECT_THROW(solve(Matrix::zeros(3, 3), Vector(3), ledger), SingularMatrixError);
  EXPECT_THROW(solve(Matrix{{1, 0}, {0, 1e-14}}, Vector{1, 1}, ledger), SingularMatrixError);
}

TEST(Solve, RejectsNonSquareOrMismatchedRhs) {
  FlopLedger ledger;
  EXPECT_THROW(solve(Matrix(2, 3), Matrix(2, 1), ledger), DimensionError);
  EXPECT_THROW(solve(Matrix::identity(2), Matrix(3, 1), ledger), DimensionError);
}

TEST(Lu, LogDeterminantMatchesEigen) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + t % 6;
    const Matrix a = random_matrix(rng, n, n);
    FlopLedger ledger;
    const LuFactorization lu(a, ledger);
    const double det = to_eigen(a).determinant();
    EXPECT_NEAR(lu.log_abs_det(ledger), std::log(std::abs(det)), 1e-10);
    EXPECT_EQ(lu.det_sign(), det > 0 ? 1 : -1);
  }
}

TEST(Sym, Examples) {
  const Matrix s{{1, 2}, {2, 3}};
  EXPECT_EQ(sym(s), s);
  EXPECT_EQ(sym(Matrix{{0, 2}, {0, 0}}), (Matrix{{0, 1}, {1, 0}}));
  std::mt19937_64 rng(8);
  const Matrix r = sym(random_matrix(rng, 5, 5));
  EXPECT_EQ(r, r.transposed());
  EXPECT_THROW(sym(Matrix(2, 3)), DimensionError);
}

TEST(Ledger, TotalIndependentOfRecordOrder) {
  std::mt19937_64 rng(9);
  std::vector<std::pair<std::string_view, std::uint64_t>> charges;
  const std::string_view tags[] = {flop_tag::gemm, flop_tag::add, flop_tag::lu, flop_tag::trsv, flop_tag::scalar};
  std::uint64_t expected = 0;
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t f = rng() % 1000;
    charges.emplace_back(tags[i % 5], f);
    expected += f;
  }
  for (int perm = 0; perm < 10; ++perm) {
    std::shuffle(charges.begin(), charges.end(), rng);
    FlopLedger ledger;
    for (const auto& [tag, f] : charges) ledger.charge(tag, f);
    EXPECT_EQ(ledger.total(), expected);
    std::uint64_t sum = 0;
    for (const auto& r : ledger.records()) sum += r.flops;
    EXPECT_EQ(sum, expected);
  }
}

TEST(Ledger, MergeAddsPerTag) {
  FlopLedger a, b;
  a.charge(flop_tag::gemm, 5);
  b.charge(flop_tag::gemm, 7);
  b.charge(flop_tag::add, 1);
  a.merge(b);
  EXPECT_EQ(a.flops(flop_tag::gemm), 12u);
  EXPECT_EQ(a.flops(flop_tag::add), 1u);
  EXPECT_EQ(a.total(), 13u);
}

TEST(PsdCholesky, ReconstructsSemidefiniteMatrix) {
  const Matrix a{{4, 2, 0}, {2, 1, 0}, {0, 0, 9}};
  const Matrix l = psd_cholesky(a);
  FlopLedger ledger;
  EXPECT_LT(relative_error(matmul(l, l.transposed(), ledger), a), 1e-12);
}
