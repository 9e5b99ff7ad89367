#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "parbayes/pkf.hpp"
#include "parbayes/verify.hpp"

using namespace parbayes;

namespace {

LGSSM scalar_model(std::size_t n) {
  StepParams p{Matrix{{1}}, Vector{0}, Matrix{{1}}, Matrix{{1}}, Vector{0}, Matrix{{1}}};
  return LGSSM{Vector{0}, Matrix{{1}}, {p}, n};
}

double min_eigenvalue(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(e).eigenvalues().minCoeff();
}

void expect_scalar(const FilterElement& e, double a, double b, double c, double eta, double j) {
  EXPECT_NEAR(e.A(0, 0), a, 1e-15);
  EXPECT_NEAR(e.b[0], b, 1e-15);
  EXPECT_NEAR(e.C(0, 0), c, 1e-15);
  EXPECT_NEAR(e.eta[0], eta, 1e-15);
  EXPECT_NEAR(e.J(0, 0), j, 1e-15);
}

}  // namespace

TEST(FilterElement, ScalarInteriorStep) {
  FlopLedger l;
  expect_scalar(filter_element(scalar_model(2), Vector{0}, 2, l), 0.5, 0, 0.5, 0, 0.5);
}

TEST(FilterElement, ScalarFirstStep) {
  FlopLedger l;
  expect_scalar(filter_element(scalar_model(2), Vector{1}, 1, l), 0, 2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
}

TEST(FilterElement, UninformativeMeasurement) {
  LGSSM m = make_random_lgssm(3, 2, 4, 3);
  m.steps[0].H = Matrix::zeros(2, 3);
  FlopLedger l;
  const FilterElement e = filter_element(m, Vector{0.7, -1.2}, 2, l);
  EXPECT_EQ(e.A, m.steps[0].F);
  EXPECT_LT(relative_error(e.b, m.steps[0].u), 1e-15);
  EXPECT_LT(relative_error(e.C, m.steps[0].Q), 1e-15);
  EXPECT_EQ(e.eta, Vector::zeros(3));
  EXPECT_EQ(e.J, Matrix::zeros(3, 3));
}

TEST(FilterElement, RejectsBadMeasurementDimension) {
  FlopLedger l;
  EXPECT_THROW(filter_element(scalar_model(2), Vector{1, 2}, 2, l), DimensionError);
}

TEST(CombineFilter, IdentityElement) {
  GaussianSampler s(1);
  FlopLedger l;
  for (int t = 0; t < 50; ++t) {
    const std::size_t nx = 1 + t % 5;
    const FilterElement e = verify::random_filter_element(s, nx);
    EXPECT_LE(verify::distance(combine_filter(e, filter_identity(nx), l), e), 1e-14);
    EXPECT_LE(verify::distance(combine_filter(filter_identity(nx), e, l), e), 1e-14);
  }
}

TEST(CombineFilter, ScalarPairEqualsSequentialPosterior) {
  FlopLedger l;
  const LGSSM m = scalar_model(2);
  const FilterElement e = combine_filter(filter_element(m, Vector{1}, 1, l), filter_element(m, Vector{0}, 2, l), l);
  EXPECT_NEAR(e.A(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(e.b[0], 0.25, 1e-15);
  EXPECT_NEAR(e.C(0, 0), 5.0 / 8.0, 1e-15);
}

TEST(CombineFilter, Associative) {
  GaussianSampler s(2);
  FlopLedger l;
  for (int t = 0; t < 300; ++t) {
    const std::size_t nx = 1 + t % 6;
    const auto a = verify::random_filter_element(s, nx), b = verify::random_filter_element(s, nx),
               c = verify::random_filter_element(s, nx);
    EXPECT_LE(verify::distance(combine_filter(combine_filter(a, b, l), c, l), combine_filter(a, combine_filter(b, c, l), l)),
              1e-9);
  }
}

TEST(CombineFilter, RejectsDimensionMismatch) {
  FlopLedger l;
  EXPECT_THROW(combine_filter(filter_identity(2), filter_identity(3), l), DimensionError);
}

TEST(ParallelFilter, SingleStepEqualsFirstElement) {
  const LGSSM m = make_random_lgssm(3, 2, 1, 4);
  const SimResult sim = simulate(m, 4);
  FlopLedger l;
  const FilterElement e = filter_element(m, sim.measurements[0], 1, l);
  const auto r = parallel_filter(m, sim.measurements);
  EXPECT_EQ(r.filtered[0].mean, e.b);
  EXPECT_EQ(r.filtered[0].cov, e.C);
}

TEST(ParallelFilter, ScalarTwoSteps) {
  const auto r = parallel_filter(scalar_model(2), {Vector{1}, Vector{0}});
  EXPECT_NEAR(r.filtered[0].mean[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.filtered[0].cov(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.filtered[1].mean[0], 0.25, 1e-15);
  EXPECT_NEAR(r.filtered[1].cov(0, 0), 5.0 / 8.0, 1e-15);
}

TEST(ParallelFilter, TrackingMatchesKalmanFilter) {
  const LGSSM m = make_default_tracking_model(100);
  for (std::uint64_t seed : {1, 2, 3}) {
    const SimResult sim = simulate(m, seed);
    FlopLedger l;
    const FilterRun ref = kalman_filter(m, sim.measurements, l);
    const auto r = parallel_filter(m, sim.measurements);
    const auto e = verify::moment_errors(r.filtered, ref.filtered);
    EXPECT_LE(e.mean, 1e-8);
    EXPECT_LE(e.cov, 1e-8);
  }
}

TEST(ParallelFilter, TimeVaryingModelMatchesKalmanFilter) {
  LGSSM m = make_random_lgssm(3, 2, 30, 5);
  for (std::uint64_t k = 1; k < 30; ++k) {
    StepParams p = make_random_lgssm(3, 2, 1, 100 + k).steps[0];
    m.steps.push_back(p);
  }
  const SimResult sim = simulate(m, 5);
  FlopLedger l;
  const FilterRun ref = kalman_filter(m, sim.measurements, l);
  const auto e = verify::moment_errors(parallel_filter(m, sim.measurements).filtered, ref.filtered);
  EXPECT_LE(e.mean, 1e-8);
  EXPECT_LE(e.cov, 1e-7);
}

TEST(ParallelFilter, ExtractedCovariancesArePsd) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LGSSM m = verify::random_model(seed, 64);
    for (const auto& p : parallel_filter(m, simulate(m, seed).measurements).prefixes)
      EXPECT_GE(min_eigenvalue(p.C), -1e-8);
  }
}

TEST(ParallelFilter, BlockLengthsAgree) {
  const LGSSM m = make_default_tracking_model(45);
  const SimResult sim = simulate(m, 6);
  const auto base = parallel_filter(m, sim.measurements, 1);
  for (std::size_t block : {2, 4, 8, 45}) {
    const auto e = verify::moment_errors(parallel_filter(m, sim.measurements, block).filtered, base.filtered);
    EXPECT_LE(e.mean, 1e-9);
    EXPECT_LE(e.cov, 1e-9);
  }
}

TEST(ParallelFilter, ThreadsGiveIdenticalResults) {
  const LGSSM m = make_default_tracking_model(200);
  const SimResult sim = simulate(m, 7);
  const auto one = parallel_filter(m, sim.measurements, 1, Executor(1));
  const auto many = parallel_filter(m, sim.measurements, 1, Executor(4));
  for (std::size_t k = 0; k < m.n; ++k) {
    EXPECT_EQ(one.filtered[k].mean, many.filtered[k].mean);
    EXPECT_EQ(one.filtered[k].cov, many.filtered[k].cov);
  }
  EXPECT_EQ(one.cost.work_flops, many.cost.work_flops);
  EXPECT_EQ(one.cost.span_flops, many.cost.span_flops);
}

TEST(ParallelFilter, RejectsWrongMeasurementCount) {
  EXPECT_THROW(parallel_filter(scalar_model(3), {Vector{1}}), std::invalid_argument);
}

TEST(PredictiveMoments, Examples) {
  FlopLedger l;
  StepParams still{Matrix::identity(2), Vector(2), Matrix::zeros(2, 2), Matrix{{1, 0}}, Vector(1), Matrix{{1}}};
  const LGSSM s{Vector{0, 0}, Matrix::identity(2), {still}, 3};
  const GaussianMoment g{Vector{1, 2}, Matrix{{2, 0.5}, {0.5, 1}}};
  const GaussianMoment p = predictive_moments(s, g, 2, l);
  EXPECT_EQ(p.mean, g.mean);
  EXPECT_EQ(p.cov, g.cov);

  const GaussianMoment q = predictive_moments(scalar_model(2), {Vector{2.0 / 3.0}, Matrix{{2.0 / 3.0}}}, 2, l);
  EXPECT_NEAR(q.mean[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(q.cov(0, 0), 5.0 / 3.0, 1e-15);

  const LGSSM m = make_random_lgssm(2, 1, 3, 8);
  const GaussianMoment first = predictive_moments(m, initial_moment(m), 1, l);
  const auto& f = m.steps[0];
  EXPECT_LT(relative_error(first.mean, add(matmul(f.F, m.m0, l), f.u, l)), 1e-15);
  EXPECT_LT(relative_error(first.cov, add(matmul(matmul(f.F, m.P0, l), f.F.transposed(), l), f.Q, l)), 1e-15);
}

TEST(ParallelLoglik, ScalarSingleStep) {
  const LGSSM m = scalar_model(1);
  const std::vector<Vector> ys{Vector{1}};
  const auto r = parallel_loglik(m, parallel_filter(m, ys).filtered, ys);
  EXPECT_NEAR(r.log_prefix[0], -0.5 * std::log(2 * std::numbers::pi * 3) - 1.0 / 6.0, 1e-14);
}

TEST(ParallelLoglik, FlatLikelihoodStaysFiniteAndDecreasing) {
  StepParams p{Matrix{{1}}, Vector{0}, Matrix{{1}}, Matrix{{1}}, Vector{0}, Matrix{{1e8}}};
  const LGSSM m{Vector{0}, Matrix{{1}}, {p}, 20};
  const SimResult sim = simulate(m, 3);
  const auto filtered = parallel_filter(m, sim.measurements).filtered;
  const auto r = parallel_loglik(m, filtered, sim.measurements);
  for (std::size_t k = 0; k < m.n; ++k) {
    EXPECT_TRUE(std::isfinite(r.log_prefix[k]));
    // Scalar random walk: predictive mean m_{k-1}, variance P_{k-1} + 1 + R.
    const double mean = k == 0 ? 0.0 : filtered[k - 1].mean[0];
    const double var = (k == 0 ? 1.0 : filtered[k - 1].cov(0, 0)) + 1 + 1e8;
    const double y = sim.measurements[k][0] - mean;
    EXPECT_NEAR(r.log_densities[k], -0.5 * std::log(2 * std::numbers::pi * var) - 0.5 * y * y / var, 1e-9);
    if (k > 0) {
      EXPECT_LT(r.log_prefix[k], r.log_prefix[k - 1]);
    }
  }
}

TEST(ParallelLoglik, TrackingMatchesKalmanFilter) {
  const LGSSM m = make_default_tracking_model(100);
  const SimResult sim = simulate(m, 9);
  FlopLedger l;
  const FilterRun ref = kalman_filter(m, sim.measurements, l);
  const auto r = parallel_loglik(m, parallel_filter(m, sim.measurements).filtered, sim.measurements);
  for (std::size_t k = 0; k < m.n; ++k) EXPECT_NEAR(r.log_prefix[k], ref.log_prefix[k], 1e-8);
}

TEST(GaussianIdentities, HoldUpToConstant) {
  const auto r = verify::check_gaussian_identities();
  EXPECT_TRUE(r.passed) << r.detail;
}
