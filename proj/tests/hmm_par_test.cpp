#include <gtest/gtest.h>

#include <cmath>

#include "parbayes/hmm_par.hpp"
#include "parbayes/verify.hpp"

using namespace parbayes;

namespace {

void expect_rows_stochastic(const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

}  // namespace

TEST(HmmFilterElement, UninformativeEmission) {
  HmmData d = make_random_hmm(3, 4, 1);
  for (auto& l : d.model.likelihoods) l = Vector(3, 0.2);
  FlopLedger l;
  const auto e = hmm_filter_element(d.model, 2, l);
  for (std::size_t z = 0; z < 3; ++z) {
    for (std::size_t x = 0; x < 3; ++x) EXPECT_NEAR(e.f(z, x), d.model.transition(z, x), 1e-15);
    EXPECT_NEAR(e.log_g[z], std::log(0.2), 1e-15);
  }
}

TEST(HmmFilterElement, PointMassEmission) {
  HmmData d = make_random_hmm(3, 4, 2);
  d.model.likelihoods[2] = Vector{0, 0.7, 0};
  FlopLedger l;
  const auto e = hmm_filter_element(d.model, 3, l);
  for (std::size_t z = 0; z < 3; ++z) {
    EXPECT_EQ(e.f(z, 1), 1.0);
    EXPECT_NEAR(std::exp(e.log_g[z]), d.model.transition(z, 1) * 0.7, 1e-15);
  }
}

TEST(HmmFilterElement, FirstElementRowsAreIdentical) {
  const HmmData d = make_random_hmm(4, 3, 3);
  FlopLedger l;
  const auto e = hmm_filter_element(d.model, 1, l);
  for (std::size_t z = 1; z < 4; ++z) {
    for (std::size_t x = 0; x < 4; ++x) EXPECT_EQ(e.f(z, x), e.f(0, x));
    EXPECT_EQ(e.log_g[z], e.log_g[0]);
  }
  EXPECT_THROW(hmm_filter_element(d.model, 0, l), std::out_of_range);
  EXPECT_THROW(hmm_filter_element(d.model, 4, l), std::out_of_range);
}

TEST(HmmFilterElement, ChainedCombinesMatchEnumeration) {
  const HmmData d = make_random_hmm(3, 4, 4);
  FlopLedger l;
  const auto truth = brute_force_posterior(d.model);
  HmmFilterElement acc = hmm_filter_element(d.model, 1, l);
  for (std::size_t k = 2; k <= 4; ++k) {
    acc = combine_hmm_filter(acc, hmm_filter_element(d.model, k, l), l);
    for (std::size_t x = 0; x < 3; ++x) EXPECT_NEAR(acc.f(0, x), truth.filtered[k - 1][x], 1e-12);
    EXPECT_NEAR(acc.log_g[0], truth.log_prefix[k - 1], 1e-12);
  }
}

TEST(CombineHmmFilter, IdentityAndStochasticity) {
  GaussianSampler s(5);
  FlopLedger l;
  for (int t = 0; t < 100; ++t) {
    const std::size_t ns = 2 + t % 4;
    const auto a = verify::random_hmm_filter_element(s, ns), b = verify::random_hmm_filter_element(s, ns);
    EXPECT_LE(verify::distance(combine_hmm_filter(a, hmm_filter_identity(ns), l), a), 1e-15);
    EXPECT_LE(verify::distance(combine_hmm_filter(hmm_filter_identity(ns), a, l), a), 1e-15);
    expect_rows_stochastic(combine_hmm_filter(a, b, l).f);
  }
}

TEST(CombineHmmFilter, Associative) {
  GaussianSampler s(6);
  FlopLedger l;
  for (int t = 0; t < 500; ++t) {
    const std::size_t ns = 2 + t % 4;
    const auto a = verify::random_hmm_filter_element(s, ns), b = verify::random_hmm_filter_element(s, ns),
               c = verify::random_hmm_filter_element(s, ns);
    EXPECT_LE(verify::distance(combine_hmm_filter(combine_hmm_filter(a, b, l), c, l),
                               combine_hmm_filter(a, combine_hmm_filter(b, c, l), l)),
              1e-12);
  }
}

TEST(CombineHmmFilter, LargeLogLikelihoodsDoNotUnderflow) {
  HmmFilterElement a{Matrix{{0.5, 0.5}, {0.2, 0.8}}, Vector{-2000, -2100}};
  HmmFilterElement b{Matrix{{0.9, 0.1}, {0.4, 0.6}}, Vector{-3000, -3001}};
  FlopLedger l;
  const auto c = combine_hmm_filter(a, b, l);
  EXPECT_TRUE(c.f.all_finite());
  EXPECT_TRUE(std::isfinite(c.log_g[0]) && std::isfinite(c.log_g[1]));
  EXPECT_LT(c.log_g[0], -4999);
}

TEST(CombineHmmFilter, ZeroDenominatorThrows) {
  HmmFilterElement a{Matrix{{1, 0}, {0, 1}}, Vector{0, 0}};
  HmmFilterElement b{Matrix{{1, 0}, {0, 1}}, Vector{-INFINITY, 0}};
  FlopLedger l;
  EXPECT_THROW(combine_hmm_filter(a, b, l), std::domain_error);
}

TEST(HmmSmoothElement, UniformTransitionAndLastStep) {
  HmmModel m;
  m.transition = Matrix{{0.5, 0.5}, {0.5, 0.5}};
  m.initial = Vector{0.5, 0.5};
  m.likelihoods.assign(3, Vector{0.3, 0.6});
  const Vector alpha{0.2, 0.8};
  FlopLedger l;
  for (std::size_t k : {1, 3}) {
    const auto e = hmm_smooth_element(m, alpha, k, 3, l);
    for (std::size_t z = 0; z < 2; ++z)
      for (std::size_t x = 0; x < 2; ++x) EXPECT_NEAR(e.m(z, x), alpha[x], 1e-15);
  }
  const HmmData d = make_random_hmm(3, 5, 7);
  const auto last = hmm_smooth_element(d.model, Vector{0.1, 0.3, 0.6}, 5, 5, l);
  for (std::size_t z = 0; z < 3; ++z) EXPECT_EQ(last.m(z, 2), 0.6);
}

TEST(CombineHmmSmooth, IdentityAndAssociativity) {
  GaussianSampler s(8);
  FlopLedger l;
  for (int t = 0; t < 200; ++t) {
    const std::size_t ns = 2 + t % 4;
    const auto a = verify::random_hmm_smooth_element(s, ns), b = verify::random_hmm_smooth_element(s, ns),
               c = verify::random_hmm_smooth_element(s, ns);
    EXPECT_LE(verify::distance(combine_hmm_smooth(a, hmm_smooth_identity(ns), l), a), 0.0);
    EXPECT_LE(verify::distance(combine_hmm_smooth(hmm_smooth_identity(ns), a, l), a), 0.0);
    EXPECT_LE(verify::distance(combine_hmm_smooth(combine_hmm_smooth(a, b, l), c, l),
                               combine_hmm_smooth(a, combine_hmm_smooth(b, c, l), l)),
              1e-14);
    expect_rows_stochastic(combine_hmm_smooth(a, b, l).m);
  }
}

TEST(ParallelHmm, SingleStepIsBayesUpdate) {
  const HmmData d = make_random_hmm(3, 1, 9);
  const auto truth = brute_force_posterior(d.model);
  const auto f = parallel_hmm_filter(d.model);
  const auto s = parallel_hmm_smoother(d.model, f.filtered);
  for (std::size_t x = 0; x < 3; ++x) {
    EXPECT_NEAR(f.filtered[0][x], truth.filtered[0][x], 1e-15);
    EXPECT_NEAR(s.smoothed[0][x], truth.filtered[0][x], 1e-15);
  }
  EXPECT_NEAR(f.log_likelihood, truth.log_likelihood, 1e-15);
}

TEST(ParallelHmm, MatchesEnumeration) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const HmmData d = make_random_hmm(3, 6, 40 + seed);
    const auto truth = brute_force_posterior(d.model);
    const auto f = parallel_hmm_filter(d.model);
    const auto s = parallel_hmm_smoother(d.model, f.filtered);
    for (std::size_t k = 0; k < 6; ++k)
      for (std::size_t x = 0; x < 3; ++x) {
        EXPECT_NEAR(f.filtered[k][x], truth.filtered[k][x], 1e-12);
        EXPECT_NEAR(s.smoothed[k][x], truth.smoothed[k][x], 1e-12);
      }
    EXPECT_NEAR(f.log_likelihood, truth.log_likelihood, 1e-12);
  }
}

TEST(ParallelHmm, UniformModelClosedForm) {
  HmmModel m;
  m.transition = Matrix(3, 3);
  for (double& v : m.transition.entries()) v = 1.0 / 3.0;
  m.initial = Vector(3, 1.0 / 3.0);
  const double liks[] = {0.1, 0.5, 0.9, 0.3};
  double expected = 0;
  for (double c : liks) {
    m.likelihoods.push_back(Vector{c, c, c});
    expected += std::log(c);
  }
  const auto f = parallel_hmm_filter(m);
  const auto s = parallel_hmm_smoother(m, f.filtered);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t x = 0; x < 3; ++x) {
      EXPECT_NEAR(f.filtered[k][x], 1.0 / 3.0, 1e-15);
      EXPECT_NEAR(s.smoothed[k][x], 1.0 / 3.0, 1e-15);
    }
  EXPECT_NEAR(f.log_likelihood, expected, 1e-13);
}

TEST(ParallelHmm, LongSequencesMatchForwardBackward) {
  const HmmData d = make_random_hmm(4, 10000, 11);
  const auto fwd = hmm_forward(d.model);
  const auto bwd = hmm_backward_smooth(d.model, fwd);
  for (std::size_t block : {1, 16}) {
    const auto f = parallel_hmm_filter(d.model, Executor{}, block);
    const auto s = parallel_hmm_smoother(d.model, f.filtered, Executor{}, block);
    double worst = 0;
    for (std::size_t k = 0; k < d.model.steps(); ++k) {
      worst = std::max(worst, verify::max_abs_diff(f.filtered[k], fwd.filtered[k]));
      worst = std::max(worst, verify::max_abs_diff(s.smoothed[k], bwd[k]));
      worst = std::max(worst, std::abs(f.log_prefix[k] - fwd.log_prefix[k]) / std::max(1.0, std::abs(fwd.log_prefix[k])));
    }
    EXPECT_LE(worst, 1e-10);
  }
}
