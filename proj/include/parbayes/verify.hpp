#pragma once

// Oracle and property checks shared by the acceptance test binary and the
// `verify` CLI subcommand. Every check reports its worst observed error
// against a fixed tolerance.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "parbayes/bench.hpp"
#include "parbayes/hmm_par.hpp"
#include "parbayes/kernel.hpp"
#include "parbayes/pkf.hpp"
#include "parbayes/prts.hpp"
#include "parbayes/scan.hpp"
#include "parbayes/sequential.hpp"
#include "parbayes/ssm.hpp"

namespace parbayes::verify {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Distances

inline double distance(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }
inline double distance(const Matrix& a, const Matrix& b) { return relative_error(a, b); }
inline double distance(const Vector& a, const Vector& b) { return relative_error(a, b); }

inline double distance(const FilterElement& a, const FilterElement& b) {
  return std::max({distance(a.A, b.A), distance(a.b, b.b), distance(a.C, b.C), distance(a.eta, b.eta),
                   distance(a.J, b.J)});
}
inline double distance(const SmoothElement& a, const SmoothElement& b) {
  return std::max({distance(a.E, b.E), distance(a.g, b.g), distance(a.L, b.L)});
}

// Discrete elements are compared in absolute terms; log g relatively.
inline double distance(const HmmFilterElement& a, const HmmFilterElement& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.f.entries().size(); ++i) d = std::max(d, std::abs(a.f.entries()[i] - b.f.entries()[i]));
  for (std::size_t i = 0; i < a.log_g.dim(); ++i)
    d = std::max(d, std::abs(a.log_g[i] - b.log_g[i]) / std::max(1.0, std::abs(b.log_g[i])));
  return d;
}
inline double distance(const HmmSmoothElement& a, const HmmSmoothElement& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.m.entries().size(); ++i) d = std::max(d, std::abs(a.m.entries()[i] - b.m.entries()[i]));
  return d;
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

struct MomentErrors {
  double mean = 0.0;
  double cov = 0.0;
};

inline MomentErrors moment_errors(const std::vector<GaussianMoment>& got, const std::vector<GaussianMoment>& ref) {
  MomentErrors e;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    e.mean = std::max(e.mean, relative_error(got[k].mean, ref[k].mean));
    e.cov = std::max(e.cov, relative_error(got[k].cov, ref[k].cov));
  }
  return e;
}

// ---------------------------------------------------------------------------
// Random fixtures

inline Matrix random_psd(GaussianSampler& s, std::size_t n, double scale) {
  FlopLedger scratch;
  Matrix g(n, n);
  for (double& v : g.entries()) v = s.normal();
  Matrix out = sym(matmul(g, g.transposed(), scratch));
  for (double& v : out.entries()) v *= scale / static_cast<double>(n);
  return out;
}

inline Matrix random_matrix(GaussianSampler& s, std::size_t r, std::size_t c, double scale) {
  Matrix m(r, c);
  for (double& v : m.entries()) v = scale * s.normal();
  return m;
}

inline Vector random_vector(GaussianSampler& s, std::size_t n, double scale) {
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = scale * s.normal();
  return v;
}

inline FilterElement random_filter_element(GaussianSampler& s, std::size_t nx) {
  return {random_matrix(s, nx, nx, 0.5), random_vector(s, nx, 1.0), random_psd(s, nx, 1.0),
          random_vector(s, nx, 1.0), random_psd(s, nx, 1.0)};
}

inline SmoothElement random_smooth_element(GaussianSampler& s, std::size_t nx) {
  return {random_matrix(s, nx, nx, 0.5), random_vector(s, nx, 1.0), random_psd(s, nx, 1.0)};
}

inline Matrix random_stochastic(GaussianSampler& s, std::size_t ns) {
  Matrix m(ns, ns);
  for (std::size_t i = 0; i < ns; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < ns; ++j) total += (m(i, j) = 0.05 + s.uniform());
    for (std::size_t j = 0; j < ns; ++j) m(i, j) /= total;
  }
  return m;
}

inline HmmFilterElement random_hmm_filter_element(GaussianSampler& s, std::size_t ns) {
  HmmFilterElement e{random_stochastic(s, ns), Vector(ns)};
  for (std::size_t i = 0; i < ns; ++i) e.log_g[i] = std::log(0.05 + s.uniform());
  return e;
}

inline HmmSmoothElement random_hmm_smooth_element(GaussianSampler& s, std::size_t ns) {
  return {random_stochastic(s, ns)};
}

// Random model with nx in [1, 6], ny in [1, 4].
inline LGSSM random_model(std::uint64_t seed, std::size_t n) {
  const std::size_t nx = 1 + seed % 6;
  const std::size_t ny = 1 + (seed / 6) % 4;
  return make_random_lgssm(nx, ny, n, 1000 + seed);
}

// ---------------------------------------------------------------------------
// Reporting helpers

inline std::string fmt_err(const std::string& what, double err, double tol) {
  std::ostringstream os;
  os.precision(3);
  os << what << " " << std::scientific << err << " (tol " << tol << ")";
  return os.str();
}

inline CheckResult make_result(int id, std::string name, bool ok, std::string detail) {
  return {id, std::move(name), ok, std::move(detail)};
}

inline const std::vector<std::size_t>& oracle_lengths() {
  static const std::vector<std::size_t> ns{1, 2, 3, 7, 64, 1000};
  return ns;
}

// ---------------------------------------------------------------------------
// Criteria

inline CheckResult check_filter_oracle(const Executor& exec = Executor{}) {
  constexpr double kMeanTol = 1e-8, kCovTol = 1e-7;
  MomentErrors worst;
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    for (std::size_t n : oracle_lengths()) {
      const LGSSM model = random_model(seed, n);
      const SimResult sim = simulate(model, seed);
      FlopLedger scratch;
      const FilterRun ref = kalman_filter(model, sim.measurements, scratch);
      const ParallelFilterResult got = parallel_filter(model, sim.measurements, 1, exec);
      const MomentErrors e = moment_errors(got.filtered, ref.filtered);
      worst.mean = std::max(worst.mean, e.mean);
      worst.cov = std::max(worst.cov, e.cov);
    }
  const bool ok = worst.mean <= kMeanTol && worst.cov <= kCovTol;
  return make_result(1, "parallel filter matches Kalman filter (50 models x 6 lengths)", ok,
                     fmt_err("mean", worst.mean, kMeanTol) + ", " + fmt_err("cov", worst.cov, kCovTol));
}

inline CheckResult check_smoother_oracle(const Executor& exec = Executor{}) {
  constexpr double kMeanTol = 1e-8, kCovTol = 1e-7;
  MomentErrors worst;
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    for (std::size_t n : oracle_lengths()) {
      const LGSSM model = random_model(seed, n);
      const SimResult sim = simulate(model, seed);
      FlopLedger scratch;
      const FilterRun run = kalman_filter(model, sim.measurements, scratch);
      const auto ref = rts_smoother(model, run, scratch);
      const ParallelFilterResult pf = parallel_filter(model, sim.measurements, 1, exec);
      const ParallelSmootherResult got = parallel_smoother(model, pf.filtered, 1, exec);
      const MomentErrors e = moment_errors(got.smoothed, ref);
      worst.mean = std::max(worst.mean, e.mean);
      worst.cov = std::max(worst.cov, e.cov);
    }
  const bool ok = worst.mean <= kMeanTol && worst.cov <= kCovTol;
  return make_result(2, "parallel smoother matches RTS smoother (50 models x 6 lengths)", ok,
                     fmt_err("mean", worst.mean, kMeanTol) + ", " + fmt_err("cov", worst.cov, kCovTol));
}

// F = Q = H = R = 1, m0 = 0, P0 = 1, y = (1, 0).
inline LGSSM scalar_model() {
  StepParams p{Matrix{{1}}, Vector{0}, Matrix{{1}}, Matrix{{1}}, Vector{0}, Matrix{{1}}};
  return LGSSM{Vector{0}, Matrix{{1}}, {p}, 2};
}

inline CheckResult check_scalar_case() {
  constexpr double kTol = 1e-12;
  const LGSSM model = scalar_model();
  const std::vector<Vector> ys{Vector{1}, Vector{0}};
  FlopLedger scratch;
  const FilterRun run = kalman_filter(model, ys, scratch);
  const auto rts = rts_smoother(model, run, scratch);
  const auto pf = parallel_filter(model, ys);
  const auto ps = parallel_smoother(model, pf.filtered);

  const double fm[2] = {2.0 / 3.0, 0.25}, fv[2] = {2.0 / 3.0, 5.0 / 8.0};
  const double sm[2] = {0.5, 0.25}, sv[2] = {0.5, 5.0 / 8.0};
  double err = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    for (const auto* f : {&run.filtered, &pf.filtered}) {
      err = std::max(err, std::abs((*f)[k].mean[0] - fm[k]));
      err = std::max(err, std::abs((*f)[k].cov(0, 0) - fv[k]));
    }
    for (const auto* s : {&rts, &ps.smoothed}) {
      err = std::max(err, std::abs((*s)[k].mean[0] - sm[k]));
      err = std::max(err, std::abs((*s)[k].cov(0, 0) - sv[k]));
    }
  }
  return make_result(3, "scalar two-step case, sequential and parallel", err <= kTol,
                     fmt_err("max abs error", err, kTol));
}

inline CheckResult check_discrete_exactness(const Executor& exec = Executor{}) {
  constexpr double kTol = 1e-12;
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const std::size_t ns = 2 + i % 2;
    const std::size_t n = 1 + i % 6;
    const HmmData data = make_random_hmm(ns, n, 500 + i);
    const BruteForcePosterior truth = brute_force_posterior(data.model);
    const auto pf = parallel_hmm_filter(data.model, exec);
    const auto ps = parallel_hmm_smoother(data.model, pf.filtered, exec);
    for (std::size_t k = 0; k < n; ++k) {
      worst = std::max(worst, max_abs_diff(pf.filtered[k], truth.filtered[k]));
      worst = std::max(worst, max_abs_diff(ps.smoothed[k], truth.smoothed[k]));
      worst = std::max(worst, std::abs(pf.log_prefix[k] - truth.log_prefix[k]));
    }
    worst = std::max(worst, std::abs(pf.log_likelihood - truth.log_likelihood));
  }
  return make_result(4, "discrete parallel filter/smoother equals enumeration (100 HMMs)", worst <= kTol,
                     fmt_err("max abs error", worst, kTol));
}

namespace detail {

inline const std::vector<std::size_t>& scan_lengths() {
  static const std::vector<std::size_t> ns{1, 2, 3, 4, 5, 6, 7, 8, 9, 16, 17, 64, 1000};
  return ns;
}

template <class M>
double scan_gap(const std::vector<typename M::value_type>& elems, const M& monoid, const Executor& exec) {
  using T = typename M::value_type;
  const auto seq = seq_scan(std::span<const T>(elems), monoid);
  const auto par = par_scan(std::span<const T>(elems), monoid, exec);
  double worst = 0.0;
  for (std::size_t k = 0; k < elems.size(); ++k) worst = std::max(worst, distance(par.results[k], seq.results[k]));
  return worst;
}

}  // namespace detail

inline CheckResult check_scan_correctness(const Executor& exec = Executor{}) {
  const std::vector<double> small{1, 2, 3, 4};
  const auto seq = seq_scan(std::span<const double>(small), AddMonoid{});
  const auto par = par_scan(std::span<const double>(small), AddMonoid{}, exec);
  const std::vector<double> expected{1, 3, 6, 10};
  bool ok = seq.results == expected && par.results == expected;
  std::ostringstream detail;
  detail << "(1,2,3,4)->" << (ok ? "(1,3,6,10)" : "WRONG");

  struct Gap {
    const char* name;
    double tol;
    double worst = 0.0;
  };
  Gap gaps[] = {{"add", 1e-12}, {"matrix", 1e-10}, {"filter", 1e-8}, {"smooth", 1e-8},
                {"hmm-filter", 1e-12}, {"hmm-smooth", 1e-12}};
  for (std::size_t n : detail::scan_lengths()) {
    GaussianSampler s(7000 + n);
    std::vector<double> nums(n);
    for (double& v : nums) v = s.normal();
    gaps[0].worst = std::max(gaps[0].worst, detail::scan_gap(nums, AddMonoid{}, exec));

    FlopLedger scratch;
    std::vector<Matrix> mats;
    for (std::size_t i = 0; i < n; ++i) mats.push_back(add_identity(random_matrix(s, 3, 3, 0.05), scratch));
    gaps[1].worst = std::max(gaps[1].worst, detail::scan_gap(mats, MatrixProductMonoid{3}, exec));

    const LGSSM model = random_model(n, n);
    const SimResult sim = simulate(model, n);
    std::vector<FilterElement> fe;
    for (std::size_t k = 1; k <= n; ++k) fe.push_back(filter_element(model, sim.measurements[k - 1], k, scratch));
    gaps[2].worst = std::max(gaps[2].worst, detail::scan_gap(fe, FilterMonoid{model.state_dim()}, exec));

    const FilterRun run = kalman_filter(model, sim.measurements, scratch);
    std::vector<SmoothElement> se;
    for (std::size_t k = 1; k <= n; ++k) se.push_back(smooth_element(model, run.filtered[k - 1], k, n, scratch));
    // Suffix order: scan the reversed sequence under the opposite operator.
    std::vector<SmoothElement> rev(se.rbegin(), se.rend());
    gaps[3].worst = std::max(gaps[3].worst, detail::scan_gap(rev, Opposite<SmoothMonoid>{{model.state_dim()}}, exec));

    const HmmData hmm = make_random_hmm(3, n, 9000 + n);
    std::vector<HmmFilterElement> he;
    std::vector<HmmSmoothElement> hs;
    const auto fwd = hmm_forward(hmm.model);
    for (std::size_t k = 1; k <= n; ++k) {
      he.push_back(hmm_filter_element(hmm.model, k, scratch));
      hs.push_back(hmm_smooth_element(hmm.model, fwd.filtered[k - 1], k, n, scratch));
    }
    gaps[4].worst = std::max(gaps[4].worst, detail::scan_gap(he, HmmFilterMonoid{3}, exec));
    std::vector<HmmSmoothElement> hrev(hs.rbegin(), hs.rend());
    gaps[5].worst = std::max(gaps[5].worst, detail::scan_gap(hrev, Opposite<HmmSmoothMonoid>{{3}}, exec));
  }
  for (const auto& g : gaps) {
    ok = ok && g.worst <= g.tol;
    detail << ", " << fmt_err(g.name, g.worst, g.tol);
  }
  return make_result(5, "parallel scan equals sequential scan for every monoid", ok, detail.str());
}

namespace detail {

template <class T, class Combine>
double associativity_gap(const T& a, const T& b, const T& c, Combine combine) {
  FlopLedger scratch;
  const T left = combine(combine(a, b, scratch), c, scratch);
  const T right = combine(a, combine(b, c, scratch), scratch);
  return distance(left, right);
}

}  // namespace detail

inline CheckResult check_associativity() {
  constexpr double kGaussTol = 1e-9, kDiscreteTol = 1e-12;
  double gf = 0, gs = 0, df = 0, ds = 0;
  GaussianSampler s(424242);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t nx = 1 + t % 5;
    const std::size_t ns = 2 + t % 4;
    gf = std::max(gf, detail::associativity_gap(random_filter_element(s, nx), random_filter_element(s, nx),
                                                random_filter_element(s, nx), combine_filter));
    gs = std::max(gs, detail::associativity_gap(random_smooth_element(s, nx), random_smooth_element(s, nx),
                                                random_smooth_element(s, nx), combine_smooth));
    df = std::max(df, detail::associativity_gap(random_hmm_filter_element(s, ns), random_hmm_filter_element(s, ns),
                                                random_hmm_filter_element(s, ns), combine_hmm_filter));
    ds = std::max(ds, detail::associativity_gap(random_hmm_smooth_element(s, ns), random_hmm_smooth_element(s, ns),
                                                random_hmm_smooth_element(s, ns), combine_hmm_smooth));
  }
  const bool ok = gf <= kGaussTol && gs <= kGaussTol && df <= kDiscreteTol && ds <= kDiscreteTol;
  return make_result(6, "associativity on 1000 random triples per operator", ok,
                     fmt_err("gauss-filter", gf, kGaussTol) + ", " + fmt_err("gauss-smooth", gs, kGaussTol) + ", " +
                         fmt_err("hmm-filter", df, kDiscreteTol) + ", " + fmt_err("hmm-smooth", ds, kDiscreteTol));
}

inline CheckResult check_marginal_likelihood(const Executor& exec = Executor{}) {
  constexpr double kTol = 1e-8;
  const LGSSM model = make_default_tracking_model(1000);
  const SimResult sim = simulate(model, 2024);
  FlopLedger scratch;
  const FilterRun ref = kalman_filter(model, sim.measurements, scratch);
  const auto pf = parallel_filter(model, sim.measurements, 1, exec);
  const auto ll = parallel_loglik(model, pf.filtered, sim.measurements, exec);
  double worst = 0.0;
  for (std::size_t k = 0; k < model.n; ++k) worst = std::max(worst, std::abs(ll.log_prefix[k] - ref.log_prefix[k]));
  return make_result(7, "two-pass parallel log-likelihood matches Kalman filter (tracking, n=1000)", worst <= kTol,
                     fmt_err("max abs prefix error", worst, kTol));
}

inline CheckResult check_block_invariance(const Executor& exec = Executor{}) {
  constexpr double kTol = 1e-9;
  double worst = 0.0;
  auto run_case = [&](const LGSSM& model, std::uint64_t seed) {
    const SimResult sim = simulate(model, seed);
    const auto base_f = parallel_filter(model, sim.measurements, 1, exec);
    const auto base_s = parallel_smoother(model, base_f.filtered, 1, exec);
    for (std::size_t block : {std::size_t{2}, std::size_t{4}, std::size_t{8}, model.n}) {
      const auto f = parallel_filter(model, sim.measurements, block, exec);
      const auto s = parallel_smoother(model, base_f.filtered, block, exec);
      const MomentErrors ef = moment_errors(f.filtered, base_f.filtered);
      const MomentErrors es = moment_errors(s.smoothed, base_s.smoothed);
      worst = std::max({worst, ef.mean, ef.cov, es.mean, es.cov});
    }
  };
  run_case(make_default_tracking_model(300), 11);
  for (std::uint64_t seed = 0; seed < 10; ++seed) run_case(random_model(seed, 37 + 10 * seed), seed);
  return make_result(8, "block lengths {1,2,4,8,n} give identical moments", worst <= kTol,
                     fmt_err("max relative deviation", worst, kTol));
}

inline CheckResult check_flop_shape(const Executor& exec = Executor{}) {
  RunConfig config;
  config.ns = default_sweep();
  config.threads = exec.threads();
  const auto records = run_bench(config);
  const BenchSummary s = summarize(records);
  bool ok = true;
  std::ostringstream os;
  os.precision(3);
  double kf_lo = 1e300, kf_hi = 0, rts_lo = 1e300, rts_hi = 0, growth = 0;
  for (const auto& [n, r] : s.filter.work_ratio)
    if (n >= 256) kf_lo = std::min(kf_lo, r), kf_hi = std::max(kf_hi, r);
  for (const auto& [n, r] : s.smoother.work_ratio)
    if (n >= 256) rts_lo = std::min(rts_lo, r), rts_hi = std::max(rts_hi, r);
  ok = ok && kf_lo >= 5.0 && kf_hi <= 12.0 && rts_lo >= 2.5 && rts_hi <= 6.0;
  for (const auto& [n, span] : s.filter.par_span)
    if (n >= 64 && !(span < s.filter.seq_work.at(n))) ok = false;
  for (const auto& [n, span] : s.smoother.par_span)
    if (n >= 32 && !(span < s.smoother.seq_work.at(n))) ok = false;
  for (const auto* pair : {&s.filter, &s.smoother})
    for (const auto& [n, span] : pair->par_span) {
      const auto next = pair->par_span.find(2 * n);
      if (n >= 1024 && next != pair->par_span.end()) growth = std::max(growth, next->second / span);
    }
  ok = ok && growth <= 1.35;
  os << "PKF/KF work in [" << kf_lo << ", " << kf_hi << "] (band [5,12]); PRTS/RTS work in [" << rts_lo << ", "
     << rts_hi << "] (band [2.5,6]); crossover PKF n=" << (s.filter.crossover_n ? std::to_string(*s.filter.crossover_n) : "none")
     << " (need <=64), PRTS n=" << (s.smoother.crossover_n ? std::to_string(*s.smoother.crossover_n) : "none")
     << " (need <=32); max span(2n)/span(n) for n>=1024 = " << growth << " (tol 1.35)";
  return make_result(9, "flop shape: work ratios, span crossovers, logarithmic span growth", ok, os.str());
}

// ---------------------------------------------------------------------------
// Gaussian identity checks. Densities are evaluated directly; the
// marginalization identity integrates numerically on a tensor trapezoid grid.

namespace detail {

// log N(y; m, C), straightforward evaluation.
inline double log_normal(const Vector& y, const Vector& m, const Matrix& c) {
  FlopLedger scratch;
  return gaussian_log_density(sub(y, m, scratch), c, scratch);
}

// log of exp(-y^T J y / 2 + eta^T y), the unnormalized information form.
inline double log_info(const Vector& y, const Vector& eta, const Matrix& j) {
  double q = 0.0, l = 0.0;
  for (std::size_t a = 0; a < y.dim(); ++a) {
    l += eta[a] * y[a];
    for (std::size_t b = 0; b < y.dim(); ++b) q += y[a] * j(a, b) * y[b];
  }
  return -0.5 * q + l;
}

inline double spread(const std::vector<double>& log_ratios) {
  const auto [lo, hi] = std::minmax_element(log_ratios.begin(), log_ratios.end());
  return std::expm1(*hi - *lo);
}

}  // namespace detail

inline CheckResult check_gaussian_identities() {
  constexpr double kTol = 1e-8;
  GaussianSampler s(31337);
  FlopLedger scratch;
  std::vector<double> r1, r2, r3;

  {  // N_I(y; eta, J) N(y; m, C) ∝ N(y; (J + C^-1)^-1 (eta + C^-1 m), (J + C^-1)^-1)
    const std::size_t d = 3;
    const Vector eta = random_vector(s, d, 0.5), m = random_vector(s, d, 1.0);
    const Matrix j = random_psd(s, d, 1.0);
    Matrix c = random_psd(s, d, 1.0);
    for (std::size_t i = 0; i < d; ++i) c(i, i) += 0.2;
    const Matrix c_inv = solve(c, Matrix::identity(d), scratch);
    const Matrix post_cov = sym(solve(add(j, c_inv, scratch), Matrix::identity(d), scratch));
    const Vector post_mean = matmul(post_cov, add(eta, matmul(c_inv, m, scratch), scratch), scratch);
    for (int t = 0; t < 100; ++t) {
      const Vector y = random_vector(s, d, 2.0);
      r1.push_back(detail::log_info(y, eta, j) + detail::log_normal(y, m, c) - detail::log_normal(y, post_mean, post_cov));
    }
  }
  {  // N_I(y; eta, J) N_I(y; eta', J') ∝ N_I(y; eta + eta', J + J')
    const std::size_t d = 3;
    const Vector e1 = random_vector(s, d, 1.0), e2 = random_vector(s, d, 1.0);
    const Matrix j1 = random_psd(s, d, 1.0), j2 = random_psd(s, d, 1.0);
    for (int t = 0; t < 100; ++t) {
      const Vector y = random_vector(s, d, 2.0);
      r2.push_back(detail::log_info(y, e1, j1) + detail::log_info(y, e2, j2) -
                   detail::log_info(y, add(e1, e2, scratch), add(j1, j2, scratch)));
    }
  }
  {  // ∫ N_I(y; eta, J) N(y; A z + b, C) dy ∝ N_I(z; A^T (I + J C)^-1 (eta - J b), A^T (I + J C)^-1 J A)
    const std::size_t d = 2;
    const Vector eta = random_vector(s, d, 0.5), b = random_vector(s, d, 0.5);
    const Matrix j = random_psd(s, d, 0.5), a = random_matrix(s, d, d, 0.7);
    Matrix c = random_psd(s, d, 0.5);
    for (std::size_t i = 0; i < d; ++i) c(i, i) += 0.1;
    const Matrix m = add_identity(matmul(j, c, scratch), scratch);
    const Vector eta_z = matmul(a.transposed(), solve(m, sub(eta, matmul(j, b, scratch), scratch), scratch), scratch);
    const Matrix j_z = matmul(a.transposed(), solve(m, matmul(j, a, scratch), scratch), scratch);
    const Matrix chol = psd_cholesky(c);
    constexpr double kHalfWidth = 12.0, kStep = 0.1;
    const int steps = static_cast<int>(2 * kHalfWidth / kStep);
    for (int t = 0; t < 100; ++t) {
      const Vector z = random_vector(s, d, 1.0);
      const Vector mu = add(matmul(a, z, scratch), b, scratch);
      // y = mu + chol * xi with xi standard normal; integrate over xi.
      double total = 0.0;
      for (int p = 0; p <= steps; ++p)
        for (int q = 0; q <= steps; ++q) {
          const double x0 = -kHalfWidth + p * kStep, x1 = -kHalfWidth + q * kStep;
          const Vector y{mu[0] + chol(0, 0) * x0, mu[1] + chol(1, 0) * x0 + chol(1, 1) * x1};
          const double w = (p == 0 || p == steps ? 0.5 : 1.0) * (q == 0 || q == steps ? 0.5 : 1.0);
          total += w * std::exp(detail::log_info(y, eta, j) - 0.5 * (x0 * x0 + x1 * x1));
        }
      total *= kStep * kStep / (2.0 * std::numbers::pi);
      r3.push_back(std::log(total) - detail::log_info(z, eta_z, j_z));
    }
  }
  const double e1 = detail::spread(r1), e2 = detail::spread(r2), e3 = detail::spread(r3);
  const bool ok = e1 <= kTol && e2 <= kTol && e3 <= kTol;
  return make_result(10, "Gaussian product/marginalization identities hold up to a constant", ok,
                     fmt_err("product", e1, kTol) + ", " + fmt_err("info-product", e2, kTol) + ", " +
                         fmt_err("marginalization", e3, kTol));
}

using Check = std::function<CheckResult()>;

inline std::vector<Check> acceptance_checks(const Executor& exec = Executor{}) {
  return {[=] { return check_filter_oracle(exec); },  [=] { return check_smoother_oracle(exec); },
          [] { return check_scalar_case(); },         [=] { return check_discrete_exactness(exec); },
          [=] { return check_scan_correctness(exec); }, [] { return check_associativity(); },
          [=] { return check_marginal_likelihood(exec); }, [=] { return check_block_invariance(exec); },
          [=] { return check_flop_shape(exec); },     [] { return check_gaussian_identities(); }};
}

inline std::string format(const CheckResult& r) {
  std::ostringstream os;
  os << "[" << (r.passed ? "PASS" : "FAIL") << "] " << r.id << ". " << r.name << ": " << r.detail;
  return os.str();
}

}  // namespace parbayes::verify
