#pragma once

// Parallel linear-Gaussian filtering.
//
// Element k stands for the pair
//   f_k(x_k | x_{k-1}) = N(x_k; A x_{k-1} + b, C)
//   g_k(x_{k-1})       ∝ exp(-x^T J x / 2 + eta^T x)
// i.e. p(x_k | y_k, x_{k-1}) and p(y_k | x_{k-1}) up to a constant. The
// first element has A = 0, so every prefix starting at element 1 carries
// the filtering moments in (b, C). Normalizing constants are dropped; the
// marginal likelihood is recovered by a second pass (parallel_loglik).

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "parbayes/kernel.hpp"
#include "parbayes/parallel.hpp"
#include "parbayes/scan.hpp"
#include "parbayes/sequential.hpp"
#include "parbayes/ssm.hpp"

namespace parbayes {

struct FilterElement {
  Matrix A;
  Vector b;
  Matrix C;
  Vector eta;
  Matrix J;
};

inline FilterElement filter_identity(std::size_t nx) {
  return {Matrix::identity(nx), Vector::zeros(nx), Matrix::zeros(nx, nx), Vector::zeros(nx),
          Matrix::zeros(nx, nx)};
}

namespace detail {

// eta = F^T H^T S^{-1} r and J = F^T H^T S^{-1} H F, with S^{-1}[H | r]
// already solved.
inline void information_terms(const Matrix& F, const Matrix& H, const Matrix& s_inv_h,
                              const Vector& s_inv_r, FilterElement& e, FlopLedger& ledger) {
  const Matrix ft = F.transposed();
  const Matrix ht = H.transposed();
  e.eta = matmul(ft, matmul(ht, s_inv_r, ledger), ledger);
  e.J = sym(matmul(matmul(ft, matmul(ht, s_inv_h, ledger), ledger), F, ledger));
}

}  // namespace detail

// Builds element k (1-based) from measurement y.
inline FilterElement filter_element(const LGSSM& model, const Vector& y, std::size_t k, FlopLedger& ledger) {
  const StepParams& p = model.step(k);
  if (y.dim() != model.meas_dim())
    throw DimensionError("filter_element: measurement dimension does not match model");
  const std::size_t nx = model.state_dim();
  const Matrix ht = p.H.transposed();
  // r = y - H u - d
  const Vector r = sub(y, add(matmul(p.H, p.u, ledger), p.d, ledger), ledger);

  FilterElement e;
  if (k == 1) {
    const GaussianMoment pred = predict(p, {model.m0, model.P0}, ledger);
    const Matrix hp = matmul(p.H, pred.cov, ledger);
    const Matrix s = sym(add(matmul(hp, ht, ledger), p.R, ledger));
    const Vector innov = sub(y, add(matmul(p.H, pred.mean, ledger), p.d, ledger), ledger);
    // Columns: [H P^- | H | r].
    const Matrix rhs = hcat(hcat(hp, p.H), Matrix::column(r));
    const Matrix sol = solve(s, rhs, ledger);
    const Matrix gain = columns(sol, 0, nx).transposed();
    e.A = Matrix::zeros(nx, nx);
    e.b = add(pred.mean, matmul(gain, innov, ledger), ledger);
    e.C = sym(sub(pred.cov, matmul(gain, hp, ledger), ledger));
    detail::information_terms(p.F, p.H, columns(sol, nx, nx), sol.col(2 * nx), e, ledger);
    return e;
  }

  const Matrix hq = matmul(p.H, p.Q, ledger);
  const Matrix s = sym(add(matmul(hq, ht, ledger), p.R, ledger));
  // Columns: [H | r].
  const Matrix sol = solve(s, hcat(p.H, Matrix::column(r)), ledger);
  const Matrix s_inv_h = columns(sol, 0, nx);
  const Vector s_inv_r = sol.col(nx);
  // K = Q H^T S^{-1}; K^T = (S^{-1} H) Q by symmetry of S and Q.
  const Matrix gain = matmul(s_inv_h, p.Q, ledger).transposed();
  const Matrix i_kh = identity_minus(matmul(gain, p.H, ledger), ledger);
  e.A = matmul(i_kh, p.F, ledger);
  e.b = add(p.u, matmul(gain, r, ledger), ledger);
  e.C = sym(matmul(i_kh, p.Q, ledger));
  detail::information_terms(p.F, p.H, s_inv_h, s_inv_r, e, ledger);
  return e;
}

// (A_i, b_i, C_i, eta_i, J_i) ⊗ (A_j, b_j, C_j, eta_j, J_j); inverses
// (I + C_i J_j)^{-1} and (I + J_j C_i)^{-1} are applied through solves.
inline FilterElement combine_filter(const FilterElement& ei, const FilterElement& ej, FlopLedger& ledger) {
  const std::size_t nx = ei.A.rows();
  if (ej.A.rows() != nx || ei.C.rows() != nx || ej.J.rows() != nx)
    throw DimensionError("combine_filter: element dimensions differ");

  FilterElement out;
  {
    const Matrix m = add_identity(matmul(ei.C, ej.J, ledger), ledger);
    const Vector bc = add(ei.b, matmul(ei.C, ej.eta, ledger), ledger);
    const Matrix y = solve(m, hcat(hcat(ei.A, Matrix::column(bc)), ei.C), ledger);
    const Matrix ay = matmul(ej.A, y, ledger);
    out.A = columns(ay, 0, nx);
    out.b = add(ay.col(nx), ej.b, ledger);
    out.C = sym(add(matmul(columns(ay, nx + 1, nx), ej.A.transposed(), ledger), ej.C, ledger));
  }
  {
    const Matrix m = add_identity(matmul(ej.J, ei.C, ledger), ledger);
    const Vector rhs_eta = sub(ej.eta, matmul(ej.J, ei.b, ledger), ledger);
    const Matrix z = solve(m, hcat(Matrix::column(rhs_eta), matmul(ej.J, ei.A, ledger)), ledger);
    const Matrix az = matmul(ei.A.transposed(), z, ledger);
    out.eta = add(az.col(0), ei.eta, ledger);
    out.J = sym(add(columns(az, 1, nx), ei.J, ledger));
  }
  return out;
}

struct FilterMonoid {
  using value_type = FilterElement;
  std::size_t nx = 1;

  FilterElement combine(const FilterElement& a, const FilterElement& b, FlopLedger& ledger) const {
    return combine_filter(a, b, ledger);
  }
  std::optional<FilterElement> identity() const { return filter_identity(nx); }
};

struct ParallelFilterResult {
  std::vector<GaussianMoment> filtered;
  std::vector<FilterElement> prefixes;
  CostReport cost;
};

inline ParallelFilterResult parallel_filter(const LGSSM& model, const std::vector<Vector>& ys,
                                            std::size_t block = 1, const Executor& exec = Executor{}) {
  validate(model);
  detail::require_measurements(model, ys, "parallel_filter");
  ParallelFilterResult res;
  const std::vector<FilterElement> elems = parallel_level(
      exec, model.n,
      [&](std::size_t i, FlopLedger& ledger) { return filter_element(model, ys[i], i + 1, ledger); },
      res.cost);
  ScanReport<FilterElement> scan =
      blocked_scan(std::span<const FilterElement>(elems), FilterMonoid{model.state_dim()}, block, exec);
  res.cost.append(scan.cost);
  res.filtered.reserve(model.n);
  for (const auto& e : scan.results) res.filtered.push_back({e.b, e.C});
  res.prefixes = std::move(scan.results);
  return res;
}

inline GaussianMoment initial_moment(const LGSSM& model) { return {model.m0, model.P0}; }

// p(x_k | y_{1:k-1}) from the filtering moment at k-1 (or the initial
// moment when k = 1).
inline GaussianMoment predictive_moments(const LGSSM& model, const GaussianMoment& previous, std::size_t k,
                                         FlopLedger& ledger) {
  return predict(model.step(k), previous, ledger);
}

struct LogLikResult {
  std::vector<double> log_densities;  // log p(y_k | y_{1:k-1})
  std::vector<double> log_prefix;     // log p(y_{1:k})
  CostReport cost;
};

// One independent level evaluating every log N(y_k; H m_k^- + d, H P_k^- H^T + R),
// then a parallel additive scan for the prefixes.
inline LogLikResult parallel_loglik(const LGSSM& model, const std::vector<GaussianMoment>& filtered,
                                    const std::vector<Vector>& ys, const Executor& exec = Executor{}) {
  detail::require_measurements(model, ys, "parallel_loglik");
  if (filtered.size() != model.n)
    throw std::invalid_argument("parallel_loglik: need one filtered moment per step");
  LogLikResult res;
  const GaussianMoment start = initial_moment(model);
  res.log_densities = parallel_level(
      exec, model.n,
      [&](std::size_t i, FlopLedger& ledger) {
        const std::size_t k = i + 1;
        const StepParams& p = model.step(k);
        const GaussianMoment pred = predictive_moments(model, k == 1 ? start : filtered[i - 1], k, ledger);
        const Matrix s =
            sym(add(matmul(matmul(p.H, pred.cov, ledger), p.H.transposed(), ledger), p.R, ledger));
        const Vector v = sub(ys[i], add(matmul(p.H, pred.mean, ledger), p.d, ledger), ledger);
        return gaussian_log_density(v, s, ledger);
      },
      res.cost);
  ScanReport<double> prefix = par_scan(std::span<const double>(res.log_densities), AddMonoid{}, exec);
  res.cost.append(prefix.cost);
  res.log_prefix = std::move(prefix.results);
  return res;
}

}  // namespace parbayes
