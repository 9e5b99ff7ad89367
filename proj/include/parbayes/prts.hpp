#pragma once

// Parallel RTS smoothing. Element k is p(x_k | y_{1:k}, x_{k+1}) =
// N(x_k; E x_{k+1} + g, L); the last element has E = 0 so every suffix
// product ending at n holds the smoothed moments in (g, L).

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "parbayes/kernel.hpp"
#include "parbayes/parallel.hpp"
#include "parbayes/scan.hpp"
#include "parbayes/sequential.hpp"
#include "parbayes/ssm.hpp"

namespace parbayes {

struct SmoothElement {
  Matrix E;
  Vector g;
  Matrix L;
};

inline SmoothElement smooth_identity(std::size_t nx) {
  return {Matrix::identity(nx), Vector::zeros(nx), Matrix::zeros(nx, nx)};
}

// Element k (1-based) of n from the filtering moment at k.
inline SmoothElement smooth_element(const LGSSM& model, const GaussianMoment& filtered, std::size_t k,
                                    std::size_t n, FlopLedger& ledger) {
  if (k < 1 || k > n) throw std::out_of_range("smooth_element: k outside [1, n]");
  const std::size_t nx = model.state_dim();
  if (filtered.mean.dim() != nx || filtered.cov.rows() != nx)
    throw DimensionError("smooth_element: filtered moment does not match state dimension");
  if (k == n) return {Matrix::zeros(nx, nx), filtered.mean, filtered.cov};

  const StepParams& p = model.step(k + 1);
  const Matrix fp = matmul(p.F, filtered.cov, ledger);
  const Matrix pred_cov = sym(add(matmul(fp, p.F.transposed(), ledger), p.Q, ledger));
  // E^T = (F P F^T + Q)^{-1} F P
  const Matrix e = solve(pred_cov, fp, ledger).transposed();
  const Vector pred_mean = add(matmul(p.F, filtered.mean, ledger), p.u, ledger);
  SmoothElement out;
  out.g = sub(filtered.mean, matmul(e, pred_mean, ledger), ledger);
  out.L = sym(sub(filtered.cov, matmul(e, fp, ledger), ledger));
  out.E = e;
  return out;
}

inline SmoothElement combine_smooth(const SmoothElement& ei, const SmoothElement& ej, FlopLedger& ledger) {
  if (ei.E.rows() != ej.E.rows()) throw DimensionError("combine_smooth: element dimensions differ");
  SmoothElement out;
  out.E = matmul(ei.E, ej.E, ledger);
  out.g = add(matmul(ei.E, ej.g, ledger), ei.g, ledger);
  out.L = sym(add(matmul(matmul(ei.E, ej.L, ledger), ei.E.transposed(), ledger), ei.L, ledger));
  return out;
}

struct SmoothMonoid {
  using value_type = SmoothElement;
  std::size_t nx = 1;

  SmoothElement combine(const SmoothElement& a, const SmoothElement& b, FlopLedger& ledger) const {
    return combine_smooth(a, b, ledger);
  }
  std::optional<SmoothElement> identity() const { return smooth_identity(nx); }
};

struct ParallelSmootherResult {
  std::vector<GaussianMoment> smoothed;
  std::vector<SmoothElement> suffixes;
  CostReport cost;
};

// Accepts filtering moments from either the sequential or the parallel filter.
inline ParallelSmootherResult parallel_smoother(const LGSSM& model, const std::vector<GaussianMoment>& filtered,
                                                std::size_t block = 1, const Executor& exec = Executor{}) {
  validate(model);
  const std::size_t n = filtered.size();
  if (n != model.n) throw std::invalid_argument("parallel_smoother: need one filtered moment per step");
  ParallelSmootherResult res;
  const std::vector<SmoothElement> elems = parallel_level(
      exec, n,
      [&](std::size_t i, FlopLedger& ledger) { return smooth_element(model, filtered[i], i + 1, n, ledger); },
      res.cost);
  ScanReport<SmoothElement> scan =
      reverse_scan(std::span<const SmoothElement>(elems), SmoothMonoid{model.state_dim()}, block, exec);
  res.cost.append(scan.cost);
  res.smoothed.reserve(n);
  for (const auto& e : scan.results) res.smoothed.push_back({e.g, e.L});
  res.suffixes = std::move(scan.results);
  return res;
}

}  // namespace parbayes
