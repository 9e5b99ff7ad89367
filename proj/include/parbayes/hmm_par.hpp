#pragma once

// Finite-state instantiation of the general filtering and smoothing
// operators. Integrals become sums over states.
//
// Filtering element: f(z, x) = p(x_k = x | y_k, x_{k-1} = z), rows summing
// to 1, and g(z) = p(y_k | x_{k-1} = z), stored as log g.
//
// Smoothing element: m(z, x) = p(x_k = x | y_{1:k}, x_{k+1} = z).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "parbayes/kernel.hpp"
#include "parbayes/parallel.hpp"
#include "parbayes/scan.hpp"
#include "parbayes/sequential.hpp"
#include "parbayes/ssm.hpp"

namespace parbayes {

struct HmmFilterElement {
  Matrix f;
  Vector log_g;
};

struct HmmSmoothElement {
  Matrix m;
};

inline HmmFilterElement hmm_filter_identity(std::size_t ns) {
  return {Matrix::identity(ns), Vector::zeros(ns)};
}

inline HmmSmoothElement hmm_smooth_identity(std::size_t ns) { return {Matrix::identity(ns)}; }

// Element k (1-based). For k = 1 the predicted prior initial^T Pi replaces
// every row of Pi, so the rows are identical and g is constant.
inline HmmFilterElement hmm_filter_element(const HmmModel& model, std::size_t k, FlopLedger& ledger) {
  if (k < 1 || k > model.steps()) throw std::out_of_range("hmm_filter_element: k outside [1, n]");
  const std::size_t ns = model.states();
  const Vector& lik = model.likelihoods[k - 1];
  const Vector first = k == 1 ? detail::propagate(model.transition, model.initial) : Vector{};
  if (k == 1) ledger.charge(flop_tag::gemm, 2 * ns * ns);

  HmmFilterElement e{Matrix(ns, ns), Vector(ns)};
  for (std::size_t z = 0; z < ns; ++z) {
    double total = 0.0;
    for (std::size_t x = 0; x < ns; ++x) {
      const double prior = k == 1 ? first[x] : model.transition(z, x);
      e.f(z, x) = lik[x] * prior;
      total += e.f(z, x);
    }
    if (!(total > 0.0))
      throw std::domain_error("hmm_filter_element: zero normalizer in row " + std::to_string(z) + " at step " +
                              std::to_string(k));
    for (std::size_t x = 0; x < ns; ++x) e.f(z, x) /= total;
    e.log_g[z] = std::log(total);
  }
  ledger.charge(flop_tag::scalar, 3 * ns * ns + 2 * ns);
  return e;
}

// f_ij(z, x) = sum_y f_i(z, y) g_j(y) f_j(y, x) / sum_y f_i(z, y) g_j(y)
// g_ij(z)    = g_i(z) sum_y f_i(z, y) g_j(y)
// g_j is rescaled by its maximum before exponentiation.
inline HmmFilterElement combine_hmm_filter(const HmmFilterElement& ei, const HmmFilterElement& ej,
                                           FlopLedger& ledger) {
  const std::size_t ns = ei.f.rows();
  if (ej.f.rows() != ns || ei.log_g.dim() != ns || ej.log_g.dim() != ns)
    throw DimensionError("combine_hmm_filter: element dimensions differ");
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < ns; ++y) shift = std::max(shift, ej.log_g[y]);
  if (!std::isfinite(shift)) throw std::domain_error("combine_hmm_filter: right element has zero likelihood");
  Vector w(ns);
  for (std::size_t y = 0; y < ns; ++y) w[y] = std::exp(ej.log_g[y] - shift);

  HmmFilterElement out{Matrix(ns, ns), Vector(ns)};
  for (std::size_t z = 0; z < ns; ++z) {
    double denom = 0.0;
    for (std::size_t y = 0; y < ns; ++y) {
      const double a = ei.f(z, y) * w[y];
      if (a == 0.0) continue;
      denom += a;
      for (std::size_t x = 0; x < ns; ++x) out.f(z, x) += a * ej.f(y, x);
    }
    if (!(denom > 0.0))
      throw std::domain_error("combine_hmm_filter: zero denominator in row " + std::to_string(z));
    for (std::size_t x = 0; x < ns; ++x) out.f(z, x) /= denom;
    out.log_g[z] = ei.log_g[z] + shift + std::log(denom);
  }
  ledger.charge(flop_tag::gemm, 2 * ns * ns * ns);
  ledger.charge(flop_tag::scalar, 3 * ns * ns + 4 * ns);
  return out;
}

struct HmmFilterMonoid {
  using value_type = HmmFilterElement;
  std::size_t ns = 2;

  HmmFilterElement combine(const HmmFilterElement& a, const HmmFilterElement& b, FlopLedger& ledger) const {
    return combine_hmm_filter(a, b, ledger);
  }
  std::optional<HmmFilterElement> identity() const { return hmm_filter_identity(ns); }
};

// m(z, x) ∝ Pi(x, z) alpha_k(x); for k = n every row is alpha_n.
inline HmmSmoothElement hmm_smooth_element(const HmmModel& model, const Vector& filtered, std::size_t k,
                                           std::size_t n, FlopLedger& ledger) {
  if (k < 1 || k > n) throw std::out_of_range("hmm_smooth_element: k outside [1, n]");
  const std::size_t ns = model.states();
  if (filtered.dim() != ns) throw DimensionError("hmm_smooth_element: filtered distribution has wrong size");
  HmmSmoothElement e{Matrix(ns, ns)};
  for (std::size_t z = 0; z < ns; ++z) {
    double total = 0.0;
    for (std::size_t x = 0; x < ns; ++x) {
      e.m(z, x) = k == n ? filtered[x] : model.transition(x, z) * filtered[x];
      total += e.m(z, x);
    }
    if (!(total > 0.0))
      throw std::domain_error("hmm_smooth_element: zero row " + std::to_string(z) + " at step " + std::to_string(k));
    for (std::size_t x = 0; x < ns; ++x) e.m(z, x) /= total;
  }
  ledger.charge(flop_tag::scalar, 3 * ns * ns);
  return e;
}

// a_ij(x | z) = sum_y a_i(x | y) a_j(y | z), i.e. m_ij = m_j m_i.
inline HmmSmoothElement combine_hmm_smooth(const HmmSmoothElement& ei, const HmmSmoothElement& ej,
                                           FlopLedger& ledger) {
  return {matmul(ej.m, ei.m, ledger)};
}

struct HmmSmoothMonoid {
  using value_type = HmmSmoothElement;
  std::size_t ns = 2;

  HmmSmoothElement combine(const HmmSmoothElement& a, const HmmSmoothElement& b, FlopLedger& ledger) const {
    return combine_hmm_smooth(a, b, ledger);
  }
  std::optional<HmmSmoothElement> identity() const { return hmm_smooth_identity(ns); }
};

struct ParallelHmmFilterResult {
  std::vector<Vector> filtered;
  std::vector<double> log_prefix;  // log p(y_{1:k}) from the g component
  double log_likelihood = 0.0;
  CostReport cost;
};

inline ParallelHmmFilterResult parallel_hmm_filter(const HmmModel& model, const Executor& exec = Executor{},
                                                   std::size_t block = 1) {
  validate(model);
  const std::size_t n = model.steps();
  if (n == 0) throw std::invalid_argument("parallel_hmm_filter: no measurements");
  ParallelHmmFilterResult res;
  const std::vector<HmmFilterElement> elems = parallel_level(
      exec, n, [&](std::size_t i, FlopLedger& ledger) { return hmm_filter_element(model, i + 1, ledger); },
      res.cost);
  ScanReport<HmmFilterElement> scan =
      blocked_scan(std::span<const HmmFilterElement>(elems), HmmFilterMonoid{model.states()}, block, exec);
  res.cost.append(scan.cost);
  const std::size_t ns = model.states();
  for (const auto& e : scan.results) {
    // Rows of a prefix starting at element 1 are identical; read row 0.
    Vector alpha(ns);
    for (std::size_t x = 0; x < ns; ++x) alpha[x] = e.f(0, x);
    res.filtered.push_back(std::move(alpha));
    res.log_prefix.push_back(e.log_g[0]);
  }
  res.log_likelihood = res.log_prefix.back();
  return res;
}

struct ParallelHmmSmootherResult {
  std::vector<Vector> smoothed;
  CostReport cost;
};

inline ParallelHmmSmootherResult parallel_hmm_smoother(const HmmModel& model, const std::vector<Vector>& filtered,
                                                       const Executor& exec = Executor{}, std::size_t block = 1) {
  validate(model);
  const std::size_t n = filtered.size();
  if (n == 0 || n != model.steps()) throw std::invalid_argument("parallel_hmm_smoother: need one filtered distribution per step");
  ParallelHmmSmootherResult res;
  const std::vector<HmmSmoothElement> elems = parallel_level(
      exec, n,
      [&](std::size_t i, FlopLedger& ledger) { return hmm_smooth_element(model, filtered[i], i + 1, n, ledger); },
      res.cost);
  ScanReport<HmmSmoothElement> scan =
      reverse_scan(std::span<const HmmSmoothElement>(elems), HmmSmoothMonoid{model.states()}, block, exec);
  res.cost.append(scan.cost);
  const std::size_t ns = model.states();
  for (const auto& e : scan.results) {
    Vector p(ns);
    for (std::size_t x = 0; x < ns; ++x) p[x] = e.m(0, x);
    res.smoothed.push_back(std::move(p));
  }
  return res;
}

}  // namespace parbayes
