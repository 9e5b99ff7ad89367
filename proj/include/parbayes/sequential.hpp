#pragma once

// Sequential reference algorithms: Kalman filter, RTS smoother, HMM
// forward filtering / backward smoothing and an exhaustive-enumeration
// posterior for tiny HMMs.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "parbayes/kernel.hpp"
#include "parbayes/ssm.hpp"

namespace parbayes {

struct GaussianMoment {
  Vector mean;
  Matrix cov;
};

struct FilterRun {
  std::vector<GaussianMoment> filtered;   // k = 1..n
  std::vector<GaussianMoment> predicted;  // p(x_k | y_{1:k-1}), k = 1..n
  std::vector<double> log_densities;      // log p(y_k | y_{1:k-1})
  std::vector<double> log_prefix;         // log p(y_{1:k})
  double log_likelihood = 0.0;
};

namespace detail {

inline void require_measurements(const LGSSM& model, const std::vector<Vector>& ys, const char* who) {
  if (ys.size() != model.n)
    throw std::invalid_argument(std::string(who) + ": expected " + std::to_string(model.n) +
                                " measurements, got " + std::to_string(ys.size()));
  for (const auto& y : ys)
    if (y.dim() != model.meas_dim())
      throw DimensionError(std::string(who) + ": measurement dimension " + std::to_string(y.dim()) +
                           " does not match model (" + std::to_string(model.meas_dim()) + ")");
}

}  // namespace detail

// log N(v; 0, S) for innovation v.
inline double gaussian_log_density(const Vector& v, const Matrix& s, FlopLedger& ledger) {
  const LuFactorization lu(s, ledger);
  if (lu.det_sign() <= 0)
    throw SingularMatrixError("gaussian_log_density: covariance is not positive definite");
  const double quad = dot(v, lu.solve(v, ledger), ledger);
  const double logdet = lu.log_abs_det(ledger);
  ledger.charge(flop_tag::scalar, 4);
  return -0.5 * (static_cast<double>(v.dim()) * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

// (F m + u, F P F^T + Q), symmetrized.
inline GaussianMoment predict(const StepParams& p, const GaussianMoment& prior, FlopLedger& ledger) {
  return {add(matmul(p.F, prior.mean, ledger), p.u, ledger),
          sym(add(matmul(matmul(p.F, prior.cov, ledger), p.F.transposed(), ledger), p.Q, ledger))};
}

inline FilterRun kalman_filter(const LGSSM& model, const std::vector<Vector>& ys, FlopLedger& ledger) {
  validate(model);
  detail::require_measurements(model, ys, "kalman_filter");
  FilterRun run;
  run.filtered.reserve(model.n);
  run.predicted.reserve(model.n);
  GaussianMoment current{model.m0, model.P0};
  for (std::size_t k = 1; k <= model.n; ++k) {
    const StepParams& p = model.step(k);
    GaussianMoment pred = predict(p, current, ledger);

    const Matrix hp = matmul(p.H, pred.cov, ledger);
    const Matrix s = sym(add(matmul(hp, p.H.transposed(), ledger), p.R, ledger));
    const Vector v = sub(ys[k - 1], add(matmul(p.H, pred.mean, ledger), p.d, ledger), ledger);
    // K^T = S^{-1} H P^-, using symmetry of S and P^-.
    const Matrix kt = solve(s, hp, ledger);
    const Matrix gain = kt.transposed();
    current.mean = add(pred.mean, matmul(gain, v, ledger), ledger);
    current.cov = sym(sub(pred.cov, matmul(gain, hp, ledger), ledger));

    const double ld = gaussian_log_density(v, s, ledger);
    run.log_densities.push_back(ld);
    run.log_likelihood += ld;
    run.log_prefix.push_back(run.log_likelihood);
    run.predicted.push_back(std::move(pred));
    run.filtered.push_back(current);
  }
  return run;
}

// Backward RTS recursion using the predicted moments stored in the run.
inline std::vector<GaussianMoment> rts_smoother(const LGSSM& model, const FilterRun& run, FlopLedger& ledger) {
  const std::size_t n = run.filtered.size();
  if (n != model.n || run.predicted.size() != n)
    throw std::invalid_argument("rts_smoother: filter run does not match model step count");
  std::vector<GaussianMoment> out(n);
  out[n - 1] = run.filtered[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) {
    // Filtered index k is time step k+1; the next prediction uses F_{k+1}.
    const StepParams& p = model.step(k + 2);
    const GaussianMoment& filt = run.filtered[k];
    const GaussianMoment& pred = run.predicted[k + 1];
    // G^T = (P^-)^{-1} F P.
    const Matrix fp = matmul(p.F, filt.cov, ledger);
    const Matrix gain = solve(pred.cov, fp, ledger).transposed();
    const Vector dm = sub(out[k + 1].mean, pred.mean, ledger);
    const Matrix dp = sub(out[k + 1].cov, pred.cov, ledger);
    out[k].mean = add(filt.mean, matmul(gain, dm, ledger), ledger);
    out[k].cov = sym(add(filt.cov, matmul(matmul(gain, dp, ledger), gain.transposed(), ledger), ledger));
  }
  return out;
}

struct HmmForwardResult {
  std::vector<Vector> filtered;          // p(x_k | y_{1:k})
  std::vector<Vector> predicted;         // p(x_k | y_{1:k-1})
  std::vector<double> log_normalizers;   // log p(y_k | y_{1:k-1})
  std::vector<double> log_prefix;        // log p(y_{1:k})
  double log_likelihood = 0.0;
};

namespace detail {

// p^T Pi for a distribution p.
inline Vector propagate(const Matrix& transition, const Vector& p) {
  Vector out(transition.cols());
  for (std::size_t i = 0; i < transition.rows(); ++i)
    for (std::size_t j = 0; j < transition.cols(); ++j) out[j] += p[i] * transition(i, j);
  return out;
}

}  // namespace detail

inline HmmForwardResult hmm_forward(const HmmModel& model) {
  validate(model);
  const std::size_t ns = model.states();
  HmmForwardResult res;
  Vector alpha = model.initial;
  for (std::size_t k = 0; k < model.steps(); ++k) {
    Vector pred = detail::propagate(model.transition, alpha);
    const Vector& lik = model.likelihoods[k];
    double z = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      alpha[s] = pred[s] * lik[s];
      z += alpha[s];
    }
    if (!(z > 0.0))
      throw std::domain_error("hmm_forward: measurement " + std::to_string(k + 1) +
                              " has zero probability under the model");
    for (std::size_t s = 0; s < ns; ++s) alpha[s] /= z;
    res.log_normalizers.push_back(std::log(z));
    res.log_likelihood += std::log(z);
    res.log_prefix.push_back(res.log_likelihood);
    res.predicted.push_back(std::move(pred));
    res.filtered.push_back(alpha);
  }
  return res;
}

inline std::vector<Vector> hmm_backward_smooth(const HmmModel& model, const HmmForwardResult& fwd) {
  const std::size_t n = fwd.filtered.size();
  if (n == 0 || n != model.steps()) throw std::invalid_argument("hmm_backward_smooth: forward result does not match model");
  const std::size_t ns = model.states();
  std::vector<Vector> out(n);
  out[n - 1] = fwd.filtered[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) {
    const Vector& pred = fwd.predicted[k + 1];
    Vector ratio(ns);
    for (std::size_t z = 0; z < ns; ++z) ratio[z] = pred[z] > 0.0 ? out[k + 1][z] / pred[z] : 0.0;
    Vector s(ns);
    double total = 0.0;
    for (std::size_t x = 0; x < ns; ++x) {
      double acc = 0.0;
      for (std::size_t z = 0; z < ns; ++z) acc += model.transition(x, z) * ratio[z];
      s[x] = fwd.filtered[k][x] * acc;
      total += s[x];
    }
    for (std::size_t x = 0; x < ns; ++x) s[x] /= total;
    out[k] = std::move(s);
  }
  return out;
}

struct BruteForcePosterior {
  std::vector<Vector> filtered;  // p(x_k | y_{1:k})
  std::vector<Vector> smoothed;  // p(x_k | y_{1:n})
  std::vector<double> log_prefix;
  double log_likelihood = 0.0;
};

// Sums the exact joint over every state path x_{1:n} (x_0 marginalized in
// closed form). Needs n_s^n <= 1e7.
inline BruteForcePosterior brute_force_posterior(const HmmModel& model) {
  validate(model);
  const std::size_t ns = model.states();
  const std::size_t n = model.steps();
  if (n == 0) throw std::invalid_argument("brute_force_posterior: no measurements");
  double paths = 1.0;
  for (std::size_t k = 0; k < n; ++k) paths *= static_cast<double>(ns);
  if (paths > 1e7) throw std::invalid_argument("brute_force_posterior: n_s^n exceeds 1e7 paths");

  const Vector first = detail::propagate(model.transition, model.initial);
  std::vector<Vector> smoothed_mass(n, Vector(ns));
  // filtered_mass[k][s]: sum over paths of p(x_{1:k+1}, y_{1:k+1}) with x_{k+1} = s.
  std::vector<Vector> filtered_mass(n, Vector(ns));
  std::vector<double> evidence(n, 0.0);

  const std::size_t total = static_cast<std::size_t>(paths);
  std::vector<std::size_t> path(n, 0);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t k = 0; k < n; ++k) {
      path[k] = c % ns;
      c /= ns;
    }
    double joint = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double trans = k == 0 ? first[path[0]] : model.transition(path[k - 1], path[k]);
      joint *= trans * model.likelihoods[k][path[k]];
      // Count each prefix once, through its all-zero completion.
      if (k + 1 < n) {
        bool canonical = true;
        for (std::size_t r = k + 1; r < n; ++r)
          if (path[r] != 0) canonical = false;
        if (canonical) {
          filtered_mass[k][path[k]] += joint;
          evidence[k] += joint;
        }
      }
    }
    filtered_mass[n - 1][path[n - 1]] += joint;
    evidence[n - 1] += joint;
    for (std::size_t k = 0; k < n; ++k) smoothed_mass[k][path[k]] += joint;
  }

  BruteForcePosterior out;
  for (std::size_t k = 0; k < n; ++k) {
    Vector f = filtered_mass[k];
    for (std::size_t s = 0; s < ns; ++s) f[s] /= evidence[k];
    out.filtered.push_back(std::move(f));
    out.log_prefix.push_back(std::log(evidence[k]));
    Vector m = smoothed_mass[k];
    for (std::size_t s = 0; s < ns; ++s) m[s] /= evidence[n - 1];
    out.smoothed.push_back(std::move(m));
  }
  out.log_likelihood = std::log(evidence[n - 1]);
  return out;
}

}  // namespace parbayes
