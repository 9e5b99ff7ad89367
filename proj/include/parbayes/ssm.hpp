#pragma once

// Linear-Gaussian state-space models, finite-state HMMs and seeded
// simulation.
//
// Time indexing follows x_k = F_{k-1} x_{k-1} + u_{k-1} + q_{k-1},
// y_k = H_k x_k + d_k + r_k for k = 1..n with x_0 ~ N(m0, P0). The
// parameters used at step k, (F_{k-1}, u_{k-1}, Q_{k-1}, H_k, d_k, R_k),
// are bundled as one StepParams. A stationary model stores a single
// StepParams broadcast over all steps.
//
// Random numbers come from std::mt19937_64 seeded with the caller's seed
// and std::normal_distribution / std::uniform_real_distribution, so output
// is bit-identical for a given seed and standard library.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "parbayes/kernel.hpp"

namespace parbayes {

struct StepParams {
  Matrix F;  // transition into this step
  Vector u;
  Matrix Q;
  Matrix H;  // measurement at this step
  Vector d;
  Matrix R;
};

struct LGSSM {
  Vector m0;
  Matrix P0;
  std::vector<StepParams> steps;  // size 1 (stationary) or n
  std::size_t n = 0;

  std::size_t state_dim() const { return m0.dim(); }
  std::size_t meas_dim() const { return steps.empty() ? 0 : steps.front().H.rows(); }
  bool stationary() const { return steps.size() == 1; }

  // Parameters used to reach x_k and observe y_k, k in [1, n].
  const StepParams& step(std::size_t k) const {
    if (k < 1 || k > n) throw std::out_of_range("LGSSM::step: k=" + std::to_string(k) + " outside [1, n]");
    return stationary() ? steps.front() : steps[k - 1];
  }
};

struct SimResult {
  std::vector<Vector> states;        // x_1..x_n
  std::vector<Vector> measurements;  // y_1..y_n
  std::uint64_t seed = 0;
};

namespace detail {

inline bool symmetric(const Matrix& m, double tol) {
  if (!m.square()) return false;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol * std::max(1.0, std::abs(m(i, j)))) return false;
  return true;
}

inline void check(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid model: " + what);
}

}  // namespace detail

// Dimensions, finiteness and symmetry. PSD-ness is checked where it matters
// (sampling, solves) rather than here.
inline void validate(const LGSSM& model) {
  const std::size_t nx = model.state_dim();
  detail::check(nx >= 1, "state dimension must be at least 1");
  detail::check(model.n >= 1, "step count must be at least 1");
  detail::check(model.steps.size() == 1 || model.steps.size() == model.n,
                "steps must hold 1 (stationary) or n parameter sets");
  detail::check(model.P0.rows() == nx && model.P0.cols() == nx, "P0 must be nx x nx");
  detail::check(model.m0.all_finite() && model.P0.all_finite(), "initial moments must be finite");
  detail::check(detail::symmetric(model.P0, 1e-9), "P0 must be symmetric");
  const std::size_t ny = model.meas_dim();
  detail::check(ny >= 1, "measurement dimension must be at least 1");
  for (const auto& s : model.steps) {
    detail::check(s.F.rows() == nx && s.F.cols() == nx, "F must be nx x nx");
    detail::check(s.u.dim() == nx, "u must have dimension nx");
    detail::check(s.Q.rows() == nx && s.Q.cols() == nx, "Q must be nx x nx");
    detail::check(s.H.rows() == ny && s.H.cols() == nx, "H must be ny x nx with consistent ny");
    detail::check(s.d.dim() == ny, "d must have dimension ny");
    detail::check(s.R.rows() == ny && s.R.cols() == ny, "R must be ny x ny");
    detail::check(s.F.all_finite() && s.u.all_finite() && s.Q.all_finite() && s.H.all_finite() &&
                      s.d.all_finite() && s.R.all_finite(),
                  "parameters must be finite");
    detail::check(detail::symmetric(s.Q, 1e-9), "Q must be symmetric");
    detail::check(detail::symmetric(s.R, 1e-9), "R must be symmetric");
  }
}

// Constant-velocity 2D tracking model with state (u, v, du, dv) and position
// measurements.
inline LGSSM make_tracking_model(double dt, double q, double sigma, Vector m0, Matrix P0, std::size_t n) {
  if (!(dt > 0.0)) throw std::invalid_argument("make_tracking_model: dt must be positive");
  if (!(q >= 0.0)) throw std::invalid_argument("make_tracking_model: q must be nonnegative");
  if (!(sigma > 0.0)) throw std::invalid_argument("make_tracking_model: sigma must be positive");
  if (m0.dim() != 4 || P0.rows() != 4 || P0.cols() != 4)
    throw std::invalid_argument("make_tracking_model: m0 must be 4-dim and P0 4x4");

  StepParams s;
  s.F = Matrix{{1, 0, dt, 0}, {0, 1, 0, dt}, {0, 0, 1, 0}, {0, 0, 0, 1}};
  const double c3 = q * dt * dt * dt / 3.0;
  const double c2 = q * dt * dt / 2.0;
  const double c1 = q * dt;
  s.Q = Matrix{{c3, 0, c2, 0}, {0, c3, 0, c2}, {c2, 0, c1, 0}, {0, c2, 0, c1}};
  s.u = Vector::zeros(4);
  s.H = Matrix{{1, 0, 0, 0}, {0, 1, 0, 0}};
  s.d = Vector::zeros(2);
  s.R = Matrix{{sigma * sigma, 0}, {0, sigma * sigma}};

  LGSSM model{std::move(m0), std::move(P0), {std::move(s)}, n};
  validate(model);
  return model;
}

// Tracking model with the reference experiment's settings: dt = 0.1, q = 1,
// sigma = 0.5, m0 = (0, 0, 1, -1), P0 = I.
inline LGSSM make_default_tracking_model(std::size_t n) {
  return make_tracking_model(0.1, 1.0, 0.5, Vector{0, 0, 1, -1}, Matrix::identity(4), n);
}

class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

  // One draw from N(mean, L L^T) given the lower factor L.
  Vector draw(const Vector& mean, const Matrix& factor) {
    Vector z(mean.dim());
    for (std::size_t i = 0; i < z.dim(); ++i) z[i] = normal_(rng_);
    Vector out = mean;
    for (std::size_t i = 0; i < out.dim(); ++i)
      for (std::size_t j = 0; j <= i; ++j) out[i] += factor(i, j) * z[j];
    return out;
  }

  double normal() { return normal_(rng_); }
  double uniform() { return uniform_(rng_); }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline SimResult simulate(const LGSSM& model, std::uint64_t seed) {
  validate(model);
  GaussianSampler sampler(seed);
  FlopLedger scratch;
  SimResult sim;
  sim.seed = seed;
  sim.states.reserve(model.n);
  sim.measurements.reserve(model.n);

  std::vector<Matrix> q_factor, r_factor;
  for (const auto& s : model.steps) {
    q_factor.push_back(psd_cholesky(s.Q));
    r_factor.push_back(psd_cholesky(s.R));
  }
  Vector x = sampler.draw(model.m0, psd_cholesky(model.P0));
  for (std::size_t k = 1; k <= model.n; ++k) {
    const std::size_t idx = model.stationary() ? 0 : k - 1;
    const StepParams& s = model.steps[idx];
    x = sampler.draw(add(matmul(s.F, x, scratch), s.u, scratch), q_factor[idx]);
    Vector y = sampler.draw(add(matmul(s.H, x, scratch), s.d, scratch), r_factor[idx]);
    sim.states.push_back(x);
    sim.measurements.push_back(std::move(y));
  }
  return sim;
}

namespace detail {

inline Matrix random_matrix(GaussianSampler& s, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.entries()) v = s.normal();
  return m;
}

inline Matrix gram_plus(GaussianSampler& s, std::size_t n, double ridge) {
  FlopLedger scratch;
  const Matrix g = random_matrix(s, n, n);
  Matrix out = sym(matmul(g, g.transposed(), scratch));
  for (std::size_t i = 0; i < n; ++i) out(i, i) += ridge;
  return out;
}

// min(||A||_1, ||A||_inf), an upper bound on the spectral radius.
inline double induced_norm_bound(const Matrix& a) {
  double one = 0.0, inf = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += std::abs(a(i, j));
    one = std::max(one, s);
  }
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += std::abs(a(i, j));
    inf = std::max(inf, s);
  }
  return std::min(one, inf);
}

}  // namespace detail

// Stationary random model: F with spectral radius <= 0.99, Q and P0 of the
// form G G^T + 1e-3 I, R = G G^T + I, random u, d, H and m0.
inline LGSSM make_random_lgssm(std::size_t nx, std::size_t ny, std::size_t n, std::uint64_t seed) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("make_random_lgssm: dimensions must be at least 1");
  if (n < 1) throw std::invalid_argument("make_random_lgssm: n must be at least 1");
  GaussianSampler s(seed);
  StepParams p;
  p.F = detail::random_matrix(s, nx, nx);
  const double bound = detail::induced_norm_bound(p.F);
  const double target = 0.5 + 0.49 * s.uniform();
  if (bound > 0.0)
    for (double& v : p.F.entries()) v *= target / bound;
  p.u = Vector(nx);
  for (std::size_t i = 0; i < nx; ++i) p.u[i] = 0.1 * s.normal();
  p.Q = detail::gram_plus(s, nx, 1e-3);
  for (double& v : p.Q.entries()) v *= 0.1;
  p.H = detail::random_matrix(s, ny, nx);
  p.d = Vector(ny);
  for (std::size_t i = 0; i < ny; ++i) p.d[i] = 0.1 * s.normal();
  p.R = detail::gram_plus(s, ny, 1.0);

  Vector m0(nx);
  for (std::size_t i = 0; i < nx; ++i) m0[i] = s.normal();
  Matrix P0 = detail::gram_plus(s, nx, 1e-3);

  LGSSM model{std::move(m0), std::move(P0), {std::move(p)}, n};
  validate(model);
  return model;
}

// Finite-state HMM. transition(i, j) = p(x_k = j | x_{k-1} = i);
// likelihoods[k-1][s] = p(y_k | x_k = s); x_0 ~ initial.
struct HmmModel {
  Matrix transition;
  Vector initial;
  std::vector<Vector> likelihoods;

  std::size_t states() const { return initial.dim(); }
  std::size_t steps() const { return likelihoods.size(); }
};

inline void validate(const HmmModel& model) {
  const std::size_t ns = model.states();
  detail::check(ns >= 1, "HMM needs at least one state");
  detail::check(model.transition.rows() == ns && model.transition.cols() == ns,
                "transition matrix must be n_s x n_s");
  for (std::size_t i = 0; i < ns; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < ns; ++j) {
      detail::check(model.transition(i, j) >= 0.0, "transition probabilities must be nonnegative");
      row += model.transition(i, j);
    }
    detail::check(std::abs(row - 1.0) <= 1e-12, "transition rows must sum to 1");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < ns; ++i) {
    detail::check(model.initial[i] >= 0.0, "initial distribution must be nonnegative");
    total += model.initial[i];
  }
  detail::check(std::abs(total - 1.0) <= 1e-12, "initial distribution must sum to 1");
  for (const auto& l : model.likelihoods) {
    detail::check(l.dim() == ns, "likelihood vectors must have n_s entries");
    for (std::size_t i = 0; i < ns; ++i)
      detail::check(l[i] >= 0.0 && std::isfinite(l[i]), "likelihoods must be finite and nonnegative");
  }
}

struct HmmData {
  HmmModel model;
  std::vector<std::size_t> states;        // x_1..x_n
  std::vector<std::size_t> observations;  // symbol index of y_k
  Matrix emission;                        // emission(s, o) = p(y = o | x = s)
};

namespace detail {

inline Vector random_simplex(GaussianSampler& s, std::size_t dim, double floor) {
  // Exponential draws normalized onto the simplex, lifted so every entry
  // stays at or above floor.
  floor *= 1.0 + 1e-9;
  Vector v(dim);
  double total = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    v[i] = -std::log(1.0 - s.uniform());
    total += v[i];
  }
  const double scale = 1.0 - floor * static_cast<double>(dim);
  double sum = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    v[i] = floor + scale * v[i] / total;
    sum += v[i];
  }
  // Tidy rounding so the entries sum to 1 to machine precision.
  for (std::size_t i = 0; i < dim; ++i) v[i] /= sum;
  return v;
}

inline std::size_t sample_index(GaussianSampler& s, const Vector& p) {
  const double u = s.uniform();
  double c = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    c += p[i];
    if (u < c) return i;
  }
  return p.dim() - 1;
}

}  // namespace detail

// Random HMM with n_s states and n_s + 1 observation symbols; transition
// entries >= 1e-3, emission entries >= 1e-2.
inline HmmData make_random_hmm(std::size_t ns, std::size_t n, std::uint64_t seed) {
  if (ns < 2) throw std::invalid_argument("make_random_hmm: need at least 2 states");
  if (n < 1) throw std::invalid_argument("make_random_hmm: n must be at least 1");
  GaussianSampler s(seed);
  HmmData data;
  const std::size_t symbols = ns + 1;
  data.model.transition = Matrix(ns, ns);
  for (std::size_t i = 0; i < ns; ++i) {
    const Vector row = detail::random_simplex(s, ns, 1e-3);
    for (std::size_t j = 0; j < ns; ++j) data.model.transition(i, j) = row[j];
  }
  data.emission = Matrix(ns, symbols);
  for (std::size_t i = 0; i < ns; ++i) {
    const Vector row = detail::random_simplex(s, symbols, 1e-2);
    for (std::size_t j = 0; j < symbols; ++j) data.emission(i, j) = row[j];
  }
  data.model.initial = detail::random_simplex(s, ns, 1e-3);

  std::size_t x = detail::sample_index(s, data.model.initial);
  for (std::size_t k = 0; k < n; ++k) {
    Vector row(ns);
    for (std::size_t j = 0; j < ns; ++j) row[j] = data.model.transition(x, j);
    x = detail::sample_index(s, row);
    Vector emit(symbols);
    for (std::size_t j = 0; j < symbols; ++j) emit[j] = data.emission(x, j);
    const std::size_t o = detail::sample_index(s, emit);
    data.states.push_back(x);
    data.observations.push_back(o);
    data.model.likelihoods.push_back(data.emission.col(o));
  }
  validate(data.model);
  return data;
}

}  // namespace parbayes
