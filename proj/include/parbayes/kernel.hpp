#pragma once

// Dense matrix/vector kernel with a fixed flop-cost model.
//
// Every arithmetic routine takes a FlopLedger and charges it according to:
//   gemm (m x k)(k x n)      2mkn
//   matrix add/sub (m x n)   mn
//   LU factorization (n)     ceil(2n^3 / 3)
//   triangular solves        2n^2 per right-hand side
//   scalar ops               1 each
// Transposition and symmetrization are free.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace parbayes {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace flop_tag {
inline constexpr std::string_view gemm = "gemm";
inline constexpr std::string_view add = "add";
inline constexpr std::string_view lu = "lu";
inline constexpr std::string_view trsv = "trsv";
inline constexpr std::string_view scalar = "scalar";
}  // namespace flop_tag

// Additive per-tag flop accounting. One ledger per task; merge at joins.
class FlopLedger {
 public:
  struct Record {
    std::string tag;
    std::uint64_t flops = 0;
  };

  void charge(std::string_view tag, std::uint64_t flops) {
    for (auto& r : records_) {
      if (r.tag == tag) {
        r.flops += flops;
        return;
      }
    }
    records_.push_back({std::string(tag), flops});
  }

  void merge(const FlopLedger& other) {
    for (const auto& r : other.records_) charge(r.tag, r.flops);
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& r : records_) t += r.flops;
    return t;
  }

  std::uint64_t flops(std::string_view tag) const {
    for (const auto& r : records_)
      if (r.tag == tag) return r.flops;
    return 0;
  }

  const std::vector<Record>& records() const { return records_; }

 private:
  std::vector<Record> records_;
};

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  static Vector zeros(std::size_t dim) { return Vector(dim); }

  std::size_t dim() const { return data_.size(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> entries() { return data_; }
  std::span<const double> entries() const { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
      if (row.size() != cols_) throw DimensionError("Matrix: ragged initializer list");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix diagonal(const Vector& d) {
    Matrix m(d.dim(), d.dim());
    for (std::size_t i = 0; i < d.dim(); ++i) m(i, i) = d[i];
    return m;
  }
  static Matrix column(const Vector& v) {
    Matrix m(v.dim(), 1);
    for (std::size_t i = 0; i < v.dim(); ++i) m(i, 0) = v[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> entries() { return data_; }
  std::span<const double> entries() const { return data_; }

  Vector col(std::size_t c) const {
    Vector v(rows_);
    for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
    return v;
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

inline void require(bool ok, std::string_view op, const std::string& what) {
  if (!ok) throw DimensionError(std::string(op) + ": " + what);
}

}  // namespace detail

inline Matrix matmul(const Matrix& a, const Matrix& b, FlopLedger& ledger) {
  detail::require(a.cols() == b.rows(), "matmul",
                  "inner dimensions differ (" + detail::shape(a) + " * " + detail::shape(b) + ")");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix c(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      for (std::size_t j = 0; j < n; ++j) c(i, j) += aip * b(p, j);
    }
  ledger.charge(flop_tag::gemm, 2 * m * k * n);
  return c;
}

inline Vector matmul(const Matrix& a, const Vector& x, FlopLedger& ledger) {
  detail::require(a.cols() == x.dim(), "matmul",
                  "matrix " + detail::shape(a) + " times vector of dim " + std::to_string(x.dim()));
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  ledger.charge(flop_tag::gemm, 2 * a.rows() * a.cols());
  return y;
}

inline Matrix add(const Matrix& a, const Matrix& b, FlopLedger& ledger) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "add",
                  detail::shape(a) + " + " + detail::shape(b));
  Matrix c = a;
  auto out = c.entries();
  auto rhs = b.entries();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += rhs[i];
  ledger.charge(flop_tag::add, out.size());
  return c;
}

inline Matrix sub(const Matrix& a, const Matrix& b, FlopLedger& ledger) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "sub",
                  detail::shape(a) + " - " + detail::shape(b));
  Matrix c = a;
  auto out = c.entries();
  auto rhs = b.entries();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= rhs[i];
  ledger.charge(flop_tag::add, out.size());
  return c;
}

inline Vector add(const Vector& a, const Vector& b, FlopLedger& ledger) {
  detail::require(a.dim() == b.dim(), "add", "vector dims differ");
  Vector c = a;
  for (std::size_t i = 0; i < c.dim(); ++i) c[i] += b[i];
  ledger.charge(flop_tag::add, c.dim());
  return c;
}

inline Vector sub(const Vector& a, const Vector& b, FlopLedger& ledger) {
  detail::require(a.dim() == b.dim(), "sub", "vector dims differ");
  Vector c = a;
  for (std::size_t i = 0; i < c.dim(); ++i) c[i] -= b[i];
  ledger.charge(flop_tag::add, c.dim());
  return c;
}

// I + A for square A; charged as n scalar additions on the diagonal.
inline Matrix add_identity(const Matrix& a, FlopLedger& ledger) {
  detail::require(a.square(), "add_identity", "matrix " + detail::shape(a) + " is not square");
  Matrix c = a;
  for (std::size_t i = 0; i < c.rows(); ++i) c(i, i) += 1.0;
  ledger.charge(flop_tag::scalar, c.rows());
  return c;
}

// I - A for square A.
inline Matrix identity_minus(const Matrix& a, FlopLedger& ledger) {
  detail::require(a.square(), "identity_minus", "matrix " + detail::shape(a) + " is not square");
  Matrix c(a.rows(), a.cols());
  auto out = c.entries();
  auto in = a.entries();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -in[i];
  for (std::size_t i = 0; i < c.rows(); ++i) c(i, i) += 1.0;
  ledger.charge(flop_tag::add, out.size());
  return c;
}

inline double dot(const Vector& a, const Vector& b, FlopLedger& ledger) {
  detail::require(a.dim() == b.dim(), "dot", "vector dims differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  ledger.charge(flop_tag::gemm, 2 * a.dim());
  return s;
}

// (A + A^T) / 2. Free in the ledger.
inline Matrix sym(const Matrix& a) {
  detail::require(a.square(), "sym", "matrix " + detail::shape(a) + " is not square");
  Matrix s = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  return s;
}

inline std::uint64_t lu_flops(std::size_t n) {
  const std::uint64_t n3 = static_cast<std::uint64_t>(n) * n * n;
  return (2 * n3 + 2) / 3;  // ceil(2n^3/3)
}

// Partially pivoted LU factorization, PA = LU, stored packed.
class LuFactorization {
 public:
  // Pivots smaller than this fraction of the largest input magnitude are singular.
  static constexpr double kSingularTolerance = 1e-12;

  LuFactorization(const Matrix& a, FlopLedger& ledger) : lu_(a), perm_(a.rows()) {
    detail::require(a.square(), "lu", "matrix " + detail::shape(a) + " is not square");
    const std::size_t n = a.rows();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    double scale = 0.0;
    for (double v : a.entries()) scale = std::max(scale, std::abs(v));
    const double threshold = kSingularTolerance * scale;

    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > std::abs(lu_(piv, k))) piv = i;
      if (!(std::abs(lu_(piv, k)) > threshold) || scale == 0.0) {
        std::ostringstream os;
        os << "singular matrix: pivot " << lu_(piv, k) << " at column " << k
           << " below tolerance " << threshold;
        throw SingularMatrixError(os.str());
      }
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
        std::swap(perm_[k], perm_[piv]);
        sign_ = -sign_;
      }
      for (std::size_t i = k + 1; i < n; ++i) {
        lu_(i, k) /= lu_(k, k);
        const double lik = lu_(i, k);
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= lik * lu_(k, j);
      }
    }
    ledger.charge(flop_tag::lu, lu_flops(n));
  }

  std::size_t size() const { return lu_.rows(); }

  Matrix solve(const Matrix& b, FlopLedger& ledger) const {
    const std::size_t n = size();
    detail::require(b.rows() == n, "solve",
                    "right-hand side " + detail::shape(b) + " does not match " + detail::shape(lu_));
    const std::size_t r = b.cols();
    Matrix x(n, r);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < r; ++j) x(i, j) = b(perm_[i], j);
    for (std::size_t j = 0; j < r; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = x(i, j);
        for (std::size_t k = 0; k < i; ++k) s -= lu_(i, k) * x(k, j);
        x(i, j) = s;
      }
      for (std::size_t ii = n; ii-- > 0;) {
        double s = x(ii, j);
        for (std::size_t k = ii + 1; k < n; ++k) s -= lu_(ii, k) * x(k, j);
        x(ii, j) = s / lu_(ii, ii);
      }
    }
    ledger.charge(flop_tag::trsv, 2 * static_cast<std::uint64_t>(n) * n * r);
    return x;
  }

  Vector solve(const Vector& b, FlopLedger& ledger) const {
    return solve(Matrix::column(b), ledger).col(0);
  }

  // log|det A|; sign available separately. Charged n scalar ops.
  double log_abs_det(FlopLedger& ledger) const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += std::log(std::abs(lu_(i, i)));
    ledger.charge(flop_tag::scalar, size());
    return s;
  }

  int det_sign() const {
    int s = sign_;
    for (std::size_t i = 0; i < size(); ++i)
      if (lu_(i, i) < 0) s = -s;
    return s;
  }

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  int sign_ = 1;
};

// X with A X = B.
inline Matrix solve(const Matrix& a, const Matrix& b, FlopLedger& ledger) {
  detail::require(a.square(), "solve", "coefficient matrix " + detail::shape(a) + " is not square");
  detail::require(b.rows() == a.rows(), "solve",
                  "right-hand side " + detail::shape(b) + " does not match " + detail::shape(a));
  return LuFactorization(a, ledger).solve(b, ledger);
}

inline Vector solve(const Matrix& a, const Vector& b, FlopLedger& ledger) {
  return solve(a, Matrix::column(b), ledger).col(0);
}

// Horizontal concatenation [A | B]. Free.
inline Matrix hcat(const Matrix& a, const Matrix& b) {
  detail::require(a.rows() == b.rows(), "hcat", detail::shape(a) + " | " + detail::shape(b));
  Matrix c(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.cols(); ++j) c(i, a.cols() + j) = b(i, j);
  }
  return c;
}

// Columns [first, first + count). Free.
inline Matrix columns(const Matrix& a, std::size_t first, std::size_t count) {
  detail::require(first + count <= a.cols(), "columns", "column range out of bounds");
  Matrix c(a.rows(), count);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) c(i, j) = a(i, first + j);
  return c;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.entries()) s += v * v;
  return std::sqrt(s);
}

inline double norm(const Vector& v) {
  double s = 0.0;
  for (double x : v.entries()) s += x * x;
  return std::sqrt(s);
}

// ||A - B||_F / max(||B||_F, floor).
inline double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-300) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "relative_error",
                  detail::shape(a) + " vs " + detail::shape(b));
  double d = 0.0;
  for (std::size_t i = 0; i < a.entries().size(); ++i) {
    const double e = a.entries()[i] - b.entries()[i];
    d += e * e;
  }
  return std::sqrt(d) / std::max(frobenius_norm(b), floor);
}

inline double relative_error(const Vector& a, const Vector& b, double floor = 1e-300) {
  detail::require(a.dim() == b.dim(), "relative_error", "vector dims differ");
  double d = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(d) / std::max(norm(b), floor);
}

// Lower-triangular factor L with L L^T = A for symmetric PSD A. Columns whose
// pivot falls below tol * max diagonal are zeroed, so semidefinite inputs work.
inline Matrix psd_cholesky(const Matrix& a, double tol = 1e-12) {
  detail::require(a.square(), "psd_cholesky", "matrix " + detail::shape(a) + " is not square");
  const std::size_t n = a.rows();
  double dmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) dmax = std::max(dmax, std::abs(a(i, i)));
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= tol * dmax) {
      if (d < -1e-8 * std::max(dmax, 1.0))
        throw SingularMatrixError("psd_cholesky: matrix is not positive semidefinite");
      continue;
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

}  // namespace parbayes
