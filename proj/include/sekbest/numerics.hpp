#pragma once

// Dense matrices, complex-to-real system decomposition and Givens QR.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sekbest/error.hpp"

namespace sekbest {

using Complex = std::complex<double>;

namespace detail {

inline bool is_finite(double v) { return std::isfinite(v); }
inline bool is_finite(const Complex& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

}  // namespace detail

// Row-major dense matrix. Shape is fixed at construction.
template <typename T>
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, T{}) {
    if (rows == 0 || cols == 0) throw DimensionError("matrix dimensions must be >= 1");
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<T> entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (rows == 0 || cols == 0) throw DimensionError("matrix dimensions must be >= 1");
    if (data_.size() != rows * cols) throw DimensionError("matrix entry count does not match shape");
    for (const auto& v : data_)
      if (!detail::is_finite(v)) throw DimensionError("matrix entries must be finite");
  }

  static Matrix identity(std::size_t n) {
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = T{1};
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<const T> entries() const noexcept { return data_; }

  Matrix transposed() const {
    Matrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<Complex>;

template <typename T>
Matrix<T> operator*(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) throw DimensionError("matrix product shape mismatch");
  Matrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

template <typename T>
std::vector<T> operator*(const Matrix<T>& a, std::span<const T> x) {
  if (a.cols() != x.size()) throw DimensionError("matrix-vector shape mismatch");
  std::vector<T> out(a.rows(), T{});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T acc{};
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
    out[i] = acc;
  }
  return out;
}

template <typename T>
std::vector<T> operator*(const Matrix<T>& a, const std::vector<T>& x) {
  return a * std::span<const T>(x);
}

// Largest absolute entry-wise difference. Shapes must agree.
template <typename T>
double max_abs_diff(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("shape mismatch");
  double worst = 0.0;
  auto ea = a.entries();
  auto eb = b.entries();
  for (std::size_t i = 0; i < ea.size(); ++i) worst = std::max(worst, std::abs(ea[i] - eb[i]));
  return worst;
}

// Real image of a complex system:
//   H_r = [[Re H, -Im H], [Im H, Re H]],  y_r = [Re y; Im y].
// Real index t < N_T carries Re(x_t); index N_T + t carries Im(x_t).
inline std::pair<RealMatrix, std::vector<double>> complex_to_real_system(const ComplexMatrix& h,
                                                                          std::span<const Complex> y) {
  if (h.rows() != y.size()) throw DimensionError("receive vector length must equal channel rows");
  const std::size_t nr = h.rows();
  const std::size_t nt = h.cols();
  RealMatrix hr(2 * nr, 2 * nt);
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      const Complex v = h(i, j);
      hr(i, j) = v.real();
      hr(i, nt + j) = -v.imag();
      hr(nr + i, j) = v.imag();
      hr(nr + i, nt + j) = v.real();
    }
  }
  std::vector<double> yr(2 * nr);
  for (std::size_t i = 0; i < nr; ++i) {
    yr[i] = y[i].real();
    yr[nr + i] = y[i].imag();
  }
  return {std::move(hr), std::move(yr)};
}

inline std::vector<double> complex_to_real_vector(std::span<const Complex> x) {
  std::vector<double> out(2 * x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i].real();
    out[x.size() + i] = x[i].imag();
  }
  return out;
}

// Threshold on |r_ii| below which a channel is treated as rank deficient.
inline constexpr double kRankTolerance = 1e-12;

struct QrFactors {
  RealMatrix q;                           // m x n, orthonormal columns
  RealMatrix r;                           // n x n, upper triangular, r(i,i) >= 0
  std::vector<std::size_t> column_order;  // q * r == a[:, column_order]
};

namespace detail {

// Triangularizes `work` (m x n) in place with Givens rotations, applying the
// same rotations to `rhs` and, when given, to the rows of `qt` (m x m, starts
// as identity and ends as Q'). With `sorted`, column i is the remaining column
// of smallest residual norm.
inline std::vector<std::size_t> givens_triangularize(RealMatrix& work, std::span<double> rhs, bool sorted,
                                                     RealMatrix* qt) {
  const std::size_t m = work.rows();
  const std::size_t n = work.cols();
  if (m < n) throw DimensionError("QR needs rows >= cols");
  if (!rhs.empty() && rhs.size() != m) throw DimensionError("rhs length must equal matrix rows");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t i = 0; i < n; ++i) {
    if (sorted) {
      std::size_t best = i;
      double best_norm = 0.0;
      for (std::size_t j = i; j < n; ++j) {
        double norm = 0.0;
        for (std::size_t r = i; r < m; ++r) norm += work(r, j) * work(r, j);
        if (j == i || norm < best_norm) {
          best = j;
          best_norm = norm;
        }
      }
      if (best != i) {
        for (std::size_t r = 0; r < m; ++r) std::swap(work(r, i), work(r, best));
        std::swap(order[i], order[best]);
      }
    }

    for (std::size_t r = i + 1; r < m; ++r) {
      const double b = work(r, i);
      if (b == 0.0) continue;
      const double a = work(i, i);
      const double h = std::hypot(a, b);
      const double c = a / h;
      const double s = b / h;
      double* top = &work(i, 0);
      double* bot = &work(r, 0);
      for (std::size_t j = i; j < n; ++j) {
        const double t = top[j];
        const double u = bot[j];
        top[j] = c * t + s * u;
        bot[j] = c * u - s * t;
      }
      bot[i] = 0.0;
      if (!rhs.empty()) {
        const double t = rhs[i];
        const double u = rhs[r];
        rhs[i] = c * t + s * u;
        rhs[r] = c * u - s * t;
      }
      if (qt != nullptr) {
        double* qa = &(*qt)(i, 0);
        double* qb = &(*qt)(r, 0);
        for (std::size_t j = 0; j < m; ++j) {
          const double t = qa[j];
          const double u = qb[j];
          qa[j] = c * t + s * u;
          qb[j] = c * u - s * t;
        }
      }
    }

    if (work(i, i) < 0.0) {
      for (std::size_t j = i; j < n; ++j) work(i, j) = -work(i, j);
      if (!rhs.empty()) rhs[i] = -rhs[i];
      if (qt != nullptr)
        for (std::size_t j = 0; j < m; ++j) (*qt)(i, j) = -(*qt)(i, j);
    }
    if (work(i, i) < kRankTolerance)
      throw RankDeficientError("rank-deficient channel: |r(" + std::to_string(i) + "," + std::to_string(i) +
                               ")| below tolerance");
  }
  return order;
}

inline RealMatrix upper_block(const RealMatrix& work) {
  const std::size_t n = work.cols();
  RealMatrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) r(i, j) = work(i, j);
  return r;
}

}  // namespace detail

// QR factorization by Givens rotations. Throws RankDeficientError when a
// diagonal entry of R falls below kRankTolerance.
inline QrFactors qr_givens(const RealMatrix& a, bool sorted = false) {
  RealMatrix work = a;
  RealMatrix qt = RealMatrix::identity(a.rows());
  auto order = detail::givens_triangularize(work, {}, sorted, &qt);
  RealMatrix q(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) q(r, c) = qt(c, r);
  return {std::move(q), detail::upper_block(work), std::move(order)};
}

// q' * y_r
inline std::vector<double> rotate_receive(const RealMatrix& q, std::span<const double> y_r) {
  if (q.rows() != y_r.size()) throw DimensionError("receive vector length must equal q rows");
  std::vector<double> out(q.cols(), 0.0);
  for (std::size_t r = 0; r < q.rows(); ++r) {
    const double v = y_r[r];
    for (std::size_t c = 0; c < q.cols(); ++c) out[c] += q(r, c) * v;
  }
  return out;
}

// Triangular real model  Y = R x + N  ready for tree search.
struct RealSystem {
  RealMatrix r;                           // 2N_T x 2N_T upper triangular
  std::vector<double> y_rot;              // Q' y_r
  std::optional<RealMatrix> q;            // 2N_R x 2N_T; kept on request
  std::vector<std::size_t> column_order;  // tree variable j is real unknown column_order[j]

  std::size_t dimension() const noexcept { return r.cols(); }
};

struct SystemOptions {
  bool sorted_qrd = false;
  bool keep_q = true;
};

// Builds the triangular system from a complex channel and receive vector.
// With keep_q off, Q' is applied to y on the fly and never formed.
inline RealSystem make_real_system(const ComplexMatrix& h, std::span<const Complex> y, SystemOptions opts = {}) {
  auto [hr, yr] = complex_to_real_system(h, y);
  if (hr.rows() < hr.cols()) throw DimensionError("need N_R >= N_T");
  RealSystem sys;
  if (opts.keep_q) {
    auto f = qr_givens(hr, opts.sorted_qrd);
    sys.y_rot = rotate_receive(f.q, yr);
    sys.r = std::move(f.r);
    sys.q = std::move(f.q);
    sys.column_order = std::move(f.column_order);
  } else {
    RealMatrix work = std::move(hr);
    sys.column_order = detail::givens_triangularize(work, yr, opts.sorted_qrd, nullptr);
    sys.r = detail::upper_block(work);
    sys.y_rot.assign(yr.begin(), yr.begin() + static_cast<std::ptrdiff_t>(work.cols()));
  }
  return sys;
}

inline RealSystem make_real_system(const ComplexMatrix& h, const std::vector<Complex>& y, SystemOptions opts = {}) {
  return make_real_system(h, std::span<const Complex>(y), opts);
}

}  // namespace sekbest
