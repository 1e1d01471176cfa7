#include "simsec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "simsec/errors.hpp"

namespace simsec::linalg {
namespace {

thread_local std::size_t g_mac_count = 0;

void require_finite(std::span<const Complex> values) {
  for (const auto& z : values) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw NumericalError("non-finite value in matrix/vector construction");
    }
  }
}

std::string shape(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

CVector::CVector(std::size_t n, Complex fill) : data_(n, fill) {
  require_finite(data_);
}

CVector::CVector(std::initializer_list<Complex> values) : data_(values) {
  require_finite(data_);
}

CVector::CVector(std::vector<Complex> values) : data_(std::move(values)) {
  require_finite(data_);
}

double CVector::norm() const noexcept {
  double s = 0.0;
  for (const auto& z : data_) s += std::norm(z);
  return std::sqrt(s);
}

CMatrix::CMatrix(std::size_t rows, std::size_t cols, Complex fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  require_finite(data_);
}

CMatrix::CMatrix(std::initializer_list<std::initializer_list<Complex>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  require_finite(data_);
}

CMatrix::CMatrix(std::size_t rows, std::size_t cols, std::vector<Complex> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("row-major buffer does not match " + shape(rows_, cols_));
  }
  require_finite(data_);
}

CMatrix CMatrix::identity(std::size_t n) {
  CMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

CMatrix CMatrix::diagonal(std::span<const Complex> d) {
  CMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  require_finite(m.data_);
  return m;
}

CMatrix CMatrix::column(const CVector& v) {
  return CMatrix(v.size(), 1, std::vector<Complex>(v.values().begin(), v.values().end()));
}

CVector CMatrix::col(std::size_t c) const {
  std::vector<Complex> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return CVector(std::move(out));
}

CMatrix CMatrix::adjoint() const {
  CMatrix out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
  return out;
}

double CMatrix::frobenius() const noexcept {
  double s = 0.0;
  for (const auto& z : data_) s += std::norm(z);
  return std::sqrt(s);
}

CMatrix& CMatrix::operator+=(const CMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw DimensionError("cannot add " + shape(rows_, cols_) + " and " +
                         shape(other.rows_, other.cols_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

CMatrix& CMatrix::operator-=(const CMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw DimensionError("cannot subtract " + shape(other.rows_, other.cols_) + " from " +
                         shape(rows_, cols_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

CMatrix& CMatrix::operator*=(Complex s) noexcept {
  for (auto& z : data_) z *= s;
  return *this;
}

CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
CMatrix operator*(Complex s, CMatrix a) { return a *= s; }

CMatrix matmul(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape(a.rows(), a.cols()) + " · " +
                         shape(b.rows(), b.cols()));
  }
  CMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const Complex aik = a(i, k);
      const auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  g_mac_count += a.rows() * a.cols() * b.cols();
  return out;
}

CVector matvec(const CMatrix& a, const CVector& x) {
  if (a.cols() != x.size()) {
    throw DimensionError("matvec: " + shape(a.rows(), a.cols()) + " · " +
                         std::to_string(x.size()));
  }
  std::vector<Complex> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    Complex acc{};
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) acc += r[j] * x[j];
    out[i] = acc;
  }
  return CVector(std::move(out));
}

CVector adjoint_matvec(const CMatrix& a, const CVector& x) {
  if (a.rows() != x.size()) {
    throw DimensionError("adjoint_matvec: (" + shape(a.rows(), a.cols()) + ")^H · " +
                         std::to_string(x.size()));
  }
  std::vector<Complex> out(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += std::conj(r[j]) * x[i];
  }
  return CVector(std::move(out));
}

CMatrix scale_rows(std::span<const Complex> d, const CMatrix& a) {
  if (d.size() != a.rows()) throw DimensionError("scale_rows: length mismatch");
  CMatrix out = a;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (auto& z : out.row(r)) z *= d[r];
  return out;
}

Complex dot(const CVector& x, const CVector& y) {
  if (x.size() != y.size()) throw DimensionError("dot: length mismatch");
  Complex acc{};
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::conj(x[i]) * y[i];
  return acc;
}

double hermitian_defect(const CMatrix& a) {
  if (!a.square()) throw DimensionError("hermitian_defect: matrix is not square");
  double num = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) num += std::norm(a(r, c) - std::conj(a(c, r)));
  const double den = a.frobenius();
  return den == 0.0 ? 0.0 : std::sqrt(num) / den;
}

EigDecomp hermitian_eig(const CMatrix& input) {
  if (!input.square()) throw DimensionError("hermitian_eig: matrix is not square");
  if (hermitian_defect(input) >= 1e-8) {
    throw NumericalError("hermitian_eig: input is not Hermitian");
  }
  const std::size_t n = input.rows();

  // Work on the exactly-Hermitian part.
  CMatrix a(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    a(r, r) = input(r, r).real();
    for (std::size_t c = r + 1; c < n; ++c) {
      a(r, c) = 0.5 * (input(r, c) + std::conj(input(c, r)));
      a(c, r) = std::conj(a(r, c));
    }
  }
  CMatrix v = CMatrix::identity(n);
  const double scale = std::max(a.frobenius(), std::numeric_limits<double>::min());

  constexpr int kMaxSweeps = 100;
  bool converged = n <= 1;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::norm(a(p, q));
    if (std::sqrt(2.0 * off) <= 1e-15 * scale) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const Complex apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag <= 1e-300) continue;
        const Complex e = apq / mag;
        const double tau = (a(q, q).real() - a(p, p).real()) / (2.0 * mag);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const Complex ce = std::conj(e);
        // A <- A J
        for (std::size_t r = 0; r < n; ++r) {
          const Complex x = a(r, p);
          const Complex y = a(r, q);
          a(r, p) = c * x - s * ce * y;
          a(r, q) = s * x + c * ce * y;
        }
        // A <- J^H A
        for (std::size_t r = 0; r < n; ++r) {
          const Complex x = a(p, r);
          const Complex y = a(q, r);
          a(p, r) = c * x - s * e * y;
          a(q, r) = s * x + c * e * y;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (std::size_t r = 0; r < n; ++r) {
          const Complex x = v(r, p);
          const Complex y = v(r, q);
          v(r, p) = c * x - s * ce * y;
          v(r, q) = s * x + c * ce * y;
        }
      }
    }
  }
  if (!converged) throw NumericalError("hermitian_eig: Jacobi sweeps did not converge");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a(i, i).real() > a(j, j).real();
  });
  EigDecomp out{std::vector<double>(n), CMatrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]).real();
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

CMatrix psd_sqrt(const CMatrix& a) {
  const EigDecomp eig = hermitian_eig(a);
  const std::size_t n = a.rows();
  if (n == 0) return {};
  const double max_ev = eig.values.front();
  const double min_ev = eig.values.back();
  if (min_ev < -1e-8 * std::max(max_ev, 0.0) || (max_ev <= 0.0 && min_ev < 0.0)) {
    throw NumericalError("psd_sqrt: matrix is significantly indefinite");
  }
  // S = V diag(sqrt(max(λ,0))) V^H, the Hermitian square root.
  std::vector<double> root(n);
  for (std::size_t k = 0; k < n; ++k) root[k] = std::sqrt(std::max(eig.values[k], 0.0));
  CMatrix s(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = r; c < n; ++c) {
      Complex acc{};
      for (std::size_t k = 0; k < n; ++k)
        acc += eig.vectors(r, k) * root[k] * std::conj(eig.vectors(c, k));
      s(r, c) = acc;
      s(c, r) = std::conj(acc);
    }
    s(r, r) = s(r, r).real();
  }
  return s;
}

std::size_t matmul_mac_count() noexcept { return g_mac_count; }
void reset_matmul_mac_count() noexcept { g_mac_count = 0; }

}  // namespace simsec::linalg
