#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace simsec::linalg {

using Complex = std::complex<double>;

/// Dense complex column vector.
class CVector {
 public:
  CVector() = default;
  explicit CVector(std::size_t n, Complex fill = {});
  CVector(std::initializer_list<Complex> values);
  explicit CVector(std::vector<Complex> values);

  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  Complex& operator[](std::size_t i) noexcept { return data_[i]; }
  const Complex& operator[](std::size_t i) const noexcept { return data_[i]; }
  [[nodiscard]] std::span<Complex> values() noexcept { return data_; }
  [[nodiscard]] std::span<const Complex> values() const noexcept { return data_; }

  [[nodiscard]] double norm() const noexcept;

 private:
  std::vector<Complex> data_;
};

/// Dense complex matrix, row-major.
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols, Complex fill = {});
  CMatrix(std::initializer_list<std::initializer_list<Complex>> rows);
  CMatrix(std::size_t rows, std::size_t cols, std::vector<Complex> row_major);

  static CMatrix identity(std::size_t n);
  static CMatrix diagonal(std::span<const Complex> d);
  static CMatrix column(const CVector& v);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] bool square() const noexcept { return rows_ == cols_; }

  Complex& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }
  [[nodiscard]] std::span<Complex> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  [[nodiscard]] std::span<const Complex> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  [[nodiscard]] std::span<const Complex> values() const noexcept { return data_; }
  [[nodiscard]] std::span<Complex> values() noexcept { return data_; }

  [[nodiscard]] CVector col(std::size_t c) const;
  [[nodiscard]] CMatrix adjoint() const;
  [[nodiscard]] double frobenius() const noexcept;

  CMatrix& operator+=(const CMatrix& other);
  CMatrix& operator-=(const CMatrix& other);
  CMatrix& operator*=(Complex s) noexcept;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> data_;
};

CMatrix operator+(CMatrix a, const CMatrix& b);
CMatrix operator-(CMatrix a, const CMatrix& b);
CMatrix operator*(Complex s, CMatrix a);

/// Dense product A·B. Throws DimensionError when A.cols != B.rows.
[[nodiscard]] CMatrix matmul(const CMatrix& a, const CMatrix& b);
[[nodiscard]] CVector matvec(const CMatrix& a, const CVector& x);
/// A^H x without forming A^H.
[[nodiscard]] CVector adjoint_matvec(const CMatrix& a, const CVector& x);
/// diag(d)·A, i.e. row r scaled by d[r].
[[nodiscard]] CMatrix scale_rows(std::span<const Complex> d, const CMatrix& a);

/// x^H y.
[[nodiscard]] Complex dot(const CVector& x, const CVector& y);

/// ‖A − A^H‖_F / ‖A‖_F (0 for the zero matrix).
[[nodiscard]] double hermitian_defect(const CMatrix& a);

struct EigDecomp {
  std::vector<double> values;  // descending
  CMatrix vectors;             // columns are orthonormal eigenvectors
};

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix. Throws
/// NumericalError for non-Hermitian input or failure to converge.
[[nodiscard]] EigDecomp hermitian_eig(const CMatrix& a);

/// S with S·S^H = A for a Hermitian PSD A. Negative eigenvalues are clipped
/// to zero unless min λ < −1e-8·max λ, which throws NumericalError.
[[nodiscard]] CMatrix psd_sqrt(const CMatrix& a);

/// Counts dense complex multiply-accumulates issued by matmul on this thread.
[[nodiscard]] std::size_t matmul_mac_count() noexcept;
void reset_matmul_mac_count() noexcept;

}  // namespace simsec::linalg
