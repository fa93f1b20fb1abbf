#pragma once

// Spin-1/2 Hilbert space of N sites and the dense Pauli operator algebra.
//
// Basis convention: basis index b in [0, 2^N) encodes the sigma^z eigenvalue
// of site i in bit i of b; bit 0 means s_i = +1, bit 1 means s_i = -1.
// Site 0 is the least significant bit.

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <string>

#include "qsklab/error.hpp"

namespace qsklab {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

enum class Axis { x, y, z };

inline char axis_name(Axis a) {
  switch (a) {
    case Axis::x: return 'x';
    case Axis::y: return 'y';
    case Axis::z: return 'z';
  }
  return '?';
}

inline constexpr int default_max_sites = 14;

/// Hilbert-space cap; QSKLAB_MAX_N overrides the default of 14.
inline int max_sites() {
  if (const char* env = std::getenv("QSKLAB_MAX_N")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 30) return static_cast<int>(v);
  }
  return default_max_sites;
}

inline void check_site_count(int n_sites) {
  if (n_sites < 1) throw invalid_argument("n_sites must be >= 1");
  if (n_sites > max_sites()) {
    throw cap_exceeded("n_sites = " + std::to_string(n_sites) +
                       " exceeds the Hilbert-space cap of " + std::to_string(max_sites()) +
                       " (set QSKLAB_MAX_N to override)");
  }
}

inline std::int64_t hilbert_dim(int n_sites) { return std::int64_t{1} << n_sites; }

/// sigma^z eigenvalue (+1 or -1) of `site` in basis state `b`.
inline int spin_of(std::uint64_t b, int site) { return ((b >> site) & 1U) ? -1 : 1; }

class SiteIndex {
 public:
  SiteIndex(int value, int n_sites) : value_(value) {
    if (n_sites < 1) throw invalid_argument("n_sites must be >= 1");
    if (value < 0 || value >= n_sites) {
      throw invalid_argument("site " + std::to_string(value) + " out of range [0, " +
                             std::to_string(n_sites) + ")");
    }
  }
  int value() const { return value_; }

 private:
  int value_;
};

/// Dense operator on the 2^N spin space. The structural flags are only set
/// when they hold: `hermitian` within 1e-12, `diagonal` exactly, `real`
/// exactly.
class Operator {
 public:
  Operator() = default;

  static Operator from_matrix(ComplexMatrix m) {
    Operator op;
    op.n_sites_ = sites_for_dim(m.rows(), m.cols());
    op.m_ = std::move(m);
    op.classify();
    return op;
  }

  static Operator identity(int n_sites) {
    check_site_count(n_sites);
    auto d = hilbert_dim(n_sites);
    return diagonal(RealVector::Ones(d));
  }

  static Operator zero(int n_sites) {
    check_site_count(n_sites);
    auto d = hilbert_dim(n_sites);
    return diagonal(RealVector::Zero(d));
  }

  static Operator diagonal(const RealVector& d) {
    Operator op;
    op.n_sites_ = sites_for_dim(d.size(), d.size());
    op.m_ = ComplexMatrix::Zero(d.size(), d.size());
    op.m_.diagonal() = d.cast<cplx>();
    op.hermitian_ = op.diagonal_ = op.real_ = true;
    return op;
  }

  int n_sites() const { return n_sites_; }
  Eigen::Index dim() const { return m_.rows(); }
  const ComplexMatrix& matrix() const { return m_; }
  bool hermitian() const { return hermitian_; }
  bool is_diagonal() const { return diagonal_; }
  bool is_real() const { return real_; }

  RealVector diagonal_values() const { return m_.diagonal().real(); }
  RealMatrix real_matrix() const { return m_.real(); }

  Operator operator+(const Operator& o) const { return combine(o, 1.0); }
  Operator operator-(const Operator& o) const { return combine(o, -1.0); }

  Operator scaled(double s) const {
    Operator r = *this;
    r.m_ *= s;
    return r;
  }

  Operator scaled(cplx s) const {
    if (s.imag() == 0.0) return scaled(s.real());
    return from_matrix(m_ * s);
  }

  double max_abs() const { return m_.size() ? m_.cwiseAbs().maxCoeff() : 0.0; }

  friend bool operator==(const Operator& a, const Operator& b) {
    return a.n_sites_ == b.n_sites_ && a.m_ == b.m_;
  }

 private:
  static int sites_for_dim(Eigen::Index rows, Eigen::Index cols) {
    if (rows != cols || rows < 2) throw invalid_argument("operator must be square with dim >= 2");
    int n = 0;
    while ((Eigen::Index{1} << n) < rows) ++n;
    if ((Eigen::Index{1} << n) != rows) throw invalid_argument("operator dimension is not a power of two");
    return n;
  }

  void classify() {
    const double scale = std::max(1.0, max_abs());
    hermitian_ = (m_ - m_.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
    real_ = (m_.imag().array() == 0.0).all();
    diagonal_ = true;
    for (Eigen::Index c = 0; c < m_.cols() && diagonal_; ++c)
      for (Eigen::Index r = 0; r < m_.rows(); ++r)
        if (r != c && m_(r, c) != cplx{}) {
          diagonal_ = false;
          break;
        }
  }

  Operator combine(const Operator& o, double sign) const {
    if (o.dim() != dim()) throw invalid_argument("operator dimension mismatch");
    Operator r;
    r.n_sites_ = n_sites_;
    r.m_ = m_ + sign * o.m_;
    r.hermitian_ = hermitian_ && o.hermitian_;
    r.diagonal_ = diagonal_ && o.diagonal_;
    r.real_ = real_ && o.real_;
    return r;
  }

  int n_sites_ = 0;
  ComplexMatrix m_;
  bool hermitian_ = false;
  bool diagonal_ = false;
  bool real_ = false;
};

inline Operator pauli_op(Axis axis, SiteIndex site, int n_sites) {
  check_site_count(n_sites);
  if (site.value() >= n_sites) throw invalid_argument("site out of range");
  const auto dim = hilbert_dim(n_sites);
  const std::uint64_t mask = std::uint64_t{1} << site.value();
  if (axis == Axis::z) {
    RealVector d(dim);
    for (std::int64_t b = 0; b < dim; ++b) d(b) = spin_of(b, site.value());
    return Operator::diagonal(d);
  }
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  for (std::int64_t b = 0; b < dim; ++b) {
    const auto flipped = static_cast<Eigen::Index>(b ^ mask);
    if (axis == Axis::x) {
      m(flipped, b) = 1.0;
    } else {
      // sigma^y |up> = i |down>, sigma^y |down> = -i |up>
      m(flipped, b) = (b & mask) ? cplx{0, -1} : cplx{0, 1};
    }
  }
  return Operator::from_matrix(std::move(m));
}

inline Operator pauli_op(Axis axis, int site, int n_sites) {
  return pauli_op(axis, SiteIndex(site, n_sites), n_sites);
}

inline Operator op_product(const Operator& a, const Operator& b) {
  if (a.dim() != b.dim()) throw invalid_argument("op_product: dimension mismatch");
  if (a.is_diagonal() && b.is_diagonal()) {
    if (a.is_real() && b.is_real())
      return Operator::diagonal(a.diagonal_values().cwiseProduct(b.diagonal_values()));
  }
  ComplexMatrix p = a.matrix() * b.matrix();
  return Operator::from_matrix(std::move(p));
}

inline Operator commutator(const Operator& a, const Operator& b) {
  return op_product(a, b) - op_product(b, a);
}

inline Operator total_axis_sum(Axis axis, int n_sites) {
  check_site_count(n_sites);
  Operator sum = pauli_op(axis, 0, n_sites);
  for (int i = 1; i < n_sites; ++i) sum = sum + pauli_op(axis, i, n_sites);
  return sum;
}

/// sigma^z_i sigma^z_j, diagonal.
inline Operator zz_op(int i, int j, int n_sites) {
  check_site_count(n_sites);
  SiteIndex si(i, n_sites), sj(j, n_sites);
  const auto dim = hilbert_dim(n_sites);
  RealVector d(dim);
  for (std::int64_t b = 0; b < dim; ++b) d(b) = spin_of(b, si.value()) * spin_of(b, sj.value());
  return Operator::diagonal(d);
}

/// Global flip U = prod_i exp(i pi/2 sigma^x_i) = i^N sigma^x_1 ... sigma^x_N.
inline Operator global_flip(int n_sites) {
  check_site_count(n_sites);
  const auto dim = hilbert_dim(n_sites);
  static constexpr cplx phases[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const cplx phase = phases[n_sites % 4];
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  for (std::int64_t b = 0; b < dim; ++b) m(b ^ (dim - 1), b) = phase;
  return Operator::from_matrix(std::move(m));
}

/// Largest entrywise deviation |a - b|.
inline double max_abs_diff(const Operator& a, const Operator& b) {
  if (a.dim() != b.dim()) throw invalid_argument("dimension mismatch");
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

}  // namespace qsklab
