#pragma once

// Sparse symmetric systems (real SPD and complex symmetric) and their direct
// factorization. Real SPD and complex symmetric systems use a supernodal
// L L^T and fall back to UMFPACK's LU on a tiny pivot. Real indefinite systems
// go straight to the LU.

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Sparse>
#include <umfpack.h>

#include "mhmm/supernodal.hpp"
#include "mhmm/types.hpp"

namespace mhmm {

enum class SymmetryTag { real_spd, real_symmetric, complex_symmetric };

inline const char* to_string(SymmetryTag tag) {
  switch (tag) {
    case SymmetryTag::real_spd: return "real-SPD";
    case SymmetryTag::real_symmetric: return "real-symmetric";
    case SymmetryTag::complex_symmetric: return "complex-symmetric";
  }
  return "?";
}

template <class Scalar>
struct Triplet {
  int row;
  int col;
  Scalar value;
};

/// Triplet accumulator compressed into column storage. Duplicates are summed
/// in a canonical order, so any permutation of the same triplets gives a
/// bit-identical matrix.
template <class Scalar>
class SparseSystem {
 public:
  using Index = SuiteSparse_long;
  using Matrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, Index>;

  SparseSystem(int dim, SymmetryTag tag, std::string label = {})
      : dim_(dim), tag_(tag), label_(std::move(label)) {}

  int dim() const { return dim_; }
  SymmetryTag tag() const { return tag_; }
  const std::string& label() const { return label_; }

  void add(int row, int col, Scalar value) {
    if (row < 0 || col < 0 || row >= dim_ || col >= dim_) {
      throw Error(ErrorKind::invalid_argument, "SparseSystem::add: index out of range");
    }
    triplets_.push_back({row, col, value});
    compressed_ = false;
  }

  std::vector<Triplet<Scalar>>& triplets() { return triplets_; }

  void compress() {
    if (compressed_) return;
    auto key = [](const Triplet<Scalar>& t) {
      return std::make_tuple(t.col, t.row, std::real(t.value), std::imag(t.value));
    };
    std::sort(triplets_.begin(), triplets_.end(),
              [&](const auto& a, const auto& b) { return key(a) < key(b); });
    std::vector<Eigen::Triplet<Scalar, Index>> merged;
    merged.reserve(triplets_.size());
    for (const auto& t : triplets_) {
      if (!merged.empty() && merged.back().row() == t.row && merged.back().col() == t.col) {
        merged.back() = Eigen::Triplet<Scalar, Index>(t.row, t.col, merged.back().value() + t.value);
      } else {
        merged.emplace_back(t.row, t.col, t.value);
      }
    }
    matrix_.resize(dim_, dim_);
    matrix_.setFromTriplets(merged.begin(), merged.end());
    matrix_.makeCompressed();
    compressed_ = true;
  }

  const Matrix& matrix() const {
    if (!compressed_) throw Error(ErrorKind::invalid_argument, "SparseSystem not compressed");
    return matrix_;
  }

  double max_abs() const {
    double m = 0.0;
    for (Index k = 0; k < matrix_.outerSize(); ++k)
      for (typename Matrix::InnerIterator it(matrix_, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
  }

  /// max |A - A^T| / max |A| (plain transpose, no conjugation).
  double symmetry_defect() const {
    const Matrix t = matrix().transpose();
    const Matrix d = matrix_ - t;
    double m = 0.0;
    for (Index k = 0; k < d.outerSize(); ++k)
      for (typename Matrix::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
    const double s = max_abs();
    return s > 0 ? m / s : 0.0;
  }

 private:
  int dim_;
  SymmetryTag tag_;
  std::string label_;
  std::vector<Triplet<Scalar>> triplets_;
  Matrix matrix_;
  bool compressed_ = false;
};

namespace detail {

template <class Scalar>
struct UmfpackTraits;

template <>
struct UmfpackTraits<double> {
  using I = SuiteSparse_long;
  static I symbolic(I n, const I* ap, const I* ai, const double* ax, void** s, const double* c,
                    double* info) {
    return umfpack_dl_symbolic(n, n, ap, ai, ax, s, c, info);
  }
  static I numeric(const I* ap, const I* ai, const double* ax, void* s, void** num,
                   const double* c, double* info) {
    return umfpack_dl_numeric(ap, ai, ax, s, num, c, info);
  }
  static I solve(const I* ap, const I* ai, const double* ax, double* x, const double* b, void* num,
                 const double* c, double* info) {
    return umfpack_dl_solve(UMFPACK_A, ap, ai, ax, x, b, num, c, info);
  }
  static void free_symbolic(void** s) { umfpack_dl_free_symbolic(s); }
  static void free_numeric(void** n) { umfpack_dl_free_numeric(n); }
  static void defaults(double* c) { umfpack_dl_defaults(c); }
};

template <>
struct UmfpackTraits<cplx> {
  static const double* re(const cplx* p) { return reinterpret_cast<const double*>(p); }
  static double* re(cplx* p) { return reinterpret_cast<double*>(p); }
  using I = SuiteSparse_long;
  static I symbolic(I n, const I* ap, const I* ai, const cplx* ax, void** s, const double* c,
                    double* info) {
    return umfpack_zl_symbolic(n, n, ap, ai, re(ax), nullptr, s, c, info);
  }
  static I numeric(const I* ap, const I* ai, const cplx* ax, void* s, void** num,
                   const double* c, double* info) {
    return umfpack_zl_numeric(ap, ai, re(ax), nullptr, s, num, c, info);
  }
  static I solve(const I* ap, const I* ai, const cplx* ax, cplx* x, const cplx* b, void* num,
                 const double* c, double* info) {
    return umfpack_zl_solve(UMFPACK_A, ap, ai, re(ax), nullptr, re(x), nullptr, re(b), nullptr,
                            num, c, info);
  }
  static void free_symbolic(void** s) { umfpack_zl_free_symbolic(s); }
  static void free_numeric(void** n) { umfpack_zl_free_numeric(n); }
  static void defaults(double* c) { umfpack_zl_defaults(c); }
};

}  // namespace detail

inline constexpr double kPivotTolerance = 1e-14;

namespace detail {

/// Serializes factorizations and solves. Concurrent calls into the packaged
/// OpenBLAS give results that depend on scheduling.
inline std::mutex& umfpack_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// A computed factorization; immutable after construction. Solves may be
/// called from several threads but run one at a time.
template <class Scalar>
class Factorization {
 public:
  using Matrix = typename SparseSystem<Scalar>::Matrix;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Block = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit Factorization(const SparseSystem<Scalar>& system)
      : matrix_(system.matrix()), tag_(system.tag()), label_(system.label()) {
    if (tag_ != SymmetryTag::real_symmetric) {
      std::lock_guard lock(detail::umfpack_mutex());
      try {
        llt_ = std::make_unique<detail::SymmetricCholesky<Scalar>>(
            dim(), matrix_.outerIndexPtr(), matrix_.innerIndexPtr(), matrix_.valuePtr(), kPivotTolerance);
        return;
      } catch (const detail::TinyPivot&) {
        llt_.reset();  // indefinite or tiny pivot: fall back to LU
      }
    }
    factor_lu();
  }

  Factorization(const Factorization&) = delete;
  Factorization& operator=(const Factorization&) = delete;

  ~Factorization() {
    using T = detail::UmfpackTraits<Scalar>;
    if (numeric_) T::free_numeric(&numeric_);
    if (symbolic_) T::free_symbolic(&symbolic_);
  }

  int dim() const { return static_cast<int>(matrix_.rows()); }
  bool used_ldlt() const { return static_cast<bool>(llt_); }

  Vector solve(const Vector& b) const {
    if (b.size() != matrix_.rows()) throw Error(ErrorKind::invalid_argument, "solve: size mismatch");
    if (llt_) {
      Vector x = b;
      std::lock_guard lock(detail::umfpack_mutex());
      llt_->solve(x.data());
      return x;
    }
    using T = detail::UmfpackTraits<Scalar>;
    Vector x(b.size());
    double info[UMFPACK_INFO];
    std::lock_guard lock(detail::umfpack_mutex());
    const auto status = T::solve(matrix_.outerIndexPtr(), matrix_.innerIndexPtr(), matrix_.valuePtr(),
                                x.data(), b.data(), numeric_, control_, info);
    if (status < 0) {
      throw Error(ErrorKind::singular_matrix, "UMFPACK solve failed for " + what());
    }
    return x;
  }

  /// Solves every column of `rhs` with the same factorization.
  Block solve(const Block& rhs) const {
    Block x(rhs.rows(), rhs.cols());
    for (Eigen::Index k = 0; k < rhs.cols(); ++k) x.col(k) = solve(Vector(rhs.col(k)));
    return x;
  }

 private:
  std::string what() const {
    return std::string(to_string(tag_)) + (label_.empty() ? "" : " matrix '" + label_ + "'");
  }

  void factor_lu() {
    using T = detail::UmfpackTraits<Scalar>;
    T::defaults(control_);
    // Nested dissection keeps 3D fill (and peak memory) far below AMD.
    control_[UMFPACK_STRATEGY] = UMFPACK_STRATEGY_SYMMETRIC;
    control_[UMFPACK_ORDERING] = UMFPACK_ORDERING_METIS;
    // Unscaled, so the reported pivot ratio is relative to the matrix entries.
    control_[UMFPACK_SCALE] = UMFPACK_SCALE_NONE;
    double info[UMFPACK_INFO];
    const auto* ap = matrix_.outerIndexPtr();
    const auto* ai = matrix_.innerIndexPtr();
    const Scalar* ax = matrix_.valuePtr();
    std::lock_guard lock(detail::umfpack_mutex());
    auto status = T::symbolic(dim(), ap, ai, ax, &symbolic_, control_, info);
    if (status < 0) {
      throw Error(ErrorKind::singular_matrix, "UMFPACK symbolic analysis failed for " + what());
    }
    status = T::numeric(ap, ai, ax, symbolic_, &numeric_, control_, info);
    const double rcond = info[UMFPACK_RCOND];
    if (status != UMFPACK_OK || !(rcond >= kPivotTolerance)) {
      throw Error(ErrorKind::singular_matrix,
                  "singular or near-singular factorization of " + what() +
                      " (pivot ratio " + std::to_string(rcond) + ")");
    }
  }

  Matrix matrix_;
  SymmetryTag tag_;
  std::string label_;
  std::unique_ptr<detail::SymmetricCholesky<Scalar>> llt_;
  void* symbolic_ = nullptr;
  void* numeric_ = nullptr;
  double control_[UMFPACK_CONTROL]{};
};

/// Factorizes once and solves for each column of `rhs`.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_direct(
    SparseSystem<Scalar>& system,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& rhs) {
  system.compress();
  Factorization<Scalar> f(system);
  return f.solve(rhs);
}

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> solve_direct(SparseSystem<Scalar>& system,
                                                      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& rhs) {
  system.compress();
  Factorization<Scalar> f(system);
  return f.solve(rhs);
}

template <class Scalar, class Vector>
double relative_residual(const SparseSystem<Scalar>& system, const Vector& x, const Vector& b) {
  const double nb = b.norm();
  const Vector r = system.matrix() * x - b;
  return nb > 0 ? r.norm() / nb : r.norm();
}

}  // namespace mhmm
