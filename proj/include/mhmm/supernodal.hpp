#pragma once

// Supernodal L L^T factorization without pivoting of real SPD and complex
// symmetric (non-Hermitian) matrices. CHOLMOD supplies the fill-reducing
// ordering and the supernodal structure; the numeric phase is left-looking and
// uses the unconjugated BLAS-3 kernels.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <cblas.h>
#include <cholmod.h>

#include "mhmm/types.hpp"

namespace mhmm::detail {

struct TinyPivot : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace blas {

using I = SuiteSparse_long;

inline void gemm_nt(I m, I n, I k, double alpha, const double* a, I lda, const double* b, I ldb, double beta,
                    double* c, I ldc) {
  cblas_dgemm(CblasColMajor, CblasNoTrans, CblasTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
inline void gemm_nt(I m, I n, I k, cplx alpha, const cplx* a, I lda, const cplx* b, I ldb, cplx beta, cplx* c,
                    I ldc) {
  cblas_zgemm(CblasColMajor, CblasNoTrans, CblasTrans, m, n, k, &alpha, a, lda, b, ldb, &beta, c, ldc);
}
// B := B L^{-T} with L lower triangular.
inline void trsm_rlt(I m, I n, const double* l, I ldl, double* b, I ldb) {
  cblas_dtrsm(CblasColMajor, CblasRight, CblasLower, CblasTrans, CblasNonUnit, m, n, 1.0, l, ldl, b, ldb);
}
inline void trsm_rlt(I m, I n, const cplx* l, I ldl, cplx* b, I ldb) {
  const cplx one(1.0);
  cblas_ztrsm(CblasColMajor, CblasRight, CblasLower, CblasTrans, CblasNonUnit, m, n, &one, l, ldl, b, ldb);
}
// C := C - A A^T, lower triangle.
inline void syrk_sub(I n, I k, const double* a, I lda, double* c, I ldc) {
  cblas_dsyrk(CblasColMajor, CblasLower, CblasNoTrans, n, k, -1.0, a, lda, 1.0, c, ldc);
}
inline void syrk_sub(I n, I k, const cplx* a, I lda, cplx* c, I ldc) {
  const cplx one(1.0), minus_one(-1.0);
  cblas_zsyrk(CblasColMajor, CblasLower, CblasNoTrans, n, k, &minus_one, a, lda, &one, c, ldc);
}
inline void trsv(bool trans, I n, const double* l, I ldl, double* x) {
  cblas_dtrsv(CblasColMajor, CblasLower, trans ? CblasTrans : CblasNoTrans, CblasNonUnit, n, l, ldl, x, 1);
}
inline void trsv(bool trans, I n, const cplx* l, I ldl, cplx* x) {
  cblas_ztrsv(CblasColMajor, CblasLower, trans ? CblasTrans : CblasNoTrans, CblasNonUnit, n, l, ldl, x, 1);
}
// y := alpha op(A) x + beta y
inline void gemv(bool trans, I m, I n, double alpha, const double* a, I lda, const double* x, double beta,
                 double* y) {
  cblas_dgemv(CblasColMajor, trans ? CblasTrans : CblasNoTrans, m, n, alpha, a, lda, x, 1, beta, y, 1);
}
inline void gemv(bool trans, I m, I n, cplx alpha, const cplx* a, I lda, const cplx* x, cplx beta, cplx* y) {
  cblas_zgemv(CblasColMajor, trans ? CblasTrans : CblasNoTrans, m, n, &alpha, a, lda, x, 1, &beta, y, 1);
}

}  // namespace blas

template <class Scalar>
class SymmetricCholesky {
 public:
  using Index = SuiteSparse_long;

  /// `ap`, `ai`, `ax`: full (both triangles) column storage of a structurally
  /// and numerically symmetric n x n matrix. Throws TinyPivot if a pivot falls
  /// below `pivot_tolerance` times the largest diagonal entry.
  SymmetricCholesky(Index n, const Index* ap, const Index* ai, const Scalar* ax, double pivot_tolerance) : n_(n) {
    analyze(ap, ai);
    factor(ap, ai, ax, pivot_tolerance);
  }

  /// Overwrites `b` with the solution.
  void solve(Scalar* b) const {
    std::vector<Scalar> x(n_), tmp;
    for (Index k = 0; k < n_; ++k) x[k] = b[perm_[k]];
    for (Index s = 0; s < nsuper_; ++s) {
      const Index k1 = super_[s], nscol = super_[s + 1] - k1;
      const Index psi = pi_[s], nsrow = pi_[s + 1] - psi, nrest = nsrow - nscol;
      const Scalar* l = &lx_[px_[s]];
      blas::trsv(false, nscol, l, nsrow, &x[k1]);
      if (nrest == 0) continue;
      tmp.assign(nrest, Scalar(0));
      blas::gemv(false, nrest, nscol, Scalar(1), l + nscol, nsrow, &x[k1], Scalar(0), tmp.data());
      for (Index i = 0; i < nrest; ++i) x[ls_[psi + nscol + i]] -= tmp[i];
    }
    for (Index s = nsuper_ - 1; s >= 0; --s) {
      const Index k1 = super_[s], nscol = super_[s + 1] - k1;
      const Index psi = pi_[s], nsrow = pi_[s + 1] - psi, nrest = nsrow - nscol;
      const Scalar* l = &lx_[px_[s]];
      if (nrest > 0) {
        tmp.resize(nrest);
        for (Index i = 0; i < nrest; ++i) tmp[i] = x[ls_[psi + nscol + i]];
        blas::gemv(true, nrest, nscol, Scalar(-1), l + nscol, nsrow, tmp.data(), Scalar(1), &x[k1]);
      }
      blas::trsv(true, nscol, l, nsrow, &x[k1]);
    }
    for (Index k = 0; k < n_; ++k) b[perm_[k]] = x[k];
  }

  std::size_t factor_entries() const { return lx_.size(); }

 private:
  void analyze(const Index* ap, const Index* ai) {
    cholmod_common c;
    cholmod_l_start(&c);
    c.nmethods = 1;
    c.method[0].ordering = CHOLMOD_METIS;
    c.postorder = 1;
    c.supernodal = CHOLMOD_SUPERNODAL;
    c.print = 0;
    cholmod_sparse a{};
    a.nrow = a.ncol = static_cast<std::size_t>(n_);
    a.nzmax = static_cast<std::size_t>(ap[n_]);
    a.p = const_cast<Index*>(ap);
    a.i = const_cast<Index*>(ai);
    a.stype = -1;
    a.itype = CHOLMOD_LONG;
    a.xtype = CHOLMOD_PATTERN;
    a.dtype = CHOLMOD_DOUBLE;
    a.sorted = 1;
    a.packed = 1;
    cholmod_factor* f = cholmod_l_analyze(&a, &c);
    if (!f || !f->is_super) {
      if (f) cholmod_l_free_factor(&f, &c);
      cholmod_l_finish(&c);
      throw TinyPivot("supernodal analysis unavailable");
    }
    nsuper_ = static_cast<Index>(f->nsuper);
    const auto* super = static_cast<const Index*>(f->super);
    const auto* pi = static_cast<const Index*>(f->pi);
    const auto* px = static_cast<const Index*>(f->px);
    const auto* s = static_cast<const Index*>(f->s);
    const auto* perm = static_cast<const Index*>(f->Perm);
    super_.assign(super, super + nsuper_ + 1);
    pi_.assign(pi, pi + nsuper_ + 1);
    px_.assign(px, px + nsuper_ + 1);
    ls_.assign(s, s + pi_[nsuper_]);
    perm_.assign(perm, perm + n_);
    cholmod_l_free_factor(&f, &c);
    cholmod_l_finish(&c);
  }

  void factor(const Index* ap, const Index* ai, const Scalar* ax, double pivot_tolerance) {
    std::vector<Index> pinv(n_);
    for (Index k = 0; k < n_; ++k) pinv[perm_[k]] = k;
    double dmax = 0.0;
    for (Index j = 0; j < n_; ++j)
      for (Index p = ap[j]; p < ap[j + 1]; ++p)
        if (ai[p] == j) dmax = std::max(dmax, std::abs(ax[p]));
    const double tiny = pivot_tolerance * dmax;

    std::vector<Index> super_of(n_);
    for (Index s = 0; s < nsuper_; ++s)
      for (Index k = super_[s]; k < super_[s + 1]; ++k) super_of[k] = s;

    lx_.assign(static_cast<std::size_t>(px_[nsuper_]), Scalar(0));
    std::vector<Index> map(n_, -1), head(nsuper_, -1), next(nsuper_, -1), lpos(nsuper_, 0);
    std::vector<Scalar> update;

    for (Index s = 0; s < nsuper_; ++s) {
      const Index k1 = super_[s], k2 = super_[s + 1], nscol = k2 - k1;
      const Index psi = pi_[s], nsrow = pi_[s + 1] - psi;
      Scalar* l = &lx_[px_[s]];
      for (Index k = 0; k < nsrow; ++k) map[ls_[psi + k]] = k;

      for (Index k = k1; k < k2; ++k) {
        const Index j = perm_[k];
        for (Index p = ap[j]; p < ap[j + 1]; ++p) {
          const Index i = pinv[ai[p]];
          if (i >= k) l[(k - k1) * nsrow + map[i]] += ax[p];
        }
      }

      for (Index d = head[s]; d != -1;) {
        const Index dnext = next[d];
        const Index pdi = pi_[d], ndrow = pi_[d + 1] - pdi;
        const Index ndcol = super_[d + 1] - super_[d];
        const Index pdi1 = pdi + lpos[d];
        Index pdi2 = pdi1;
        while (pdi2 < pdi + ndrow && ls_[pdi2] < k2) ++pdi2;
        const Index ndrow1 = pdi2 - pdi1, ndrow2 = pdi + ndrow - pdi1;
        const Scalar* ld = &lx_[px_[d]] + (pdi1 - pdi);
        update.resize(static_cast<std::size_t>(ndrow2 * ndrow1));
        blas::gemm_nt(ndrow2, ndrow1, ndcol, Scalar(1), ld, ndrow, ld, ndrow, Scalar(0), update.data(), ndrow2);
        for (Index jj = 0; jj < ndrow1; ++jj) {
          Scalar* col = l + (ls_[pdi1 + jj] - k1) * nsrow;
          for (Index ii = jj; ii < ndrow2; ++ii) col[map[ls_[pdi1 + ii]]] -= update[jj * ndrow2 + ii];
        }
        lpos[d] = pdi2 - pdi;
        if (lpos[d] < ndrow) {
          const Index t = super_of[ls_[pdi2]];
          next[d] = head[t];
          head[t] = d;
        }
        d = dnext;
      }

      dense_factor(nscol, l, nsrow, tiny);
      if (nsrow > nscol) {
        blas::trsm_rlt(nsrow - nscol, nscol, l, nsrow, l + nscol, nsrow);
        lpos[s] = nscol;
        const Index t = super_of[ls_[psi + nscol]];
        next[s] = head[t];
        head[t] = s;
      }
    }
  }

  static bool acceptable(double d, double tiny) { return d > tiny && std::isfinite(d); }
  static bool acceptable(const cplx& d, double tiny) { return std::abs(d) > tiny && std::isfinite(std::abs(d)); }

  static void dense_factor(Index n, Scalar* a, Index lda, double tiny) {
    if (n <= 32) {
      for (Index j = 0; j < n; ++j) {
        Scalar& d = a[j * lda + j];
        if (!acceptable(d, tiny)) throw TinyPivot("tiny pivot");
        d = std::sqrt(d);
        for (Index i = j + 1; i < n; ++i) a[j * lda + i] /= d;
        for (Index k = j + 1; k < n; ++k) {
          const Scalar lkj = a[j * lda + k];
          for (Index i = k; i < n; ++i) a[k * lda + i] -= a[j * lda + i] * lkj;
        }
      }
      return;
    }
    const Index n1 = n / 2, n2 = n - n1;
    dense_factor(n1, a, lda, tiny);
    blas::trsm_rlt(n2, n1, a, lda, a + n1, lda);
    blas::syrk_sub(n2, n1, a + n1, lda, a + n1 * lda + n1, lda);
    dense_factor(n2, a + n1 * lda + n1, lda, tiny);
  }

  Index n_;
  Index nsuper_ = 0;
  std::vector<Index> super_, pi_, px_, ls_, perm_;
  std::vector<Scalar> lx_;
};

}  // namespace mhmm::detail
