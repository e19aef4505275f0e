#pragma once

// Discrete cell problems on the periodic unit cell: the divergence-regularized
// curl problem (real, one per unit load e_k) and the gradient problem
// (complex), together with the homogenized 3x3 tensors.

#include <memory>
#include <string>
#include <vector>

#include "mhmm/coeffs.hpp"
#include "mhmm/fespace.hpp"
#include "mhmm/linsolve.hpp"
#include "mhmm/mesh.hpp"
#include "mhmm/parallel.hpp"

namespace mhmm {

/// Correctors of one cell problem set. Column k of `vector_dofs` is the
/// vector corrector for e_k (DOF 3m + c is component c at master m); column k
/// of `scalar_dofs` is the scalar corrector for e_k. Per micro tet, the
/// derivatives are cached: curl(S).col(k) = curl v_k, div(S)[k] = div v_k,
/// grad(S).col(k) = grad v_k.
struct CellSolution {
  Eigen::MatrixXd vector_dofs;
  Eigen::MatrixXcd scalar_dofs;
  Mat3 mhom = Mat3::Zero();
  CMat3 khom = CMat3::Zero();
  double mu_mean = 0.0;    // int_Y mu_h
  cplx kappa_mean = 0.0;   // int_Y kappa_h
  std::vector<Mat3> curl;
  std::vector<Vec3> div;
  std::vector<CMat3> grad;
  const SampledCoefficients::Row* coefficients = nullptr;
};

namespace detail {

inline std::string element_label(int j) { return j < 0 ? std::string() : " (macro element " + std::to_string(j) + ")"; }

/// Solves a bordered zero-mean system with `comps` components per master and
/// one multiplier per component. The periodic operator only has constants in
/// its kernel and the loads are orthogonal to them, so pinning master 0 of
/// each component and shifting by the weighted mean gives the same solution
/// without the indefinite border.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_zero_mean(
    const SparseSystem<Scalar>& bordered, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& rhs,
    int comps, const std::vector<double>& weights, SymmetryTag tag) {
  using Block = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const int n = comps * static_cast<int>(weights.size());
  std::vector<int> reduced(n);
  for (int i = 0, r = 0; i < n; ++i) reduced[i] = i < comps ? -1 : r++;
  SparseSystem<Scalar> sys(n - comps, tag, bordered.label());
  const auto& a = bordered.matrix();
  for (Eigen::Index col = 0; col < n; ++col) {
    if (reduced[col] < 0) continue;
    for (typename SparseSystem<Scalar>::Matrix::InnerIterator it(a, col); it; ++it)
      if (it.row() < n && reduced[it.row()] >= 0) sys.add(reduced[it.row()], reduced[col], it.value());
  }
  sys.compress();
  Block b(n - comps, rhs.cols());
  for (int i = comps; i < n; ++i) b.row(reduced[i]) = rhs.row(i);
  Factorization<Scalar> f(sys);
  const Block x = f.solve(b);
  Block out = Block::Zero(n, rhs.cols());
  for (int i = comps; i < n; ++i) out.row(i) = x.row(reduced[i]);
  double total = 0.0;
  for (double w : weights) total += w;
  for (int c = 0; c < comps; ++c)
    for (Eigen::Index k = 0; k < rhs.cols(); ++k) {
      Scalar mean(0);
      for (std::size_t m = 0; m < weights.size(); ++m) mean += weights[m] * out(comps * m + c, k);
      mean /= total;
      for (std::size_t m = 0; m < weights.size(); ++m) out(comps * m + c, k) -= mean;
    }
  return out;
}

}  // namespace detail

/// Bordered real system of the curl cell problem: curl-curl weighted by mu_h plus
/// unit div-div, three Lagrange rows imposing zero mean per component.
inline SparseSystem<double> assemble_curl_cell(const std::vector<double>& mu,
                                               const PeriodicMicroMesh& micro,
                                               const PeriodicScalarSpace& space,
                                               Eigen::MatrixXd* rhs) {
  const int nm = micro.num_masters;
  SparseSystem<double> sys(3 * nm + 3, SymmetryTag::real_symmetric, "curl cell");
  if (rhs) *rhs = Eigen::MatrixXd::Zero(3 * nm + 3, 3);
  for (std::size_t t = 0; t < micro.num_tets(); ++t) {
    const auto loc = vector_p1_local_matrices(micro.geometry[t], mu[t]);
    const auto mt = micro.master_tet(static_cast<int>(t));
    for (int i = 0; i < 12; ++i) {
      const int gi = 3 * mt[i / 3] + i % 3;
      for (int j = 0; j < 12; ++j) {
        const int gj = 3 * mt[j / 3] + j % 3;
        sys.add(gi, gj, loc.curlcurl(i, j) + loc.divdiv(i, j));
      }
      if (rhs) rhs->row(gi) += loc.rhs.row(i);
    }
  }
  const auto& w = space.mean_weights();
  for (int m = 0; m < nm; ++m)
    for (int c = 0; c < 3; ++c) {
      sys.add(3 * nm + c, 3 * m + c, w[m]);
      sys.add(3 * m + c, 3 * nm + c, w[m]);
    }
  sys.compress();
  return sys;
}

/// Bordered complex system of the gradient cell problem with one zero-mean row.
inline SparseSystem<cplx> assemble_grad_cell(const std::vector<cplx>& kappa,
                                             const PeriodicMicroMesh& micro,
                                             const PeriodicScalarSpace& space,
                                             Eigen::MatrixXcd* rhs) {
  const int nm = micro.num_masters;
  SparseSystem<cplx> sys(nm + 1, SymmetryTag::complex_symmetric, "gradient cell");
  if (rhs) *rhs = Eigen::MatrixXcd::Zero(nm + 1, 3);
  for (std::size_t t = 0; t < micro.num_tets(); ++t) {
    const auto loc = p1_local_matrices(micro.geometry[t], kappa[t]);
    const auto mt = micro.master_tet(static_cast<int>(t));
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) sys.add(mt[a], mt[b], loc.stiffness(a, b));
      if (rhs) rhs->row(mt[a]) -= loc.coupling.row(a);
    }
  }
  const auto& w = space.mean_weights();
  for (int m = 0; m < nm; ++m) {
    sys.add(nm, m, w[m]);
    sys.add(m, nm, w[m]);
  }
  sys.compress();
  return sys;
}

/// Fills the vector correctors, their cached curls/divergences and Mhom.
inline void solve_curl_cells(const SampledCoefficients::Row& row, const PeriodicMicroMesh& micro,
                             CellSolution& out, int element = -1) {
  const PeriodicScalarSpace space(micro);
  Eigen::MatrixXd rhs;
  auto sys = assemble_curl_cell(row.mu_inv, micro, space, &rhs);
  try {
    out.vector_dofs = detail::solve_zero_mean(sys, rhs, 3, space.mean_weights(), SymmetryTag::real_spd);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(e.what()) + detail::element_label(element));
  }
  out.curl.assign(micro.num_tets(), Mat3::Zero());
  out.div.assign(micro.num_tets(), Vec3::Zero());
  out.mhom.setZero();
  out.mu_mean = 0.0;
  for (std::size_t t = 0; t < micro.num_tets(); ++t) {
    const auto& g = micro.geometry[t];
    const auto mt = micro.master_tet(static_cast<int>(t));
    Mat3 curl = Mat3::Zero();
    Vec3 div = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
      for (int a = 0; a < 4; ++a) {
        const Vec3 u = out.vector_dofs.col(k).segment<3>(3 * mt[a]);
        curl.col(k) += g.grad[a].cross(u);
        div[k] += g.grad[a].dot(u);
      }
    }
    out.curl[t] = curl;
    out.div[t] = div;
    const double w = row.mu_inv[t] * g.volume;
    out.mhom += w * (Mat3::Identity() + curl);
    out.mu_mean += w;
  }
}

/// Fills the scalar correctors, their cached gradients and Khom.
inline void solve_grad_cells(const SampledCoefficients::Row& row, const PeriodicMicroMesh& micro,
                             CellSolution& out, int element = -1) {
  const PeriodicScalarSpace space(micro);
  Eigen::MatrixXcd rhs;
  auto sys = assemble_grad_cell(row.kappa, micro, space, &rhs);
  try {
    out.scalar_dofs = detail::solve_zero_mean(sys, rhs, 1, space.mean_weights(), SymmetryTag::complex_symmetric);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(e.what()) + detail::element_label(element));
  }
  out.grad.assign(micro.num_tets(), CMat3::Zero());
  out.khom.setZero();
  out.kappa_mean = 0.0;
  for (std::size_t t = 0; t < micro.num_tets(); ++t) {
    const auto& g = micro.geometry[t];
    const auto mt = micro.master_tet(static_cast<int>(t));
    CMat3 grad = CMat3::Zero();
    for (int k = 0; k < 3; ++k)
      for (int a = 0; a < 4; ++a) grad.col(k) += out.scalar_dofs(mt[a], k) * g.grad[a].cast<cplx>();
    out.grad[t] = grad;
    const cplx w = row.kappa[t] * g.volume;
    out.khom += w * (CMat3::Identity() + grad);
    out.kappa_mean += w;
  }
}

/// Cell solutions for every macro element. Elements sharing a coefficient row
/// (x-independent presets) share one solution.
struct CellCorrectorSet {
  std::vector<std::shared_ptr<const CellSolution>> solutions;
  std::vector<int> solution_of;  // macro tet -> solution index
  const PeriodicMicroMesh* micro = nullptr;

  const CellSolution& operator[](int j) const { return *solutions[solution_of[j]]; }
  std::size_t num_macro() const { return solution_of.size(); }
};

inline CellCorrectorSet homogenize_all(const SampledCoefficients& sampled,
                                       const PeriodicMicroMesh& micro, int jobs = 1) {
  CellCorrectorSet set;
  set.micro = &micro;
  std::vector<std::shared_ptr<CellSolution>> sols(sampled.rows.size());
  // Row r first appears at the lowest macro index with row_of == r.
  std::vector<int> first_element(sampled.rows.size(), -1);
  for (std::size_t j = 0; j < sampled.row_of.size(); ++j)
    if (first_element[sampled.row_of[j]] < 0) first_element[sampled.row_of[j]] = static_cast<int>(j);
  parallel_for(sampled.rows.size(), jobs, [&](std::size_t r) {
    auto s = std::make_shared<CellSolution>();
    s->coefficients = &sampled.rows[r];
    solve_curl_cells(sampled.rows[r], micro, *s, first_element[r]);
    solve_grad_cells(sampled.rows[r], micro, *s, first_element[r]);
    sols[r] = std::move(s);
  });
  set.solutions.assign(sols.begin(), sols.end());
  set.solution_of = sampled.row_of;
  return set;
}

}  // namespace mhmm
