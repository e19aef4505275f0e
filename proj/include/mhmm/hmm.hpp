#pragma once

// Macro problem with homogenized tensors, corrector recombination, the
// composite field E_HMM and the coupled two-scale system.

#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "mhmm/cell.hpp"
#include "mhmm/coeffs.hpp"
#include "mhmm/fespace.hpp"
#include "mhmm/linsolve.hpp"
#include "mhmm/mesh.hpp"

namespace mhmm {

// ---------------------------------------------------------------------------
// Sources

/// Divergence-free right-hand sides.
struct SourceField {
  std::string name;
  Params params;
  VectorFieldFn f;
  bool divergence_free = true;
};

/// Presets:
///   constant  (x_re, x_im, y_re, y_im, z_re, z_im), default e_1
///   sin_e1    A sin(pi s_2) sin(pi s_3) e_1 with s = (x - lo) / extent, A = a_re + i a_im
inline SourceField make_source(const std::string& name, const Params& params, const Box& box = Box{}) {
  using detail::param;
  SourceField s;
  s.name = name;
  s.params = params;
  if (name == "constant") {
    detail::require_known_params(name, params, {"x_re", "x_im", "y_re", "y_im", "z_re", "z_im"});
    const CVec3 v(cplx(param(params, "x_re", 1.0), param(params, "x_im", 0.0)),
                  cplx(param(params, "y_re", 0.0), param(params, "y_im", 0.0)),
                  cplx(param(params, "z_re", 0.0), param(params, "z_im", 0.0)));
    s.f = [v](const Vec3&) { return v; };
  } else if (name == "sin_e1") {
    detail::require_known_params(name, params, {"a_re", "a_im"});
    const cplx a(param(params, "a_re", 1.0), param(params, "a_im", 0.0));
    const Vec3 lo = box.lo;
    const Vec3 ext = box.extent();
    s.f = [a, lo, ext](const Vec3& x) {
      const double s2 = (x[1] - lo[1]) / ext[1];
      const double s3 = (x[2] - lo[2]) / ext[2];
      return CVec3(a * std::sin(std::numbers::pi * s2) * std::sin(std::numbers::pi * s3), 0.0, 0.0);
    };
  } else {
    throw Error(ErrorKind::invalid_argument, "unknown source preset '" + name + "'");
  }
  return s;
}

/// Source of the manufactured solution sin(pi x_2) sin(pi x_3) e_1 on the unit
/// cube for mu^{-1} = 1, kappa = kappa0.
inline SourceField mms_source(cplx kappa0) {
  const cplx a = 2.0 * std::numbers::pi * std::numbers::pi - kappa0;
  return make_source("sin_e1", {{"a_re", a.real()}, {"a_im", a.imag()}});
}

inline CVec3 mms_exact(const Vec3& x) {
  return CVec3(std::sin(std::numbers::pi * x[1]) * std::sin(std::numbers::pi * x[2]), 0.0, 0.0);
}

inline CVec3 mms_exact_curl(const Vec3& x) {
  const double pi = std::numbers::pi;
  // curl (u e_1) = (0, d_3 u, -d_2 u)
  return CVec3(0.0, pi * std::sin(pi * x[1]) * std::cos(pi * x[2]),
               -pi * std::cos(pi * x[1]) * std::sin(pi * x[2]));
}

// ---------------------------------------------------------------------------
// Element matrices

/// Local 6x6 matrix of the homogenized macro form on one tet:
///   |T| curl phi_a . Mhom curl phi_b
///   - kbar int_T phi_a . phi_b
///   - |T| phi_a(x_T) . (Khom - kbar I) phi_b(x_T)
/// where kbar = int_Y kappa_h. With x-constant coefficients the last two terms
/// combine to the mass with matrix weight Khom.
inline CMat6 macro_element_matrix(const TetGeometry& g, const Signs6& sign, const Mat3& mhom,
                                  const CMat3& khom, cplx kappa_mean) {
  const auto unit = n0_local_matrices(g, sign, 1.0);
  return n0_curlcurl_tensor(g, sign, mhom.cast<cplx>()) - kappa_mean * unit.mass -
         n0_barycenter_mass_tensor(g, sign, khom - kappa_mean * CMat3::Identity());
}

/// int_T f . phi_a by the degree-4 rule.
inline Eigen::Matrix<cplx, 6, 1> load_vector(const TetGeometry& g, const Signs6& sign,
                                             const VectorFieldFn& f) {
  Eigen::Matrix<cplx, 6, 1> out = Eigen::Matrix<cplx, 6, 1>::Zero();
  const auto& rule = tet_rule(4);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const CVec3 fx = f(g.point(rule.points[q]));
    for (int a = 0; a < 6; ++a) {
      out[a] += rule.weights[q] * g.volume * (whitney_value(g, sign, a, rule.points[q]).cast<cplx>().transpose() * fx)(0);
    }
  }
  return out;
}

struct LinearSystem {
  SparseSystem<cplx> system;
  Eigen::VectorXcd rhs;
};

namespace detail {

template <class LocalMatrix>
LinearSystem assemble_edges(const EdgeSpace& space, const VectorFieldFn* f, const std::string& label,
                            LocalMatrix&& local) {
  const auto& mesh = space.mesh();
  LinearSystem out{SparseSystem<cplx>(space.num_dofs(), SymmetryTag::complex_symmetric, label),
                   Eigen::VectorXcd::Zero(space.num_dofs())};
  out.system.triplets().reserve(mesh.num_tets() * 36);
  for (int t = 0; t < static_cast<int>(mesh.num_tets()); ++t) {
    const auto d = space.local_dofs(t);
    const CMat6 a = local(t);
    for (int i = 0; i < 6; ++i) {
      if (d[i] < 0) continue;
      for (int j = 0; j < 6; ++j)
        if (d[j] >= 0) out.system.add(d[i], d[j], a(i, j));
    }
    if (f) {
      const auto b = load_vector(mesh.geometry[t], space.signs(t), *f);
      for (int i = 0; i < 6; ++i)
        if (d[i] >= 0) out.rhs[d[i]] += b[i];
    }
  }
  out.system.compress();
  return out;
}

}  // namespace detail

/// Homogenized macro system; boundary edges are eliminated.
inline LinearSystem assemble_macro(const EdgeSpace& space, const CellCorrectorSet& cells,
                                   const VectorFieldFn& f) {
  if (cells.num_macro() != space.mesh().num_tets()) {
    throw Error(ErrorKind::invalid_argument, "assemble_macro: cell tensors missing for some elements");
  }
  return detail::assemble_edges(space, &f, "macro", [&](int t) {
    const auto& c = cells[t];
    return macro_element_matrix(space.mesh().geometry[t], space.signs(t), c.mhom, c.khom, c.kappa_mean);
  });
}

/// Single-scale N0 system with elementwise constant mu^{-1} and kappa.
inline LinearSystem assemble_nedelec(const EdgeSpace& space, const std::vector<double>& mu_inv,
                                     const std::vector<cplx>& kappa, const VectorFieldFn& f,
                                     const std::string& label = "single-scale") {
  return detail::assemble_edges(space, &f, label, [&](int t) {
    const auto loc = n0_local_matrices(space.mesh().geometry[t], space.signs(t), 1.0);
    return CMat6(mu_inv[t] * loc.curlcurl - kappa[t] * loc.mass);
  });
}

// ---------------------------------------------------------------------------
// HMM solution

struct HmmSolution {
  std::shared_ptr<const MacroMesh> macro;
  std::shared_ptr<const PeriodicMicroMesh> micro;
  std::shared_ptr<const SampledCoefficients> samples;
  std::shared_ptr<const CellCorrectorSet> cells;
  std::shared_ptr<const EdgeSpace> space;
  Eigen::VectorXcd dofs;
  std::vector<CVec3> curl;    // c_j = curl E_H on T_j
  std::vector<CVec3> center;  // b_j = E_H(x_j)
  double delta = 1.0;
  double residual = 0.0;

  const CellSolution& cell(int j) const { return (*cells)[j]; }
};

/// Recomputes c_j and b_j from the macro DOFs.
inline void recombine_correctors(HmmSolution& s) {
  const std::size_t nt = s.macro->num_tets();
  s.curl.resize(nt);
  s.center.resize(nt);
  for (int j = 0; j < static_cast<int>(nt); ++j) {
    s.curl[j] = s.space->curl(j, s.dofs);
    s.center[j] = s.space->value(j, s.dofs, {0.25, 0.25, 0.25, 0.25});
  }
}

inline HmmSolution solve_hmm(std::shared_ptr<const MacroMesh> macro,
                             std::shared_ptr<const PeriodicMicroMesh> micro,
                             const CoefficientField& coefficients, const SourceField& source,
                             double delta, int jobs = 1) {
  if (!(delta > 0.0)) throw Error(ErrorKind::invalid_argument, "delta must be positive");
  HmmSolution s;
  s.macro = macro;
  s.micro = micro;
  s.delta = delta;
  s.samples = std::make_shared<const SampledCoefficients>(sample(coefficients, *macro, *micro));
  try {
    s.cells = std::make_shared<const CellCorrectorSet>(homogenize_all(*s.samples, *micro, jobs));
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("cell stage: ") + e.what());
  }
  s.space = std::make_shared<const EdgeSpace>(*macro);
  auto sys = assemble_macro(*s.space, *s.cells, source.f);
  try {
    Factorization<cplx> f(sys.system);
    s.dofs = f.solve(sys.rhs);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("macro stage: ") + e.what());
  }
  s.residual = relative_residual(sys.system, s.dofs, sys.rhs);
  recombine_correctors(s);
  return s;
}

/// Vector corrector K_1 = sum_k (c_j)_k v_k at micro point (tet i, barycentric l).
inline CVec3 corrector_k1(const HmmSolution& s, int j, int i, const std::array<double, 4>& l) {
  const auto& c = s.cell(j);
  const auto mt = s.micro->master_tet(i);
  Vec3 v[3];
  for (int k = 0; k < 3; ++k) {
    v[k].setZero();
    for (int a = 0; a < 4; ++a) v[k] += l[a] * c.vector_dofs.col(k).segment<3>(3 * mt[a]);
  }
  CVec3 out = CVec3::Zero();
  for (int k = 0; k < 3; ++k) out += s.curl[j][k] * v[k].cast<cplx>();
  return out;
}

/// E_HMM(x) = E_H(x) + delta K_1(x, x/delta) + grad_y K_2(x, x/delta).
inline CVec3 evaluate_ehmm(const HmmSolution& s, const Vec3& x) {
  const auto [j, lx] = s.macro->locate(x);
  const auto [i, ly] = s.micro->locate(x / s.delta);
  const auto& c = s.cell(j);
  return s.space->value(j, s.dofs, lx) + s.delta * corrector_k1(s, j, i, ly) + c.grad[i] * s.center[j];
}

/// curl E_H on T_j plus curl_y K_1(x_j, x/delta).
inline CVec3 evaluate_ehmm_curl(const HmmSolution& s, const Vec3& x) {
  const auto [j, lx] = s.macro->locate(x);
  (void)lx;
  const int i = s.micro->locate(x / s.delta).first;
  return s.curl[j] + s.cell(j).curl[i].cast<cplx>() * s.curl[j];
}

// ---------------------------------------------------------------------------
// Coupled two-scale system

/// Unknown layout: macro DOFs, then per element j the block
/// [3 nm vector corrector DOFs, 3 multipliers, nm scalar corrector DOFs, 1 multiplier].
struct CoupledSystem {
  SparseSystem<cplx> system;
  Eigen::VectorXcd rhs;
  int num_macro = 0;
  int block = 0;

  int offset(int j) const { return num_macro + j * block; }
};

inline constexpr long kCoupledDimensionGuard = 200000;

inline CoupledSystem assemble_coupled_two_scale(const EdgeSpace& space, const PeriodicMicroMesh& micro,
                                                const SampledCoefficients& samples,
                                                const VectorFieldFn& f) {
  const auto& mesh = space.mesh();
  const int nm = micro.num_masters;
  const int block = 4 * nm + 4;
  const long dim = space.num_dofs() + static_cast<long>(mesh.num_tets()) * block;
  if (dim > kCoupledDimensionGuard) {
    throw Error(ErrorKind::dimension_guard, "coupled two-scale system has " + std::to_string(dim) +
                                                " unknowns (limit " +
                                                std::to_string(kCoupledDimensionGuard) + ")");
  }
  CoupledSystem out{SparseSystem<cplx>(static_cast<int>(dim), SymmetryTag::complex_symmetric, "coupled two-scale"),
                    Eigen::VectorXcd::Zero(dim), space.num_dofs(), block};
  const PeriodicScalarSpace pspace(micro);
  const auto& w = pspace.mean_weights();
  auto& sys = out.system;
  for (int j = 0; j < static_cast<int>(mesh.num_tets()); ++j) {
    const auto& g = mesh.geometry[j];
    const auto& sign = space.signs(j);
    const auto d = space.local_dofs(j);
    const auto& row = samples[j];
    const int o1 = out.offset(j);
    const int o2 = o1 + 3 * nm + 3;
    const double vol = g.volume;
    std::array<Vec3, 6> curl_phi;
    std::array<Vec3, 6> phi_c;
    for (int a = 0; a < 6; ++a) {
      curl_phi[a] = whitney_curl(g, sign, a);
      phi_c[a] = whitney_value(g, sign, a, {0.25, 0.25, 0.25, 0.25});
    }
    double mu_mean = 0.0;
    cplx kappa_mean = 0.0;
    for (std::size_t i = 0; i < micro.num_tets(); ++i) {
      mu_mean += row.mu_inv[i] * micro.geometry[i].volume;
      kappa_mean += row.kappa[i] * micro.geometry[i].volume;
    }
    // Macro-macro block.
    const auto unit = n0_local_matrices(g, sign, 1.0);
    const CMat6 aee = mu_mean * unit.curlcurl - kappa_mean * unit.mass;
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b)
        if (d[a] >= 0 && d[b] >= 0) sys.add(d[a], d[b], aee(a, b));
    // Corrector blocks and their coupling to the macro DOFs.
    for (std::size_t i = 0; i < micro.num_tets(); ++i) {
      const auto& gy = micro.geometry[i];
      const auto mt = micro.master_tet(static_cast<int>(i));
      const auto vloc = vector_p1_local_matrices(gy, row.mu_inv[i]);
      for (int p = 0; p < 12; ++p) {
        const int gp = o1 + 3 * mt[p / 3] + p % 3;
        for (int q = 0; q < 12; ++q) {
          sys.add(gp, o1 + 3 * mt[q / 3] + q % 3, vol * (vloc.curlcurl(p, q) + vloc.divdiv(p, q)));
        }
        // int mu_h curl phi_a . curl_y beta_p = -curl phi_a . rhs column
        for (int a = 0; a < 6; ++a) {
          if (d[a] < 0) continue;
          const double v = -vol * curl_phi[a].dot(vloc.rhs.row(p).transpose());
          sys.add(gp, d[a], v);
          sys.add(d[a], gp, v);
        }
      }
      const auto sloc = p1_local_matrices(gy, row.kappa[i]);
      for (int p = 0; p < 4; ++p) {
        const int gp = o2 + mt[p];
        for (int q = 0; q < 4; ++q) sys.add(gp, o2 + mt[q], -vol * sloc.stiffness(p, q));
        for (int a = 0; a < 6; ++a) {
          if (d[a] < 0) continue;
          // -|T| phi_a(x_j) . int kappa_h grad beta_p
          const cplx v = -vol * (phi_c[a].cast<cplx>().transpose() * sloc.coupling.row(p).transpose())(0);
          sys.add(gp, d[a], v);
          sys.add(d[a], gp, v);
        }
      }
    }
    for (int m = 0; m < nm; ++m) {
      for (int c = 0; c < 3; ++c) {
        sys.add(o1 + 3 * nm + c, o1 + 3 * m + c, vol * w[m]);
        sys.add(o1 + 3 * m + c, o1 + 3 * nm + c, vol * w[m]);
      }
      sys.add(o2 + nm, o2 + m, -vol * w[m]);
      sys.add(o2 + m, o2 + nm, -vol * w[m]);
    }
    const auto b = load_vector(g, sign, f);
    for (int a = 0; a < 6; ++a)
      if (d[a] >= 0) out.rhs[d[a]] += b[a];
  }
  sys.compress();
  return out;
}

/// Eliminates the corrector unknowns: S = A_EE - A_EK A_KK^{-1} A_KE, as a dense matrix.
inline Eigen::MatrixXcd schur_complement(const CoupledSystem& c) {
  using Matrix = SparseSystem<cplx>::Matrix;
  const Matrix& a = c.system.matrix();
  const int n = c.num_macro;
  const int m = c.system.dim() - n;
  SparseSystem<cplx> kk(m, SymmetryTag::complex_symmetric, "corrector block");
  Eigen::MatrixXcd ake = Eigen::MatrixXcd::Zero(m, n);
  Eigen::MatrixXcd aee = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index col = 0; col < a.outerSize(); ++col) {
    for (Matrix::InnerIterator it(a, col); it; ++it) {
      const auto r = it.row();
      if (col < n && r < n) {
        aee(r, col) = it.value();
      } else if (col < n) {
        ake(r - n, col) = it.value();
      } else if (r >= n) {
        kk.add(static_cast<int>(r - n), static_cast<int>(col - n), it.value());
      }
    }
  }
  kk.compress();
  const Factorization<cplx> f(kk);
  const Eigen::MatrixXcd x = f.solve(ake);
  return aee - ake.transpose() * x;
}

/// Solves the coupled system; returns the full unknown vector.
inline Eigen::VectorXcd solve_coupled(const CoupledSystem& c) {
  const Factorization<cplx> f(c.system);
  return f.solve(c.rhs);
}

}  // namespace mhmm
