#pragma once

// Two-scale energy norm, reference solutions, error triples against nested
// references and the discrete Helmholtz split of a macro error.

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mhmm/hmm.hpp"
#include "mhmm/parallel.hpp"
#include "mhmm/quadrature.hpp"

namespace mhmm {

// ---------------------------------------------------------------------------
// Energy norm

/// The three summands of the two-scale energy norm
///   ||curl u + curl_y u1|| + ||div_y u1|| + ||u + grad_y u2||  over Omega x Y.
struct EnergyParts {
  double curl = 0.0;
  double div = 0.0;
  double l2 = 0.0;

  double total() const { return curl + div + l2; }
};

/// A field (u, u1, u2) on Omega x Y. The macro part is given per macro tet;
/// corrector parts are P1 fields on the micro mesh per macro tet (vector DOF
/// 3m + c, scalar DOF m). Missing callables mean zero.
struct TwoScaleField {
  std::function<CVec3(int j, const Vec3& x)> value;
  std::function<CVec3(int j, const Vec3& x)> curl;
  std::function<Eigen::VectorXcd(int j)> k1;
  std::function<Eigen::VectorXcd(int j)> k2;
  // Polynomial degree of the macro part in x; selects the x rule.
  int x_degree = 1;
};

/// (E_H, K_{h,1}(E_H), K_{h,2}(E_H)) of an HMM solution.
inline TwoScaleField two_scale_field(const HmmSolution& s) {
  TwoScaleField t;
  t.value = [&s](int j, const Vec3& x) {
    return s.space->value(j, s.dofs, s.macro->geometry[j].barycentric(x));
  };
  t.curl = [&s](int j, const Vec3&) { return s.curl[j]; };
  t.k1 = [&s](int j) {
    const Eigen::MatrixXd& v = s.cell(j).vector_dofs;
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.rows());
    for (int k = 0; k < 3; ++k) out += s.curl[j][k] * v.col(k).cast<cplx>();
    return out;
  };
  t.k2 = [&s](int j) { return Eigen::VectorXcd(s.cell(j).scalar_dofs * s.center[j]); };
  return t;
}

/// Tensorized quadrature: a rule exact for the macro part in x times exact
/// integration over each micro tet (corrector derivatives are constant there).
inline EnergyParts energy_norm(const TwoScaleField& t, const MacroMesh& macro,
                               const PeriodicMicroMesh& micro) {
  const auto& rule = tet_rule(std::min(4, std::max(2, 2 * t.x_degree)));
  double s_curl = 0.0, s_div = 0.0, s_l2 = 0.0;
  const std::size_t ns = micro.num_tets();
  std::vector<CVec3> ck1(ns), gk2(ns);
  std::vector<cplx> dk1(ns);
  for (int j = 0; j < static_cast<int>(macro.num_tets()); ++j) {
    const auto& g = macro.geometry[j];
    const Eigen::VectorXcd k1 = t.k1 ? t.k1(j) : Eigen::VectorXcd();
    const Eigen::VectorXcd k2 = t.k2 ? t.k2(j) : Eigen::VectorXcd();
    for (std::size_t i = 0; i < ns; ++i) {
      const auto& gy = micro.geometry[i];
      const auto mt = micro.master_tet(static_cast<int>(i));
      ck1[i].setZero();
      dk1[i] = 0.0;
      gk2[i].setZero();
      for (int a = 0; a < 4; ++a) {
        if (k1.size()) {
          const CVec3 u = k1.segment<3>(3 * mt[a]);
          ck1[i] += cross(u, gy.grad[a]) * -1.0;
          dk1[i] += (gy.grad[a].cast<cplx>().transpose() * u)(0);
        }
        if (k2.size()) gk2[i] += k2[mt[a]] * gy.grad[a].cast<cplx>();
      }
    }
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec3 x = g.point(rule.points[q]);
      const CVec3 u = t.value ? t.value(j, x) : CVec3::Zero();
      const CVec3 cu = t.curl ? t.curl(j, x) : CVec3::Zero();
      const double w = rule.weights[q] * g.volume;
      for (std::size_t i = 0; i < ns; ++i) {
        const double v = micro.geometry[i].volume;
        s_curl += w * v * (cu + ck1[i]).squaredNorm();
        s_div += w * v * std::norm(dk1[i]);
        s_l2 += w * v * (u + gk2[i]).squaredNorm();
      }
    }
  }
  return {std::sqrt(s_curl), std::sqrt(s_div), std::sqrt(s_l2)};
}

// ---------------------------------------------------------------------------
// Reference solutions

inline constexpr double kDefaultResolutionGuard = 8.0;

struct FineSolution {
  std::shared_ptr<const MacroMesh> mesh;
  std::shared_ptr<const EdgeSpace> space;
  Eigen::VectorXcd dofs;
  double delta = 1.0;
  double residual = 0.0;
};

/// Single-scale solve of the oscillatory problem with mu^{-1}(x, x/delta) and
/// kappa(x, x/delta) sampled at fine tet barycenters. Requires the fine cell
/// size to be at most delta / guard.
inline FineSolution solve_direct_fine(const CoefficientField& coefficients, double delta,
                                      const SourceField& source, std::shared_ptr<const MacroMesh> fine,
                                      double guard = kDefaultResolutionGuard) {
  if (!(delta > 0.0)) throw Error(ErrorKind::invalid_argument, "delta must be positive");
  const double h = fine->box.extent().maxCoeff() / fine->n;
  if (h > delta / guard * (1.0 + 1e-12)) {
    const int required = static_cast<int>(std::ceil(fine->box.extent().maxCoeff() * guard / delta - 1e-9));
    throw Error(ErrorKind::resolution_guard,
                "fine mesh n=" + std::to_string(fine->n) + " does not resolve delta=" + std::to_string(delta) +
                    " (cell size must be <= delta/" + std::to_string(guard) + "; need n >= " +
                    std::to_string(required) + ")");
  }
  const std::size_t nt = fine->num_tets();
  std::vector<double> mu(nt);
  std::vector<cplx> kappa(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const Vec3& x = fine->geometry[t].barycenter;
    const Vec3 y = wrap_to_cell(x / delta);
    mu[t] = coefficients.mu_inv(x, y);
    kappa[t] = coefficients.kappa(x, y);
  }
  FineSolution out;
  out.mesh = fine;
  out.delta = delta;
  out.space = std::make_shared<const EdgeSpace>(*fine);
  auto sys = assemble_nedelec(*out.space, mu, kappa, source.f, "fine single-scale");
  out.dofs = solve_direct(sys.system, sys.rhs);
  out.residual = relative_residual(sys.system, out.dofs, sys.rhs);
  return out;
}

/// ||E_delta - E_HMM||_{L2} by the degree-2 rule on the fine mesh, with
/// E_HMM evaluated by point location.
inline double modeling_error(const FineSolution& fine, const HmmSolution& hmm, int jobs = 1) {
  const auto& rule = tet_rule(2);
  const std::size_t nt = fine.mesh->num_tets();
  std::vector<double> local(nt, 0.0);
  parallel_for(nt, jobs, [&](std::size_t t) {
    const auto& g = fine.mesh->geometry[t];
    double s = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec3 x = g.point(rule.points[q]);
      const CVec3 d = fine.space->value(static_cast<int>(t), fine.dofs, rule.points[q]) - evaluate_ehmm(hmm, x);
      s += rule.weights[q] * g.volume * d.squaredNorm();
    }
    local[t] = s;
  });
  double s = 0.0;
  for (double v : local) s += v;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Manufactured solutions

struct ErrorRow {
  int n = 0;
  double curl = 0.0;  // ||curl (E - E_H)||
  double l2 = 0.0;    // ||E - E_H||
  double hcurl() const { return std::hypot(curl, l2); }
};

/// Errors of an edge field against a closed-form field, degree-4 rule.
inline ErrorRow edge_field_error(const EdgeSpace& space, const Eigen::VectorXcd& dofs,
                                 const VectorFieldFn& exact, const VectorFieldFn& exact_curl) {
  const auto& mesh = space.mesh();
  const auto& rule = tet_rule(4);
  double c = 0.0, l = 0.0;
  for (int t = 0; t < static_cast<int>(mesh.num_tets()); ++t) {
    const auto& g = mesh.geometry[t];
    const CVec3 ch = space.curl(t, dofs);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec3 x = g.point(rule.points[q]);
      const double w = rule.weights[q] * g.volume;
      c += w * (exact_curl(x) - ch).squaredNorm();
      l += w * (exact(x) - space.value(t, dofs, rule.points[q])).squaredNorm();
    }
  }
  return {mesh.n, std::sqrt(c), std::sqrt(l)};
}

struct MmsRow {
  ErrorRow error;          // discrete solution
  ErrorRow interpolation;  // edge interpolant of the exact field
  double theta = 0.0;      // Helmholtz split of the error
  double z = 0.0;
};

/// Least-squares slope of -log(err) against log(n).
inline double observed_rate(const std::vector<int>& ns, const std::vector<double>& errs) {
  const std::size_t m = ns.size();
  if (m < 2 || errs.size() != m) throw Error(ErrorKind::invalid_argument, "observed_rate: need two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = std::log(static_cast<double>(ns[i]));
    const double y = std::log(errs[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return -(m * sxy - sx * sy) / (m * sxx - sx * sx);
}

struct HelmholtzSplit {
  double theta = 0.0;  // ||theta||_{L2}
  double z = 0.0;      // ||e - grad theta||_{L2}
};

/// Uniform refinement of a box mesh by an integer factor.
inline MacroMesh refine(const MacroMesh& mesh, int factor) { return build_box_mesh(mesh.box, mesh.n * factor); }

/// e = E_h[dofs] - exact; theta in P1 with zero boundary values on the
/// split mesh solves (grad theta, grad phi) = (e, grad phi).
inline HelmholtzSplit helmholtz_split(const EdgeSpace& space, const Eigen::VectorXcd& dofs,
                                      const VectorFieldFn& exact, const MacroMesh& split) {
  const auto& macro = space.mesh();
  if (split.n % macro.n != 0 || (split.box.lo - macro.box.lo).norm() > 0 || (split.box.hi - macro.box.hi).norm() > 0) {
    throw Error(ErrorKind::non_nested, "split mesh does not refine the macro mesh");
  }
  const H10Space p1(split);
  const auto& rule = tet_rule(4);
  const std::size_t nt = split.num_tets();
  std::vector<int> parent(nt);
  for (std::size_t t = 0; t < nt; ++t) parent[t] = macro.locate(split.geometry[t].barycenter).first;
  auto error_at = [&](std::size_t t, const Vec3& x) {
    const int j = parent[t];
    CVec3 e = space.value(j, dofs, macro.geometry[j].barycentric(x));
    if (exact) e -= exact(x);
    return e;
  };
  SparseSystem<double> a(p1.num_dofs(), SymmetryTag::real_spd, "Helmholtz split");
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(p1.num_dofs(), 2);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& g = split.geometry[t];
    CVec3 mean = CVec3::Zero();
    for (std::size_t q = 0; q < rule.size(); ++q) mean += rule.weights[q] * g.volume * error_at(t, g.point(rule.points[q]));
    for (int i = 0; i < 4; ++i) {
      const int di = p1.vertex_dof(split.tets[t][i]);
      if (di < 0) continue;
      for (int k = 0; k < 4; ++k) {
        const int dk = p1.vertex_dof(split.tets[t][k]);
        if (dk >= 0) a.add(di, dk, g.volume * g.grad[i].dot(g.grad[k]));
      }
      const cplx r = (g.grad[i].cast<cplx>().transpose() * mean)(0);
      rhs(di, 0) += r.real();
      rhs(di, 1) += r.imag();
    }
  }
  a.compress();
  const Eigen::MatrixXd sol = solve_direct(a, rhs);
  HelmholtzSplit out;
  double th = 0.0, z = 0.0;
  const auto& r2 = tet_rule(2);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& g = split.geometry[t];
    cplx v[4];
    CVec3 grad = CVec3::Zero();
    for (int i = 0; i < 4; ++i) {
      const int d = p1.vertex_dof(split.tets[t][i]);
      v[i] = d >= 0 ? cplx(sol(d, 0), sol(d, 1)) : cplx(0.0);
      grad += v[i] * g.grad[i].cast<cplx>();
    }
    for (std::size_t q = 0; q < r2.size(); ++q) {
      cplx val = 0.0;
      for (int i = 0; i < 4; ++i) val += r2.points[q][i] * v[i];
      th += r2.weights[q] * g.volume * std::norm(val);
    }
    for (std::size_t q = 0; q < rule.size(); ++q)
      z += rule.weights[q] * g.volume * (error_at(t, g.point(rule.points[q])) - grad).squaredNorm();
  }
  out.theta = std::sqrt(th);
  out.z = std::sqrt(z);
  return out;
}

/// Convergence table of the constant-coefficient manufactured solution
/// E = sin(pi x_2) sin(pi x_3) e_1 on the unit cube.
inline std::vector<MmsRow> mms_reference(cplx kappa0, const std::vector<int>& ns, int split_factor = 2) {
  if (!(kappa0.real() > 0.0 && kappa0.imag() < 0.0)) {
    throw Error(ErrorKind::invalid_argument, "manufactured solution needs Re kappa0 > 0 and Im kappa0 < 0");
  }
  const auto src = mms_source(kappa0);
  std::vector<MmsRow> rows;
  for (int n : ns) {
    const MacroMesh mesh = build_box_mesh(Box{}, n);
    const EdgeSpace space(mesh);
    auto sys = assemble_nedelec(space, std::vector<double>(mesh.num_tets(), 1.0),
                                std::vector<cplx>(mesh.num_tets(), kappa0), src.f, "manufactured");
    const Eigen::VectorXcd x = solve_direct(sys.system, sys.rhs);
    MmsRow row;
    row.error = edge_field_error(space, x, mms_exact, mms_exact_curl);
    row.interpolation = edge_field_error(space, interpolate_edges(space, mms_exact), mms_exact, mms_exact_curl);
    const auto split = helmholtz_split(space, x, mms_exact, refine(mesh, split_factor));
    row.theta = split.theta;
    row.z = split.z;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Error triples

/// Energy-norm error with its three parts, globally and per coarse element
/// (squared, restricted to T_j x Y).
struct ErrorTriple {
  EnergyParts parts;
  std::vector<double> local_curl2;
  std::vector<double> local_div2;
  std::vector<double> local_l22;

  double total() const { return parts.total(); }
  double local(int j) const { return std::sqrt(local_curl2[j]) + std::sqrt(local_div2[j]) + std::sqrt(local_l22[j]); }
};

namespace detail {

/// Y-integrals of products of the corrector derivative fields of two cell
/// solutions on nested micro meshes (fine one `f`, coarse one `c`):
///   curl:  F(S) = [I, curl_f(S), curl_c(S')]          G_curl = sum |S| F^T F
///   div:   d(S) = [div_f(S), div_c(S')]               G_div  = sum |S| d d^T
///   grad:  H(S) = [grad_f(S), grad_c(S')]             m = sum |S| H, G_grad = sum |S| H^H H
/// where S' is the coarse micro tet containing S. Either solution may be null.
struct CellGram {
  Eigen::Matrix<double, 9, 9> curl = Eigen::Matrix<double, 9, 9>::Zero();
  Eigen::Matrix<double, 6, 6> div = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<cplx, 3, 6> grad_mean = Eigen::Matrix<cplx, 3, 6>::Zero();
  Eigen::Matrix<cplx, 6, 6> grad = Eigen::Matrix<cplx, 6, 6>::Zero();
};

inline CellGram cell_gram(const CellSolution* f, const CellSolution* c, const PeriodicMicroMesh& fine,
                          const std::vector<int>& parent) {
  CellGram out;
  for (std::size_t i = 0; i < fine.num_tets(); ++i) {
    const double v = fine.geometry[i].volume;
    Eigen::Matrix<double, 3, 9> F = Eigen::Matrix<double, 3, 9>::Zero();
    Eigen::Matrix<double, 6, 1> d = Eigen::Matrix<double, 6, 1>::Zero();
    Eigen::Matrix<cplx, 3, 6> H = Eigen::Matrix<cplx, 3, 6>::Zero();
    F.block<3, 3>(0, 0).setIdentity();
    if (f) {
      F.block<3, 3>(0, 3) = f->curl[i];
      d.head<3>() = f->div[i];
      H.block<3, 3>(0, 0) = f->grad[i];
    }
    if (c) {
      const int p = parent[i];
      F.block<3, 3>(0, 6) = c->curl[p];
      d.tail<3>() = c->div[p];
      H.block<3, 3>(0, 3) = c->grad[p];
    }
    out.curl += v * F.transpose() * F;
    out.div += v * d * d.transpose();
    out.grad_mean += v * H;
    out.grad += v * H.adjoint() * H;
  }
  return out;
}

template <int N, class Matrix>
double quadratic(const Matrix& g, const Eigen::Matrix<cplx, N, 1>& z) {
  return std::max(0.0, (z.adjoint() * g.template cast<cplx>() * z)(0).real());
}

inline std::vector<int> micro_parents(const PeriodicMicroMesh& fine, const PeriodicMicroMesh& coarse) {
  std::vector<int> parent(fine.num_tets());
  for (std::size_t i = 0; i < fine.num_tets(); ++i) parent[i] = coarse.locate(fine.geometry[i].barycenter).first;
  return parent;
}

}  // namespace detail

/// Energy-norm error of `coarse` against a reference HMM solution on nested
/// refinements of both meshes. The difference (E - E_H, K_1 - K_{h,1},
/// K_2 - K_{h,2}) is integrated over reference macro tets times reference
/// micro tets, exactly for the discrete fields.
inline ErrorTriple error_triple(const HmmSolution& coarse, const HmmSolution& reference, int jobs = 1) {
  const MacroMesh& cm = *coarse.macro;
  const MacroMesh& fm = *reference.macro;
  const PeriodicMicroMesh& cy = *coarse.micro;
  const PeriodicMicroMesh& fy = *reference.micro;
  if (fm.n % cm.n != 0 || fy.n % cy.n != 0 || (fm.box.lo - cm.box.lo).norm() > 0 ||
      (fm.box.hi - cm.box.hi).norm() > 0) {
    throw Error(ErrorKind::non_nested, "reference meshes (" + std::to_string(fm.n) + ", " + std::to_string(fy.n) +
                                           ") do not refine (" + std::to_string(cm.n) + ", " +
                                           std::to_string(cy.n) + ")");
  }
  const std::vector<int> yparent = detail::micro_parents(fy, cy);
  const std::size_t nf = fm.num_tets();
  std::vector<int> xparent(nf);
  for (std::size_t t = 0; t < nf; ++t) xparent[t] = cm.locate(fm.geometry[t].barycenter).first;

  // One Gram set per distinct (reference cell, coarse cell) pair.
  std::map<std::pair<int, int>, int> pair_index;
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> pair_of(nf);
  for (std::size_t t = 0; t < nf; ++t) {
    const std::pair<int, int> key{reference.cells->solution_of[t], coarse.cells->solution_of[xparent[t]]};
    auto [it, inserted] = pair_index.try_emplace(key, static_cast<int>(pairs.size()));
    if (inserted) pairs.push_back(key);
    pair_of[t] = it->second;
  }
  std::vector<detail::CellGram> grams(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t p) {
    grams[p] = detail::cell_gram(reference.cells->solutions[pairs[p].first].get(),
                                 coarse.cells->solutions[pairs[p].second].get(), fy, yparent);
  });

  const auto& rule = tet_rule(2);
  std::vector<std::array<double, 3>> local(nf);
  parallel_for(nf, jobs, [&](std::size_t ft) {
    const int t = static_cast<int>(ft);
    const int j = xparent[t];
    const auto& g = fm.geometry[t];
    const auto& gram = grams[pair_of[t]];
    Eigen::Matrix<cplx, 9, 1> zc;
    zc << reference.curl[t] - coarse.curl[j], reference.curl[t], -coarse.curl[j];
    Eigen::Matrix<cplx, 6, 1> zd;
    zd << reference.curl[t], -coarse.curl[j];
    Eigen::Matrix<cplx, 6, 1> zg;
    zg << reference.center[t], -coarse.center[j];
    double l2 = 0.0;
    CVec3 mean = CVec3::Zero();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec3 x = g.point(rule.points[q]);
      const CVec3 e0 = reference.space->value(t, reference.dofs, rule.points[q]) -
                       coarse.space->value(j, coarse.dofs, cm.geometry[j].barycentric(x));
      l2 += rule.weights[q] * g.volume * e0.squaredNorm();
      mean += rule.weights[q] * g.volume * e0;
    }
    l2 += 2.0 * (mean.adjoint() * gram.grad_mean * zg)(0).real() + g.volume * detail::quadratic<6>(gram.grad, zg);
    local[ft] = {g.volume * detail::quadratic<9>(gram.curl, zc), g.volume * detail::quadratic<6>(gram.div, zd),
                 std::max(0.0, l2)};
  });

  ErrorTriple out;
  out.local_curl2.assign(cm.num_tets(), 0.0);
  out.local_div2.assign(cm.num_tets(), 0.0);
  out.local_l22.assign(cm.num_tets(), 0.0);
  double c = 0.0, d = 0.0, l = 0.0;
  for (std::size_t t = 0; t < nf; ++t) {
    out.local_curl2[xparent[t]] += local[t][0];
    out.local_div2[xparent[t]] += local[t][1];
    out.local_l22[xparent[t]] += local[t][2];
    c += local[t][0];
    d += local[t][1];
    l += local[t][2];
  }
  out.parts = {std::sqrt(c), std::sqrt(d), std::sqrt(l)};
  return out;
}

/// Energy-norm error of `coarse` against a closed-form macro field with zero
/// correctors (degree-4 rule in x).
inline ErrorTriple error_vs_exact(const HmmSolution& coarse, const VectorFieldFn& exact,
                                  const VectorFieldFn& exact_curl) {
  const MacroMesh& cm = *coarse.macro;
  const PeriodicMicroMesh& cy = *coarse.micro;
  std::vector<int> identity(cy.num_tets());
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<int>(i);
  std::vector<detail::CellGram> grams(coarse.cells->solutions.size());
  for (std::size_t p = 0; p < grams.size(); ++p)
    grams[p] = detail::cell_gram(nullptr, coarse.cells->solutions[p].get(), cy, identity);
  const auto& rule = tet_rule(4);
  ErrorTriple out;
  out.local_curl2.assign(cm.num_tets(), 0.0);
  out.local_div2.assign(cm.num_tets(), 0.0);
  out.local_l22.assign(cm.num_tets(), 0.0);
  double c = 0.0, d = 0.0, l = 0.0;
  for (int j = 0; j < static_cast<int>(cm.num_tets()); ++j) {
    const auto& g = cm.geometry[j];
    const auto& gram = grams[coarse.cells->solution_of[j]];
    Eigen::Matrix<cplx, 6, 1> zd;
    zd << CVec3::Zero(), -coarse.curl[j];
    Eigen::Matrix<cplx, 6, 1> zg;
    zg << CVec3::Zero(), -coarse.center[j];
    double lc = 0.0, ll = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec3 x = g.point(rule.points[q]);
      const double w = rule.weights[q] * g.volume;
      Eigen::Matrix<cplx, 9, 1> zc;
      zc << exact_curl(x) - coarse.curl[j], CVec3::Zero(), -coarse.curl[j];
      lc += w * detail::quadratic<9>(gram.curl, zc);
      const CVec3 e0 = exact(x) - coarse.space->value(j, coarse.dofs, rule.points[q]);
      ll += w * (e0.squaredNorm() + 2.0 * (e0.adjoint() * gram.grad_mean * zg)(0).real() +
                 detail::quadratic<6>(gram.grad, zg));
    }
    out.local_curl2[j] = lc;
    out.local_div2[j] = g.volume * detail::quadratic<6>(gram.div, zd);
    out.local_l22[j] = std::max(0.0, ll);
    c += lc;
    d += out.local_div2[j];
    l += out.local_l22[j];
  }
  out.parts = {std::sqrt(c), std::sqrt(d), std::sqrt(l)};
  return out;
}

}  // namespace mhmm
