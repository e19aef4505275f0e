#pragma once

// Residual-based a posteriori indicators of the HMM solution and the
// effectivity of their sum against an overkill reference.

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "mhmm/errors.hpp"
#include "mhmm/hmm.hpp"
#include "mhmm/io.hpp"
#include "mhmm/parallel.hpp"
#include "mhmm/quadrature.hpp"

namespace mhmm {

/// Per-entity micro indicators (eta_{j,ik,nu}, zeta_{ji}) are stored only up to
/// this many entries; their per-element sums of squares are always kept.
inline constexpr std::size_t kIndicatorDetailCap = 2000000;

struct IndicatorTable {
  // Per macro tet j.
  std::vector<double> eta_j1, eta_j2, zeta_j;
  // Per macro tet j: sums of squares over the micro faces (i,k) and micro tets i.
  std::vector<double> micro1_sq, micro2_sq, zeta_micro_sq;
  // Per interior macro face.
  std::vector<int> face_ids;
  std::vector<double> eta_jl1, eta_jl2;
  // Per (j, micro face) at j * num_micro_faces + f and per (j, i) at j * num_micro_tets + i.
  bool detailed = false;
  std::size_t num_micro_faces = 0, num_micro_tets = 0;
  std::vector<double> eta_jik1, eta_jik2, zeta_ji;
  int fh_degree = 1;

  // The five root-sum-squares.
  double element = 0.0, face = 0.0, micro = 0.0, zeta = 0.0, zeta_micro = 0.0;

  double eta_total() const { return element + face + micro; }
};

namespace detail {

/// Elementwise L2 projection of f onto P0 or vector P1 (degree-4 rule),
/// returned as values at the given barycentric points.
inline std::vector<CVec3> project_source(const VectorFieldFn& f, const TetGeometry& g, int degree,
                                         const std::vector<std::array<double, 4>>& at) {
  const auto& rule = tet_rule(4);
  std::vector<CVec3> out(at.size());
  if (degree == 0) {
    CVec3 mean = CVec3::Zero();
    for (std::size_t q = 0; q < rule.size(); ++q) mean += rule.weights[q] * f(g.point(rule.points[q]));
    for (auto& v : out) v = mean;
    return out;
  }
  Eigen::Matrix4d mass;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) mass(a, b) = (a == b ? 2.0 : 1.0) / 20.0;
  Eigen::Matrix<cplx, 4, 3> rhs = Eigen::Matrix<cplx, 4, 3>::Zero();
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const CVec3 fq = f(g.point(rule.points[q]));
    for (int a = 0; a < 4; ++a) rhs.row(a) += rule.weights[q] * rule.points[q][a] * fq.transpose();
  }
  const Eigen::Matrix<cplx, 4, 3> coef = mass.cast<cplx>().ldlt().solve(rhs);
  for (std::size_t p = 0; p < at.size(); ++p) {
    CVec3 v = CVec3::Zero();
    for (int a = 0; a < 4; ++a) v += at[p][a] * coef.row(a).transpose();
    out[p] = v;
  }
  return out;
}

/// Linear maps from (c_j, b_j) to the jumps on micro face f:
///   [mu_h (c + curl_y K_1) x n + div_y K_1 n] = A c,   [kappa_h (b + grad_y K_2) . n] = beta^T b.
struct MicroJump {
  Mat3 a = Mat3::Zero();
  CVec3 beta = CVec3::Zero();
  double weight = 0.0;  // h_F |F|
};

inline MicroJump micro_jump(const CellSolution& cell, const PeriodicMicroMesh& micro, int f) {
  const Face& face = micro.faces[f];
  MicroJump out;
  out.weight = face.diameter * face.area;
  if (face.boundary() || face.neighbor == face.owner) return out;
  const auto& row = *cell.coefficients;
  const Vec3& n = face.normal;
  const int i = face.owner, k = face.neighbor;
  const Mat3 fi = row.mu_inv[i] * (Mat3::Identity() + cell.curl[i]);
  const Mat3 fk = row.mu_inv[k] * (Mat3::Identity() + cell.curl[k]);
  for (int c = 0; c < 3; ++c)
    out.a.col(c) = (fi.col(c) - fk.col(c)).cross(n) + (cell.div[i][c] - cell.div[k][c]) * n;
  const CMat3 gi = row.kappa[i] * (CMat3::Identity() + cell.grad[i]);
  const CMat3 gk = row.kappa[k] * (CMat3::Identity() + cell.grad[k]);
  out.beta = (gi - gk).transpose() * n.cast<cplx>();
  return out;
}

/// sum_f h_F |F| A_f^T A_f and sum_f h_F |F| conj(beta_f) beta_f^T.
struct MicroJumpGram {
  Mat3 curl = Mat3::Zero();
  CMat3 grad = CMat3::Zero();
};

inline MicroJumpGram micro_jump_gram(const CellSolution& cell, const PeriodicMicroMesh& micro) {
  MicroJumpGram g;
  for (int f = 0; f < static_cast<int>(micro.num_faces()); ++f) {
    const MicroJump m = micro_jump(cell, micro, f);
    g.curl += m.weight * m.a.transpose() * m.a;
    g.grad += m.weight * m.beta.conjugate() * m.beta.transpose();
  }
  return g;
}

/// Per micro tet: |S| * sum_q w_q |a_h(y_i) - a(x0, y_q)|^2 for mu^{-1} and kappa.
struct SamplingDefect {
  std::vector<double> mu, kappa;
};

inline SamplingDefect sampling_defect(const CoefficientField& coefficients, const SampledCoefficients::Row& row,
                                      const PeriodicMicroMesh& micro, const Vec3& x0) {
  const auto& rule = tet_rule(2);
  SamplingDefect d;
  d.mu.assign(micro.num_tets(), 0.0);
  d.kappa.assign(micro.num_tets(), 0.0);
  for (std::size_t i = 0; i < micro.num_tets(); ++i) {
    const auto& g = micro.geometry[i];
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec3 y = g.point(rule.points[q]);
      d.mu[i] += rule.weights[q] * g.volume * std::pow(row.mu_inv[i] - coefficients.mu_inv(x0, y), 2);
      d.kappa[i] += rule.weights[q] * g.volume * std::norm(row.kappa[i] - coefficients.kappa(x0, y));
    }
  }
  return d;
}

/// Jacobian trace of the affine field E_H on T_j.
inline cplx edge_field_divergence(const EdgeSpace& space, const Eigen::VectorXcd& dofs, int j) {
  const auto& g = space.mesh().geometry[j];
  cplx div = 0.0;
  for (int a = 0; a < 4; ++a) {
    std::array<double, 4> l{};
    l[a] = 1.0;
    div += (space.value(j, dofs, l).transpose() * g.grad[a].cast<cplx>())(0);
  }
  return div;
}

}  // namespace detail

inline IndicatorTable compute_indicators(const HmmSolution& s, const CoefficientField& coefficients,
                                         const SourceField& source, int fh_degree = 1, int jobs = 1) {
  if (fh_degree != 0 && fh_degree != 1) throw Error(ErrorKind::invalid_argument, "f_H degree must be 0 or 1");
  const MacroMesh& macro = *s.macro;
  const PeriodicMicroMesh& micro = *s.micro;
  const std::size_t nj = macro.num_tets();
  const std::size_t ni = micro.num_tets();
  const std::size_t nf = micro.num_faces();
  IndicatorTable t;
  t.fh_degree = fh_degree;
  t.num_micro_faces = nf;
  t.num_micro_tets = ni;
  t.detailed = nj * std::max(nf, ni) <= kIndicatorDetailCap;
  t.eta_j1.assign(nj, 0.0);
  t.eta_j2.assign(nj, 0.0);
  t.zeta_j.assign(nj, 0.0);
  t.micro1_sq.assign(nj, 0.0);
  t.micro2_sq.assign(nj, 0.0);
  t.zeta_micro_sq.assign(nj, 0.0);
  if (t.detailed) {
    t.eta_jik1.assign(nj * nf, 0.0);
    t.eta_jik2.assign(nj * nf, 0.0);
    t.zeta_ji.assign(nj * ni, 0.0);
  }

  const auto& cells = *s.cells;
  std::vector<detail::MicroJumpGram> grams(cells.solutions.size());
  parallel_for(grams.size(), jobs, [&](std::size_t p) { grams[p] = detail::micro_jump_gram(*cells.solutions[p], micro); });
  std::vector<detail::MicroJump> jumps;
  if (t.detailed && cells.solutions.size() == 1) {
    jumps.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) jumps[f] = detail::micro_jump(*cells.solutions[0], micro, static_cast<int>(f));
  }
  detail::SamplingDefect shared_defect;
  if (coefficients.x_independent) {
    shared_defect = detail::sampling_defect(coefficients, (*s.samples)[0], micro, macro.geometry[0].barycenter);
  }

  // Y-averaged flux kappa_bar E_H(x) + m_j with m_j = (K_hom - kappa_bar I) b_j.
  std::vector<CVec3> moment(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    const auto& c = s.cell(static_cast<int>(j));
    moment[j] = (c.khom - c.kappa_mean * CMat3::Identity()) * s.center[j];
  }

  const auto& rule2 = tet_rule(2);
  const auto& rule4 = tet_rule(4);
  parallel_for(nj, jobs, [&](std::size_t uj) {
    const int j = static_cast<int>(uj);
    const auto& g = macro.geometry[j];
    const auto& cell = s.cell(j);
    const CVec3& cj = s.curl[j];
    const CVec3& bj = s.center[j];

    // Element residual f_H + kappa_bar E_H + m_j (affine, degree-2 rule is exact).
    const auto fh2 = detail::project_source(source.f, g, fh_degree, rule2.points);
    double r = 0.0, e2 = 0.0;
    for (std::size_t q = 0; q < rule2.size(); ++q) {
      const CVec3 eh = s.space->value(j, s.dofs, rule2.points[q]);
      r += rule2.weights[q] * g.volume * (fh2[q] + cell.kappa_mean * eh + moment[j]).squaredNorm();
      e2 += rule2.weights[q] * g.volume * eh.squaredNorm();
    }
    t.eta_j1[j] = g.diameter * std::sqrt(r);
    t.eta_j2[j] = g.diameter * std::sqrt(g.volume) * std::abs(cell.kappa_mean * detail::edge_field_divergence(*s.space, s.dofs, j));

    const auto fh4 = detail::project_source(source.f, g, fh_degree, rule4.points);
    double z = 0.0;
    for (std::size_t q = 0; q < rule4.size(); ++q)
      z += rule4.weights[q] * g.volume * (fh4[q] - source.f(g.point(rule4.points[q]))).squaredNorm();
    t.zeta_j[j] = g.diameter * std::sqrt(z);

    // Micro-face jumps.
    const auto& gram = grams[cells.solution_of[j]];
    t.micro1_sq[j] = g.volume * std::max(0.0, (cj.adjoint() * gram.curl.cast<cplx>() * cj)(0).real());
    t.micro2_sq[j] = g.volume * std::max(0.0, (bj.adjoint() * gram.grad * bj)(0).real());
    if (t.detailed) {
      for (std::size_t f = 0; f < nf; ++f) {
        const detail::MicroJump m = jumps.empty() ? detail::micro_jump(cell, micro, static_cast<int>(f)) : jumps[f];
        const double w = std::sqrt(m.weight * g.volume);
        t.eta_jik1[uj * nf + f] = w * (m.a.cast<cplx>() * cj).norm();
        t.eta_jik2[uj * nf + f] = w * std::abs((m.beta.transpose() * bj)(0));
      }
    }

    // Coefficient sampling defects, degree 2 in x and y.
    const auto& row = *cell.coefficients;
    double zsum = 0.0;
    for (std::size_t i = 0; i < ni; ++i) {
      const CVec3 v = (Mat3::Identity() + cell.curl[i]).cast<cplx>() * cj;
      const CVec3 gb = cell.grad[i] * bj;
      double a2 = 0.0, b2 = 0.0;
      if (coefficients.x_independent) {
        a2 = g.volume * shared_defect.mu[i] * v.squaredNorm();
        const double q = e2 + 2.0 * g.volume * (gb.adjoint() * bj)(0).real() + g.volume * gb.squaredNorm();
        b2 = shared_defect.kappa[i] * std::max(0.0, q);
      } else {
        const auto& gy = micro.geometry[i];
        for (std::size_t qx = 0; qx < rule2.size(); ++qx) {
          const Vec3 x = g.point(rule2.points[qx]);
          const CVec3 w = s.space->value(j, s.dofs, rule2.points[qx]) + gb;
          for (std::size_t qy = 0; qy < rule2.size(); ++qy) {
            const Vec3 y = gy.point(rule2.points[qy]);
            const double wq = rule2.weights[qx] * rule2.weights[qy] * g.volume * gy.volume;
            a2 += wq * std::pow(row.mu_inv[i] - coefficients.mu_inv(x, y), 2) * v.squaredNorm();
            b2 += wq * std::norm(row.kappa[i] - coefficients.kappa(x, y)) * w.squaredNorm();
          }
        }
      }
      const double zji = std::sqrt(a2) + std::sqrt(b2);
      zsum += zji * zji;
      if (t.detailed) t.zeta_ji[uj * ni + i] = zji;
    }
    t.zeta_micro_sq[j] = zsum;
  });

  // Interior macro faces.
  for (int f = 0; f < static_cast<int>(macro.num_faces()); ++f)
    if (!macro.faces[f].boundary()) t.face_ids.push_back(f);
  t.eta_jl1.assign(t.face_ids.size(), 0.0);
  t.eta_jl2.assign(t.face_ids.size(), 0.0);
  const auto& tri = triangle_rule2();
  parallel_for(t.face_ids.size(), jobs, [&](std::size_t p) {
    const Face& face = macro.faces[t.face_ids[p]];
    const int o = face.owner, n = face.neighbor;
    const Vec3& nv = face.normal;
    const CVec3 flux = s.cell(o).mhom * s.curl[o] - s.cell(n).mhom * s.curl[n];
    t.eta_jl1[p] = std::sqrt(face.diameter * face.area) * cross(flux, nv).norm();
    double sq = 0.0;
    for (std::size_t q = 0; q < tri.weights.size(); ++q) {
      Vec3 x = Vec3::Zero();
      for (int a = 0; a < 3; ++a) x += tri.points[q][a] * macro.vertices[face.vertices[a]];
      const CVec3 fo = s.cell(o).kappa_mean * s.space->value(o, s.dofs, macro.geometry[o].barycentric(x)) + moment[o];
      const CVec3 fn = s.cell(n).kappa_mean * s.space->value(n, s.dofs, macro.geometry[n].barycentric(x)) + moment[n];
      sq += tri.weights[q] * face.area * std::norm(((fo - fn).transpose() * nv.cast<cplx>())(0));
    }
    t.eta_jl2[p] = std::sqrt(face.diameter * sq);
  });

  double a1 = 0.0, a2 = 0.0, a3 = 0.0, z1 = 0.0, z2 = 0.0;
  for (std::size_t j = 0; j < nj; ++j) {
    a1 += t.eta_j1[j] * t.eta_j1[j] + t.eta_j2[j] * t.eta_j2[j];
    a3 += t.micro1_sq[j] + t.micro2_sq[j];
    z1 += t.zeta_j[j] * t.zeta_j[j];
    z2 += t.zeta_micro_sq[j];
  }
  for (std::size_t p = 0; p < t.face_ids.size(); ++p) a2 += t.eta_jl1[p] * t.eta_jl1[p] + t.eta_jl2[p] * t.eta_jl2[p];
  t.element = std::sqrt(a1);
  t.face = std::sqrt(a2);
  t.micro = std::sqrt(a3);
  t.zeta = std::sqrt(z1);
  t.zeta_micro = std::sqrt(z2);
  return t;
}

struct Effectivity {
  double estimator = 0.0;  // sum of the three eta aggregates
  double error = 0.0;      // energy-norm error against the reference
  double value = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;
  double zeta = 0.0;
  double zeta_micro = 0.0;
  // Maxima of eta / (local error + local zeta) per indicator group.
  double local_element = 0.0, local_face = 0.0, local_micro = 0.0;

  double local_max() const { return std::max({local_element, local_face, local_micro}); }
};

/// An error below this fraction of the estimator is treated as zero.
inline constexpr double kZeroErrorRatio = 1e-12;

inline Effectivity effectivity(const HmmSolution& s, const ErrorTriple& error, const IndicatorTable& t) {
  Effectivity e;
  e.estimator = t.eta_total();
  e.error = error.total();
  e.zeta = t.zeta;
  e.zeta_micro = t.zeta_micro;
  e.defined = e.error > kZeroErrorRatio * e.estimator && e.error > 0.0;
  if (e.defined) e.value = e.estimator / e.error;
  const std::size_t nj = s.macro->num_tets();
  auto ratio = [](double num, double den) {
    if (den > 0.0) return num / den;
    return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  for (std::size_t j = 0; j < nj; ++j) {
    const double err = error.local(static_cast<int>(j));
    const double zy = std::sqrt(t.zeta_micro_sq[j]);
    e.local_element = std::max(e.local_element, ratio(std::hypot(t.eta_j1[j], t.eta_j2[j]), err + t.zeta_j[j] + zy));
    e.local_micro = std::max(e.local_micro, ratio(std::sqrt(t.micro1_sq[j] + t.micro2_sq[j]), err + zy));
  }
  for (std::size_t p = 0; p < t.face_ids.size(); ++p) {
    const Face& face = s.macro->faces[t.face_ids[p]];
    const int o = face.owner, n = face.neighbor;
    const double den = error.local(o) + error.local(n) + std::hypot(t.zeta_j[o], t.zeta_j[n]) +
                       std::sqrt(t.zeta_micro_sq[o] + t.zeta_micro_sq[n]);
    e.local_face = std::max(e.local_face, ratio(std::hypot(t.eta_jl1[p], t.eta_jl2[p]), den));
  }
  return e;
}

inline Effectivity effectivity(const HmmSolution& s, const HmmSolution& reference, const IndicatorTable& t,
                               int jobs = 1) {
  return effectivity(s, error_triple(s, reference, jobs), t);
}

/// One row per entity (kind, j, l, value) followed by the aggregates and, if
/// given, the effectivity. Unused id columns are -1.
inline void write_indicator_csv(std::ostream& out, const HmmSolution& s, const IndicatorTable& t,
                                const Effectivity* eff = nullptr) {
  CsvWriter csv(out, {"kind", "j", "l", "value"});
  for (std::size_t j = 0; j < t.eta_j1.size(); ++j) {
    const int ij = static_cast<int>(j);
    csv << "eta_j_1" << ij << -1 << t.eta_j1[j];
    csv << "eta_j_2" << ij << -1 << t.eta_j2[j];
    csv << "zeta_j" << ij << -1 << t.zeta_j[j];
    csv << "eta_j_micro_1_sq" << ij << -1 << t.micro1_sq[j];
    csv << "eta_j_micro_2_sq" << ij << -1 << t.micro2_sq[j];
    csv << "zeta_j_micro_sq" << ij << -1 << t.zeta_micro_sq[j];
  }
  for (std::size_t p = 0; p < t.face_ids.size(); ++p) {
    const Face& face = s.macro->faces[t.face_ids[p]];
    csv << "eta_jl_1" << face.owner << face.neighbor << t.eta_jl1[p];
    csv << "eta_jl_2" << face.owner << face.neighbor << t.eta_jl2[p];
  }
  if (t.detailed) {
    for (std::size_t j = 0; j < t.eta_j1.size(); ++j) {
      for (std::size_t f = 0; f < t.num_micro_faces; ++f) {
        csv << "eta_j_ik_1" << static_cast<int>(j) << static_cast<int>(f) << t.eta_jik1[j * t.num_micro_faces + f];
        csv << "eta_j_ik_2" << static_cast<int>(j) << static_cast<int>(f) << t.eta_jik2[j * t.num_micro_faces + f];
      }
      for (std::size_t i = 0; i < t.num_micro_tets; ++i)
        csv << "zeta_ji" << static_cast<int>(j) << static_cast<int>(i) << t.zeta_ji[j * t.num_micro_tets + i];
    }
  }
  csv << "aggregate_element" << -1 << -1 << t.element;
  csv << "aggregate_face" << -1 << -1 << t.face;
  csv << "aggregate_micro" << -1 << -1 << t.micro;
  csv << "aggregate_zeta" << -1 << -1 << t.zeta;
  csv << "aggregate_zeta_micro" << -1 << -1 << t.zeta_micro;
  csv << "estimator_total" << -1 << -1 << t.eta_total();
  if (eff) {
    csv << "error" << -1 << -1 << eff->error;
    csv << "effectivity" << -1 << -1 << eff->value;
    csv << "local_efficiency_max" << -1 << -1 << eff->local_max();
  }
}

}  // namespace mhmm
