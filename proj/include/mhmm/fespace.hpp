#pragma once

// Lowest-order Nedelec edge elements on the macro mesh, periodic P1 Lagrange
// spaces on the unit cell, and the element matrices built from them.

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "mhmm/mesh.hpp"
#include "mhmm/quadrature.hpp"
#include "mhmm/types.hpp"

namespace mhmm {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using CMat6 = Eigen::Matrix<cplx, 6, 6>;
using CMat4 = Eigen::Matrix<cplx, 4, 4>;
using CMat43 = Eigen::Matrix<cplx, 4, 3>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Mat12x3 = Eigen::Matrix<double, 12, 3>;
using Signs6 = std::array<double, 6>;

// ---------------------------------------------------------------------------
// Whitney edge functions

/// phi_e = s_e (lambda_a grad lambda_b - lambda_b grad lambda_a).
inline Vec3 whitney_value(const TetGeometry& g, const Signs6& sign, int e,
                          const std::array<double, 4>& lambda) {
  const auto [a, b] = kLocalEdges[e];
  return sign[e] * (lambda[a] * g.grad[b] - lambda[b] * g.grad[a]);
}

/// curl phi_e = 2 s_e grad lambda_a x grad lambda_b, constant on the tet.
inline Vec3 whitney_curl(const TetGeometry& g, const Signs6& sign, int e) {
  const auto [a, b] = kLocalEdges[e];
  return 2.0 * sign[e] * g.grad[a].cross(g.grad[b]);
}

inline Signs6 edge_signs(const std::array<int, 4>& vertex_ids) {
  Signs6 s{};
  for (int e = 0; e < 6; ++e) {
    const auto [a, b] = kLocalEdges[e];
    s[e] = vertex_ids[a] < vertex_ids[b] ? 1.0 : -1.0;
  }
  return s;
}

struct EdgeLocalMatrices {
  CMat6 curlcurl;
  CMat6 mass;
};

/// Curl-curl and mass matrices of N0 scaled by a complex weight; the mass uses
/// the degree-2 rule, exact for products of N0 functions.
inline EdgeLocalMatrices n0_local_matrices(const TetGeometry& g, const Signs6& sign, cplx weight) {
  std::array<Vec3, 6> curls;
  for (int e = 0; e < 6; ++e) curls[e] = whitney_curl(g, sign, e);
  Mat6 cc;
  Mat6 m = Mat6::Zero();
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) cc(a, b) = g.volume * curls[a].dot(curls[b]);
  const auto& rule = tet_rule(2);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    std::array<Vec3, 6> v;
    for (int e = 0; e < 6; ++e) v[e] = whitney_value(g, sign, e, rule.points[q]);
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) m(a, b) += rule.weights[q] * g.volume * v[a].dot(v[b]);
  }
  return {weight * cc.cast<cplx>(), weight * m.cast<cplx>()};
}

/// sum_{ij} curl_a[i] M[i][j] curl_b[j] |T| for a matrix weight.
inline CMat6 n0_curlcurl_tensor(const TetGeometry& g, const Signs6& sign, const CMat3& weight) {
  std::array<Vec3, 6> curls;
  for (int e = 0; e < 6; ++e) curls[e] = whitney_curl(g, sign, e);
  CMat6 out;
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      out(a, b) = g.volume * curls[a].cast<cplx>().dot(weight * curls[b].cast<cplx>());
  return out;
}

/// |T| phi_a(x_T) . W phi_b(x_T): the barycenter (one-point) mass with a matrix weight.
inline CMat6 n0_barycenter_mass_tensor(const TetGeometry& g, const Signs6& sign,
                                       const CMat3& weight) {
  const std::array<double, 4> c{0.25, 0.25, 0.25, 0.25};
  std::array<Vec3, 6> v;
  for (int e = 0; e < 6; ++e) v[e] = whitney_value(g, sign, e, c);
  CMat6 out;
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      out(a, b) = g.volume * v[a].cast<cplx>().dot(weight * v[b].cast<cplx>());
  return out;
}

// ---------------------------------------------------------------------------
// P1 Lagrange element matrices

struct P1LocalMatrices {
  CMat4 stiffness;
  CMat43 coupling;  // column k: weight |T| e_k . grad lambda_a
};

inline P1LocalMatrices p1_local_matrices(const TetGeometry& g, cplx weight) {
  P1LocalMatrices out;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) out.stiffness(a, b) = weight * g.volume * g.grad[a].dot(g.grad[b]);
    for (int k = 0; k < 3; ++k) out.coupling(a, k) = weight * g.volume * g.grad[a][k];
  }
  return out;
}

struct VectorP1LocalMatrices {
  Mat12 curlcurl;  // weighted
  Mat12 divdiv;    // unit weight
  Mat12x3 rhs;     // column k: -weight int e_k . curl psi
};

/// Local index 3a + c is the field e_c lambda_a, whose curl is grad lambda_a x e_c
/// and whose divergence is (grad lambda_a)_c.
inline VectorP1LocalMatrices vector_p1_local_matrices(const TetGeometry& g, double weight) {
  std::array<Vec3, 12> curl;
  std::array<double, 12> div{};
  for (int a = 0; a < 4; ++a)
    for (int c = 0; c < 3; ++c) {
      curl[3 * a + c] = g.grad[a].cross(Vec3::Unit(c));
      div[3 * a + c] = g.grad[a][c];
    }
  VectorP1LocalMatrices out;
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 12; ++j) {
      out.curlcurl(i, j) = weight * g.volume * curl[i].dot(curl[j]);
      out.divdiv(i, j) = g.volume * div[i] * div[j];
    }
    for (int k = 0; k < 3; ++k) out.rhs(i, k) = -weight * g.volume * curl[i][k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spaces

/// N0 on the macro mesh with E x n = 0 on the boundary: boundary edges carry no DOF.
class EdgeSpace {
 public:
  explicit EdgeSpace(const MacroMesh& mesh) : mesh_(&mesh) {
    dof_.assign(mesh.num_edges(), -1);
    for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
      if (mesh.edge_on_boundary[e]) {
        ++num_constrained_;
      } else {
        dof_[e] = num_dofs_++;
      }
    }
    signs_.resize(mesh.num_tets());
    for (std::size_t t = 0; t < mesh.num_tets(); ++t) signs_[t] = edge_signs(mesh.tets[t]);
  }

  const MacroMesh& mesh() const { return *mesh_; }
  int num_dofs() const { return num_dofs_; }
  int num_constrained() const { return num_constrained_; }
  int edge_dof(int edge) const { return dof_[edge]; }
  const Signs6& signs(int t) const { return signs_[t]; }

  /// Global DOF of each local edge, -1 where constrained.
  std::array<int, 6> local_dofs(int t) const {
    std::array<int, 6> d{};
    for (int e = 0; e < 6; ++e) d[e] = dof_[mesh_->tet_edges[t][e]];
    return d;
  }

  /// Local coefficient vector of tet t from global DOFs.
  Eigen::Matrix<cplx, 6, 1> gather(int t, const Eigen::VectorXcd& dofs) const {
    Eigen::Matrix<cplx, 6, 1> c;
    const auto d = local_dofs(t);
    for (int e = 0; e < 6; ++e) c[e] = d[e] >= 0 ? dofs[d[e]] : cplx(0.0);
    return c;
  }

  CVec3 value(int t, const Eigen::VectorXcd& dofs, const std::array<double, 4>& lambda) const {
    const auto c = gather(t, dofs);
    const auto& g = mesh_->geometry[t];
    CVec3 v = CVec3::Zero();
    for (int e = 0; e < 6; ++e) v += c[e] * whitney_value(g, signs_[t], e, lambda).cast<cplx>();
    return v;
  }

  CVec3 curl(int t, const Eigen::VectorXcd& dofs) const {
    const auto c = gather(t, dofs);
    const auto& g = mesh_->geometry[t];
    CVec3 v = CVec3::Zero();
    for (int e = 0; e < 6; ++e) v += c[e] * whitney_curl(g, signs_[t], e).cast<cplx>();
    return v;
  }

  /// Affine representation a x x + b of the field on tet t (value = a x x + b, curl = 2a).
  std::pair<CVec3, CVec3> affine(int t, const Eigen::VectorXcd& dofs) const {
    const CVec3 a = 0.5 * curl(t, dofs);
    const Vec3& xc = mesh_->geometry[t].barycenter;
    const CVec3 vc = value(t, dofs, {0.25, 0.25, 0.25, 0.25});
    return {a, vc - cross(a, xc)};
  }

 private:
  const MacroMesh* mesh_;
  std::vector<int> dof_;
  std::vector<Signs6> signs_;
  int num_dofs_ = 0;
  int num_constrained_ = 0;
};

using VectorFieldFn = std::function<CVec3(const Vec3&)>;

/// Edge-moment interpolation: DOF = int_e E . (p_hi - p_lo) ds along the global
/// orientation, computed with five-point Gauss.
inline Eigen::VectorXcd interpolate_edges(const EdgeSpace& space, const VectorFieldFn& field) {
  const auto& mesh = space.mesh();
  Eigen::VectorXcd dofs = Eigen::VectorXcd::Zero(space.num_dofs());
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const int d = space.edge_dof(static_cast<int>(e));
    if (d < 0) continue;
    const Vec3& p0 = mesh.vertices[mesh.edges[e][0]];
    const Vec3& p1 = mesh.vertices[mesh.edges[e][1]];
    const Vec3 t = p1 - p0;
    cplx s = 0.0;
    for (const auto& [u, w] : gauss_line5()) s += w * t.cast<cplx>().dot(field(p0 + u * t));
    dofs[d] = s;
  }
  return dofs;
}

struct EdgeFieldSample {
  CVec3 value;
  CVec3 curl;
};

inline EdgeFieldSample evaluate_edge_field(const EdgeSpace& space, const Eigen::VectorXcd& dofs,
                                           const Vec3& x) {
  const auto [t, lambda] = space.mesh().locate(x);
  return {space.value(t, dofs, lambda), space.curl(t, dofs)};
}

/// P1 on the periodic cell, one DOF per master vertex. Zero mean is imposed by
/// one Lagrange multiplier row carrying the vertex weights int_Y lambda_m.
class PeriodicScalarSpace {
 public:
  explicit PeriodicScalarSpace(const PeriodicMicroMesh& mesh) : mesh_(&mesh) {
    weights_.assign(mesh.num_masters, 0.0);
    for (std::size_t t = 0; t < mesh.num_tets(); ++t) {
      const auto mt = mesh.master_tet(static_cast<int>(t));
      for (int a = 0; a < 4; ++a) weights_[mt[a]] += 0.25 * mesh.geometry[t].volume;
    }
  }

  const PeriodicMicroMesh& mesh() const { return *mesh_; }
  int num_dofs() const { return mesh_->num_masters; }
  /// int_Y lambda_m dy for master vertex m.
  const std::vector<double>& mean_weights() const { return weights_; }

  template <class Vector>
  auto mean(const Vector& u) const {
    typename Vector::Scalar s(0);
    for (int m = 0; m < num_dofs(); ++m) s += weights_[m] * u[m];
    return s;
  }

  /// Nodal interpolation at master vertex positions.
  template <class Fn>
  Eigen::VectorXd interpolate(Fn&& fn) const {
    Eigen::VectorXd u(num_dofs());
    for (std::size_t v = 0; v < mesh_->vertices.size(); ++v) u[mesh_->master[v]] = fn(mesh_->vertices[v]);
    return u;
  }

 private:
  const PeriodicMicroMesh* mesh_;
  std::vector<double> weights_;
};

/// P1 with homogeneous Dirichlet values on the boundary of a box mesh.
class H10Space {
 public:
  explicit H10Space(const MacroMesh& mesh) : mesh_(&mesh) {
    std::vector<char> on_boundary(mesh.vertices.size(), 0);
    for (const auto& f : mesh.faces)
      if (f.boundary())
        for (int v : f.vertices) on_boundary[v] = 1;
    dof_.assign(mesh.vertices.size(), -1);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
      if (!on_boundary[v]) dof_[v] = num_dofs_++;
  }

  const MacroMesh& mesh() const { return *mesh_; }
  int num_dofs() const { return num_dofs_; }
  int vertex_dof(int v) const { return dof_[v]; }

 private:
  const MacroMesh* mesh_;
  std::vector<int> dof_;
  int num_dofs_ = 0;
};

}  // namespace mhmm
