#pragma once

// Structured Kuhn (Freudenthal) tetrahedral meshes of an axis-aligned box and
// of the periodic unit cell Y = [-1/2, 1/2)^3.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mhmm/types.hpp"

namespace mhmm {

/// Local edge (a, b) pairs of a tetrahedron, a < b in local numbering.
inline constexpr std::array<std::array<int, 2>, 6> kLocalEdges{
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

/// Local face f is opposite local vertex f.
inline constexpr std::array<std::array<int, 3>, 4> kLocalFaces{
    {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

struct TetGeometry {
  std::array<Vec3, 4> points;
  std::array<Vec3, 4> grad;  // gradients of the barycentric coordinates
  double volume = 0.0;
  Vec3 barycenter = Vec3::Zero();
  double diameter = 0.0;

  Vec3 point(const std::array<double, 4>& lambda) const {
    return lambda[0] * points[0] + lambda[1] * points[1] + lambda[2] * points[2] +
           lambda[3] * points[3];
  }

  std::array<double, 4> barycentric(const Vec3& x) const {
    std::array<double, 4> l{};
    double rest = 1.0;
    for (int a = 1; a < 4; ++a) {
      l[a] = grad[a].dot(x - points[0]);
      rest -= l[a];
    }
    l[0] = rest;
    return l;
  }

  double inradius(const std::array<double, 4>& face_areas) const {
    return 3.0 * volume / (face_areas[0] + face_areas[1] + face_areas[2] + face_areas[3]);
  }
};

inline TetGeometry make_geometry(const std::array<Vec3, 4>& p) {
  TetGeometry g;
  g.points = p;
  Mat3 jac;
  jac.col(0) = p[1] - p[0];
  jac.col(1) = p[2] - p[0];
  jac.col(2) = p[3] - p[0];
  const double det = jac.determinant();
  g.volume = std::abs(det) / 6.0;
  double scale = 0.0;
  for (const auto& [a, b] : kLocalEdges) scale = std::max(scale, (p[b] - p[a]).norm());
  g.diameter = scale;
  if (!(g.volume > 1e-14 * scale * scale * scale)) {
    throw Error(ErrorKind::degenerate_element, "degenerate tetrahedron");
  }
  const Mat3 inv_t = jac.inverse().transpose();
  g.grad[1] = inv_t.col(0);
  g.grad[2] = inv_t.col(1);
  g.grad[3] = inv_t.col(2);
  g.grad[0] = -(g.grad[1] + g.grad[2] + g.grad[3]);
  g.barycenter = 0.25 * (p[0] + p[1] + p[2] + p[3]);
  return g;
}

struct Face {
  std::array<int, 3> vertices{};  // sorted vertex ids (master ids on periodic meshes)
  int owner = -1;
  int neighbor = -1;  // -1 on the boundary
  int owner_local = -1;
  int neighbor_local = -1;
  double area = 0.0;
  double diameter = 0.0;
  Vec3 normal = Vec3::Zero();  // unit, owner -> neighbor (outward on the boundary)

  bool boundary() const { return neighbor < 0; }
};

/// Shared tetrahedral topology. Meshes are immutable after construction.
struct TetMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<TetGeometry> geometry;
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 6>> tet_edges;
  std::vector<std::array<int, 4>> tet_faces;
  std::vector<Face> faces;
  std::vector<char> edge_on_boundary;

  std::size_t num_tets() const { return tets.size(); }
  std::size_t num_faces() const { return faces.size(); }
  std::size_t num_edges() const { return edges.size(); }

  double max_diameter() const {
    double h = 0.0;
    for (const auto& g : geometry) h = std::max(h, g.diameter);
    return h;
  }

  double total_volume() const {
    double v = 0.0;
    for (const auto& g : geometry) v += g.volume;
    return v;
  }

  std::array<double, 4> face_areas(int t) const {
    std::array<double, 4> a{};
    for (int f = 0; f < 4; ++f) a[f] = faces[tet_faces[t][f]].area;
    return a;
  }
};

struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();

  Vec3 extent() const { return hi - lo; }
  double volume() const { return extent().prod(); }
};

struct MacroMesh : TetMesh {
  Box box;
  int n = 0;

  /// Containing tet and barycentric coordinates; points within a rounding
  /// tolerance of the box are clamped to its closure.
  std::pair<int, std::array<double, 4>> locate(const Vec3& x) const;
};

struct PeriodicMicroMesh : TetMesh {
  int n = 0;
  std::vector<int> master;  // lattice vertex -> master vertex
  int num_masters = 0;

  /// Tet vertices mapped to master ids.
  std::array<int, 4> master_tet(int t) const {
    const auto& v = tets[t];
    return {master[v[0]], master[v[1]], master[v[2]], master[v[3]]};
  }

  /// Wraps y into Y and returns the containing tet with barycentric coordinates.
  std::pair<int, std::array<double, 4>> locate(const Vec3& y) const;
};

namespace detail {

using Lattice = std::array<int, 3>;

// Kuhn paths: for each axis permutation the tet 0 -> e_p0 -> e_p0+e_p1 -> (1,1,1).
inline std::array<std::array<Lattice, 4>, 6> kuhn_offsets() {
  static constexpr std::array<std::array<int, 3>, 6> perms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::array<std::array<Lattice, 4>, 6> out{};
  for (int p = 0; p < 6; ++p) {
    Lattice cur{0, 0, 0};
    out[p][0] = cur;
    for (int s = 0; s < 3; ++s) {
      cur[perms[p][s]] += 1;
      out[p][s + 1] = cur;
    }
    // Odd permutations come out negatively oriented; swap the last two vertices.
    const auto& q = out[p];
    Mat3 m;
    for (int c = 0; c < 3; ++c) {
      for (int r = 0; r < 3; ++r) m(r, c) = q[c + 1][r] - q[0][r];
    }
    if (m.determinant() < 0) std::swap(out[p][2], out[p][3]);
  }
  return out;
}

struct ArrayHash {
  template <std::size_t N>
  std::size_t operator()(const std::array<std::int64_t, N>& a) const {
    std::uint64_t h = 1469598103934665603ull;
    for (auto v : a) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

// Builds edges and faces of a Kuhn lattice mesh. `key` maps a lattice point
// to an integer identifying it up to the mesh's identification (translation
// canonicalization happens in `canonical`), `vid` maps it to the stored
// vertex id used for orientation.
template <class Canonical, class VertexId>
void build_topology(TetMesh& mesh, const std::vector<std::array<Lattice, 4>>& tet_lattice,
                    Canonical canonical, VertexId vid) {
  const std::size_t nt = tet_lattice.size();
  mesh.tet_edges.assign(nt, {});
  mesh.tet_faces.assign(nt, {});
  std::unordered_map<std::array<std::int64_t, 2>, int, ArrayHash> edge_ids;
  std::unordered_map<std::array<std::int64_t, 3>, int, ArrayHash> face_ids;
  edge_ids.reserve(nt * 2);
  face_ids.reserve(nt * 3);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& lat = tet_lattice[t];
    for (int e = 0; e < 6; ++e) {
      const auto [a, b] = kLocalEdges[e];
      auto key2 = canonical(std::array<Lattice, 2>{lat[a], lat[b]});
      auto [it, inserted] =
          edge_ids.try_emplace(std::array<std::int64_t, 2>{key2[0], key2[1]},
                               static_cast<int>(mesh.edges.size()));
      if (inserted) {
        int va = vid(lat[a]);
        int vb = vid(lat[b]);
        mesh.edges.push_back({std::min(va, vb), std::max(va, vb)});
      }
      mesh.tet_edges[t][e] = it->second;
    }
    for (int f = 0; f < 4; ++f) {
      const auto& lf = kLocalFaces[f];
      auto key3 = canonical(std::array<Lattice, 3>{lat[lf[0]], lat[lf[1]], lat[lf[2]]});
      auto [it, inserted] =
          face_ids.try_emplace(std::array<std::int64_t, 3>{key3[0], key3[1], key3[2]},
                               static_cast<int>(mesh.faces.size()));
      const auto& g = mesh.geometry[t];
      if (inserted) {
        Face face;
        std::array<int, 3> vs{vid(lat[lf[0]]), vid(lat[lf[1]]), vid(lat[lf[2]])};
        std::sort(vs.begin(), vs.end());
        face.vertices = vs;
        face.owner = static_cast<int>(t);
        face.owner_local = f;
        const Vec3& p0 = g.points[lf[0]];
        const Vec3& p1 = g.points[lf[1]];
        const Vec3& p2 = g.points[lf[2]];
        const Vec3 cr = (p1 - p0).cross(p2 - p0);
        face.area = 0.5 * cr.norm();
        face.diameter = std::max({(p1 - p0).norm(), (p2 - p0).norm(), (p2 - p1).norm()});
        // Outward from the owner: opposite to the gradient of the opposite vertex.
        face.normal = -g.grad[f].normalized();
        mesh.faces.push_back(face);
      } else {
        Face& face = mesh.faces[it->second];
        if (face.neighbor >= 0) {
          throw Error(ErrorKind::invalid_argument, "non-manifold face in mesh construction");
        }
        face.neighbor = static_cast<int>(t);
        face.neighbor_local = f;
      }
      mesh.tet_faces[t][f] = it->second;
    }
  }
  mesh.edge_on_boundary.assign(mesh.edges.size(), 0);
  for (const auto& face : mesh.faces) {
    if (!face.boundary()) continue;
    const auto& te = mesh.tet_edges[face.owner];
    for (int e = 0; e < 6; ++e) {
      const auto [a, b] = kLocalEdges[e];
      if (a != face.owner_local && b != face.owner_local) mesh.edge_on_boundary[te[e]] = 1;
    }
  }
}

}  // namespace detail

inline MacroMesh build_box_mesh(const Box& box, int n) {
  if (n < 1) throw Error(ErrorKind::invalid_argument, "build_box_mesh: n must be >= 1");
  if (n > 127) throw Error(ErrorKind::invalid_argument, "build_box_mesh: n must be <= 127");
  const Vec3 ext = box.extent();
  if (!(ext.minCoeff() > 0.0) || !ext.allFinite()) {
    throw Error(ErrorKind::invalid_argument, "build_box_mesh: degenerate box");
  }
  MacroMesh mesh;
  mesh.box = box;
  mesh.n = n;
  const int m = n + 1;
  auto vid = [m](const detail::Lattice& l) { return l[0] + m * (l[1] + m * l[2]); };
  mesh.vertices.resize(static_cast<std::size_t>(m) * m * m);
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        mesh.vertices[vid({i, j, k})] =
            box.lo + Vec3(ext[0] * i / n, ext[1] * j / n, ext[2] * k / n);
      }
  const auto offsets = detail::kuhn_offsets();
  std::vector<std::array<detail::Lattice, 4>> lattice;
  lattice.reserve(static_cast<std::size_t>(6) * n * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < 6; ++p) {
          std::array<detail::Lattice, 4> lt{};
          std::array<int, 4> ids{};
          std::array<Vec3, 4> pts;
          for (int a = 0; a < 4; ++a) {
            lt[a] = {i + offsets[p][a][0], j + offsets[p][a][1], k + offsets[p][a][2]};
            ids[a] = vid(lt[a]);
            pts[a] = mesh.vertices[ids[a]];
          }
          lattice.push_back(lt);
          mesh.tets.push_back(ids);
          mesh.geometry.push_back(make_geometry(pts));
        }
  auto canonical = [&vid](const auto& pts) {
    std::array<std::int64_t, std::tuple_size_v<std::decay_t<decltype(pts)>>> key{};
    for (std::size_t a = 0; a < pts.size(); ++a) key[a] = vid(pts[a]);
    std::sort(key.begin(), key.end());
    return key;
  };
  detail::build_topology(mesh, lattice, canonical, vid);
  return mesh;
}

inline PeriodicMicroMesh build_periodic_cube_mesh(int n) {
  if (n < 2) throw Error(ErrorKind::invalid_argument, "build_periodic_cube_mesh: n must be >= 2");
  if (n > 63) throw Error(ErrorKind::invalid_argument, "build_periodic_cube_mesh: n must be <= 63");
  PeriodicMicroMesh mesh;
  mesh.n = n;
  const int m = n + 1;
  auto lattice_id = [m](const detail::Lattice& l) { return l[0] + m * (l[1] + m * l[2]); };
  auto master_id = [n](const detail::Lattice& l) {
    return (l[0] % n) + n * ((l[1] % n) + n * (l[2] % n));
  };
  mesh.vertices.resize(static_cast<std::size_t>(m) * m * m);
  mesh.master.resize(mesh.vertices.size());
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        const detail::Lattice l{i, j, k};
        mesh.vertices[lattice_id(l)] =
            Vec3(static_cast<double>(i) / n - 0.5, static_cast<double>(j) / n - 0.5,
                 static_cast<double>(k) / n - 0.5);
        mesh.master[lattice_id(l)] = master_id(l);
      }
  mesh.num_masters = n * n * n;
  const auto offsets = detail::kuhn_offsets();
  std::vector<std::array<detail::Lattice, 4>> lattice;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < 6; ++p) {
          std::array<detail::Lattice, 4> lt{};
          std::array<int, 4> ids{};
          std::array<Vec3, 4> pts;
          for (int a = 0; a < 4; ++a) {
            lt[a] = {i + offsets[p][a][0], j + offsets[p][a][1], k + offsets[p][a][2]};
            ids[a] = lattice_id(lt[a]);
            pts[a] = mesh.vertices[ids[a]];
          }
          lattice.push_back(lt);
          mesh.tets.push_back(ids);
          mesh.geometry.push_back(make_geometry(pts));
        }
  // Entities are identified up to translation by multiples of n: shift so the
  // lexicographically smallest vertex lies in [0, n)^3, then encode.
  const int w = 2 * n;
  auto canonical = [n, w](const auto& pts) {
    constexpr std::size_t N = std::tuple_size_v<std::decay_t<decltype(pts)>>;
    detail::Lattice lo = *std::min_element(pts.begin(), pts.end());
    std::array<std::int64_t, N> key{};
    for (std::size_t a = 0; a < N; ++a) {
      std::array<std::int64_t, 3> c{};
      for (int d = 0; d < 3; ++d) c[d] = pts[a][d] - n * (lo[d] / n);
      key[a] = c[0] + static_cast<std::int64_t>(w) * (c[1] + static_cast<std::int64_t>(w) * c[2]);
    }
    std::sort(key.begin(), key.end());
    return key;
  };
  detail::build_topology(mesh, lattice, canonical, master_id);
  return mesh;
}

namespace detail {

template <class Mesh>
std::pair<int, std::array<double, 4>> locate_in_cube(const Mesh& mesh, int cube, const Vec3& x) {
  int best = -1;
  double best_min = -std::numeric_limits<double>::infinity();
  std::array<double, 4> best_l{};
  for (int p = 0; p < 6; ++p) {
    const int t = 6 * cube + p;
    auto l = mesh.geometry[t].barycentric(x);
    const double mn = *std::min_element(l.begin(), l.end());
    if (mn > best_min) {
      best_min = mn;
      best = t;
      best_l = l;
    }
    if (mn >= 0.0) break;
  }
  double sum = 0.0;
  for (auto& v : best_l) {
    v = std::clamp(v, 0.0, 1.0);
    sum += v;
  }
  for (auto& v : best_l) v /= sum;
  return {best, best_l};
}

}  // namespace detail

inline std::pair<int, std::array<double, 4>> MacroMesh::locate(const Vec3& x) const {
  const Vec3 ext = box.extent();
  std::array<int, 3> c{};
  for (int d = 0; d < 3; ++d) {
    const double tol = 1e-12 * ext[d];
    if (!(x[d] >= box.lo[d] - tol && x[d] <= box.hi[d] + tol)) {
      throw Error(ErrorKind::out_of_domain, "point outside the macro domain");
    }
    const double s = (x[d] - box.lo[d]) / ext[d] * n;
    c[d] = std::clamp(static_cast<int>(std::floor(s)), 0, n - 1);
  }
  Vec3 xc = x.cwiseMax(box.lo).cwiseMin(box.hi);
  return detail::locate_in_cube(*this, c[0] + n * (c[1] + n * c[2]), xc);
}

inline Vec3 wrap_to_cell(const Vec3& y) {
  Vec3 w;
  for (int d = 0; d < 3; ++d) {
    w[d] = y[d] - std::floor(y[d] + 0.5);
    if (w[d] >= 0.5) w[d] -= 1.0;
  }
  return w;
}

inline std::pair<int, std::array<double, 4>> PeriodicMicroMesh::locate(const Vec3& y) const {
  const Vec3 w = wrap_to_cell(y);
  std::array<int, 3> c{};
  for (int d = 0; d < 3; ++d) {
    c[d] = std::clamp(static_cast<int>(std::floor((w[d] + 0.5) * n)), 0, n - 1);
  }
  return detail::locate_in_cube(*this, c[0] + n * (c[1] + n * c[2]), w);
}

}  // namespace mhmm
