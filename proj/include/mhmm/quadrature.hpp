#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "mhmm/types.hpp"

namespace mhmm {

/// Tetrahedral rule in barycentric coordinates; weights are normalized to sum
/// to one, so an integral is |T| * sum_q w_q f(x_q).
struct QuadratureRule {
  std::vector<std::array<double, 4>> points;
  std::vector<double> weights;
  int degree = 0;

  std::size_t size() const { return weights.size(); }
};

/// Triangle rule in barycentric coordinates, weights summing to one.
struct TriangleRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int degree = 0;
};

namespace detail {

inline void add_orbit_31(QuadratureRule& r, double a, double b, double w) {
  for (int i = 0; i < 4; ++i) {
    std::array<double, 4> p{b, b, b, b};
    p[i] = a;
    r.points.push_back(p);
    r.weights.push_back(w);
  }
}

inline void add_orbit_22(QuadratureRule& r, double a, double b, double w) {
  static constexpr std::array<std::array<int, 2>, 6> pairs{
      {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
  for (const auto& [i, j] : pairs) {
    std::array<double, 4> p{b, b, b, b};
    p[i] = a;
    p[j] = a;
    r.points.push_back(p);
    r.weights.push_back(w);
  }
}

}  // namespace detail

/// Rules of exactness degree 1 (centroid), 2 (four points) and 4 (Keast, 11 points).
inline const QuadratureRule& tet_rule(int degree) {
  static const QuadratureRule d1 = [] {
    QuadratureRule r;
    r.degree = 1;
    r.points.push_back({0.25, 0.25, 0.25, 0.25});
    r.weights.push_back(1.0);
    return r;
  }();
  static const QuadratureRule d2 = [] {
    QuadratureRule r;
    r.degree = 2;
    const double b = (5.0 - std::sqrt(5.0)) / 20.0;
    detail::add_orbit_31(r, 1.0 - 3.0 * b, b, 0.25);
    return r;
  }();
  static const QuadratureRule d4 = [] {
    QuadratureRule r;
    r.degree = 4;
    r.points.push_back({0.25, 0.25, 0.25, 0.25});
    r.weights.push_back(-444.0 / 5625.0);
    detail::add_orbit_31(r, 11.0 / 14.0, 1.0 / 14.0, 2058.0 / 45000.0);
    const double s = std::sqrt(5.0 / 14.0);
    detail::add_orbit_22(r, (1.0 + s) / 4.0, (1.0 - s) / 4.0, 336.0 / 2250.0);
    return r;
  }();
  switch (degree) {
    case 0:
    case 1: return d1;
    case 2: return d2;
    case 3:
    case 4: return d4;
    default:
      throw Error(ErrorKind::invalid_argument,
                  "tet_rule: quadrature degree " + std::to_string(degree) + " unavailable");
  }
}

/// Degree-2 three-point rule on a triangle.
inline const TriangleRule& triangle_rule2() {
  static const TriangleRule r = [] {
    TriangleRule t;
    t.degree = 2;
    t.points = {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}};
    t.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    return t;
  }();
  return r;
}

/// Gauss-Legendre on [0, 1] with five points (degree 9).
inline const std::array<std::pair<double, double>, 5>& gauss_line5() {
  static const std::array<std::pair<double, double>, 5> r = [] {
    const double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    const double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
    const double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
    std::array<std::pair<double, double>, 5> g{{{0.5 * (1 - b), 0.5 * wb},
                                                {0.5 * (1 - a), 0.5 * wa},
                                                {0.5, 0.5 * 128.0 / 225.0},
                                                {0.5 * (1 + a), 0.5 * wa},
                                                {0.5 * (1 + b), 0.5 * wb}}};
    return g;
  }();
  return r;
}

}  // namespace mhmm
