#pragma once

// Locally periodic coefficient pairs (mu^{-1}(x, y), kappa(x, y)) and their
// piecewise-constant barycenter sampling on macro x micro element pairs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "mhmm/mesh.hpp"
#include "mhmm/types.hpp"

namespace mhmm {

using Params = std::map<std::string, double>;

struct CoefficientField {
  std::string name;
  Params params;
  std::function<double(const Vec3&, const Vec3&)> mu_inv;
  std::function<cplx(const Vec3&, const Vec3&)> kappa;
  double c0 = 0.0;
  double c1 = 0.0;
  bool x_independent = false;
  // Lipschitz constant of (x, y) -> kappa for the sampling-error bound; 0 if unknown.
  double kappa_lipschitz = 0.0;
};

namespace detail {

inline double param(const Params& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

inline void require_known_params(const std::string& preset, const Params& p,
                                 std::initializer_list<const char*> known) {
  for (const auto& [k, v] : p) {
    if (std::find_if(known.begin(), known.end(), [&](const char* s) { return k == s; }) ==
        known.end()) {
      throw Error(ErrorKind::invalid_argument,
                  "preset '" + preset + "': unknown parameter '" + k + "'");
    }
  }
}

}  // namespace detail

/// Presets:
///   constant      mu^{-1} = m0, kappa = k0_re + i k0_im
///   laminate_y1   mu^{-1} = a + b sin(2 pi y_axis), kappa = mu^{-1} (1 - i)
///   separable_xy  laminate_y1 scaled by (1 + gamma x_1)
/// `box` is the macro domain, used for the x-range of the bounds.
inline CoefficientField make_coefficients(const std::string& name, const Params& params,
                                          const Box& box = Box{}) {
  using detail::param;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  CoefficientField f;
  f.name = name;
  f.params = params;
  if (name == "constant") {
    detail::require_known_params(name, params, {"m0", "k0_re", "k0_im"});
    const double m0 = param(params, "m0", 1.0);
    const cplx k0(param(params, "k0_re", 1.0), param(params, "k0_im", -1.0));
    f.mu_inv = [m0](const Vec3&, const Vec3&) { return m0; };
    f.kappa = [k0](const Vec3&, const Vec3&) { return k0; };
    f.c0 = std::min({m0, k0.real(), -k0.imag()});
    f.c1 = std::max({m0, k0.real(), -k0.imag()});
    f.x_independent = true;
  } else if (name == "laminate_y1" || name == "separable_xy") {
    const bool sep = name == "separable_xy";
    if (sep) {
      detail::require_known_params(name, params, {"a", "b", "axis", "gamma"});
    } else {
      detail::require_known_params(name, params, {"a", "b", "axis"});
    }
    const double a = param(params, "a", 2.0);
    const double b = param(params, "b", 1.0);
    const int axis = static_cast<int>(param(params, "axis", 0.0));
    const double gamma = sep ? param(params, "gamma", 0.5) : 0.0;
    if (axis < 0 || axis > 2) throw Error(ErrorKind::invalid_argument, name + ": axis must be 0, 1 or 2");
    if (!(a > 0.0) || !(std::abs(b) < a)) {
      throw Error(ErrorKind::invalid_argument, name + ": bounds require |b| < a");
    }
    const double s_lo = std::min(1.0 + gamma * box.lo[0], 1.0 + gamma * box.hi[0]);
    const double s_hi = std::max(1.0 + gamma * box.lo[0], 1.0 + gamma * box.hi[0]);
    if (!(s_lo > 0.0)) throw Error(ErrorKind::invalid_argument, name + ": 1 + gamma x_1 must stay positive");
    auto base = [a, b, axis, two_pi](const Vec3& y) { return a + b * std::sin(two_pi * y[axis]); };
    f.mu_inv = [base, gamma](const Vec3& x, const Vec3& y) { return (1.0 + gamma * x[0]) * base(y); };
    f.kappa = [base, gamma](const Vec3& x, const Vec3& y) {
      return (1.0 + gamma * x[0]) * base(y) * cplx(1.0, -1.0);
    };
    f.c0 = s_lo * (a - std::abs(b));
    f.c1 = s_hi * (a + std::abs(b));
    f.x_independent = gamma == 0.0;
    // |grad_y kappa| <= 2 pi |b| sqrt(2) s_hi, |grad_x kappa| <= |gamma| (a + |b|) sqrt(2).
    f.kappa_lipschitz =
        std::numbers::sqrt2 * (two_pi * std::abs(b) * s_hi + std::abs(gamma) * (a + std::abs(b)));
  } else {
    throw Error(ErrorKind::invalid_argument, "unknown coefficient preset '" + name + "'");
  }
  if (!(f.c0 > 0.0)) throw Error(ErrorKind::invalid_argument, name + ": lower bound c0 must be positive");
  return f;
}

struct BoundsReport {
  double mu_min, mu_max, re_kappa_min, re_kappa_max, neg_im_kappa_min, neg_im_kappa_max;
  double periodicity_defect;
  bool ok;
};

/// Probes a 5^3 x 5^3 grid of (x, y) and checks c0 <= mu^{-1}, Re kappa, -Im kappa <= c1
/// and periodicity in y.
inline BoundsReport check_bounds(const CoefficientField& f, const Box& box = Box{}) {
  BoundsReport r{1e300, -1e300, 1e300, -1e300, 1e300, -1e300, 0.0, true};
  const int m = 5;
  for (int xi = 0; xi < m * m * m; ++xi) {
    const Vec3 s((xi % m) / (m - 1.0), ((xi / m) % m) / (m - 1.0), (xi / (m * m)) / (m - 1.0));
    const Vec3 x = box.lo + s.cwiseProduct(box.extent());
    for (int yi = 0; yi < m * m * m; ++yi) {
      const Vec3 y(-0.5 + (yi % m) / (m - 1.0) * 0.999, -0.5 + ((yi / m) % m) / (m - 1.0) * 0.999,
                   -0.5 + (yi / (m * m)) / (m - 1.0) * 0.999);
      const double mu = f.mu_inv(x, y);
      const cplx k = f.kappa(x, y);
      r.mu_min = std::min(r.mu_min, mu);
      r.mu_max = std::max(r.mu_max, mu);
      r.re_kappa_min = std::min(r.re_kappa_min, k.real());
      r.re_kappa_max = std::max(r.re_kappa_max, k.real());
      r.neg_im_kappa_min = std::min(r.neg_im_kappa_min, -k.imag());
      r.neg_im_kappa_max = std::max(r.neg_im_kappa_max, -k.imag());
      for (int d = 0; d < 3; ++d) {
        const Vec3 ys = y + Vec3::Unit(d);
        r.periodicity_defect = std::max(r.periodicity_defect, std::abs(f.mu_inv(x, ys) - mu));
        r.periodicity_defect = std::max(r.periodicity_defect, std::abs(f.kappa(x, ys) - k));
      }
    }
  }
  const double tol = 1e-12 * std::max(1.0, f.c1);
  r.ok = r.mu_min >= f.c0 - tol && r.mu_max <= f.c1 + tol && r.re_kappa_min >= f.c0 - tol &&
         r.re_kappa_max <= f.c1 + tol && r.neg_im_kappa_min >= f.c0 - tol &&
         r.neg_im_kappa_max <= f.c1 + tol && r.periodicity_defect <= 1e-12 * std::max(1.0, f.c1);
  return r;
}

/// Values mu^{-1}(x_j, y_i), kappa(x_j, y_i) per macro tet j and micro tet i.
/// x-independent fields store a single row shared by every j.
struct SampledCoefficients {
  struct Row {
    std::vector<double> mu_inv;
    std::vector<cplx> kappa;
  };

  std::vector<Row> rows;
  std::vector<int> row_of;  // macro tet -> row index

  const Row& operator[](int j) const { return rows[row_of[j]]; }
  std::size_t num_macro() const { return row_of.size(); }
  bool shared() const { return rows.size() == 1; }
};

inline SampledCoefficients sample(const CoefficientField& f, const MacroMesh& macro,
                                  const PeriodicMicroMesh& micro) {
  SampledCoefficients s;
  const std::size_t nj = macro.num_tets();
  const std::size_t ni = micro.num_tets();
  auto make_row = [&](const Vec3& x) {
    SampledCoefficients::Row row;
    row.mu_inv.resize(ni);
    row.kappa.resize(ni);
    for (std::size_t i = 0; i < ni; ++i) {
      const Vec3& y = micro.geometry[i].barycenter;
      row.mu_inv[i] = f.mu_inv(x, y);
      row.kappa[i] = f.kappa(x, y);
    }
    return row;
  };
  if (f.x_independent) {
    s.rows.push_back(make_row(macro.geometry[0].barycenter));
    s.row_of.assign(nj, 0);
  } else {
    s.rows.reserve(nj);
    for (std::size_t j = 0; j < nj; ++j) s.rows.push_back(make_row(macro.geometry[j].barycenter));
    s.row_of.resize(nj);
    for (std::size_t j = 0; j < nj; ++j) s.row_of[j] = static_cast<int>(j);
  }
  return s;
}

}  // namespace mhmm
