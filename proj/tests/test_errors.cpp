#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "mhmm/errors.hpp"

using namespace mhmm;

namespace {

std::shared_ptr<const MacroMesh> macro_mesh(int n) {
  return std::make_shared<const MacroMesh>(build_box_mesh(Box{}, n));
}

std::shared_ptr<const PeriodicMicroMesh> micro_mesh(int n) {
  return std::make_shared<const PeriodicMicroMesh>(build_periodic_cube_mesh(n));
}

// Gradient of the P1 interpolant on a tet from vertex differences.
template <class Scalar>
Eigen::Matrix<Scalar, 3, 1> p1_gradient(const TetGeometry& g, const std::array<Scalar, 4>& u) {
  Mat3 e;
  Eigen::Matrix<Scalar, 3, 1> du;
  for (int r = 0; r < 3; ++r) {
    e.row(r) = (g.points[r + 1] - g.points[0]).transpose();
    du[r] = u[r + 1] - u[0];
  }
  return e.inverse().cast<Scalar>() * du;
}

// Coarse P1 corrector DOFs prolongated to nested fine micro masters.
Eigen::VectorXcd prolong(const Eigen::VectorXcd& u, int comps, const PeriodicMicroMesh& coarse,
                         const PeriodicMicroMesh& fine) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(comps * fine.num_masters);
  for (std::size_t v = 0; v < fine.vertices.size(); ++v) {
    const auto [t, l] = coarse.locate(fine.vertices[v]);
    const auto mt = coarse.master_tet(t);
    for (int c = 0; c < comps; ++c) {
      cplx s = 0.0;
      for (int a = 0; a < 4; ++a) s += l[a] * u[comps * mt[a] + c];
      out[comps * fine.master[v] + c] = s;
    }
  }
  return out;
}

}  // namespace

TEST(EnergyNorm, ZeroField) {
  const auto macro = macro_mesh(1);
  const auto micro = micro_mesh(2);
  const auto e = energy_norm(TwoScaleField{}, *macro, *micro);
  EXPECT_EQ(e.total(), 0.0);
}

TEST(EnergyNorm, ConstantPresetMacroOnly) {
  const auto macro = macro_mesh(2);
  const auto micro = micro_mesh(2);
  const auto s = solve_hmm(macro, micro, make_coefficients("constant", {}), make_source("sin_e1", {}), 0.25);
  const auto e = energy_norm(two_scale_field(s), *macro, *micro);
  // Oracle: plain quadrature of E_H and its curl.
  double c = 0.0, l = 0.0;
  const auto& r = tet_rule(4);
  for (int j = 0; j < static_cast<int>(macro->num_tets()); ++j) {
    const auto& g = macro->geometry[j];
    c += g.volume * s.space->curl(j, s.dofs).squaredNorm();
    for (std::size_t q = 0; q < r.size(); ++q)
      l += r.weights[q] * g.volume * s.space->value(j, s.dofs, r.points[q]).squaredNorm();
  }
  EXPECT_NEAR(e.curl, std::sqrt(c), 1e-12);
  EXPECT_NEAR(e.l2, std::sqrt(l), 1e-12);
  EXPECT_LT(e.div, 1e-12);
  EXPECT_NEAR(e.total(), std::sqrt(c) + std::sqrt(l), 1e-12);
}

TEST(EnergyNorm, SineCorrectorAgainstQuadratureOracle) {
  const auto macro = macro_mesh(1);
  const auto micro = micro_mesh(16);
  const PeriodicScalarSpace p1(*micro);
  const Eigen::VectorXd s = p1.interpolate([](const Vec3& y) { return std::sin(2 * std::numbers::pi * y[0]); });
  Eigen::VectorXcd u1 = Eigen::VectorXcd::Zero(3 * micro->num_masters);
  for (int m = 0; m < micro->num_masters; ++m) u1[3 * m + 1] = s[m];
  TwoScaleField t;
  t.k1 = [&](int) { return u1; };
  const auto e = energy_norm(t, *macro, *micro);
  // Oracle: curl of the interpolant from vertex differences.
  double c = 0.0;
  for (std::size_t i = 0; i < micro->num_tets(); ++i) {
    const auto& g = micro->geometry[i];
    const auto mt = micro->master_tet(static_cast<int>(i));
    std::array<double, 4> v{};
    for (int a = 0; a < 4; ++a) v[a] = s[mt[a]];
    const Vec3 grad = p1_gradient(g, v);
    c += g.volume * grad.cross(Vec3::UnitY()).squaredNorm();  // curl(u e_2) = grad u x e_2
  }
  EXPECT_NEAR(e.curl, std::sqrt(c), 1e-10);
  EXPECT_LT(e.div, 1e-12);  // u depends on y_1 only and points along e_2
  EXPECT_NEAR(e.curl, 2 * std::numbers::pi * std::sqrt(0.5), 0.05 * 2 * std::numbers::pi * std::sqrt(0.5));
}

TEST(EnergyNorm, NormAxiomsOnRandomTriples) {
  const auto macro = macro_mesh(1);
  const auto micro = micro_mesh(2);
  const EdgeSpace space(*macro);
  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  auto random_vec = [&](int n) {
    Eigen::VectorXcd v(n);
    for (auto& x : v) x = cplx(nd(rng), nd(rng));
    return v;
  };
  struct Triple {
    Eigen::VectorXcd e, k1, k2;
  };
  auto field = [&](const Triple& tr) {
    TwoScaleField t;
    t.value = [&space, &tr, &macro](int j, const Vec3& x) {
      return space.value(j, tr.e, macro->geometry[j].barycentric(x));
    };
    t.curl = [&space, &tr](int j, const Vec3&) { return space.curl(j, tr.e); };
    t.k1 = [&tr](int) { return tr.k1; };
    t.k2 = [&tr](int) { return tr.k2; };
    return t;
  };
  // The box n=1 mesh has one interior edge; use enough DOFs to be nontrivial.
  for (int trial = 0; trial < 5; ++trial) {
    const Triple a{random_vec(space.num_dofs()), random_vec(3 * micro->num_masters), random_vec(micro->num_masters)};
    const Triple b{random_vec(space.num_dofs()), random_vec(3 * micro->num_masters), random_vec(micro->num_masters)};
    const cplx lambda(nd(rng), nd(rng));
    const Triple sum{a.e + b.e, a.k1 + b.k1, a.k2 + b.k2};
    const Triple scaled{lambda * a.e, lambda * a.k1, lambda * a.k2};
    const double na = energy_norm(field(a), *macro, *micro).total();
    const double nb = energy_norm(field(b), *macro, *micro).total();
    const double ns = energy_norm(field(sum), *macro, *micro).total();
    const double nl = energy_norm(field(scaled), *macro, *micro).total();
    EXPECT_LE(ns, (na + nb) * (1 + 1e-12));
    EXPECT_NEAR(nl, std::abs(lambda) * na, 1e-12 * nl);
    EXPECT_GT(na, 0.0);
  }
}

TEST(DirectFine, ConstantPresetIndependentOfDelta) {
  const auto fine = macro_mesh(8);
  const auto coeffs = make_coefficients("constant", {});
  const auto src = make_source("sin_e1", {});
  const auto a = solve_direct_fine(coeffs, 1.0, src, fine, 1.0);
  const auto b = solve_direct_fine(coeffs, 0.5, src, fine, 1.0);
  EXPECT_LE((a.dofs - b.dofs).norm(), 1e-14 * a.dofs.norm());
  EXPECT_LE(a.residual, 1e-10);
  const auto two = solve_direct_fine(coeffs, 1.0, make_source("sin_e1", {{"a_re", 2.0}}), fine, 1.0);
  EXPECT_LE((two.dofs - 2.0 * a.dofs).norm(), 1e-12 * two.dofs.norm());
}

TEST(DirectFine, ResolutionGuard) {
  const auto fine = macro_mesh(8);
  try {
    solve_direct_fine(make_coefficients("laminate_y1", {}), 0.5, make_source("constant", {}), fine);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::resolution_guard);
    EXPECT_NE(std::string(e.what()).find("n >= 16"), std::string::npos);
  }
  EXPECT_NO_THROW(solve_direct_fine(make_coefficients("laminate_y1", {}), 0.5, make_source("constant", {}), fine, 4.0));
}

TEST(DirectFine, LaminatePhaseShiftSanity) {
  const auto fine = macro_mesh(16);
  const double delta = 0.5;
  const auto lam = make_coefficients("laminate_y1", {});
  auto shifted = lam;
  shifted.mu_inv = [lam](const Vec3& x, const Vec3& y) { return lam.mu_inv(x, y + Vec3(0.5, 0, 0)); };
  shifted.kappa = [lam](const Vec3& x, const Vec3& y) { return lam.kappa(x, y + Vec3(0.5, 0, 0)); };
  const auto src = make_source("constant", {});
  const auto a = solve_direct_fine(lam, delta, src, fine);
  const auto b = solve_direct_fine(shifted, delta, src, fine);
  EXPECT_GT((a.dofs - b.dofs).norm(), 1e-6 * a.dofs.norm());
  EXPECT_LT(a.dofs.norm(), 2 * b.dofs.norm());
  EXPECT_LT(b.dofs.norm(), 2 * a.dofs.norm());
}

TEST(ModelingError, VanishesForConstantCoefficientsOnTheSameMesh) {
  const auto macro = macro_mesh(4);
  const auto coeffs = make_coefficients("constant", {});
  const auto src = make_source("sin_e1", {});
  const auto fine = solve_direct_fine(coeffs, 0.5, src, macro, 1.0);
  const auto hmm = solve_hmm(macro, micro_mesh(2), coeffs, src, 0.5);
  EXPECT_LT(modeling_error(fine, hmm), 1e-10);
}

TEST(Mms, ConvergenceAndInterpolationRates) {
  const std::vector<int> ns{4, 8, 16};
  const auto rows = mms_reference(cplx(1.0, -1.0), ns);
  std::vector<double> err, interp;
  for (const auto& r : rows) {
    err.push_back(r.error.hcurl());
    interp.push_back(r.interpolation.hcurl());
  }
  EXPECT_LT(err[1], err[0]);
  const double rate = observed_rate(ns, err);
  EXPECT_GE(rate, 0.8);
  EXPECT_LE(rate, 1.15);
  EXPECT_NEAR(observed_rate(ns, interp), 1.0, 0.15);
  EXPECT_THROW(mms_reference(cplx(1.0, 1.0), {4}), Error);
}

TEST(ObservedRate, ExactPowerLaw) {
  EXPECT_NEAR(observed_rate({2, 4, 8}, {1.0, 0.25, 0.0625}), 2.0, 1e-14);
}

TEST(Helmholtz, ExactGradientHasNoCurlPart) {
  const auto macro = macro_mesh(4);
  const EdgeSpace space(*macro);
  // theta0 = x(1-x) y(1-y) z(1-z) at vertices: P1 with zero boundary values.
  auto theta0 = [](const Vec3& p) { return p[0] * (1 - p[0]) * p[1] * (1 - p[1]) * p[2] * (1 - p[2]); };
  Eigen::VectorXcd dofs = Eigen::VectorXcd::Zero(space.num_dofs());
  for (std::size_t e = 0; e < macro->num_edges(); ++e) {
    const int d = space.edge_dof(static_cast<int>(e));
    if (d >= 0) dofs[d] = theta0(macro->vertices[macro->edges[e][1]]) - theta0(macro->vertices[macro->edges[e][0]]);
  }
  // Sanity: the field is the gradient of the P1 interpolant (curl free).
  for (int t = 0; t < static_cast<int>(macro->num_tets()); ++t) EXPECT_LT(space.curl(t, dofs).norm(), 1e-14);
  const auto split = helmholtz_split(space, dofs, nullptr, refine(*macro, 2));
  EXPECT_LE(split.z, 1e-9);
  EXPECT_GT(split.theta, 1e-4);
}

TEST(Helmholtz, CurlFieldHasSmallGradientPart) {
  const auto macro = macro_mesh(8);
  const EdgeSpace space(*macro);
  const CVec3 a(0.3, cplx(-1.0, 0.5), 2.0);
  const auto dofs = interpolate_edges(space, [&](const Vec3& x) { return cross(a, x); });
  const auto split = helmholtz_split(space, dofs, nullptr, refine(*macro, 2));
  EXPECT_LE(split.theta, 0.1 * split.z);
}

TEST(Helmholtz, NonNestedRejected) {
  const auto macro = macro_mesh(4);
  const EdgeSpace space(*macro);
  EXPECT_THROW(helmholtz_split(space, Eigen::VectorXcd::Zero(space.num_dofs()), nullptr, *macro_mesh(6)), Error);
}

TEST(ErrorTriple, SelfReferenceIsZero) {
  const auto s = solve_hmm(macro_mesh(2), micro_mesh(4), make_coefficients("laminate_y1", {}), make_source("constant", {}), 0.25);
  const auto e = error_triple(s, s);
  EXPECT_LT(e.total(), 1e-12);
}

TEST(ErrorTriple, AgreesWithDirectQuadratureOnNestedMeshes) {
  const auto coeffs = make_coefficients("separable_xy", {{"gamma", 0.5}});
  const auto src = make_source("sin_e1", {});
  const auto coarse = solve_hmm(macro_mesh(1), micro_mesh(2), coeffs, src, 0.25);
  const auto fine = solve_hmm(macro_mesh(2), micro_mesh(4), coeffs, src, 0.25);
  const auto e = error_triple(coarse, fine, 2);
  // Oracle: the difference as a TwoScaleField on the fine meshes.
  const auto cf = two_scale_field(coarse);
  const auto ff = two_scale_field(fine);
  auto parent = [&](int t) { return coarse.macro->locate(fine.macro->geometry[t].barycenter).first; };
  TwoScaleField d;
  d.value = [&](int t, const Vec3& x) { return ff.value(t, x) - cf.value(parent(t), x); };
  d.curl = [&](int t, const Vec3& x) { return ff.curl(t, x) - cf.curl(parent(t), x); };
  d.k1 = [&](int t) { return Eigen::VectorXcd(ff.k1(t) - prolong(cf.k1(parent(t)), 3, *coarse.micro, *fine.micro)); };
  d.k2 = [&](int t) { return Eigen::VectorXcd(ff.k2(t) - prolong(cf.k2(parent(t)), 1, *coarse.micro, *fine.micro)); };
  const auto direct = energy_norm(d, *fine.macro, *fine.micro);
  EXPECT_NEAR(e.parts.curl, direct.curl, 1e-10 * direct.curl);
  EXPECT_NEAR(e.parts.div, direct.div, 1e-10 * std::max(1e-3, direct.div));
  EXPECT_NEAR(e.parts.l2, direct.l2, 1e-10 * direct.l2);
  double sum = 0.0;
  for (std::size_t j = 0; j < coarse.macro->num_tets(); ++j) sum += e.local_curl2[j];
  EXPECT_NEAR(std::sqrt(sum), e.parts.curl, 1e-12);
}

TEST(ErrorTriple, ConstantPresetMatchesSingleScaleError) {
  const auto coeffs = make_coefficients("constant", {});
  const auto src = make_source("sin_e1", {});
  const auto coarse = solve_hmm(macro_mesh(4), micro_mesh(2), coeffs, src, 0.25);
  const auto over = solve_hmm(macro_mesh(16), micro_mesh(2), coeffs, src, 0.25);
  const auto e = error_triple(coarse, over);
  // Single-scale oracle: H(curl)-type error of E_4 against E_16 by point location.
  double c = 0.0, l = 0.0;
  const auto& r = tet_rule(2);
  for (int t = 0; t < static_cast<int>(over.macro->num_tets()); ++t) {
    const auto& g = over.macro->geometry[t];
    const Vec3 xc = g.barycenter;
    const auto ec = evaluate_edge_field(*coarse.space, coarse.dofs, xc);
    c += g.volume * (over.space->curl(t, over.dofs) - ec.curl).squaredNorm();
    for (std::size_t q = 0; q < r.size(); ++q) {
      const Vec3 x = g.point(r.points[q]);
      const auto ex = evaluate_edge_field(*coarse.space, coarse.dofs, x);
      l += r.weights[q] * g.volume * (over.space->value(t, over.dofs, r.points[q]) - ex.value).squaredNorm();
    }
  }
  const double single = std::sqrt(c) + std::sqrt(l);
  EXPECT_NEAR(e.total(), single, 0.05 * single);
  EXPECT_LT(e.parts.div, 1e-12);
}

TEST(ErrorTriple, LaminateErrorDecreasesUnderRefinement) {
  const auto coeffs = make_coefficients("laminate_y1", {});
  const auto src = make_source("sin_e1", {});
  const auto ref = solve_hmm(macro_mesh(8), micro_mesh(8), coeffs, src, 0.25);
  const auto e2 = error_triple(solve_hmm(macro_mesh(2), micro_mesh(2), coeffs, src, 0.25), ref);
  const auto e4 = error_triple(solve_hmm(macro_mesh(4), micro_mesh(4), coeffs, src, 0.25), ref);
  EXPECT_LT(e4.total(), e2.total());
}

TEST(ErrorTriple, NonNestedRejected) {
  const auto coeffs = make_coefficients("constant", {});
  const auto src = make_source("constant", {});
  const auto a = solve_hmm(macro_mesh(2), micro_mesh(2), coeffs, src, 0.25);
  const auto b = solve_hmm(macro_mesh(3), micro_mesh(2), coeffs, src, 0.25);
  try {
    error_triple(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::non_nested);
  }
}

TEST(ErrorTriple, ExactReferenceConstantPreset) {
  const cplx k0(1.0, -1.0);
  const auto coeffs = make_coefficients("constant", {{"k0_re", 1.0}, {"k0_im", -1.0}});
  const auto s = solve_hmm(macro_mesh(4), micro_mesh(2), coeffs, mms_source(k0), 0.25);
  const auto e = error_vs_exact(s, mms_exact, mms_exact_curl);
  const auto row = edge_field_error(*s.space, s.dofs, mms_exact, mms_exact_curl);
  EXPECT_NEAR(e.parts.curl, row.curl, 1e-12);
  EXPECT_NEAR(e.parts.l2, row.l2, 1e-12);
}
