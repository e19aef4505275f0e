#pragma once

// Batch driver: run configuration, experiment orchestration and file outputs.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mhmm/estimate.hpp"
#include "mhmm/io.hpp"

namespace mhmm {

inline constexpr const char* kVersion = "1.0.0";

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"cell", "solve", "converge", "estimate", "modeling"};
  return names;
}

struct RunConfig {
  std::string experiment;
  Box box;
  std::vector<int> macro_n{4};
  std::vector<int> micro_n{4};
  std::string coefficients = "laminate_y1";
  Params coefficient_params;
  std::string source = "sin_e1";
  Params source_params;
  std::vector<double> delta{0.25};
  int reference_factor = 4;
  int reference_macro_n = 0;  // 0: reference_factor times the finest level
  int reference_micro_n = 0;
  int fine_n = 0;             // 0: smallest n meeting the resolution guard
  double resolution_guard = kDefaultResolutionGuard;
  int fh_degree = 1;
  int split_factor = 2;
  int jobs = default_jobs();
  std::string out = "out";
  bool vtk = false;
};

/// Configuration errors carry every violated field.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::pair<std::string, std::string>> fields)
      : Error(ErrorKind::config, summary(fields)), fields_(std::move(fields)) {}
  ConfigError(const std::string& field, const std::string& message)
      : ConfigError(std::vector<std::pair<std::string, std::string>>{{field, message}}) {}

  const std::vector<std::pair<std::string, std::string>>& fields() const { return fields_; }

 private:
  static std::string summary(const std::vector<std::pair<std::string, std::string>>& fields) {
    std::string s = "invalid configuration:";
    for (const auto& [f, m] : fields) s += " " + f + " (" + m + ");";
    return s;
  }

  std::vector<std::pair<std::string, std::string>> fields_;
};

namespace detail {

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "experiment",     "box_lo",          "box_hi",          "macro_n",           "micro_n",
      "coefficients",   "coefficient_params", "source",       "source_params",     "delta",
      "reference_factor", "reference_macro_n", "reference_micro_n", "fine_n",      "resolution_guard",
      "fh_degree",      "split_factor",    "jobs",            "out",               "vtk"};
  return keys;
}

template <class T>
std::vector<T> scalar_or_list(const nlohmann::json& v) {
  if (v.is_array()) return v.get<std::vector<T>>();
  return {v.get<T>()};
}

}  // namespace detail

/// Flat JSON schema; see README for the field list.
inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  std::vector<std::pair<std::string, std::string>> bad;
  if (!j.is_object()) throw ConfigError("<root>", "configuration must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto& keys = detail::config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) bad.emplace_back(key, "unknown field");
  }
  auto field = [&](const char* key, auto&& apply) {
    if (!j.contains(key)) return;
    try {
      apply(j.at(key));
    } catch (const nlohmann::json::exception& e) {
      bad.emplace_back(key, "wrong type");
    }
  };
  field("experiment", [&](const auto& v) { c.experiment = v.template get<std::string>(); });
  field("box_lo", [&](const auto& v) {
    const auto a = v.template get<std::array<double, 3>>();
    c.box.lo = Vec3(a[0], a[1], a[2]);
  });
  field("box_hi", [&](const auto& v) {
    const auto a = v.template get<std::array<double, 3>>();
    c.box.hi = Vec3(a[0], a[1], a[2]);
  });
  field("macro_n", [&](const auto& v) { c.macro_n = detail::scalar_or_list<int>(v); });
  field("micro_n", [&](const auto& v) { c.micro_n = detail::scalar_or_list<int>(v); });
  field("coefficients", [&](const auto& v) { c.coefficients = v.template get<std::string>(); });
  field("coefficient_params", [&](const auto& v) { c.coefficient_params = v.template get<Params>(); });
  field("source", [&](const auto& v) { c.source = v.template get<std::string>(); });
  field("source_params", [&](const auto& v) { c.source_params = v.template get<Params>(); });
  field("delta", [&](const auto& v) { c.delta = detail::scalar_or_list<double>(v); });
  field("reference_factor", [&](const auto& v) { c.reference_factor = v.template get<int>(); });
  field("reference_macro_n", [&](const auto& v) { c.reference_macro_n = v.template get<int>(); });
  field("reference_micro_n", [&](const auto& v) { c.reference_micro_n = v.template get<int>(); });
  field("fine_n", [&](const auto& v) { c.fine_n = v.template get<int>(); });
  field("resolution_guard", [&](const auto& v) { c.resolution_guard = v.template get<double>(); });
  field("fh_degree", [&](const auto& v) { c.fh_degree = v.template get<int>(); });
  field("split_factor", [&](const auto& v) { c.split_factor = v.template get<int>(); });
  field("jobs", [&](const auto& v) { c.jobs = v.template get<int>(); });
  field("out", [&](const auto& v) { c.out = v.template get<std::string>(); });
  field("vtk", [&](const auto& v) { c.vtk = v.template get<bool>(); });

  auto failed = [&](const char* key) {
    return std::any_of(bad.begin(), bad.end(), [&](const auto& b) { return b.first == key; });
  };
  const auto& names = experiment_names();
  if (!failed("experiment") && std::find(names.begin(), names.end(), c.experiment) == names.end())
    bad.emplace_back("experiment", "must be one of cell, solve, converge, estimate, modeling");
  if (!failed("box_lo") && !failed("box_hi") && !(c.box.extent().array() > 0.0).all())
    bad.emplace_back("box_hi", "must exceed box_lo in every coordinate");
  if (!failed("macro_n") && (c.macro_n.empty() || std::any_of(c.macro_n.begin(), c.macro_n.end(), [](int n) { return n < 1; })))
    bad.emplace_back("macro_n", "needs one or more values >= 1");
  if (!failed("micro_n") && (c.micro_n.empty() || std::any_of(c.micro_n.begin(), c.micro_n.end(), [](int n) { return n < 2; })))
    bad.emplace_back("micro_n", "needs one or more values >= 2");
  if (!failed("macro_n") && !failed("micro_n") && c.macro_n.size() != c.micro_n.size() && c.macro_n.size() != 1 &&
      c.micro_n.size() != 1)
    bad.emplace_back("micro_n", "sequence length must match macro_n or be 1");
  if (!failed("delta") && (c.delta.empty() || std::any_of(c.delta.begin(), c.delta.end(), [](double d) { return !(d > 0.0 && d <= 1.0); })))
    bad.emplace_back("delta", "values must lie in (0, 1]");
  if (!failed("coefficients") && !failed("coefficient_params")) {
    try {
      make_coefficients(c.coefficients, c.coefficient_params, c.box);
    } catch (const Error& e) {
      const bool unknown = std::string(e.what()).find("unknown coefficient preset") != std::string::npos;
      bad.emplace_back(unknown ? "coefficients" : "coefficient_params", e.what());
    }
  }
  if (!failed("source") && !failed("source_params")) {
    try {
      make_source(c.source, c.source_params, c.box);
    } catch (const Error& e) {
      const bool unknown = std::string(e.what()).find("unknown source preset") != std::string::npos;
      bad.emplace_back(unknown ? "source" : "source_params", e.what());
    }
  }
  if (!failed("reference_factor") && c.reference_factor < 2) bad.emplace_back("reference_factor", "must be >= 2");
  if (!failed("reference_macro_n") && c.reference_macro_n < 0) bad.emplace_back("reference_macro_n", "must be >= 0");
  if (!failed("reference_micro_n") && c.reference_micro_n < 0) bad.emplace_back("reference_micro_n", "must be >= 0");
  if (!failed("fine_n") && c.fine_n < 0) bad.emplace_back("fine_n", "must be >= 0");
  if (!failed("resolution_guard") && !(c.resolution_guard > 0.0)) bad.emplace_back("resolution_guard", "must be positive");
  if (!failed("fh_degree") && c.fh_degree != 0 && c.fh_degree != 1) bad.emplace_back("fh_degree", "must be 0 or 1");
  if (!failed("split_factor") && c.split_factor < 1) bad.emplace_back("split_factor", "must be >= 1");
  if (!failed("jobs") && c.jobs < 1) bad.emplace_back("jobs", "must be >= 1");
  if (!failed("out") && c.out.empty()) bad.emplace_back("out", "must not be empty");
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"experiment", c.experiment},
          {"box_lo", {c.box.lo[0], c.box.lo[1], c.box.lo[2]}},
          {"box_hi", {c.box.hi[0], c.box.hi[1], c.box.hi[2]}},
          {"macro_n", c.macro_n},
          {"micro_n", c.micro_n},
          {"coefficients", c.coefficients},
          {"coefficient_params", c.coefficient_params},
          {"source", c.source},
          {"source_params", c.source_params},
          {"delta", c.delta},
          {"reference_factor", c.reference_factor},
          {"reference_macro_n", c.reference_macro_n},
          {"reference_micro_n", c.reference_micro_n},
          {"fine_n", c.fine_n},
          {"resolution_guard", c.resolution_guard},
          {"fh_degree", c.fh_degree},
          {"split_factor", c.split_factor},
          {"jobs", c.jobs},
          {"out", c.out},
          {"vtk", c.vtk}};
}

/// Machine-readable failure record.
inline nlohmann::json error_record(const Error& e, const std::string& stage) {
  nlohmann::json r{{"status", "error"}, {"kind", to_string(e.kind())}, {"stage", stage}, {"message", e.what()}};
  if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) {
    nlohmann::json fields = nlohmann::json::array();
    for (const auto& [f, m] : ce->fields()) fields.push_back({{"field", f}, {"message", m}});
    r["fields"] = fields;
  }
  return r;
}

struct RunReport {
  std::vector<std::string> files;
  nlohmann::json manifest;
};

namespace detail {

class Run {
 public:
  explicit Run(const RunConfig& c) : c_(c), root_(c.out) {
    std::filesystem::create_directories(root_);
    manifest_["config"] = to_json(c);
    manifest_["version"] = kVersion;
    manifest_["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION);
    manifest_["tolerances"] = {{"pivot_tolerance", kPivotTolerance},
                               {"coupled_dimension_guard", kCoupledDimensionGuard},
                               {"resolution_guard", c.resolution_guard},
                               {"indicator_detail_cap", kIndicatorDetailCap},
                               {"zero_error_ratio", kZeroErrorRatio},
                               {"fh_degree", c.fh_degree},
                               {"split_factor", c.split_factor},
                               {"reference_factor", c.reference_factor}};
    manifest_["timings"] = nlohmann::json::object();
    manifest_["files"] = nlohmann::json::array();
  }

  template <class F>
  auto stage(const std::string& name, F&& f) {
    current_ = name;
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      record(name, t0);
    } else {
      auto r = f();
      record(name, t0);
      return r;
    }
  }

  std::ofstream open(const std::string& name) {
    const auto path = root_ / name;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::invalid_argument, "cannot write " + path.string());
    files_.push_back(path.string());
    manifest_["files"].push_back(name);
    return out;
  }

  nlohmann::json& manifest() { return manifest_; }
  const std::string& current_stage() const { return current_; }
  const std::vector<std::string>& files() const { return files_; }
  const std::filesystem::path& root() const { return root_; }

 private:
  void record(const std::string& name, std::chrono::steady_clock::time_point t0) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto& t = manifest_["timings"];
    t[name] = t.contains(name) ? t[name].get<double>() + s : s;
  }

  const RunConfig& c_;
  std::filesystem::path root_;
  nlohmann::json manifest_;
  std::string current_ = "setup";
  std::vector<std::string> files_;
};

inline std::vector<std::pair<int, int>> levels(const RunConfig& c) {
  const std::size_t m = std::max(c.macro_n.size(), c.micro_n.size());
  std::vector<std::pair<int, int>> out;
  for (std::size_t k = 0; k < m; ++k)
    out.emplace_back(c.macro_n[c.macro_n.size() == 1 ? 0 : k], c.micro_n[c.micro_n.size() == 1 ? 0 : k]);
  return out;
}

inline std::shared_ptr<const MacroMesh> macro_mesh(const RunConfig& c, int n) {
  return std::make_shared<const MacroMesh>(build_box_mesh(c.box, n));
}

inline std::shared_ptr<const PeriodicMicroMesh> micro_mesh(int n) {
  return std::make_shared<const PeriodicMicroMesh>(build_periodic_cube_mesh(n));
}

inline void write_solution_vtk(Run& run, const HmmSolution& s, const std::string& name) {
  std::vector<CVec3> value(s.macro->num_tets());
  for (std::size_t j = 0; j < value.size(); ++j) value[j] = s.center[j];
  auto out = run.open(name);
  write_vtk(out, *s.macro, "E_H at barycenters", {{"e_h", value}, {"curl_e_h", s.curl}});
}

inline cplx constant_kappa(const RunConfig& c) {
  return {detail::param(c.coefficient_params, "k0_re", 1.0), detail::param(c.coefficient_params, "k0_im", -1.0)};
}

inline void run_cell(Run& run, const RunConfig& c, const CoefficientField& coeffs) {
  const Vec3 x = 0.5 * (c.box.lo + c.box.hi);
  auto csv_out = run.open("cell_tensors.csv");
  CsvWriter csv(csv_out, {"n_micro", "tensor", "row", "col", "value_re", "value_im"});
  auto norms_out = run.open("cell_correctors.csv");
  CsvWriter norms(norms_out, {"n_micro", "k", "vector_h1", "scalar_h1", "mu_mean", "kappa_mean_re", "kappa_mean_im"});
  for (int n : c.micro_n) {
    const auto micro = micro_mesh(n);
    SampledCoefficients sampled;
    sampled.rows.resize(1);
    sampled.row_of = {0};
    for (std::size_t i = 0; i < micro->num_tets(); ++i) {
      sampled.rows[0].mu_inv.push_back(coeffs.mu_inv(x, micro->geometry[i].barycenter));
      sampled.rows[0].kappa.push_back(coeffs.kappa(x, micro->geometry[i].barycenter));
    }
    const auto set = run.stage("cell", [&] { return homogenize_all(sampled, *micro, c.jobs); });
    const CellSolution& s = set[0];
    for (int r = 0; r < 3; ++r)
      for (int q = 0; q < 3; ++q) {
        csv << n << "mhom" << r << q << s.mhom(r, q) << 0.0;
        csv << n << "khom" << r << q << s.khom(r, q).real() << s.khom(r, q).imag();
      }
    for (int k = 0; k < 3; ++k) {
      double hv = 0.0, hs = 0.0;
      for (std::size_t i = 0; i < micro->num_tets(); ++i) {
        const double vol = micro->geometry[i].volume;
        hv += vol * (s.curl[i].col(k).squaredNorm() + s.div[i][k] * s.div[i][k]);
        hs += vol * s.grad[i].col(k).squaredNorm();
      }
      norms << n << k << std::sqrt(hv) << std::sqrt(hs) << s.mu_mean << s.kappa_mean.real() << s.kappa_mean.imag();
    }
  }
}

inline void run_solve(Run& run, const RunConfig& c, const CoefficientField& coeffs, const SourceField& src) {
  const auto [nm, nu] = levels(c)[0];
  const auto s = run.stage("solve", [&] { return solve_hmm(macro_mesh(c, nm), micro_mesh(nu), coeffs, src, c.delta[0], c.jobs); });
  auto sum_out = run.open("solve_summary.csv");
  CsvWriter sum(sum_out, {"n_macro", "n_micro", "delta", "num_dofs", "residual", "dof_norm"});
  sum << nm << nu << c.delta[0] << s.space->num_dofs() << s.residual << s.dofs.norm();
  auto el_out = run.open("solution_elements.csv");
  CsvWriter el(el_out, {"j", "x", "y", "z", "e_x_re", "e_x_im", "e_y_re", "e_y_im", "e_z_re", "e_z_im", "curl_x_re",
                        "curl_x_im", "curl_y_re", "curl_y_im", "curl_z_re", "curl_z_im"});
  for (int j = 0; j < static_cast<int>(s.macro->num_tets()); ++j) {
    const Vec3& x = s.macro->geometry[j].barycenter;
    el << j << x[0] << x[1] << x[2];
    for (int k = 0; k < 3; ++k) el << s.center[j][k].real() << s.center[j][k].imag();
    for (int k = 0; k < 3; ++k) el << s.curl[j][k].real() << s.curl[j][k].imag();
  }
  if (c.vtk) write_solution_vtk(run, s, "solution.vtk");
}

struct LevelResult {
  int n_macro = 0, n_micro = 0;
  ErrorTriple error;
  HelmholtzSplit split;
  IndicatorTable table;
  Effectivity eff;
};

inline std::vector<std::string> convergence_header() {
  return {"n_macro", "n_micro", "delta", "energy_error", "curl_part", "div_part", "l2_part", "theta_norm",
          "z_norm", "estimator_total", "effectivity"};
}

inline void write_convergence(Run& run, const RunConfig& c, const std::vector<LevelResult>& rows) {
  auto out = run.open("convergence.csv");
  CsvWriter csv(out, convergence_header());
  for (const auto& r : rows)
    csv << r.n_macro << r.n_micro << c.delta[0] << r.error.total() << r.error.parts.curl << r.error.parts.div
        << r.error.parts.l2 << r.split.theta << r.split.z << r.table.eta_total() << r.eff.value;
  auto eo = run.open("efficiency.csv");
  CsvWriter ecsv(eo, {"n_macro", "n_micro", "local_element", "local_face", "local_micro", "local_max", "zeta",
                      "zeta_micro"});
  for (const auto& r : rows)
    ecsv << r.n_macro << r.n_micro << r.eff.local_element << r.eff.local_face << r.eff.local_micro << r.eff.local_max()
         << r.eff.zeta << r.eff.zeta_micro;
  if (rows.size() >= 2) {
    std::vector<int> ns;
    std::vector<double> energy, split;
    for (const auto& r : rows) {
      ns.push_back(r.n_macro);
      energy.push_back(r.error.total());
      split.push_back(r.split.theta + r.split.z);
    }
    auto ro = run.open("rates.csv");
    CsvWriter rcsv(ro, {"quantity", "observed_rate"});
    rcsv << "energy_error" << observed_rate(ns, energy);
    rcsv << "theta_plus_z" << observed_rate(ns, split);
  }
}

inline std::pair<int, int> reference_level(const RunConfig& c) {
  const auto lv = levels(c);
  int rm = 0, ru = 0;
  for (const auto& [m, u] : lv) {
    rm = std::max(rm, m);
    ru = std::max(ru, u);
  }
  return {c.reference_macro_n > 0 ? c.reference_macro_n : c.reference_factor * rm,
          c.reference_micro_n > 0 ? c.reference_micro_n : c.reference_factor * ru};
}

inline LevelResult evaluate_level(Run& run, const RunConfig& c, const HmmSolution& s, const HmmSolution* reference,
                                  const CoefficientField& coeffs, const SourceField& src) {
  LevelResult r;
  r.n_macro = s.macro->n;
  r.n_micro = s.micro->n;
  run.stage("error", [&] {
    if (reference) {
      r.error = error_triple(s, *reference, c.jobs);
    } else {
      r.error = error_vs_exact(s, mms_exact, mms_exact_curl);
    }
  });
  run.stage("helmholtz", [&] {
    VectorFieldFn exact = mms_exact;
    if (reference) {
      exact = [reference](const Vec3& x) { return evaluate_edge_field(*reference->space, reference->dofs, x).value; };
    }
    r.split = helmholtz_split(*s.space, s.dofs, exact, refine(*s.macro, c.split_factor));
  });
  run.stage("estimate", [&] {
    r.table = compute_indicators(s, coeffs, src, c.fh_degree, c.jobs);
    r.eff = effectivity(s, r.error, r.table);
  });
  return r;
}

inline void run_converge(Run& run, const RunConfig& c, const CoefficientField& coeffs, const SourceField& src) {
  std::vector<LevelResult> rows;
  if (c.coefficients == "constant") {
    // Manufactured solution on the unit cube; the configured source is replaced.
    if ((c.box.lo - Vec3::Zero()).norm() > 0 || (c.box.hi - Vec3::Ones()).norm() > 0)
      throw ConfigError("box_hi", "the manufactured solution needs the unit cube");
    const cplx k0 = constant_kappa(c);
    if (!(k0.real() > 0.0 && k0.imag() < 0.0))
      throw ConfigError("coefficient_params", "manufactured solution needs k0_re > 0 and k0_im < 0");
    const auto mms = mms_source(k0);
    run.manifest()["reference"] = "exact manufactured solution sin(pi x_2) sin(pi x_3) e_1";
    for (const auto& [nm, nu] : levels(c)) {
      const auto s = run.stage("solve", [&] { return solve_hmm(macro_mesh(c, nm), micro_mesh(nu), coeffs, mms, c.delta[0], c.jobs); });
      rows.push_back(evaluate_level(run, c, s, nullptr, coeffs, mms));
    }
  } else {
    const auto [rm, ru] = reference_level(c);
    run.manifest()["reference"] = {{"n_macro", rm}, {"n_micro", ru}};
    const auto ref = run.stage("reference", [&] { return solve_hmm(macro_mesh(c, rm), micro_mesh(ru), coeffs, src, c.delta[0], c.jobs); });
    for (const auto& [nm, nu] : levels(c)) {
      const auto s = run.stage("solve", [&] { return solve_hmm(macro_mesh(c, nm), micro_mesh(nu), coeffs, src, c.delta[0], c.jobs); });
      rows.push_back(evaluate_level(run, c, s, &ref, coeffs, src));
    }
  }
  write_convergence(run, c, rows);
}

inline void run_estimate(Run& run, const RunConfig& c, const CoefficientField& coeffs, const SourceField& src) {
  const auto [nm, nu] = levels(c)[0];
  const auto s = run.stage("solve", [&] { return solve_hmm(macro_mesh(c, nm), micro_mesh(nu), coeffs, src, c.delta[0], c.jobs); });
  const auto [rm, ru] = reference_level(c);
  run.manifest()["reference"] = {{"n_macro", rm}, {"n_micro", ru}};
  const auto ref = run.stage("reference", [&] { return solve_hmm(macro_mesh(c, rm), micro_mesh(ru), coeffs, src, c.delta[0], c.jobs); });
  const auto table = run.stage("estimate", [&] { return compute_indicators(s, coeffs, src, c.fh_degree, c.jobs); });
  const auto eff = run.stage("error", [&] { return effectivity(s, ref, table, c.jobs); });
  run.manifest()["effectivity_defined"] = eff.defined;
  auto out = run.open("indicators.csv");
  write_indicator_csv(out, s, table, &eff);
  if (c.vtk) write_solution_vtk(run, s, "solution.vtk");
}

inline void run_modeling(Run& run, const RunConfig& c, const CoefficientField& coeffs, const SourceField& src) {
  const auto [nm, nu] = levels(c)[0];
  const double dmin = *std::min_element(c.delta.begin(), c.delta.end());
  const int fine_n = c.fine_n > 0 ? c.fine_n : static_cast<int>(std::ceil(c.box.extent().maxCoeff() * c.resolution_guard / dmin - 1e-9));
  run.manifest()["fine_n"] = fine_n;
  const auto fine_mesh = run.stage("mesh", [&] { return macro_mesh(c, fine_n); });
  const auto s = run.stage("solve", [&] { return solve_hmm(macro_mesh(c, nm), micro_mesh(nu), coeffs, src, c.delta[0], c.jobs); });
  auto out = run.open("modeling.csv");
  CsvWriter csv(out, {"n_macro", "n_micro", "fine_n", "delta", "l2_error", "fine_residual", "ratio_to_previous"});
  double prev = 0.0;
  for (double d : c.delta) {
    const auto fine = run.stage("fine", [&] { return solve_direct_fine(coeffs, d, src, fine_mesh, c.resolution_guard); });
    HmmSolution sd = s;
    sd.delta = d;
    const double err = run.stage("error", [&] { return modeling_error(fine, sd, c.jobs); });
    csv << nm << nu << fine_n << d << err << fine.residual << (prev > 0.0 ? prev / err : std::numeric_limits<double>::quiet_NaN());
    prev = err;
  }
}

}  // namespace detail

/// Runs one experiment and writes its files plus manifest.json into c.out.
/// Failures are rethrown after error.json has been written.
inline RunReport run(const RunConfig& c) {
  detail::Run r(c);
  try {
    const auto coeffs = make_coefficients(c.coefficients, c.coefficient_params, c.box);
    const auto src = make_source(c.source, c.source_params, c.box);
    if (c.experiment == "cell") detail::run_cell(r, c, coeffs);
    else if (c.experiment == "solve") detail::run_solve(r, c, coeffs, src);
    else if (c.experiment == "converge") detail::run_converge(r, c, coeffs, src);
    else if (c.experiment == "estimate") detail::run_estimate(r, c, coeffs, src);
    else if (c.experiment == "modeling") detail::run_modeling(r, c, coeffs, src);
    else throw ConfigError("experiment", "unknown experiment '" + c.experiment + "'");
  } catch (const Error& e) {
    std::ofstream(r.root() / "error.json", std::ios::trunc) << error_record(e, r.current_stage()).dump(2) << '\n';
    throw;
  }
  r.manifest()["status"] = "ok";
  {
    std::ofstream m(r.root() / "manifest.json", std::ios::trunc);
    m << r.manifest().dump(2) << '\n';
  }
  RunReport report;
  report.files = r.files();
  report.manifest = r.manifest();
  return report;
}

}  // namespace mhmm
