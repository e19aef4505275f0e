#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mhmm/driver.hpp"

namespace {

void report_error(const mhmm::Error& e, const std::string& stage) {
  std::cerr << mhmm::error_record(e, stage).dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous multiscale method for the time-harmonic Maxwell curl-curl problem"};
  std::string experiment, config_path, preset, out;
  std::vector<int> macro_n, micro_n;
  std::vector<double> delta;
  int jobs = 0;
  bool vtk = false;
  app.add_option("experiment", experiment, "cell | solve | converge | estimate | modeling")->required();
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--macro-n", macro_n, "macro mesh subdivisions (comma separated sequence)")->delimiter(',');
  app.add_option("--micro-n", micro_n, "micro mesh subdivisions (comma separated sequence)")->delimiter(',');
  app.add_option("--delta", delta, "periodicity length(s)")->delimiter(',');
  app.add_option("--preset", preset, "coefficient preset");
  app.add_option("--jobs", jobs, "worker threads");
  app.add_option("--out", out, "output directory");
  app.add_flag("--vtk", vtk, "also write legacy VTK fields");
  CLI11_PARSE(app, argc, argv);

  mhmm::RunConfig config;
  try {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw mhmm::ConfigError("--config", "cannot read " + config_path);
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw mhmm::ConfigError("--config", e.what());
      }
    }
    j["experiment"] = experiment;
    if (!macro_n.empty()) j["macro_n"] = macro_n;
    if (!micro_n.empty()) j["micro_n"] = micro_n;
    if (!delta.empty()) j["delta"] = delta;
    if (!preset.empty()) j["coefficients"] = preset;
    if (app.count("--jobs")) j["jobs"] = jobs;
    if (!out.empty()) j["out"] = out;
    if (vtk) j["vtk"] = true;
    config = mhmm::config_from_json(j);
  } catch (const mhmm::Error& e) {
    report_error(e, "config");
    return 2;
  }

  try {
    const auto report = mhmm::run(config);
    for (const auto& f : report.files) std::cout << f << '\n';
  } catch (const mhmm::Error& e) {
    report_error(e, "run");
    return e.kind() == mhmm::ErrorKind::config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"status", "error"}, {"kind", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
