#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "imcf/error.hpp"
#include "imcf/io.hpp"

namespace {

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print(const imcf::RunArtifact& a) {
  std::cout << a.directory.string() << ": " << (a.completed ? "completed" : "aborted");
  if (!a.completed) std::cout << " at t = " << a.abort_time.value_or(imcf::kNaN) << " (" << a.abort_kind << ": " << a.abort_message << ")";
  std::cout << '\n';
  for (const auto& r : a.reports)
    std::cout << "  " << r.name << ": " << imcf::to_string(r.status) << " (margin " << r.margin << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Star-shaped inverse mean curvature flow simulator and eigenvalue verification"};
  app.require_subcommand(1);

  std::string config_path, out_dir, run_dir, checks, param, values;

  auto* simulate = app.add_subcommand("simulate", "run one scenario and write its artifact directory");
  simulate->add_option("--config", config_path, "JSON scenario file")->required();
  simulate->add_option("--out", out_dir, "output directory (overrides the config)");

  auto* verify = app.add_subcommand("verify", "re-run the checks on an existing run directory");
  verify->add_option("--run", run_dir, "run directory")->required();
  verify->add_option("--checks", checks, "comma-separated check names");

  auto* sweep = app.add_subcommand("sweep", "run one scenario per parameter value");
  sweep->add_option("--config", config_path, "JSON scenario file")->required();
  sweep->add_option("--param", param, "alpha, p, resolution or dt")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--out", out_dir, "output directory (overrides the config)");

  auto* report = app.add_subcommand("report", "rewrite summary.md from report.json");
  report->add_option("--run", run_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      imcf::ScenarioConfig config = imcf::parse_config(std::filesystem::path(config_path));
      if (!out_dir.empty()) config.output = out_dir;
      const imcf::RunArtifact a = imcf::run_scenario(config);
      print(a);
      return imcf::exit_code(a);
    }
    if (verify->parsed()) {
      const imcf::RunArtifact a = imcf::verify_run(run_dir, split(checks));
      print(a);
      return imcf::exit_code(a);
    }
    if (sweep->parsed()) {
      imcf::ScenarioConfig config = imcf::parse_config(std::filesystem::path(config_path));
      if (!out_dir.empty()) config.output = out_dir;
      std::vector<double> list;
      for (const auto& v : split(values)) {
        try {
          list.push_back(std::stod(v));
        } catch (const std::exception&) {
          throw imcf::Error(imcf::ErrorKind::ConfigError, "sweep value '" + v + "' is not a number");
        }
      }
      const imcf::SweepResult result = imcf::sweep(config, param, list, imcf::workers_from_env());
      int code = 0;
      for (const auto& a : result.runs) {
        print(a);
        code = std::max(code, imcf::exit_code(a));
      }
      std::cout << "combined: " << result.combined_csv.string() << '\n';
      return code;
    }
    std::cout << imcf::emit_report(run_dir).string() << '\n';
    return 0;
  } catch (const imcf::Error& e) {
    std::cerr << e.what() << '\n';
    const auto k = e.kind();
    return k == imcf::ErrorKind::ConfigError || k == imcf::ErrorKind::InvalidArgument ? 3 : 2;
  }
}
