#include <CLI11.hpp>
#include <exception>
#include <iostream>

#include "bdq/config.hpp"
#include "bdq/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"bdq: lattice variational Euclidean field experiments"};
  app.require_subcommand(1);

  std::string run_config;
  std::string out_override;
  CLI::App* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("config", run_config, "config file")->required();
  run->add_option("-o,--output", out_override, "override the output directory");

  std::vector<std::string> report_dirs;
  CLI::App* report = app.add_subcommand("report", "consolidate run manifests");
  report->add_option("dirs", report_dirs, "run directories")->required();

  std::string validate_config_path;
  CLI::App* validate =
      app.add_subcommand("validate-config", "parse and check a config");
  validate->add_option("config", validate_config_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      bdq::cli::Config cfg;
      try {
        cfg = bdq::cli::Config::parse_file(run_config);
      } catch (const bdq::cli::ConfigParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
      }
      try {
        return bdq::cli::run_experiment(cfg, out_override);
      } catch (const bdq::cli::ConfigParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
      } catch (const std::exception& e) {
        std::cerr << "runtime fault: " << e.what() << "\n";
        return 3;
      }
    }
    if (report->parsed()) {
      std::vector<std::filesystem::path> dirs(report_dirs.begin(),
                                              report_dirs.end());
      return bdq::cli::report_runs(dirs);
    }
    if (validate->parsed()) {
      try {
        const bdq::cli::Config cfg =
            bdq::cli::Config::parse_file(validate_config_path);
        bdq::cli::validate_experiment_config(cfg);
      } catch (const bdq::cli::ConfigParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
      }
      std::cout << "config ok\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "runtime fault: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
