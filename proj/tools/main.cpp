#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fmala/experiments.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& output_override) {
  const fmala::ExperimentConfig cfg = fmala::ExperimentConfig::load(config_path);
  std::filesystem::path root = fmala::default_output_root();
  if (!cfg.output.empty()) root = cfg.output;
  if (!output_override.empty()) root = output_override;
  const fmala::RunResult result = fmala::run_experiment(cfg, root);
  std::cout << "run: " << result.dir.string() << "\n";
  if (result.rate) {
    std::cout << "rate slope: " << result.rate->slope << "\n";
    return 0;
  }
  for (const auto& s : result.summaries) {
    std::printf("  %-10s r%-2d err %7.3f %%  ESS %9.1f  accept %5.3f  wall %7.2f s\n",
                fmala::to_string(s.kind).c_str(), s.replicate, s.err_pct, s.ess_monolithic,
                s.accept_rate, s.wall_seconds);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive Langevin samplers for Bayesian inverse problems"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_override;
  auto* run = app.add_subcommand("run", "run a configured experiment");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--output", output_override, "output root (overrides config and FMALA_OUT)");

  std::string chain_path;
  int lag = 500;
  int acf_dim = -1;
  std::string diag_out;
  auto* diagnose = app.add_subcommand("diagnose", "recompute diagnostics from a chain file");
  diagnose->add_option("chain", chain_path, "chain file")->required();
  diagnose->add_option("--lag", lag, "autocorrelation lag limit")->capture_default_str();
  diagnose->add_option("--dim", acf_dim, "coordinate for the ACF export (default: middle)");
  diagnose->add_option("--output", diag_out, "directory for the reports");

  std::vector<std::string> summary_files;
  std::string table_out;
  auto* table = app.add_subcommand("table", "aggregate run summaries into a CSV");
  table->add_option("summaries", summary_files, "summary.json files")->required();
  table->add_option("--out", table_out, "write the CSV here instead of stdout");

  std::string rate_config;
  auto* rate = app.add_subcommand("rate", "run a Fisher-estimate convergence-rate study");
  rate->add_option("config", rate_config, "experiment config file (gaussian-rate)")->required();
  rate->add_option("--output", output_override, "output root");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config_path, output_override);
    if (rate->parsed()) {
      const auto cfg = fmala::ExperimentConfig::load(rate_config);
      if (cfg.experiment != fmala::ExperimentKind::GaussianRate) {
        throw fmala::ConfigError("rate: config must declare experiment = gaussian-rate");
      }
      return run_command(rate_config, output_override);
    }
    if (diagnose->parsed()) {
      std::optional<std::filesystem::path> out_dir;
      if (!diag_out.empty()) out_dir = diag_out;
      std::optional<int> dim;
      if (acf_dim >= 0) dim = acf_dim;
      fmala::diagnose_chain_file(chain_path, lag, out_dir, dim);
      std::cout << "diagnose: wrote reports for " << chain_path << "\n";
      return 0;
    }
    if (table->parsed()) {
      std::vector<std::filesystem::path> paths(summary_files.begin(), summary_files.end());
      const std::string csv = fmala::aggregate_table(paths);
      if (table_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(table_out, std::ios::trunc);
        if (!out) throw std::runtime_error("table: cannot open " + table_out);
        out << csv;
      }
      return 0;
    }
  } catch (const fmala::ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
