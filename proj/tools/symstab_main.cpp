#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "symstab/experiments.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;

}  // namespace

int main(int argc, char** argv) {
  using symstab::ExperimentConfig;
  CLI::App app{"Symmetric Gaussian noise stability experiments"};
  app.require_subcommand(1, 1);
  ExperimentConfig cfg;
  std::string format = "csv";

  for (const auto& name : symstab::command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--dim", cfg.dim, "dimension N or range LO:HI");
    sub->add_option("--radius", cfg.radius, "radius R or range LO:HI:STEP");
    sub->add_option("--measure", cfg.measure, "Gaussian measure a");
    sub->add_option("--measure-b", cfg.measure_b, "Gaussian measure b");
    sub->add_option("--rho", cfg.rho, "correlation");
    sub->add_option("--degree", cfg.degree, "Hermite truncation degree L");
    sub->add_option("--samples", cfg.samples, "Monte Carlo samples");
    sub->add_option("--seed", cfg.seed, "Monte Carlo seed");
    sub->add_option("--grid", cfg.grid, "quantile grid cells");
    sub->add_option("--set", cfg.sets, "set description (repeatable)");
    sub->add_option("--s", cfg.s_values, "offsets s for r(s, n) (repeatable)");
    sub->add_option("--tol", cfg.tol, "tolerance override for Monte Carlo checks");
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", cfg.out, "output path (default: stdout)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  cfg.format = format == "json" ? symstab::OutputFormat::json : symstab::OutputFormat::csv;

  symstab::ResultTable table;
  try {
    table = symstab::run_experiment(cfg);
  } catch (const symstab::ConfigError& e) {
    std::cerr << "symstab: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "symstab: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "symstab: " << e.what() << '\n';
    return kExitValidation;
  }

  std::ofstream file;
  if (cfg.out) {
    file.open(*cfg.out);
    if (!file) {
      std::cerr << "symstab: cannot open " << *cfg.out << '\n';
      return kExitConfig;
    }
  }
  std::ostream& os = cfg.out ? static_cast<std::ostream&>(file) : std::cout;
  if (cfg.format == symstab::OutputFormat::json)
    symstab::write_json(os, table);
  else
    symstab::write_csv(os, table);

  if (!table.passed) {
    for (const auto& row : table.rows)
      if (row.detail == "FAIL") std::cerr << "FAIL " << row.label << '\n';
    return kExitValidation;
  }
  return 0;
}
