#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace symstab {

// Raised for flag combinations that cannot describe a valid computation.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OutputFormat { csv, json };

struct ExperimentConfig {
  std::string command;
  // Single values or ranges "lo:hi" (dims) and "lo:hi:step" (radii).
  std::optional<std::string> dim;
  std::optional<std::string> radius;
  std::optional<double> measure;
  std::optional<double> measure_b;
  std::optional<double> rho;
  std::optional<int> degree;
  std::optional<std::int64_t> samples;
  std::uint64_t seed = 20240101;
  std::optional<int> grid;
  std::vector<std::string> sets;
  std::vector<double> s_values;
  std::optional<double> tol;
  OutputFormat format = OutputFormat::csv;
  std::optional<std::string> out;
};

enum class Provenance { closed_form, series, quadrature, montecarlo };
const char* provenance_name(Provenance p);

struct ResultRow {
  std::string label;
  std::vector<std::pair<std::string, double>> inputs;
  std::vector<std::pair<std::string, double>> values;
  Provenance provenance = Provenance::closed_form;
  // Absolute error estimate; 0 for exact closed forms.
  double error = 0.0;
  std::string detail;
};

struct ResultTable {
  std::string command;
  std::vector<ResultRow> rows;
  // Set by validate only.
  bool passed = true;
};

const std::vector<std::string>& command_names();

// Rejects flags that are missing, out of range or meaningless for the command.
void validate_config(const ExperimentConfig& cfg);
ResultTable run_experiment(const ExperimentConfig& cfg);

ResultTable cmd_counterexample();
ResultTable cmd_phase_scan(const std::vector<int>& dims, const std::vector<double>& radii);
ResultTable cmd_asymptotics(const std::vector<double>& s_values, const std::vector<int>& dims);
ResultTable cmd_optimize_1d(double a, double b, double rho, int grid);
ResultTable cmd_validate(std::uint64_t seed, std::int64_t samples, std::optional<double> mc_tolerance);

// n = 2 radius r' with gamma_2(B(0, r')) = 1 - gamma_2(B(0, r)).
double paired_radius(double r);
// Smallest r for which r' <= 2, by bisection.
double paired_radius_threshold();
// F(B(0, r(s, n))) and its large-n model.
double ball_F_exact(int dim, double radius);
double ball_F_model(double s, int dim);

// Columns are the union of input and value names in first-seen order; CSV
// cells use 17 significant digits so both formats round-trip the same doubles.
void write_csv(std::ostream& os, const ResultTable& table);
void write_json(std::ostream& os, const ResultTable& table);

}  // namespace symstab
