#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "drolab/deviation_lab.hpp"
#include "drolab/predictors.hpp"

namespace drolab {

inline constexpr int kOutputSchemaVersion = 1;
inline constexpr int kConfigSchemaVersion = 1;

enum class EstimationKind { Exact, MonteCarlo, Importance };
enum class OutputFormat { Csv, Json };

struct ExperimentConfig {
  std::filesystem::path scenario_path;
  std::vector<PredictorSpec> predictors;
  std::optional<RegimeSchedule> schedule;
  std::optional<std::vector<std::uint64_t>> counts;  // observed empirical counts
  std::vector<std::uint64_t> T_list;
  EstimationKind method = EstimationKind::Exact;
  std::uint64_t n_samples = 100000;
  std::optional<std::uint64_t> seed;
  double cap = kDefaultLatticeCap;
  Mode mode = PredictionMode{0};
  std::vector<double> ratios;
  std::optional<std::vector<double>> shift;
  std::filesystem::path output_path;  // empty: standard output
  OutputFormat format = OutputFormat::Csv;
};

/// Parses a config document. Relative scenario paths resolve against
/// `base_dir`.
ExperimentConfig parse_config(std::string_view json_text, const std::string& source = "<config>",
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

RegimeSchedule parse_schedule(std::string_view json_text);

/// Typed table cell; empty cells stand for absent optionals.
using Cell = std::variant<std::monostate, bool, std::uint64_t, double, std::string,
                          std::vector<double>>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

Table cmd_predict(const ExperimentConfig& config);
Table cmd_prescribe(const ExperimentConfig& config);
Table cmd_disappoint(const ExperimentConfig& config);
Table cmd_convexity(const ExperimentConfig& config);

std::string to_csv(const Table& table);
std::string to_json(const Table& table);

/// Full command-line entry point. Returns the process exit status:
/// 0 success, 1 runtime error, 2 input error. Error records are written to
/// `err` as one JSON object per line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace drolab
