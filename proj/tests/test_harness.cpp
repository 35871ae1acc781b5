#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "drolab/error.hpp"
#include "drolab/harness.hpp"
#include "json.hpp"

using namespace drolab;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int status;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "drolab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "drolab_harness_test";
  fs::create_directories(dir);
  return dir;
}

fs::path write(const std::string& name, const std::string& text) {
  const auto p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

const std::string kDemo = std::string(DROLAB_DATA_DIR) + "/two_by_two.json";
const std::string kGrid = std::string(DROLAB_DATA_DIR) + "/abs_grid.json";

nlohmann::json rows(const std::string& text) { return nlohmann::json::parse(text); }

std::string config(const std::string& body) {
  return R"({"schema_version": 1, "scenario": ")" + kDemo + "\", " + body + "}";
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(config(R"("predictors": ["saa", {"kind": "kl", "r": 0.2}],
      "schedule": {"family": "table", "values": {"100": 2.0}}, "counts": [50, 50],
      "T_list": [5, 2], "method": "mc", "seed": 3, "mode": {"kind": "prescription"},
      "format": "json")"));
  CHECK(cfg.predictors.size() == 2);
  CHECK(*cfg.predictors[1].kl_radius == 0.2);
  CHECK(cfg.schedule->a(100) == 2.0);
  CHECK(cfg.T_list == std::vector<std::uint64_t>{5, 2});
  CHECK(cfg.method == EstimationKind::MonteCarlo);
  CHECK(std::holds_alternative<PrescriptionMode>(cfg.mode));
  CHECK(cfg.format == OutputFormat::Json);

  CHECK_THROWS_AS(parse_config(R"({"schema_version": 2})"), ParseError);
  CHECK_THROWS_AS(parse_config("{\"schema_version\": 1,\n\"T_list\": [1,"), ParseError);
  CHECK_THROWS_AS(parse_config(config(R"("schedule": {"family": "cubic"})")), ParseError);
  CHECK_THROWS_AS(parse_config(config(R"("method": "bootstrap")")), InputError);
  CHECK_THROWS_AS(parse_config(config(R"("predictors": [{"kind": "svp", "r": 1}])")), ParseError);
  CHECK_THROWS_AS(parse_schedule(R"({"family": "power_law", "c": 1.0, "beta": 1.5})"), InputError);

  // relative scenario paths resolve against the config file
  const auto cfg2 = parse_config(R"({"schema_version": 1, "scenario": "s.json"})", "c.json", "/tmp/x");
  CHECK(cfg2.scenario_path == fs::path("/tmp/x/s.json"));
}

TEST_CASE("predict command") {
  const auto cfg = write("predict.json", config(R"("predictors": ["saa", "svp", {"kind": "kl", "r": 0.1}, "robust"],
      "schedule": {"family": "table", "values": {"100": 2.0}}, "counts": [50, 50])"));
  const auto r = cli({"predict", "--config", cfg.string(), "--format", "json"});
  REQUIRE(r.status == 0);
  const auto j = rows(r.out);
  CHECK(j.size() == 8);
  for (const auto& row : j) {
    CHECK(row["schema_version"] == 1);
    CHECK(row["a_T"] == 2.0);
    if (row["decision_label"] == "B" && row["predictor"] == "svp") {
      CHECK(std::abs(row["value"].get<double>() - 0.6) <= 1e-12);
      CHECK(row["condition_ok"] == true);
    }
  }
  const auto csv = cli({"predict", "--config", cfg.string()});
  REQUIRE(csv.status == 0);
  CHECK(csv.out.rfind("schema_version,decision,decision_label,predictor,T,a_T,value,worst_case,condition_ok,dual_alpha\n", 0) == 0);
  CHECK(std::count(csv.out.begin(), csv.out.end(), '\n') == 9);
}

TEST_CASE("malformed scenario exits with 2 and a parse record") {
  const auto bad = write("bad.json", "{\"schema_version\": 1, \"loss\": [[0.5, 0.5], [0, 1]");
  const auto r = cli({"predict", "--scenario", bad.string(), "--counts", "1,1"});
  CHECK(r.status == 2);
  const auto rec = nlohmann::json::parse(r.err);
  CHECK(rec["error"]["kind"] == "parse_error");
  const auto nan = write("nan.json", R"({"schema_version": 1, "loss": [[0.5, "nan"], [0, 1]]})");
  const auto r2 = cli({"predict", "--scenario", nan.string(), "--counts", "1,1"});
  CHECK(r2.status == 2);
  CHECK(nlohmann::json::parse(r2.err)["error"]["kind"] == "validation_error");
}

TEST_CASE("prescribe command") {
  const auto cfg = write("prescribe.json", config(R"("predictors": ["svp", "robust", "saa", {"kind": "kl", "r": 0}],
      "schedule": {"family": "table", "values": {"100": 2.0, "10": 1.0}}, "counts": [50, 50])"));
  const auto r = cli({"prescribe", "--config", cfg.string(), "--format", "json"});
  REQUIRE(r.status == 0);
  const auto j = rows(r.out);
  REQUIRE(j.size() == 4);
  CHECK(j[0]["decision_label"] == "A");
  CHECK(j[0]["gap_lower"] == 0.0);
  CHECK(j[0]["gap_upper"] == 0.0);
  CHECK(j[2]["decision"] == j[3]["decision"]);  // kl with r = 0 is saa
  const auto r2 = cli({"prescribe", "--config", cfg.string(), "--format", "json", "--counts", "9,1"});
  REQUIRE(r2.status == 0);
  CHECK(rows(r2.out)[1]["decision"] == j[1]["decision"]);  // robust ignores data
}

TEST_CASE("disappoint command") {
  const auto cfg = write("dis.json", config(R"("predictors": ["saa", "robust"],
      "schedule": {"family": "power_law", "c": 1.0, "beta": 0.5}, "T_list": [2],
      "mode": {"kind": "prediction", "decision": 1})"));
  const auto r = cli({"disappoint", "--config", cfg.string()});
  REQUIRE(r.status == 0);
  std::istringstream lines(r.out);
  std::string header, saa, robust;
  std::getline(lines, header);
  std::getline(lines, saa);
  std::getline(lines, robust);
  CHECK(header == "schema_version,T,a_T,predictor,mode,probability,log_probability,rate,method,std_err,n_samples,effective_sample_size");
  CHECK(saa.find(",saa,prediction(1),") != std::string::npos);
  CHECK(std::abs(std::stod(saa.substr(saa.find("prediction(1),") + 14)) - 0.25) <= 1e-12);
  CHECK(robust.find(",robust,prediction(1),0,-inf,-inf,exact,") != std::string::npos);

  // stochastic methods need a seed
  const auto noseed = cli({"disappoint", "--config", cfg.string(), "--method", "mc"});
  CHECK(noseed.status == 2);
  // cap exceeded suggests a method switch
  const auto capped = cli({"disappoint", "--config", cfg.string(), "--T", "5000", "--cap", "100"});
  CHECK(capped.status == 1);
  CHECK(capped.err.find("importance") != std::string::npos);
  CHECK(nlohmann::json::parse(capped.err)["error"]["kind"] == "cap_exceeded");
  // rows are ordered by T then predictor
  const auto multi = cli({"disappoint", "--config", cfg.string(), "--T", "9,3", "--format", "json"});
  const auto j = rows(multi.out);
  REQUIRE(j.size() == 4);
  CHECK(j[0]["T"] == 3);
  CHECK(j[1]["predictor"] == "robust");
  CHECK(j[2]["T"] == 9);
  CHECK(j[1]["rate"] == "-inf");
}

TEST_CASE("identical config and seed give byte-identical files") {
  const auto cfg = write("rep.json", config(R"("predictors": ["svp", {"kind": "kl", "r": 0.1}],
      "schedule": {"family": "power_law", "c": 1.0, "beta": 0.5}, "T_list": [20, 40],
      "mode": {"kind": "prediction", "decision": 1}, "method": "importance", "n_samples": 30000, "seed": 11)"));
  const auto a = scratch() / "a.csv", b = scratch() / "b.csv";
  REQUIRE(cli({"disappoint", "--config", cfg.string(), "--out", a.string()}).status == 0);
  REQUIRE(cli({"disappoint", "--config", cfg.string(), "--out", b.string()}).status == 0);
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  CHECK(!slurp(a).empty());
  CHECK(slurp(a) == slurp(b));
  // a different seed changes the estimate
  REQUIRE(cli({"disappoint", "--config", cfg.string(), "--out", b.string(), "--seed", "12"}).status == 0);
  CHECK(slurp(a) != slurp(b));
}

TEST_CASE("convexity command") {
  const auto r = cli({"convexity", "--scenario", kGrid, "--counts", "1,1,1,1,1", "--ratios",
                      "2,0.5,0.02,0.0005", "--format", "json"});
  REQUIRE(r.status == 0);
  const auto j = rows(r.out);
  REQUIRE(j.size() == 4);
  CHECK(j[0]["midpoint_violations"].get<int>() > 0);
  CHECK(j[1]["midpoint_violations"].get<int>() > 0);
  CHECK(j[3]["threshold_ok"] == true);
  CHECK(j[3]["midpoint_violations"] == 0);
  CHECK(j[3]["a_T"] == 0.0005 * 5);

  const auto flat = write("flat.json", R"({"schema_version": 1,
      "loss": [[1, 1], [1, 1], [1, 1]]})");
  const auto f = cli({"convexity", "--scenario", flat.string(), "--counts", "3,4", "--ratios", "2,0.5", "--format", "json"});
  REQUIRE(f.status == 0);
  for (const auto& row : rows(f.out)) CHECK(row["midpoint_violations"] == 0);

  const auto empty = cli({"convexity", "--scenario", kGrid, "--counts", "1,1,1,1,1"});
  CHECK(empty.status == 2);
}

TEST_CASE("usage errors") {
  CHECK(cli({}).status == 2);
  CHECK(cli({"bogus"}).status == 2);
  CHECK(cli({"predict", "--frobnicate"}).status == 2);
  CHECK(cli({"predict"}).status == 2);  // no scenario
  CHECK(cli({"--help"}).status == 0);
  CHECK(cli({"predict", "--scenario", "/nonexistent/file.json", "--counts", "1,1"}).status == 2);
}

TEST_CASE("the installed binary runs") {
  const std::string cmd = std::string("\"") + DROLAB_CLI + "\" disappoint --scenario \"" + kDemo +
                          "\" --config \"" + write("bin.json", config(R"("predictors": ["saa"],
      "schedule": {"family": "power_law", "c": 1.0, "beta": 0.5}, "T_list": [2], "mode": {"kind": "prediction", "decision": 1})")).string() +
                          "\" > \"" + (scratch() / "bin.out").string() + "\"";
  CHECK(std::system(cmd.c_str()) == 0);
  std::ifstream f(scratch() / "bin.out");
  std::string header, row;
  std::getline(f, header);
  std::getline(f, row);
  CHECK(row.find(",saa,prediction(1),0.25") != std::string::npos);
}
