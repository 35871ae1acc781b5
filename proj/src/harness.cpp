#include "drolab/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "drolab/error.hpp"
#include "drolab/prescriptors.hpp"

namespace drolab {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config parsing helpers

[[noreturn]] void bad(const std::string& source, const std::string& field, const std::string& what) {
  throw ParseError(source, 0, field, what);
}

double get_number(const json& v, const std::string& source, const std::string& field) {
  if (!v.is_number()) bad(source, field, "expected a number");
  return v.get<double>();
}

std::uint64_t get_count(const json& v, const std::string& source, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    bad(source, field, "expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

RegimeSchedule schedule_from_json(const json& s, const std::string& source) {
  if (!s.is_object() || !s.contains("family") || !s.at("family").is_string()) {
    bad(source, "schedule", "expected an object with a 'family' string");
  }
  const auto family = s.at("family").get<std::string>();
  auto num = [&](const char* key) {
    if (!s.contains(key)) bad(source, std::string("schedule.") + key, "missing");
    return get_number(s.at(key), source, std::string("schedule.") + key);
  };
  if (family == "exponential") return RegimeSchedule::exponential(num("r"));
  if (family == "power_law") return RegimeSchedule::power_law(num("c"), num("beta"));
  if (family == "logarithmic") return RegimeSchedule::logarithmic(num("c"));
  if (family == "table") {
    if (!s.contains("values") || !s.at("values").is_object()) {
      bad(source, "schedule.values", "expected an object mapping T to a_T");
    }
    std::map<std::uint64_t, double> values;
    for (const auto& [key, val] : s.at("values").items()) {
      std::uint64_t T = 0;
      try {
        std::size_t used = 0;
        T = std::stoull(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        bad(source, "schedule.values", "key '" + key + "' is not a sample size");
      }
      values[T] = get_number(val, source, "schedule.values." + key);
    }
    return RegimeSchedule::table(std::move(values));
  }
  bad(source, "schedule.family",
      "unknown family '" + family + "' (expected exponential, power_law, logarithmic, table)");
}

std::vector<std::uint64_t> counts_from_json(const json& v, const std::string& source,
                                            const std::string& field) {
  if (!v.is_array()) bad(source, field, "expected an array of integers");
  std::vector<std::uint64_t> out;
  for (const auto& e : v) out.push_back(get_count(e, source, field));
  return out;
}

std::vector<double> numbers_from_json(const json& v, const std::string& source,
                                      const std::string& field) {
  if (!v.is_array()) bad(source, field, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(get_number(e, source, field));
  return out;
}

EstimationKind method_from_string(const std::string& m) {
  if (m == "exact") return EstimationKind::Exact;
  if (m == "mc") return EstimationKind::MonteCarlo;
  if (m == "importance") return EstimationKind::Importance;
  throw InputError("unknown method '" + m + "' (expected exact, mc, importance)");
}

OutputFormat format_from_string(const std::string& f) {
  if (f == "csv") return OutputFormat::Csv;
  if (f == "json") return OutputFormat::Json;
  throw InputError("unknown format '" + f + "' (expected csv, json)");
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_same_v<T, double>) {
        out.push_back(std::stod(item, &used));
      } else {
        if (!item.empty() && item[0] == '-') throw std::invalid_argument(item);
        out.push_back(static_cast<T>(std::stoull(item, &used)));
      }
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError(std::string("--") + what + ": cannot parse '" + item + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Command helpers

Distribution empirical_from(const ExperimentConfig& cfg, const Problem& problem,
                            std::uint64_t* T_out) {
  if (!cfg.counts) throw InputError("this command needs observed 'counts'");
  if (cfg.counts->size() != problem.scenarios()) {
    throw ValidationError("dimensions", "counts has " + std::to_string(cfg.counts->size()) +
                                            " entries for " +
                                            std::to_string(problem.scenarios()) + " scenarios");
  }
  const EmpiricalDistribution emp(*cfg.counts);
  *T_out = emp.sample_size();
  return emp.to_distribution();
}

const RegimeSchedule& require_schedule(const ExperimentConfig& cfg) {
  if (!cfg.schedule) throw InputError("this command needs a 'schedule'");
  return *cfg.schedule;
}

void require_predictors(const ExperimentConfig& cfg) {
  if (cfg.predictors.empty()) throw InputError("no predictors configured");
}

Cell optional_cell(const std::optional<double>& v) {
  return v ? Cell(*v) : Cell(std::monostate{});
}

Cell weights_cell(const std::optional<Distribution>& d) {
  if (!d) return std::monostate{};
  return std::vector<double>(d->weights().begin(), d->weights().end());
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json double_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

RegimeSchedule parse_schedule(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError("<schedule>", 1, "schedule", e.what());
  }
  return schedule_from_json(doc, "<schedule>");
}

ExperimentConfig parse_config(std::string_view text, const std::string& source,
                              const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t at = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + at, '\n');
    throw ParseError(source, static_cast<std::size_t>(line), "", e.what());
  }
  if (!doc.is_object()) bad(source, "", "top level must be an object");
  if (!doc.contains("schema_version") || !doc.at("schema_version").is_number_integer() ||
      doc.at("schema_version").get<int>() != kConfigSchemaVersion) {
    bad(source, "schema_version", "missing or unsupported (expected 1)");
  }

  ExperimentConfig cfg;
  if (doc.contains("scenario")) {
    if (!doc.at("scenario").is_string()) bad(source, "scenario", "expected a path string");
    std::filesystem::path p = doc.at("scenario").get<std::string>();
    cfg.scenario_path = (p.is_relative() && !base_dir.empty()) ? base_dir / p : p;
  }
  if (doc.contains("predictors")) {
    const auto& preds = doc.at("predictors");
    if (!preds.is_array()) bad(source, "predictors", "expected an array");
    for (const auto& p : preds) {
      PredictorSpec spec;
      if (p.is_string()) {
        spec.kind = predictor_kind_from_string(p.get<std::string>());
      } else if (p.is_object() && p.contains("kind") && p.at("kind").is_string()) {
        spec.kind = predictor_kind_from_string(p.at("kind").get<std::string>());
        if (p.contains("r")) {
          if (spec.kind != PredictorKind::KlDro) bad(source, "predictors", "'r' applies to kl only");
          spec.kl_radius = get_number(p.at("r"), source, "predictors.r");
          if (!(*spec.kl_radius >= 0.0)) bad(source, "predictors.r", "must be >= 0");
        }
      } else {
        bad(source, "predictors", "entries are kind strings or {\"kind\": ...} objects");
      }
      cfg.predictors.push_back(spec);
    }
  }
  if (doc.contains("schedule")) cfg.schedule = schedule_from_json(doc.at("schedule"), source);
  if (doc.contains("counts")) cfg.counts = counts_from_json(doc.at("counts"), source, "counts");
  if (doc.contains("T_list")) cfg.T_list = counts_from_json(doc.at("T_list"), source, "T_list");
  if (doc.contains("method")) {
    if (!doc.at("method").is_string()) bad(source, "method", "expected a string");
    cfg.method = method_from_string(doc.at("method").get<std::string>());
  }
  if (doc.contains("n_samples")) cfg.n_samples = get_count(doc.at("n_samples"), source, "n_samples");
  if (doc.contains("seed")) cfg.seed = get_count(doc.at("seed"), source, "seed");
  if (doc.contains("cap")) cfg.cap = get_number(doc.at("cap"), source, "cap");
  if (doc.contains("mode")) {
    const auto& m = doc.at("mode");
    const std::string kind = m.is_string() ? m.get<std::string>()
                             : (m.is_object() && m.contains("kind") && m.at("kind").is_string())
                                 ? m.at("kind").get<std::string>()
                                 : std::string();
    if (kind == "prescription") {
      cfg.mode = PrescriptionMode{};
    } else if (kind == "prediction") {
      std::uint64_t x = 0;
      if (m.is_object() && m.contains("decision")) x = get_count(m.at("decision"), source, "mode.decision");
      cfg.mode = PredictionMode{static_cast<std::size_t>(x)};
    } else {
      bad(source, "mode", "expected \"prescription\" or {\"kind\": \"prediction\", \"decision\": x}");
    }
  }
  if (doc.contains("ratios")) cfg.ratios = numbers_from_json(doc.at("ratios"), source, "ratios");
  if (doc.contains("shift")) cfg.shift = numbers_from_json(doc.at("shift"), source, "shift");
  if (doc.contains("output")) {
    if (!doc.at("output").is_string()) bad(source, "output", "expected a path string");
    cfg.output_path = doc.at("output").get<std::string>();
  }
  if (doc.contains("format")) {
    if (!doc.at("format").is_string()) bad(source, "format", "expected a string");
    cfg.format = format_from_string(doc.at("format").get<std::string>());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string(), path.parent_path());
}

// ---------------------------------------------------------------------------
// Commands

Table cmd_predict(const ExperimentConfig& cfg) {
  const Problem problem = load_scenario(cfg.scenario_path);
  require_predictors(cfg);
  const RegimeSchedule& schedule = require_schedule(cfg);
  std::uint64_t T = 0;
  empirical_from(cfg, problem, &T);
  const EmpiricalDistribution emp(*cfg.counts);
  const double a_T = schedule.a(T);

  Table t;
  t.columns = {"schema_version", "decision", "decision_label", "predictor", "T", "a_T",
               "value", "worst_case", "condition_ok", "dual_alpha"};
  for (std::size_t x = 0; x < problem.decisions(); ++x) {
    for (const auto& spec : cfg.predictors) {
      const PredictionResult r = predict(problem, spec, x, emp, schedule);
      t.rows.push_back({std::uint64_t{kOutputSchemaVersion}, std::uint64_t{x},
                        problem.loss.decision_labels()[x], spec.label(), T, a_T, r.value,
                        weights_cell(r.worst_case),
                        r.condition_ok ? Cell(*r.condition_ok) : Cell(std::monostate{}),
                        optional_cell(r.dual_alpha)});
    }
  }
  return t;
}

Table cmd_prescribe(const ExperimentConfig& cfg) {
  const Problem problem = load_scenario(cfg.scenario_path);
  require_predictors(cfg);
  const RegimeSchedule& schedule = require_schedule(cfg);
  std::uint64_t T = 0;
  const Distribution phat = empirical_from(cfg, problem, &T);
  const double a_T = schedule.a(T);

  Table t;
  t.columns = {"schema_version", "predictor", "T", "a_T", "decision", "decision_label",
               "value", "gap_lower", "gap_upper"};
  for (const auto& spec : cfg.predictors) {
    const PrescriptionResult r = prescribe_at(problem, spec, phat, T, schedule);
    Cell lower = std::monostate{};
    Cell upper = std::monostate{};
    if (spec.kind == PredictorKind::Svp && phat.is_interior()) {
      const GapBound g = prescription_gap_bound(problem, phat, T, schedule);
      lower = g.lower;
      upper = g.upper;
    }
    t.rows.push_back({std::uint64_t{kOutputSchemaVersion}, spec.label(), T, a_T,
                      std::uint64_t{r.decision}, problem.loss.decision_labels()[r.decision],
                      r.value, lower, upper});
  }
  return t;
}

Table cmd_disappoint(const ExperimentConfig& cfg) {
  const Problem problem = load_scenario(cfg.scenario_path);
  require_predictors(cfg);
  const RegimeSchedule& schedule = require_schedule(cfg);
  const Distribution& truth = problem.require_true_dist();
  if (cfg.T_list.empty()) throw InputError("disappoint needs a non-empty 'T_list'");
  if (cfg.method != EstimationKind::Exact && !cfg.seed) {
    throw InputError("a seed is mandatory for mc and importance methods");
  }
  if (const auto* pm = std::get_if<PredictionMode>(&cfg.mode)) {
    if (pm->decision >= problem.decisions()) {
      throw ValidationError("decision_index", "mode decision " + std::to_string(pm->decision) +
                                                  " out of range");
    }
  }
  std::optional<Distribution> shift;
  if (cfg.shift) {
    if (cfg.shift->size() != problem.scenarios()) {
      throw ValidationError("dimensions", "shift has the wrong number of weights");
    }
    shift.emplace(*cfg.shift);
  }

  std::vector<std::uint64_t> Ts = cfg.T_list;
  std::sort(Ts.begin(), Ts.end());

  Table t;
  t.columns = {"schema_version", "T", "a_T", "predictor", "mode", "probability",
               "log_probability", "rate", "method", "std_err", "n_samples", "effective_sample_size"};
  for (const std::uint64_t T : Ts) {
    for (const auto& spec : cfg.predictors) {
      const Experiment exp{problem, spec, cfg.mode, truth, schedule};
      DisappointmentReport rep;
      switch (cfg.method) {
        case EstimationKind::Exact: rep = disappointment_exact(exp, T, cfg.cap); break;
        case EstimationKind::MonteCarlo:
          rep = disappointment_mc(exp, T, cfg.n_samples, *cfg.seed);
          break;
        case EstimationKind::Importance:
          rep = disappointment_importance(exp, T, shift ? *shift : default_importance_shift(exp, T),
                                          cfg.n_samples, *cfg.seed);
          break;
      }
      Cell n_cell = std::monostate{};
      Cell ess_cell = std::monostate{};
      if (const auto* mc = std::get_if<MonteCarloMethod>(&rep.method)) n_cell = mc->n_samples;
      if (const auto* is = std::get_if<ImportanceMethod>(&rep.method)) {
        n_cell = is->n_samples;
        ess_cell = is->effective_sample_size;
      }
      t.rows.push_back({std::uint64_t{kOutputSchemaVersion}, T, rep.a_T, spec.label(),
                        describe(cfg.mode), rep.probability, rep.log_probability, rep.rate,
                        rep.method_name(), optional_cell(rep.std_err()), n_cell, ess_cell});
    }
  }
  return t;
}

Table cmd_convexity(const ExperimentConfig& cfg) {
  if (cfg.ratios.empty()) throw InputError("convexity needs a non-empty 'ratios' list");
  const Problem problem = load_scenario(cfg.scenario_path);
  std::uint64_t T = 0;
  const Distribution phat = empirical_from(cfg, problem, &T);

  Table t;
  t.columns = {"schema_version", "ratio", "T", "a_T", "sqrt_2ratio", "threshold_ok",
               "midpoint_violations", "triples_checked"};
  for (const double ratio : cfg.ratios) {
    if (!(ratio >= 0.0)) throw InputError("ratios must be >= 0");
    const ConvexityReport r = convexity_certificate(problem.loss, phat, ratio);
    t.rows.push_back({std::uint64_t{kOutputSchemaVersion}, ratio, T,
                      ratio * static_cast<double>(T), std::sqrt(2.0 * ratio), r.threshold_ok,
                      std::uint64_t{r.midpoint_violations}, std::uint64_t{r.triples_checked}});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Output

std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out += ',';
    out += table.columns[c];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      std::visit(
          [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, std::monostate>) {
            } else if constexpr (std::is_same_v<V, bool>) {
              out += v ? "true" : "false";
            } else if constexpr (std::is_same_v<V, std::uint64_t>) {
              out += std::to_string(v);
            } else if constexpr (std::is_same_v<V, double>) {
              out += format_double(v);
            } else if constexpr (std::is_same_v<V, std::string>) {
              out += csv_escape(v);
            } else {
              for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) out += ';';
                out += format_double(v[i]);
              }
            }
          },
          row[c]);
    }
    out += '\n';
  }
  return out;
}

std::string to_json(const Table& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json obj = json::object();
    for (std::size_t c = 0; c < row.size(); ++c) {
      json v = std::visit(
          [](const auto& x) -> json {
            using V = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<V, std::monostate>) {
              return nullptr;
            } else if constexpr (std::is_same_v<V, double>) {
              return double_json(x);
            } else if constexpr (std::is_same_v<V, std::vector<double>>) {
              json arr = json::array();
              for (double d : x) arr.push_back(double_json(d));
              return arr;
            } else {
              return x;
            }
          },
          row[c]);
      obj[table.columns[c]] = std::move(v);
    }
    rows.push_back(std::move(obj));
  }
  // nlohmann::json objects are key-sorted, which keeps the dump stable.
  return rows.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// CLI

namespace {

void write_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"drolab: data-driven predictors, prescriptors and disappointment experiments"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    std::string scenario;
    std::string out;
    std::string format;
    std::string method;
    std::optional<std::uint64_t> seed;
    std::optional<double> cap;
    std::string counts;
    std::string t_list;
    std::string ratios;
    std::optional<std::uint64_t> n_samples;
  } flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "experiment config (JSON)");
    sub->add_option("--scenario", flags.scenario, "scenario file (JSON)");
    sub->add_option("--out", flags.out, "output file (default: stdout)");
    sub->add_option("--format", flags.format, "csv or json");
    sub->add_option("--counts", flags.counts, "observed counts, comma separated");
  };
  auto* predict_cmd = app.add_subcommand("predict", "evaluate predictors at every decision");
  auto* prescribe_cmd = app.add_subcommand("prescribe", "minimize each predictor over decisions");
  auto* disappoint_cmd = app.add_subcommand("disappoint", "disappointment probabilities and rates");
  auto* convexity_cmd = app.add_subcommand("convexity", "SVP midpoint-convexity sweep");
  for (auto* sub : {predict_cmd, prescribe_cmd, disappoint_cmd, convexity_cmd}) add_common(sub);
  disappoint_cmd->add_option("--method", flags.method, "exact, mc or importance");
  disappoint_cmd->add_option("--seed", flags.seed, "seed for mc and importance");
  disappoint_cmd->add_option("--cap", flags.cap, "maximum lattice size for exact enumeration");
  disappoint_cmd->add_option("--T", flags.t_list, "sample sizes, comma separated");
  disappoint_cmd->add_option("--n-samples", flags.n_samples, "samples for mc and importance");
  convexity_cmd->add_option("--ratios", flags.ratios, "a_T/T values, comma separated");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    write_error(err, "usage_error", e.what());
    return 2;
  }

  try {
    ExperimentConfig cfg;
    if (!flags.config.empty()) cfg = load_config(flags.config);
    if (!flags.scenario.empty()) cfg.scenario_path = flags.scenario;
    if (!flags.out.empty()) cfg.output_path = flags.out;
    if (!flags.format.empty()) cfg.format = format_from_string(flags.format);
    if (!flags.method.empty()) cfg.method = method_from_string(flags.method);
    if (flags.seed) cfg.seed = flags.seed;
    if (flags.cap) cfg.cap = *flags.cap;
    if (flags.n_samples) cfg.n_samples = *flags.n_samples;
    if (!flags.counts.empty()) cfg.counts = parse_list<std::uint64_t>(flags.counts, "counts");
    if (!flags.t_list.empty()) cfg.T_list = parse_list<std::uint64_t>(flags.t_list, "T");
    if (!flags.ratios.empty()) cfg.ratios = parse_list<double>(flags.ratios, "ratios");
    if (cfg.scenario_path.empty()) throw InputError("no scenario given (--scenario or config)");

    Table table;
    if (predict_cmd->parsed()) {
      table = cmd_predict(cfg);
    } else if (prescribe_cmd->parsed()) {
      table = cmd_prescribe(cfg);
    } else if (disappoint_cmd->parsed()) {
      table = cmd_disappoint(cfg);
    } else {
      table = cmd_convexity(cfg);
    }

    const std::string text = cfg.format == OutputFormat::Csv ? to_csv(table) : to_json(table);
    if (cfg.output_path.empty()) {
      out << text;
    } else {
      std::ofstream f(cfg.output_path, std::ios::binary | std::ios::trunc);
      if (!f) throw Error("cannot write output file '" + cfg.output_path.string() + "'");
      f << text;
    }
    return 0;
  } catch (const InputError& e) {
    write_error(err, e.kind(), e.what());
    return 2;
  } catch (const Error& e) {
    write_error(err, e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    write_error(err, "runtime_error", e.what());
    return 1;
  }
}

}  // namespace drolab
