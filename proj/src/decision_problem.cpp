#include "drolab/decision_problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "drolab/error.hpp"

namespace drolab {

using nlohmann::json;

LossMatrix::LossMatrix(std::size_t n_decisions, std::size_t n_scenarios,
                       std::vector<double> row_major, std::vector<std::string> decision_labels,
                       std::vector<std::string> scenario_labels)
    : n_(n_decisions),
      d_(n_scenarios),
      values_(std::move(row_major)),
      decision_labels_(std::move(decision_labels)),
      scenario_labels_(std::move(scenario_labels)) {
  if (n_ < 1) throw ValidationError("decisions", "loss matrix needs at least one decision");
  if (d_ < 2) throw ValidationError("scenarios", "loss matrix needs at least two scenarios");
  if (values_.size() != n_ * d_) {
    throw ValidationError("dimensions", "expected " + std::to_string(n_ * d_) +
                                            " loss values, got " + std::to_string(values_.size()));
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw ValidationError("finite_loss", "loss[" + std::to_string(k / d_) + "][" +
                                               std::to_string(k % d_) + "] is not finite");
    }
    sup_norm_ = std::max(sup_norm_, std::abs(values_[k]));
  }
  if (decision_labels_.empty()) {
    for (std::size_t x = 0; x < n_; ++x) decision_labels_.push_back("x" + std::to_string(x));
  }
  if (scenario_labels_.empty()) {
    for (std::size_t i = 0; i < d_; ++i) scenario_labels_.push_back("s" + std::to_string(i));
  }
  if (decision_labels_.size() != n_) {
    throw ValidationError("dimensions", "decision_labels has " +
                                            std::to_string(decision_labels_.size()) +
                                            " entries for " + std::to_string(n_) + " rows");
  }
  if (scenario_labels_.size() != d_) {
    throw ValidationError("dimensions", "scenario_labels has " +
                                            std::to_string(scenario_labels_.size()) +
                                            " entries for " + std::to_string(d_) + " columns");
  }
}

LossMatrix LossMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ValidationError("decisions", "loss matrix needs at least one decision");
  const std::size_t d = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.size() != d) throw ValidationError("dimensions", "ragged loss rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return LossMatrix(rows.size(), d, std::move(flat));
}

std::span<const double> LossMatrix::row(std::size_t x) const {
  if (x >= n_) throw InputError("decision index " + std::to_string(x) + " out of range");
  return std::span<const double>(values_).subspan(x * d_, d_);
}

Problem::Problem(LossMatrix l, std::optional<Distribution> p)
    : loss(std::move(l)), true_dist(std::move(p)) {
  if (true_dist && true_dist->size() != loss.scenarios()) {
    throw ValidationError("dimensions", "true_dist has " + std::to_string(true_dist->size()) +
                                            " weights for " +
                                            std::to_string(loss.scenarios()) + " scenarios");
  }
}

const Distribution& Problem::require_true_dist() const {
  if (!true_dist) throw InputError("scenario has no true_dist; experiment mode needs one");
  return *true_dist;
}

namespace {

void check_dims(const Problem& problem, std::size_t d) {
  if (d != problem.scenarios()) {
    throw InputError("distribution has " + std::to_string(d) + " weights for " +
                     std::to_string(problem.scenarios()) + " scenarios");
  }
}

}  // namespace

double cost(const Problem& problem, std::size_t x, const Distribution& p) {
  check_dims(problem, p.size());
  const auto l = problem.loss.row(x);
  double s = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) s += l[i] * p[i];
  return s;
}

double cost(const Problem& problem, std::size_t x, const SimplexDelta& delta) {
  check_dims(problem, delta.size());
  const auto l = problem.loss.row(x);
  double s = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) s += l[i] * delta[i];
  return s;
}

double covariance(const Problem& problem, std::size_t x1, std::size_t x2, const Distribution& p) {
  check_dims(problem, p.size());
  const auto a = problem.loss.row(x1);
  const auto b = problem.loss.row(x2);
  auto constant = [](std::span<const double> r) {
    return std::all_of(r.begin(), r.end(), [&](double v) { return v == r[0]; });
  };
  if (constant(a) || constant(b)) return 0.0;
  // Centered form: fewer cancellation problems than E[ab] - E[a]E[b].
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] * p[i];
    mb += b[i] * p[i];
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += p[i] * (a[i] - ma) * (b[i] - mb);
  return s;
}

double variance(const Problem& problem, std::size_t x, const Distribution& p) {
  return std::max(0.0, covariance(problem, x, x, p));
}

std::size_t min_variance_minimizer(const Problem& problem, const Distribution& p, double tol) {
  if (!(tol > 0.0)) throw InputError("min_variance_minimizer: tol must be positive");
  const std::size_t n = problem.decisions();
  std::vector<double> costs(n);
  for (std::size_t x = 0; x < n; ++x) costs[x] = cost(problem, x, p);
  const double best = *std::min_element(costs.begin(), costs.end());
  std::size_t arg = n;
  double best_var = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    if (costs[x] > best + tol) continue;
    const double v = variance(problem, x, p);
    if (arg == n || v < best_var) {
      arg = x;
      best_var = v;
    }
  }
  return arg;
}

std::size_t min_variance_minimizer(const Problem& problem, const Distribution& p) {
  double best = cost(problem, 0, p);
  for (std::size_t x = 1; x < problem.decisions(); ++x) best = std::min(best, cost(problem, x, p));
  return min_variance_minimizer(problem, p, 1e-9 * (1.0 + std::abs(best)));
}

// ---------------------------------------------------------------------------
// Scenario files

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

// Best-effort line lookup for a key; nlohmann/json does not keep positions.
std::size_t line_of_key(std::string_view text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  return pos == std::string_view::npos ? 0 : line_of(text, pos);
}

double number_at(const json& v, std::string_view text, const std::string& source,
                 const std::string& field) {
  // Non-finite values have no JSON literal; accept the usual string spellings
  // so that they can be rejected by validation with a clear message.
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-Infinity") return -std::numeric_limits<double>::infinity();
  }
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) {
    throw ParseError(source, line_of_key(text, field), field, "expected a number");
  }
  return v.get<double>();
}

std::vector<std::string> labels_at(const json& doc, std::string_view text,
                                   const std::string& source, const std::string& field) {
  if (!doc.contains(field)) return {};
  const auto& v = doc.at(field);
  if (!v.is_array()) throw ParseError(source, line_of_key(text, field), field, "expected an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) {
      throw ParseError(source, line_of_key(text, field), field, "labels must be strings");
    }
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

Problem parse_scenario(std::string_view text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t at = e.byte == 0 ? 0 : e.byte - 1;
    // Bare NaN/Infinity tokens (as written by some JSON emitters) are a
    // finiteness violation rather than a syntax problem.
    const std::size_t tok = text.find_last_of(",[: \n\t", at);
    const auto rest = text.substr(tok == std::string_view::npos ? 0 : tok + 1);
    for (std::string_view bad : {"NaN", "nan", "Infinity", "-Infinity", "inf", "-inf"}) {
      if (rest.substr(0, bad.size()) == bad) {
        throw ValidationError("finite_loss", source + ":" + std::to_string(line_of(text, at)) +
                                                 ": non-finite value '" + std::string(bad) + "'");
      }
    }
    throw ParseError(source, line_of(text, at), "", e.what());
  }
  if (!doc.is_object()) throw ParseError(source, 1, "", "top level must be an object");

  if (!doc.contains("schema_version")) {
    throw ParseError(source, 1, "schema_version", "missing");
  }
  const auto& ver = doc.at("schema_version");
  if (!ver.is_number_integer() || ver.get<int>() != kScenarioSchemaVersion) {
    throw ParseError(source, line_of_key(text, "schema_version"), "schema_version",
                     "unsupported version (expected " + std::to_string(kScenarioSchemaVersion) +
                         ")");
  }

  if (!doc.contains("loss")) throw ParseError(source, 1, "loss", "missing");
  const auto& loss = doc.at("loss");
  if (!loss.is_array() || loss.empty()) {
    throw ParseError(source, line_of_key(text, "loss"), "loss", "expected a non-empty matrix");
  }
  const std::size_t n = loss.size();
  std::size_t d = 0;
  std::vector<double> flat;
  for (std::size_t x = 0; x < n; ++x) {
    const auto& row = loss[x];
    const std::string field = "loss[" + std::to_string(x) + "]";
    if (!row.is_array()) throw ParseError(source, line_of_key(text, "loss"), field, "expected a row");
    if (x == 0) d = row.size();
    if (row.size() != d) {
      throw ValidationError("dimensions", field + " has " + std::to_string(row.size()) +
                                              " entries, expected " + std::to_string(d));
    }
    for (std::size_t i = 0; i < d; ++i) {
      flat.push_back(number_at(row[i], text, source, "loss"));
    }
  }

  LossMatrix matrix(n, d, std::move(flat), labels_at(doc, text, source, "decision_labels"),
                    labels_at(doc, text, source, "scenario_labels"));

  std::optional<Distribution> true_dist;
  if (doc.contains("true_dist") && !doc.at("true_dist").is_null()) {
    const auto& td = doc.at("true_dist");
    if (!td.is_array()) {
      throw ParseError(source, line_of_key(text, "true_dist"), "true_dist", "expected an array");
    }
    std::vector<double> w;
    for (const auto& e : td) w.push_back(number_at(e, text, source, "true_dist"));
    if (w.size() != d) {
      throw ValidationError("dimensions", "true_dist has " + std::to_string(w.size()) +
                                              " weights for " + std::to_string(d) + " scenarios");
    }
    true_dist.emplace(std::move(w));
  }
  return Problem(std::move(matrix), std::move(true_dist));
}

Problem load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open scenario file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

std::string scenario_to_json(const Problem& problem) {
  json doc;
  doc["schema_version"] = kScenarioSchemaVersion;
  doc["decision_labels"] = problem.loss.decision_labels();
  doc["scenario_labels"] = problem.loss.scenario_labels();
  json rows = json::array();
  for (std::size_t x = 0; x < problem.decisions(); ++x) {
    const auto r = problem.loss.row(x);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  doc["loss"] = std::move(rows);
  if (problem.true_dist) {
    const auto w = problem.true_dist->weights();
    doc["true_dist"] = std::vector<double>(w.begin(), w.end());
  }
  return doc.dump(2) + "\n";
}

}  // namespace drolab
