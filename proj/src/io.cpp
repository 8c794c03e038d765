#include "lbaft/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lbaft/estimators.hpp"

namespace lbaft {

namespace {

using nlohmann::json;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_number(const std::string& field, int row, const char* what) {
  errno = 0;
  const char* s = field.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end == s || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    throw std::invalid_argument("row " + std::to_string(row) + ": " + what + " is not a finite number: '" +
                                field + "'");
  return v;
}

ErrorLaw parse_error_law(const json& j, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  std::string family = j.at("family").get<std::string>();
  if (family == "log-normal")
    return log_normal_law(j.value("logMean", 0.0), j.at("logSd").get<double>());
  if (family == "exponential") return exponential_law(j.at("rate").get<double>());
  throw std::invalid_argument(where + ": family must be log-normal or exponential, got '" + family +
                              "'");
}

Eigen::VectorXd parse_vector(const json& j) {
  if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j.at(i).get<double>();
  return v;
}

CovariateLaw parse_covariate_law(const json& j, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  std::string family = j.at("family").get<std::string>();
  if (family == "uniform-box")
    return uniform_box_law(parse_vector(j.at("lower")), parse_vector(j.at("upper")));
  if (family == "empirical") {
    const json& pts = j.at("points");
    if (!pts.is_array() || pts.empty())
      throw std::invalid_argument(where + ": points must be a nonempty array");
    Eigen::MatrixXd m(pts.size(), pts.at(0).is_number() ? 1 : pts.at(0).size());
    for (std::size_t r = 0; r < pts.size(); ++r)
      m.row(static_cast<int>(r)) = parse_vector(pts.at(r)).transpose();
    return empirical_law(m);
  }
  throw std::invalid_argument(where + ": family must be uniform-box or empirical, got '" + family +
                              "'");
}

ObservationScheme parse_scheme(const std::string& s) {
  if (s == "underlying") return ObservationScheme::Underlying;
  if (s == "length-biased") return ObservationScheme::LengthBiased;
  if (s == "forward-recurrence") return ObservationScheme::ForwardRecurrence;
  if (s == "backward-recurrence") return ObservationScheme::BackwardRecurrence;
  throw std::invalid_argument("scheme must be one of underlying, length-biased, "
                              "forward-recurrence, backward-recurrence; got '" +
                              s + "'");
}

Scenario parse_scenario_json(const json& j) {
  Scenario sc;
  sc.theta0 = parse_vector(j.at("theta0"));
  sc.errorLaw = parse_error_law(j.at("errorLaw"), "errorLaw");
  sc.covariateLaw = parse_covariate_law(j.at("covariateLaw"), "covariateLaw");
  sc.scheme = parse_scheme(j.value("scheme", std::string("forward-recurrence")));
  sc.n = j.value("n", 100);
  sc.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("censoring")) {
    const json& c = j.at("censoring");
    if (c.is_object() && c.contains("targetFraction")) {
      double rate = calibrate_censoring_rate(sc, c.at("targetFraction").get<double>());
      sc.censoring = exponential_law(rate);
    } else if (c.is_object() && c.contains("family")) {
      sc.censoring = parse_error_law(c, "censoring");
    } else if (c.is_object() && c.contains("rate")) {
      sc.censoring = exponential_law(c.at("rate").get<double>());
    } else {
      throw std::invalid_argument("censoring: expected a law, {rate}, or {targetFraction}");
    }
  }
  return sc;
}

StudyScenario parse_study_scenario(const json& j, int index) {
  StudyScenario s;
  s.label = j.value("label", "scenario-" + std::to_string(index + 1));
  s.scenario = parse_scenario_json(j.at("scenario"));
  for (const auto& m : j.at("methods"))
    s.methods.push_back(parse_method_name(m.get<std::string>()));
  if (j.contains("misspecifiedAnalysisLaw"))
    s.misspecifiedAnalysisLaw =
        parse_covariate_law(j.at("misspecifiedAnalysisLaw"), "misspecifiedAnalysisLaw");
  return s;
}

json fit_to_json(const EstimateResult& est) {
  json j;
  j["method"] = method_name(est.method);
  j["thetaHat"] = std::vector<double>(est.thetaHat.data(), est.thetaHat.data() + est.thetaHat.size());
  j["se"] = std::vector<double>(est.se.data(), est.se.data() + est.se.size());
  j["seCurvature"] =
      std::vector<double>(est.seCurvature.data(), est.seCurvature.data() + est.seCurvature.size());
  j["sePlugin"] = std::vector<double>(est.sePlugin.data(), est.sePlugin.data() + est.sePlugin.size());
  json ci = json::array();
  for (int k = 0; k < est.ci.rows(); ++k) ci.push_back({est.ci(k, 0), est.ci(k, 1)});
  j["ci"] = ci;
  j["level"] = est.level;
  j["converged"] = est.converged;
  j["evaluations"] = est.evaluations;
  j["bandwidth"] = est.bandwidth;
  if (!est.note.empty()) j["note"] = est.note;
  return j;
}

}  // namespace

Method parse_method_name(const std::string& name) {
  if (name == "naive") return Method::NaiveProfile;
  if (name == "known-h") return Method::KnownH;
  if (name == "mean-zero") return Method::MeanZero;
  throw std::invalid_argument("method must be naive, known-h or mean-zero; got '" + name + "'");
}

std::string write_dataset_csv(const std::vector<SubjectRecord>& records) {
  if (records.empty()) throw std::invalid_argument("write_dataset_csv: no records");
  const int p = static_cast<int>(records.front().covariates.size());
  if (p < 1) throw std::invalid_argument("write_dataset_csv: records carry no covariates");
  std::string out = "time,status";
  for (int k = 1; k <= p; ++k) out += ",z" + std::to_string(k);
  out += "\n";
  for (const auto& r : records) {
    if (r.covariates.size() != p)
      throw std::invalid_argument("write_dataset_csv: ragged covariate rows");
    out += g17(r.time) + "," + std::to_string(r.event ? 1 : 0);
    for (int k = 0; k < p; ++k) out += "," + g17(r.covariates(k));
    out += "\n";
  }
  return out;
}

std::vector<SubjectRecord> read_dataset_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("row 1: empty dataset");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> head = split(line, ',');
  if (head.size() < 3 || head[0] != "time" || head[1] != "status")
    throw std::invalid_argument("row 1: header must start with time,status,z1");
  const int p = static_cast<int>(head.size()) - 2;
  for (int k = 0; k < p; ++k)
    if (head[k + 2] != "z" + std::to_string(k + 1))
      throw std::invalid_argument("row 1: covariate columns must be named z1..z" +
                                  std::to_string(p));

  std::vector<SubjectRecord> records;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f = split(line, ',');
    if (static_cast<int>(f.size()) != p + 2)
      throw std::invalid_argument("row " + std::to_string(row) + ": expected " +
                                  std::to_string(p + 2) + " fields, got " +
                                  std::to_string(f.size()));
    SubjectRecord r;
    r.time = parse_number(f[0], row, "time");
    if (!(r.time > 0.0))
      throw std::invalid_argument("row " + std::to_string(row) + ": time must be positive");
    if (f[1] == "0")
      r.event = 0;
    else if (f[1] == "1")
      r.event = 1;
    else
      throw std::invalid_argument("row " + std::to_string(row) + ": status must be 0 or 1, got '" +
                                  f[1] + "'");
    r.covariates.resize(p);
    for (int k = 0; k < p; ++k)
      r.covariates(k) = parse_number(f[k + 2], row, ("z" + std::to_string(k + 1)).c_str());
    records.push_back(std::move(r));
  }
  if (records.empty()) throw std::invalid_argument("row 1: dataset has a header but no rows");
  return records;
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string load_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Scenario parse_scenario(const std::string& jsonText) {
  json j;
  try {
    j = json::parse(jsonText);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return parse_scenario_json(j.contains("scenario") ? j.at("scenario") : j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad scenario config: ") + e.what());
  }
}

StudyConfig parse_study(const std::string& jsonText) {
  json j;
  try {
    j = json::parse(jsonText);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    StudyConfig cfg;
    cfg.replicates = j.value("replicates", 1000);
    cfg.ciLevel = j.value("ciLevel", 0.95);
    cfg.masterSeed = j.value("masterSeed", std::uint64_t{1});
    if (j.contains("scenarios")) {
      const json& arr = j.at("scenarios");
      for (std::size_t i = 0; i < arr.size(); ++i)
        cfg.scenarios.push_back(parse_study_scenario(arr.at(i), static_cast<int>(i)));
    } else {
      cfg.scenarios.push_back(parse_study_scenario(j, 0));
    }
    return cfg;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad study config: ") + e.what());
  }
}

int cmd_simulate(const std::string& configPath, const std::string& outPath, std::ostream& err) {
  try {
    Scenario sc = parse_scenario(load_text(configPath));
    save_text(outPath, write_dataset_csv(generate_cohort(sc)));
    return 0;
  } catch (const std::exception& e) {
    err << "simulate: " << e.what() << "\n";
    return 2;
  }
}

int cmd_fit(const FitCommand& cmd, std::ostream& out, std::ostream& err) {
  std::vector<SubjectRecord> records;
  KernelSpec spec;
  FitOptions opts;
  CovariateLaw analysisLaw;
  try {
    parse_scheme(cmd.scheme);  // validated; estimation is residual-based either way
    if (!(cmd.level > 0.0 && cmd.level < 1.0))
      throw std::invalid_argument("level must lie in (0,1)");
    if (cmd.bandwidth < 0.0) throw std::invalid_argument("bandwidth must be nonnegative");
    spec.bandwidth = cmd.bandwidth;
    opts.level = cmd.level;
    records = read_dataset_csv(load_text(cmd.dataPath));
    if (cmd.method == Method::KnownH) {
      if (cmd.analysisLawJson.empty())
        throw std::invalid_argument("known-h needs a covariate law (--analysis-law)");
      json j = json::parse(cmd.analysisLawJson);
      analysisLaw = parse_covariate_law(j, "analysis law");
    }
  } catch (const std::exception& e) {
    err << "fit: " << e.what() << "\n";
    return 2;
  }

  EstimateResult est;
  try {
    switch (cmd.method) {
      case Method::NaiveProfile: est = fit_naive(records, spec, opts); break;
      case Method::KnownH: est = fit_known_h(records, spec, analysisLaw, opts); break;
      case Method::MeanZero: est = fit_mean_zero(records, spec, opts); break;
    }
    if (!est.converged) throw std::runtime_error("estimator did not converge: " + est.note);
    if (est.se.size() == 0)
      throw std::runtime_error("estimator produced no standard errors: " + est.note);
  } catch (const std::exception& e) {
    err << "fit: " << e.what() << "\n";
    return 3;
  }

  out << fit_to_json(est).dump() << "\n\n";
  std::vector<TimeRatioRow> rows = time_ratios(est, cmd.labels, cmd.referenceLevels);
  out << "term          ratio      lower      upper\n";
  for (const auto& r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-12s %9.4f  %9.4f  %9.4f%s\n", r.label.c_str(), r.ratio,
                  r.lower, r.upper, r.reference ? "  (reference)" : "");
    out << buf;
  }
  return 0;
}

int cmd_study(const StudyCommand& cmd, std::ostream& out, std::ostream& err) {
  StudyConfig cfg;
  try {
    cfg = parse_study(load_text(cmd.configPath));
    if (cmd.threads > 0) cfg.threads = cmd.threads;
    if (cmd.replicates > 0) cfg.replicates = cmd.replicates;
  } catch (const std::exception& e) {
    err << "study: " << e.what() << "\n";
    return 2;
  }
  try {
    std::vector<ScenarioResult> results = run_study(cfg);
    save_text(cmd.outPath, table_csv(results));
    out << table_text(results);
    return 0;
  } catch (const std::exception& e) {
    err << "study: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace lbaft
