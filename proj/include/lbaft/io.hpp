#pragma once
#include <iosfwd>
#include <string>
#include <vector>

#include "lbaft/mc_study.hpp"

// File formats and command entry points. Datasets travel as CSV with header
// time,status,z1..zp; configurations as JSON. Numbers are serialized with 17
// significant digits so a written file parses back to the same values, bit
// for bit.

namespace lbaft {

std::string write_dataset_csv(const std::vector<SubjectRecord>& records);

// throws std::invalid_argument naming the 1-based file row on any malformed
// header, field count, or value
std::vector<SubjectRecord> read_dataset_csv(const std::string& text);

void save_text(const std::string& path, const std::string& text);
std::string load_text(const std::string& path);  // throws on unreadable path

// scenario object: {theta0, errorLaw, covariateLaw, scheme, censoring?, n, seed}.
// theta0 is a number or array; errorLaw is {family: "log-normal"|"exponential", ...};
// covariateLaw is {family: "uniform-box"|"empirical", ...}; censoring is an
// errorLaw object, {rate: r} shorthand, or {targetFraction: f} which
// calibrates the exponential rate against the scenario
Scenario parse_scenario(const std::string& jsonText);

// inverse of method_name; throws std::invalid_argument on unknown names
Method parse_method_name(const std::string& name);

// study object: {scenarios: [{label, scenario, methods, misspecifiedAnalysisLaw?}, ...],
// replicates?, ciLevel?, masterSeed?}; a single-scenario shorthand
// {scenario, methods, ...} is also accepted
StudyConfig parse_study(const std::string& jsonText);

// command cores behind the command-line binary; diagnostics go to err and the
// return value is the process exit code: 0 success, 2 bad input or
// configuration, 3 estimation failure
int cmd_simulate(const std::string& configPath, const std::string& outPath, std::ostream& err);

struct FitCommand {
  std::string dataPath;
  Method method = Method::NaiveProfile;
  double level = 0.95;
  double bandwidth = 0.0;            // 0: resolved from the data
  std::string scheme = "backward-recurrence";
  std::string analysisLawJson;       // covariate-law object, required by known-h
  std::vector<std::string> labels;   // covariate column labels for the ratio table
  std::vector<std::string> referenceLevels;  // labels rendered as ratio-1 rows
};

// prints a one-line JSON result followed by the time-ratio table
int cmd_fit(const FitCommand& cmd, std::ostream& out, std::ostream& err);

struct StudyCommand {
  std::string configPath;
  std::string outPath;     // results CSV
  int threads = 0;         // 0: keep the config's value
  int replicates = 0;      // 0: keep the config's value
};

// writes the CSV and prints the human-readable table
int cmd_study(const StudyCommand& cmd, std::ostream& out, std::ostream& err);

}  // namespace lbaft
