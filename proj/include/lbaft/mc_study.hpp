#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lbaft/estimators.hpp"
#include "lbaft/sampling.hpp"

// Monte Carlo harness: runs matched replicates of a data-generating scenario
// through one or more estimators and aggregates bias, spread and coverage.
// The full output is a pure function of the configuration; replicates are
// farmed out to a thread pool but aggregated in replicate order, so thread
// count never changes a digit.

namespace lbaft {

struct StudyScenario {
  std::string label;  // row key in rendered tables, e.g. "theta0=1" or "x=-0.9"
  Scenario scenario;
  std::vector<Method> methods;
  // law handed to the covariate-law-aware estimators instead of the truth,
  // for misspecification rows; the profile estimator never sees it
  std::optional<CovariateLaw> misspecifiedAnalysisLaw;
};

struct StudyConfig {
  std::vector<StudyScenario> scenarios;
  int replicates = 1000;
  double ciLevel = 0.95;
  std::uint64_t masterSeed = 1;
  int threads = 0;  // 0: one per hardware thread
};

struct ScenarioResult {
  std::string label;
  int n = 0;
  Method method = Method::NaiveProfile;
  Eigen::VectorXd bias;            // mean(thetaHat) - theta0 over usable replicates
  Eigen::VectorXd biasMcError;     // empiricalSE / sqrt(replicates)
  Eigen::VectorXd empiricalSE;     // sample SD of thetaHat
  Eigen::VectorXd meanEstimatedSE; // mean of the reported standard errors
  double coverage;                 // interval hit rate; NaN for methods that
                                   // carry no calibrated interval
  int failures = 0;                // exceptions, non-convergence, missing SE
  bool unreliable = false;         // failures exceed 5% of replicates
};

// replicate r of scenario s uses seed combine_seeds(masterSeed, s.seed, r);
// every requested method sees the same cohort, so method columns are matched
std::vector<ScenarioResult> run_study(const StudyConfig& cfg);

std::string method_name(Method m);

// fixed-width human-readable table, one row per scenario x method
std::string table_text(const std::vector<ScenarioResult>& results);

// machine-readable rows, one per scenario x method x coordinate, numbers at
// full round-trip precision so identical configs give identical bytes
std::string table_csv(const std::vector<ScenarioResult>& results);

}  // namespace lbaft
