#pragma once
#include <optional>
#include <vector>

#include "lbaft/laws.hpp"

// Cohort generation under the four observation schemes. Each subject draws
// from its own derived RNG stream with fixed slots (covariates, length,
// uniform split, censoring), so the same seed produces coupled cohorts across
// schemes: a forward-recurrence time is exactly its length-biased counterpart
// times the same uniform split.

namespace lbaft {

enum class ObservationScheme { Underlying, LengthBiased, ForwardRecurrence, BackwardRecurrence };

struct SubjectRecord {
  double time = 0.0;  // observed (possibly censored) duration
  int event = 1;      // 1 = observed, 0 = censored
  Eigen::VectorXd covariates;
};

struct Scenario {
  Eigen::VectorXd theta0;
  ErrorLaw errorLaw;  // baseline lifetime law at covariate scale zero
  CovariateLaw covariateLaw;
  ObservationScheme scheme = ObservationScheme::ForwardRecurrence;
  std::optional<ErrorLaw> censoring;  // ForwardRecurrence / LengthBiased only
  int n = 100;
  std::uint64_t seed = 1;
};

std::vector<SubjectRecord> generate_cohort(const Scenario& sc);

double censoring_fraction(const std::vector<SubjectRecord>& cohort);

// Exponential censoring rate that hits the target censored fraction for the
// scenario, found by bisecting the empirical Laplace transform of a large
// uncensored reference cohort.
double calibrate_censoring_rate(const Scenario& sc, double targetFraction,
                                int referenceSize = 50000);

}  // namespace lbaft
