#pragma once
#include <string>
#include <vector>

#include "lbaft/kernel_profile.hpp"

// Point estimators for the log time-ratio coefficients. All three maximize or
// solve criteria built on the kernel profile likelihood with the bandwidth
// resolved once per dataset from the log observation times.

namespace lbaft {

enum class Method { NaiveProfile, KnownH, MeanZero };

struct EstimateResult {
  Eigen::VectorXd thetaHat;
  Eigen::VectorXd se;           // primary standard errors behind ci: the plug-in
                                // when it is filled, the curvature otherwise
  Eigen::VectorXd seCurvature;  // negative inverse criterion Hessian; empty when
                                // the curvature is not negative definite
  Eigen::VectorXd sePlugin;     // information plug-in, filled for fully observed
                                // profile fits; its bandwidth rule resolves on
                                // the fitted residuals unless the spec pins one
  Eigen::MatrixXd ci;           // p x 2 Wald interval at the requested level
  Method method = Method::NaiveProfile;
  bool converged = false;
  int evaluations = 0;  // criterion evaluations spent in the search
  double bandwidth = 0.0;
  double level = 0.95;
  std::string note;
};

struct FitOptions {
  double level = 0.95;
  double boxLo = -10.0;  // search box, per coordinate
  double boxHi = 10.0;
  double tol = 1e-6;
  int evalCap = 500;
};

EstimateResult fit_naive(const std::vector<SubjectRecord>& records, const KernelSpec& spec,
                         const FitOptions& opts = {});

// adds the exact marginal covariate log-likelihood under a known covariate law
EstimateResult fit_known_h(const std::vector<SubjectRecord>& records, const KernelSpec& spec,
                           const CovariateLaw& analysisLaw, const FitOptions& opts = {});

// stacks the profile score with the vanishing-mean moment of e^{-theta'z} z
// and minimizes the identity-weighted sum of squared per-subject averages
EstimateResult fit_mean_zero(const std::vector<SubjectRecord>& records, const KernelSpec& spec,
                             const FitOptions& opts = {});

Eigen::MatrixXd wald_ci(const Eigen::Ref<const Eigen::VectorXd>& thetaHat,
                        const Eigen::Ref<const Eigen::VectorXd>& se, double level);

struct TimeRatioRow {
  std::string label;
  double ratio = 1.0, lower = 1.0, upper = 1.0;
  bool reference = false;
};

// exponentiated coefficients with exponentiated CI bounds; reference labels
// render as rows pinned at exactly one
std::vector<TimeRatioRow> time_ratios(const EstimateResult& est,
                                      const std::vector<std::string>& labels = {},
                                      const std::vector<std::string>& referenceLabels = {});

}  // namespace lbaft
