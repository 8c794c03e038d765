#pragma once
#include <functional>
#include <vector>

#include "lbaft/kernel_profile.hpp"
#include "lbaft/laws.hpp"
#include "lbaft/sampling.hpp"

// Score machinery for the accelerated-lifetime model under biased sampling.
// Everything lives on the error scale: a record with observed time t and
// covariates z maps to x = t * exp(-theta'z), which under the model follows
// the base law reweighted by the observation scheme. Per-subject stochastic
// integrals are assembled from exact tail-average identities, with closed
// forms where the weighted survival has them and one backward quadrature
// sweep otherwise.

namespace lbaft {

// weight the observation scheme puts on the base law: survival weighting for
// recurrence residuals, size weighting u * density(u) for fully observed
// length-biased durations
enum class WeightScheme { RecurrenceWeights, LengthBiasWeights };

struct ScorePieces {
  Eigen::MatrixXd perSubject;   // n x p contributions, input order
  Eigen::VectorXd total;        // column sums of perSubject
  Eigen::MatrixXd information;  // p x p, symmetric nonnegative-definite
  bool truncated = false;       // some evaluation hit the far-tail guard
};

// a(t) minus the weighted tail average E[a(X) | X >= t] under the scheme's
// law; annihilates constants. The direction is frozen beyond the extreme
// upper quantile so it stays evaluable inside tail integrals. Throws when
// the tail mass at t is below 1e-14.
double r_apply(const std::function<double(double)>& a, WeightScheme scheme, const ErrorLaw& law,
               double t);

// integrated hazard of the weighted law, -log of its survival; zero at t <= 0
double compensator(const ErrorLaw& law, WeightScheme scheme, double t);

// one record's counting process minus its compensator, evaluated at point s
// on the error scale
double martingale_path(const SubjectRecord& record, const Eigen::Ref<const Eigen::VectorXd>& theta,
                       const ErrorLaw& law, WeightScheme scheme, double s);

// regression score with the error law treated as known: per subject, the
// covariate vector times the compensated jump of the tail-centered residual
// direction, plus the mean-centered covariate itself; information is the
// empirical second moment of the contributions
ScorePieces ordinary_score(const std::vector<SubjectRecord>& records,
                           const Eigen::Ref<const Eigen::VectorXd>& theta, const ErrorLaw& law,
                           WeightScheme scheme = WeightScheme::RecurrenceWeights);

// score with both the error law and the covariate law profiled out: the
// covariate is centered at the empirical at-risk average (right-continuous
// steps; with no censoring the average collapses to the grand mean), and the
// information sums squared own-event increments
ScorePieces efficient_score(const std::vector<SubjectRecord>& records,
                            const Eigen::Ref<const Eigen::VectorXd>& theta, const ErrorLaw& law,
                            WeightScheme scheme);

// fully observed specialization: per subject (z - zbar) * phi(x); information
// factorizes into the covariate covariance times the mean square of phi
ScorePieces efficient_score_uncensored(const std::vector<SubjectRecord>& records,
                                       const Eigen::Ref<const Eigen::VectorXd>& theta,
                                       const ErrorLaw& law);

// plug-in variant: the base law is replaced by the kernel-smoothed law fitted
// to the residuals at theta; evaluation is frozen beyond the law's
// 1 - 1/(2n) quantile, where a sample of size n stops resolving the hazard
ScorePieces efficient_score_estimated(const std::vector<SubjectRecord>& records,
                                      const Eigen::Ref<const Eigen::VectorXd>& theta,
                                      const KernelSpec& spec, WeightScheme scheme);

struct DirectionCheck {
  Eigen::VectorXd inner;    // empirical mean of score * direction-score products
  Eigen::VectorXd mcError;  // standard error of that mean
};

// inner products of the efficient score against nuisance directions: bounded
// error-scale functions b (mean zero under the scheme weight) enter through
// their compensated tail-centered jumps, covariate functions k enter directly.
// Results are ordered error directions first, then covariate directions.
std::vector<DirectionCheck> orthogonality_check(
    const std::vector<SubjectRecord>& records, const Eigen::Ref<const Eigen::VectorXd>& theta,
    const ErrorLaw& law, WeightScheme scheme,
    const std::vector<std::function<double(double)>>& errorDirections,
    const std::vector<std::function<double(const Eigen::VectorXd&)>>& covariateDirections);

}  // namespace lbaft
