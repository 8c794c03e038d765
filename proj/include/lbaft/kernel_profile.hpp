#pragma once
#include <vector>

#include "lbaft/laws.hpp"
#include "lbaft/sampling.hpp"

// Kernel-smoothed hazard of log-scale residuals and the profile
// log-likelihood built from it. Residuals are e_i = log t_i - theta'z_i; the
// hazard numerator is a Gaussian kernel sum over observed events and the
// at-risk denominator is either a smoothed count (default) or a hard count
// with a configurable slack, both floored at one.

namespace lbaft {

enum class AtRiskForm { Smoothed, HardCount };

struct KernelSpec {
  double bandwidth = 0.0;  // <= 0 resolves the IQR * n^{-1/5} rule on the data
  double floor = 1e-10;    // hazard floor inside log terms
  AtRiskForm atRisk = AtRiskForm::Smoothed;
  double slack = 1.0;      // hard-count window extension, in bandwidth units
  int gridNodes = 512;     // integrated-hazard grid
};

struct ResidualSet {
  Eigen::VectorXd residuals;  // log t_i - theta'z_i
  Eigen::VectorXi events;
};

ResidualSet residuals(const Eigen::Ref<const Eigen::VectorXd>& theta,
                      const std::vector<SubjectRecord>& records);

// IQR * n^{-1/5} with linear-interpolation quantiles; needs n >= 4 and a
// nondegenerate spread
double bandwidth(const ResidualSet& rs);

// full-sample smoothed hazard at t
double smoothed_hazard(const ResidualSet& rs, const KernelSpec& spec, double t);

// trapezoid integral of the smoothed hazard on the spec grid, interpolated
double cumulative_hazard(const ResidualSet& rs, const KernelSpec& spec, double t);

// profile log-likelihood: sum of event log leave-one-out hazards minus
// integrated hazards at the residuals
double profile_loglik(const Eigen::Ref<const Eigen::VectorXd>& theta,
                      const std::vector<SubjectRecord>& records, const KernelSpec& spec);

// density-form assembly (event log-density = log hazard - integrated hazard,
// sharing the same grid); coincides with profile_loglik on uncensored data
double profile_loglik_density(const Eigen::Ref<const Eigen::VectorXd>& theta,
                              const std::vector<SubjectRecord>& records, const KernelSpec& spec);

// d/dy log of the fitted residual density at y, minus the fitted hazard:
// the score function of the residual law implied by the kernel fit
double estimated_phi(const ResidualSet& rs, const KernelSpec& spec, double y);

// tabulated positive-scale law with density implied by the kernel hazard fit
ErrorLaw kernel_error_law(const ResidualSet& rs, const KernelSpec& spec);

}  // namespace lbaft
