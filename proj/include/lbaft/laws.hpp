#pragma once
#include <Eigen/Dense>

#include "lbaft/rng.hpp"

// Distribution layer: positive error laws (the latent lifetime scale), the two
// sampling-induced derived laws (length-biased and stationary recurrence), and
// covariate laws with exponential tilting.

namespace lbaft {

// ---------------------------------------------------------------------------
// error laws on (0, inf)
// ---------------------------------------------------------------------------

enum class ErrorFamily { LogNormal, Exponential, Tabulated };

struct ErrorLaw {
  ErrorFamily family = ErrorFamily::LogNormal;
  double logMean = 0.0;  // LogNormal
  double logSd = 1.0;    // LogNormal
  double rate = 1.0;     // Exponential
  // Tabulated: continuous piecewise-linear density on [grid(0), grid(m-1)],
  // normalized at construction; cdf holds the node CDF values.
  Eigen::VectorXd grid, dens, cdf;
};

ErrorLaw log_normal_law(double logMean, double logSd);
ErrorLaw exponential_law(double rate);
ErrorLaw tabulated_law(const Eigen::VectorXd& grid, const Eigen::VectorXd& density);

double density(const ErrorLaw& law, double u);
double survival(const ErrorLaw& law, double u);
double hazard(const ErrorLaw& law, double u);  // density/survival, throws when survival < 1e-12
double phi(const ErrorLaw& law, double u);     // 1 - u * hazard(u)
double mean(const ErrorLaw& law);
double quantile(const ErrorLaw& law, double p);
// upper truncation point used when improper integrals are reduced to [.,hi]
double upper_point(const ErrorLaw& law);

double sample(const ErrorLaw& law, RngStream& rng);
Eigen::VectorXd sample(const ErrorLaw& law, int n, RngStream& rng);

// ---------------------------------------------------------------------------
// derived laws induced by the observation scheme
// ---------------------------------------------------------------------------

enum class DerivedKind { LengthBiased, Recurrence };

struct DerivedLaw {
  DerivedKind kind = DerivedKind::LengthBiased;
  ErrorLaw base;
};

double density(const DerivedLaw& law, double u);
double survival(const DerivedLaw& law, double u);
double hazard(const DerivedLaw& law, double u);
double mean(const DerivedLaw& law);  // quadrature against the biased density

double sample(const DerivedLaw& law, RngStream& rng);
Eigen::VectorXd sample(const DerivedLaw& law, int n, RngStream& rng);

namespace detail {
// generic tabulated-inverse-CDF sampler path, exposed so tests can pit it
// against the closed-form special cases
Eigen::VectorXd sample_derived_general(const DerivedLaw& law, int n, RngStream& rng);
}  // namespace detail

// ---------------------------------------------------------------------------
// covariate laws and exponential tilting
// ---------------------------------------------------------------------------

enum class CovariateFamily { UniformBox, Empirical };

struct CovariateLaw {
  CovariateFamily family = CovariateFamily::UniformBox;
  Eigen::VectorXd lower, upper;  // UniformBox
  Eigen::MatrixXd points;        // Empirical atoms, one per row
  int dim() const {
    return family == CovariateFamily::UniformBox ? static_cast<int>(lower.size())
                                                 : static_cast<int>(points.cols());
  }
};

CovariateLaw uniform_box_law(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);
CovariateLaw empirical_law(const Eigen::MatrixXd& points);

// log of integral e^{theta'z} h(dz); throws on a nonfinite value
double log_normalizer(const CovariateLaw& law, const Eigen::Ref<const Eigen::VectorXd>& theta);
// density (box) or point mass (empirical) of the tilted law at z
double tilted_density(const CovariateLaw& law, const Eigen::Ref<const Eigen::VectorXd>& theta,
                      const Eigen::Ref<const Eigen::VectorXd>& z);
Eigen::VectorXd tilted_mean(const CovariateLaw& law, const Eigen::Ref<const Eigen::VectorXd>& theta);
Eigen::MatrixXd tilted_sample(const CovariateLaw& law, const Eigen::Ref<const Eigen::VectorXd>& theta,
                              int n, RngStream& rng);
Eigen::MatrixXd sample(const CovariateLaw& law, int n, RngStream& rng);  // untilted

}  // namespace lbaft
