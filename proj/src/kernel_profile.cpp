#include "lbaft/kernel_profile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace lbaft {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double resolve_bandwidth(const ResidualSet& rs, const KernelSpec& spec) {
  return spec.bandwidth > 0.0 ? spec.bandwidth : bandwidth(rs);
}

double quantile_linear(const std::vector<double>& sorted, double p) {
  const double idx = p * (sorted.size() - 1);
  const size_t lo = static_cast<size_t>(idx);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = idx - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// kernel numerator and floored at-risk denominator of the full-sample hazard
void hazard_parts(const ResidualSet& rs, const KernelSpec& spec, double h, double t, double* num,
                  double* den) {
  const auto& e = rs.residuals;
  double nAcc = 0.0, dAcc = 0.0;
  for (Eigen::Index j = 0; j < e.size(); ++j) {
    double x = (t - e(j)) / h;
    if (rs.events(j)) nAcc += std::exp(-0.5 * x * x);
    if (spec.atRisk == AtRiskForm::Smoothed)
      dAcc += normal_cdf(-x);
    else
      dAcc += (e(j) >= t - spec.slack * h) ? 1.0 : 0.0;
  }
  *num = nAcc * kInvSqrt2Pi / h;
  *den = std::max(dAcc, 1.0);
}

struct ProfileCurve {
  double h;
  Eigen::VectorXd grid, lambda, cumLambda;
};

ProfileCurve build_curve(const ResidualSet& rs, const KernelSpec& spec, double h) {
  ProfileCurve c;
  c.h = h;
  const int m = std::max(spec.gridNodes, 8);
  double lo = rs.residuals.minCoeff() - 5.0 * h;
  double hi = rs.residuals.maxCoeff();
  c.grid.setLinSpaced(m, lo, hi);
  c.lambda.resize(m);
  for (int k = 0; k < m; ++k) {
    double num, den;
    hazard_parts(rs, spec, h, c.grid(k), &num, &den);
    c.lambda(k) = num / den;
  }
  c.cumLambda.resize(m);
  c.cumLambda(0) = 0.0;
  for (int k = 1; k < m; ++k)
    c.cumLambda(k) =
        c.cumLambda(k - 1) + 0.5 * (c.lambda(k - 1) + c.lambda(k)) * (c.grid(k) - c.grid(k - 1));
  return c;
}

double interp_cum(const ProfileCurve& c, double t) {
  const auto m = c.grid.size();
  if (t <= c.grid(0)) return 0.0;
  if (t >= c.grid(m - 1)) return c.cumLambda(m - 1);
  double step = (c.grid(m - 1) - c.grid(0)) / (m - 1);
  Eigen::Index k = std::min<Eigen::Index>(static_cast<Eigen::Index>((t - c.grid(0)) / step), m - 2);
  double w = (t - c.grid(k)) / (c.grid(k + 1) - c.grid(k));
  return c.cumLambda(k) + w * (c.cumLambda(k + 1) - c.cumLambda(k));
}

// event term: log leave-one-out hazard at the subject's own residual
double loo_log_hazard(const ResidualSet& rs, const KernelSpec& spec, double h, Eigen::Index i) {
  const auto& e = rs.residuals;
  double num = 0.0, den = 0.0;
  for (Eigen::Index j = 0; j < e.size(); ++j) {
    if (j == i) continue;
    double x = (e(i) - e(j)) / h;
    if (rs.events(j)) num += std::exp(-0.5 * x * x);
    if (spec.atRisk == AtRiskForm::Smoothed)
      den += normal_cdf(-x);
    else
      den += (e(j) >= e(i) - spec.slack * h) ? 1.0 : 0.0;
  }
  num *= kInvSqrt2Pi / h;
  den = std::max(den, 1.0);
  return std::log(std::max(num / den, spec.floor));
}

struct Assembly {
  ResidualSet rs;
  double h;
  ProfileCurve curve;
};

Assembly prepare(const Eigen::Ref<const Eigen::VectorXd>& theta,
                 const std::vector<SubjectRecord>& records, const KernelSpec& spec) {
  Assembly a;
  a.rs = residuals(theta, records);
  if (a.rs.events.sum() < 5)
    throw std::runtime_error("profile_loglik: fewer than 5 observed events");
  a.h = resolve_bandwidth(a.rs, spec);
  a.curve = build_curve(a.rs, spec, a.h);
  return a;
}

}  // namespace

ResidualSet residuals(const Eigen::Ref<const Eigen::VectorXd>& theta,
                      const std::vector<SubjectRecord>& records) {
  if (records.empty()) throw std::invalid_argument("residuals: empty cohort");
  ResidualSet rs;
  rs.residuals.resize(records.size());
  rs.events.resize(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!(r.time > 0.0)) throw std::invalid_argument("residuals: nonpositive observation time");
    if (r.covariates.size() != theta.size())
      throw std::invalid_argument("residuals: theta does not match covariate dimension");
    rs.residuals(i) = std::log(r.time) - theta.dot(r.covariates);
    rs.events(i) = r.event ? 1 : 0;
  }
  return rs;
}

double bandwidth(const ResidualSet& rs) {
  const auto n = rs.residuals.size();
  if (n < 4) throw std::runtime_error("bandwidth: need at least 4 residuals");
  std::vector<double> sorted(rs.residuals.data(), rs.residuals.data() + n);
  std::sort(sorted.begin(), sorted.end());
  double iqr = quantile_linear(sorted, 0.75) - quantile_linear(sorted, 0.25);
  if (!(iqr > 0.0)) throw std::runtime_error("bandwidth: degenerate residual spread");
  return iqr * std::pow(static_cast<double>(n), -0.2);
}

double smoothed_hazard(const ResidualSet& rs, const KernelSpec& spec, double t) {
  double h = resolve_bandwidth(rs, spec);
  double num, den;
  hazard_parts(rs, spec, h, t, &num, &den);
  return num / den;
}

double cumulative_hazard(const ResidualSet& rs, const KernelSpec& spec, double t) {
  double h = resolve_bandwidth(rs, spec);
  ProfileCurve curve = build_curve(rs, spec, h);
  return interp_cum(curve, t);
}

double profile_loglik(const Eigen::Ref<const Eigen::VectorXd>& theta,
                      const std::vector<SubjectRecord>& records, const KernelSpec& spec) {
  Assembly a = prepare(theta, records, spec);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < a.rs.residuals.size(); ++i) {
    if (a.rs.events(i)) ll += loo_log_hazard(a.rs, spec, a.h, i);
    ll -= interp_cum(a.curve, a.rs.residuals(i));
  }
  return ll;
}

double profile_loglik_density(const Eigen::Ref<const Eigen::VectorXd>& theta,
                              const std::vector<SubjectRecord>& records, const KernelSpec& spec) {
  // events contribute the log of the fitted density lambda * exp(-Lambda)
  // (same grid integral as the hazard form), censored rows the log survivor
  Assembly a = prepare(theta, records, spec);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < a.rs.residuals.size(); ++i) {
    double cum = interp_cum(a.curve, a.rs.residuals(i));
    if (a.rs.events(i)) {
      double lam = std::exp(loo_log_hazard(a.rs, spec, a.h, i));
      ll += std::log(lam * std::exp(-cum));
    } else {
      ll -= cum;
    }
  }
  return ll;
}

double estimated_phi(const ResidualSet& rs, const KernelSpec& spec, double y) {
  double h = resolve_bandwidth(rs, spec);
  const auto& e = rs.residuals;
  double num = 0.0, dnum = 0.0, den = 0.0, dden = 0.0;
  for (Eigen::Index j = 0; j < e.size(); ++j) {
    double x = (y - e(j)) / h;
    double k = std::exp(-0.5 * x * x) * kInvSqrt2Pi / h;
    if (rs.events(j)) {
      num += k;
      dnum += -x * k / h;
    }
    if (spec.atRisk == AtRiskForm::Smoothed) {
      den += normal_cdf(-x);
      dden += -k;
    } else {
      den += (e(j) >= y - spec.slack * h) ? 1.0 : 0.0;
    }
  }
  if (den <= 1.0) dden = 0.0;  // the floor freezes the denominator
  den = std::max(den, 1.0);
  double lambda = num / den;
  if (!(lambda > spec.floor)) return 0.0;
  double dlambda = (dnum * den - num * dden) / (den * den);
  return dlambda / lambda - lambda;
}

ErrorLaw kernel_error_law(const ResidualSet& rs, const KernelSpec& spec) {
  double h = resolve_bandwidth(rs, spec);
  ProfileCurve curve = build_curve(rs, spec, h);
  const auto m = curve.grid.size();
  Eigen::VectorXd u(m), f(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    u(k) = std::exp(curve.grid(k));
    f(k) = curve.lambda(k) * std::exp(-curve.cumLambda(k)) / u(k);
  }
  return tabulated_law(u, f);
}

}  // namespace lbaft
