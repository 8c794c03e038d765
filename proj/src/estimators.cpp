#include "lbaft/estimators.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace lbaft {

namespace {

struct SearchOutcome {
  Eigen::VectorXd x;
  double fx = 0.0;
  int evals = 0;
  bool converged = false;
  std::string note;
};

constexpr double kGolden = 0.6180339887498949;

SearchOutcome maximize_scalar(const std::function<double(double)>& f, double lo, double hi,
                              double tol, int cap) {
  SearchOutcome out;
  const int gridPts = 33;
  double bestX = lo, bestF = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < gridPts && out.evals < cap; ++k) {
    double x = lo + (hi - lo) * k / (gridPts - 1.0);
    double v = f(x);
    ++out.evals;
    if (v > bestF) {
      bestF = v;
      bestX = x;
    }
  }
  double step = (hi - lo) / (gridPts - 1.0);
  double a = std::max(lo, bestX - step), b = std::min(hi, bestX + step);
  double x1 = b - kGolden * (b - a), x2 = a + kGolden * (b - a);
  double f1 = f(x1), f2 = f(x2);
  out.evals += 2;
  while (b - a > tol && out.evals < cap) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      f1 = f(x1);
    }
    ++out.evals;
  }
  out.x = Eigen::VectorXd::Constant(1, 0.5 * (a + b));
  out.fx = std::max(f1, f2);
  out.converged = (b - a) <= tol && out.evals < cap;
  if (std::min(out.x(0) - lo, hi - out.x(0)) < 1e-4 * (hi - lo)) {
    out.converged = false;
    out.note = "argmax at search boundary";
  } else if (out.evals >= cap) {
    out.note = "evaluation cap reached";
  }
  return out;
}

SearchOutcome maximize_simplex(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& x0, double lo, double hi, double tol,
                               int cap) {
  SearchOutcome out;
  const int p = static_cast<int>(x0.size());
  auto boxed = [&](const Eigen::VectorXd& x) -> double {
    for (int j = 0; j < p; ++j)
      if (x(j) < lo || x(j) > hi) return -std::numeric_limits<double>::infinity();
    return f(x);
  };
  std::vector<Eigen::VectorXd> v(p + 1, x0);
  std::vector<double> fv(p + 1);
  double init = 0.05 * (hi - lo);
  for (int j = 1; j <= p; ++j) v[j](j - 1) += init;
  for (int j = 0; j <= p; ++j) {
    fv[j] = boxed(v[j]);
    ++out.evals;
  }
  auto order = [&]() {
    for (int a = 0; a <= p; ++a)
      for (int b = a + 1; b <= p; ++b)
        if (fv[b] > fv[a]) {
          std::swap(fv[a], fv[b]);
          std::swap(v[a], v[b]);
        }
  };
  order();
  while (out.evals < cap) {
    double spread = fv[0] - fv[p];
    double diam = 0.0;
    for (int j = 1; j <= p; ++j) diam = std::max(diam, (v[j] - v[0]).cwiseAbs().maxCoeff());
    if (spread < tol && diam < 10.0 * tol) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < p; ++j) centroid += v[j];
    centroid /= p;
    Eigen::VectorXd xr = centroid + (centroid - v[p]);
    double fr = boxed(xr);
    ++out.evals;
    if (fr > fv[0]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - v[p]);
      double fe = boxed(xe);
      ++out.evals;
      if (fe > fr) {
        v[p] = xe;
        fv[p] = fe;
      } else {
        v[p] = xr;
        fv[p] = fr;
      }
    } else if (fr > fv[p - 1]) {
      v[p] = xr;
      fv[p] = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (v[p] - centroid);
      double fc = boxed(xc);
      ++out.evals;
      if (fc > fv[p]) {
        v[p] = xc;
        fv[p] = fc;
      } else {
        for (int j = 1; j <= p; ++j) {
          v[j] = v[0] + 0.5 * (v[j] - v[0]);
          fv[j] = boxed(v[j]);
          ++out.evals;
        }
      }
    }
    order();
  }
  out.x = v[0];
  out.fx = fv[0];
  if (out.evals >= cap && !out.converged) out.note = "evaluation cap reached";
  for (int j = 0; j < p; ++j)
    if (std::min(out.x(j) - lo, hi - out.x(j)) < 1e-4 * (hi - lo)) {
      out.converged = false;
      out.note = "argmax at search boundary";
    }
  return out;
}

SearchOutcome maximize(const std::function<double(const Eigen::VectorXd&)>& f, int p, double lo,
                       double hi, double tol, int cap) {
  if (p == 1) {
    auto f1 = [&](double x) { return f(Eigen::VectorXd::Constant(1, x)); };
    return maximize_scalar(f1, lo, hi, tol, cap);
  }
  return maximize_simplex(f, Eigen::VectorXd::Zero(p), lo, hi, tol, cap);
}

// central-difference Hessian of the objective at x
Eigen::MatrixXd hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                        const Eigen::VectorXd& x, double step) {
  const int p = static_cast<int>(x.size());
  Eigen::MatrixXd H(p, p);
  double f0 = f(x);
  for (int j = 0; j < p; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += step;
    xm(j) -= step;
    H(j, j) = (f(xp) - 2.0 * f0 + f(xm)) / (step * step);
    for (int k = j + 1; k < p; ++k) {
      Eigen::VectorXd a = x, b = x, c = x, d = x;
      a(j) += step;
      a(k) += step;
      b(j) += step;
      b(k) -= step;
      c(j) -= step;
      c(k) += step;
      d(j) -= step;
      d(k) -= step;
      H(j, k) = H(k, j) = (f(a) - f(b) - f(c) + f(d)) / (4.0 * step * step);
    }
  }
  return H;
}

// standard errors from the negative inverse curvature; empty when the
// curvature is not negative definite
Eigen::VectorXd curvature_se(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x, double step, std::string* note) {
  Eigen::MatrixXd H = hessian(f, x, step);
  Eigen::LLT<Eigen::MatrixXd> llt(-H);
  if (llt.info() != Eigen::Success) {
    if (note->empty()) *note = "curvature not negative definite";
    return Eigen::VectorXd();
  }
  Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(x.size(), x.size()));
  Eigen::VectorXd se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  if (!se.allFinite()) {
    if (note->empty()) *note = "curvature not negative definite";
    return Eigen::VectorXd();
  }
  return se;
}

double curvature_step(double h, size_t n) {
  return std::max(h / std::sqrt(static_cast<double>(n)), 1e-3);
}

int covariate_dim(const std::vector<SubjectRecord>& records) {
  if (records.empty()) throw std::invalid_argument("fit: empty cohort");
  return static_cast<int>(records[0].covariates.size());
}

KernelSpec pin_bandwidth(const std::vector<SubjectRecord>& records, const KernelSpec& spec,
                         int p) {
  KernelSpec pinned = spec;
  if (pinned.bandwidth <= 0.0)
    pinned.bandwidth = bandwidth(residuals(Eigen::VectorXd::Zero(p), records));
  return pinned;
}

// plug-in standard errors for fully observed cohorts: covariance of the
// covariates times the mean squared estimated score of the residual law.
// Unlike the profile criterion, which needs one bandwidth across all theta,
// this is a single evaluation, so an unpinned spec resolves the bandwidth
// rule on the residuals actually being scored.
Eigen::VectorXd plugin_se(const std::vector<SubjectRecord>& records, const KernelSpec& spec,
                          const Eigen::VectorXd& thetaHat) {
  for (const auto& r : records)
    if (!r.event) return Eigen::VectorXd();
  ResidualSet rs = residuals(thetaHat, records);
  const auto n = rs.residuals.size();
  double phi2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = estimated_phi(rs, spec, rs.residuals(i));
    phi2 += v * v;
  }
  phi2 /= static_cast<double>(n);
  Eigen::MatrixXd Z(n, records[0].covariates.size());
  for (Eigen::Index i = 0; i < n; ++i) Z.row(i) = records[i].covariates.transpose();
  Eigen::RowVectorXd zbar = Z.colwise().mean();
  Eigen::MatrixXd centered = Z.rowwise() - zbar;
  Eigen::MatrixXd info = (centered.transpose() * centered / static_cast<double>(n)) * phi2;
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) return Eigen::VectorXd();
  Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  return (cov.diagonal() / static_cast<double>(n)).cwiseMax(0.0).cwiseSqrt();
}

EstimateResult finish(const std::function<double(const Eigen::VectorXd&)>& objective,
                      const std::vector<SubjectRecord>& records, const KernelSpec& pinned,
                      const FitOptions& opts, Method method, const SearchOutcome& sr,
                      const KernelSpec* pluginSpec) {
  EstimateResult est;
  est.method = method;
  est.thetaHat = sr.x;
  est.converged = sr.converged;
  est.evaluations = sr.evals;
  est.bandwidth = pinned.bandwidth;
  est.level = opts.level;
  est.note = sr.note;
  double step = curvature_step(pinned.bandwidth, records.size());
  est.seCurvature = curvature_se(objective, sr.x, step, &est.note);
  if (pluginSpec) est.sePlugin = plugin_se(records, *pluginSpec, est.thetaHat);
  // the information plug-in, when available, is the primary standard error
  est.se = est.sePlugin.size() > 0 ? est.sePlugin : est.seCurvature;
  if (est.se.size() > 0) est.ci = wald_ci(est.thetaHat, est.se, opts.level);
  return est;
}

}  // namespace

EstimateResult fit_naive(const std::vector<SubjectRecord>& records, const KernelSpec& spec,
                         const FitOptions& opts) {
  const int p = covariate_dim(records);
  KernelSpec pinned = pin_bandwidth(records, spec, p);
  auto objective = [&](const Eigen::VectorXd& th) { return profile_loglik(th, records, pinned); };
  SearchOutcome sr = maximize(objective, p, opts.boxLo, opts.boxHi, opts.tol, opts.evalCap);
  return finish(objective, records, pinned, opts, Method::NaiveProfile, sr, &spec);
}

EstimateResult fit_known_h(const std::vector<SubjectRecord>& records, const KernelSpec& spec,
                           const CovariateLaw& analysisLaw, const FitOptions& opts) {
  const int p = covariate_dim(records);
  if (analysisLaw.dim() != p)
    throw std::invalid_argument("fit_known_h: analysis law dimension mismatch");
  KernelSpec pinned = pin_bandwidth(records, spec, p);
  const double n = static_cast<double>(records.size());
  auto objective = [&](const Eigen::VectorXd& th) {
    double marginal = -n * log_normalizer(analysisLaw, th);
    for (const auto& r : records) marginal += th.dot(r.covariates);
    return profile_loglik(th, records, pinned) + marginal;
  };
  SearchOutcome sr = maximize(objective, p, opts.boxLo, opts.boxHi, opts.tol, opts.evalCap);
  return finish(objective, records, pinned, opts, Method::KnownH, sr, nullptr);
}

EstimateResult fit_mean_zero(const std::vector<SubjectRecord>& records, const KernelSpec& spec,
                             const FitOptions& opts) {
  const int p = covariate_dim(records);
  // a covariate column of constant sign makes the tilt moment unsolvable
  for (int j = 0; j < p; ++j) {
    bool pos = false, neg = false;
    for (const auto& r : records) {
      pos = pos || r.covariates(j) > 0.0;
      neg = neg || r.covariates(j) < 0.0;
    }
    if (pos != neg && (pos || neg))
      throw std::runtime_error("fit_mean_zero: covariate column has constant sign");
  }
  KernelSpec pinned = pin_bandwidth(records, spec, p);
  const double n = static_cast<double>(records.size());
  double step = curvature_step(pinned.bandwidth, records.size());
  auto profileMean = [&](const Eigen::VectorXd& th) {
    return profile_loglik(th, records, pinned) / n;
  };
  auto negQ = [&](const Eigen::VectorXd& th) {
    double q = 0.0;
    for (int j = 0; j < p; ++j) {
      Eigen::VectorXd tp = th, tm = th;
      tp(j) += step;
      tm(j) -= step;
      double m1 = (profileMean(tp) - profileMean(tm)) / (2.0 * step);
      q += m1 * m1;
    }
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(p);
    for (const auto& r : records)
      m2 += std::exp(-th.dot(r.covariates)) * r.covariates;
    m2 /= n;
    q += m2.squaredNorm();
    return -q;
  };
  SearchOutcome sr = maximize(negQ, p, opts.boxLo, opts.boxHi, opts.tol, opts.evalCap);
  // report the curvature of the profile component at the solution
  auto profileObjective = [&](const Eigen::VectorXd& th) {
    return profile_loglik(th, records, pinned);
  };
  return finish(profileObjective, records, pinned, opts, Method::MeanZero, sr, nullptr);
}

Eigen::MatrixXd wald_ci(const Eigen::Ref<const Eigen::VectorXd>& thetaHat,
                        const Eigen::Ref<const Eigen::VectorXd>& se, double level) {
  if (thetaHat.size() != se.size())
    throw std::invalid_argument("wald_ci: estimate/standard-error size mismatch");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("wald_ci: level must be in (0,1)");
  for (Eigen::Index j = 0; j < se.size(); ++j)
    if (!(se(j) > 0.0)) throw std::runtime_error("wald_ci: degenerate standard error");
  double z = normal_quantile(0.5 + 0.5 * level);
  Eigen::MatrixXd ci(thetaHat.size(), 2);
  ci.col(0) = thetaHat - z * se;
  ci.col(1) = thetaHat + z * se;
  return ci;
}

std::vector<TimeRatioRow> time_ratios(const EstimateResult& est,
                                      const std::vector<std::string>& labels,
                                      const std::vector<std::string>& referenceLabels) {
  std::vector<TimeRatioRow> rows;
  for (Eigen::Index j = 0; j < est.thetaHat.size(); ++j) {
    TimeRatioRow row;
    row.label = j < static_cast<Eigen::Index>(labels.size()) ? labels[j]
                                                             : "z" + std::to_string(j + 1);
    row.ratio = std::exp(est.thetaHat(j));
    if (est.ci.rows() == est.thetaHat.size()) {
      row.lower = std::exp(est.ci(j, 0));
      row.upper = std::exp(est.ci(j, 1));
    } else {
      row.lower = row.upper = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  for (const auto& ref : referenceLabels) {
    TimeRatioRow row;
    row.label = ref;
    row.ratio = row.lower = row.upper = 1.0;
    row.reference = true;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace lbaft
