#include "lbaft/efficient_score.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lbaft/quadrature.hpp"

namespace lbaft {

namespace {

constexpr double kTailFloor = 1e-14;  // weighted tail mass below this is singular
constexpr double kRiskFloor = 1e-12;  // weighted survival floor for per-subject tables

DerivedLaw weighted(const ErrorLaw& base, WeightScheme scheme) {
  DerivedLaw w;
  w.kind = scheme == WeightScheme::RecurrenceWeights ? DerivedKind::Recurrence
                                                     : DerivedKind::LengthBiased;
  w.base = base;
  return w;
}

// freeze point for direction arguments, kept above the base hazard floor
double direction_cap(const ErrorLaw& base) { return quantile(base, 1.0 - 2e-12); }

// upper truncation for tail integrals against the weighted density
double tail_cutoff(const DerivedLaw& law, double beyond) {
  if (law.base.family == ErrorFamily::Tabulated) {
    double hi = law.base.grid(law.base.grid.size() - 1);
    return std::max(hi, beyond);
  }
  double hi = std::max(upper_point(law.base), 1.5 * beyond);
  for (int it = 0; it < 400 && density(law, hi) * hi * hi > 1e-15; ++it) hi *= 1.2;
  return hi;
}

// largest point where the weighted survival stays above the risk floor
double survival_cap(const DerivedLaw& law) {
  double hi = tail_cutoff(law, 1.0);
  if (survival(law, hi) >= kRiskFloor) return hi;
  double lo = quantile(law.base, 0.5);
  for (int it = 0; it < 2000 && survival(law, lo) < kRiskFloor && lo > 1e-300; ++it) lo *= 0.5;
  for (int it = 0; it < 120; ++it) {
    double m = 0.5 * (lo + hi);
    (survival(law, m) >= kRiskFloor ? lo : hi) = m;
  }
  return lo;
}

struct ScoreContext {
  int n = 0, p = 0, G = 0;
  Eigen::MatrixXd z;           // n x p, input order
  Eigen::VectorXd x;           // clamped error-scale residuals, input order
  std::vector<char> event;     // input order
  std::vector<int> groupOf;    // subject -> tie group of its residual
  std::vector<double> v;       // distinct clamped residuals, ascending
  Eigen::MatrixXd riskMean;    // G x p covariate mean over {x_j >= v_g}
  Eigen::RowVectorXd zbar;     // grand covariate mean
  std::vector<double> A;       // tail average of phi at v_g
  double A0 = 0.0;             // tail average of phi from the origin
  double cap = 0.0;            // freeze point applied to residuals and directions
  bool allEvents = true;
  bool truncated = false;
};

Eigen::VectorXd residual_scale(const std::vector<SubjectRecord>& records,
                               const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (records.empty()) throw std::invalid_argument("score: no records");
  Eigen::VectorXd x(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const SubjectRecord& r = records[i];
    if (r.covariates.size() != theta.size())
      throw std::invalid_argument("score: covariate/theta dimension mismatch");
    if (!(r.time > 0.0) || !std::isfinite(r.time))
      throw std::invalid_argument("score: observed times must be positive and finite");
    x(i) = r.time * std::exp(-theta.dot(r.covariates));
  }
  return x;
}

// tail averages of a direction at the distinct residuals, by one backward
// sweep: tail integral beyond the largest point, then per-segment increments
void tail_table(const ErrorLaw& base, WeightScheme scheme,
                const std::function<double(double)>& a, const std::vector<double>& v, double cap,
                std::vector<double>& tailAvg, double& origin) {
  DerivedLaw w = weighted(base, scheme);
  auto aw = [&](double u) { return u <= 0.0 ? 0.0 : a(std::min(u, cap)) * density(w, u); };
  const int G = static_cast<int>(v.size());
  std::vector<double> tail(G);
  double hi = tail_cutoff(w, v.back());
  tail[G - 1] = hi > v.back() ? integrate_rel(aw, v.back(), hi, 1e-10) : 0.0;
  for (int g = G - 2; g >= 0; --g) tail[g] = tail[g + 1] + integrate(aw, v[g], v[g + 1], 1e-13);
  origin = tail[0] + integrate(aw, 0.0, v[0], 1e-13);
  tailAvg.resize(G);
  for (int g = 0; g < G; ++g) tailAvg[g] = tail[g] / survival(w, v[g]);
}

ScoreContext build_context(const std::vector<SubjectRecord>& records,
                           const Eigen::Ref<const Eigen::VectorXd>& theta, const ErrorLaw& base,
                           WeightScheme scheme,
                           double capOverride = std::numeric_limits<double>::infinity()) {
  ScoreContext c;
  c.x = residual_scale(records, theta);
  c.n = static_cast<int>(records.size());
  c.p = static_cast<int>(theta.size());
  c.z.resize(c.n, c.p);
  c.event.resize(c.n);
  for (int i = 0; i < c.n; ++i) {
    c.z.row(i) = records[i].covariates;
    c.event[i] = records[i].event ? 1 : 0;
    if (!records[i].event) c.allEvents = false;
  }

  DerivedLaw w = weighted(base, scheme);
  c.cap = std::min({direction_cap(base), survival_cap(w), capOverride});
  for (int i = 0; i < c.n; ++i)
    if (c.x(i) > c.cap) {
      c.x(i) = c.cap;
      c.truncated = true;
    }

  std::vector<int> order(c.n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    if (c.x(i) != c.x(j)) return c.x(i) < c.x(j);
    return c.event[i] > c.event[j];  // events ahead of censorings at ties
  });

  c.groupOf.resize(c.n);
  for (int k = 0; k < c.n; ++k) {
    if (k == 0 || c.x(order[k]) != c.x(order[k - 1])) c.v.push_back(c.x(order[k]));
    c.groupOf[order[k]] = static_cast<int>(c.v.size()) - 1;
  }
  c.G = static_cast<int>(c.v.size());

  c.zbar = c.z.colwise().mean();
  c.riskMean.resize(c.G, c.p);
  if (c.allEvents) {
    // with nothing censored, the at-risk conditioning is vacuous
    c.riskMean.rowwise() = c.zbar;
  } else {
    Eigen::RowVectorXd run = Eigen::RowVectorXd::Zero(c.p);
    int count = 0, g = c.G - 1;
    for (int k = c.n - 1; k >= 0; --k) {
      run += c.z.row(order[k]);
      ++count;
      bool groupHead = k == 0 || c.x(order[k]) != c.x(order[k - 1]);
      if (groupHead) {
        c.riskMean.row(g) = run / count;
        --g;
      }
    }
  }

  if (scheme == WeightScheme::RecurrenceWeights && base.family != ErrorFamily::Tabulated) {
    // survival weighting: the tail average of phi is one minus the ratio of
    // the size-weighted to the survival-weighted tail mass, exactly
    DerivedLaw rec = weighted(base, WeightScheme::RecurrenceWeights);
    DerivedLaw size = weighted(base, WeightScheme::LengthBiasWeights);
    c.A.resize(c.G);
    for (int g = 0; g < c.G; ++g) c.A[g] = 1.0 - survival(size, c.v[g]) / survival(rec, c.v[g]);
    c.A0 = 0.0;
  } else {
    auto dir = [&](double u) { return phi(base, u); };
    tail_table(base, scheme, dir, c.v, c.cap, c.A, c.A0);
  }
  return c;
}

// per-group running integral of riskMean * d(tail average), and the factor
// (A0 - A_g) scattering to subjects, assembled without quadrature
ScorePieces assemble_efficient(const ScoreContext& c, const ErrorLaw& base) {
  ScorePieces out;
  out.perSubject.resize(c.n, c.p);
  out.information = Eigen::MatrixXd::Zero(c.p, c.p);
  out.truncated = c.truncated;

  Eigen::MatrixXd prefix(c.G, c.p);
  Eigen::RowVectorXd run = Eigen::RowVectorXd::Zero(c.p);
  double aPrev = c.A0;
  for (int g = 0; g < c.G; ++g) {
    run += c.riskMean.row(g) * (aPrev - c.A[g]);
    prefix.row(g) = run;
    aPrev = c.A[g];
  }

  for (int i = 0; i < c.n; ++i) {
    int g = c.groupOf[i];
    Eigen::RowVectorXd row = -(c.z.row(i) * (c.A0 - c.A[g]) - prefix.row(g));
    if (c.event[i]) {
      double rphi = phi(base, c.x(i)) - c.A[g];
      Eigen::RowVectorXd centered = c.z.row(i) - c.riskMean.row(g);
      row += centered * rphi;
      out.information += rphi * rphi * centered.transpose() * centered;
    }
    out.perSubject.row(i) = row;
  }
  out.information /= c.n;
  out.information = ((out.information + out.information.transpose()) / 2.0).eval();
  out.total = out.perSubject.colwise().sum().transpose();
  return out;
}

}  // namespace

double r_apply(const std::function<double(double)>& a, WeightScheme scheme, const ErrorLaw& law,
               double t) {
  if (!(t > 0.0) || !std::isfinite(t))
    throw std::invalid_argument("r_apply: evaluation point must be positive and finite");
  DerivedLaw w = weighted(law, scheme);
  double st = survival(w, t);
  if (st < kTailFloor) throw std::runtime_error("r_apply: weighted tail mass below 1e-14");
  double cap = direction_cap(law);
  auto aw = [&](double u) { return a(std::min(u, cap)) * density(w, u); };
  double hi = tail_cutoff(w, t);
  double num = hi > t ? integrate_rel(aw, t, hi, 1e-10) : 0.0;
  return a(std::min(t, cap)) - num / st;
}

double compensator(const ErrorLaw& law, WeightScheme scheme, double t) {
  if (!std::isfinite(t)) throw std::invalid_argument("compensator: nonfinite point");
  if (t <= 0.0) return 0.0;
  double s = survival(weighted(law, scheme), t);
  if (s < kTailFloor) throw std::runtime_error("compensator: weighted tail mass below 1e-14");
  return -std::log(s);
}

double martingale_path(const SubjectRecord& record, const Eigen::Ref<const Eigen::VectorXd>& theta,
                       const ErrorLaw& law, WeightScheme scheme, double s) {
  if (record.covariates.size() != theta.size())
    throw std::invalid_argument("martingale_path: covariate/theta dimension mismatch");
  if (!(record.time > 0.0) || !std::isfinite(record.time))
    throw std::invalid_argument("martingale_path: observed time must be positive and finite");
  if (!std::isfinite(s)) throw std::invalid_argument("martingale_path: nonfinite point");
  double x = record.time * std::exp(-theta.dot(record.covariates));
  double jump = (record.event && x <= s) ? 1.0 : 0.0;
  return jump - compensator(law, scheme, std::min(x, s));
}

ScorePieces ordinary_score(const std::vector<SubjectRecord>& records,
                           const Eigen::Ref<const Eigen::VectorXd>& theta, const ErrorLaw& law,
                           WeightScheme scheme) {
  ScoreContext c = build_context(records, theta, law, scheme);
  ScorePieces out;
  out.perSubject.resize(c.n, c.p);
  out.information = Eigen::MatrixXd::Zero(c.p, c.p);
  out.truncated = c.truncated;
  for (int i = 0; i < c.n; ++i) {
    int g = c.groupOf[i];
    double jump = c.event[i] ? phi(law, c.x(i)) - c.A[g] : 0.0;
    Eigen::RowVectorXd row =
        c.z.row(i) * (jump - (c.A0 - c.A[g])) + (c.z.row(i) - c.zbar);
    out.perSubject.row(i) = row;
    out.information += row.transpose() * row;
  }
  out.information /= c.n;
  out.information = ((out.information + out.information.transpose()) / 2.0).eval();
  out.total = out.perSubject.colwise().sum().transpose();
  return out;
}

ScorePieces efficient_score(const std::vector<SubjectRecord>& records,
                            const Eigen::Ref<const Eigen::VectorXd>& theta, const ErrorLaw& law,
                            WeightScheme scheme) {
  ScoreContext c = build_context(records, theta, law, scheme);
  return assemble_efficient(c, law);
}

ScorePieces efficient_score_uncensored(const std::vector<SubjectRecord>& records,
                                       const Eigen::Ref<const Eigen::VectorXd>& theta,
                                       const ErrorLaw& law) {
  for (const auto& r : records)
    if (!r.event)
      throw std::invalid_argument("efficient_score_uncensored: requires fully observed records");
  Eigen::VectorXd x = residual_scale(records, theta);
  const int n = static_cast<int>(records.size()), p = static_cast<int>(theta.size());

  ScorePieces out;
  double cap = direction_cap(law);
  Eigen::MatrixXd z(n, p);
  for (int i = 0; i < n; ++i) z.row(i) = records[i].covariates;
  Eigen::RowVectorXd zbar = z.colwise().mean();

  out.perSubject.resize(n, p);
  double meanPhiSq = 0.0;
  for (int i = 0; i < n; ++i) {
    double xi = x(i);
    if (xi > cap) {
      xi = cap;
      out.truncated = true;
    }
    double ph = phi(law, xi);
    out.perSubject.row(i) = (z.row(i) - zbar) * ph;
    meanPhiSq += ph * ph;
  }
  meanPhiSq /= n;
  Eigen::MatrixXd centered = z.rowwise() - zbar;
  out.information = (centered.transpose() * centered / n) * meanPhiSq;
  out.information = ((out.information + out.information.transpose()) / 2.0).eval();
  out.total = out.perSubject.colwise().sum().transpose();
  return out;
}

ScorePieces efficient_score_estimated(const std::vector<SubjectRecord>& records,
                                      const Eigen::Ref<const Eigen::VectorXd>& theta,
                                      const KernelSpec& spec, WeightScheme scheme) {
  ErrorLaw fitted = kernel_error_law(residuals(theta, records), spec);
  // the estimated hazard explodes where the estimated survival runs out of
  // sample support, so evaluation is frozen at the quantile the sample can
  // actually resolve
  double trim = quantile(fitted, 1.0 - 0.5 / static_cast<double>(records.size()));
  ScoreContext c = build_context(records, theta, fitted, scheme, trim);
  return assemble_efficient(c, fitted);
}

std::vector<DirectionCheck> orthogonality_check(
    const std::vector<SubjectRecord>& records, const Eigen::Ref<const Eigen::VectorXd>& theta,
    const ErrorLaw& law, WeightScheme scheme,
    const std::vector<std::function<double(double)>>& errorDirections,
    const std::vector<std::function<double(const Eigen::VectorXd&)>>& covariateDirections) {
  ScoreContext c = build_context(records, theta, law, scheme);
  ScorePieces eff = assemble_efficient(c, law);

  auto summarize = [&](const Eigen::VectorXd& weights) {
    DirectionCheck d;
    Eigen::MatrixXd prod = (eff.perSubject.array().colwise() * weights.array()).matrix();
    Eigen::RowVectorXd mean = prod.colwise().mean();
    d.inner = mean.transpose();
    Eigen::MatrixXd dev = prod.rowwise() - mean;
    Eigen::RowVectorXd var =
        dev.array().square().matrix().colwise().sum() / std::max(c.n - 1, 1);
    d.mcError = (var.transpose() / c.n).cwiseSqrt();
    return d;
  };

  std::vector<DirectionCheck> checks;
  for (const auto& b : errorDirections) {
    std::vector<double> B;
    double B0 = 0.0;
    tail_table(law, scheme, b, c.v, c.cap, B, B0);
    Eigen::VectorXd eta(c.n);
    for (int i = 0; i < c.n; ++i) {
      int g = c.groupOf[i];
      double jump = c.event[i] ? b(c.x(i)) - B[g] : 0.0;
      eta(i) = jump - (B0 - B[g]);
    }
    checks.push_back(summarize(eta));
  }
  for (const auto& k : covariateDirections) {
    Eigen::VectorXd kv(c.n);
    for (int i = 0; i < c.n; ++i) kv(i) = k(records[i].covariates);
    checks.push_back(summarize(kv));
  }
  return checks;
}

}  // namespace lbaft
