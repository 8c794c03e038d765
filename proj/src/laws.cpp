#include "lbaft/laws.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lbaft/quadrature.hpp"

namespace lbaft {

namespace {

constexpr double kSurvivalFloor = 1e-12;

void check_point(double u) {
  if (!(u > 0.0) || !std::isfinite(u))
    throw std::invalid_argument("error law: evaluation point must be positive and finite");
}

// exact integral of u * d(u) over one cell of a piecewise-linear density
double cell_first_moment(double a, double b, double da, double db) {
  double slope = (db - da) / (b - a);
  double c0 = da - slope * a;  // d(u) = c0 + slope * u
  return c0 * (b * b - a * a) / 2.0 + slope * (b * b * b - a * a * a) / 3.0;
}

}  // namespace

// ---------------------------------------------------------------------------
// constructors
// ---------------------------------------------------------------------------

ErrorLaw log_normal_law(double logMean, double logSd) {
  if (!std::isfinite(logMean) || !(logSd > 0.0) || !std::isfinite(logSd))
    throw std::invalid_argument("log_normal_law: logSd must be positive and finite");
  ErrorLaw law;
  law.family = ErrorFamily::LogNormal;
  law.logMean = logMean;
  law.logSd = logSd;
  return law;
}

ErrorLaw exponential_law(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw std::invalid_argument("exponential_law: rate must be positive and finite");
  ErrorLaw law;
  law.family = ErrorFamily::Exponential;
  law.rate = rate;
  return law;
}

ErrorLaw tabulated_law(const Eigen::VectorXd& grid, const Eigen::VectorXd& density) {
  const auto m = grid.size();
  if (m < 2 || density.size() != m)
    throw std::invalid_argument("tabulated_law: need >= 2 nodes and matching density values");
  if (!(grid(0) >= 0.0)) throw std::invalid_argument("tabulated_law: grid must be nonnegative");
  for (Eigen::Index k = 0; k + 1 < m; ++k)
    if (!(grid(k + 1) > grid(k)))
      throw std::invalid_argument("tabulated_law: grid must be strictly increasing");
  for (Eigen::Index k = 0; k < m; ++k)
    if (!(density(k) >= 0.0) || !std::isfinite(density(k)))
      throw std::invalid_argument("tabulated_law: density values must be nonnegative and finite");

  ErrorLaw law;
  law.family = ErrorFamily::Tabulated;
  law.grid = grid;
  law.dens = density;
  // trapezoid node CDF is exact for a piecewise-linear density
  law.cdf.resize(m);
  law.cdf(0) = 0.0;
  for (Eigen::Index k = 1; k < m; ++k)
    law.cdf(k) = law.cdf(k - 1) + 0.5 * (density(k - 1) + density(k)) * (grid(k) - grid(k - 1));
  double mass = law.cdf(m - 1);
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw std::invalid_argument("tabulated_law: density has no mass");
  law.dens /= mass;
  law.cdf /= mass;
  return law;
}

// ---------------------------------------------------------------------------
// error law operations
// ---------------------------------------------------------------------------

double density(const ErrorLaw& law, double u) {
  check_point(u);
  switch (law.family) {
    case ErrorFamily::LogNormal: {
      double z = (std::log(u) - law.logMean) / law.logSd;
      return std::exp(-0.5 * z * z) / (u * law.logSd * 2.5066282746310002);
    }
    case ErrorFamily::Exponential:
      return law.rate * std::exp(-law.rate * u);
    case ErrorFamily::Tabulated: {
      const auto& g = law.grid;
      if (u <= g(0) || u >= g(g.size() - 1)) {
        if (u == g(0)) return law.dens(0);
        if (u == g(g.size() - 1)) return law.dens(g.size() - 1);
        return 0.0;
      }
      auto it = std::upper_bound(g.data(), g.data() + g.size(), u);
      Eigen::Index k = (it - g.data()) - 1;
      double t = (u - g(k)) / (g(k + 1) - g(k));
      return law.dens(k) + t * (law.dens(k + 1) - law.dens(k));
    }
  }
  return 0.0;
}

double survival(const ErrorLaw& law, double u) {
  check_point(u);
  switch (law.family) {
    case ErrorFamily::LogNormal:
      return normal_cdf(-(std::log(u) - law.logMean) / law.logSd);
    case ErrorFamily::Exponential:
      return std::exp(-law.rate * u);
    case ErrorFamily::Tabulated: {
      const auto& g = law.grid;
      const auto m = g.size();
      if (u <= g(0)) return 1.0;
      if (u >= g(m - 1)) return 0.0;
      auto it = std::upper_bound(g.data(), g.data() + m, u);
      Eigen::Index k = (it - g.data()) - 1;
      double w = g(k + 1) - g(k);
      double t = u - g(k);
      double slope = (law.dens(k + 1) - law.dens(k)) / w;
      double inCell = law.dens(k) * t + 0.5 * slope * t * t;
      return 1.0 - (law.cdf(k) + inCell);
    }
  }
  return 0.0;
}

double hazard(const ErrorLaw& law, double u) {
  double s = survival(law, u);
  if (s < kSurvivalFloor)
    throw std::runtime_error("hazard singularity: survival below 1e-12");
  return density(law, u) / s;
}

double phi(const ErrorLaw& law, double u) { return 1.0 - u * hazard(law, u); }

double mean(const ErrorLaw& law) {
  double v = 0.0;
  switch (law.family) {
    case ErrorFamily::LogNormal:
      v = std::exp(law.logMean + 0.5 * law.logSd * law.logSd);
      break;
    case ErrorFamily::Exponential:
      v = 1.0 / law.rate;
      break;
    case ErrorFamily::Tabulated: {
      for (Eigen::Index k = 0; k + 1 < law.grid.size(); ++k)
        v += cell_first_moment(law.grid(k), law.grid(k + 1), law.dens(k), law.dens(k + 1));
      break;
    }
  }
  if (!std::isfinite(v)) throw std::runtime_error("mean: nonfinite moment");
  return v;
}

double quantile(const ErrorLaw& law, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("quantile: p must lie in (0,1)");
  switch (law.family) {
    case ErrorFamily::LogNormal:
      return std::exp(law.logMean + law.logSd * normal_quantile(p));
    case ErrorFamily::Exponential:
      return -std::log1p(-p) / law.rate;
    case ErrorFamily::Tabulated: {
      const auto& c = law.cdf;
      const auto m = c.size();
      auto it = std::upper_bound(c.data(), c.data() + m, p);
      Eigen::Index k = std::min<Eigen::Index>(std::max<Eigen::Index>((it - c.data()) - 1, 0), m - 2);
      double q = p - c(k);
      if (q <= 0.0) return law.grid(k);
      double w = law.grid(k + 1) - law.grid(k);
      double slope = (law.dens(k + 1) - law.dens(k)) / w;
      double disc = law.dens(k) * law.dens(k) + 2.0 * slope * q;
      double t = 2.0 * q / (law.dens(k) + std::sqrt(std::max(disc, 0.0)));
      return law.grid(k) + std::min(t, w);
    }
  }
  return 0.0;
}

double upper_point(const ErrorLaw& law) {
  if (law.family == ErrorFamily::Tabulated) return law.grid(law.grid.size() - 1);
  return quantile(law, 1.0 - 1e-9);
}

double sample(const ErrorLaw& law, RngStream& rng) { return quantile(law, rng.uniform()); }

Eigen::VectorXd sample(const ErrorLaw& law, int n, RngStream& rng) {
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out(i) = sample(law, rng);
  return out;
}

// ---------------------------------------------------------------------------
// derived laws
// ---------------------------------------------------------------------------

double density(const DerivedLaw& law, double u) {
  check_point(u);
  double mu = mean(law.base);
  if (law.kind == DerivedKind::LengthBiased) return u * density(law.base, u) / mu;
  return survival(law.base, u) / mu;
}

double survival(const DerivedLaw& law, double u) {
  check_point(u);
  double mu = mean(law.base);
  const ErrorLaw& b = law.base;
  if (law.kind == DerivedKind::LengthBiased) {
    switch (b.family) {
      case ErrorFamily::LogNormal:
        return normal_cdf((b.logMean + b.logSd * b.logSd - std::log(u)) / b.logSd);
      case ErrorFamily::Exponential:
        return (1.0 + b.rate * u) * std::exp(-b.rate * u);
      case ErrorFamily::Tabulated: {
        double hi = b.grid(b.grid.size() - 1);
        if (u >= hi) return 0.0;
        double tail = 0.0;
        Eigen::Index m = b.grid.size();
        for (Eigen::Index k = 0; k + 1 < m; ++k) {
          double a = b.grid(k), c = b.grid(k + 1);
          if (c <= u) continue;
          double lo = std::max(a, u);
          double dlo = density(b, std::max(lo, std::nextafter(0.0, 1.0)));
          if (lo <= 0.0) dlo = b.dens(0);
          tail += cell_first_moment(lo, c, dlo, b.dens(k + 1));
        }
        return tail / mu;
      }
    }
  } else {
    switch (b.family) {
      case ErrorFamily::LogNormal: {
        double d1 = (b.logMean + b.logSd * b.logSd - std::log(u)) / b.logSd;
        double d2 = (b.logMean - std::log(u)) / b.logSd;
        return normal_cdf(d1) - u * normal_cdf(d2) / mu;
      }
      case ErrorFamily::Exponential:
        return std::exp(-b.rate * u);
      case ErrorFamily::Tabulated: {
        double hi = b.grid(b.grid.size() - 1);
        if (u >= hi) return 0.0;
        double v = integrate([&](double x) { return x <= 0.0 ? 1.0 : survival(b, x); }, u, hi,
                             1e-12) / mu;
        return std::max(v, 0.0);
      }
    }
  }
  return 0.0;
}

double hazard(const DerivedLaw& law, double u) {
  double s = survival(law, u);
  if (s < kSurvivalFloor)
    throw std::runtime_error("hazard singularity: survival below 1e-12");
  return density(law, u) / s;
}

double mean(const DerivedLaw& law) {
  double muBase = mean(law.base);
  double hi = upper_point(law.base);
  if (law.base.family != ErrorFamily::Tabulated) {
    // push the truncation point out until the local tail proxy is negligible
    for (int it = 0; it < 400 && density(law, hi) * hi * hi > 2e-8 * (1.0 + muBase); ++it)
      hi *= 1.2;
  }
  auto f = [&](double u) { return u <= 0.0 ? 0.0 : u * density(law, u); };
  double v = integrate(f, 0.0, hi, std::max(1e-12, 1e-10 * (1.0 + muBase)));
  if (!std::isfinite(v)) throw std::runtime_error("mean: nonfinite moment");
  return v;
}

namespace detail {

// inverse-CDF table: 4096 log-spaced nodes, monotone cubic inversion
struct InverseCdfTable {
  std::vector<double> F, u, slope;

  explicit InverseCdfTable(const DerivedLaw& law) {
    double hi = upper_point(law.base);
    for (int it = 0; it < 200 && survival(law, hi) > 1e-9; ++it) hi *= 1.5;
    double lo = hi * 1e-12;
    const int nodes = 4096;
    std::vector<double> x(nodes), cdf(nodes);
    double logLo = std::log(lo), step = (std::log(hi) - logLo) / (nodes - 1);
    for (int j = 0; j < nodes; ++j) x[j] = std::exp(logLo + step * j);
    auto dens = [&](double v) { return v <= 0.0 ? 0.0 : density(law, v); };
    cdf[0] = integrate(dens, 0.0, x[0], 1e-14);
    for (int j = 1; j < nodes; ++j)
      cdf[j] = cdf[j - 1] + integrate(dens, x[j - 1], x[j], 1e-12);
    double total = cdf[nodes - 1];
    // keep strictly increasing nodes only (flat stretches have no mass)
    F.push_back(cdf[0] / total);
    u.push_back(x[0]);
    for (int j = 1; j < nodes; ++j) {
      double p = cdf[j] / total;
      if (p > F.back() + 1e-15) {
        F.push_back(p);
        u.push_back(x[j]);
      }
    }
    build_slopes();
  }

  void build_slopes() {
    const int m = static_cast<int>(F.size());
    slope.assign(m, 0.0);
    if (m < 2) return;
    std::vector<double> h(m - 1), d(m - 1);
    for (int k = 0; k + 1 < m; ++k) {
      h[k] = F[k + 1] - F[k];
      d[k] = (u[k + 1] - u[k]) / h[k];
    }
    slope[0] = d[0];
    slope[m - 1] = d[m - 2];
    for (int k = 1; k + 1 < m; ++k) {
      if (d[k - 1] <= 0.0 || d[k] <= 0.0) {
        slope[k] = 0.0;
      } else {
        double w1 = 2.0 * h[k] + h[k - 1], w2 = h[k] + 2.0 * h[k - 1];
        slope[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
      }
    }
  }

  double invert(double p) const {
    if (p <= F.front()) return u.front();
    if (p >= F.back()) return u.back();
    auto it = std::upper_bound(F.begin(), F.end(), p);
    int k = static_cast<int>(it - F.begin()) - 1;
    double h = F[k + 1] - F[k];
    double t = (p - F[k]) / h;
    double t2 = t * t, t3 = t2 * t;
    return u[k] * (2 * t3 - 3 * t2 + 1) + h * slope[k] * (t3 - 2 * t2 + t) +
           u[k + 1] * (-2 * t3 + 3 * t2) + h * slope[k + 1] * (t3 - t2);
  }
};

Eigen::VectorXd sample_derived_general(const DerivedLaw& law, int n, RngStream& rng) {
  InverseCdfTable table(law);
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out(i) = table.invert(rng.uniform());
  return out;
}

}  // namespace detail

Eigen::VectorXd sample(const DerivedLaw& law, int n, RngStream& rng) {
  const ErrorLaw& b = law.base;
  Eigen::VectorXd out(n);
  if (law.kind == DerivedKind::LengthBiased && b.family == ErrorFamily::LogNormal) {
    double m2 = b.logMean + b.logSd * b.logSd;
    for (int i = 0; i < n; ++i) out(i) = std::exp(m2 + b.logSd * rng.normal());
    return out;
  }
  if (law.kind == DerivedKind::Recurrence && b.family == ErrorFamily::Exponential) {
    for (int i = 0; i < n; ++i) out(i) = rng.exponential(b.rate);
    return out;
  }
  if (law.kind == DerivedKind::LengthBiased && b.family == ErrorFamily::Exponential) {
    for (int i = 0; i < n; ++i)
      out(i) = -(std::log(rng.uniform()) + std::log(rng.uniform())) / b.rate;
    return out;
  }
  return detail::sample_derived_general(law, n, rng);
}

double sample(const DerivedLaw& law, RngStream& rng) { return sample(law, 1, rng)(0); }

// ---------------------------------------------------------------------------
// covariate laws
// ---------------------------------------------------------------------------

CovariateLaw uniform_box_law(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  if (lower.size() == 0 || lower.size() != upper.size())
    throw std::invalid_argument("uniform_box_law: lower/upper must be nonempty and match");
  for (Eigen::Index j = 0; j < lower.size(); ++j)
    if (!(lower(j) < upper(j)) || !std::isfinite(lower(j)) || !std::isfinite(upper(j)))
      throw std::invalid_argument("uniform_box_law: need finite lower < upper per coordinate");
  CovariateLaw law;
  law.family = CovariateFamily::UniformBox;
  law.lower = lower;
  law.upper = upper;
  return law;
}

CovariateLaw empirical_law(const Eigen::MatrixXd& points) {
  if (points.rows() == 0 || points.cols() == 0)
    throw std::invalid_argument("empirical_law: need at least one point");
  if (!points.allFinite()) throw std::invalid_argument("empirical_law: points must be finite");
  CovariateLaw law;
  law.family = CovariateFamily::Empirical;
  law.points = points;
  return law;
}

namespace {

void check_theta(const CovariateLaw& law, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() != law.dim())
    throw std::invalid_argument("covariate law: theta dimension mismatch");
  if (!theta.allFinite()) throw std::invalid_argument("covariate law: theta must be finite");
}

// log of (1/(u-l)) * int_l^u e^{theta z} dz  =  theta*l + log(expm1(x)/x), x = theta(u-l)
double box_coord_log_normalizer(double theta, double l, double u) {
  double x = theta * (u - l);
  if (x == 0.0) return theta * l;
  return theta * l + std::log(std::expm1(x) / x);
}

// mean of the tilted uniform coordinate
double box_coord_mean(double theta, double l, double u) {
  double d = u - l, x = theta * d;
  if (std::abs(x) < 1e-5) {
    // series of 1/(1-e^{-x}) - 1/x around 0
    double frac = 0.5 + x / 12.0 - x * x * x / 720.0;
    return l + d * frac;
  }
  return l + d * (1.0 / (-std::expm1(-x)) - 1.0 / x);
}

Eigen::VectorXd empirical_tilt_weights(const CovariateLaw& law,
                                       const Eigen::Ref<const Eigen::VectorXd>& theta) {
  Eigen::VectorXd s = law.points * theta;
  double mx = s.maxCoeff();
  Eigen::VectorXd w = (s.array() - mx).exp();
  return w / w.sum();
}

}  // namespace

double log_normalizer(const CovariateLaw& law, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  check_theta(law, theta);
  double v = 0.0;
  if (law.family == CovariateFamily::UniformBox) {
    for (Eigen::Index j = 0; j < theta.size(); ++j)
      v += box_coord_log_normalizer(theta(j), law.lower(j), law.upper(j));
  } else {
    Eigen::VectorXd s = law.points * theta;
    double mx = s.maxCoeff();
    v = mx + std::log((s.array() - mx).exp().sum() / s.size());
  }
  if (!std::isfinite(v))
    throw std::invalid_argument("log_normalizer: nonfinite tilt normalizer");
  return v;
}

double tilted_density(const CovariateLaw& law, const Eigen::Ref<const Eigen::VectorXd>& theta,
                      const Eigen::Ref<const Eigen::VectorXd>& z) {
  check_theta(law, theta);
  if (z.size() != law.dim()) throw std::invalid_argument("tilted_density: z dimension mismatch");
  double logZ = log_normalizer(law, theta);
  if (law.family == CovariateFamily::UniformBox) {
    double logVol = 0.0;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      if (z(j) < law.lower(j) || z(j) > law.upper(j)) return 0.0;
      logVol += std::log(law.upper(j) - law.lower(j));
    }
    return std::exp(theta.dot(z) - logZ - logVol);
  }
  Eigen::VectorXd w = empirical_tilt_weights(law, theta);
  for (Eigen::Index k = 0; k < law.points.rows(); ++k)
    if ((law.points.row(k).transpose() - z).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + z.cwiseAbs().maxCoeff()))
      return w(k);
  return 0.0;
}

Eigen::VectorXd tilted_mean(const CovariateLaw& law, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  check_theta(law, theta);
  if (law.family == CovariateFamily::UniformBox) {
    Eigen::VectorXd m(theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j)
      m(j) = box_coord_mean(theta(j), law.lower(j), law.upper(j));
    return m;
  }
  Eigen::VectorXd w = empirical_tilt_weights(law, theta);
  return law.points.transpose() * w;
}

Eigen::MatrixXd tilted_sample(const CovariateLaw& law, const Eigen::Ref<const Eigen::VectorXd>& theta,
                              int n, RngStream& rng) {
  check_theta(law, theta);
  const int p = law.dim();
  Eigen::MatrixXd out(n, p);
  if (law.family == CovariateFamily::UniformBox) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) {
        double l = law.lower(j), d = law.upper(j) - law.lower(j);
        double x = theta(j) * d;
        double pr = rng.uniform();
        out(i, j) = x == 0.0 ? l + d * pr : l + d * std::log1p(pr * std::expm1(x)) / x;
      }
    }
    return out;
  }
  Eigen::VectorXd w = empirical_tilt_weights(law, theta);
  Eigen::VectorXd cum(w.size());
  double acc = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) cum(k) = (acc += w(k));
  for (int i = 0; i < n; ++i) {
    double pr = rng.uniform();
    auto it = std::lower_bound(cum.data(), cum.data() + cum.size(), pr);
    Eigen::Index k = std::min<Eigen::Index>(it - cum.data(), cum.size() - 1);
    out.row(i) = law.points.row(k);
  }
  return out;
}

Eigen::MatrixXd sample(const CovariateLaw& law, int n, RngStream& rng) {
  return tilted_sample(law, Eigen::VectorXd::Zero(law.dim()), n, rng);
}

}  // namespace lbaft
