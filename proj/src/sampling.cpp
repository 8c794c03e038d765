#include "lbaft/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace lbaft {

namespace {

bool censorable(ObservationScheme s) {
  return s == ObservationScheme::ForwardRecurrence || s == ObservationScheme::LengthBiased;
}

}  // namespace

std::vector<SubjectRecord> generate_cohort(const Scenario& sc) {
  if (sc.n < 1) throw std::invalid_argument("generate_cohort: n must be positive");
  if (sc.theta0.size() != sc.covariateLaw.dim())
    throw std::invalid_argument("generate_cohort: theta0 does not match covariate dimension");
  if (sc.censoring.has_value() && !censorable(sc.scheme))
    throw std::invalid_argument(
        "generate_cohort: censoring requested for a scheme that cannot be censored");

  DerivedLaw lengthLaw{DerivedKind::LengthBiased, sc.errorLaw};
  const bool tilted = sc.scheme != ObservationScheme::Underlying;

  std::vector<SubjectRecord> out(sc.n);
  RngStream root(sc.seed);
  for (int i = 0; i < sc.n; ++i) {
    RngStream sub = root.child(static_cast<std::uint64_t>(i));
    RngStream zStream = sub.child(0);
    RngStream uStream = sub.child(1);
    RngStream vStream = sub.child(2);
    RngStream cStream = sub.child(3);

    Eigen::VectorXd z =
        tilted ? tilted_sample(sc.covariateLaw, sc.theta0, 1, zStream).row(0).transpose()
               : sample(sc.covariateLaw, 1, zStream).row(0).transpose();
    double scale = std::exp(sc.theta0.dot(z));

    double length;
    switch (sc.scheme) {
      case ObservationScheme::Underlying:
        length = sample(sc.errorLaw, uStream);
        break;
      default:
        length = sample(lengthLaw, uStream);
        break;
    }
    double t = scale * length;
    if (sc.scheme == ObservationScheme::ForwardRecurrence ||
        sc.scheme == ObservationScheme::BackwardRecurrence)
      t *= vStream.uniform();

    SubjectRecord rec;
    rec.covariates = z;
    rec.time = t;
    rec.event = 1;
    if (sc.censoring.has_value()) {
      double c = sample(*sc.censoring, cStream);
      if (c < t) {
        rec.time = c;
        rec.event = 0;
      }
    }
    out[i] = std::move(rec);
  }
  return out;
}

double censoring_fraction(const std::vector<SubjectRecord>& cohort) {
  if (cohort.empty()) throw std::invalid_argument("censoring_fraction: empty cohort");
  double c = 0;
  for (const auto& r : cohort) c += (r.event == 0);
  return c / static_cast<double>(cohort.size());
}

double calibrate_censoring_rate(const Scenario& sc, double targetFraction, int referenceSize) {
  if (!(targetFraction > 0.0 && targetFraction < 1.0))
    throw std::invalid_argument("calibrate_censoring_rate: target must lie in (0,1)");
  if (!censorable(sc.scheme))
    throw std::invalid_argument("calibrate_censoring_rate: scheme cannot be censored");
  Scenario ref = sc;
  ref.censoring.reset();
  ref.n = referenceSize;
  ref.seed = combine_seeds(sc.seed, 0xCA11B007ull);
  std::vector<SubjectRecord> cohort = generate_cohort(ref);

  // P(censored | rate) = 1 - E exp(-rate * T) for an independent exponential
  auto frac = [&](double rate) {
    double s = 0;
    for (const auto& r : cohort) s += std::exp(-rate * r.time);
    return 1.0 - s / cohort.size();
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && frac(hi) < targetFraction; ++it) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (frac(mid) < targetFraction ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace lbaft
