// ============================================================================
// acceptance.cpp
// End-to-end acceptance harness for the biased-sampling AFT toolkit.
// ============================================================================
//
// Five numbered criteria, one PASS/FAIL line per clause with the measured
// value and its tolerance. Criteria 1-3 replay the backward-recurrence
// log-normal simulation design against frozen reference operating
// characteristics (bias / empirical SE / coverage); criterion 4 is a pure
// property suite (score identities, orthogonality, sampling distributions);
// criterion 5 drives the command-line fit end to end on synthetic
// current-duration data.
//
// RUN: acceptance [--criterion N] [--threads T]     (default: all, 8 threads)
// Exit code 0 iff every requested clause passes.
// ============================================================================

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lbaft/efficient_score.hpp"
#include "lbaft/io.hpp"
#include "lbaft/mc_study.hpp"

using namespace lbaft;
using Eigen::VectorXd;

namespace {

int g_failures = 0;

__attribute__((format(printf, 2, 3))) void check(bool ok, const char* fmt, ...) {
  char buf[512];
  std::va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  std::printf("%s  %s\n", ok ? "PASS" : "FAIL", buf);
  if (!ok) ++g_failures;
}

void banner(const char* title) { std::printf("\n==== %s ====\n", title); }

// wall and process-CPU clocks; replicate studies are budgeted in core-seconds
// so the same binary judges itself fairly on any core count
struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  std::clock_t c0 = std::clock();
  double wall() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  double cpu() const {
    return static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC;
  }
};

void note_runtime(const char* tag, const Stopwatch& sw) {
  std::printf("      note: %s wall %.0f s, cpu %.0f s on %u hardware thread(s)\n", tag,
              sw.wall(), sw.cpu(), std::thread::hardware_concurrency());
}

// backward-recurrence design shared by criteria 1-3: log-normal(0,1) error,
// uniform covariate on [lo, 1]
Scenario design(double theta0, double lo, int n, std::uint64_t seed,
                ObservationScheme scheme = ObservationScheme::BackwardRecurrence) {
  Scenario sc;
  sc.theta0 = VectorXd::Constant(1, theta0);
  sc.errorLaw = log_normal_law(0.0, 1.0);
  sc.covariateLaw =
      uniform_box_law(VectorXd::Constant(1, lo), VectorXd::Constant(1, 1.0));
  sc.scheme = scheme;
  sc.n = n;
  sc.seed = seed;
  return sc;
}

const ScenarioResult& find_row(const std::vector<ScenarioResult>& rows,
                               const std::string& label, Method m) {
  for (const auto& r : rows)
    if (r.label == label && r.method == m) return r;
  std::fprintf(stderr, "missing study row: %s / %s\n", label.c_str(),
               method_name(m).c_str());
  std::abort();
}

double ks_distance(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  double n = static_cast<double>(x.size()), d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double f = cdf(x[i]);
    d = std::max(d, std::max(f - static_cast<double>(i) / n,
                             static_cast<double>(i + 1) / n - f));
  }
  return d;
}

// median of the weighted residual law, for a bounded two-level direction
double weighted_median(const ErrorLaw& base, WeightScheme scheme) {
  DerivedLaw w;
  w.kind = scheme == WeightScheme::RecurrenceWeights ? DerivedKind::Recurrence
                                                     : DerivedKind::LengthBiased;
  w.base = base;
  double lo = 1e-9, hi = 1.0;
  while (survival(w, hi) > 0.5) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double m = 0.5 * (lo + hi);
    (survival(w, m) > 0.5 ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// criterion 1: profile estimator bias / spread / coverage over nine cells
// ---------------------------------------------------------------------------

struct ReferenceRow {
  const char* label;
  double theta0;
  int n;
  double bias, se, cp;  // reference operating characteristics, CP in percent
};

const ReferenceRow kProfileReference[] = {
    {"theta0=0.5 n=100", 0.5, 100, 0.028, 0.202, 95.8},
    {"theta0=0.5 n=200", 0.5, 200, 0.016, 0.188, 95.1},
    {"theta0=0.5 n=400", 0.5, 400, 0.010, 0.117, 95.5},
    {"theta0=1 n=100", 1.0, 100, -0.033, 0.258, 94.4},
    {"theta0=1 n=200", 1.0, 200, 0.006, 0.188, 95.6},
    {"theta0=1 n=400", 1.0, 400, 0.010, 0.133, 95.1},
    {"theta0=2 n=100", 2.0, 100, 0.010, 0.299, 93.9},
    {"theta0=2 n=200", 2.0, 200, 0.003, 0.203, 95.7},
    {"theta0=2 n=400", 2.0, 400, -0.005, 0.169, 94.5},
};

void criterion1(int threads) {
  banner("criterion 1: profile estimator operating characteristics");
  Stopwatch sw;
  StudyConfig cfg;
  cfg.replicates = 1000;
  cfg.masterSeed = 1001;
  cfg.threads = threads;
  std::uint64_t seed = 11;
  for (const auto& row : kProfileReference) {
    StudyScenario s;
    s.label = row.label;
    s.scenario = design(row.theta0, -1.0, row.n, seed++);
    s.methods = {Method::NaiveProfile};
    cfg.scenarios.push_back(s);
  }
  auto results = run_study(cfg);
  for (const auto& row : kProfileReference) {
    const auto& res = find_row(results, row.label, Method::NaiveProfile);
    double biasTol = std::max(0.02, 3.0 * res.empiricalSE(0) / std::sqrt(1000.0));
    check(std::abs(res.bias(0) - row.bias) <= biasTol,
          "c1 %-17s bias %+.4f   ref %+.3f  tol %.4f", row.label, res.bias(0),
          row.bias, biasTol);
    check(std::abs(res.empiricalSE(0) - row.se) <= 0.20 * row.se,
          "c1 %-17s empirical SE %.4f  ref %.3f +-20%%", row.label,
          res.empiricalSE(0), row.se);
    check(std::abs(100.0 * res.coverage - row.cp) <= 2.0,
          "c1 %-17s coverage %.1f%%  ref %.1f%%  tol 2.0pp", row.label,
          100.0 * res.coverage, row.cp);
    if (res.failures > 0)
      std::printf("      note: %-17s %d of 1000 replicates unusable%s\n",
                  row.label, res.failures, res.unreliable ? " (UNRELIABLE)" : "");
  }
  // the runtime budget is 15 minutes across 8 cores; judge it in core-seconds
  check(sw.cpu() <= 7200.0, "c1 runtime %.0f core-seconds <= 7200", sw.cpu());
  note_runtime("c1", sw);
}

// ---------------------------------------------------------------------------
// criterion 2: misspecified covariate law biases the law-aware estimators
// ---------------------------------------------------------------------------

void criterion2(int threads) {
  banner("criterion 2: covariate-law misspecification pattern at n=400");
  Stopwatch sw;
  StudyConfig cfg;
  cfg.replicates = 1000;
  cfg.masterSeed = 2002;
  cfg.threads = threads;
  const double lows[2] = {-0.9, -0.8};
  const char* labels[2] = {"x=-0.9", "x=-0.8"};
  for (int i = 0; i < 2; ++i) {
    StudyScenario s;
    s.label = labels[i];
    s.scenario = design(1.0, lows[i], 400, 21 + static_cast<std::uint64_t>(i));
    s.methods = {Method::NaiveProfile, Method::KnownH, Method::MeanZero};
    // the analysis hands the law-aware estimators the wrong support
    s.misspecifiedAnalysisLaw =
        uniform_box_law(VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 1.0));
    cfg.scenarios.push_back(s);
  }
  auto results = run_study(cfg);
  for (int i = 0; i < 2; ++i) {
    const auto& naive = find_row(results, labels[i], Method::NaiveProfile);
    const auto& kh = find_row(results, labels[i], Method::KnownH);
    const auto& mz = find_row(results, labels[i], Method::MeanZero);
    check(std::abs(naive.bias(0)) <= 0.03, "c2 %s profile |bias| %.4f <= 0.03",
          labels[i], std::abs(naive.bias(0)));
    check(kh.bias(0) > 0.15, "c2 %s known-law bias %+.4f > +0.15 (ref %+.3f)",
          labels[i], kh.bias(0), i == 0 ? 0.213 : 0.278);
    check(mz.bias(0) > 0.15, "c2 %s vanishing-mean bias %+.4f > +0.15 (ref %+.3f)",
          labels[i], mz.bias(0), i == 0 ? 0.155 : 0.304);
  }
  note_runtime("c2", sw);
}

// ---------------------------------------------------------------------------
// criterion 3: efficiency ordering under correct specification
// ---------------------------------------------------------------------------

void criterion3(int threads) {
  banner("criterion 3: efficiency ordering at theta0=1, n=400, 500 replicates");
  Stopwatch sw;
  StudyConfig cfg;
  cfg.replicates = 500;
  cfg.masterSeed = 3003;
  cfg.threads = threads;
  StudyScenario s;
  s.label = "theta0=1 n=400";
  s.scenario = design(1.0, -1.0, 400, 31);
  s.methods = {Method::NaiveProfile, Method::KnownH, Method::MeanZero};
  cfg.scenarios.push_back(s);
  auto results = run_study(cfg);
  double seNaive = find_row(results, s.label, Method::NaiveProfile).empiricalSE(0);
  double seKh = find_row(results, s.label, Method::KnownH).empiricalSE(0);
  double seMz = find_row(results, s.label, Method::MeanZero).empiricalSE(0);
  for (const auto& r : results)
    std::printf("      note: %-10s bias %+.4f  empirical SE %.4f  (SE mc error %.4f)\n",
                method_name(r.method).c_str(), r.bias(0), r.empiricalSE(0),
                r.empiricalSE(0) / std::sqrt(2.0 * (cfg.replicates - 1.0)));
  check(seKh <= seMz, "c3 ordering: known-law SE %.4f <= vanishing-mean SE %.4f",
        seKh, seMz);
  double lid = 1.05 * seNaive * (0.111 / 0.133);
  check(seMz <= lid,
        "c3 ordering: vanishing-mean SE %.4f <= 1.05 * profile SE * ref ratio = %.4f",
        seMz, lid);
  check(std::abs(seKh - 0.099) <= 0.20 * 0.099,
        "c3 known-law empirical SE %.4f  ref 0.099 +-20%%", seKh);
  check(std::abs(seMz - 0.111) <= 0.20 * 0.111,
        "c3 vanishing-mean empirical SE %.4f  ref 0.111 +-20%%", seMz);
  note_runtime("c3", sw);
}

// ---------------------------------------------------------------------------
// criterion 4: property suite
// ---------------------------------------------------------------------------

void criterion4() {
  banner("criterion 4: score identities, orthogonality, sampling distributions");
  Stopwatch sw;
  ErrorLaw ln = log_normal_law(0.0, 1.0);
  ErrorLaw ex = exponential_law(1.0);
  VectorXd th = VectorXd::Constant(1, 1.0);

  // (a) survival weighting centers phi of the unit exponential to one
  {
    auto f = [&ex](double u) { return phi(ex, u); };
    double worst = 0.0;
    for (int k = 0; k <= 24; ++k) {
      double t = 0.01 + k * (7.99 / 24.0);
      worst = std::max(worst,
                       std::abs(r_apply(f, WeightScheme::RecurrenceWeights, ex, t) - 1.0));
    }
    check(worst <= 1e-8, "c4a centered-phi flatness: max |R phi - 1| = %.2e <= 1e-8", worst);
  }

  // (b) zero-mean score and nuisance orthogonality, both weightings, with and
  // without censoring, one n=1e5 cohort each
  struct Config {
    const char* name;
    ObservationScheme scheme;
    bool censored;
    WeightScheme w;
  };
  const Config configs[] = {
      {"recurrence/uncensored", ObservationScheme::BackwardRecurrence, false,
       WeightScheme::RecurrenceWeights},
      {"recurrence/censored", ObservationScheme::ForwardRecurrence, true,
       WeightScheme::RecurrenceWeights},
      {"length-bias/uncensored", ObservationScheme::LengthBiased, false,
       WeightScheme::LengthBiasWeights},
      {"length-bias/censored", ObservationScheme::LengthBiased, true,
       WeightScheme::LengthBiasWeights},
  };
  int n4 = 100000;
  std::uint64_t seed4 = 401;
  for (const auto& c : configs) {
    Scenario sc = design(1.0, -1.0, n4, seed4++, c.scheme);
    if (c.censored) sc.censoring = exponential_law(0.119506);
    auto cohort = generate_cohort(sc);
    ScorePieces sp = efficient_score(cohort, th, ln, c.w);
    double n = static_cast<double>(cohort.size());
    double meanScore = sp.total(0) / n;
    double sd = std::sqrt((sp.perSubject.col(0).array() - meanScore).square().sum() / (n - 1.0));
    check(std::abs(meanScore) <= 4.0 * sd / std::sqrt(n),
          "c4b %-23s mean score %+.2e  tol %.2e", c.name, meanScore,
          4.0 * sd / std::sqrt(n));

    double med = weighted_median(ln, c.w);
    double zbar = 0.0;
    for (const auto& r : cohort) zbar += r.covariates(0);
    zbar /= n;
    auto checks = orthogonality_check(
        cohort, th, ln, c.w, {[med](double u) { return u <= med ? 1.0 : -1.0; }},
        {[zbar](const Eigen::VectorXd& z) { return z(0) - zbar; }});
    check(std::abs(checks[0].inner(0)) <= 4.0 * checks[0].mcError(0) + 1e-10,
          "c4b %-23s error-direction inner %+.2e  tol %.2e", c.name,
          checks[0].inner(0), 4.0 * checks[0].mcError(0));
    check(std::abs(checks[1].inner(0)) <= 4.0 * checks[1].mcError(0) + 1e-10,
          "c4b %-23s covariate-direction inner %+.2e  tol %.2e", c.name,
          checks[1].inner(0), 4.0 * checks[1].mcError(0));
  }

  // (c) the censored machinery collapses to the fully observed score on
  // uncensored data
  {
    auto cohort = generate_cohort(design(1.0, -1.0, 500, 405));
    ScorePieces plain = efficient_score_uncensored(cohort, th, ln);
    ScorePieces rec = efficient_score(cohort, th, ln, WeightScheme::RecurrenceWeights);
    ScorePieces lb = efficient_score(cohort, th, ln, WeightScheme::LengthBiasWeights);
    double dRec = (rec.perSubject - plain.perSubject).cwiseAbs().maxCoeff();
    check(dRec <= 1e-8, "c4c recurrence per-subject collapse: max gap %.2e <= 1e-8", dRec);
    double dTot = std::abs(lb.total(0) - plain.total(0));
    check(dTot <= 1e-8, "c4c length-bias total collapse: gap %.2e <= 1e-8", dTot);
  }

  // (d) information identity and the exponential anchor
  {
    auto cohort = generate_cohort(design(1.0, -1.0, n4, 406));
    ScorePieces sp = efficient_score(cohort, th, ln, WeightScheme::RecurrenceWeights);
    double n = static_cast<double>(cohort.size());
    double meanScore = sp.total(0) / n;
    double var = (sp.perSubject.col(0).array() - meanScore).square().sum() / (n - 1.0);
    check(std::abs(sp.information(0, 0) - var) <= 0.10 * sp.information(0, 0),
          "c4d information %.5f vs score variance %.5f  within 10%%",
          sp.information(0, 0), var);

    Scenario esc = design(1.0, -1.0, n4, 407);
    esc.errorLaw = ex;
    auto ecohort = generate_cohort(esc);
    ScorePieces esp = efficient_score_uncensored(ecohort, th, ex);
    // information factorizes into mean((z-zbar)^2) * mean(phi^2); its Monte
    // Carlo error follows from the delta method on the two independent means
    double zbar = 0.0;
    for (const auto& r : ecohort) zbar += r.covariates(0);
    zbar /= n;
    double mc = 0.0, mp = 0.0, vc = 0.0, vp = 0.0;
    for (const auto& r : ecohort) {
      double ci = (r.covariates(0) - zbar) * (r.covariates(0) - zbar);
      double pi = phi(ex, r.time * std::exp(-th(0) * r.covariates(0)));
      pi *= pi;
      mc += ci;
      mp += pi;
      vc += ci * ci;
      vp += pi * pi;
    }
    mc /= n;
    mp /= n;
    vc = vc / n - mc * mc;
    vp = vp / n - mp * mp;
    double mcErr = std::sqrt((mp * mp * vc + mc * mc * vp) / n);
    check(std::abs(esp.information(0, 0) - 0.2759383390336895) <= 4.0 * mcErr,
          "c4d exponential information anchor %.5f  ref 0.27594  tol %.5f",
          esp.information(0, 0), 4.0 * mcErr);
  }

  // (e) sampling distributional identities at the 1% level
  {
    double ksCrit = 1.6276 / std::sqrt(static_cast<double>(n4));

    // backward recurrence times at theta0=0 follow the survival-weighted law
    Scenario sc0 = design(0.0, -1.0, n4, 408);
    auto cohort0 = generate_cohort(sc0);
    DerivedLaw recLaw{DerivedKind::Recurrence, ln};
    std::vector<double> times;
    times.reserve(cohort0.size());
    for (const auto& r : cohort0) times.push_back(r.time);
    double d0 = ks_distance(times, [&recLaw](double u) { return 1.0 - survival(recLaw, u); });
    check(d0 <= ksCrit, "c4e recurrence-time KS %.5f <= %.5f", d0, ksCrit);

    // covariates under biased sampling follow the tilted law: chi-square over
    // 20 equal-probability bins, 1% critical value at 19 dof
    Scenario sc1 = design(1.0, -1.0, n4, 409, ObservationScheme::LengthBiased);
    auto cohort1 = generate_cohort(sc1);
    double themin = std::exp(-1.0), span = std::exp(1.0) - std::exp(-1.0);
    std::vector<int> counts(20, 0);
    for (const auto& r : cohort1) {
      double f = (std::exp(r.covariates(0)) - themin) / span;  // tilted CDF
      int bin = std::min(19, std::max(0, static_cast<int>(f * 20.0)));
      ++counts[bin];
    }
    double expect = n4 / 20.0, chi2 = 0.0;
    for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
    check(chi2 <= 36.1909, "c4e tilted-covariate chi-square %.2f <= 36.19", chi2);

    // a forward time is its length-biased partner times an independent
    // uniform split: same seed, schemes swapped
    Scenario scF = design(1.0, -1.0, n4, 410, ObservationScheme::ForwardRecurrence);
    Scenario scL = design(1.0, -1.0, n4, 410, ObservationScheme::LengthBiased);
    auto fwd = generate_cohort(scF);
    auto lb = generate_cohort(scL);
    std::vector<double> ratio(fwd.size());
    double mr = 0.0, ml = 0.0;
    for (std::size_t i = 0; i < fwd.size(); ++i) {
      ratio[i] = fwd[i].time / lb[i].time;
      mr += ratio[i];
      ml += lb[i].time;
    }
    mr /= ratio.size();
    ml /= ratio.size();
    double dU = ks_distance(ratio, [](double u) { return std::min(1.0, std::max(0.0, u)); });
    check(dU <= ksCrit, "c4e split-ratio uniform KS %.5f <= %.5f", dU, ksCrit);
    double num = 0.0, vr = 0.0, vl = 0.0;
    for (std::size_t i = 0; i < fwd.size(); ++i) {
      num += (ratio[i] - mr) * (lb[i].time - ml);
      vr += (ratio[i] - mr) * (ratio[i] - mr);
      vl += (lb[i].time - ml) * (lb[i].time - ml);
    }
    double corr = num / std::sqrt(vr * vl);
    double corrTol = 4.0 / std::sqrt(static_cast<double>(n4));
    check(std::abs(corr) <= corrTol, "c4e split-ratio independence |corr| %.5f <= %.5f",
          std::abs(corr), corrTol);
  }

  check(sw.wall() <= 300.0, "c4 runtime %.1f s wall <= 300", sw.wall());
}

// ---------------------------------------------------------------------------
// criterion 5: command-line fit on synthetic current-duration data
// ---------------------------------------------------------------------------

void criterion5() {
  banner("criterion 5: cmd_fit recovers a known time ratio of 2");
  Scenario sc;
  sc.theta0 = VectorXd::Constant(1, std::log(2.0));
  sc.errorLaw = log_normal_law(0.0, 1.0);
  sc.covariateLaw = empirical_law((Eigen::MatrixXd(2, 1) << 0.0, 1.0).finished());
  sc.scheme = ObservationScheme::BackwardRecurrence;
  sc.n = 2000;
  sc.seed = 505;
  auto cohort = generate_cohort(sc);

  auto path = std::filesystem::temp_directory_path() / "acceptance_fit.csv";
  save_text(path.string(), write_dataset_csv(cohort));

  FitCommand cmd;
  cmd.dataPath = path.string();
  cmd.method = Method::NaiveProfile;
  cmd.scheme = "backward-recurrence";
  cmd.labels = {"exposed"};
  cmd.referenceLevels = {"baseline"};
  std::ostringstream out, err;
  int rc = cmd_fit(cmd, out, err);
  check(rc == 0, "c5 exit code %d == 0%s%s", rc, err.str().empty() ? "" : "  stderr: ",
        err.str().c_str());
  std::filesystem::remove(path);
  if (rc != 0) return;

  std::istringstream lines(out.str());
  std::string jsonLine;
  std::getline(lines, jsonLine);
  auto j = nlohmann::json::parse(jsonLine);
  check(j.at("converged").get<bool>(), "c5 fit converged");
  double ratio = std::exp(j.at("thetaHat").at(0).get<double>());
  check(ratio > 1.7 && ratio < 2.35, "c5 time ratio %.4f in (1.70, 2.35)", ratio);

  // the reference category renders as a ratio-one row
  std::string table = out.str();
  auto pos = table.find("baseline");
  bool refRow = pos != std::string::npos;
  if (refRow) {
    std::string row = table.substr(pos, table.find('\n', pos) - pos);
    refRow = row.find("(reference)") != std::string::npos;
    int ones = 0;
    for (std::size_t at = row.find("1.0000"); at != std::string::npos;
         at = row.find("1.0000", at + 1))
      ++ones;
    refRow = refRow && ones == 3;
  }
  check(refRow, "c5 reference row renders ratio/lower/upper as 1");
}

}  // namespace

int main(int argc, char** argv) {
  int criterion = 0, threads = 8;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--criterion") && i + 1 < argc)
      criterion = std::atoi(argv[++i]);
    else if (!std::strcmp(argv[i], "--threads") && i + 1 < argc)
      threads = std::atoi(argv[++i]);
    else {
      std::fprintf(stderr, "usage: acceptance [--criterion N] [--threads T]\n");
      return 2;
    }
  }
  if (criterion == 0 || criterion == 1) criterion1(threads);
  if (criterion == 0 || criterion == 2) criterion2(threads);
  if (criterion == 0 || criterion == 3) criterion3(threads);
  if (criterion == 0 || criterion == 4) criterion4();
  if (criterion == 0 || criterion == 5) criterion5();
  if (g_failures == 0)
    std::printf("\nall clauses passed\n");
  else
    std::printf("\n%d clause(s) FAILED\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
