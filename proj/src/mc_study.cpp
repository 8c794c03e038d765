#include "lbaft/mc_study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "lbaft/rng.hpp"

namespace lbaft {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RepOutcome {
  bool ok = false;
  bool ciHit = false;
  Eigen::VectorXd theta;
  Eigen::VectorXd se;
};

RepOutcome run_one(const StudyScenario& s, Method m, const std::vector<SubjectRecord>& cohort,
                   double level) {
  RepOutcome out;
  FitOptions opts;
  opts.level = level;
  EstimateResult est;
  try {
    switch (m) {
      case Method::NaiveProfile:
        est = fit_naive(cohort, KernelSpec{}, opts);
        break;
      case Method::KnownH:
        est = fit_known_h(cohort, KernelSpec{},
                          s.misspecifiedAnalysisLaw ? *s.misspecifiedAnalysisLaw
                                                    : s.scenario.covariateLaw,
                          opts);
        break;
      case Method::MeanZero:
        est = fit_mean_zero(cohort, KernelSpec{}, opts);
        break;
    }
  } catch (const std::exception&) {
    return out;
  }
  // a usable replicate produced an estimate with standard errors; anything
  // less is counted as a failure, never silently dropped
  if (!est.converged || est.se.size() == 0) return out;
  out.ok = true;
  out.theta = est.thetaHat;
  out.se = est.se;
  if (m == Method::NaiveProfile) {
    out.ciHit = true;
    for (int k = 0; k < est.ci.rows(); ++k)
      if (s.scenario.theta0(k) < est.ci(k, 0) || s.scenario.theta0(k) > est.ci(k, 1))
        out.ciHit = false;
  }
  return out;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string f3(double v) {
  if (std::isnan(v)) return "--";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string join(const Eigen::VectorXd& v, std::string (*fmt)(double)) {
  std::string out;
  for (int i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt(v(i));
  }
  return out;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::NaiveProfile: return "naive";
    case Method::KnownH: return "known-h";
    case Method::MeanZero: return "mean-zero";
  }
  return "?";
}

std::vector<ScenarioResult> run_study(const StudyConfig& cfg) {
  if (cfg.scenarios.empty()) throw std::invalid_argument("run_study: no scenarios");
  if (cfg.replicates < 1) throw std::invalid_argument("run_study: replicates must be >= 1");
  if (!(cfg.ciLevel > 0.0 && cfg.ciLevel < 1.0))
    throw std::invalid_argument("run_study: ciLevel must lie in (0,1)");
  for (const auto& s : cfg.scenarios) {
    if (s.methods.empty()) throw std::invalid_argument("run_study: scenario without methods");
    if (s.scenario.n < 2) throw std::invalid_argument("run_study: scenario cohort too small");
  }

  int hw = static_cast<int>(std::thread::hardware_concurrency());
  int threads = cfg.threads > 0 ? cfg.threads : std::max(1, hw);

  std::vector<ScenarioResult> results;
  for (const auto& s : cfg.scenarios) {
    const int R = cfg.replicates;
    const int M = static_cast<int>(s.methods.size());
    std::vector<std::vector<RepOutcome>> slots(R);

    std::atomic<int> next{0};
    auto worker = [&] {
      for (;;) {
        int r = next.fetch_add(1);
        if (r >= R) return;
        std::vector<RepOutcome> row(M);
        try {
          Scenario rep = s.scenario;
          rep.seed = combine_seeds(cfg.masterSeed, s.scenario.seed, static_cast<std::uint64_t>(r));
          auto cohort = generate_cohort(rep);
          for (int m = 0; m < M; ++m) row[m] = run_one(s, s.methods[m], cohort, cfg.ciLevel);
        } catch (const std::exception&) {
          // cohort generation failed: the whole replicate fails for every method
        }
        slots[r] = std::move(row);
      }
    };
    std::vector<std::thread> pool;
    int nw = std::min(threads, R);
    pool.reserve(nw);
    for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    // replicate-order reduction: identical output for any thread count
    const int p = static_cast<int>(s.scenario.theta0.size());
    for (int m = 0; m < M; ++m) {
      ScenarioResult res;
      res.label = s.label;
      res.n = s.scenario.n;
      res.method = s.methods[m];
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
      Eigen::VectorXd sumSe = Eigen::VectorXd::Zero(p);
      int ok = 0, hits = 0;
      for (int r = 0; r < R; ++r) {
        if (slots[r].empty() || !slots[r][m].ok) continue;
        ++ok;
        sum += slots[r][m].theta;
        sumSe += slots[r][m].se;
        hits += slots[r][m].ciHit ? 1 : 0;
      }
      res.failures = R - ok;
      res.unreliable = res.failures > 0.05 * R;
      if (ok == 0) {
        res.bias = res.biasMcError = res.empiricalSE = res.meanEstimatedSE =
            Eigen::VectorXd::Constant(p, kNaN);
        res.coverage = kNaN;
      } else {
        Eigen::VectorXd mean = sum / ok;
        res.bias = mean - s.scenario.theta0;
        Eigen::VectorXd ss = Eigen::VectorXd::Zero(p);
        for (int r = 0; r < R; ++r) {
          if (slots[r].empty() || !slots[r][m].ok) continue;
          ss += (slots[r][m].theta - mean).cwiseAbs2();
        }
        res.empiricalSE = ok > 1 ? Eigen::VectorXd((ss / (ok - 1)).cwiseSqrt())
                                 : Eigen::VectorXd(Eigen::VectorXd::Zero(p));
        res.biasMcError = res.empiricalSE / std::sqrt(static_cast<double>(R));
        res.meanEstimatedSE = sumSe / ok;
        res.coverage = res.method == Method::NaiveProfile
                           ? static_cast<double>(hits) / static_cast<double>(ok)
                           : kNaN;
      }
      results.push_back(std::move(res));
    }
  }
  return results;
}

std::string table_text(const std::vector<ScenarioResult>& results) {
  if (results.empty()) throw std::invalid_argument("table_text: no results");
  int lw = 8;
  for (const auto& r : results) lw = std::max(lw, static_cast<int>(r.label.size()));
  lw += 2;
  std::ostringstream os;
  os << std::left << std::setw(lw) << "scenario" << std::setw(7) << "n" << std::setw(11)
     << "method" << std::setw(18) << "bias" << std::setw(14) << "emp.SE" << std::setw(14)
     << "mean.SE" << std::setw(8) << "CP(%)" << std::setw(6) << "fail" << "\n";
  for (const auto& r : results) {
    std::string cp = "";
    if (!std::isnan(r.coverage)) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%.1f", 100.0 * r.coverage);
      cp = buf;
    }
    os << std::left << std::setw(lw) << r.label << std::setw(7) << r.n << std::setw(11)
       << method_name(r.method) << std::setw(18) << join(r.bias, f3) << std::setw(14)
       << join(r.empiricalSE, f3) << std::setw(14) << join(r.meanEstimatedSE, f3) << std::setw(8)
       << cp << std::setw(6) << r.failures << (r.unreliable ? " unreliable" : "") << "\n";
  }
  return os.str();
}

std::string table_csv(const std::vector<ScenarioResult>& results) {
  if (results.empty()) throw std::invalid_argument("table_csv: no results");
  std::string out =
      "scenario,n,method,coordinate,bias,bias_mc_error,empirical_se,mean_estimated_se,"
      "coverage,failures,unreliable\n";
  for (const auto& r : results) {
    for (int k = 0; k < r.bias.size(); ++k) {
      out += r.label + "," + std::to_string(r.n) + "," + method_name(r.method) + "," +
             std::to_string(k + 1) + "," + g17(r.bias(k)) + "," + g17(r.biasMcError(k)) + "," +
             g17(r.empiricalSE(k)) + "," + g17(r.meanEstimatedSE(k)) + ",";
      if (!std::isnan(r.coverage)) out += g17(r.coverage);
      out += "," + std::to_string(r.failures) + "," + (r.unreliable ? "1" : "0") + "\n";
    }
  }
  return out;
}

}  // namespace lbaft
