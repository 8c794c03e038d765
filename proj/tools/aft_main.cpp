#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lbaft/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"accelerated lifetime estimation for biased duration samples"};
  app.require_subcommand(1);

  std::string simConfig, simOut;
  CLI::App* sim = app.add_subcommand("simulate", "generate a cohort CSV from a scenario config");
  sim->add_option("config", simConfig, "scenario JSON path")->required();
  sim->add_option("out", simOut, "output CSV path")->required();

  lbaft::FitCommand fc;
  std::string methodName = "naive";
  CLI::App* fit = app.add_subcommand("fit", "estimate coefficients from a dataset CSV");
  fit->add_option("data", fc.dataPath, "dataset CSV path")->required();
  fit->add_option("--method", methodName, "naive, known-h or mean-zero")->capture_default_str();
  fit->add_option("--scheme", fc.scheme, "observation scheme of the dataset")
      ->capture_default_str();
  fit->add_option("--level", fc.level, "confidence level")->capture_default_str();
  fit->add_option("--bandwidth", fc.bandwidth, "kernel bandwidth override (0: from data)");
  fit->add_option("--analysis-law", fc.analysisLawJson,
                  "covariate-law JSON object, required by known-h");
  fit->add_option("--labels", fc.labels, "covariate labels for the ratio table")->delimiter(',');
  fit->add_option("--reference-levels", fc.referenceLevels,
                  "labels appended to the ratio table as reference rows")
      ->delimiter(',');

  lbaft::StudyCommand stc;
  CLI::App* study = app.add_subcommand("study", "run a Monte Carlo study config");
  study->add_option("config", stc.configPath, "study JSON path")->required();
  study->add_option("out", stc.outPath, "results CSV path")->required();
  study->add_option("--threads", stc.threads, "worker threads (default: one per hardware thread)");
  study->add_option("--replicates", stc.replicates, "override the config's replicate count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (sim->parsed()) return lbaft::cmd_simulate(simConfig, simOut, std::cerr);
  if (fit->parsed()) {
    try {
      fc.method = lbaft::parse_method_name(methodName);
    } catch (const std::exception& e) {
      std::cerr << "fit: " << e.what() << "\n";
      return 2;
    }
    return lbaft::cmd_fit(fc, std::cout, std::cerr);
  }
  return lbaft::cmd_study(stc, std::cout, std::cerr);
}
