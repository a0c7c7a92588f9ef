#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rrph/cli.hpp"

int main(int argc, char** argv) {
  using namespace rrph::cli;
  CLI::App app{"Phase-type models with random rewards: simulation, exact distributions and EM fits"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Draw observations from a model file as CSV");
  simulate->add_option("model", sim.model_file, "Model JSON")->required();
  simulate->add_option("--n", sim.n, "Number of observations");
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--out", sim.out, "Output CSV (default stdout)");

  FitOptions fit;
  std::string covariates;
  auto* fitcmd = app.add_subcommand("fit", "Estimate parameters by EM from an observation CSV");
  fitcmd->add_option("data", fit.data_file, "CSV with id,y1,y2[,x...]")->required();
  fitcmd->add_option("--model", fit.model, "iem, bernoulli or geometric")
      ->check(CLI::IsMember({"iem", "bernoulli", "geometric"}));
  fitcmd->add_option("--d", fit.d, "Number of states or severity levels");
  fitcmd->add_option("--rewards", fit.rewards, "IEM rewards: free or linear")
      ->check(CLI::IsMember({"free", "linear"}));
  fitcmd->add_option("--covariates", covariates, "Comma-separated covariate columns");
  fitcmd->add_option("--max-iter", fit.max_iter, "EM iteration cap");
  fitcmd->add_option("--min-var", fit.min_var, "Stop when the parameter change falls below this");
  fitcmd->add_option("--fix", fit.fix, "Hold a parameter at a value, name=value (repeatable)");
  fitcmd->add_option("--init", fit.init_file, "Model JSON with starting values");
  fitcmd->add_option("--out", fit.out, "Output JSON report (default stdout)");

  PmfOptions pmf;
  auto* pmfcmd = app.add_subcommand("pmf", "Tabulate the joint PMF, or random vs fixed rewards");
  pmfcmd->add_option("model", pmf.model_file, "Model JSON")->required();
  pmfcmd->add_option("--y1-max", pmf.y1_max, "Largest y1 (reward) value");
  pmfcmd->add_option("--y2-max", pmf.y2_max, "Largest y2 value");
  pmfcmd->add_flag("--compare-fixed", pmf.compare_fixed,
                   "For dph models with rewards: P(psi = k) under random and mean-fixed rewards");
  pmfcmd->add_option("--out", pmf.out, "Output CSV (default stdout)");

  PmfOptions cmp;
  auto* cmpcmd = app.add_subcommand("compare", "Random against mean-fixed rewards as a JSON summary");
  cmpcmd->add_option("model", cmp.model_file, "dph model JSON with a rewards list")->required();
  cmpcmd->add_option("--max-reward", cmp.y1_max, "Largest reward value tabulated");
  cmpcmd->add_option("--out", cmp.out, "Output JSON (default stdout)");

  PgfOptions pgf;
  auto* pgfcmd = app.add_subcommand("pgf", "Evaluate the compact and expanded PGFs on a grid");
  pgfcmd->add_option("model", pgf.model_file, "Model JSON")->required();
  pgfcmd->add_option("--grid", pgf.grid, "Theta values used on both axes")->delimiter(',');
  pgfcmd->add_option("--out", pgf.out, "Output CSV (default stdout)");

  ReplicateOptions rep;
  auto* repcmd = app.add_subcommand("replicate", "Run a simulation study, one CSV row per replicate");
  repcmd->add_option("study", rep.study,
                     "bernoulli-toy, geometric-toy, iem-reward-regression or iem-free-rewards")
      ->required();
  repcmd->add_option("--replicates", rep.replicates, "Number of replicates");
  repcmd->add_option("--n", rep.n, "Observations per replicate");
  repcmd->add_option("--seed", rep.seed, "Random seed");
  repcmd->add_option("--max-iter", rep.max_iter, "EM iteration cap");
  repcmd->add_option("--min-var", rep.min_var, "Stop when the parameter change falls below this");
  repcmd->add_option("--out", rep.out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  if (*simulate) return cmd_simulate(sim, std::cout, std::cerr);
  if (*fitcmd) {
    std::string cell;
    for (char c : covariates + ",") {
      if (c == ',') {
        if (!cell.empty()) fit.covariates.push_back(cell);
        cell.clear();
      } else {
        cell += c;
      }
    }
    return cmd_fit(fit, std::cout, std::cerr);
  }
  if (*pmfcmd) return cmd_pmf(pmf, std::cout, std::cerr);
  if (*cmpcmd) return cmd_compare(cmp, std::cout, std::cerr);
  if (*pgfcmd) return cmd_pgf(pgf, std::cout, std::cerr);
  return cmd_replicate(rep, std::cout, std::cerr);
}
