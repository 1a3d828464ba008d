// pdpm_var: simulate | fit | evaluate | summarize | forecast.
// Exit codes: 0 ok, 1 config/usage, 2 IO, 3 numerical abort.
// PDPM_THREADS sets the worker-thread count when --threads is not given.

#include <CLI11.hpp>

#include "pdpm/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-subject nonparametric Bayesian VAR (PDPM-VAR, lgPDPM-VAR, rgPDPM-VAR)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pdpm::kSoftwareVersion);

  pdpm::SimulateOptions sim;
  std::uint64_t sim_seed = 0;
  auto* s = app.add_subcommand("simulate", "Generate a simulation-study dataset with ground truth");
  s->add_option("--config", sim.config, "simulation config (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--out", sim.out, "output directory")->required();
  auto* s_seed = s->add_option("--seed", sim_seed, "master seed (overrides the config)");

  pdpm::FitOptions fit;
  std::uint64_t fit_seed = 0;
  int fit_chains = 0;
  std::string fit_config;
  auto* f = app.add_subcommand("fit", "Run the Gibbs sampler and store posterior draws");
  f->add_option("--manifest", fit.manifest, "dataset manifest (JSON)")->required()->check(CLI::ExistingFile);
  f->add_option("--config", fit_config, "run config (JSON)")->check(CLI::ExistingFile);
  f->add_option("--out", fit.out, "output directory")->required();
  auto* f_seed = f->add_option("--seed", fit_seed, "master seed (overrides the config)");
  auto* f_chains = f->add_option("--chains", fit_chains, "number of chains");
  f->add_option("--threads", fit.threads, "worker threads for chains (default $PDPM_THREADS or 1)");
  f->add_flag("--standardize", fit.standardize, "center and scale each node's time course");

  pdpm::EvaluateOptions ev;
  std::string ev_manifest, ev_truth, ev_out, ev_rep;
  auto* e = app.add_subcommand("evaluate", "Score a fit against the simulation truth");
  e->add_option("--draws", ev.draws, "fit output directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--manifest", ev_manifest, "manifest (for the truth path and forecast holdouts)")->check(CLI::ExistingFile);
  e->add_option("--truth", ev_truth, "truth archive (overrides the manifest entry)");
  e->add_option("--out", ev_out, "metrics table path (default DRAWS/metrics.csv)");
  e->add_option("--replicate", ev_rep, "replicate label for the table");
  e->add_option("--horizon", ev.horizon, "forecast horizon")->check(CLI::PositiveNumber);

  pdpm::SummarizeOptions su;
  std::string su_groups, su_out;
  auto* m = app.add_subcommand("summarize", "Selection tables, similarity matrices and point clusterings");
  m->add_option("--draws", su.draws, "fit output directory")->required()->check(CLI::ExistingDirectory);
  m->add_option("--fdr", su.fdr, "FDR level q");
  m->add_option("--groups", su_groups, "CSV id,group for a two-group contrast")->check(CLI::ExistingFile);
  m->add_option("--out", su_out, "output directory (default DRAWS/summary)");

  pdpm::ForecastOptions fc;
  std::string fc_out;
  auto* p = app.add_subcommand("forecast", "Forecasts from posterior-mean coefficients");
  p->add_option("--draws", fc.draws, "fit output directory")->required()->check(CLI::ExistingDirectory);
  p->add_option("--manifest", fc.manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  p->add_option("--horizon", fc.horizon, "forecast horizon");
  p->add_option("--out", fc_out, "output directory (default DRAWS/forecast)");
  p->add_flag("--errors", fc.errors, "require holdouts and write per-step errors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 1;
  }

  if (*s) {
    if (*s_seed) sim.seed = sim_seed;
    return pdpm::run_command([&] { pdpm::cmd_simulate(sim); });
  }
  if (*f) {
    if (*f_seed) fit.seed = fit_seed;
    if (*f_chains) fit.chains = fit_chains;
    if (!fit_config.empty()) fit.config = fit_config;
    return pdpm::run_command([&] { pdpm::cmd_fit(fit); });
  }
  if (*e) {
    if (!ev_manifest.empty()) ev.manifest = ev_manifest;
    if (!ev_truth.empty()) ev.truth = ev_truth;
    if (!ev_out.empty()) ev.out = ev_out;
    if (!ev_rep.empty()) ev.replicate = ev_rep;
    return pdpm::run_command([&] { pdpm::cmd_evaluate(ev); });
  }
  if (*m) {
    if (!su_groups.empty()) su.groups = su_groups;
    if (!su_out.empty()) su.out = su_out;
    return pdpm::run_command([&] { pdpm::cmd_summarize(su); });
  }
  if (*p) {
    if (!fc_out.empty()) fc.out = fc_out;
    return pdpm::run_command([&] { pdpm::cmd_forecast(fc); });
  }
  return 1;
}
