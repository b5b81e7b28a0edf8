#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "contagion/cli/commands.hpp"

using contagion::cli::CommandOptions;

namespace {

void common_flags(CLI::App* sub, CommandOptions& o, bool needs_out) {
  sub->add_option("--config", o.config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
  auto* out = sub->add_option("--out", o.out, "Output directory");
  if (needs_out) out->required();
  sub->add_option("--seed", o.seed, "Master seed (overrides run.seed)");
  sub->add_option("--workers", o.workers, "Worker threads (0 = default)")->check(CLI::NonNegativeNumber);
  sub->add_option("--grid-steps", o.grid_steps, "Time steps on [0, T] (overrides run.grid_steps)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Default contagion in interbank networks: finite clearing, particle and mean-field engines"};
  app.require_subcommand(1);
  app.set_version_flag("--version", contagion::cli::kVersion);

  CommandOptions o;

  auto* finite = app.add_subcommand("run-finite", "Greatest (or least) clearing capital over simulated paths");
  common_flags(finite, o, true);
  finite->add_option("--paths", o.paths, "Number of scenarios");

  auto* particle = app.add_subcommand("run-particle", "Distance-to-default particle system");
  common_flags(particle, o, true);
  particle->add_option("--paths", o.paths, "Number of scenarios");
  particle->add_flag("--check-equivalence", o.check_equivalence, "Compare with greatest clearing on the same paths");

  auto* mf = app.add_subcommand("run-meanfield", "Conditional mean-field problem given one common-noise path");
  common_flags(mf, o, true);
  mf->add_option("--b0-seed", o.b0_seed, "Seed of the common Brownian path");
  mf->add_option("--particles", o.particles, "Particle count");

  auto* liq = app.add_subcommand("run-liquidity", "Clearing cash accounts, alone or jointly with capital");
  common_flags(liq, o, true);
  liq->add_option("--paths", o.paths, "Number of scenarios");
  liq->add_option("--mode", o.mode, "cash or joint")->check(CLI::IsMember({"cash", "joint"}));

  auto* cont = app.add_subcommand("check-continuity", "Per-type smallness condition report");
  common_flags(cont, o, false);

  auto* fit = app.add_subcommand("fit-network", "Low-rank nonnegative fit of a liability matrix");
  common_flags(fit, o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"error", "UsageError"}, {"message", e.what()}}.dump() << '\n';
    return contagion::cli::kExitValidation;
  }
  o.command = app.get_subcommands().front()->get_name();
  return contagion::cli::run_command(o, std::cout, std::cerr);
}
