// Pipeline entry point: sample chains from the surrogate energy model,
// distill them into training episodes, fit an extrapolator, generate
// refinements and evaluate them against the oracle.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "extrap/pipeline.hpp"

using namespace extrap;

int main(int argc, char** argv) {
  CLI::App app{"extrap: extrapolative sequence transformations from Markov chains"};
  app.require_subcommand(1);

  std::string preset;
  std::string config_path;
  std::string out_override;
  std::optional<std::uint64_t> seed_override;
  int jobs = 1;
  bool force = false;
  std::string ablation;

  const char* env_out = std::getenv("EXTRAP_OUT");

  app.add_option("--preset", preset, "named preset: toy or motif");
  app.add_option("--config", config_path, "config file (json; merged over the preset)");
  app.add_option("--seed", seed_override, "override the seed list with one seed");
  app.add_option("--out", out_override, "output directory");
  app.add_option("--jobs", jobs, "parallel workers for chains/rollouts");

  auto* sample = app.add_subcommand("sample", "run MCMC and write chains.jsonl");
  auto* episodes = app.add_subcommand("episodes", "subsample chains into episodes.jsonl");
  auto* train = app.add_subcommand("train", "fit the extrapolator checkpoint");
  auto* generate = app.add_subcommand("generate", "roll out the checkpoint, write rollouts.jsonl");
  auto* eval = app.add_subcommand("eval", "score rollouts with the oracle, write metrics.csv");
  eval->add_flag("--force", force, "accept mixed-provenance inputs");
  auto* ablate = app.add_subcommand("ablate", "run an ablation table");
  ablate->add_option("which", ablation,
                     "reward-mode | episode-length | chain-length | mcmc-continue")
      ->required();
  auto* toy = app.add_subcommand("toy", "reproduce the toy pipeline end to end");

  CLI11_PARSE(app, argc, argv);

  try {
    if (out_override.empty() && env_out && *env_out) {
      // env var supplies the default output root; presets append their name
      out_override = std::string(env_out);
    }
    RunConfig cfg = RunConfig::resolve(preset, config_path, seed_override, out_override);
    if (sample->parsed()) return cmd_sample(cfg, jobs);
    if (episodes->parsed()) return cmd_episodes(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (generate->parsed()) return cmd_generate(cfg, jobs);
    if (eval->parsed()) return cmd_eval(cfg, force);
    if (ablate->parsed()) return cmd_ablate(cfg, ablation, jobs);
    if (toy->parsed()) return cmd_toy(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ArtifactError& e) {
    std::cerr << "artifact error: " << e.what() << "\n";
    return 3;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
