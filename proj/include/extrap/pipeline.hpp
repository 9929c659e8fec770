#pragma once

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "extrap/ablations.hpp"
#include "extrap/config.hpp"
#include "extrap/jsonl.hpp"
#include "extrap/motif.hpp"

namespace extrap {

// ---- task / kernel wiring -------------------------------------------------

inline Task make_task(const RunConfig& cfg) {
  const auto& t = cfg.task();
  const std::string family = t.at("family");
  if (family == "toy") {
    return make_toy_task(t.at("length"));
  }
  MotifConfig mc;
  mc.length = t.at("length");
  mc.vocab = t.at("vocab");
  mc.task_seed = t.at("seed");
  mc.training_range = {t.at("range")[0], t.at("range")[1]};
  mc.initial_band = {t.at("x0_band")[0], t.at("x0_band")[1]};
  mc.pool_size = t.at("pool_size");
  mc.guide_weight = t.at("guide_weight");
  mc.guide_fit.epochs = t.at("guide_fit").at("epochs");
  mc.guide_fit.lr = t.at("guide_fit").at("lr");
  mc.guide_fit.batch = t.at("guide_fit").at("batch");
  return make_guide_oracle_task(mc).task;
}

inline SamplerConfig make_sampler_config(const RunConfig& cfg, const Task& task) {
  const auto& s = cfg.sampler();
  SamplerConfig sc;
  const int epochs = s.at("epochs");
  sc.steps = epochs > 0 ? epochs * task.length : s.at("steps").get<int>();
  sc.record_every = s.at("record_every");
  sc.temperature = s.at("temperature");

  MaskSelector sel;
  const std::string mask = s.at("mask");
  if (mask == "full") {
    sel.kind = MaskSelector::Kind::kFullBlock;
  } else if (mask == "span") {
    sel.kind = MaskSelector::Kind::kSpan;
    sel.span_len = s.at("span");
  } else if (mask == "bernoulli") {
    sel.kind = MaskSelector::Kind::kBernoulli;
    sel.rate = s.at("mask_rate");
  } else {
    throw ConfigError("sampler.mask must be full, span or bernoulli");
  }

  const std::string kernel = s.at("kernel");
  if (kernel == "block-flip") {
    sc.kernel = ProposalKernel::block_flip(task.length, task.content_size());
  } else if (kernel == "uniform-infill") {
    sc.kernel = ProposalKernel::uniform_infill(sel, task.length, task.content_size());
  } else if (kernel == "mask-infill") {
    if (task.fill_log_probs) {
      sc.kernel = ProposalKernel::mask_infill(sel, *task.fill_log_probs);
    } else {
      sc.kernel = ProposalKernel::uniform_infill(sel, task.length, task.content_size());
    }
  } else {
    throw ConfigError("sampler.kernel must be block-flip, mask-infill or uniform-infill");
  }
  return sc;
}

inline CellConfig make_cell_config(const RunConfig& cfg) {
  CellConfig cc;
  cc.strategy = cfg.strategy();
  cc.train = cfg.ar_train();
  cc.mode = cfg.reward_mode();
  cc.decode = cfg.decode();
  cc.max_states = cfg.max_states();
  cc.eval_inputs = cfg.eval_block().at("inputs");
  cc.bins = cfg.model().at("bins");
  cc.thresholds = cfg.eval_block().at("thresholds").get<std::vector<double>>();
  return cc;
}

// ---- rollout jsonl ---------------------------------------------------------

inline nlohmann::json rollout_to_json(const Rollout& r) {
  nlohmann::json j{{"v", 1},
                   {"x0", r.x0},
                   {"states", r.states},
                   {"scores", nlohmann::json::array()},
                   {"iterations", r.iterations},
                   {"stop", r.stop_reason}};
  for (double s : r.scores) {
    if (std::isnan(s)) j["scores"].push_back(nullptr);
    else j["scores"].push_back(s);
  }
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline Rollout rollout_from_json(const nlohmann::json& j) {
  if (j.value("v", 0) != 1) throw StructuralError("rollout record: bad schema version");
  Rollout r;
  r.x0 = j.at("x0").get<TokenSeq>();
  r.states = j.at("states").get<std::vector<TokenSeq>>();
  for (const auto& s : j.at("scores")) {
    r.scores.push_back(s.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                   : s.get<double>());
  }
  r.iterations = j.at("iterations");
  r.stop_reason = j.at("stop").get<std::string>();
  r.error = j.value("error", "");
  return r;
}

inline void write_rollouts(const std::string& path, const ArtifactHeader& h,
                           const std::vector<Rollout>& rollouts) {
  write_jsonl(path, h, rollouts, rollout_to_json);
}

inline std::vector<Rollout> read_rollouts(const std::string& path,
                                          ArtifactHeader* header = nullptr) {
  return read_jsonl<Rollout>(path, "rollouts", rollout_from_json, header);
}

// ---- shared command plumbing -----------------------------------------------

struct CommandIo {
  std::filesystem::path out;
  std::string config_hash;

  std::string path(const std::string& name) const { return (out / name).string(); }

  ArtifactHeader header(const std::string& kind, std::uint64_t seed) const {
    return ArtifactHeader{kind, config_hash, seed};
  }
};

inline CommandIo prepare_io(const RunConfig& cfg) {
  CommandIo io;
  io.out = cfg.out_dir();
  io.config_hash = cfg.hash();
  std::filesystem::create_directories(io.out);
  cfg.write_resolved(io.path("resolved_config.json"));
  return io;
}

template <typename Fn>
auto with_upstream(const std::string& artifact, const std::string& producer, Fn fn)
    -> decltype(fn()) {
  try {
    return fn();
  } catch (const ArtifactError& e) {
    throw ArtifactError(std::string(e.what()) + "\n  " + artifact +
                        " is produced by `extrap " + producer +
                        "`; run it first with the same config");
  }
}

// ---- commands ---------------------------------------------------------------

inline int cmd_sample(const RunConfig& cfg, int jobs = 1) {
  CommandIo io = prepare_io(cfg);
  Task task = make_task(cfg);
  SamplerConfig sc = make_sampler_config(cfg, task);
  const std::uint64_t seed = cfg.primary_seed();
  const int n_chains = cfg.sampler().at("chains");

  std::vector<ChainRecord> chains(n_chains);
  auto run_range = [&](int lo, int hi) {
    for (int c = lo; c < hi; ++c) {
      RngStream rng = RngStream(seed).derive(c);
      TokenSeq x0 = task.sample_initial(rng);
      chains[c] = run_chain(task, x0, sc, rng);
    }
  };
  if (jobs <= 1 || n_chains < 2) {
    run_range(0, n_chains);
  } else {
    int stride = (n_chains + jobs - 1) / jobs;
    std::vector<std::future<void>> futs;
    for (int w = 0; w < jobs; ++w) {
      int lo = w * stride, hi = std::min(n_chains, lo + stride);
      if (lo >= hi) break;
      futs.push_back(std::async(std::launch::async, run_range, lo, hi));
    }
    for (auto& f : futs) f.get();
  }
  write_chains(io.path("chains.jsonl"), io.header("chains", seed), chains);

  double mean_acc = 0.0;
  for (const auto& c : chains) mean_acc += c.proposal.at("mh_acceptance_rate").get<double>();
  std::cout << "sample: " << n_chains << " chains x " << sc.steps
            << " steps, mean acceptance " << std::fixed << std::setprecision(3)
            << mean_acc / n_chains << " -> " << io.path("chains.jsonl") << "\n";
  return 0;
}

inline int cmd_episodes(const RunConfig& cfg) {
  CommandIo io = prepare_io(cfg);
  auto chains = with_upstream("chains.jsonl", "sample",
                              [&] { return read_chains(io.path("chains.jsonl")); });
  SelectionCounts counts;
  auto episodes = select_episodes(chains, cfg.strategy(), &counts);
  if (episodes.empty()) throw TrainingError("episodes: every chain was discarded");
  write_episodes(io.path("episodes.jsonl"),
                 io.header("episodes", cfg.primary_seed()), episodes);
  std::cout << "episodes: kept " << counts.kept << ", discarded "
            << counts.discarded << " -> " << io.path("episodes.jsonl") << "\n";
  return 0;
}

inline int cmd_train(const RunConfig& cfg) {
  CommandIo io = prepare_io(cfg);
  auto episodes = with_upstream("episodes.jsonl", "episodes",
                                [&] { return read_episodes(io.path("episodes.jsonl")); });
  if (episodes.empty()) throw ArtifactError("episodes.jsonl holds no episodes");
  Task task = make_task(cfg);
  const std::uint64_t seed = cfg.primary_seed();
  const std::string kind = cfg.model().at("kind");

  ExtrapolatorCheckpoint ck;
  if (kind == "mlp") {
    std::vector<std::pair<TokenSeq, TokenSeq>> pairs;
    for (const auto& ep : episodes) {
      for (std::size_t t = 1; t < ep.states.size(); ++t) {
        pairs.push_back({ep.states[t - 1], ep.states[t]});
      }
    }
    RngStream rng = RngStream(seed).derive(1);
    ck = train_mlp(pairs, cfg.mlp_train(), rng);
  } else {
    std::vector<double> scores;
    for (const auto& ep : episodes) {
      scores.insert(scores.end(), ep.scores.begin(), ep.scores.end());
    }
    ScoreBinner binner = ScoreBinner::fit(scores, cfg.model().at("bins"));
    StrategyConfig strat = cfg.strategy();
    Vocabulary vocab = Vocabulary::build(task.content_labels,
                                         std::max(strat.cap, strat.n),
                                         cfg.model().at("bins").get<int>());
    RewardMode mode = cfg.reward_mode();
    std::vector<std::vector<int>> encoded;
    EncodeStats stats;
    for (const auto& ep : episodes) {
      encoded.push_back(encode_episode(ep, vocab, binner, mode, &stats));
    }
    RngStream rng = RngStream(seed).derive(1);
    ck = train_ar(encoded, vocab, binner, mode, cfg.ar_train(), rng);
    ck.train_stats["clamped_scores"] = stats.clamped_scores;
  }
  ck.config_hash = io.config_hash;
  ck.save(io.path("checkpoint.json"));
  std::cout << "train: " << kind << " model, final epoch loss "
            << ck.train_stats.at("final_epoch_loss").get<double>() << " -> "
            << io.path("checkpoint.json") << "\n";
  return 0;
}

inline int cmd_generate(const RunConfig& cfg, int jobs = 1) {
  CommandIo io = prepare_io(cfg);
  auto ck = with_upstream("checkpoint.json", "train", [&] {
    return ExtrapolatorCheckpoint::load(io.path("checkpoint.json"));
  });
  Task task = make_task(cfg);
  const std::uint64_t seed = cfg.primary_seed();

  RngStream input_rng = RngStream(seed).derive(2);
  const int n = cfg.eval_block().at("inputs");
  std::vector<TokenSeq> inputs;
  for (int i = 0; i < n; ++i) inputs.push_back(task.sample_initial(input_rng));

  std::vector<Rollout> rollouts;
  if (ck.kind == "mlp") {
    ScoreFn guide = [&task](const TokenSeq& x) { return task.guide.combined(x); };
    for (const auto& x0 : inputs) {
      rollouts.push_back(rollout_mlp(ck, x0, cfg.max_states(), guide));
    }
  } else {
    ScoreFn guide = [&task](const TokenSeq& x) { return task.guide.combined(x); };
    rollouts = batch_generate(ck, inputs, ck.mode, cfg.max_states(), guide,
                              cfg.decode(), RngStream(seed).derive(3), jobs);
  }
  write_rollouts(io.path("rollouts.jsonl"), io.header("rollouts", seed), rollouts);
  double mean_iters = 0;
  for (const auto& r : rollouts) mean_iters += r.iterations;
  std::cout << "generate: " << rollouts.size() << " rollouts, mean iterations "
            << mean_iters / rollouts.size() << " -> " << io.path("rollouts.jsonl")
            << "\n";
  return 0;
}

inline void write_metrics_csv(const std::string& path, const MetricsReport& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArtifactError("cannot write " + path);
  out << "metric,value\n";
  out << "samples," << m.samples << "\n";
  for (std::size_t i = 0; i < m.thresholds.size(); ++i) {
    out << "threshold_" << m.thresholds[i] << "," << m.threshold_fracs[i] << "\n";
  }
  out << "training_rate," << m.training_rate << "\n";
  out << "extrapolation_rate," << m.extrapolation << "\n";
  out << "mean_iterations," << m.mean_iterations << "\n";
  out << "median_iterations," << m.median_iterations << "\n";
  out << "unique_fraction," << m.unique_fraction << "\n";
  out << "mean_overlap4," << m.mean_overlap4 << "\n";
}

inline void print_metrics(const MetricsReport& m) {
  std::cout << "  samples            " << m.samples << "\n";
  for (std::size_t i = 0; i < m.thresholds.size(); ++i) {
    std::cout << "  frac >= " << std::setw(8) << m.thresholds[i] << "   "
              << std::fixed << std::setprecision(3) << m.threshold_fracs[i] << "\n";
  }
  std::cout << "  training rate      " << m.training_rate << "\n"
            << "  extrapolation rate " << m.extrapolation << "\n"
            << "  iterations         mean " << m.mean_iterations << ", median "
            << m.median_iterations << "\n"
            << "  unique fraction    " << m.unique_fraction << "\n"
            << "  4-gram overlap     " << m.mean_overlap4 << "\n";
}

inline int cmd_eval(const RunConfig& cfg, bool force = false) {
  CommandIo io = prepare_io(cfg);
  ArtifactHeader header;
  auto rollouts = with_upstream("rollouts.jsonl", "generate", [&] {
    return read_rollouts(io.path("rollouts.jsonl"), &header);
  });
  if (rollouts.empty()) throw ConfigError("eval: rollouts.jsonl holds no rollouts");
  if (!force && !header.config_hash.empty() && header.config_hash != io.config_hash) {
    throw ArtifactError(
        "eval: rollouts.jsonl was produced under config " + header.config_hash +
        " but the current config hashes to " + io.config_hash +
        "; pass --force to evaluate anyway");
  }
  Task task = make_task(cfg);

  std::vector<double> oracle_scores, iters;
  std::vector<TokenSeq> finals;
  for (const auto& r : rollouts) {
    const TokenSeq& f = r.final_state();
    oracle_scores.push_back(static_cast<int>(f.size()) == task.length
                                ? task.oracle(f)
                                : task.oracle(r.x0));
    iters.push_back(r.iterations);
    finals.push_back(f);
  }
  auto thresholds = cfg.eval_block().at("thresholds").get<std::vector<double>>();
  MetricsReport m = compute_metrics(oracle_scores, iters, finals,
                                    task.training_range, thresholds);
  write_metrics_csv(io.path("metrics.csv"), m);
  std::cout << "eval: " << rollouts.size() << " rollouts\n";
  print_metrics(m);
  std::cout << "-> " << io.path("metrics.csv") << "\n";
  return 0;
}

inline void write_cells_csv(const std::string& path,
                            const std::vector<CellResult>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArtifactError("cannot write " + path);
  out << "cell,seed,samples,training_rate,extrapolation_rate,mean_iterations,"
         "median_iterations,unique_fraction,mean_overlap4,bin_agreement,"
         "kept_episodes,failed,error\n";
  for (const auto& r : rows) {
    out << r.cell << "," << r.seed << "," << r.metrics.samples << ","
        << r.metrics.training_rate << "," << r.metrics.extrapolation << ","
        << r.metrics.mean_iterations << "," << r.metrics.median_iterations << ","
        << r.metrics.unique_fraction << "," << r.metrics.mean_overlap4 << ",";
    if (std::isnan(r.bin_agreement)) out << "";
    else out << r.bin_agreement;
    out << "," << r.kept_episodes << "," << (r.failed ? 1 : 0) << ","
        << r.error << "\n";
  }
}

inline void print_cells(const std::vector<CellResult>& rows) {
  std::cout << std::left << std::setw(14) << "cell" << std::setw(8) << "seed"
            << std::setw(10) << "extrap" << std::setw(10) << "training"
            << std::setw(10) << "med.iter" << std::setw(10) << "unique"
            << "status\n";
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(14) << r.cell << std::setw(8) << r.seed
              << std::setw(10) << std::fixed << std::setprecision(3)
              << r.metrics.extrapolation << std::setw(10) << r.metrics.training_rate
              << std::setw(10) << r.metrics.median_iterations << std::setw(10)
              << r.metrics.unique_fraction << (r.failed ? "FAILED " + r.error : "ok")
              << "\n";
  }
}

inline int cmd_ablate(const RunConfig& cfg, const std::string& which, int jobs = 1) {
  CommandIo io = prepare_io(cfg);
  Task task = make_task(cfg);
  CellConfig cell = make_cell_config(cfg);
  cell.jobs = jobs;
  auto seeds = cfg.seeds();

  if (which == "mcmc-continue") {
    auto ck = with_upstream("checkpoint.json", "train", [&] {
      return ExtrapolatorCheckpoint::load(io.path("checkpoint.json"));
    });
    SamplerConfig sc = make_sampler_config(cfg, task);
    const int epochs = cfg.eval_block().at("mcmc_epochs");
    std::ofstream out(io.path("mcmc_continuation.csv"), std::ios::trunc);
    out << "seed,epoch,mcmc_best_oracle,qtheta_oracle,qtheta_iterations\n";
    for (std::uint64_t seed : seeds) {
      RngStream rng = RngStream(seed).derive(7);
      TokenSeq x0 = task.sample_initial(rng);
      auto curve = compare_mcmc_continuation(task, x0, epochs, sc, ck,
                                             cfg.max_states(), ck.mode,
                                             cfg.decode(), seed);
      for (std::size_t e = 0; e < curve.best_oracle_per_epoch.size(); ++e) {
        out << seed << "," << e << "," << curve.best_oracle_per_epoch[e] << ","
            << curve.qtheta_score << "," << curve.qtheta_iterations << "\n";
      }
      std::cout << "seed " << seed << ": mcmc best "
                << curve.best_oracle_per_epoch.back() << " after " << epochs
                << " epochs vs model " << curve.qtheta_score << " in "
                << curve.qtheta_iterations << " steps\n";
    }
    std::cout << "-> " << io.path("mcmc_continuation.csv") << "\n";
    return 0;
  }

  auto chains = with_upstream("chains.jsonl", "sample",
                              [&] { return read_chains(io.path("chains.jsonl")); });
  std::vector<CellResult> rows;
  std::string csv;
  if (which == "reward-mode") {
    rows = ablate_reward_mode(task, chains, cell,
                              {RewardMode::kNone, RewardMode::kReal,
                               RewardMode::kPredicted},
                              seeds);
    csv = "ablate_reward_mode.csv";
  } else if (which == "episode-length") {
    rows = ablate_episode_length(task, chains, cell, {2, 3, 4, 5, 6, 7, 8}, seeds);
    csv = "ablate_episode_length.csv";
  } else if (which == "chain-length") {
    rows = ablate_chain_truncation(task, chains, cell, {0.25, 0.5, 1.0}, seeds);
    csv = "ablate_chain_truncation.csv";
  } else {
    throw ConfigError("unknown ablation: " + which +
                      " (reward-mode|episode-length|chain-length|mcmc-continue)");
  }
  write_cells_csv(io.path(csv), rows);
  print_cells(rows);
  std::cout << "-> " << io.path(csv) << "\n";
  return 0;
}

// ---- toy report ------------------------------------------------------------

struct ToySeedReport {
  std::uint64_t seed = 0;
  double acceptance_rate = 0.0;
  double best_reward = 0.0;
  long improving_transitions = 0;
  std::vector<double> trajectory;  // rewards of x0..x5
  bool reached_optimum = false;
};

inline ToySeedReport run_toy_seed(const RunConfig& cfg, std::uint64_t seed,
                                  const std::string& ckpt_path = "") {
  Task task = make_task(cfg);
  SamplerConfig sc = make_sampler_config(cfg, task);
  RngStream chain_rng = RngStream(seed).derive(0);
  TokenSeq x0 = task.sample_initial(chain_rng);
  ChainRecord chain = run_chain(task, x0, sc, chain_rng);

  ToySeedReport rep;
  rep.seed = seed;
  rep.acceptance_rate = chain.proposal.at("mh_acceptance_rate");
  double best_log = *std::max_element(chain.scores.begin(), chain.scores.end());
  rep.best_reward = std::exp(best_log);

  ChainRecord dd = dedup_chain(chain);
  std::vector<std::pair<TokenSeq, TokenSeq>> pairs;
  for (std::size_t t = 1; t < dd.states.size(); ++t) {
    if (dd.scores[t] > dd.scores[t - 1]) {
      pairs.push_back({dd.states[t - 1], dd.states[t]});
    }
  }
  rep.improving_transitions = static_cast<long>(pairs.size());

  RngStream train_rng = RngStream(seed).derive(1);
  auto ck = train_mlp(pairs, cfg.mlp_train(), train_rng);
  if (!ckpt_path.empty()) {
    ck.save(ckpt_path);
  }

  ScoreFn guide = [&task](const TokenSeq& x) { return task.guide.combined(x); };
  Rollout roll = rollout_mlp(ck, x0, cfg.max_states(), guide);
  rep.trajectory.push_back(std::exp(task.guide.combined(x0)));
  for (double s : roll.scores) rep.trajectory.push_back(std::exp(s));
  const double optimum = std::exp(5.75);
  for (double r : rep.trajectory) {
    if (std::abs(r - optimum) <= 0.01) rep.reached_optimum = true;
  }
  return rep;
}

inline int cmd_toy(const RunConfig& cfg) {
  CommandIo io = prepare_io(cfg);
  auto seeds = cfg.seeds();
  std::ofstream csv(io.path("toy_report.csv"), std::ios::trunc);
  csv << "seed,acceptance_rate,best_mcmc_reward,improving_transitions,"
         "r0,r1,r2,r3,r4,r5,reached_optimum\n";

  std::cout << "toy run (reference: acceptance 43.7%, best MCMC reward 244.7, "
               "~2000 transitions,\n         rollout rewards 1, 3.3, 15.6, 314.2, 314.2)\n";
  std::cout << std::left << std::setw(8) << "seed" << std::setw(12) << "accept%"
            << std::setw(12) << "best" << std::setw(8) << "pairs"
            << "trajectory\n";
  double acc_sum = 0;
  for (std::uint64_t seed : seeds) {
    auto rep = run_toy_seed(cfg, seed,
                            io.path("toy_ckpt_" + std::to_string(seed) + ".json"));
    acc_sum += rep.acceptance_rate;
    csv << rep.seed << "," << rep.acceptance_rate << "," << rep.best_reward << ","
        << rep.improving_transitions;
    std::cout << std::left << std::setw(8) << rep.seed << std::setw(12)
              << std::fixed << std::setprecision(1) << rep.acceptance_rate * 100
              << std::setw(12) << std::setprecision(1) << rep.best_reward
              << std::setw(8) << rep.improving_transitions;
    for (double r : rep.trajectory) {
      csv << "," << r;
      std::cout << std::setprecision(1) << r << " ";
    }
    csv << "," << (rep.reached_optimum ? 1 : 0) << "\n";
    std::cout << (rep.reached_optimum ? " [optimum]" : "") << "\n";
  }
  std::cout << "mean acceptance " << std::setprecision(1)
            << 100 * acc_sum / seeds.size() << "% -> " << io.path("toy_report.csv")
            << "\n";
  return 0;
}

}  // namespace extrap
