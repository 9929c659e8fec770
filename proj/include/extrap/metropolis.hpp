#pragma once

#include <algorithm>
#include <cmath>

#include "extrap/chain.hpp"
#include "extrap/energy.hpp"
#include "extrap/proposal.hpp"
#include "extrap/rng.hpp"

namespace extrap {

struct SamplerConfig {
  int steps = 1;
  int record_every = 1;
  ProposalKernel kernel;
  double temperature = 1.0;
};

// Standard MH acceptance: min(1, exp((s' - s)/T + log q(x|x') - log q(x'|x))).
// The partition constant cancels; symmetric kernels have equal log_q terms.
inline double acceptance_probability(double s_cur, double s_prop,
                                     double log_q_fwd, double log_q_rev,
                                     double temperature = 1.0) {
  double log_a = (s_prop - s_cur) / temperature + log_q_rev - log_q_fwd;
  if (log_a >= 0.0) return 1.0;
  return std::exp(log_a);
}

// Run the chain from x0, recording every `record_every`-th state (plus x0)
// with its cached guide score. accepted[i] says whether the move into
// states[i+1] was adopted; with record_every == 1 its mean is the MH
// acceptance rate.
inline ChainRecord run_chain(const Task& task, const TokenSeq& x0,
                             const SamplerConfig& cfg, RngStream& rng) {
  if (cfg.steps < 1) throw ContractError("run_chain: steps must be >= 1");
  if (cfg.record_every < 1) throw ContractError("run_chain: record_every must be >= 1");
  if (static_cast<int>(x0.size()) != task.length) {
    throw ContractError("run_chain: x0 length does not match task");
  }

  ChainRecord rec;
  rec.task = task.name;
  rec.seed = rng.seed();
  rec.proposal = cfg.kernel.settings();
  rec.proposal["temperature"] = cfg.temperature;
  rec.proposal["steps"] = cfg.steps;
  rec.proposal["record_every"] = cfg.record_every;

  TokenSeq x = x0;
  double s = task.guide.combined(x);
  rec.states.push_back(x);
  rec.scores.push_back(s);

  long mh_accepts = 0;
  bool changed_in_window = false;
  for (int t = 1; t <= cfg.steps; ++t) {
    auto prop = cfg.kernel.propose(x, rng);
    for (int tok : prop.next) {
      if (tok < 0 || tok >= task.content_size()) {
        throw ContractError("run_chain: kernel proposed an invalid token");
      }
    }
    double sp = task.guide.combined(prop.next);
    double a = acceptance_probability(s, sp, prop.log_q_fwd, prop.log_q_rev,
                                      cfg.temperature);
    bool accept = rng.uniform01() < a;
    if (accept) {
      x = std::move(prop.next);
      s = sp;
      ++mh_accepts;
      changed_in_window = true;
    }
    if (t % cfg.record_every == 0 || t == cfg.steps) {
      rec.states.push_back(x);
      rec.scores.push_back(s);
      rec.accepted.push_back(cfg.record_every == 1 ? accept : changed_in_window);
      changed_in_window = false;
    }
  }
  rec.proposal["mh_acceptance_rate"] =
      static_cast<double>(mh_accepts) / cfg.steps;
  return rec;
}

// One epoch = as many proposals as tokens in the sequence.
inline ChainRecord run_epochs(const Task& task, const TokenSeq& x0, int epochs,
                              SamplerConfig cfg, RngStream& rng) {
  if (epochs < 1) throw ContractError("run_epochs: epochs must be >= 1");
  cfg.steps = epochs * static_cast<int>(x0.size());
  return run_chain(task, x0, cfg, rng);
}

}  // namespace extrap
