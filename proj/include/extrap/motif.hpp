#pragma once

#include <memory>
#include <sstream>
#include <vector>

#include "extrap/energy.hpp"
#include "extrap/proposal.hpp"
#include "extrap/train.hpp"

namespace extrap {

// Synthetic guide/oracle family. The oracle scores position-weighted
// matches against a hidden target pattern (weights (i+1)/L, maximum
// (L+1)/2); the guide is an MLP regressor fit only on sequences whose
// oracle value lies in the training range, so the global optimum is never
// seen during guide fitting.
struct MotifConfig {
  int length = 24;
  int vocab = 4;
  std::uint64_t task_seed = 7;   // fixes pattern, pool and guide fit
  Interval training_range = {0.0, 6.0};
  Interval initial_band = {0.5, 2.5};  // oracle band for x0 draws
  int pool_size = 3000;
  double guide_weight = 10.0;
  double max_guide_mae_frac = 0.05;  // of the training range width
  RegressorTrainConfig guide_fit;
  int fit_attempts = 3;
};

struct MotifTask {
  Task task;
  TokenSeq pattern;
  std::vector<TokenSeq> pool;   // in-range guide training inputs
  std::vector<double> pool_oracle;
  double guide_mae = 0.0;       // held-out, after fitting
};

inline double motif_oracle(const TokenSeq& x, const TokenSeq& pattern) {
  if (x.size() != pattern.size()) {
    throw ContractError("motif oracle: wrong sequence length");
  }
  const double L = static_cast<double>(pattern.size());
  double s = 0.0;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (x[i] == pattern[i]) s += (static_cast<double>(i) + 1.0) / L;
  }
  return s;
}

namespace detail {

// Draw with a chosen number of matching positions, off-pattern elsewhere;
// gives even coverage of oracle values inside the range.
inline TokenSeq draw_candidate(const TokenSeq& pattern, int vocab, RngStream& rng) {
  const int L = static_cast<int>(pattern.size());
  int m = static_cast<int>(rng.uniform_int(L + 1));
  std::vector<int> pos(L);
  std::iota(pos.begin(), pos.end(), 0);
  rng.shuffle(pos);
  TokenSeq x(L);
  for (int i = 0; i < L; ++i) x[i] = pattern[i];
  for (int j = m; j < L; ++j) {
    int i = pos[j];
    x[i] = (pattern[i] + 1 + static_cast<int>(rng.uniform_int(vocab - 1))) % vocab;
  }
  return x;
}

}  // namespace detail

inline MotifTask make_guide_oracle_task(const MotifConfig& cfg) {
  if (cfg.vocab < 2 || cfg.length < 2) throw ConfigError("motif task: bad dimensions");
  if (!(cfg.training_range.lo < cfg.training_range.hi)) {
    throw ConfigError("motif task: empty training range");
  }
  const double max_oracle = (cfg.length + 1.0) / 2.0;
  if (cfg.training_range.hi >= max_oracle) {
    throw ConfigError("motif task: training range must exclude the optimum");
  }

  RngStream rng(cfg.task_seed);
  MotifTask out;
  out.pattern.resize(cfg.length);
  for (int i = 0; i < cfg.length; ++i) {
    out.pattern[i] = static_cast<int>(rng.uniform_int(cfg.vocab));
  }

  // in-range pool for the guide fit, the fill model and initial states
  while (static_cast<int>(out.pool.size()) < cfg.pool_size) {
    TokenSeq x = detail::draw_candidate(out.pattern, cfg.vocab, rng);
    double y = motif_oracle(x, out.pattern);
    if (y >= cfg.training_range.lo && y <= cfg.training_range.hi) {
      out.pool.push_back(std::move(x));
      out.pool_oracle.push_back(y);
    }
  }

  const std::size_t held = out.pool.size() / 10;
  const std::size_t ntr = out.pool.size() - held;
  std::vector<TokenSeq> train_x(out.pool.begin(), out.pool.begin() + ntr);
  std::vector<double> train_y(out.pool_oracle.begin(), out.pool_oracle.begin() + ntr);

  const double bound =
      cfg.max_guide_mae_frac * (cfg.training_range.hi - cfg.training_range.lo);
  std::shared_ptr<MlpModel> guide;
  RegressorTrainConfig fit_cfg = cfg.guide_fit;
  for (int attempt = 0; attempt < cfg.fit_attempts; ++attempt) {
    RngStream fit_rng = rng.derive(100 + attempt);
    auto fit = fit_mlp_regressor(train_x, train_y, cfg.vocab, fit_cfg, fit_rng);
    double mae = 0.0;
    for (std::size_t i = ntr; i < out.pool.size(); ++i) {
      mae += std::abs(fit.model.predict_scalar(out.pool[i]) - out.pool_oracle[i]);
    }
    mae /= std::max<std::size_t>(held, 1);
    if (mae <= bound) {
      guide = std::make_shared<MlpModel>(std::move(fit.model));
      out.guide_mae = mae;
      break;
    }
    fit_cfg.epochs *= 2;  // raise iterations and retry
    if (attempt + 1 == cfg.fit_attempts) {
      std::ostringstream msg;
      msg << "motif guide fit failed: held-out MAE " << mae << " > bound " << bound;
      throw TrainingError(msg.str());
    }
  }

  Task& t = out.task;
  t.name = "motif";
  t.length = cfg.length;
  t.content_labels.resize(cfg.vocab);
  for (int v = 0; v < cfg.vocab; ++v) t.content_labels[v] = std::string(1, char('A' + v));
  t.guide = EnergyModel({{"guide-regressor", cfg.guide_weight,
                          [guide](const TokenSeq& x) { return guide->predict_scalar(x); }}});
  TokenSeq pattern = out.pattern;
  t.oracle = OracleHandle{[pattern](const TokenSeq& x) { return motif_oracle(x, pattern); }};
  t.training_range = cfg.training_range;
  t.fill_log_probs = ProposalKernel::fit_fill(out.pool, cfg.length, cfg.vocab);

  // x0: uniform over the pool slice inside the initial band
  auto band = std::make_shared<std::vector<TokenSeq>>();
  for (std::size_t i = 0; i < out.pool.size(); ++i) {
    if (out.pool_oracle[i] >= cfg.initial_band.lo &&
        out.pool_oracle[i] <= cfg.initial_band.hi) {
      band->push_back(out.pool[i]);
    }
  }
  if (band->empty()) throw ConfigError("motif task: initial band matched no pool entries");
  t.sample_initial = [band](RngStream& r) {
    return (*band)[r.uniform_int(band->size())];
  };
  return out;
}

}  // namespace extrap
