#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "extrap/errors.hpp"
#include "extrap/rng.hpp"
#include "extrap/sequence_ops.hpp"
#include "extrap/vocab.hpp"

namespace extrap {

using ScoreFn = std::function<double(const TokenSeq&)>;

// One scorer in the product of experts; higher is better, weight >= 0
// scales its log-density contribution.
struct Expert {
  std::string name;
  double weight = 1.0;
  ScoreFn score;
};

// Weighted sum of expert scores: the unnormalized log-density of the
// surrogate model. The partition constant is never computed; it cancels
// in Metropolis-Hastings ratios.
class EnergyModel {
 public:
  EnergyModel() = default;
  explicit EnergyModel(std::vector<Expert> experts) : experts_(std::move(experts)) {
    if (experts_.empty()) throw ContractError("EnergyModel: no experts");
  }

  double combined(const TokenSeq& x) const {
    double total = 0.0;
    for (const auto& e : experts_) {
      double s;
      try {
        s = e.score(x);
      } catch (const std::exception& ex) {
        throw ContractError("expert '" + e.name + "' failed: " + ex.what());
      }
      total += e.weight * s;
    }
    return total;
  }

  const std::vector<Expert>& experts() const { return experts_; }

 private:
  std::vector<Expert> experts_;
};

inline double combined_score(const EnergyModel& m, const TokenSeq& x) {
  return m.combined(x);
}

// Ground-truth scorer; expensive in general, consulted only by the
// evaluation layer (sampling and training see only the guide).
struct OracleHandle {
  ScoreFn fn;
  double operator()(const TokenSeq& x) const { return fn(x); }
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

// A task bundles the search space, the cheap guide driving MCMC, the
// oracle reserved for evaluation, and the in-range initial-state sampler.
struct Task {
  std::string name;
  int length = 0;
  std::vector<std::string> content_labels;
  EnergyModel guide;
  OracleHandle oracle;
  Interval training_range;
  std::function<TokenSeq(RngStream&)> sample_initial;
  // Position-conditional fill log-probs (L x V) for mask-infill proposals;
  // absent for tasks sampled with the symmetric block-flip kernel.
  std::optional<Eigen::MatrixXd> fill_log_probs;

  int content_size() const { return static_cast<int>(content_labels.size()); }
};

// ---- toy binary task (fixed even L) --------------------------------------

// Reward exp(sum_i r_i) with r_i = +i*x_i/L for i >= L/2 and -i*x_i/L
// below, zero-based. Maximized at 0^{L/2} 1^{L/2} giving exp(5.75) = 314.19
// for L = 16 (position 0 carries zero weight, so its bit is free).
inline double toy_log_reward(const TokenSeq& x, int L) {
  if (static_cast<int>(x.size()) != L) {
    throw ContractError("toy_score: wrong sequence length");
  }
  double sum = 0.0;
  for (int i = 0; i < L; ++i) {
    if (x[i] != 0 && x[i] != 1) throw ContractError("toy_score: non-binary token");
    double r = static_cast<double>(i) * x[i] / L;
    sum += (i >= L / 2) ? r : -r;
  }
  return sum;
}

inline double toy_score(const TokenSeq& x, int L) {
  return std::exp(toy_log_reward(x, L));
}

// The sampler maximizes the log reward (the EBM's s(x)); the exp-scale
// toy_score is the reported reward and the oracle.
inline Task make_toy_task(int L = 16) {
  if (L < 2 || L % 2 != 0) throw ContractError("toy task: L must be even and >= 2");
  Task t;
  t.name = "toy";
  t.length = L;
  t.content_labels = {"0", "1"};
  t.guide = EnergyModel({{"log-reward", 1.0,
                          [L](const TokenSeq& x) { return toy_log_reward(x, L); }}});
  t.oracle = OracleHandle{[L](const TokenSeq& x) { return toy_score(x, L); }};
  t.training_range = {1.0, 250.0};  // informational; the toy flow trains on transitions
  t.sample_initial = [L](RngStream&) { return TokenSeq(L, 0); };
  return t;
}

}  // namespace extrap
