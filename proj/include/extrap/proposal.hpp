#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "extrap/energy.hpp"
#include "extrap/rng.hpp"
#include "extrap/vocab.hpp"
#include "json.hpp"

namespace extrap {

// How the set of positions to resample is chosen. Selection never looks at
// sequence content, so the mask-choice probability is equal in the forward
// and reverse directions and cancels in the MH ratio; only fill
// probabilities enter the log_q terms.
struct MaskSelector {
  enum class Kind { kFullBlock, kSpan, kBernoulli };
  Kind kind = Kind::kFullBlock;
  int span_len = 4;     // kSpan: contiguous length, uniform start
  double rate = 0.15;   // kBernoulli: per-position probability

  std::vector<int> draw(int length, RngStream& rng) const {
    std::vector<int> pos;
    switch (kind) {
      case Kind::kFullBlock:
        pos.resize(length);
        for (int i = 0; i < length; ++i) pos[i] = i;
        break;
      case Kind::kSpan: {
        int len = std::min(span_len, length);
        int start = static_cast<int>(rng.uniform_int(length - len + 1));
        for (int i = 0; i < len; ++i) pos.push_back(start + i);
        break;
      }
      case Kind::kBernoulli:
        for (int i = 0; i < length; ++i) {
          if (rng.bernoulli(rate)) pos.push_back(i);
        }
        if (pos.empty()) pos.push_back(static_cast<int>(rng.uniform_int(length)));
        break;
    }
    return pos;
  }

  nlohmann::json to_json() const {
    switch (kind) {
      case Kind::kFullBlock: return {{"mask", "full"}};
      case Kind::kSpan: return {{"mask", "span"}, {"span", span_len}};
      case Kind::kBernoulli: return {{"mask", "bernoulli"}, {"rate", rate}};
    }
    return {};
  }
};

// Mask-and-infill proposal: blank the selected positions and redraw each
// from a per-position categorical. A uniform fill makes the kernel
// symmetric (pure Metropolis); a fitted fill requires the MH correction.
class ProposalKernel {
 public:
  struct Proposal {
    TokenSeq next;
    double log_q_fwd = 0.0;
    double log_q_rev = 0.0;
  };

  // Resample every position as a fair draw over the content vocabulary;
  // the toy setup's "block size L" kernel.
  static ProposalKernel block_flip(int length, int vocab) {
    ProposalKernel k;
    k.kind_ = "block-flip";
    k.selector_ = {MaskSelector::Kind::kFullBlock, 0, 0.0};
    k.fill_log_probs_ = Eigen::MatrixXd::Constant(length, vocab,
                                                  -std::log(double(vocab)));
    k.symmetric_ = true;
    return k;
  }

  static ProposalKernel uniform_infill(MaskSelector sel, int length, int vocab) {
    ProposalKernel k;
    k.kind_ = "mask-infill";
    k.selector_ = sel;
    k.fill_log_probs_ = Eigen::MatrixXd::Constant(length, vocab,
                                                  -std::log(double(vocab)));
    k.symmetric_ = true;
    return k;
  }

  static ProposalKernel mask_infill(MaskSelector sel, Eigen::MatrixXd fill_log_probs) {
    ProposalKernel k;
    k.kind_ = "mask-infill";
    k.selector_ = sel;
    k.fill_log_probs_ = std::move(fill_log_probs);
    k.symmetric_ = false;
    return k;
  }

  // Position-conditional categorical fit by frequency counting with
  // Laplace smoothing 1.
  static Eigen::MatrixXd fit_fill(const std::vector<TokenSeq>& pool, int length,
                                  int vocab) {
    Eigen::MatrixXd counts = Eigen::MatrixXd::Ones(length, vocab);
    for (const auto& x : pool) {
      if (static_cast<int>(x.size()) != length) {
        throw ContractError("fit_fill: pool sequence with wrong length");
      }
      for (int i = 0; i < length; ++i) counts(i, x[i]) += 1.0;
    }
    Eigen::MatrixXd logp = counts;
    for (int i = 0; i < length; ++i) {
      logp.row(i) = (counts.row(i) / counts.row(i).sum()).array().log();
    }
    return logp;
  }

  Proposal propose(const TokenSeq& x, RngStream& rng) const {
    if (static_cast<int>(x.size()) != fill_log_probs_.rows()) {
      throw ContractError("propose: sequence length does not match kernel");
    }
    Proposal p;
    p.next = x;
    const int vocab = static_cast<int>(fill_log_probs_.cols());
    std::vector<double> w(vocab);
    for (int i : selector_.draw(static_cast<int>(x.size()), rng)) {
      for (int v = 0; v < vocab; ++v) w[v] = std::exp(fill_log_probs_(i, v));
      int t = static_cast<int>(rng.categorical(w));
      p.next[i] = t;
      p.log_q_fwd += fill_log_probs_(i, t);
      p.log_q_rev += fill_log_probs_(i, x[i]);
    }
    return p;
  }

  bool symmetric() const { return symmetric_; }
  int length() const { return static_cast<int>(fill_log_probs_.rows()); }
  int vocab() const { return static_cast<int>(fill_log_probs_.cols()); }

  nlohmann::json settings() const {
    nlohmann::json j = selector_.to_json();
    j["kind"] = kind_;
    j["symmetric"] = symmetric_;
    return j;
  }

 private:
  std::string kind_;
  MaskSelector selector_;
  Eigen::MatrixXd fill_log_probs_;
  bool symmetric_ = true;
};

}  // namespace extrap
