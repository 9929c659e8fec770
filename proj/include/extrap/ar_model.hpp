#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "extrap/adam.hpp"
#include "extrap/errors.hpp"
#include "extrap/rng.hpp"

namespace extrap {

// Small causal-attention network over the full episode vocabulary
// (content + separators + <stop> + score bins). Pre-norm residual blocks,
// learned positional embeddings, ~90k parameters at the defaults.
struct ArConfig {
  int vocab = 0;
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int d_ffn = 128;
  int context = 256;
  double init_scale = 1.0;

  int head_dim() const { return d_model / n_heads; }

  Eigen::Index param_count() const {
    Eigen::Index d = d_model, f = d_ffn, v = vocab;
    Eigen::Index per_layer = 2 * d            // ln1
                             + 4 * d * d + 4 * d  // attention proj + biases
                             + 2 * d            // ln2
                             + d * f + f + f * d + d;  // ffn
    return v * d + Eigen::Index(context) * d + n_layers * per_layer + 2 * d +
           d * v + v;
  }

  void validate() const {
    if (vocab < 2) throw ContractError("ArConfig: vocab too small");
    if (d_model % n_heads != 0) {
      throw ContractError("ArConfig: d_model must be divisible by n_heads");
    }
    if (context < 2) throw ContractError("ArConfig: context too small");
  }
};

namespace nn {

// Row-wise layernorm; caches normalized rows and inverse stddev for the
// backward pass.
struct LayerNormCache {
  Eigen::MatrixXd xhat;
  Eigen::VectorXd inv_sigma;
};

inline Eigen::MatrixXd layernorm(const Eigen::MatrixXd& X,
                                 const Eigen::Ref<const Eigen::VectorXd>& gamma,
                                 const Eigen::Ref<const Eigen::VectorXd>& beta,
                                 LayerNormCache& cache) {
  constexpr double kEps = 1e-5;
  const Eigen::Index T = X.rows(), D = X.cols();
  cache.xhat.resize(T, D);
  cache.inv_sigma.resize(T);
  Eigen::MatrixXd out(T, D);
  for (Eigen::Index t = 0; t < T; ++t) {
    double mu = X.row(t).mean();
    double var = (X.row(t).array() - mu).square().mean();
    double inv = 1.0 / std::sqrt(var + kEps);
    cache.inv_sigma[t] = inv;
    cache.xhat.row(t) = (X.row(t).array() - mu) * inv;
    out.row(t) = cache.xhat.row(t).cwiseProduct(gamma.transpose()) + beta.transpose();
  }
  return out;
}

inline Eigen::MatrixXd layernorm_backward(
    const Eigen::MatrixXd& dY, const LayerNormCache& cache,
    const Eigen::Ref<const Eigen::VectorXd>& gamma,
    Eigen::Ref<Eigen::VectorXd> g_gamma, Eigen::Ref<Eigen::VectorXd> g_beta) {
  const Eigen::Index T = dY.rows(), D = dY.cols();
  Eigen::MatrixXd dX(T, D);
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::RowVectorXd dxhat = dY.row(t).cwiseProduct(gamma.transpose());
    double m1 = dxhat.mean();
    double m2 = dxhat.cwiseProduct(cache.xhat.row(t)).mean();
    dX.row(t) = cache.inv_sigma[t] *
                (dxhat.array() - m1 - cache.xhat.row(t).array() * m2);
    g_gamma += dY.row(t).cwiseProduct(cache.xhat.row(t)).transpose();
    g_beta += dY.row(t).transpose();
  }
  return dX;
}

// Row-wise softmax with max subtraction; -inf entries become exact zeros.
inline void softmax_rows(Eigen::MatrixXd& S) {
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    double mx = S.row(i).maxCoeff();
    S.row(i) = (S.row(i).array() - mx).exp();
    S.row(i) /= S.row(i).sum();
  }
}

inline Eigen::VectorXd softmax_vec(const Eigen::VectorXd& z) {
  Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
  return p / p.sum();
}

}  // namespace nn

class ArModel {
 public:
  ArModel(ArConfig cfg, RngStream& rng) : cfg_(cfg), theta_(cfg.param_count()) {
    cfg_.validate();
    Offsets o(cfg_);
    auto fill = [&](Eigen::Index off, Eigen::Index count, double fan_in) {
      double bound = cfg_.init_scale / std::sqrt(fan_in);
      for (Eigen::Index i = 0; i < count; ++i) {
        theta_[off + i] = rng.uniform(-bound, bound);
      }
    };
    const Eigen::Index d = cfg_.d_model, f = cfg_.d_ffn, v = cfg_.vocab;
    fill(o.tok, v * d, d);
    fill(o.pos, Eigen::Index(cfg_.context) * d, d);
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const auto& L = o.layer[l];
      theta_.segment(L.ln1_g, d).setOnes();
      theta_.segment(L.ln1_b, d).setZero();
      fill(L.wq, d * d, d);
      fill(L.wk, d * d, d);
      fill(L.wv, d * d, d);
      fill(L.wo, d * d, d);
      theta_.segment(L.bq, d).setZero();
      theta_.segment(L.bk, d).setZero();
      theta_.segment(L.bv, d).setZero();
      theta_.segment(L.bo, d).setZero();
      theta_.segment(L.ln2_g, d).setOnes();
      theta_.segment(L.ln2_b, d).setZero();
      fill(L.w1, d * f, d);
      theta_.segment(L.b1, f).setZero();
      fill(L.w2, f * d, f);
      theta_.segment(L.b2, d).setZero();
    }
    theta_.segment(o.lnf_g, d).setOnes();
    theta_.segment(o.lnf_b, d).setZero();
    fill(o.wout, d * v, d);
    theta_.segment(o.bout, v).setZero();
  }

  ArModel(ArConfig cfg, Eigen::VectorXd theta)
      : cfg_(cfg), theta_(std::move(theta)) {
    cfg_.validate();
    if (theta_.size() != cfg_.param_count()) {
      throw ContractError("ArModel: parameter vector size mismatch");
    }
  }

  const ArConfig& config() const { return cfg_; }
  const Eigen::VectorXd& params() const { return theta_; }
  Eigen::VectorXd& params() { return theta_; }

  // Next-token logits for every prefix position: row t predicts token t+1.
  Eigen::MatrixXd forward(const std::vector<int>& tokens) const {
    Caches c;
    return forward_cached(tokens, c);
  }

  // Mean next-token cross-entropy over positions p with mask[p] set
  // (targets tokens[p], prefix tokens[0..p)). Returns the masked mean;
  // accumulates d(loss)/d(theta) into grad when given.
  double cross_entropy(const std::vector<int>& tokens,
                       const std::vector<char>& target_mask,
                       Eigen::VectorXd* grad = nullptr) const {
    const int T = static_cast<int>(tokens.size());
    if (T < 2) throw ContractError("cross_entropy: sequence too short");
    if (static_cast<int>(target_mask.size()) != T) {
      throw ContractError("cross_entropy: mask length mismatch");
    }
    Caches c;
    Eigen::MatrixXd logits = forward_cached(tokens, c);  // (T-1) x vocab

    long count = 0;
    double loss = 0.0;
    Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(T - 1, cfg_.vocab);
    for (int p = 1; p < T; ++p) {
      if (!target_mask[p]) continue;
      ++count;
      Eigen::VectorXd probs = nn::softmax_vec(logits.row(p - 1));
      loss -= std::log(std::max(probs[tokens[p]], 1e-300));
      if (grad) {
        dlogits.row(p - 1) = probs.transpose();
        dlogits(p - 1, tokens[p]) -= 1.0;
      }
    }
    if (count == 0) throw ContractError("cross_entropy: empty loss mask");
    loss /= count;
    if (grad) {
      dlogits /= static_cast<double>(count);
      backward(tokens, c, dlogits, *grad);
    }
    return loss;
  }

  // --- incremental decoding -----------------------------------------------

  struct DecodeState {
    std::vector<Eigen::MatrixXd> K, V;  // per layer, grows to (len x d)
    int len = 0;
  };

  DecodeState make_state() const {
    DecodeState s;
    s.K.assign(cfg_.n_layers, Eigen::MatrixXd(cfg_.context, cfg_.d_model));
    s.V.assign(cfg_.n_layers, Eigen::MatrixXd(cfg_.context, cfg_.d_model));
    return s;
  }

  // Feed one token at the next position; returns next-token logits.
  Eigen::VectorXd decode_step(DecodeState& st, int token) const {
    if (st.len >= cfg_.context) throw ContractError("decode_step: context overflow");
    if (token < 0 || token >= cfg_.vocab) {
      throw ContractError("decode_step: token id out of range");
    }
    Offsets o(cfg_);
    const Eigen::Index d = cfg_.d_model, f = cfg_.d_ffn;
    const int H = cfg_.n_heads, dh = cfg_.head_dim();
    const double scale = 1.0 / std::sqrt(double(dh));
    const int pos = st.len;

    Eigen::RowVectorXd x = mat(o.tok, cfg_.vocab, d).row(token) +
                           mat(o.pos, cfg_.context, d).row(pos);
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const auto& L = o.layer[l];
      Eigen::RowVectorXd n1 = ln_row(x, L.ln1_g, L.ln1_b);
      Eigen::RowVectorXd q = n1 * mat(L.wq, d, d) + vec(L.bq, d).transpose();
      st.K[l].row(pos) = n1 * mat(L.wk, d, d) + vec(L.bk, d).transpose();
      st.V[l].row(pos) = n1 * mat(L.wv, d, d) + vec(L.bv, d).transpose();
      Eigen::RowVectorXd attn(d);
      for (int h = 0; h < H; ++h) {
        auto Kh = st.K[l].block(0, h * dh, pos + 1, dh);
        auto Vh = st.V[l].block(0, h * dh, pos + 1, dh);
        Eigen::VectorXd s = scale * (Kh * q.segment(h * dh, dh).transpose());
        Eigen::VectorXd a = nn::softmax_vec(s);
        attn.segment(h * dh, dh) = (a.transpose() * Vh);
      }
      x += attn * mat(L.wo, d, d) + vec(L.bo, d).transpose();
      Eigen::RowVectorXd n2 = ln_row(x, L.ln2_g, L.ln2_b);
      Eigen::RowVectorXd h1 =
          (n2 * mat(L.w1, d, f) + vec(L.b1, f).transpose()).cwiseMax(0.0);
      x += h1 * mat(L.w2, f, d) + vec(L.b2, d).transpose();
    }
    Eigen::RowVectorXd xf = ln_row(x, o.lnf_g, o.lnf_b);
    st.len = pos + 1;
    return (xf * mat(o.wout, d, cfg_.vocab) + vec(o.bout, cfg_.vocab).transpose())
        .transpose();
  }

 private:
  struct LayerOffsets {
    Eigen::Index ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    Eigen::Index ln2_g, ln2_b, w1, b1, w2, b2;
  };
  struct Offsets {
    Eigen::Index tok, pos, lnf_g, lnf_b, wout, bout;
    std::vector<LayerOffsets> layer;
    explicit Offsets(const ArConfig& c) {
      const Eigen::Index d = c.d_model, f = c.d_ffn, v = c.vocab;
      Eigen::Index p = 0;
      tok = p; p += v * d;
      pos = p; p += Eigen::Index(c.context) * d;
      layer.resize(c.n_layers);
      for (int l = 0; l < c.n_layers; ++l) {
        auto& L = layer[l];
        L.ln1_g = p; p += d;
        L.ln1_b = p; p += d;
        L.wq = p; p += d * d;  L.bq = p; p += d;
        L.wk = p; p += d * d;  L.bk = p; p += d;
        L.wv = p; p += d * d;  L.bv = p; p += d;
        L.wo = p; p += d * d;  L.bo = p; p += d;
        L.ln2_g = p; p += d;
        L.ln2_b = p; p += d;
        L.w1 = p; p += d * f;  L.b1 = p; p += f;
        L.w2 = p; p += f * d;  L.b2 = p; p += d;
      }
      lnf_g = p; p += d;
      lnf_b = p; p += d;
      wout = p; p += d * v;
      bout = p; p += v;
    }
  };

  Eigen::Map<const Eigen::MatrixXd> mat(Eigen::Index off, Eigen::Index r,
                                        Eigen::Index c) const {
    return {theta_.data() + off, r, c};
  }
  Eigen::Map<const Eigen::VectorXd> vec(Eigen::Index off, Eigen::Index n) const {
    return {theta_.data() + off, n};
  }

  Eigen::RowVectorXd ln_row(const Eigen::RowVectorXd& x, Eigen::Index g_off,
                            Eigen::Index b_off) const {
    constexpr double kEps = 1e-5;
    double mu = x.mean();
    double var = (x.array() - mu).square().mean();
    Eigen::RowVectorXd xhat = (x.array() - mu) / std::sqrt(var + kEps);
    return xhat.cwiseProduct(vec(g_off, x.size()).transpose()) +
           vec(b_off, x.size()).transpose();
  }

  struct LayerCache {
    Eigen::MatrixXd x_in;        // residual input
    nn::LayerNormCache ln1;
    Eigen::MatrixXd N1, Q, K, V; // T x d
    std::vector<Eigen::MatrixXd> A;  // per head, T x T
    Eigen::MatrixXd attn_out;    // concat heads, pre-projection
    Eigen::MatrixXd x_mid;       // after attention residual
    nn::LayerNormCache ln2;
    Eigen::MatrixXd N2, F1;
  };
  struct Caches {
    std::vector<LayerCache> layers;
    Eigen::MatrixXd x_final;
    nn::LayerNormCache lnf;
    Eigen::MatrixXd Xf;
    std::vector<int> tokens;
  };

  Eigen::MatrixXd forward_cached(const std::vector<int>& tokens, Caches& c) const {
    const int T = static_cast<int>(tokens.size());
    if (T < 2) throw ContractError("ArModel: need at least 2 tokens");
    if (T > cfg_.context) {
      throw ContractError("ArModel: sequence exceeds context window (" +
                          std::to_string(T) + " > " + std::to_string(cfg_.context) + ")");
    }
    Offsets o(cfg_);
    const Eigen::Index d = cfg_.d_model, f = cfg_.d_ffn;
    const int H = cfg_.n_heads, dh = cfg_.head_dim();
    const double scale = 1.0 / std::sqrt(double(dh));
    const double ninf = -std::numeric_limits<double>::infinity();

    c.tokens = tokens;
    c.layers.resize(cfg_.n_layers);
    Eigen::MatrixXd X(T, d);
    auto tok_emb = mat(o.tok, cfg_.vocab, d);
    auto pos_emb = mat(o.pos, cfg_.context, d);
    for (int t = 0; t < T; ++t) {
      if (tokens[t] < 0 || tokens[t] >= cfg_.vocab) {
        throw ContractError("ArModel: token id out of range");
      }
      X.row(t) = tok_emb.row(tokens[t]) + pos_emb.row(t);
    }

    for (int l = 0; l < cfg_.n_layers; ++l) {
      const auto& L = o.layer[l];
      auto& lc = c.layers[l];
      lc.x_in = X;
      lc.N1 = nn::layernorm(X, vec(L.ln1_g, d), vec(L.ln1_b, d), lc.ln1);
      lc.Q = (lc.N1 * mat(L.wq, d, d)).rowwise() + vec(L.bq, d).transpose();
      lc.K = (lc.N1 * mat(L.wk, d, d)).rowwise() + vec(L.bk, d).transpose();
      lc.V = (lc.N1 * mat(L.wv, d, d)).rowwise() + vec(L.bv, d).transpose();
      lc.A.resize(H);
      lc.attn_out.resize(T, d);
      for (int h = 0; h < H; ++h) {
        auto Qh = lc.Q.middleCols(h * dh, dh);
        auto Kh = lc.K.middleCols(h * dh, dh);
        auto Vh = lc.V.middleCols(h * dh, dh);
        Eigen::MatrixXd S = scale * (Qh * Kh.transpose());
        for (int i = 0; i < T; ++i) {
          for (int j = i + 1; j < T; ++j) S(i, j) = ninf;
        }
        nn::softmax_rows(S);
        lc.A[h] = std::move(S);
        lc.attn_out.middleCols(h * dh, dh) = lc.A[h] * Vh;
      }
      X += (lc.attn_out * mat(L.wo, d, d)).rowwise() + vec(L.bo, d).transpose();
      lc.x_mid = X;
      lc.N2 = nn::layernorm(X, vec(L.ln2_g, d), vec(L.ln2_b, d), lc.ln2);
      lc.F1 = ((lc.N2 * mat(L.w1, d, f)).rowwise() + vec(L.b1, f).transpose())
                  .cwiseMax(0.0);
      X += (lc.F1 * mat(L.w2, f, d)).rowwise() + vec(L.b2, d).transpose();
    }
    c.x_final = X;
    c.Xf = nn::layernorm(X, vec(o.lnf_g, d), vec(o.lnf_b, d), c.lnf);
    // logits only for positions that predict a next token
    return (c.Xf.topRows(T - 1) * mat(o.wout, d, cfg_.vocab)).rowwise() +
           vec(o.bout, cfg_.vocab).transpose();
  }

  void backward(const std::vector<int>& tokens, const Caches& c,
                const Eigen::MatrixXd& dlogits, Eigen::VectorXd& grad) const {
    Offsets o(cfg_);
    const int T = static_cast<int>(tokens.size());
    const Eigen::Index d = cfg_.d_model, f = cfg_.d_ffn;
    const int H = cfg_.n_heads, dh = cfg_.head_dim();
    const double scale = 1.0 / std::sqrt(double(dh));
    if (grad.size() != theta_.size()) grad.setZero(theta_.size());

    auto gmat = [&](Eigen::Index off, Eigen::Index r, Eigen::Index cc) {
      return Eigen::Map<Eigen::MatrixXd>(grad.data() + off, r, cc);
    };
    auto gvec = [&](Eigen::Index off, Eigen::Index n) {
      return Eigen::Map<Eigen::VectorXd>(grad.data() + off, n);
    };

    // head
    Eigen::MatrixXd dXf = Eigen::MatrixXd::Zero(T, d);
    gmat(o.wout, d, cfg_.vocab) += c.Xf.topRows(T - 1).transpose() * dlogits;
    gvec(o.bout, cfg_.vocab) += dlogits.colwise().sum();
    dXf.topRows(T - 1) = dlogits * mat(o.wout, d, cfg_.vocab).transpose();
    Eigen::MatrixXd dX = nn::layernorm_backward(dXf, c.lnf, vec(o.lnf_g, d),
                                                gvec(o.lnf_g, d), gvec(o.lnf_b, d));

    for (int l = cfg_.n_layers - 1; l >= 0; --l) {
      const auto& L = o.layer[l];
      const auto& lc = c.layers[l];
      // ffn
      Eigen::MatrixXd dF1 = dX * mat(L.w2, f, d).transpose();
      gmat(L.w2, f, d) += lc.F1.transpose() * dX;
      gvec(L.b2, d) += dX.colwise().sum();
      dF1.array() *= (lc.F1.array() > 0.0).cast<double>();
      gmat(L.w1, d, f) += lc.N2.transpose() * dF1;
      gvec(L.b1, f) += dF1.colwise().sum();
      Eigen::MatrixXd dN2 = dF1 * mat(L.w1, d, f).transpose();
      dX += nn::layernorm_backward(dN2, lc.ln2, vec(L.ln2_g, d),
                                   gvec(L.ln2_g, d), gvec(L.ln2_b, d));
      // attention projection
      Eigen::MatrixXd dAttnOut = dX * mat(L.wo, d, d).transpose();
      gmat(L.wo, d, d) += lc.attn_out.transpose() * dX;
      gvec(L.bo, d) += dX.colwise().sum();
      // heads
      Eigen::MatrixXd dQ(T, d), dK(T, d), dV(T, d);
      for (int h = 0; h < H; ++h) {
        auto Vh = lc.V.middleCols(h * dh, dh);
        auto Qh = lc.Q.middleCols(h * dh, dh);
        auto Kh = lc.K.middleCols(h * dh, dh);
        const auto& A = lc.A[h];
        Eigen::MatrixXd dOh = dAttnOut.middleCols(h * dh, dh);
        Eigen::MatrixXd dA = dOh * Vh.transpose();
        dV.middleCols(h * dh, dh) = A.transpose() * dOh;
        Eigen::VectorXd rowdot = (dA.array() * A.array()).rowwise().sum();
        Eigen::MatrixXd dS =
            A.array() * (dA.array().colwise() - rowdot.array());
        dQ.middleCols(h * dh, dh) = scale * (dS * Kh);
        dK.middleCols(h * dh, dh) = scale * (dS.transpose() * Qh);
      }
      gmat(L.wq, d, d) += lc.N1.transpose() * dQ;
      gvec(L.bq, d) += dQ.colwise().sum();
      gmat(L.wk, d, d) += lc.N1.transpose() * dK;
      gvec(L.bk, d) += dK.colwise().sum();
      gmat(L.wv, d, d) += lc.N1.transpose() * dV;
      gvec(L.bv, d) += dV.colwise().sum();
      Eigen::MatrixXd dN1 = dQ * mat(L.wq, d, d).transpose() +
                            dK * mat(L.wk, d, d).transpose() +
                            dV * mat(L.wv, d, d).transpose();
      dX += nn::layernorm_backward(dN1, lc.ln1, vec(L.ln1_g, d),
                                   gvec(L.ln1_g, d), gvec(L.ln1_b, d));
    }
    auto gtok = gmat(o.tok, cfg_.vocab, d);
    auto gpos = gmat(o.pos, cfg_.context, d);
    for (int t = 0; t < T; ++t) {
      gtok.row(tokens[t]) += dX.row(t);
      gpos.row(t) += dX.row(t);
    }
  }

  ArConfig cfg_;
  Eigen::VectorXd theta_;
};

}  // namespace extrap
