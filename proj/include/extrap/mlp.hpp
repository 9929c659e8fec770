#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "extrap/adam.hpp"
#include "extrap/errors.hpp"
#include "extrap/rng.hpp"
#include "extrap/vocab.hpp"

namespace extrap {

// Fixed-length extrapolator / regression core: per-token embeddings
// concatenated to a 16*L vector, two 128-wide rectified layers, and a
// linear head (L position logits for the binary transition model, one
// value for the guide regressor).
struct MlpConfig {
  int vocab = 2;
  int embed_dim = 16;
  int hidden = 128;
  int seq_len = 16;
  int out_dim = 16;
  double init_scale = 1.0;

  int input_dim() const { return seq_len * embed_dim; }
  Eigen::Index param_count() const {
    return Eigen::Index(vocab) * embed_dim + Eigen::Index(input_dim()) * hidden +
           hidden + Eigen::Index(hidden) * hidden + hidden +
           Eigen::Index(hidden) * out_dim + out_dim;
  }
};

class MlpModel {
 public:
  MlpModel(MlpConfig cfg, RngStream& rng) : cfg_(cfg), theta_(cfg.param_count()) {
    // symmetric uniform init scaled by fan-in, biases zero
    auto fill = [&](Eigen::Index off, Eigen::Index count, double fan_in) {
      double bound = cfg_.init_scale / std::sqrt(fan_in);
      for (Eigen::Index i = 0; i < count; ++i) {
        theta_[off + i] = rng.uniform(-bound, bound);
      }
    };
    Offsets o(cfg_);
    fill(o.emb, o.emb_n, cfg_.embed_dim);
    fill(o.w1, o.w1_n, cfg_.input_dim());
    theta_.segment(o.b1, cfg_.hidden).setZero();
    fill(o.w2, o.w2_n, cfg_.hidden);
    theta_.segment(o.b2, cfg_.hidden).setZero();
    fill(o.w3, o.w3_n, cfg_.hidden);
    theta_.segment(o.b3, cfg_.out_dim).setZero();
  }

  MlpModel(MlpConfig cfg, Eigen::VectorXd theta)
      : cfg_(cfg), theta_(std::move(theta)) {
    if (theta_.size() != cfg_.param_count()) {
      throw ContractError("MlpModel: parameter vector size mismatch");
    }
  }

  const MlpConfig& config() const { return cfg_; }
  const Eigen::VectorXd& params() const { return theta_; }
  Eigen::VectorXd& params() { return theta_; }

  // Logits/values for a batch; X is B x L token ids.
  Eigen::MatrixXd forward(const Eigen::MatrixXi& X) const {
    Cache c;
    return forward_cached(X, c);
  }

  // Multi-label sigmoid cross-entropy (mean over batch, sum over
  // positions). Y holds 0/1 targets, B x out_dim.
  double multilabel_loss(const Eigen::MatrixXi& X, const Eigen::MatrixXd& Y,
                         Eigen::VectorXd* grad = nullptr) const {
    Cache c;
    Eigen::MatrixXd Z = forward_cached(X, c);
    const double B = static_cast<double>(X.rows());
    // stable softplus form: max(z,0) - z*y + log1p(exp(-|z|))
    double loss = ((Z.array().max(0.0) - Z.array() * Y.array() +
                    (-Z.array().abs()).exp().log1p())
                       .rowwise()
                       .sum())
                      .mean();
    if (grad) {
      Eigen::MatrixXd dZ =
          ((1.0 / (1.0 + (-Z.array()).exp())) - Y.array()) / B;
      backward(X, c, dZ, *grad);
    }
    return loss;
  }

  // Squared error against scalar targets (out_dim must be 1).
  double mse_loss(const Eigen::MatrixXi& X, const Eigen::VectorXd& y,
                  Eigen::VectorXd* grad = nullptr) const {
    if (cfg_.out_dim != 1) throw ContractError("mse_loss: out_dim must be 1");
    Cache c;
    Eigen::MatrixXd Z = forward_cached(X, c);
    Eigen::VectorXd d = Z.col(0) - y;
    const double B = static_cast<double>(X.rows());
    double loss = d.squaredNorm() / B;
    if (grad) {
      Eigen::MatrixXd dZ = (2.0 / B) * d;
      backward(X, c, dZ, *grad);
    }
    return loss;
  }

  double predict_scalar(const TokenSeq& x) const {
    return forward(to_row(x))(0, 0);
  }

  Eigen::MatrixXi to_row(const TokenSeq& x) const {
    if (static_cast<int>(x.size()) != cfg_.seq_len) {
      throw ContractError("MlpModel: sequence length mismatch");
    }
    Eigen::MatrixXi X(1, cfg_.seq_len);
    for (int i = 0; i < cfg_.seq_len; ++i) X(0, i) = x[i];
    return X;
  }

 private:
  struct Offsets {
    Eigen::Index emb, w1, b1, w2, b2, w3, b3;
    Eigen::Index emb_n, w1_n, w2_n, w3_n;
    explicit Offsets(const MlpConfig& c) {
      emb = 0;
      emb_n = Eigen::Index(c.vocab) * c.embed_dim;
      w1 = emb + emb_n;
      w1_n = Eigen::Index(c.input_dim()) * c.hidden;
      b1 = w1 + w1_n;
      w2 = b1 + c.hidden;
      w2_n = Eigen::Index(c.hidden) * c.hidden;
      b2 = w2 + w2_n;
      w3 = b2 + c.hidden;
      w3_n = Eigen::Index(c.hidden) * c.out_dim;
      b3 = w3 + w3_n;
    }
  };

  struct Cache {
    Eigen::MatrixXd E, H1, H2;
  };

  template <typename T>
  using MapM = Eigen::Map<T>;

  Eigen::MatrixXd forward_cached(const Eigen::MatrixXi& X, Cache& c) const {
    if (X.cols() != cfg_.seq_len) throw ContractError("MlpModel: bad input width");
    Offsets o(cfg_);
    MapM<const Eigen::MatrixXd> emb(theta_.data() + o.emb, cfg_.vocab, cfg_.embed_dim);
    MapM<const Eigen::MatrixXd> W1(theta_.data() + o.w1, cfg_.input_dim(), cfg_.hidden);
    MapM<const Eigen::VectorXd> b1(theta_.data() + o.b1, cfg_.hidden);
    MapM<const Eigen::MatrixXd> W2(theta_.data() + o.w2, cfg_.hidden, cfg_.hidden);
    MapM<const Eigen::VectorXd> b2(theta_.data() + o.b2, cfg_.hidden);
    MapM<const Eigen::MatrixXd> W3(theta_.data() + o.w3, cfg_.hidden, cfg_.out_dim);
    MapM<const Eigen::VectorXd> b3(theta_.data() + o.b3, cfg_.out_dim);

    const Eigen::Index B = X.rows();
    c.E.resize(B, cfg_.input_dim());
    for (Eigen::Index b = 0; b < B; ++b) {
      for (int i = 0; i < cfg_.seq_len; ++i) {
        int tok = X(b, i);
        if (tok < 0 || tok >= cfg_.vocab) {
          throw ContractError("MlpModel: token id out of range");
        }
        c.E.block(b, Eigen::Index(i) * cfg_.embed_dim, 1, cfg_.embed_dim) =
            emb.row(tok);
      }
    }
    c.H1 = ((c.E * W1).rowwise() + b1.transpose()).cwiseMax(0.0);
    c.H2 = ((c.H1 * W2).rowwise() + b2.transpose()).cwiseMax(0.0);
    return (c.H2 * W3).rowwise() + b3.transpose();
  }

  void backward(const Eigen::MatrixXi& X, const Cache& c,
                const Eigen::MatrixXd& dZ, Eigen::VectorXd& grad) const {
    Offsets o(cfg_);
    grad.setZero(theta_.size());
    MapM<const Eigen::MatrixXd> W1(theta_.data() + o.w1, cfg_.input_dim(), cfg_.hidden);
    MapM<const Eigen::MatrixXd> W2(theta_.data() + o.w2, cfg_.hidden, cfg_.hidden);
    MapM<const Eigen::MatrixXd> W3(theta_.data() + o.w3, cfg_.hidden, cfg_.out_dim);
    MapM<Eigen::MatrixXd> gEmb(grad.data() + o.emb, cfg_.vocab, cfg_.embed_dim);
    MapM<Eigen::MatrixXd> gW1(grad.data() + o.w1, cfg_.input_dim(), cfg_.hidden);
    MapM<Eigen::VectorXd> gb1(grad.data() + o.b1, cfg_.hidden);
    MapM<Eigen::MatrixXd> gW2(grad.data() + o.w2, cfg_.hidden, cfg_.hidden);
    MapM<Eigen::VectorXd> gb2(grad.data() + o.b2, cfg_.hidden);
    MapM<Eigen::MatrixXd> gW3(grad.data() + o.w3, cfg_.hidden, cfg_.out_dim);
    MapM<Eigen::VectorXd> gb3(grad.data() + o.b3, cfg_.out_dim);

    gW3 = c.H2.transpose() * dZ;
    gb3 = dZ.colwise().sum();
    Eigen::MatrixXd dH2 = dZ * W3.transpose();
    dH2.array() *= (c.H2.array() > 0.0).cast<double>();
    gW2 = c.H1.transpose() * dH2;
    gb2 = dH2.colwise().sum();
    Eigen::MatrixXd dH1 = dH2 * W2.transpose();
    dH1.array() *= (c.H1.array() > 0.0).cast<double>();
    gW1 = c.E.transpose() * dH1;
    gb1 = dH1.colwise().sum();
    Eigen::MatrixXd dE = dH1 * W1.transpose();
    for (Eigen::Index b = 0; b < X.rows(); ++b) {
      for (int i = 0; i < cfg_.seq_len; ++i) {
        gEmb.row(X(b, i)) +=
            dE.block(b, Eigen::Index(i) * cfg_.embed_dim, 1, cfg_.embed_dim);
      }
    }
  }

  MlpConfig cfg_;
  Eigen::VectorXd theta_;
};

}  // namespace extrap
