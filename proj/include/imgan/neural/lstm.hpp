#pragma once

#include <string>

#include "imgan/neural/core.hpp"

namespace imgan::neural {

// Single-direction LSTM over a column-per-step sequence (in x T -> H x T).
// Gate order in the stacked 4H rows: input, forget, cell, output.  Zero
// initial state; weights W (input), U (recurrent), bias b with the forget
// block initialized to 1.
template <class S>
class Lstm {
 public:
  Lstm(Eigen::Index in, Eigen::Index hidden) : in_(in), h_(hidden) {
    w_.init_shape(4 * hidden, in);
    u_.init_shape(4 * hidden, hidden);
    b_.init_shape(4 * hidden, 1);
  }

  void init(Rng& rng) {
    xavier_uniform(w_.value, in_, 4 * h_, rng);
    for (int g = 0; g < 4; ++g)
      u_.value.middleRows(g * h_, h_) = orthogonal_square<S>(h_, rng);
    b_.value.setZero();
    b_.value.col(0).segment(h_, h_).setConstant(S(1));  // forget bias
  }

  Mat<S> forward(const Mat<S>& x) {
    if (x.rows() != in_) throw std::invalid_argument("lstm: input width mismatch");
    const Eigen::Index t_len = x.cols();
    x_ = x;
    gi_.resize(h_, t_len);
    gf_.resize(h_, t_len);
    gg_.resize(h_, t_len);
    go_.resize(h_, t_len);
    c_.resize(h_, t_len);
    tc_.resize(h_, t_len);
    hseq_.resize(h_, t_len);

    Vec<S> h_prev = Vec<S>::Zero(h_);
    Vec<S> c_prev = Vec<S>::Zero(h_);
    Vec<S> pre(4 * h_);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      pre = w_.value * x.col(t) + u_.value * h_prev + b_.value.col(0);
      auto sig = [](S v) { return S(1) / (S(1) + std::exp(-v)); };
      for (Eigen::Index k = 0; k < h_; ++k) {
        gi_(k, t) = sig(pre[k]);
        gf_(k, t) = sig(pre[h_ + k]);
        gg_(k, t) = std::tanh(pre[2 * h_ + k]);
        go_(k, t) = sig(pre[3 * h_ + k]);
      }
      c_.col(t) = gf_.col(t).cwiseProduct(c_prev) + gi_.col(t).cwiseProduct(gg_.col(t));
      tc_.col(t) = c_.col(t).array().tanh();
      hseq_.col(t) = go_.col(t).cwiseProduct(tc_.col(t));
      h_prev = hseq_.col(t);
      c_prev = c_.col(t);
    }
    check_finite(hseq_, "lstm");
    return hseq_;
  }

  Mat<S> backward(const Mat<S>& dh) {
    const Eigen::Index t_len = x_.cols();
    if (dh.rows() != h_ || dh.cols() != t_len)
      throw std::invalid_argument("lstm: gradient shape mismatch");

    Mat<S> dx = Mat<S>::Zero(in_, t_len);
    Vec<S> dh_next = Vec<S>::Zero(h_);
    Vec<S> dc_next = Vec<S>::Zero(h_);
    Vec<S> dpre(4 * h_);

    for (Eigen::Index t = t_len - 1; t >= 0; --t) {
      const Vec<S> dht = dh.col(t) + dh_next;
      const auto i = gi_.col(t).array(), f = gf_.col(t).array(),
                 g = gg_.col(t).array(), o = go_.col(t).array(),
                 tc = tc_.col(t).array();

      const Vec<S> dc = (dht.array() * o * (S(1) - tc.square())).matrix() + dc_next;
      const Vec<S> c_prev =
          t > 0 ? Vec<S>(c_.col(t - 1)) : Vec<S>(Vec<S>::Zero(h_));
      const Vec<S> h_prev =
          t > 0 ? Vec<S>(hseq_.col(t - 1)) : Vec<S>(Vec<S>::Zero(h_));

      dpre.segment(0, h_) = (dc.array() * g * i * (S(1) - i)).matrix();
      dpre.segment(h_, h_) = (dc.array() * c_prev.array() * f * (S(1) - f)).matrix();
      dpre.segment(2 * h_, h_) = (dc.array() * i * (S(1) - g.square())).matrix();
      dpre.segment(3 * h_, h_) = (dht.array() * tc * o * (S(1) - o)).matrix();

      w_.grad += dpre * x_.col(t).transpose();
      u_.grad += dpre * h_prev.transpose();
      b_.grad += dpre;
      dx.col(t) = w_.value.transpose() * dpre;
      dh_next = u_.value.transpose() * dpre;
      dc_next = (dc.array() * f).matrix();
    }
    check_finite(dx, "lstm backward");
    return dx;
  }

  void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
    fn(prefix + ".w", w_);
    fn(prefix + ".u", u_);
    fn(prefix + ".b", b_);
  }

  Eigen::Index hidden() const { return h_; }
  Eigen::Index in_dim() const { return in_; }

 private:
  Eigen::Index in_, h_;
  Param<S> w_, u_, b_;
  Mat<S> x_, gi_, gf_, gg_, go_, c_, tc_, hseq_;
};

// Bidirectional wrapper: output stacks the forward pass over the backward
// pass run on the time-reversed input (re-reversed so rows align per step).
template <class S>
class BiLstm {
 public:
  BiLstm(Eigen::Index in, Eigen::Index hidden) : fwd_(in, hidden), bwd_(in, hidden) {}

  void init(Rng& rng) {
    fwd_.init(rng);
    bwd_.init(rng);
  }

  Mat<S> forward(const Mat<S>& x) {
    const Mat<S> hf = fwd_.forward(x);
    const Mat<S> hb = bwd_.forward(x.rowwise().reverse());
    Mat<S> y(2 * fwd_.hidden(), x.cols());
    y.topRows(fwd_.hidden()) = hf;
    y.bottomRows(fwd_.hidden()) = hb.rowwise().reverse();
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) {
    const Eigen::Index h = fwd_.hidden();
    Mat<S> dx = fwd_.backward(dy.topRows(h));
    Mat<S> dxb = bwd_.backward(dy.bottomRows(h).rowwise().reverse());
    dx += dxb.rowwise().reverse();
    return dx;
  }

  void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
    fwd_.visit_params(prefix + ".fwd", fn);
    bwd_.visit_params(prefix + ".bwd", fn);
  }

  Eigen::Index out_dim() const { return 2 * fwd_.hidden(); }

 private:
  Lstm<S> fwd_, bwd_;
};

}  // namespace imgan::neural
