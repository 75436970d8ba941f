#pragma once

#include <optional>
#include <string>

#include "imgan/neural/core.hpp"
#include "imgan/neural/spectral_norm.hpp"

namespace imgan::neural {

// Affine layer on column-stacked inputs: y = W x + b, x is in x T.
// With spectral normalization enabled the effective weight is W / sigma.
template <class S>
class Dense {
 public:
  Dense(Eigen::Index in, Eigen::Index out, bool spectral_norm = false)
      : in_(in), out_(out) {
    w_.init_shape(out, in);
    b_.init_shape(out, 1);
    if (spectral_norm) sn_.emplace();
  }

  void init(Rng& rng) {
    xavier_uniform(w_.value, in_, out_, rng);
    b_.value.setZero();
    if (sn_) sn_->attach(out_, in_, rng);
  }

  Mat<S> forward(const Mat<S>& x) {
    if (x.rows() != in_) throw std::invalid_argument("dense: input width mismatch");
    x_ = x;
    if (sn_) {
      sigma_ = sn_->estimate_sigma(w_.value);
      what_ = w_.value / sigma_;
      Mat<S> y = (what_ * x).colwise() + b_.value.col(0);
      check_finite(y, "dense");
      return y;
    }
    Mat<S> y = (w_.value * x).colwise() + b_.value.col(0);
    check_finite(y, "dense");
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) {
    if (dy.rows() != out_ || dy.cols() != x_.cols())
      throw std::invalid_argument("dense: gradient shape mismatch");
    b_.grad += dy.rowwise().sum();
    if (sn_) {
      Mat<S> d_what = dy * x_.transpose();
      w_.grad += sn_->backward(d_what, what_, sigma_);
      Mat<S> dx = what_.transpose() * dy;
      check_finite(dx, "dense backward");
      return dx;
    }
    w_.grad += dy * x_.transpose();
    Mat<S> dx = w_.value.transpose() * dy;
    check_finite(dx, "dense backward");
    return dx;
  }

  void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
    fn(prefix + ".w", w_);
    fn(prefix + ".b", b_);
  }
  void visit_state(const std::string& prefix, const StateVisitor<S>& fn) {
    if (sn_) sn_->visit_state(prefix, fn);
  }

  // Weight as applied in forward (normalized when spectral norm is on).
  Mat<S> effective_weight() const {
    if (!sn_) return w_.value;
    // Uses the current u/v estimate without advancing power iteration.
    Vec<S> u = sn_->u(), v = sn_->v();
    const S sigma = u.dot(w_.value * v);
    return w_.value / sigma;
  }

  void set_sn_frozen(bool f) {
    if (sn_) sn_->frozen = f;
  }
  bool has_sn() const { return sn_.has_value(); }

  Param<S>& w() { return w_; }
  Param<S>& b() { return b_; }
  Eigen::Index in_dim() const { return in_; }
  Eigen::Index out_dim() const { return out_; }

 private:
  Eigen::Index in_, out_;
  Param<S> w_, b_;
  std::optional<SpectralNorm<S>> sn_;
  Mat<S> x_, what_;
  S sigma_ = S(1);
};

}  // namespace imgan::neural
