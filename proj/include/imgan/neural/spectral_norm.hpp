#pragma once

#include <cmath>
#include <stdexcept>

#include "imgan/neural/core.hpp"

namespace imgan::neural {

// Persistent power-iteration state for one weight matrix.  One iteration per
// forward pass (standard practice); `frozen` skips the update so evaluation
// and finite-difference checks see a deterministic function of W.
template <class S>
class SpectralNorm {
 public:
  void attach(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    u_.resize(rows);
    v_.resize(cols);
    for (Eigen::Index i = 0; i < rows; ++i) u_[i] = static_cast<S>(rng.normal());
    for (Eigen::Index i = 0; i < cols; ++i) v_[i] = static_cast<S>(rng.normal());
    u_.normalize();
    v_.normalize();
  }

  // One power-iteration step (unless frozen), then sigma = u^T W v.
  S estimate_sigma(const Mat<S>& w) {
    if (w.rows() != u_.size() || w.cols() != v_.size())
      throw std::invalid_argument("spectral_norm: shape mismatch");
    if (!frozen) {
      v_ = w.transpose() * u_;
      S nv = v_.norm();
      if (nv <= S(0)) throw std::runtime_error("spectral_normalize: zero weight matrix");
      v_ /= nv;
      u_ = w * v_;
      S nu = u_.norm();
      if (nu <= S(0)) throw std::runtime_error("spectral_normalize: zero weight matrix");
      u_ /= nu;
    }
    const S sigma = u_.dot(w * v_);
    if (!(sigma > S(0)))
      throw std::runtime_error("spectral_normalize: zero weight matrix");
    return sigma;
  }

  // Gradient of L wrt W given dL/dW_hat, with W_hat = W / sigma and (u, v)
  // treated as constants: dW = (dW_hat - <dW_hat, W_hat> u v^T) / sigma.
  Mat<S> backward(const Mat<S>& d_what, const Mat<S>& what, S sigma) const {
    const S inner = (d_what.array() * what.array()).sum();
    return (d_what - inner * (u_ * v_.transpose())) / sigma;
  }

  const Vec<S>& u() const { return u_; }
  const Vec<S>& v() const { return v_; }

  void visit_state(const std::string& prefix, const StateVisitor<S>& fn) {
    u_mat_ = u_;
    fn(prefix + ".sn_u", u_mat_);
    u_ = u_mat_;
    v_mat_ = v_;
    fn(prefix + ".sn_v", v_mat_);
    v_ = v_mat_;
  }

  bool frozen = false;

 private:
  Vec<S> u_, v_;
  Mat<S> u_mat_, v_mat_;  // visitor staging (visitors traffic in matrices)
};

}  // namespace imgan::neural
