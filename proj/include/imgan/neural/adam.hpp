#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "imgan/neural/core.hpp"

namespace imgan::neural {

// Adam with bias correction over an attached parameter list.  Moment buffers
// follow the attachment order, which must stay stable for checkpointing.
template <class S>
class Adam {
 public:
  explicit Adam(S lr, S beta1 = S(0.9), S beta2 = S(0.999), S eps = S(1e-8))
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void attach(std::vector<ParamRef<S>> params) {
    params_ = std::move(params);
    m_.clear();
    v_.clear();
    for (const auto& pr : params_) {
      m_.push_back(Mat<S>::Zero(pr.p->value.rows(), pr.p->value.cols()));
      v_.push_back(Mat<S>::Zero(pr.p->value.rows(), pr.p->value.cols()));
    }
    t_ = 0;
  }

  void zero_grad() {
    for (auto& pr : params_) pr.p->zero_grad();
  }

  void step() {
    ++t_;
    const S bc1 = S(1) - std::pow(b1_, static_cast<S>(t_));
    const S bc2 = S(1) - std::pow(b2_, static_cast<S>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param<S>& p = *params_[i].p;
      if (!p.grad.allFinite())
        throw std::runtime_error("adam: diverged at parameter " + params_[i].name);
      m_[i] = b1_ * m_[i] + (S(1) - b1_) * p.grad;
      v_[i] = b2_ * v_[i] + (S(1) - b2_) * p.grad.cwiseProduct(p.grad);
      p.value.array() -=
          lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
    }
  }

  std::uint64_t step_count() const { return t_; }
  void set_step_count(std::uint64_t t) { t_ = t; }
  std::size_t size() const { return params_.size(); }
  const std::string& name_at(std::size_t i) const { return params_[i].name; }
  Mat<S>& m_at(std::size_t i) { return m_[i]; }
  Mat<S>& v_at(std::size_t i) { return v_[i]; }
  S lr() const { return lr_; }

 private:
  S lr_, b1_, b2_, eps_;
  std::vector<ParamRef<S>> params_;
  std::vector<Mat<S>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace imgan::neural
