#pragma once

#include <cmath>

#include "imgan/neural/core.hpp"

namespace imgan::neural {

// Stateless elementwise maps; the layer classes below add the caching needed
// for backprop.

template <class S>
S scale_activation_scalar(S m) {
  return std::exp(S(1.5) + S(4) * std::tanh(m));
}

// LeakyReLU over a matrix; caches the slope mask from forward.
template <class S>
class LeakyRelu {
 public:
  explicit LeakyRelu(S slope = S(0.3)) : slope_(slope) {}

  Mat<S> forward(const Mat<S>& x) {
    mask_ = (x.array() > S(0)).template cast<S>() * (S(1) - slope_) + slope_;
    Mat<S> y = x.cwiseProduct(mask_);
    check_finite(y, "leaky_relu");
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) const { return dy.cwiseProduct(mask_); }

  S slope() const { return slope_; }

 private:
  S slope_;
  Mat<S> mask_;
};

// Logistic output layer.
template <class S>
class Sigmoid {
 public:
  Mat<S> forward(const Mat<S>& x) {
    y_ = ((-x.array()).exp() + S(1)).inverse();
    check_finite(y_, "sigmoid");
    return y_;
  }

  Mat<S> backward(const Mat<S>& dy) const {
    return dy.array() * y_.array() * (S(1) - y_.array());
  }

 private:
  Mat<S> y_;
};

// Bounded mask output exp(1.5 + 4 tanh(m)): range [e^-2.5, e^5.5].
template <class S>
class ScaleActivation {
 public:
  Mat<S> forward(const Mat<S>& m) {
    th_ = m.array().tanh();
    y_ = (S(1.5) + S(4) * th_.array()).exp();
    check_finite(y_, "scale_activation");
    return y_;
  }

  Mat<S> backward(const Mat<S>& dy) const {
    return dy.array() * y_.array() * S(4) * (S(1) - th_.array().square());
  }

 private:
  Mat<S> th_;
  Mat<S> y_;
};

}  // namespace imgan::neural
