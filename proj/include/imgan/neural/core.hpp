#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "imgan/common.hpp"

namespace imgan::neural {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// A trainable tensor: value plus an accumulated gradient of the same shape.
template <class S>
struct Param {
  Mat<S> value;
  Mat<S> grad;

  void init_shape(Eigen::Index rows, Eigen::Index cols) {
    value.setZero(rows, cols);
    grad.setZero(rows, cols);
  }
  void zero_grad() { grad.setZero(); }
  Eigen::Index numel() const { return value.size(); }
};

template <class S>
struct ParamRef {
  std::string name;
  Param<S>* p;
};

// Layers expose parameters through a visitor so optimizer attachment,
// checkpointing and gradient checks all see one deterministic ordering.
template <class S>
using ParamVisitor = std::function<void(const std::string&, Param<S>&)>;

// Non-trainable persistent buffers (spectral-norm u/v) use the same shape.
template <class S>
using StateVisitor = std::function<void(const std::string&, Mat<S>&)>;

template <class S>
inline void check_finite(const Mat<S>& m, const char* where) {
  if (!m.allFinite()) throw std::runtime_error(std::string(where) + ": non-finite values");
}

// Xavier/Glorot uniform; the explicit Rng mapping keeps seeded nets
// bit-identical across standard libraries.
template <class S>
void xavier_uniform(Mat<S>& m, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m(i, j) = static_cast<S>(rng.uniform(-limit, limit));
}

// Orthogonal square init via Householder QR with the sign of diag(R) fixed,
// making the result unique and rotation-distributed.
template <class S>
Mat<S> orthogonal_square(Eigen::Index n, Rng& rng) {
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q.template cast<S>();
}

}  // namespace imgan::neural
