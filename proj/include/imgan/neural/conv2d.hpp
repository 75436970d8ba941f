#pragma once

#include <optional>
#include <string>
#include <vector>

#include "imgan/neural/core.hpp"
#include "imgan/neural/spectral_norm.hpp"

namespace imgan::neural {

// Channel-major 2-D feature stack; each channel is rows(F) x cols(T).
template <class S>
struct FeatureMap {
  std::vector<Mat<S>> ch;

  FeatureMap() = default;
  FeatureMap(int channels, Eigen::Index rows, Eigen::Index cols) {
    ch.assign(channels, Mat<S>::Zero(rows, cols));
  }
  int channels() const { return static_cast<int>(ch.size()); }
  Eigen::Index rows() const { return ch.empty() ? 0 : ch[0].rows(); }
  Eigen::Index cols() const { return ch.empty() ? 0 : ch[0].cols(); }
};

template <class S>
inline void check_finite(const FeatureMap<S>& m, const char* where) {
  for (const auto& c : m.ch) check_finite(c, where);
}

// Cross-correlation with SAME padding (extra padding goes bottom/right).
// Kernels live in one out_ch x (in_ch*kh*kw) matrix, which is exactly the
// 2-D reshape spectral normalization needs.  The im2col patch matrix is
// built in column chunks to bound the workspace.
template <class S>
class Conv2d {
 public:
  Conv2d(int in_ch, int out_ch, int kh, int kw, int stride_r = 1, int stride_c = 1,
         bool spectral_norm = false)
      : in_ch_(in_ch), out_ch_(out_ch), kh_(kh), kw_(kw), sr_(stride_r), sc_(stride_c) {
    if (in_ch < 1 || out_ch < 1 || kh < 1 || kw < 1 || stride_r < 1 || stride_c < 1)
      throw std::invalid_argument("conv2d: bad geometry");
    w_.init_shape(out_ch, static_cast<Eigen::Index>(in_ch) * kh * kw);
    b_.init_shape(out_ch, 1);
    if (spectral_norm) sn_.emplace();
  }

  void init(Rng& rng) {
    xavier_uniform(w_.value, w_.value.cols(), out_ch_, rng);
    b_.value.setZero();
    if (sn_) sn_->attach(w_.value.rows(), w_.value.cols(), rng);
  }

  FeatureMap<S> forward(const FeatureMap<S>& x) {
    if (x.channels() != in_ch_) throw std::invalid_argument("conv2d: channel mismatch");
    x_ = x;
    geometry(x.rows(), x.cols());

    const Mat<S>* weight = &w_.value;
    if (sn_) {
      sigma_ = sn_->estimate_sigma(w_.value);
      what_ = w_.value / sigma_;
      weight = &what_;
    }

    FeatureMap<S> y(out_ch_, out_f_, out_t_);
    Mat<S> patches;
    for (Eigen::Index t0 = 0; t0 < out_t_; t0 += chunk_) {
      const Eigen::Index nt = std::min<Eigen::Index>(chunk_, out_t_ - t0);
      im2col(x, t0, nt, patches);
      Mat<S> yc = (*weight) * patches;  // out_ch x (out_f*nt)
      yc.colwise() += b_.value.col(0);
      for (int c = 0; c < out_ch_; ++c)
        for (Eigen::Index j = 0; j < nt; ++j)
          y.ch[c].col(t0 + j) = yc.row(c).segment(j * out_f_, out_f_).transpose();
    }
    check_finite(y, "conv2d");
    return y;
  }

  FeatureMap<S> backward(const FeatureMap<S>& dy) {
    if (dy.channels() != out_ch_ || dy.rows() != out_f_ || dy.cols() != out_t_)
      throw std::invalid_argument("conv2d: gradient shape mismatch");

    const Mat<S>* weight = sn_ ? &what_ : &w_.value;
    Mat<S> d_weight = Mat<S>::Zero(w_.value.rows(), w_.value.cols());
    FeatureMap<S> dx(in_ch_, x_.rows(), x_.cols());

    Mat<S> patches, dyc(out_ch_, 0);
    for (Eigen::Index t0 = 0; t0 < out_t_; t0 += chunk_) {
      const Eigen::Index nt = std::min<Eigen::Index>(chunk_, out_t_ - t0);
      im2col(x_, t0, nt, patches);
      dyc.resize(out_ch_, out_f_ * nt);
      for (int c = 0; c < out_ch_; ++c)
        for (Eigen::Index j = 0; j < nt; ++j)
          dyc.row(c).segment(j * out_f_, out_f_) = dy.ch[c].col(t0 + j).transpose();

      d_weight += dyc * patches.transpose();
      b_.grad += dyc.rowwise().sum();
      Mat<S> dp = weight->transpose() * dyc;
      col2im(dp, t0, nt, dx);
    }

    if (sn_) {
      w_.grad += sn_->backward(d_weight, what_, sigma_);
    } else {
      w_.grad += d_weight;
    }
    check_finite(dx, "conv2d backward");
    return dx;
  }

  void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
    fn(prefix + ".w", w_);
    fn(prefix + ".b", b_);
  }
  void visit_state(const std::string& prefix, const StateVisitor<S>& fn) {
    if (sn_) sn_->visit_state(prefix, fn);
  }

  Mat<S> effective_weight() const {
    if (!sn_) return w_.value;
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
  int out_channels() const { return out_ch_; }

 private:
  void geometry(Eigen::Index f, Eigen::Index t) {
    out_f_ = (f + sr_ - 1) / sr_;
    out_t_ = (t + sc_ - 1) / sc_;
    const Eigen::Index pad_f = std::max<Eigen::Index>(0, (out_f_ - 1) * sr_ + kh_ - f);
    const Eigen::Index pad_t = std::max<Eigen::Index>(0, (out_t_ - 1) * sc_ + kw_ - t);
    pad_top_ = pad_f / 2;
    pad_left_ = pad_t / 2;
    // Bound the im2col workspace near 8 MB.
    const Eigen::Index patch_rows = static_cast<Eigen::Index>(in_ch_) * kh_ * kw_;
    chunk_ = std::max<Eigen::Index>(1, (8u << 20) / sizeof(S) / std::max<Eigen::Index>(1, patch_rows * out_f_));
  }

  // Patch layout: row = c*kh*kw + dr*kw + dc; column = j*out_f + r_o for the
  // j-th chunk column.
  void im2col(const FeatureMap<S>& x, Eigen::Index t0, Eigen::Index nt, Mat<S>& p) const {
    const Eigen::Index rows = static_cast<Eigen::Index>(in_ch_) * kh_ * kw_;
    p.setZero(rows, out_f_ * nt);
    for (Eigen::Index j = 0; j < nt; ++j) {
      const Eigen::Index tc = (t0 + j) * sc_ - pad_left_;
      for (Eigen::Index ro = 0; ro < out_f_; ++ro) {
        const Eigen::Index rr = ro * sr_ - pad_top_;
        const Eigen::Index col = j * out_f_ + ro;
        for (int c = 0; c < in_ch_; ++c) {
          const Mat<S>& src = x.ch[c];
          for (int dr = 0; dr < kh_; ++dr) {
            const Eigen::Index r = rr + dr;
            if (r < 0 || r >= src.rows()) continue;
            for (int dc = 0; dc < kw_; ++dc) {
              const Eigen::Index t = tc + dc;
              if (t < 0 || t >= src.cols()) continue;
              p(static_cast<Eigen::Index>(c) * kh_ * kw_ + dr * kw_ + dc, col) = src(r, t);
            }
          }
        }
      }
    }
  }

  void col2im(const Mat<S>& dp, Eigen::Index t0, Eigen::Index nt, FeatureMap<S>& dx) const {
    for (Eigen::Index j = 0; j < nt; ++j) {
      const Eigen::Index tc = (t0 + j) * sc_ - pad_left_;
      for (Eigen::Index ro = 0; ro < out_f_; ++ro) {
        const Eigen::Index rr = ro * sr_ - pad_top_;
        const Eigen::Index col = j * out_f_ + ro;
        for (int c = 0; c < in_ch_; ++c) {
          Mat<S>& dst = dx.ch[c];
          for (int dr = 0; dr < kh_; ++dr) {
            const Eigen::Index r = rr + dr;
            if (r < 0 || r >= dst.rows()) continue;
            for (int dc = 0; dc < kw_; ++dc) {
              const Eigen::Index t = tc + dc;
              if (t < 0 || t >= dst.cols()) continue;
              dst(r, t) += dp(static_cast<Eigen::Index>(c) * kh_ * kw_ + dr * kw_ + dc, col);
            }
          }
        }
      }
    }
  }

  int in_ch_, out_ch_, kh_, kw_, sr_, sc_;
  Param<S> w_, b_;
  std::optional<SpectralNorm<S>> sn_;
  FeatureMap<S> x_;
  Mat<S> what_;
  S sigma_ = S(1);
  Eigen::Index out_f_ = 0, out_t_ = 0, pad_top_ = 0, pad_left_ = 0, chunk_ = 1;
};

// Per-channel spatial mean; output width equals the channel count.
template <class S>
class GlobalAvgPool {
 public:
  Mat<S> forward(const FeatureMap<S>& x) {
    if (x.channels() == 0 || x.rows() == 0 || x.cols() == 0)
      throw std::invalid_argument("global_avg_pool: empty map");
    rows_ = x.rows();
    cols_ = x.cols();
    Mat<S> y(x.channels(), 1);
    for (int c = 0; c < x.channels(); ++c) y(c, 0) = x.ch[c].mean();
    return y;
  }

  FeatureMap<S> backward(const Mat<S>& dy, int channels) const {
    FeatureMap<S> dx(channels, rows_, cols_);
    const S scale = S(1) / static_cast<S>(rows_ * cols_);
    for (int c = 0; c < channels; ++c) dx.ch[c].setConstant(dy(c, 0) * scale);
    return dx;
  }

 private:
  Eigen::Index rows_ = 0, cols_ = 0;
};

// LeakyReLU over feature maps (the matrix variant lives in activations.hpp).
template <class S>
class FmLeakyRelu {
 public:
  explicit FmLeakyRelu(S slope = S(0.3)) : slope_(slope) {}

  FeatureMap<S> forward(const FeatureMap<S>& x) {
    masks_.resize(x.channels());
    FeatureMap<S> y(x.channels(), x.rows(), x.cols());
    for (int c = 0; c < x.channels(); ++c) {
      masks_[c] = (x.ch[c].array() > S(0)).template cast<S>() * (S(1) - slope_) + slope_;
      y.ch[c] = x.ch[c].cwiseProduct(masks_[c]);
    }
    return y;
  }

  FeatureMap<S> backward(const FeatureMap<S>& dy) const {
    FeatureMap<S> dx(dy.channels(), dy.rows(), dy.cols());
    for (int c = 0; c < dy.channels(); ++c) dx.ch[c] = dy.ch[c].cwiseProduct(masks_[c]);
    return dx;
  }

 private:
  S slope_;
  std::vector<Mat<S>> masks_;
};

}  // namespace imgan::neural
