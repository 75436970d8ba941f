#include "imgan/metrics.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "imgan/dsp.hpp"
#include "imgan/resample.hpp"

namespace imgan::metrics {

std::string MetricSelection::to_string() const {
  if (siib && estoi) return "siib+estoi";
  if (siib) return "siib";
  if (estoi) return "estoi";
  return "none";
}

MetricSelection MetricSelection::parse(const std::string& s) {
  if (s == "siib") return {true, false};
  if (s == "estoi") return {false, true};
  if (s == "siib+estoi") return {true, true};
  throw std::invalid_argument("MetricSelection: unknown selection '" + s + "'");
}

namespace {

constexpr double kTiny = 1e-20;

void check_pair(const Waveform& ref, const Waveform& deg) {
  if (ref.size() != deg.size()) throw std::invalid_argument("metric: length mismatch");
  if (ref.sample_rate != deg.sample_rate)
    throw std::invalid_argument("metric: sample rate mismatch");
  if (ref.empty()) throw std::invalid_argument("metric: empty input");
}

// Zero-mean, unit-norm rows in place; all-silent rows stay zero.
void normalize_rows(Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    m.row(i).array() -= m.row(i).mean();
    const double n = m.row(i).norm();
    if (n > kTiny) m.row(i) /= n;
  }
}

void normalize_cols(Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    m.col(j).array() -= m.col(j).mean();
    const double n = m.col(j).norm();
    if (n > kTiny) m.col(j) /= n;
  }
}

}  // namespace

double estoi(const Waveform& ref, const Waveform& deg) {
  check_pair(ref, deg);
  constexpr int kRate = 10000;
  constexpr int kWin = 512, kHop = 256, kSegment = 30;

  Waveform r = dsp::resample(ref, kRate);
  Waveform d = dsp::resample(deg, kRate);
  auto [ra, da] = dsp::remove_silent_frames(r, d);

  if (ra.size() < kWin + (kSegment - 1) * kHop)
    throw std::runtime_error("estoi: signal too short");

  Eigen::MatrixXd x_bands = dsp::third_octave_bands(
      dsp::stft_frames(ra.samples, kWin, kHop, kWin).cwiseAbs(), kRate, kWin);
  Eigen::MatrixXd y_bands = dsp::third_octave_bands(
      dsp::stft_frames(da.samples, kWin, kHop, kWin).cwiseAbs(), kRate, kWin);

  const Eigen::Index frames = x_bands.cols();
  if (frames < kSegment) throw std::runtime_error("estoi: signal too short");

  double acc = 0.0;
  for (Eigen::Index m = 0; m + kSegment <= frames; ++m) {
    Eigen::MatrixXd x = x_bands.middleCols(m, kSegment);
    Eigen::MatrixXd y = y_bands.middleCols(m, kSegment);
    normalize_rows(x);
    normalize_rows(y);
    normalize_cols(x);
    normalize_cols(y);
    acc += x.cwiseProduct(y).sum() / kSegment;
  }
  return acc / static_cast<double>(frames - kSegment + 1);
}

double siib(const Waveform& ref, const Waveform& deg, const SiibOptions& opt) {
  check_pair(ref, deg);

  Waveform r = dsp::resample(ref, opt.internal_rate);
  Waveform d = dsp::resample(deg, opt.internal_rate);
  auto [ra, da] = dsp::remove_silent_frames(r, d);

  const int frame = static_cast<int>(std::lround(0.025 * opt.internal_rate));
  const int hop = frame / 2;
  if (ra.size() < frame) throw std::runtime_error("siib: insufficient speech material");

  Eigen::MatrixXd ex = dsp::gammatone_bank(ra, opt.n_filters, opt.f_lo, opt.f_hi);
  Eigen::MatrixXd ey = dsp::gammatone_bank(da, opt.n_filters, opt.f_lo, opt.f_hi);

  // Covariance over frames needs a few frames per channel to be usable.
  const Eigen::Index frames = ex.cols();
  if (frames < 3 * opt.n_filters)
    throw std::runtime_error("siib: insufficient speech material");

  Eigen::MatrixXd x = (ex.array() + kTiny).log().matrix();
  Eigen::MatrixXd y = (ey.array() + kTiny).log().matrix();
  x.colwise() -= x.rowwise().mean().eval();
  y.colwise() -= y.rowwise().mean().eval();

  // KLT from the reference covariance decorrelates the clean channels; the
  // same rotation is applied to both signals.
  Eigen::MatrixXd cov = x * x.transpose() / static_cast<double>(frames - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw std::runtime_error("siib: eigendecomposition failed");
  Eigen::MatrixXd a = es.eigenvectors().transpose() * x;
  Eigen::MatrixXd b = es.eigenvectors().transpose() * y;

  const double r_sq = opt.r_production * opt.r_production;
  double bits_per_frame = 0.0;
  for (int k = 0; k < opt.n_filters; ++k) {
    const double na = a.row(k).squaredNorm();
    const double nb = b.row(k).squaredNorm();
    double rho = 0.0;
    if (na > kTiny && nb > kTiny) rho = a.row(k).dot(b.row(k)) / std::sqrt(na * nb);
    bits_per_frame += -0.5 * std::log2(1.0 - r_sq * rho * rho);
  }

  const double frame_rate = static_cast<double>(opt.internal_rate) / hop;
  return bits_per_frame * frame_rate;
}

double normalize_siib(double raw, double r_max) {
  if (raw < 0.0) throw std::invalid_argument("normalize_siib: negative raw score");
  if (r_max <= 0.0) throw std::invalid_argument("normalize_siib: non-positive r_max");
  return std::min(raw / r_max, 1.0);
}

MetricScores q_scores(const Waveform& processed, const Waveform& unprocessed,
                      const Waveform& noise, const MetricSelection& sel, double r_max) {
  if (processed.size() != unprocessed.size() || processed.size() != noise.size())
    throw std::invalid_argument("q_scores: length mismatch");
  if (processed.sample_rate != unprocessed.sample_rate ||
      processed.sample_rate != noise.sample_rate)
    throw std::invalid_argument("q_scores: sample rate mismatch");
  if (sel.k() == 0) throw std::invalid_argument("q_scores: empty metric selection");

  Waveform degraded{processed.samples + noise.samples, processed.sample_rate};

  MetricScores out;
  if (sel.siib) {
    out.siib_raw = siib(unprocessed, degraded);
    out.siib_norm = normalize_siib(*out.siib_raw, r_max);
  }
  if (sel.estoi) out.estoi = estoi(unprocessed, degraded);
  return out;
}

}  // namespace imgan::metrics
