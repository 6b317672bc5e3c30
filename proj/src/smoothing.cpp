#include "dgq/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dgq {

std::vector<float> channel_maxima(const std::vector<Tensor>& calib) {
  if (calib.empty()) throw std::invalid_argument("empty calibration set");
  size_t h = calib.front().cols;
  std::vector<float> z(h, 0.0f);
  for (const Tensor& t : calib) {
    if (t.dtype != Dtype::kF32) throw std::invalid_argument("calibration tensors must be float32");
    if (t.cols != h) throw std::invalid_argument("calibration tensors disagree on channel count");
    const float* x = t.f32_data();
    for (size_t r = 0; r < t.rows; ++r) {
      for (size_t c = 0; c < h; ++c) {
        z[c] = std::max(z[c], std::fabs(x[r * h + c]));
      }
    }
  }
  return z;
}

SmoothScale compute_smooth(const std::vector<float>& z, float percentile) {
  if (z.empty()) throw std::invalid_argument("compute_smooth needs at least one channel");
  if (!(percentile > 0.0f && percentile < 1.0f)) {
    throw std::invalid_argument("percentile must be in (0, 1)");
  }
  size_t rank = size_t(std::ceil(double(percentile) * double(z.size())));
  rank = std::max<size_t>(rank, 1);
  std::vector<float> sorted = z;
  std::nth_element(sorted.begin(), sorted.begin() + (rank - 1), sorted.end(),
                   std::greater<float>());
  float threshold = sorted[rank - 1];
  if (!(threshold > 0.0f)) {
    throw std::invalid_argument("smoothing undefined: percentile threshold is not positive "
                                "(all-zero calibration?)");
  }
  SmoothScale s;
  s.threshold = threshold;
  s.percentile = percentile;
  s.k.resize(z.size());
  for (size_t j = 0; j < z.size(); ++j) {
    s.k[j] = std::max(1.0f, z[j] / threshold);
  }
  return s;
}

Tensor smooth_activations(const Tensor& X, const SmoothScale& s) {
  if (X.cols != s.k.size()) throw std::invalid_argument("smoothing vector length != activation channels");
  Tensor out = Tensor::f32(X.rows, X.cols);
  const float* x = X.f32_data();
  float* y = out.f32_data();
  for (size_t r = 0; r < X.rows; ++r) {
    for (size_t c = 0; c < X.cols; ++c) {
      y[r * X.cols + c] = x[r * X.cols + c] / s.k[c];
    }
  }
  return out;
}

Tensor smooth_weights(const Tensor& W, const SmoothScale& s) {
  if (W.rows != s.k.size()) throw std::invalid_argument("smoothing vector length != weight rows");
  Tensor out = Tensor::f32(W.rows, W.cols);
  const float* w = W.f32_data();
  float* y = out.f32_data();
  for (size_t r = 0; r < W.rows; ++r) {
    for (size_t c = 0; c < W.cols; ++c) {
      y[r * W.cols + c] = s.k[r] * w[r * W.cols + c];
    }
  }
  return out;
}

std::pair<Tensor, Tensor> apply_smooth(const Tensor& X, const Tensor& W,
                                       const SmoothScale& s) {
  if (X.cols != W.rows) throw std::invalid_argument("X cols must equal W rows");
  return {smooth_activations(X, s), smooth_weights(W, s)};
}

}  // namespace dgq
