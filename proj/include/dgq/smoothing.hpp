#pragma once
// Percentile-clipping smoothing: per-in-channel scales k derived from
// calibration activation maxima. Activations are divided by k and weights
// multiplied by k, which leaves the layer output unchanged in real
// arithmetic while pulling activation outliers down to the percentile
// threshold and amplifying the matching weight channels.

#include <utility>
#include <vector>

#include "dgq/tensor.hpp"

namespace dgq {

struct SmoothScale {
  std::vector<float> k;     // length h, k[j] >= 1
  float threshold = 0.0f;   // the top-percentile clipping value
  float percentile = 0.005f;
};

// z[j] = max |X[:, j]| over all calibration tensors.
std::vector<float> channel_maxima(const std::vector<Tensor>& calib);

// threshold = ceil(percentile * h)-th largest entry of z (rank floored at 1);
// k[j] = max(1, z[j] / threshold). Throws if the threshold is not positive.
SmoothScale compute_smooth(const std::vector<float>& z, float percentile);

// X'[:, j] = X[:, j] / k[j], unchanged shape.
Tensor smooth_activations(const Tensor& X, const SmoothScale& s);

// W'[j, :] = k[j] * W[j, :].
Tensor smooth_weights(const Tensor& W, const SmoothScale& s);

// Both halves at once; X'W' == XW in real arithmetic.
std::pair<Tensor, Tensor> apply_smooth(const Tensor& X, const Tensor& W,
                                       const SmoothScale& s);

}  // namespace dgq
