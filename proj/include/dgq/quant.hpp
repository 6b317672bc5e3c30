#pragma once
// Uniform integer quantization under the four granularities used by the
// toolkit: per-tensor, per-row (token), per-column (output channel) and
// per-group along the reduction axis.
//
// Conventions, fixed once for the whole project:
//   * rounding is round-half-to-even,
//   * degenerate slices (max == min) floor the scale at kScaleFloor,
//   * signed symmetric ranges are +/-(2^(N-1) - 1), never -2^(N-1),
//   * asymmetric codes are unsigned with zero_point in [0, 2^N - 1] and
//     dequantization (q - zp) * s.

#include <cmath>
#include <cstdint>
#include <utility>

#include "dgq/tensor.hpp"

namespace dgq {

constexpr float kScaleFloor = 1e-8f;

// Round-half-to-even, independent of the FP environment.
inline double round_half_even(double v) {
  double fl = std::floor(v);
  double diff = v - fl;
  if (diff > 0.5) return fl + 1.0;
  if (diff < 0.5) return fl;
  return (std::fmod(fl, 2.0) == 0.0) ? fl : fl + 1.0;
}

// Round a float to the nearest IEEE binary16 value and back (ties to even).
// Used by the optional half-precision scale-storage mode.
float fp16_round(float x);

enum class GranKind { kPerTensor, kPerRow, kPerColumn, kPerGroup };

struct Granularity {
  GranKind kind = GranKind::kPerTensor;
  size_t group_size = 0;  // PerGroup only; must divide the row count

  static Granularity per_tensor() { return {GranKind::kPerTensor, 0}; }
  static Granularity per_row() { return {GranKind::kPerRow, 0}; }
  static Granularity per_column() { return {GranKind::kPerColumn, 0}; }
  static Granularity per_group(size_t g) { return {GranKind::kPerGroup, g}; }

  // scale/zero-point matrix shape for a rows x cols tensor; validates the
  // group size against the row count.
  std::pair<size_t, size_t> scale_shape(size_t rows, size_t cols) const;

  size_t slice_index(size_t r, size_t c, size_t cols) const {
    switch (kind) {
      case GranKind::kPerTensor: return 0;
      case GranKind::kPerRow: return r;
      case GranKind::kPerColumn: return c;
      case GranKind::kPerGroup: return (r / group_size) * cols + c;
    }
    return 0;
  }
};

struct QuantParams {
  Tensor scales;       // f32, shaped by granularity
  Tensor zero_points;  // i32, same shape; all zero when symmetric
  int n_bits = 8;
  bool symmetric = true;
  float alpha = 1.0f;

  int qmin() const { return symmetric ? -((1 << (n_bits - 1)) - 1) : 0; }
  int qmax() const { return symmetric ? ((1 << (n_bits - 1)) - 1) : ((1 << n_bits) - 1); }
};

// Derive scales and zero-points from data.
//   asymmetric: s = alpha*(max-min)/(2^N-1), zp = clamp(rhe(-alpha*min/s), 0, 2^N-1)
//   symmetric:  s = alpha*max|x|/(2^(N-1)-1), zp = 0
QuantParams compute_params(const Tensor& t, const Granularity& gran, int n_bits,
                           bool symmetric, float alpha);

// codes = clamp(rhe(x/s) + zp, qmin, qmax), returned as an int32 tensor.
Tensor quantize(const Tensor& t, const QuantParams& p, const Granularity& gran);

// x_hat = (q - zp) * s
Tensor dequantize(const Tensor& q, const QuantParams& p, const Granularity& gran);

}  // namespace dgq
