#include "dgq/quant.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace dgq {

float fp16_round(float x) {
  uint32_t bits;
  std::memcpy(&bits, &x, 4);
  uint32_t sign = bits & 0x80000000u;
  uint32_t absb = bits & 0x7FFFFFFFu;
  if (absb >= 0x7F800000u) return x;  // inf / NaN pass through
  int32_t exp = int32_t(absb >> 23) - 127;
  uint16_t h;
  if (exp > 15) {
    h = 0x7C00;  // overflow to +inf magnitude
  } else if (exp >= -14) {
    uint32_t mant = absb & 0x7FFFFFu;
    uint32_t kept = mant >> 13;
    uint32_t rem = mant & 0x1FFFu;
    h = uint16_t((uint32_t(exp + 15) << 10) | kept);
    if (rem > 0x1000u || (rem == 0x1000u && (h & 1))) h++;  // may carry into exponent
  } else if (exp >= -24) {
    uint32_t mant = (absb & 0x7FFFFFu) | 0x800000u;
    int shift = -exp - 1;  // in [14, 23]
    uint32_t kept = mant >> shift;
    uint32_t rem = mant & ((1u << shift) - 1);
    uint32_t half = 1u << (shift - 1);
    h = uint16_t(kept);
    if (rem > half || (rem == half && (h & 1))) h++;
  } else {
    h = 0;
  }
  uint32_t hexp = (h >> 10) & 0x1F;
  uint32_t hman = h & 0x3FF;
  uint32_t out;
  if (hexp == 0x1F) {
    out = sign | 0x7F800000u;
  } else if (hexp != 0) {
    out = sign | ((hexp + 112) << 23) | (hman << 13);
  } else if (hman == 0) {
    out = sign;
  } else {
    int e = 0;
    uint32_t m = hman;
    while (!(m & 0x400u)) {
      m <<= 1;
      e--;
    }
    m &= 0x3FFu;
    out = sign | (uint32_t(113 + e) << 23) | (m << 13);
  }
  float r;
  std::memcpy(&r, &out, 4);
  return r;
}

std::pair<size_t, size_t> Granularity::scale_shape(size_t rows, size_t cols) const {
  switch (kind) {
    case GranKind::kPerTensor: return {1, 1};
    case GranKind::kPerRow: return {rows, 1};
    case GranKind::kPerColumn: return {1, cols};
    case GranKind::kPerGroup:
      if (group_size < 1 || rows % group_size != 0) {
        throw std::invalid_argument("group size " + std::to_string(group_size) +
                                    " must divide the row count " + std::to_string(rows));
      }
      return {rows / group_size, cols};
  }
  return {1, 1};
}

namespace {

void check_inputs(const Tensor& t, int n_bits, float alpha) {
  if (t.dtype != Dtype::kF32) throw std::invalid_argument("compute_params expects a float32 tensor");
  if (n_bits < 2 || n_bits > 8) throw std::invalid_argument("n_bits must be in [2, 8]");
  if (!(alpha > 0.0f && alpha <= 1.0f)) throw std::invalid_argument("alpha must be in (0, 1]");
}

}  // namespace

QuantParams compute_params(const Tensor& t, const Granularity& gran, int n_bits,
                           bool symmetric, float alpha) {
  check_inputs(t, n_bits, alpha);
  auto [srows, scols] = gran.scale_shape(t.rows, t.cols);
  size_t n_slices = srows * scols;

  std::vector<float> mn(n_slices, std::numeric_limits<float>::infinity());
  std::vector<float> mx(n_slices, -std::numeric_limits<float>::infinity());
  const float* x = t.f32_data();
  for (size_t r = 0; r < t.rows; ++r) {
    for (size_t c = 0; c < t.cols; ++c) {
      size_t s = gran.slice_index(r, c, t.cols);
      float v = x[r * t.cols + c];
      mn[s] = std::min(mn[s], v);
      mx[s] = std::max(mx[s], v);
    }
  }

  QuantParams p;
  p.n_bits = n_bits;
  p.symmetric = symmetric;
  p.alpha = alpha;
  p.scales = Tensor::f32(srows, scols);
  p.zero_points = Tensor::i32(srows, scols);
  float* s_out = p.scales.f32_data();
  int32_t* zp_out = p.zero_points.i32_data();

  double levels = symmetric ? double((1 << (n_bits - 1)) - 1) : double((1 << n_bits) - 1);
  for (size_t i = 0; i < n_slices; ++i) {
    if (t.empty()) {  // degenerate empty tensor: keep unit params
      s_out[i] = 1.0f;
      zp_out[i] = 0;
      continue;
    }
    double s;
    if (symmetric) {
      double absmax = std::max(std::fabs(double(mn[i])), std::fabs(double(mx[i])));
      s = double(alpha) * absmax / levels;
    } else {
      // the quantization range always includes zero, so one-sided slices do
      // not push the zero-point outside [0, 2^N - 1]
      double lo = std::min(double(mn[i]), 0.0);
      double hi = std::max(double(mx[i]), 0.0);
      s = double(alpha) * (hi - lo) / levels;
    }
    float sf = float(std::max(s, double(kScaleFloor)));
    s_out[i] = sf;
    if (symmetric) {
      zp_out[i] = 0;
    } else {
      double lo = std::min(double(mn[i]), 0.0);
      double zp = round_half_even(-double(alpha) * lo / double(sf));
      zp_out[i] = int32_t(std::clamp(zp, 0.0, levels));
    }
  }
  return p;
}

Tensor quantize(const Tensor& t, const QuantParams& p, const Granularity& gran) {
  if (t.dtype != Dtype::kF32) throw std::invalid_argument("quantize expects a float32 tensor");
  auto shape = gran.scale_shape(t.rows, t.cols);
  if (shape.first != p.scales.rows || shape.second != p.scales.cols) {
    throw std::invalid_argument("QuantParams shape does not match granularity");
  }
  Tensor q = Tensor::i32(t.rows, t.cols);
  const float* x = t.f32_data();
  const float* s = p.scales.f32_data();
  const int32_t* zp = p.zero_points.i32_data();
  int32_t* out = q.i32_data();
  const double lo = p.qmin();
  const double hi = p.qmax();
  for (size_t r = 0; r < t.rows; ++r) {
    for (size_t c = 0; c < t.cols; ++c) {
      size_t i = gran.slice_index(r, c, t.cols);
      double code = round_half_even(double(x[r * t.cols + c]) / double(s[i])) + double(zp[i]);
      out[r * t.cols + c] = int32_t(std::clamp(code, lo, hi));
    }
  }
  return q;
}

Tensor dequantize(const Tensor& q, const QuantParams& p, const Granularity& gran) {
  if (q.dtype != Dtype::kI32) throw std::invalid_argument("dequantize expects int32 codes");
  auto shape = gran.scale_shape(q.rows, q.cols);
  if (shape.first != p.scales.rows || shape.second != p.scales.cols) {
    throw std::invalid_argument("QuantParams shape does not match granularity");
  }
  Tensor out = Tensor::f32(q.rows, q.cols);
  const int32_t* codes = q.i32_data();
  const float* s = p.scales.f32_data();
  const int32_t* zp = p.zero_points.i32_data();
  float* y = out.f32_data();
  for (size_t r = 0; r < q.rows; ++r) {
    for (size_t c = 0; c < q.cols; ++c) {
      size_t i = gran.slice_index(r, c, q.cols);
      y[r * q.cols + c] = float(double(codes[r * q.cols + c] - zp[i]) * double(s[i]));
    }
  }
  return out;
}

}  // namespace dgq
