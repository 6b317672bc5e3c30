#include "dgq/kernel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dgq/parallel.hpp"
#include "dgq/quant.hpp"

namespace dgq {

ActQuant quantize_activations(const Tensor& X, const DgqLayer& layer) {
  if (X.dtype != Dtype::kF32) throw std::invalid_argument("activations must be float32");
  if (X.cols != layer.h) {
    throw std::invalid_argument("activation columns " + std::to_string(X.cols) +
                                " != layer h " + std::to_string(layer.h));
  }
  const size_t b = X.rows, h = X.cols;
  ActQuant out;
  out.codes = Tensor::i8(b, h);
  out.row_scales.resize(b);
  const float* x = X.f32_data();
  int8_t* q = out.codes.i8_data();
  std::vector<float> row(h);
  for (size_t r = 0; r < b; ++r) {
    for (size_t j = 0; j < h; ++j) row[j] = x[r * h + j] / layer.k[j];
    float s;
    if (layer.mode == ActMode::kDynamic) {
      float absmax = 0.0f;
      for (float v : row) absmax = std::max(absmax, std::fabs(v));
      s = float(std::max(double(absmax) / 127.0, double(kScaleFloor)));
    } else {
      s = layer.act_scale;
    }
    out.row_scales[r] = s;
    for (size_t j = 0; j < h; ++j) {
      double code = round_half_even(double(row[j]) / double(s));
      q[r * h + j] = int8_t(std::clamp(code, -127.0, 127.0));
    }
  }
  return out;
}

IntGemmResult int8_gemm(const Tensor& Xq, const Tensor& Wq, int threads) {
  if (Xq.dtype != Dtype::kI8 || Wq.dtype != Dtype::kI8) {
    throw std::invalid_argument("int8_gemm expects int8 operands");
  }
  if (Xq.cols != Wq.rows) throw std::invalid_argument("inner dimensions disagree");
  const size_t b = Xq.rows, h = Xq.cols, o = Wq.cols;
  if (double(h) * 127.0 * 127.0 >= 2147483648.0) {
    throw std::invalid_argument("h too large for 32-bit accumulation");
  }
  IntGemmResult res;
  res.acc = Tensor::i32(b, o);

  // Transposed copy keeps the inner dot product contiguous on both sides.
  std::vector<int8_t> wt(h * o);
  const int8_t* w = Wq.i8_data();
  for (size_t i = 0; i < h; ++i) {
    for (size_t c = 0; c < o; ++c) wt[c * h + i] = w[i * o + c];
  }
  const int8_t* xd = Xq.i8_data();
  int32_t* acc = res.acc.i32_data();
  std::vector<int64_t> row_max(b, 0);
  parallel_for(b, threads, [&](size_t r) {
    const int8_t* xrow = xd + r * h;
    int64_t local_max = 0;
    for (size_t c = 0; c < o; ++c) {
      const int8_t* wcol = wt.data() + c * h;
      int64_t sum = 0;
      for (size_t i = 0; i < h; ++i) {
        sum += int64_t(xrow[i]) * int64_t(wcol[i]);
        int64_t a = sum < 0 ? -sum : sum;
        if (a > local_max) local_max = a;
      }
      acc[r * o + c] = int32_t(sum);
    }
    row_max[r] = local_max;
  });
  for (int64_t m : row_max) res.max_abs_acc = std::max(res.max_abs_acc, m);
  if (res.max_abs_acc > int64_t(std::numeric_limits<int32_t>::max())) {
    throw std::runtime_error("int8_gemm accumulator overflow despite precondition");
  }
  return res;
}

Tensor epilogue(const Tensor& acc, const std::vector<float>& row_scales,
                const std::vector<float>& s1, const std::vector<float>& bias,
                bool fp16_mode) {
  if (acc.dtype != Dtype::kI32) throw std::invalid_argument("epilogue expects int32 accumulators");
  if (row_scales.size() != acc.rows || s1.size() != acc.cols) {
    throw std::invalid_argument("scale vector lengths do not match the accumulator shape");
  }
  if (!bias.empty() && bias.size() != acc.cols) {
    throw std::invalid_argument("bias length must equal the output width");
  }
  Tensor out = Tensor::f32(acc.rows, acc.cols);
  const int32_t* a = acc.i32_data();
  float* y = out.f32_data();
  for (size_t r = 0; r < acc.rows; ++r) {
    for (size_t c = 0; c < acc.cols; ++c) {
      float v;
      if (fp16_mode) {
        float s = fp16_round(fp16_round(row_scales[r]) * fp16_round(s1[c]));
        v = fp16_round(float(a[r * acc.cols + c]) * s);
      } else {
        v = float(a[r * acc.cols + c]) * row_scales[r] * s1[c];
      }
      if (!bias.empty()) v += bias[c];
      y[r * acc.cols + c] = v;
    }
  }
  return out;
}

Tensor segmented_gemm_reference(const ActQuant& act, const DgqLayer& layer) {
  const Tensor& Xq = act.codes;
  if (Xq.cols != layer.h) throw std::invalid_argument("activation shape mismatch");
  const size_t b = Xq.rows, h = layer.h, o = layer.o, g = layer.g;
  const size_t n_g = layer.n_g();
  Tensor out = Tensor::f32(b, o);
  const int8_t* x = Xq.i8_data();
  float* y = out.f32_data();
  for (size_t r = 0; r < b; ++r) {
    for (size_t c = 0; c < o; ++c) {
      float fsum = 0.0f;
      for (size_t k = 0; k < n_g; ++k) {
        int64_t partial = 0;
        int32_t zp = layer.zp.u4_at(k, c);
        for (size_t j = 0; j < g; ++j) {
          size_t i = k * g + j;
          partial += int64_t(x[r * h + i]) * int64_t(int32_t(layer.codes.u4_at(i, c)) - zp);
        }
        fsum += float(int64_t(layer.s2.i8_at(k, c)) * partial);
      }
      y[r * o + c] = fsum * act.row_scales[r] * layer.s1[c];
    }
  }
  return out;
}

ForwardResult dgq_forward(const Tensor& X, const DgqLayer& layer,
                          const std::vector<float>& bias, int threads) {
  ForwardResult res;
  res.w_s8 = dequantize_to_s8(layer);
  res.act = quantize_activations(X, layer);
  IntGemmResult gemm = int8_gemm(res.act.codes, res.w_s8, threads);
  res.max_abs_acc = gemm.max_abs_acc;
  res.out = epilogue(gemm.acc, res.act.row_scales, layer.s1, bias);
  return res;
}

}  // namespace dgq
