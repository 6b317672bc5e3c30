#pragma once
// Reference implementation of the deployment arithmetic: symmetric 8-bit
// activation quantization, an 8x8 -> 32-bit integer GEMM with an overflow
// audit, the float epilogue, and the segmented group-wise baseline the
// single-GEMM path replaces.

#include <cstdint>
#include <vector>

#include "dgq/format.hpp"
#include "dgq/tensor.hpp"

namespace dgq {

struct ActQuant {
  Tensor codes;                  // i8, b x h
  std::vector<float> row_scales; // length b (all equal to act_scale in static mode)
};

// Divide X by the layer's smoothing vector, then quantize symmetrically:
// dynamic mode uses per-row scales max|x|/127 (floored at kScaleFloor),
// static mode uses the layer's calibrated act_scale for every row.
ActQuant quantize_activations(const Tensor& X, const DgqLayer& layer);

struct IntGemmResult {
  Tensor acc;              // i32, b x o
  int64_t max_abs_acc = 0; // largest |running accumulator| seen at any step
};

// Exact integer product with 32-bit accumulators. Requires h * 127^2 < 2^31,
// which the audit double-checks.
IntGemmResult int8_gemm(const Tensor& Xq, const Tensor& Wq, int threads = 0);

// out[r,c] = acc[r,c] * row_scales[r] * s1[c] (+ bias[c]), float32.
// fp16_mode rounds the scales, their product and the output through binary16.
Tensor epilogue(const Tensor& acc, const std::vector<float>& row_scales,
                const std::vector<float>& s1, const std::vector<float>& bias = {},
                bool fp16_mode = false);

// Group-wise baseline: one integer partial GEMM per group, each scaled by its
// group factor and accumulated in float32. Semantics oracle only.
Tensor segmented_gemm_reference(const ActQuant& act, const DgqLayer& layer);

struct ForwardResult {
  Tensor out;      // f32, b x o
  Tensor w_s8;     // i8, h x o (retained for audits)
  ActQuant act;
  int64_t max_abs_acc = 0;
};

// quantize_activations -> dequantize_to_s8 -> int8_gemm -> epilogue.
ForwardResult dgq_forward(const Tensor& X, const DgqLayer& layer,
                          const std::vector<float>& bias = {}, int threads = 0);

}  // namespace dgq
