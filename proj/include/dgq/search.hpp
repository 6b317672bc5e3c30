#pragma once
// Two-phase grid search for dual-grained weight quantization.
//
// Phase 1 finds, per (group, output channel), the asymmetric 4-bit scale
// S'[k,c] and zero-point ZP[k,c] that minimize the squared error of the
// group's partial product against the full-precision partial product, with
// the dequantized calibration activation X_hat on the quantized side.
//
// Phase 2 decomposes S' per output channel into a channel-wise float scale
// s1[c] (the symmetric 8-bit scale of the original weight column, searched
// over its own alpha grid) and group-wise signed-8-bit integer scales
// S2[k,c] = rhe(S'/s1), re-quantizing the original weights with the fused
// clip interval so that S2 * (code - ZP) never leaves [-127, 127].
//
// Both phases parallelize over the output-channel axis only; results are
// bit-identical for every worker count.

#include <cstdint>
#include <vector>

#include "dgq/quant.hpp"
#include "dgq/tensor.hpp"

namespace dgq {

struct SearchConfig {
  size_t group_size = 128;
  int n_bits_w = 4;
  std::vector<float> alpha_grid_phase1 = default_grid1();
  std::vector<float> alpha_grid_phase2 = default_grid2();
  Tensor calib_X;             // float32 b x h, already smoothed
  float percentile = 0.005f;  // smoothing percentile (pipeline-level knob)
  bool fp16_scales = false;   // round stored float scales through binary16
  int threads = 0;            // 0 = hardware concurrency

  static std::vector<float> default_grid1();  // 0.50, 0.51, ..., 1.00
  static std::vector<float> default_grid2();  // 0.80, 0.81, ..., 1.00

  // grids nonempty with values in (0, 1], phase-2 grid contains 1.0,
  // group size divides h.
  void validate(size_t h) const;
};

struct GroupParams {
  size_t group_size = 0;
  int n_bits = 4;
  Tensor s_prime;  // f32 n_g x o, > 0
  Tensor zp;       // i32 n_g x o, in [0, 2^N - 1]
  Tensor err;      // f32 n_g x o, winning phase-1 objective value
  Tensor alpha;    // f32 n_g x o, winning alpha
  size_t objective_evals = 0;

  size_t n_groups() const { return s_prime.rows; }
};

GroupParams phase1_search(const Tensor& W, const SearchConfig& cfg, const Tensor& X_hat);

// Quantize-dequantize W with the phase-1 winners; the group-wise FP baseline.
Tensor dequantize_with_group_params(const Tensor& W, const GroupParams& gp);

// Fused 4-bit code interval for one (S2, ZP): exactly the codes in [0, 15]
// whose dequantized 8-bit value S2 * (code - ZP) stays in [-127, 127]. The
// division rounds toward zero; that makes the interval the exact
// intersection of the two range constraints.
struct ClipInterval {
  int lo;
  int hi;
};
ClipInterval clip_interval(int s2, int zp);

struct DualParams {
  std::vector<float> s1;  // length o, > 0
  Tensor s2;              // i8 n_g x o, in [1, 127]
  Tensor zp;              // i32 n_g x o, carried over from phase 1
};

struct DualSearchResult {
  DualParams params;
  Tensor codes;                  // i32 h x o, inside the clip intervals
  std::vector<double> col_err;   // phase-2 objective per column (empty for plain RTN)
  std::vector<float> col_alpha;  // winning alpha per column
  size_t objective_evals = 0;
};

DualSearchResult phase2_search(const Tensor& W, const GroupParams& gp,
                               const SearchConfig& cfg, const Tensor& X_hat);

// The alpha = 1 decomposition with no error-driven selection (the RTN
// baseline): s1 = max|W[:,c]| / 127, S2 = rhe(S'/s1) clamped to [1, 127],
// codes re-quantized inside the clip intervals.
DualSearchResult rtn_dgq(const Tensor& W, const GroupParams& gp);

// Exhaustive check of the interval fusion: for every (S2, ZP) pair in the
// given ranges and every code in [0, 15], membership in clip_interval must
// coincide with S2 * (code - ZP) being in [-127, 127].
struct IntervalCounterexample {
  int s2;
  int zp;
  int code;
  bool in_interval;
  int product;
};

struct IntervalSweepReport {
  size_t pairs = 0;
  size_t codes_checked = 0;
  std::vector<IntervalCounterexample> counterexamples;
};

IntervalSweepReport fused_interval_oracle(int s2_lo = 1, int s2_hi = 127,
                                          int zp_lo = 0, int zp_hi = 15);

}  // namespace dgq
