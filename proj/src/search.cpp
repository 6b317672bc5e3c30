#include "dgq/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "dgq/parallel.hpp"

namespace dgq {

std::vector<float> SearchConfig::default_grid1() {
  std::vector<float> g;
  for (int i = 50; i <= 100; ++i) g.push_back(float(i) / 100.0f);
  return g;
}

std::vector<float> SearchConfig::default_grid2() {
  std::vector<float> g;
  for (int i = 80; i <= 100; ++i) g.push_back(float(i) / 100.0f);
  return g;
}

void SearchConfig::validate(size_t h) const {
  if (group_size < 1 || h % group_size != 0) {
    throw std::invalid_argument("group size " + std::to_string(group_size) +
                                " must divide h = " + std::to_string(h));
  }
  if (n_bits_w < 2 || n_bits_w > 8) throw std::invalid_argument("n_bits_w must be in [2, 8]");
  auto check_grid = [](const std::vector<float>& grid, const char* name) {
    if (grid.empty()) throw std::invalid_argument(std::string(name) + " is empty");
    for (float a : grid) {
      if (!(a > 0.0f && a <= 1.0f)) {
        throw std::invalid_argument(std::string(name) + " values must be in (0, 1]");
      }
    }
  };
  check_grid(alpha_grid_phase1, "alpha_grid_phase1");
  check_grid(alpha_grid_phase2, "alpha_grid_phase2");
  if (std::find(alpha_grid_phase2.begin(), alpha_grid_phase2.end(), 1.0f) ==
      alpha_grid_phase2.end()) {
    throw std::invalid_argument("alpha_grid_phase2 must contain 1.0");
  }
}

namespace {

// Asymmetric N-bit parameters for one weight slice, matching compute_params.
struct SliceParams {
  float s;
  int zp;
};

SliceParams asym_params(float mn, float mx, double alpha, int levels) {
  // range includes zero, matching compute_params
  double lo = std::min(double(mn), 0.0);
  double hi = std::max(double(mx), 0.0);
  double s = alpha * (hi - lo) / double(levels);
  float sf = float(std::max(s, double(kScaleFloor)));
  double zp = round_half_even(-alpha * lo / double(sf));
  return {sf, int(std::clamp(zp, 0.0, double(levels)))};
}

// Objective accumulation order is fixed (rows outer, elements inner, plain
// double sums); the brute-force oracles in the test suite use the same order
// so argmin comparisons are exact.
double partial_product_error(const float* X_hat, size_t h, size_t base, size_t len,
                             size_t b_rows, const std::vector<double>& ref,
                             const std::vector<float>& w_hat) {
  double err = 0.0;
  for (size_t r = 0; r < b_rows; ++r) {
    const float* xh = X_hat + r * h + base;
    double dot = 0.0;
    for (size_t j = 0; j < len; ++j) dot += double(xh[j]) * double(w_hat[j]);
    double d = ref[r] - dot;
    err += d * d;
  }
  return err;
}

}  // namespace

GroupParams phase1_search(const Tensor& W, const SearchConfig& cfg, const Tensor& X_hat) {
  if (W.dtype != Dtype::kF32) throw std::invalid_argument("phase1_search expects float32 weights");
  const size_t h = W.rows, o = W.cols;
  cfg.validate(h);
  const Tensor& X = cfg.calib_X;
  if (X.dtype != Dtype::kF32 || X.cols != h) {
    throw std::invalid_argument("calib_X must be float32 with h columns");
  }
  if (X_hat.rows != X.rows || X_hat.cols != X.cols) {
    throw std::invalid_argument("X_hat shape must match calib_X");
  }
  const size_t g = cfg.group_size;
  const size_t n_g = h / g;
  const size_t b = X.rows;
  const int levels = (1 << cfg.n_bits_w) - 1;

  GroupParams gp;
  gp.group_size = g;
  gp.n_bits = cfg.n_bits_w;
  gp.s_prime = Tensor::f32(n_g, o);
  gp.zp = Tensor::i32(n_g, o);
  gp.err = Tensor::f32(n_g, o);
  gp.alpha = Tensor::f32(n_g, o);

  const float* Wd = W.f32_data();
  const float* Xd = X.f32_data();
  const float* Xh = X_hat.f32_data();
  float* sp_out = gp.s_prime.f32_data();
  int32_t* zp_out = gp.zp.i32_data();
  float* err_out = gp.err.f32_data();
  float* al_out = gp.alpha.f32_data();
  std::atomic<size_t> evals{0};

  parallel_for(o, cfg.threads, [&](size_t c) {
    std::vector<float> w(g), w_hat(g);
    std::vector<double> ref(b);
    size_t local_evals = 0;
    for (size_t k = 0; k < n_g; ++k) {
      const size_t base = k * g;
      float mn = Wd[base * o + c], mx = mn;
      for (size_t j = 0; j < g; ++j) {
        w[j] = Wd[(base + j) * o + c];
        mn = std::min(mn, w[j]);
        mx = std::max(mx, w[j]);
      }
      for (size_t r = 0; r < b; ++r) {
        const float* x = Xd + r * h + base;
        double dot = 0.0;
        for (size_t j = 0; j < g; ++j) dot += double(x[j]) * double(w[j]);
        ref[r] = dot;
      }
      double best_err = 0.0;
      float best_alpha = 0.0f;
      SliceParams best{1.0f, 0};
      bool first = true;
      for (float alpha : cfg.alpha_grid_phase1) {
        SliceParams p = asym_params(mn, mx, double(alpha), levels);
        for (size_t j = 0; j < g; ++j) {
          double code = round_half_even(double(w[j]) / double(p.s)) + double(p.zp);
          int q = int(std::clamp(code, 0.0, double(levels)));
          w_hat[j] = float(double(q - p.zp) * double(p.s));
        }
        double err = partial_product_error(Xh, h, base, g, b, ref, w_hat);
        ++local_evals;
        if (first || err < best_err || (err == best_err && alpha < best_alpha)) {
          first = false;
          best_err = err;
          best_alpha = alpha;
          best = p;
        }
      }
      sp_out[k * o + c] = best.s;
      zp_out[k * o + c] = best.zp;
      err_out[k * o + c] = float(best_err);
      al_out[k * o + c] = best_alpha;
    }
    evals.fetch_add(local_evals, std::memory_order_relaxed);
  });
  gp.objective_evals = evals.load();
  return gp;
}

Tensor dequantize_with_group_params(const Tensor& W, const GroupParams& gp) {
  const size_t h = W.rows, o = W.cols;
  const size_t g = gp.group_size;
  if (g == 0 || h % g != 0 || gp.s_prime.rows != h / g || gp.s_prime.cols != o) {
    throw std::invalid_argument("GroupParams shape does not match weights");
  }
  const int levels = (1 << gp.n_bits) - 1;
  Tensor out = Tensor::f32(h, o);
  const float* Wd = W.f32_data();
  const float* sp = gp.s_prime.f32_data();
  const int32_t* zp = gp.zp.i32_data();
  float* y = out.f32_data();
  for (size_t i = 0; i < h; ++i) {
    const size_t k = i / g;
    for (size_t c = 0; c < o; ++c) {
      float s = sp[k * o + c];
      int z = zp[k * o + c];
      double code = round_half_even(double(Wd[i * o + c]) / double(s)) + double(z);
      int q = int(std::clamp(code, 0.0, double(levels)));
      y[i * o + c] = float(double(q - z) * double(s));
    }
  }
  return out;
}

ClipInterval clip_interval(int s2, int zp) {
  if (s2 < 1) throw std::invalid_argument("clip_interval requires S2 >= 1");
  // Integer division truncates toward zero, which yields exactly the largest
  // magnitude m with |m * S2| <= 127 on both sides.
  int lo = std::max(0, (-127) / s2 + zp);
  int hi = std::min(15, 127 / s2 + zp);
  if (lo > hi) {
    throw std::logic_error("empty clip interval for S2=" + std::to_string(s2) +
                           " ZP=" + std::to_string(zp) + "; search invariant broken");
  }
  return {lo, hi};
}

namespace {

// One phase-2 candidate for a column: the decomposition at a given alpha and
// the re-quantization of the original weights under it.
//
// s1 follows the symmetric 8-bit rule on the original weight column,
// s1 = alpha * max|w| / 127, so the dequantized int8 weights span the full
// signed-8-bit range and S2 = rhe(S'/s1) lands near the unrelaxed [0, 15]
// regime. Anchoring s1 on max_k S' instead would push S2 to ~127 and shrink
// every clip interval to |code - zp| <= 1, collapsing the representable
// weight range.
struct ColumnCandidate {
  float s1 = 0.0f;
  std::vector<int> s2;       // n_g
  std::vector<int> codes;    // h
  std::vector<float> w_hat;  // h
};

ColumnCandidate build_column_candidate(const std::vector<float>& w_col,
                                       const float* sp_col, const int32_t* zp_col,
                                       size_t stride, size_t n_g, size_t g,
                                       float alpha) {
  ColumnCandidate cand;
  float absmax = 0.0f;
  for (float v : w_col) absmax = std::max(absmax, std::fabs(v));
  cand.s1 = float(std::max(double(alpha) * double(absmax) / 127.0, double(kScaleFloor)));
  cand.s2.resize(n_g);
  cand.codes.resize(w_col.size());
  cand.w_hat.resize(w_col.size());
  for (size_t k = 0; k < n_g; ++k) {
    double ratio = round_half_even(double(sp_col[k * stride]) / double(cand.s1));
    int s2 = int(std::clamp(ratio, 1.0, 127.0));
    cand.s2[k] = s2;
    int zp = zp_col[k * stride];
    ClipInterval ci = clip_interval(s2, zp);
    double eff = double(cand.s1) * double(s2);
    for (size_t j = 0; j < g; ++j) {
      size_t i = k * g + j;
      double code = round_half_even(double(w_col[i]) / eff) + double(zp);
      int q = int(std::clamp(code, double(ci.lo), double(ci.hi)));
      cand.codes[i] = q;
      cand.w_hat[i] = float(double(cand.s1) * double(s2 * (q - zp)));
    }
  }
  return cand;
}

}  // namespace

DualSearchResult phase2_search(const Tensor& W, const GroupParams& gp,
                               const SearchConfig& cfg, const Tensor& X_hat) {
  const size_t h = W.rows, o = W.cols;
  const size_t g = gp.group_size;
  if (g == 0 || h % g != 0 || gp.s_prime.rows != h / g || gp.s_prime.cols != o) {
    throw std::invalid_argument("GroupParams shape does not match weights");
  }
  const Tensor& X = cfg.calib_X;
  if (X.dtype != Dtype::kF32 || X.cols != h || X_hat.rows != X.rows || X_hat.cols != h) {
    throw std::invalid_argument("calibration tensors must be float32 b x h");
  }
  const size_t n_g = h / g;
  const size_t b = X.rows;

  DualSearchResult res;
  res.params.s1.assign(o, 0.0f);
  res.params.s2 = Tensor::i8(n_g, o);
  res.params.zp = gp.zp;
  res.codes = Tensor::i32(h, o);
  res.col_err.assign(o, 0.0);
  res.col_alpha.assign(o, 0.0f);

  const float* Wd = W.f32_data();
  const float* Xd = X.f32_data();
  const float* Xh = X_hat.f32_data();
  const float* sp = gp.s_prime.f32_data();
  const int32_t* zp = gp.zp.i32_data();
  int8_t* s2_out = res.params.s2.i8_data();
  int32_t* codes_out = res.codes.i32_data();
  std::atomic<size_t> evals{0};

  parallel_for(o, cfg.threads, [&](size_t c) {
    std::vector<float> w_col(h);
    for (size_t i = 0; i < h; ++i) w_col[i] = Wd[i * o + c];
    std::vector<double> ref(b);
    for (size_t r = 0; r < b; ++r) {
      const float* x = Xd + r * h;
      double dot = 0.0;
      for (size_t j = 0; j < h; ++j) dot += double(x[j]) * double(w_col[j]);
      ref[r] = dot;
    }
    double best_err = 0.0;
    float best_alpha = 0.0f;
    ColumnCandidate best;
    bool first = true;
    size_t local_evals = 0;
    for (float alpha : cfg.alpha_grid_phase2) {
      ColumnCandidate cand =
          build_column_candidate(w_col, sp + c, zp + c, o, n_g, g, alpha);
      double err = 0.0;
      for (size_t r = 0; r < b; ++r) {
        const float* xh = Xh + r * h;
        double dot = 0.0;
        for (size_t j = 0; j < h; ++j) dot += double(xh[j]) * double(cand.w_hat[j]);
        double d = ref[r] - dot;
        err += d * d;
      }
      ++local_evals;
      if (first || err < best_err || (err == best_err && alpha < best_alpha)) {
        first = false;
        best_err = err;
        best_alpha = alpha;
        best = std::move(cand);
      }
    }
    res.params.s1[c] = best.s1;
    res.col_err[c] = best_err;
    res.col_alpha[c] = best_alpha;
    for (size_t k = 0; k < n_g; ++k) s2_out[k * o + c] = int8_t(best.s2[k]);
    for (size_t i = 0; i < h; ++i) codes_out[i * o + c] = best.codes[i];
    evals.fetch_add(local_evals, std::memory_order_relaxed);
  });
  res.objective_evals = evals.load();
  return res;
}

DualSearchResult rtn_dgq(const Tensor& W, const GroupParams& gp) {
  const size_t h = W.rows, o = W.cols;
  const size_t g = gp.group_size;
  if (g == 0 || h % g != 0 || gp.s_prime.rows != h / g || gp.s_prime.cols != o) {
    throw std::invalid_argument("GroupParams shape does not match weights");
  }
  const size_t n_g = h / g;

  DualSearchResult res;
  res.params.s1.assign(o, 0.0f);
  res.params.s2 = Tensor::i8(n_g, o);
  res.params.zp = gp.zp;
  res.codes = Tensor::i32(h, o);
  res.col_alpha.assign(o, 1.0f);

  const float* Wd = W.f32_data();
  const float* sp = gp.s_prime.f32_data();
  const int32_t* zp = gp.zp.i32_data();
  int8_t* s2_out = res.params.s2.i8_data();
  int32_t* codes_out = res.codes.i32_data();

  for (size_t c = 0; c < o; ++c) {
    std::vector<float> w_col(h);
    for (size_t i = 0; i < h; ++i) w_col[i] = Wd[i * o + c];
    ColumnCandidate cand = build_column_candidate(w_col, sp + c, zp + c, o, n_g, g, 1.0f);
    res.params.s1[c] = cand.s1;
    for (size_t k = 0; k < n_g; ++k) s2_out[k * o + c] = int8_t(cand.s2[k]);
    for (size_t i = 0; i < h; ++i) codes_out[i * o + c] = cand.codes[i];
  }
  return res;
}

IntervalSweepReport fused_interval_oracle(int s2_lo, int s2_hi, int zp_lo, int zp_hi) {
  IntervalSweepReport rep;
  for (int s2 = s2_lo; s2 <= s2_hi; ++s2) {
    for (int zp = zp_lo; zp <= zp_hi; ++zp) {
      ClipInterval ci = clip_interval(s2, zp);
      ++rep.pairs;
      for (int code = 0; code <= 15; ++code) {
        ++rep.codes_checked;
        int product = s2 * (code - zp);
        bool in_interval = code >= ci.lo && code <= ci.hi;
        bool safe = product >= -127 && product <= 127;
        if (in_interval != safe) {
          rep.counterexamples.push_back({s2, zp, code, in_interval, product});
        }
      }
    }
  }
  return rep;
}

}  // namespace dgq
