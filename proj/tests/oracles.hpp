#pragma once
// Independent brute-force references for the search objectives, quantization
// arithmetic and integer GEMM. Everything here is a direct transcription of
// the defining formulas, kept free of the library's implementation paths so
// it can serve as an oracle. Accumulation order (rows outer, elements inner,
// plain double sums) is part of the contract so argmin comparisons against
// the library are exact.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

inline double rhe(double v) {
  double lower = std::floor(v);
  double frac = v - lower;
  if (frac > 0.5) return lower + 1.0;
  if (frac < 0.5) return lower;
  return (std::fmod(lower, 2.0) == 0.0) ? lower : lower + 1.0;
}

struct AsymParams {
  float s;
  int zp;
};

inline AsymParams asym_params(const std::vector<float>& w, float alpha, int n_bits) {
  float mn = w[0], mx = w[0];
  for (float v : w) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  double levels = double((1 << n_bits) - 1);
  double lo = std::min(double(mn), 0.0);
  double hi = std::max(double(mx), 0.0);
  double s = double(alpha) * (hi - lo) / levels;
  float sf = float(std::max(s, 1e-8));
  double zp = rhe(-double(alpha) * lo / double(sf));
  return {sf, int(std::clamp(zp, 0.0, levels))};
}

inline std::vector<float> quant_dequant_asym(const std::vector<float>& w, float s, int zp,
                                             int n_bits) {
  double levels = double((1 << n_bits) - 1);
  std::vector<float> out(w.size());
  for (size_t i = 0; i < w.size(); ++i) {
    double code = rhe(double(w[i]) / double(s)) + double(zp);
    int q = int(std::clamp(code, 0.0, levels));
    out[i] = float(double(q - zp) * double(s));
  }
  return out;
}

// || X[:, slice] w - X_hat[:, slice] w_hat ||^2, rows outer.
inline double slice_objective(const std::vector<float>& X, const std::vector<float>& X_hat,
                              size_t b, size_t h, size_t base, size_t len,
                              const std::vector<float>& w, const std::vector<float>& w_hat) {
  double err = 0.0;
  for (size_t r = 0; r < b; ++r) {
    double ref = 0.0;
    for (size_t j = 0; j < len; ++j) ref += double(X[r * h + base + j]) * double(w[j]);
    double dot = 0.0;
    for (size_t j = 0; j < len; ++j) dot += double(X_hat[r * h + base + j]) * double(w_hat[j]);
    double d = ref - dot;
    err += d * d;
  }
  return err;
}

struct Phase1Cell {
  float s_prime;
  int zp;
  float alpha;
  double err;
};

// Exhaustive minimizer of the phase-1 objective for every (group, column).
inline std::vector<std::vector<Phase1Cell>> phase1_bruteforce(
    const std::vector<float>& W, size_t h, size_t o, const std::vector<float>& X,
    const std::vector<float>& X_hat, size_t b, size_t g, int n_bits,
    const std::vector<float>& grid) {
  const size_t n_g = h / g;
  std::vector<std::vector<Phase1Cell>> out(n_g, std::vector<Phase1Cell>(o));
  for (size_t c = 0; c < o; ++c) {
    for (size_t k = 0; k < n_g; ++k) {
      std::vector<float> w(g);
      for (size_t j = 0; j < g; ++j) w[j] = W[(k * g + j) * o + c];
      bool first = true;
      Phase1Cell best{1.0f, 0, 0.0f, 0.0};
      for (float alpha : grid) {
        AsymParams p = asym_params(w, alpha, n_bits);
        std::vector<float> w_hat = quant_dequant_asym(w, p.s, p.zp, n_bits);
        double err = slice_objective(X, X_hat, b, h, k * g, g, w, w_hat);
        if (first || err < best.err || (err == best.err && alpha < best.alpha)) {
          first = false;
          best = {p.s, p.zp, alpha, err};
        }
      }
      out[k][c] = best;
    }
  }
  return out;
}

// Clip interval by enumeration: the exact set of codes in [0, 15] whose
// product S2 * (code - ZP) stays inside [-127, 127].
inline std::pair<int, int> clip_interval_enum(int s2, int zp) {
  int lo = 16, hi = -1;
  for (int code = 0; code <= 15; ++code) {
    int prod = s2 * (code - zp);
    if (prod >= -127 && prod <= 127) {
      lo = std::min(lo, code);
      hi = std::max(hi, code);
    }
  }
  return {lo, hi};
}

struct Phase2Col {
  float s1;
  std::vector<int> s2;
  std::vector<int> codes;
  float alpha;
  double err;
};

// Exhaustive minimizer of the phase-2 objective for one column.
inline Phase2Col phase2_bruteforce_col(const std::vector<float>& W, size_t h, size_t o,
                                       size_t c, const std::vector<float>& X,
                                       const std::vector<float>& X_hat, size_t b, size_t g,
                                       const std::vector<float>& s_prime_col,
                                       const std::vector<int>& zp_col,
                                       const std::vector<float>& grid2) {
  const size_t n_g = h / g;
  std::vector<float> w(h);
  for (size_t i = 0; i < h; ++i) w[i] = W[i * o + c];
  float absmax = 0.0f;
  for (float v : w) absmax = std::max(absmax, std::fabs(v));
  bool first = true;
  Phase2Col best;
  for (float alpha : grid2) {
    float s1 = float(std::max(double(alpha) * double(absmax) / 127.0, 1e-8));
    std::vector<int> s2(n_g);
    std::vector<int> codes(h);
    std::vector<float> w_hat(h);
    for (size_t k = 0; k < n_g; ++k) {
      double ratio = rhe(double(s_prime_col[k]) / double(s1));
      s2[k] = int(std::clamp(ratio, 1.0, 127.0));
      auto [lo, hi] = clip_interval_enum(s2[k], zp_col[k]);
      double eff = double(s1) * double(s2[k]);
      for (size_t j = 0; j < g; ++j) {
        size_t i = k * g + j;
        double code = rhe(double(w[i]) / eff) + double(zp_col[k]);
        int q = int(std::clamp(code, double(lo), double(hi)));
        codes[i] = q;
        w_hat[i] = float(double(s1) * double(s2[k] * (q - zp_col[k])));
      }
    }
    double err = slice_objective(X, X_hat, b, h, 0, h, w, w_hat);
    if (first || err < best.err || (err == best.err && alpha < best.alpha)) {
      first = false;
      best = {s1, s2, codes, alpha, err};
    }
  }
  return best;
}

// Exact integer matrix product computed in double precision (all operands and
// partial sums are well inside the 2^53 exact-integer range at desk scale).
inline std::vector<double> gemm_int_f64(const std::vector<int8_t>& A,
                                        const std::vector<int8_t>& B, size_t b, size_t h,
                                        size_t o) {
  std::vector<double> out(b * o, 0.0);
  for (size_t r = 0; r < b; ++r) {
    for (size_t c = 0; c < o; ++c) {
      double acc = 0.0;
      for (size_t i = 0; i < h; ++i) acc += double(A[r * h + i]) * double(B[i * o + c]);
      out[r * o + c] = acc;
    }
  }
  return out;
}

inline std::vector<double> gemm_f64(const std::vector<float>& A, const std::vector<float>& B,
                                    size_t b, size_t h, size_t o) {
  std::vector<double> out(b * o, 0.0);
  for (size_t r = 0; r < b; ++r) {
    for (size_t c = 0; c < o; ++c) {
      double acc = 0.0;
      for (size_t i = 0; i < h; ++i) acc += double(A[r * h + i]) * double(B[i * o + c]);
      out[r * o + c] = acc;
    }
  }
  return out;
}

}  // namespace oracle
