#include <doctest.h>

#include <cmath>
#include <random>

#include "dgq/quant.hpp"
#include "oracles.hpp"

using namespace dgq;

namespace {

Tensor random_f32(size_t rows, size_t cols, uint32_t seed, float lo = -4.0f, float hi = 4.0f) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> v(rows * cols);
  for (float& x : v) x = dist(gen);
  return Tensor::f32(rows, cols, v);
}

double weight_mse(const Tensor& a, const Tensor& b) {
  double sq = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = double(a.f32_data()[i]) - double(b.f32_data()[i]);
    sq += d * d;
  }
  return sq / double(a.size());
}

Tensor quant_dequant(const Tensor& t, const Granularity& g, int n_bits, bool symmetric,
                     float alpha) {
  QuantParams p = compute_params(t, g, n_bits, symmetric, alpha);
  return dequantize(quantize(t, p, g), p, g);
}

}  // namespace

TEST_CASE("round_half_even breaks ties toward even") {
  CHECK(round_half_even(0.5) == 0.0);
  CHECK(round_half_even(1.5) == 2.0);
  CHECK(round_half_even(2.5) == 2.0);
  CHECK(round_half_even(3.5) == 4.0);
  CHECK(round_half_even(-0.5) == 0.0);
  CHECK(round_half_even(-1.5) == -2.0);
  CHECK(round_half_even(-2.5) == -2.0);
  CHECK(round_half_even(1.49) == 1.0);
  CHECK(round_half_even(1.51) == 2.0);
}

TEST_CASE("asymmetric params: [0,1,2,3] at 2 bits gives s=1, zp=0") {
  Tensor t = Tensor::f32(1, 4, {0.0f, 1.0f, 2.0f, 3.0f});
  QuantParams p = compute_params(t, Granularity::per_tensor(), 2, false, 1.0f);
  CHECK(p.scales.f32_at(0, 0) == 1.0f);
  CHECK(p.zero_points.i32_at(0, 0) == 0);
  Tensor q = quantize(t, p, Granularity::per_tensor());
  CHECK(q.i32_at(0, 0) == 0);
  CHECK(q.i32_at(0, 1) == 1);
  CHECK(q.i32_at(0, 2) == 2);
  CHECK(q.i32_at(0, 3) == 3);
}

TEST_CASE("symmetric params: [-2,2] at 8 bits gives s = 2/127") {
  Tensor t = Tensor::f32(1, 2, {-2.0f, 2.0f});
  QuantParams p = compute_params(t, Granularity::per_tensor(), 8, true, 1.0f);
  CHECK(p.scales.f32_at(0, 0) == doctest::Approx(2.0 / 127.0).epsilon(1e-7));
  CHECK(p.zero_points.i32_at(0, 0) == 0);
}

TEST_CASE("symmetric params honor alpha: s = 0.9 * 2.0 / 7") {
  // expected value computed from the symmetric scale formula directly
  Tensor t = Tensor::f32(1, 3, {-1.0f, 0.5f, 2.0f});
  QuantParams p = compute_params(t, Granularity::per_tensor(), 4, true, 0.9f);
  double expected = 0.9 * 2.0 / 7.0;  // 0.2571428...
  CHECK(p.scales.f32_at(0, 0) == doctest::Approx(expected).epsilon(1e-7));
  CHECK(p.scales.f32_at(0, 0) == doctest::Approx(0.2571428571).epsilon(1e-6));
}

TEST_CASE("zeros quantize to the zero-point") {
  Tensor t = Tensor::f32(2, 2, {0.0f, 0.0f, 0.0f, 0.0f});
  Tensor shaped = Tensor::f32(1, 4, {-1.0f, 1.0f, 3.0f, 0.0f});
  QuantParams p = compute_params(shaped, Granularity::per_tensor(), 4, false, 1.0f);
  Tensor zeros = Tensor::f32(1, 4, {0.0f, 0.0f, 0.0f, 0.0f});
  Tensor q = quantize(zeros, p, Granularity::per_tensor());
  for (size_t i = 0; i < 4; ++i) CHECK(q.i32_data()[i] == p.zero_points.i32_at(0, 0));
}

TEST_CASE("values beyond the range clamp at the top code") {
  QuantParams p;
  p.n_bits = 4;
  p.symmetric = false;
  p.scales = Tensor::f32(1, 1, {1.0f});
  p.zero_points = Tensor::i32(1, 1, {0});
  Tensor t = Tensor::f32(1, 1, {100.0f});
  Tensor q = quantize(t, p, Granularity::per_tensor());
  CHECK(q.i32_at(0, 0) == 15);
}

TEST_CASE("degenerate all-zero slice floors the scale at 1e-8") {
  Tensor t = Tensor::f32(1, 3, {0.0f, 0.0f, 0.0f});
  QuantParams pa = compute_params(t, Granularity::per_tensor(), 8, false, 1.0f);
  CHECK(pa.scales.f32_at(0, 0) == kScaleFloor);
  QuantParams ps = compute_params(t, Granularity::per_tensor(), 8, true, 1.0f);
  CHECK(ps.scales.f32_at(0, 0) == kScaleFloor);
  Tensor q = quantize(t, pa, Granularity::per_tensor());
  for (size_t i = 0; i < 3; ++i) CHECK(q.i32_data()[i] == pa.zero_points.i32_at(0, 0));
}

TEST_CASE("one-sided slices keep the zero-point in range and recover the constant") {
  // the quantization range is anchored at zero, so an all-positive slice
  // lands zp = 0 and the top code reproduces the maximum exactly
  Tensor t = Tensor::f32(1, 3, {2.5f, 2.5f, 2.5f});
  QuantParams p = compute_params(t, Granularity::per_tensor(), 4, false, 1.0f);
  CHECK(p.zero_points.i32_at(0, 0) == 0);
  Tensor q = quantize(t, p, Granularity::per_tensor());
  CHECK(q.i32_at(0, 0) == 15);
  Tensor back = dequantize(q, p, Granularity::per_tensor());
  CHECK(back.f32_at(0, 0) == doctest::Approx(2.5).epsilon(1e-6));
}

TEST_CASE("on-lattice values survive quantize/dequantize exactly") {
  // multiples of s with zp folded in are exactly representable
  std::vector<float> v;
  float s = 0.25f;
  for (int code = 0; code < 16; ++code) v.push_back(float(code - 5) * s);
  Tensor t = Tensor::f32(1, 16, v);
  QuantParams p;
  p.n_bits = 4;
  p.symmetric = false;
  p.scales = Tensor::f32(1, 1, {s});
  p.zero_points = Tensor::i32(1, 1, {5});
  Tensor back = dequantize(quantize(t, p, Granularity::per_tensor()), p,
                           Granularity::per_tensor());
  for (size_t i = 0; i < 16; ++i) CHECK(back.f32_data()[i] == v[i]);
}

TEST_CASE("codes at the zero-point dequantize to zero") {
  QuantParams p;
  p.n_bits = 4;
  p.symmetric = false;
  p.scales = Tensor::f32(1, 1, {0.37f});
  p.zero_points = Tensor::i32(1, 1, {7});
  Tensor q = Tensor::i32(2, 2, {7, 7, 7, 7});
  Tensor x = dequantize(q, p, Granularity::per_tensor());
  for (size_t i = 0; i < 4; ++i) CHECK(x.f32_data()[i] == 0.0f);
}

TEST_CASE("per-column rounding bound: |x - x_hat| <= s/2 for unclamped entries") {
  Tensor t = random_f32(8, 8, 11);
  Granularity g = Granularity::per_column();
  QuantParams p = compute_params(t, g, 8, true, 1.0f);
  Tensor q = quantize(t, p, g);
  Tensor back = dequantize(q, p, g);
  for (size_t r = 0; r < 8; ++r) {
    for (size_t c = 0; c < 8; ++c) {
      int code = q.i32_at(r, c);
      if (code == p.qmin() || code == p.qmax()) continue;
      double s = p.scales.f32_at(0, c);
      CHECK(std::fabs(double(t.f32_at(r, c)) - double(back.f32_at(r, c))) <=
            s / 2 + 1e-12);
    }
  }
}

TEST_CASE("quantize is idempotent through a dequantize cycle") {
  std::mt19937 gen(3);
  for (int it = 0; it < 10; ++it) {
    Tensor t = random_f32(8, 6, uint32_t(100 + it));
    for (bool symmetric : {false, true}) {
      Granularity g = it % 2 ? Granularity::per_column() : Granularity::per_group(4);
      QuantParams p = compute_params(t, g, 4, symmetric, 0.9f);
      Tensor q1 = quantize(t, p, g);
      Tensor back = dequantize(q1, p, g);
      Tensor q2 = quantize(back, p, g);
      CHECK(q1.same_bits(q2));
    }
  }
}

TEST_CASE("granularity refinement shrinks weight MSE at alpha = 1") {
  Tensor t = random_f32(64, 32, 5);
  double mse_tensor = weight_mse(t, quant_dequant(t, Granularity::per_tensor(), 4, false, 1.0f));
  double mse_col = weight_mse(t, quant_dequant(t, Granularity::per_column(), 4, false, 1.0f));
  double mse_group = weight_mse(t, quant_dequant(t, Granularity::per_group(4), 4, false, 1.0f));
  CHECK(mse_group <= mse_col);
  CHECK(mse_col <= mse_tensor);
}

TEST_CASE("symmetric path is odd under negation and has zero zero-points") {
  Tensor t = random_f32(4, 4, 9);
  Tensor neg = Tensor::f32(4, 4);
  for (size_t i = 0; i < t.size(); ++i) neg.f32_data()[i] = -t.f32_data()[i];
  Granularity g = Granularity::per_row();
  QuantParams p = compute_params(t, g, 8, true, 1.0f);
  QuantParams pn = compute_params(neg, g, 8, true, 1.0f);
  CHECK(p.scales.same_bits(pn.scales));
  for (size_t i = 0; i < p.zero_points.size(); ++i) CHECK(p.zero_points.i32_data()[i] == 0);
  Tensor q = quantize(t, p, g);
  Tensor qn = quantize(neg, pn, g);
  for (size_t i = 0; i < q.size(); ++i) CHECK(q.i32_data()[i] == -qn.i32_data()[i]);
  Tensor d = dequantize(q, p, g);
  Tensor dn = dequantize(qn, pn, g);
  for (size_t i = 0; i < d.size(); ++i) CHECK(d.f32_data()[i] == -dn.f32_data()[i]);
}

TEST_CASE("per-group parameters match the direct per-slice oracle") {
  Tensor t = random_f32(8, 3, 21);
  Granularity g = Granularity::per_group(4);
  QuantParams p = compute_params(t, g, 4, false, 0.85f);
  for (size_t k = 0; k < 2; ++k) {
    for (size_t c = 0; c < 3; ++c) {
      std::vector<float> slice;
      for (size_t j = 0; j < 4; ++j) slice.push_back(t.f32_at(k * 4 + j, c));
      oracle::AsymParams ref = oracle::asym_params(slice, 0.85f, 4);
      CHECK(p.scales.f32_at(k, c) == ref.s);
      CHECK(p.zero_points.i32_at(k, c) == ref.zp);
    }
  }
}

TEST_CASE("input validation") {
  Tensor t = random_f32(4, 4, 1);
  CHECK_THROWS_AS(compute_params(t, Granularity::per_tensor(), 1, true, 1.0f),
                  std::invalid_argument);
  CHECK_THROWS_AS(compute_params(t, Granularity::per_tensor(), 9, true, 1.0f),
                  std::invalid_argument);
  CHECK_THROWS_AS(compute_params(t, Granularity::per_tensor(), 8, true, 0.0f),
                  std::invalid_argument);
  CHECK_THROWS_AS(compute_params(t, Granularity::per_group(3), 8, true, 1.0f),
                  std::invalid_argument);
}

TEST_CASE("fp16 rounding hits representable values and is idempotent") {
  CHECK(fp16_round(1.0f) == 1.0f);
  CHECK(fp16_round(65504.0f) == 65504.0f);
  CHECK(fp16_round(0.1f) == doctest::Approx(0.1).epsilon(1e-3));
  CHECK(fp16_round(fp16_round(0.1f)) == fp16_round(0.1f));
  CHECK(fp16_round(1e-30f) == 0.0f);
  CHECK(std::isinf(fp16_round(1e30f)));
  std::mt19937 gen(13);
  std::uniform_real_distribution<float> dist(-100.0f, 100.0f);
  for (int i = 0; i < 200; ++i) {
    float v = dist(gen);
    float r = fp16_round(v);
    CHECK(fp16_round(r) == r);
    CHECK(std::fabs(r - v) <= std::fabs(v) * 0x1.0p-11 + 1e-7f);
  }
}
