#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dgq/format.hpp"
#include "dgq/quant.hpp"

using namespace dgq;

namespace {

// A random layer whose codes always respect the clip intervals.
DgqLayer random_layer(std::mt19937& gen) {
  std::uniform_int_distribution<int> gpow(0, 2);
  std::uniform_int_distribution<int> ngroups(1, 4);
  std::uniform_int_distribution<int> owidth(1, 6);
  const size_t g = size_t(1) << gpow(gen);
  const size_t n_g = size_t(ngroups(gen));
  const size_t h = g * n_g;
  const size_t o = size_t(owidth(gen)) * 2;

  std::uniform_int_distribution<int> s2d(1, 127);
  std::uniform_int_distribution<int> zpd(0, 15);
  std::uniform_real_distribution<float> s1d(1e-4f, 0.5f);
  std::uniform_real_distribution<float> kd(1.0f, 8.0f);

  DualParams dp;
  dp.s2 = Tensor::i8(n_g, o);
  dp.zp = Tensor::i32(n_g, o);
  for (size_t i = 0; i < n_g * o; ++i) {
    dp.s2.i8_data()[i] = int8_t(s2d(gen));
    dp.zp.i32_data()[i] = zpd(gen);
  }
  dp.s1.resize(o);
  for (float& v : dp.s1) v = s1d(gen);

  Tensor codes = Tensor::i32(h, o);
  for (size_t i = 0; i < h; ++i) {
    const size_t k = i / g;
    for (size_t c = 0; c < o; ++c) {
      ClipInterval ci = clip_interval(dp.s2.i8_at(k, c), dp.zp.i32_at(k, c));
      std::uniform_int_distribution<int> cd(ci.lo, ci.hi);
      codes.i32_data()[i * o + c] = cd(gen);
    }
  }
  std::vector<float> k(h);
  for (float& v : k) v = kd(gen);
  std::uniform_int_distribution<int> md(0, 1);
  ActMode mode = md(gen) ? ActMode::kDynamic : ActMode::kStatic;
  return pack_layer(dp, codes, k, 0.05f, mode);
}

DgqLayer tiny_layer() {
  DualParams dp;
  dp.s1 = {0.01f, 0.02f};
  dp.s2 = Tensor::i8(1, 2, {10, 16});
  dp.zp = Tensor::i32(1, 2, {0, 3});
  Tensor codes = Tensor::i32(4, 2, {1, 2, 3, 4, 5, 6, 7, 8});
  return pack_layer(dp, codes, {1.0f, 1.5f, 2.0f, 1.0f}, 0.1f, ActMode::kStatic);
}

}  // namespace

TEST_CASE("minimal 4x2 layer with a single group packs and validates") {
  DgqLayer layer = tiny_layer();
  CHECK(layer.n_g() == 1);
  CHECK(layer.g == 4);
  CHECK(layer.codes.u4_at(2, 1) == 6);
  CHECK(layer.zp.u4_at(0, 1) == 3);
}

TEST_CASE("codes outside the clip interval are rejected naming the field") {
  DualParams dp;
  dp.s1 = {0.01f, 0.02f};
  dp.s2 = Tensor::i8(1, 2, {16, 16});
  dp.zp = Tensor::i32(1, 2, {0, 0});
  // clip_interval(16, 0) = [0, 7]; code 8 would dequantize to 128
  Tensor codes = Tensor::i32(4, 2, {0, 1, 2, 3, 4, 5, 6, 8});
  try {
    pack_layer(dp, codes, {1.0f, 1.0f, 1.0f, 1.0f}, 0.1f, ActMode::kDynamic);
    FAIL("expected validation_error");
  } catch (const validation_error& e) {
    CHECK(e.field() == "codes");
  }
}

TEST_CASE("invalid scale fields are rejected naming the field") {
  DgqLayer layer = tiny_layer();
  SUBCASE("s2 = 0") {
    layer.s2.i8_data()[0] = 0;
    try {
      validate_layer(layer);
      FAIL("expected validation_error");
    } catch (const validation_error& e) {
      CHECK(e.field() == "s2");
    }
  }
  SUBCASE("negative s1") {
    layer.s1[1] = -0.5f;
    try {
      validate_layer(layer);
      FAIL("expected validation_error");
    } catch (const validation_error& e) {
      CHECK(e.field() == "s1");
    }
  }
  SUBCASE("smoothing below one") {
    layer.k[0] = 0.5f;
    try {
      validate_layer(layer);
      FAIL("expected validation_error");
    } catch (const validation_error& e) {
      CHECK(e.field() == "k");
    }
  }
  SUBCASE("static mode needs a positive act_scale") {
    layer.act_scale = 0.0f;
    try {
      validate_layer(layer);
      FAIL("expected validation_error");
    } catch (const validation_error& e) {
      CHECK(e.field() == "act_scale");
    }
  }
}

TEST_CASE("dequantize_to_s8: codes at the zero-point give the zero matrix") {
  DualParams dp;
  dp.s1 = {0.1f, 0.1f};
  dp.s2 = Tensor::i8(2, 2, {3, 40, 9, 127});
  dp.zp = Tensor::i32(2, 2, {2, 3, 1, 0});
  Tensor codes = Tensor::i32(4, 2);
  for (size_t i = 0; i < 4; ++i) {
    for (size_t c = 0; c < 2; ++c) codes.i32_data()[i * 2 + c] = dp.zp.i32_at(i / 2, c);
  }
  DgqLayer layer = pack_layer(dp, codes, {1, 1, 1, 1}, 0.0f, ActMode::kDynamic);
  Tensor s8 = dequantize_to_s8(layer);
  for (size_t i = 0; i < s8.size(); ++i) CHECK(s8.i8_data()[i] == 0);
}

TEST_CASE("dequantize_to_s8 with unit group scales is codes minus zero-point") {
  std::mt19937 gen(5);
  std::uniform_int_distribution<int> cd(0, 15);
  DualParams dp;
  dp.s1 = {0.5f, 0.25f};
  dp.s2 = Tensor::i8(2, 2, {1, 1, 1, 1});
  dp.zp = Tensor::i32(2, 2, {7, 0, 15, 4});
  Tensor codes = Tensor::i32(8, 2);
  for (size_t i = 0; i < 16; ++i) codes.i32_data()[i] = cd(gen);
  DgqLayer layer = pack_layer(dp, codes, std::vector<float>(8, 1.0f), 0.0f, ActMode::kDynamic);
  Tensor s8 = dequantize_to_s8(layer);
  for (size_t i = 0; i < 8; ++i) {
    for (size_t c = 0; c < 2; ++c) {
      int expect = codes.i32_at(i, c) - dp.zp.i32_at(i / 4, c);
      CHECK(int(s8.i8_at(i, c)) == expect);
      CHECK(expect >= -15);
      CHECK(expect <= 15);
    }
  }
}

TEST_CASE("hand-corrupted code 8 at S2=16 trips the overflow error path") {
  DualParams dp;
  dp.s1 = {0.01f, 0.01f};
  dp.s2 = Tensor::i8(1, 2, {16, 16});
  dp.zp = Tensor::i32(1, 2, {0, 0});
  Tensor codes = Tensor::i32(4, 2, {0, 1, 2, 3, 4, 5, 6, 7});
  DgqLayer layer = pack_layer(dp, codes, {1, 1, 1, 1}, 0.1f, ActMode::kDynamic);
  // valid layers cap at code 7 -> 112
  Tensor s8 = dequantize_to_s8(layer);
  CHECK(int(s8.i8_at(3, 1)) == 112);
  layer.codes.set_u4(3, 1, 8);  // 16 * 8 = 128, outside [-127, 127]
  CHECK_THROWS_AS(dequantize_to_s8(layer), validation_error);
  CHECK_THROWS_AS(validate_layer(layer), validation_error);
}

TEST_CASE("dequantize_to_f32 equals the quant-core dequantization route") {
  std::mt19937 gen(17);
  DgqLayer layer = random_layer(gen);
  Tensor direct = dequantize_to_f32(layer);

  // effective per-group scale s1 * S2 and the same zero-points
  const size_t n_g = layer.n_g();
  Granularity gran = Granularity::per_group(layer.g);
  QuantParams p;
  p.n_bits = 4;
  p.symmetric = false;
  p.scales = Tensor::f32(n_g, layer.o);
  p.zero_points = Tensor::i32(n_g, layer.o);
  Tensor codes = Tensor::i32(layer.h, layer.o);
  for (size_t k = 0; k < n_g; ++k) {
    for (size_t c = 0; c < layer.o; ++c) {
      p.scales.f32_data()[k * layer.o + c] =
          float(double(layer.s1[c]) * double(layer.s2.i8_at(k, c)));
      p.zero_points.i32_data()[k * layer.o + c] = layer.zp.u4_at(k, c);
    }
  }
  for (size_t i = 0; i < layer.h; ++i) {
    for (size_t c = 0; c < layer.o; ++c) codes.i32_data()[i * layer.o + c] = layer.codes.u4_at(i, c);
  }
  Tensor via_core = dequantize(codes, p, gran);
  for (size_t i = 0; i < direct.size(); ++i) {
    CHECK(direct.f32_data()[i] ==
          doctest::Approx(via_core.f32_data()[i]).epsilon(1e-6));
  }
}

TEST_CASE("dequantize_to_f32 scalar spot check") {
  DualParams dp;
  dp.s1 = {0.01f, 0.01f};
  dp.s2 = Tensor::i8(1, 2, {10, 10});
  dp.zp = Tensor::i32(1, 2, {0, 0});
  Tensor codes = Tensor::i32(1, 2, {5, 0});
  DgqLayer layer = pack_layer(dp, codes, {1.0f}, 0.0f, ActMode::kDynamic);
  Tensor f = dequantize_to_f32(layer);
  CHECK(f.f32_at(0, 0) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(f.f32_at(0, 1) == 0.0f);
}

TEST_CASE("byte accounting for the 1024x1024 g=128 layer") {
  ByteAccounting b = byte_accounting(1024, 1024, 128);
  CHECK(b.weight_bytes == 524288);
  CHECK(b.scale_bytes == 8192 + 4096 + 4096 + 4096 + 4);
  CHECK(b.total == 544772);
  CHECK(b.ratio_vs_int8 == doctest::Approx(0.519535).epsilon(1e-4));
  CHECK(b.ratio_vs_fp16 == doctest::Approx(0.259768).epsilon(1e-4));
}

TEST_CASE("single-group accounting approaches the packing floor of one half") {
  ByteAccounting b = byte_accounting(1024, 1024, 1024);
  CHECK(b.ratio_vs_int8 > 0.5);
  CHECK(b.ratio_vs_int8 < 0.51);
}

TEST_CASE("ratio stays under 0.55 for g >= 64 on square layers >= 512") {
  for (size_t n : {512, 1024, 2048}) {
    for (size_t g : {64, 128, 256}) {
      ByteAccounting b = byte_accounting(n, n, g);
      CHECK(b.ratio_vs_int8 < 0.55);
    }
  }
}

TEST_CASE("DGQ file round-trip is bit-exact") {
  std::mt19937 gen(23);
  auto dir = std::filesystem::temp_directory_path() / "dgq_format_tests";
  std::filesystem::create_directories(dir);
  for (int it = 0; it < 20; ++it) {
    DgqLayer layer = random_layer(gen);
    auto bytes = dgq_to_bytes(layer);
    DgqLayer back = dgq_from_bytes(bytes);
    CHECK(back.codes.same_bits(layer.codes));
    CHECK(back.s2.same_bits(layer.s2));
    CHECK(back.zp.same_bits(layer.zp));
    CHECK(back.s1 == layer.s1);
    CHECK(back.k == layer.k);
    CHECK(back.act_scale == layer.act_scale);
    CHECK(back.mode == layer.mode);
    CHECK(dgq_to_bytes(back) == bytes);
  }
  DgqLayer layer = random_layer(gen);
  std::string path = (dir / "layer.dgq").string();
  write_dgq(layer, path);
  DgqLayer back = read_dgq(path);
  CHECK(dgq_to_bytes(back) == dgq_to_bytes(layer));
}

TEST_CASE("malformed DGQ bytes raise format errors") {
  std::mt19937 gen(29);
  DgqLayer layer = random_layer(gen);
  auto bytes = dgq_to_bytes(layer);
  SUBCASE("bad magic") {
    auto bad = bytes;
    bad[0] = 'X';
    try {
      dgq_from_bytes(bad);
      FAIL("expected format_error");
    } catch (const format_error& e) {
      CHECK(e.which() == format_error::kind::bad_magic);
    }
  }
  SUBCASE("truncated") {
    auto bad = bytes;
    bad.pop_back();
    try {
      dgq_from_bytes(bad);
      FAIL("expected format_error");
    } catch (const format_error& e) {
      CHECK(e.which() == format_error::kind::truncated);
    }
  }
  SUBCASE("corrupted code is caught by parse-time validation") {
    // force a code above its interval: find a group with hi < 15 and poke it
    auto bad = bytes;
    bool poked = false;
    for (size_t k = 0; k < layer.n_g() && !poked; ++k) {
      for (size_t c = 0; c < layer.o && !poked; ++c) {
        ClipInterval ci = clip_interval(layer.s2.i8_at(k, c), layer.zp.u4_at(k, c));
        if (ci.hi < 15) {
          size_t i = k * layer.g;
          size_t lin = i * layer.o + c;
          size_t byte_at = 29 + lin / 2;
          uint8_t nib = 15;
          if (lin % 2 == 0) {
            bad[byte_at] = uint8_t((bad[byte_at] & 0xF0) | nib);
          } else {
            bad[byte_at] = uint8_t((bad[byte_at] & 0x0F) | (nib << 4));
          }
          poked = true;
        }
      }
    }
    if (poked) {
      CHECK_THROWS_AS(dgq_from_bytes(bad), validation_error);
    }
  }
}

TEST_CASE("fp16 scale storage rounds s1, k and act_scale through binary16") {
  DualParams dp;
  dp.s1 = {0.1f, 0.2f};
  dp.s2 = Tensor::i8(1, 2, {5, 5});
  dp.zp = Tensor::i32(1, 2, {8, 8});
  Tensor codes = Tensor::i32(2, 2, {8, 8, 8, 8});
  std::vector<float> k = {1.3f, 2.7f};
  DgqLayer plain = pack_layer(dp, codes, k, 0.37f, ActMode::kStatic, false);
  DgqLayer half = pack_layer(dp, codes, k, 0.37f, ActMode::kStatic, true);
  CHECK(plain.s1[0] == 0.1f);
  CHECK(half.s1[0] == fp16_round(0.1f));
  CHECK(half.s1[1] == fp16_round(0.2f));
  CHECK(half.k[0] == fp16_round(1.3f));
  CHECK(half.act_scale == fp16_round(0.37f));
  CHECK(half.s1[0] != plain.s1[0]);
}
