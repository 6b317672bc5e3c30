#include "dgq/format.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace dgq {

const char* act_mode_name(ActMode m) {
  return m == ActMode::kStatic ? "static" : "dynamic";
}

namespace {

constexpr char kMagic[4] = {'D', 'G', 'Q', '1'};
constexpr size_t kHeaderBytes = 29;

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw validation_error(field, "invalid DgqLayer field '" + field + "': " + msg);
}

}  // namespace

void validate_layer(const DgqLayer& layer) {
  if (layer.h == 0 || layer.o == 0) fail("shape", "h and o must be positive");
  if (layer.o % 2 != 0) fail("shape", "o must be even for packed 4-bit storage");
  if (layer.g == 0 || layer.h % layer.g != 0) {
    fail("g", "group size must divide h");
  }
  const size_t n_g = layer.n_g();
  if (layer.codes.dtype != Dtype::kU4 || layer.codes.rows != layer.h ||
      layer.codes.cols != layer.o) {
    fail("codes", "expected packed u4 of shape h x o");
  }
  if (layer.s2.dtype != Dtype::kI8 || layer.s2.rows != n_g || layer.s2.cols != layer.o) {
    fail("s2", "expected int8 of shape n_g x o");
  }
  if (layer.zp.dtype != Dtype::kU4 || layer.zp.rows != n_g || layer.zp.cols != layer.o) {
    fail("zp", "expected packed u4 of shape n_g x o");
  }
  if (layer.s1.size() != layer.o) fail("s1", "expected length o");
  if (layer.k.size() != layer.h) fail("k", "expected length h");

  for (size_t i = 0; i < n_g * layer.o; ++i) {
    int v = layer.s2.i8_data()[i];
    if (v < 1 || v > 127) fail("s2", "value " + std::to_string(v) + " outside [1, 127]");
  }
  for (float v : layer.s1) {
    if (!(v > 0.0f) || !std::isfinite(v)) fail("s1", "scales must be positive and finite");
  }
  for (float v : layer.k) {
    if (!(v >= 1.0f) || !std::isfinite(v)) fail("k", "smoothing scales must be >= 1");
  }
  if (layer.mode == ActMode::kStatic && !(layer.act_scale > 0.0f)) {
    fail("act_scale", "static mode requires a positive activation scale");
  }
  if (!(layer.act_scale >= 0.0f) || !std::isfinite(layer.act_scale)) {
    fail("act_scale", "must be finite and non-negative");
  }
  for (size_t k = 0; k < n_g; ++k) {
    for (size_t c = 0; c < layer.o; ++c) {
      int zp = layer.zp.u4_at(k, c);
      ClipInterval ci = clip_interval(layer.s2.i8_at(k, c), zp);
      for (size_t j = 0; j < layer.g; ++j) {
        int code = layer.codes.u4_at(k * layer.g + j, c);
        if (code < ci.lo || code > ci.hi) {
          fail("codes", "code " + std::to_string(code) + " at (" +
                            std::to_string(k * layer.g + j) + ", " + std::to_string(c) +
                            ") outside clip interval [" + std::to_string(ci.lo) + ", " +
                            std::to_string(ci.hi) + "]");
        }
      }
    }
  }
}

DgqLayer pack_layer(const DualParams& dp, const Tensor& codes,
                    const std::vector<float>& k, float act_scale, ActMode mode,
                    bool fp16_scales) {
  if (codes.dtype != Dtype::kI32) fail("codes", "expected int32 codes from the search");
  const size_t h = codes.rows, o = codes.cols;
  const size_t n_g = dp.s2.rows;
  if (n_g == 0 || h % n_g != 0) fail("s2", "group count must divide h");
  DgqLayer layer;
  layer.h = h;
  layer.o = o;
  layer.g = h / n_g;
  layer.s1 = dp.s1;
  layer.k = k;
  layer.act_scale = act_scale;
  layer.mode = mode;
  layer.s2 = dp.s2;

  if (dp.zp.dtype != Dtype::kI32 || dp.zp.rows != n_g || dp.zp.cols != o) {
    fail("zp", "expected int32 of shape n_g x o");
  }
  layer.zp = Tensor::u4(n_g, o);
  for (size_t r = 0; r < n_g; ++r) {
    for (size_t c = 0; c < o; ++c) {
      int v = dp.zp.i32_at(r, c);
      if (v < 0 || v > 15) fail("zp", "zero-point " + std::to_string(v) + " outside [0, 15]");
      layer.zp.set_u4(r, c, uint8_t(v));
    }
  }
  layer.codes = Tensor::u4(h, o);
  for (size_t r = 0; r < h; ++r) {
    for (size_t c = 0; c < o; ++c) {
      int v = codes.i32_at(r, c);
      if (v < 0 || v > 15) fail("codes", "code " + std::to_string(v) + " outside [0, 15]");
      layer.codes.set_u4(r, c, uint8_t(v));
    }
  }
  if (fp16_scales) {
    for (float& v : layer.s1) v = fp16_round(v);
    for (float& v : layer.k) v = fp16_round(v);
    layer.act_scale = fp16_round(layer.act_scale);
  }
  validate_layer(layer);
  return layer;
}

Tensor dequantize_to_s8(const DgqLayer& layer) {
  Tensor out = Tensor::i8(layer.h, layer.o);
  int8_t* y = out.i8_data();
  const size_t o = layer.o;
  for (size_t i = 0; i < layer.h; ++i) {
    const size_t k = i / layer.g;
    for (size_t c = 0; c < o; ++c) {
      int32_t v = int32_t(layer.s2.i8_at(k, c)) *
                  (int32_t(layer.codes.u4_at(i, c)) - int32_t(layer.zp.u4_at(k, c)));
      if (v < -127 || v > 127) {
        throw validation_error(
            "codes", "dequantized 8-bit weight " + std::to_string(v) + " at (" +
                         std::to_string(i) + ", " + std::to_string(c) +
                         ") outside [-127, 127]; artifact is corrupted");
      }
      y[i * o + c] = int8_t(v);
    }
  }
  return out;
}

Tensor dequantize_to_f32(const DgqLayer& layer) {
  Tensor w_s8 = dequantize_to_s8(layer);
  Tensor out = Tensor::f32(layer.h, layer.o);
  const int8_t* w = w_s8.i8_data();
  float* y = out.f32_data();
  for (size_t i = 0; i < layer.h; ++i) {
    for (size_t c = 0; c < layer.o; ++c) {
      y[i * layer.o + c] = float(double(layer.s1[c]) * double(w[i * layer.o + c]));
    }
  }
  return out;
}

ByteAccounting byte_accounting(size_t h, size_t o, size_t g) {
  ByteAccounting b;
  const size_t n_g = h / g;
  b.weight_bytes = h * o / 2;
  b.scale_bytes = n_g * o        // S2, int8
                  + n_g * o / 2  // ZP, packed u4
                  + 4 * o        // s1, f32
                  + 4 * h        // k, f32
                  + 4;           // act_scale
  b.total = b.weight_bytes + b.scale_bytes;
  b.ratio_vs_int8 = double(b.total) / double(h * o);
  b.ratio_vs_fp16 = double(b.total) / double(2 * h * o);
  return b;
}

ByteAccounting byte_accounting(const DgqLayer& layer) {
  return byte_accounting(layer.h, layer.o, layer.g);
}

namespace {

void put_u64_le(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

uint64_t get_u64_le(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
  return v;
}

void put_f32_vec(std::vector<uint8_t>& out, const std::vector<float>& v) {
  size_t at = out.size();
  out.resize(at + 4 * v.size());
  std::memcpy(out.data() + at, v.data(), 4 * v.size());
}

}  // namespace

std::vector<uint8_t> dgq_to_bytes(const DgqLayer& layer) {
  validate_layer(layer);
  std::vector<uint8_t> out;
  out.reserve(kHeaderBytes + layer.codes.data.size() + layer.s2.data.size() +
              layer.zp.data.size() + 4 * (layer.o + layer.h + 1));
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u64_le(out, layer.h);
  put_u64_le(out, layer.o);
  put_u64_le(out, layer.g);
  out.push_back(uint8_t(layer.mode));
  out.insert(out.end(), layer.codes.data.begin(), layer.codes.data.end());
  out.insert(out.end(), layer.s2.data.begin(), layer.s2.data.end());
  out.insert(out.end(), layer.zp.data.begin(), layer.zp.data.end());
  put_f32_vec(out, layer.s1);
  put_f32_vec(out, layer.k);
  put_f32_vec(out, {layer.act_scale});
  return out;
}

DgqLayer dgq_from_bytes(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw format_error(format_error::kind::truncated, "DGQ file shorter than the header");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw format_error(format_error::kind::bad_magic, "bad magic, expected \"DGQ1\"");
  }
  DgqLayer layer;
  layer.h = get_u64_le(bytes.data() + 4);
  layer.o = get_u64_le(bytes.data() + 12);
  layer.g = get_u64_le(bytes.data() + 20);
  uint8_t mode = bytes[28];
  if (mode > 1) {
    throw format_error(format_error::kind::bad_header,
                       "unknown mode byte " + std::to_string(int(mode)));
  }
  layer.mode = ActMode(mode);
  if (layer.h == 0 || layer.o == 0 || layer.o % 2 != 0 || layer.g == 0 ||
      layer.h % layer.g != 0) {
    throw format_error(format_error::kind::bad_header, "inconsistent dimensions in header");
  }
  const size_t n_g = layer.h / layer.g;
  const size_t need = kHeaderBytes + layer.h * layer.o / 2 + n_g * layer.o +
                      n_g * layer.o / 2 + 4 * layer.o + 4 * layer.h + 4;
  if (bytes.size() < need) {
    throw format_error(format_error::kind::truncated,
                       "truncated payload: have " + std::to_string(bytes.size()) +
                           " bytes, header implies " + std::to_string(need));
  }
  if (bytes.size() > need) {
    throw format_error(format_error::kind::size_mismatch,
                       "payload longer than the header implies");
  }
  const uint8_t* p = bytes.data() + kHeaderBytes;
  layer.codes = Tensor::u4(layer.h, layer.o);
  std::memcpy(layer.codes.data.data(), p, layer.codes.data.size());
  p += layer.codes.data.size();
  layer.s2 = Tensor::i8(n_g, layer.o);
  std::memcpy(layer.s2.data.data(), p, layer.s2.data.size());
  p += layer.s2.data.size();
  layer.zp = Tensor::u4(n_g, layer.o);
  std::memcpy(layer.zp.data.data(), p, layer.zp.data.size());
  p += layer.zp.data.size();
  layer.s1.resize(layer.o);
  std::memcpy(layer.s1.data(), p, 4 * layer.o);
  p += 4 * layer.o;
  layer.k.resize(layer.h);
  std::memcpy(layer.k.data(), p, 4 * layer.h);
  p += 4 * layer.h;
  std::memcpy(&layer.act_scale, p, 4);
  validate_layer(layer);
  return layer;
}

void write_dgq(const DgqLayer& layer, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open for writing: " + path);
  auto bytes = dgq_to_bytes(layer);
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw io_error("write failed: " + path);
}

DgqLayer read_dgq(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return dgq_from_bytes(bytes);
}

}  // namespace dgq
