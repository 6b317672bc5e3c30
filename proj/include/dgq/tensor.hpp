#pragma once
// Dense row-major matrix container, the DGT1 binary file format, and the
// deterministic synthetic-data generator shared by every other module.
//
// Supported element types: float32, int8, int32 and packed unsigned 4-bit
// (two values per byte, even column in the LOW nibble, odd column in the
// HIGH nibble; packed tensors require an even column count).

#include <cassert>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "dgq/error.hpp"

namespace dgq {

enum class Dtype : uint8_t {
  kF32 = 0,
  kI8 = 1,
  kI32 = 2,
  kU4 = 3,  // packed, two values per byte
};

const char* dtype_name(Dtype d);

// Payload size in bytes for a rows x cols tensor. Throws format_error for a
// packed tensor with odd cols.
size_t payload_bytes(Dtype d, size_t rows, size_t cols);

struct Tensor {
  Dtype dtype = Dtype::kF32;
  size_t rows = 0;
  size_t cols = 0;
  std::vector<uint8_t> data;  // row-major payload, native (little-endian) layout

  static Tensor f32(size_t rows, size_t cols);
  static Tensor f32(size_t rows, size_t cols, std::vector<float> values);
  static Tensor i8(size_t rows, size_t cols);
  static Tensor i8(size_t rows, size_t cols, const std::vector<int8_t>& values);
  static Tensor i32(size_t rows, size_t cols);
  static Tensor i32(size_t rows, size_t cols, const std::vector<int32_t>& values);
  static Tensor u4(size_t rows, size_t cols);  // zero-filled
  // values are one unpacked nibble per element, each in [0, 15]
  static Tensor u4_packed(size_t rows, size_t cols, const std::vector<uint8_t>& values);

  size_t size() const { return rows * cols; }
  bool empty() const { return size() == 0; }

  float* f32_data() { assert(dtype == Dtype::kF32); return reinterpret_cast<float*>(data.data()); }
  const float* f32_data() const { assert(dtype == Dtype::kF32); return reinterpret_cast<const float*>(data.data()); }
  int8_t* i8_data() { assert(dtype == Dtype::kI8); return reinterpret_cast<int8_t*>(data.data()); }
  const int8_t* i8_data() const { assert(dtype == Dtype::kI8); return reinterpret_cast<const int8_t*>(data.data()); }
  int32_t* i32_data() { assert(dtype == Dtype::kI32); return reinterpret_cast<int32_t*>(data.data()); }
  const int32_t* i32_data() const { assert(dtype == Dtype::kI32); return reinterpret_cast<const int32_t*>(data.data()); }

  float f32_at(size_t r, size_t c) const { return f32_data()[r * cols + c]; }
  int8_t i8_at(size_t r, size_t c) const { return i8_data()[r * cols + c]; }
  int32_t i32_at(size_t r, size_t c) const { return i32_data()[r * cols + c]; }

  uint8_t u4_at(size_t r, size_t c) const;
  void set_u4(size_t r, size_t c, uint8_t v);

  bool same_bits(const Tensor& other) const;
};

// Nibble packing helpers. `values` length must be even; unpack returns one
// byte per nibble in [0, 15]. pack(unpack(bytes)) == bytes.
std::vector<uint8_t> pack_nibbles(const std::vector<uint8_t>& values);
std::vector<uint8_t> unpack_nibbles(const std::vector<uint8_t>& bytes, size_t count);

// ---------------------------------------------------------------------------
// DGT1 file format
//
//   offset  size  field
//   0       4     magic "DGT1"
//   4       1     dtype code (0=f32, 1=i8, 2=i32, 3=u4-packed)
//   5       8     rows, little-endian unsigned
//   13      8     cols, little-endian unsigned
//   21      ...   raw row-major payload
// ---------------------------------------------------------------------------

std::vector<uint8_t> tensor_to_bytes(const Tensor& t);
Tensor tensor_from_bytes(const std::vector<uint8_t>& bytes);

void write_tensor(const Tensor& t, const std::string& path);
Tensor read_tensor(const std::string& path);

// ---------------------------------------------------------------------------
// Deterministic synthetic data
//
// Value stream: SplitMix64 seeded with `seed`, mapped to (0,1] uniforms as
// ((x >> 11) + 1) * 2^-53, turned into standard normals with Box-Muller
// pairs. Outlier columns are drawn from a second SplitMix64 stream seeded
// with (column_seed XOR kColumnStreamSalt) via a partial Fisher-Yates
// shuffle, so the value stream is independent of the outlier spec.
// ---------------------------------------------------------------------------

struct SplitMix64 {
  uint64_t state = 0;

  explicit SplitMix64(uint64_t seed) : state(seed) {}

  uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in (0, 1]
  double next_unit() { return double((next() >> 11) + 1) * 0x1.0p-53; }
};

constexpr uint64_t kColumnStreamSalt = 0xD1B54A32D192ED03ULL;

struct OutlierSpec {
  size_t count = 0;
  float magnitude = 1.0f;
  // Column choice defaults to the tensor seed; suites that model outliers as
  // fixed channels across calibration/eval tensors pin this explicitly.
  std::optional<uint64_t> column_seed;
};

// Sorted list of the `count` outlier columns for a given column seed.
std::vector<size_t> outlier_columns(size_t cols, uint64_t column_seed, size_t count);

Tensor gen_synthetic(size_t rows, size_t cols, uint64_t seed, const OutlierSpec& spec);

}  // namespace dgq
