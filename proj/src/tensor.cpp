#include "dgq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace dgq {

const char* dtype_name(Dtype d) {
  switch (d) {
    case Dtype::kF32: return "float32";
    case Dtype::kI8: return "int8";
    case Dtype::kI32: return "int32";
    case Dtype::kU4: return "uint4-packed";
  }
  return "unknown";
}

size_t payload_bytes(Dtype d, size_t rows, size_t cols) {
  switch (d) {
    case Dtype::kF32: return rows * cols * 4;
    case Dtype::kI8: return rows * cols;
    case Dtype::kI32: return rows * cols * 4;
    case Dtype::kU4:
      if (cols % 2 != 0) {
        throw format_error(format_error::kind::bad_header,
                           "uint4-packed tensor requires an even column count, got " +
                               std::to_string(cols));
      }
      return rows * cols / 2;
  }
  throw format_error(format_error::kind::unknown_dtype, "unknown dtype");
}

Tensor Tensor::f32(size_t rows, size_t cols) {
  Tensor t;
  t.dtype = Dtype::kF32;
  t.rows = rows;
  t.cols = cols;
  t.data.assign(payload_bytes(t.dtype, rows, cols), 0);
  return t;
}

Tensor Tensor::f32(size_t rows, size_t cols, std::vector<float> values) {
  assert(values.size() == rows * cols);
  Tensor t = f32(rows, cols);
  std::memcpy(t.data.data(), values.data(), t.data.size());
  return t;
}

Tensor Tensor::i8(size_t rows, size_t cols) {
  Tensor t;
  t.dtype = Dtype::kI8;
  t.rows = rows;
  t.cols = cols;
  t.data.assign(payload_bytes(t.dtype, rows, cols), 0);
  return t;
}

Tensor Tensor::i8(size_t rows, size_t cols, const std::vector<int8_t>& values) {
  assert(values.size() == rows * cols);
  Tensor t = i8(rows, cols);
  std::memcpy(t.data.data(), values.data(), t.data.size());
  return t;
}

Tensor Tensor::i32(size_t rows, size_t cols) {
  Tensor t;
  t.dtype = Dtype::kI32;
  t.rows = rows;
  t.cols = cols;
  t.data.assign(payload_bytes(t.dtype, rows, cols), 0);
  return t;
}

Tensor Tensor::i32(size_t rows, size_t cols, const std::vector<int32_t>& values) {
  assert(values.size() == rows * cols);
  Tensor t = i32(rows, cols);
  std::memcpy(t.data.data(), values.data(), t.data.size());
  return t;
}

Tensor Tensor::u4(size_t rows, size_t cols) {
  Tensor t;
  t.dtype = Dtype::kU4;
  t.rows = rows;
  t.cols = cols;
  t.data.assign(payload_bytes(t.dtype, rows, cols), 0);
  return t;
}

Tensor Tensor::u4_packed(size_t rows, size_t cols, const std::vector<uint8_t>& values) {
  assert(values.size() == rows * cols);
  Tensor t = u4(rows, cols);
  t.data = pack_nibbles(values);
  return t;
}

uint8_t Tensor::u4_at(size_t r, size_t c) const {
  assert(dtype == Dtype::kU4);
  size_t idx = r * cols + c;
  uint8_t byte = data[idx / 2];
  return (idx % 2 == 0) ? (byte & 0x0F) : (byte >> 4);
}

void Tensor::set_u4(size_t r, size_t c, uint8_t v) {
  assert(dtype == Dtype::kU4);
  assert(v <= 15);
  size_t idx = r * cols + c;
  uint8_t& byte = data[idx / 2];
  if (idx % 2 == 0) {
    byte = uint8_t((byte & 0xF0) | v);
  } else {
    byte = uint8_t((byte & 0x0F) | (v << 4));
  }
}

bool Tensor::same_bits(const Tensor& other) const {
  return dtype == other.dtype && rows == other.rows && cols == other.cols &&
         data == other.data;
}

std::vector<uint8_t> pack_nibbles(const std::vector<uint8_t>& values) {
  assert(values.size() % 2 == 0);
  std::vector<uint8_t> bytes(values.size() / 2);
  for (size_t i = 0; i < bytes.size(); ++i) {
    assert(values[2 * i] <= 15 && values[2 * i + 1] <= 15);
    bytes[i] = uint8_t(values[2 * i] | (values[2 * i + 1] << 4));
  }
  return bytes;
}

std::vector<uint8_t> unpack_nibbles(const std::vector<uint8_t>& bytes, size_t count) {
  assert(count <= bytes.size() * 2);
  std::vector<uint8_t> values(count);
  for (size_t i = 0; i < count; ++i) {
    uint8_t byte = bytes[i / 2];
    values[i] = (i % 2 == 0) ? (byte & 0x0F) : (byte >> 4);
  }
  return values;
}

namespace {

constexpr size_t kHeaderBytes = 21;
constexpr char kMagic[4] = {'D', 'G', 'T', '1'};

void put_u64_le(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

uint64_t get_u64_le(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<uint8_t> tensor_to_bytes(const Tensor& t) {
  std::vector<uint8_t> out;
  out.reserve(kHeaderBytes + t.data.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(uint8_t(t.dtype));
  put_u64_le(out, t.rows);
  put_u64_le(out, t.cols);
  out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

Tensor tensor_from_bytes(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw format_error(format_error::kind::truncated,
                       "tensor file shorter than the 21-byte header");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw format_error(format_error::kind::bad_magic,
                       "bad magic, expected \"DGT1\"");
  }
  uint8_t code = bytes[4];
  if (code > 3) {
    throw format_error(format_error::kind::unknown_dtype,
                       "unknown dtype code " + std::to_string(int(code)));
  }
  Tensor t;
  t.dtype = Dtype(code);
  t.rows = get_u64_le(bytes.data() + 5);
  t.cols = get_u64_le(bytes.data() + 13);
  size_t expect = payload_bytes(t.dtype, t.rows, t.cols);
  size_t have = bytes.size() - kHeaderBytes;
  if (have < expect) {
    throw format_error(format_error::kind::truncated,
                       "truncated payload: have " + std::to_string(have) +
                           " bytes, header implies " + std::to_string(expect));
  }
  if (have > expect) {
    throw format_error(format_error::kind::size_mismatch,
                       "payload longer than the header implies: have " +
                           std::to_string(have) + ", expected " + std::to_string(expect));
  }
  t.data.assign(bytes.begin() + kHeaderBytes, bytes.end());
  return t;
}

void write_tensor(const Tensor& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open for writing: " + path);
  auto bytes = tensor_to_bytes(t);
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw io_error("write failed: " + path);
}

Tensor read_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return tensor_from_bytes(bytes);
}

std::vector<size_t> outlier_columns(size_t cols, uint64_t column_seed, size_t count) {
  assert(count <= cols);
  SplitMix64 rng(column_seed ^ kColumnStreamSalt);
  std::vector<size_t> idx(cols);
  for (size_t i = 0; i < cols; ++i) idx[i] = i;
  for (size_t i = 0; i < count; ++i) {
    size_t j = i + size_t(rng.next() % uint64_t(cols - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Tensor gen_synthetic(size_t rows, size_t cols, uint64_t seed, const OutlierSpec& spec) {
  if (spec.count > cols) {
    throw std::invalid_argument("outlier count " + std::to_string(spec.count) +
                                " exceeds column count " + std::to_string(cols));
  }
  std::vector<float> v(rows * cols);
  SplitMix64 rng(seed);
  for (size_t i = 0; i < v.size(); i += 2) {
    double u1 = rng.next_unit();
    double u2 = rng.next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    v[i] = float(r * std::cos(2.0 * std::numbers::pi * u2));
    if (i + 1 < v.size()) v[i + 1] = float(r * std::sin(2.0 * std::numbers::pi * u2));
  }
  if (spec.count > 0) {
    auto outl = outlier_columns(cols, spec.column_seed.value_or(seed), spec.count);
    for (size_t c : outl) {
      for (size_t r = 0; r < rows; ++r) v[r * cols + c] *= spec.magnitude;
    }
  }
  return Tensor::f32(rows, cols, std::move(v));
}

}  // namespace dgq
