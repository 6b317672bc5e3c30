#pragma once
// The serialized dual-grained layer artifact: packed 4-bit weight codes,
// group-wise signed-8-bit scales S2, packed group zero-points, channel-wise
// float scales s1, the smoothing vector k and the static activation scale.
//
// DGQ1 file layout (all integers little-endian):
//
//   offset  size        field
//   0       4           magic "DGQ1"
//   4       8           h (input channels)
//   12      8           o (output channels)
//   20      8           g (group size)
//   28      1           mode (0 = static, 1 = dynamic)
//   29      h*o/2       codes, packed u4, row-major h x o
//   ...     n_g*o       S2, int8, row-major n_g x o
//   ...     n_g*o/2     ZP, packed u4, row-major n_g x o
//   ...     4*o         s1, float32
//   ...     4*h         k, float32
//   ...     4           act_scale, float32
//
// with n_g = h / g. Section offsets are derivable from the header alone.

#include <cstdint>
#include <string>
#include <vector>

#include "dgq/search.hpp"
#include "dgq/tensor.hpp"

namespace dgq {

enum class ActMode : uint8_t { kStatic = 0, kDynamic = 1 };

const char* act_mode_name(ActMode m);

struct DgqLayer {
  size_t h = 0;
  size_t o = 0;
  size_t g = 0;
  Tensor codes;           // u4 packed, h x o
  Tensor s2;              // i8, n_g x o, values in [1, 127]
  Tensor zp;              // u4 packed, n_g x o
  std::vector<float> s1;  // length o, > 0
  std::vector<float> k;   // length h, >= 1
  float act_scale = 0.0f;
  ActMode mode = ActMode::kDynamic;

  size_t n_g() const { return g == 0 ? 0 : h / g; }
};

// Assemble and validate a layer from search output. Throws validation_error
// naming the offending field on any invariant violation.
DgqLayer pack_layer(const DualParams& dp, const Tensor& codes,
                    const std::vector<float>& k, float act_scale, ActMode mode,
                    bool fp16_scales = false);

// Full invariant check (shapes, ranges, codes inside their clip intervals).
void validate_layer(const DgqLayer& layer);

// W_s8[i,c] = S2[group(i),c] * (code[i,c] - ZP[group(i),c]), pure integer
// arithmetic. Throws validation_error if any value leaves [-127, 127]
// (impossible for a layer that passes validation; signals corruption).
Tensor dequantize_to_s8(const DgqLayer& layer);

// W_hat[i,c] = s1[c] * W_s8[i,c].
Tensor dequantize_to_f32(const DgqLayer& layer);

struct ByteAccounting {
  size_t weight_bytes = 0;
  size_t scale_bytes = 0;
  size_t total = 0;
  double ratio_vs_int8 = 0.0;
  double ratio_vs_fp16 = 0.0;
};

ByteAccounting byte_accounting(size_t h, size_t o, size_t g);
ByteAccounting byte_accounting(const DgqLayer& layer);

std::vector<uint8_t> dgq_to_bytes(const DgqLayer& layer);
DgqLayer dgq_from_bytes(const std::vector<uint8_t>& bytes);

void write_dgq(const DgqLayer& layer, const std::string& path);
DgqLayer read_dgq(const std::string& path);

}  // namespace dgq
