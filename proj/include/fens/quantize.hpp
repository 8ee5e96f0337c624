// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fens/tensor.hpp"

namespace fens {

/// Symmetric per-tensor INT8 quantization: zero-point fixed at 0, values in
/// [-127, 127] (-128 unused).
struct QuantizedTensor {
  std::vector<std::size_t> shape;
  float scale = 1.0f;
  std::vector<std::int8_t> values;

  std::size_t size() const { return values.size(); }
};

struct QuantizedParamSet {
  std::vector<std::pair<std::string, QuantizedTensor>> entries;
};

/// Per tensor: scale = max|x| / 127 (1 for an all-zero tensor),
/// q = clamp(round(x / scale), -127, 127).
QuantizedParamSet quantize_params(const ParamSet& p);

ParamSet dequantize(const QuantizedParamSet& q);

/// Protocol byte accounting: 4 bytes per FP32 scalar; quantized sets cost
/// 1 byte per scalar plus 4 bytes per tensor for the scale. Names and
/// headers are excluded.
std::size_t payload_bytes(const ParamSet& p);
std::size_t payload_bytes(const QuantizedParamSet& q);

// FENSQ1 binary format: per tensor, the scale precedes the INT8 payload.
void save_quantized(const QuantizedParamSet& q, const std::string& path);
QuantizedParamSet load_quantized(const std::string& path);

}  // namespace fens
