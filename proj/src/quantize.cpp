// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#include "fens/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fens {

QuantizedParamSet quantize_params(const ParamSet& p) {
  QuantizedParamSet q;
  for (const auto& [name, t] : p.entries()) {
    t.check_finite("quantize_params input tensor " + std::string(name));
    QuantizedTensor qt;
    qt.shape = t.shape;
    float max_abs = 0.0f;
    for (float v : t.data) max_abs = std::max(max_abs, std::abs(v));
    qt.scale = max_abs > 0.0f ? max_abs / 127.0f : 1.0f;
    qt.values.reserve(t.data.size());
    for (float v : t.data) {
      const float r = std::round(v / qt.scale);
      qt.values.push_back(static_cast<std::int8_t>(
          std::clamp(r, -127.0f, 127.0f)));
    }
    q.entries.emplace_back(name, std::move(qt));
  }
  return q;
}

ParamSet dequantize(const QuantizedParamSet& q) {
  ParamSet p;
  for (const auto& [name, qt] : q.entries) {
    std::vector<float> data(qt.values.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      data[i] = qt.scale * static_cast<float>(qt.values[i]);
    p.add(name, Tensor(qt.shape, std::move(data)));
  }
  return p;
}

std::size_t payload_bytes(const ParamSet& p) {
  return 4 * p.scalar_count();
}

std::size_t payload_bytes(const QuantizedParamSet& q) {
  std::size_t bytes = 0;
  for (const auto& [name, qt] : q.entries) bytes += qt.size() + 4;
  return bytes;
}

namespace {
constexpr char kMagic[] = "FENSQ1";
}

void save_quantized(const QuantizedParamSet& q, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_quantized: cannot open " + path);
  out.write(kMagic, 6);
  const std::uint32_t count = static_cast<std::uint32_t>(q.entries.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, qt] : q.entries) {
    const std::uint32_t name_len = static_cast<std::uint32_t>(name.size());
    out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    out.write(name.data(), name_len);
    const std::uint32_t ndim = static_cast<std::uint32_t>(qt.shape.size());
    out.write(reinterpret_cast<const char*>(&ndim), sizeof(ndim));
    for (std::size_t d : qt.shape) {
      const std::uint64_t d64 = d;
      out.write(reinterpret_cast<const char*>(&d64), sizeof(d64));
    }
    out.write(reinterpret_cast<const char*>(&qt.scale), sizeof(qt.scale));
    out.write(reinterpret_cast<const char*>(qt.values.data()),
              static_cast<std::streamsize>(qt.values.size()));
  }
}

QuantizedParamSet load_quantized(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_quantized: cannot open " + path);
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0)
    throw std::runtime_error("load_quantized: bad magic in " + path);
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  QuantizedParamSet q;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    std::uint32_t ndim = 0;
    in.read(reinterpret_cast<char*>(&ndim), sizeof(ndim));
    QuantizedTensor qt;
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      std::uint64_t dim = 0;
      in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
      qt.shape.push_back(static_cast<std::size_t>(dim));
      total *= dim;
    }
    in.read(reinterpret_cast<char*>(&qt.scale), sizeof(qt.scale));
    qt.values.resize(total);
    in.read(reinterpret_cast<char*>(qt.values.data()),
            static_cast<std::streamsize>(total));
    if (!in) throw std::runtime_error("load_quantized: truncated file");
    q.entries.emplace_back(std::move(name), std::move(qt));
  }
  return q;
}

}  // namespace fens
