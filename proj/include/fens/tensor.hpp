// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace fens {

/// Dense row-major FP32 tensor. All math stays in 32-bit with 64-bit
/// accumulation inside reductions.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<float> d);

  static Tensor zeros(std::vector<std::size_t> s);
  static Tensor full(std::vector<std::size_t> s, float value);
  static Tensor from_vector(std::vector<float> d);  // 1-D

  std::size_t size() const { return data.size(); }
  std::size_t rows() const;  // first dim (1 for scalars)
  std::size_t cols() const;  // product of remaining dims

  float& at(std::size_t i) { return data[i]; }
  float at(std::size_t i) const { return data[i]; }
  float& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
  float at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  void check_finite(std::string_view what) const;
};

/// Ordered, named collection of tensors holding one model's parameters.
/// Iteration order is insertion order and is part of every wire format.
class ParamSet {
 public:
  using Entry = std::pair<std::string, Tensor>;

  ParamSet() = default;

  void add(std::string name, Tensor t);
  bool has(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t tensor_count() const { return entries_.size(); }
  std::size_t scalar_count() const;
  bool empty() const { return entries_.empty(); }
  bool same_shapes(const ParamSet& other) const;

  /// Structural clone filled with zeros (optimizer accumulators).
  ParamSet zeros_like() const;

  /// FNV-1a over names, shapes and raw FP32 payload; used by freezing checks.
  std::uint64_t content_hash() const;

 private:
  std::vector<Entry> entries_;
};

/// out += scale * g, elementwise across mirrored entries.
void axpy(ParamSet& out, const ParamSet& g, float scale);

/// Elementwise binary map across mirrored entries.
ParamSet zip(const ParamSet& a, const ParamSet& b,
             const std::function<float(float, float)>& f);

/// a - b.
ParamSet difference(const ParamSet& a, const ParamSet& b);

/// Unweighted mean of a non-empty list of mirrored ParamSets.
ParamSet mean(const std::vector<ParamSet>& sets);

double squared_norm(const ParamSet& p);

}  // namespace fens
