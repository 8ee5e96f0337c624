// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#include "fens/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace fens {

namespace {
std::size_t shape_product(const std::vector<std::size_t>& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<float> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape_product(shape) != data.size())
    throw std::invalid_argument("Tensor: shape does not match data length");
}

Tensor Tensor::zeros(std::vector<std::size_t> s) {
  std::size_t n = shape_product(s);
  return Tensor(std::move(s), std::vector<float>(n, 0.0f));
}

Tensor Tensor::full(std::vector<std::size_t> s, float value) {
  std::size_t n = shape_product(s);
  return Tensor(std::move(s), std::vector<float>(n, value));
}

Tensor Tensor::from_vector(std::vector<float> d) {
  std::size_t n = d.size();
  return Tensor({n}, std::move(d));
}

std::size_t Tensor::rows() const { return shape.empty() ? 1 : shape[0]; }

std::size_t Tensor::cols() const {
  if (shape.size() < 2) return shape.empty() ? 1 : 1;
  std::size_t c = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) c *= shape[i];
  return c;
}

bool Tensor::all_finite() const {
  for (float v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::check_finite(std::string_view what) const {
  if (!all_finite())
    throw std::runtime_error("non-finite values in " + std::string(what));
}

void ParamSet::add(std::string name, Tensor t) {
  if (has(name))
    throw std::invalid_argument("ParamSet: duplicate name " + name);
  entries_.emplace_back(std::move(name), std::move(t));
}

bool ParamSet::has(std::string_view name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return true;
  return false;
}

Tensor& ParamSet::at(std::string_view name) {
  for (auto& [n, t] : entries_)
    if (n == name) return t;
  throw std::out_of_range("ParamSet: no tensor named " + std::string(name));
}

const Tensor& ParamSet::at(std::string_view name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw std::out_of_range("ParamSet: no tensor named " + std::string(name));
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

bool ParamSet::same_shapes(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first) return false;
    if (entries_[i].second.shape != other.entries_[i].second.shape)
      return false;
  }
  return true;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& [name, t] : entries_) out.add(name, Tensor::zeros(t.shape));
  return out;
}

std::uint64_t ParamSet::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : entries_) {
    feed(name.data(), name.size());
    for (std::size_t d : t.shape) feed(&d, sizeof(d));
    feed(t.data.data(), t.data.size() * sizeof(float));
  }
  return h;
}

void axpy(ParamSet& out, const ParamSet& g, float scale) {
  if (!out.same_shapes(g))
    throw std::invalid_argument("axpy: shape mismatch between param sets");
  for (std::size_t i = 0; i < out.entries().size(); ++i) {
    auto& dst = out.entries()[i].second.data;
    const auto& src = g.entries()[i].second.data;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
}

ParamSet zip(const ParamSet& a, const ParamSet& b,
             const std::function<float(float, float)>& f) {
  if (!a.same_shapes(b))
    throw std::invalid_argument("zip: shape mismatch between param sets");
  ParamSet out = a;
  for (std::size_t i = 0; i < out.entries().size(); ++i) {
    auto& dst = out.entries()[i].second.data;
    const auto& src = b.entries()[i].second.data;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = f(dst[j], src[j]);
  }
  return out;
}

ParamSet difference(const ParamSet& a, const ParamSet& b) {
  return zip(a, b, [](float x, float y) { return x - y; });
}

ParamSet mean(const std::vector<ParamSet>& sets) {
  if (sets.empty()) throw std::invalid_argument("mean: empty set list");
  for (const auto& s : sets)
    if (!s.same_shapes(sets[0]))
      throw std::invalid_argument("mean: shape mismatch between updates");
  ParamSet out = sets[0].zeros_like();
  const float w = 1.0f / static_cast<float>(sets.size());
  // 64-bit accumulation per coordinate, then one narrowing store
  for (std::size_t e = 0; e < out.entries().size(); ++e) {
    auto& dst = out.entries()[e].second.data;
    for (std::size_t j = 0; j < dst.size(); ++j) {
      double acc = 0.0;
      for (const auto& s : sets) acc += s.entries()[e].second.data[j];
      dst[j] = static_cast<float>(acc * w);
    }
  }
  return out;
}

double squared_norm(const ParamSet& p) {
  double acc = 0.0;
  for (const auto& [name, t] : p.entries())
    for (float v : t.data) acc += static_cast<double>(v) * v;
  return acc;
}

}  // namespace fens
