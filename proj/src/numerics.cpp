// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#include "fens/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fens {

Tensor linear_forward(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (x.shape.size() != 2 || W.shape.size() != 2 || b.shape.size() != 1)
    throw std::invalid_argument("linear_forward: expected x[n,d] W[d,h] b[h]");
  const std::size_t n = x.shape[0], d = x.shape[1];
  const std::size_t h = W.shape[1];
  if (W.shape[0] != d || b.shape[0] != h)
    throw std::invalid_argument("linear_forward: inner dimensions disagree");
  Tensor y = Tensor::zeros({n, h});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < h; ++j) {
      double acc = b.data[j];
      for (std::size_t k = 0; k < d; ++k)
        acc += static_cast<double>(x.data[i * d + k]) * W.data[k * h + j];
      y.data[i * h + j] = static_cast<float>(acc);
    }
  }
  return y;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data) v = v > 0.0f ? v : 0.0f;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& upstream) {
  if (!x.same_shape(upstream))
    throw std::invalid_argument("relu_backward: shape mismatch");
  Tensor g = upstream;
  for (std::size_t i = 0; i < g.data.size(); ++i)
    if (x.data[i] <= 0.0f) g.data[i] = 0.0f;
  return g;
}

LossGrad softmax_cross_entropy(const Tensor& logits,
                               const std::vector<int>& labels) {
  if (logits.shape.size() != 2)
    throw std::invalid_argument("softmax_cross_entropy: logits must be 2-D");
  const std::size_t n = logits.shape[0], C = logits.shape[1];
  if (labels.size() != n)
    throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  Tensor grad = Tensor::zeros({n, C});
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= C)
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    double mx = logits.data[i * C];
    for (std::size_t c = 1; c < C; ++c)
      mx = std::max(mx, static_cast<double>(logits.data[i * C + c]));
    double denom = 0.0;
    for (std::size_t c = 0; c < C; ++c)
      denom += std::exp(static_cast<double>(logits.data[i * C + c]) - mx);
    const double lse = mx + std::log(denom);
    loss += lse - static_cast<double>(logits.data[i * C + y]);
    for (std::size_t c = 0; c < C; ++c) {
      double p = std::exp(static_cast<double>(logits.data[i * C + c]) - mx) /
                 denom;
      grad.data[i * C + c] = static_cast<float>(
          (p - (static_cast<std::size_t>(y) == c ? 1.0 : 0.0)) /
          static_cast<double>(n));
    }
  }
  return {loss / static_cast<double>(n), std::move(grad)};
}

Tensor softmax_rows(const Tensor& logits) {
  const std::size_t n = logits.rows(), C = logits.cols();
  Tensor p = Tensor::zeros(logits.shape);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits.data[i * C];
    for (std::size_t c = 1; c < C; ++c)
      mx = std::max(mx, static_cast<double>(logits.data[i * C + c]));
    double denom = 0.0;
    for (std::size_t c = 0; c < C; ++c)
      denom += std::exp(static_cast<double>(logits.data[i * C + c]) - mx);
    for (std::size_t c = 0; c < C; ++c)
      p.data[i * C + c] = static_cast<float>(
          std::exp(static_cast<double>(logits.data[i * C + c]) - mx) / denom);
  }
  return p;
}

ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, float lr) {
  ParamSet out = params;
  axpy(out, grads, -lr);
  return out;
}

double cosine_anneal(double lr0, std::size_t t, std::size_t T) {
  if (T < 1) throw std::invalid_argument("cosine_anneal: T must be >= 1");
  if (t > T) throw std::invalid_argument("cosine_anneal: t > T");
  return 0.5 * lr0 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) /
                         static_cast<double>(T)));
}

OptimizerState OptimizerState::init(OptimizerKind kind, const ParamSet& target,
                                    double lr, double beta1, double beta2,
                                    double tau) {
  OptimizerState s;
  s.kind = kind;
  s.first_moment = target.zeros_like();
  s.second_moment = target.zeros_like();
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.tau = tau;
  return s;
}

ParamSet adaptive_step(OptimizerState& state, const ParamSet& delta,
                       const ParamSet& params) {
  if (state.kind == OptimizerKind::sgd)
    throw std::invalid_argument("adaptive_step: kind must be adam or yogi");
  if (state.tau <= 0.0)
    throw std::invalid_argument("adaptive_step: tau must be positive");
  if (!params.same_shapes(delta) || !params.same_shapes(state.first_moment))
    throw std::invalid_argument("adaptive_step: shape mismatch");
  ParamSet out = params;
  const float b1 = static_cast<float>(state.beta1);
  const float b2 = static_cast<float>(state.beta2);
  const float tau = static_cast<float>(state.tau);
  const float lr = static_cast<float>(state.lr);
  for (std::size_t e = 0; e < params.entries().size(); ++e) {
    auto& m = state.first_moment.entries()[e].second.data;
    auto& v = state.second_moment.entries()[e].second.data;
    const auto& d = delta.entries()[e].second.data;
    auto& p = out.entries()[e].second.data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const float d2 = d[j] * d[j];
      m[j] = b1 * m[j] + (1.0f - b1) * d[j];
      if (state.kind == OptimizerKind::adam) {
        v[j] = b2 * v[j] + (1.0f - b2) * d2;
      } else {
        const float sign = v[j] > d2 ? 1.0f : (v[j] < d2 ? -1.0f : 0.0f);
        v[j] = std::max(0.0f, v[j] - (1.0f - b2) * d2 * sign);
      }
      p[j] += lr * m[j] / (std::sqrt(v[j]) + tau);
    }
  }
  ++state.step_count;
  return out;
}

namespace mlp {

ParamSet init_params(const std::vector<std::size_t>& widths, Rng rng) {
  if (widths.size() < 2)
    throw std::invalid_argument("mlp: need at least input and output widths");
  ParamSet p;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l], fan_out = widths[l + 1];
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Tensor W = Tensor::zeros({fan_in, fan_out});
    for (auto& w : W.data)
      w = static_cast<float>(rng.uniform(-bound, bound));
    p.add("W" + std::to_string(l), std::move(W));
    p.add("b" + std::to_string(l), Tensor::zeros({fan_out}));
  }
  return p;
}

std::size_t param_count(const std::vector<std::size_t>& widths) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    n += widths[l] * widths[l + 1] + widths[l + 1];
  return n;
}

Tensor forward(const ParamSet& params, const std::vector<std::size_t>& widths,
               const Tensor& x, Cache* cache) {
  if (x.shape.size() != 2 || x.shape[1] != widths.front())
    throw std::invalid_argument("mlp::forward: input width mismatch");
  const std::size_t layers = widths.size() - 1;
  Tensor h = x;
  if (cache) {
    cache->pre.clear();
    cache->post.clear();
    cache->post.push_back(h);
  }
  for (std::size_t l = 0; l < layers; ++l) {
    Tensor z = linear_forward(h, params.at("W" + std::to_string(l)),
                              params.at("b" + std::to_string(l)));
    if (cache) cache->pre.push_back(z);
    h = (l + 1 < layers) ? relu(z) : z;
    if (cache && l + 1 < layers) cache->post.push_back(h);
  }
  return h;
}

BackwardResult backward(const ParamSet& params,
                        const std::vector<std::size_t>& widths,
                        const Cache& cache, const Tensor& dlogits) {
  const std::size_t layers = widths.size() - 1;
  ParamSet grads = params.zeros_like();
  Tensor delta = dlogits;  // gradient w.r.t. the current pre-activation
  for (std::size_t l = layers; l-- > 0;) {
    if (l + 1 < layers) delta = relu_backward(cache.pre[l], delta);
    const Tensor& input = cache.post[l];
    const std::size_t n = input.shape[0];
    const std::size_t din = widths[l], dout = widths[l + 1];
    Tensor& dW = grads.at("W" + std::to_string(l));
    Tensor& db = grads.at("b" + std::to_string(l));
    for (std::size_t k = 0; k < din; ++k)
      for (std::size_t j = 0; j < dout; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          acc += static_cast<double>(input.data[i * din + k]) *
                 delta.data[i * dout + j];
        dW.data[k * dout + j] = static_cast<float>(acc);
      }
    for (std::size_t j = 0; j < dout; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += delta.data[i * dout + j];
      db.data[j] = static_cast<float>(acc);
    }
    const Tensor& W = params.at("W" + std::to_string(l));
    Tensor dprev = Tensor::zeros({n, din});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < din; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < dout; ++j)
          acc += static_cast<double>(delta.data[i * dout + j]) *
                 W.data[k * dout + j];
        dprev.data[i * din + k] = static_cast<float>(acc);
      }
    delta = std::move(dprev);
  }
  return {std::move(grads), std::move(delta)};
}

}  // namespace mlp

double grad_check(const std::function<double(const ParamSet&)>& loss_fn,
                  const ParamSet& params, const ParamSet& analytic_grads,
                  double eps, std::size_t max_coords, Rng rng) {
  if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be > 0");
  const std::size_t total = params.scalar_count();
  if (total == 0) return 0.0;

  // flat coordinate ids, sampled when the set is large
  std::vector<std::size_t> coords;
  if (total <= max_coords) {
    coords.resize(total);
    for (std::size_t i = 0; i < total; ++i) coords[i] = i;
  } else {
    std::vector<std::size_t> all(total);
    for (std::size_t i = 0; i < total; ++i) all[i] = i;
    rng.shuffle(all);
    coords.assign(all.begin(), all.begin() + max_coords);
  }

  double max_rel = 0.0;
  for (std::size_t flat : coords) {
    // locate (entry, offset) for the flat id
    std::size_t e = 0, off = flat;
    while (off >= params.entries()[e].second.size()) {
      off -= params.entries()[e].second.size();
      ++e;
    }
    ParamSet probe = params;
    float* slot = &probe.entries()[e].second.data[off];
    const float orig = *slot;
    // snap the perturbed values to their float32 representations and divide
    // by the realized gap, not the nominal 2*eps
    auto central = [&](double h) {
      const float hi = static_cast<float>(static_cast<double>(orig) + h);
      const float lo = static_cast<float>(static_cast<double>(orig) - h);
      *slot = hi;
      const double fhi = loss_fn(probe);
      *slot = lo;
      const double flo = loss_fn(probe);
      *slot = orig;
      if (!std::isfinite(fhi) || !std::isfinite(flo))
        throw std::runtime_error("grad_check: non-finite loss");
      return (fhi - flo) /
             (static_cast<double>(hi) - static_cast<double>(lo));
    };
    const double fd = central(eps);
    const double fd_half = central(eps / 2.0);
    // central differences of a smooth function agree to O(eps^2); a large
    // gap means the stencil straddles a ReLU kink, which the contract
    // excludes
    if (std::abs(fd - fd_half) >
        1e-3 * std::max({std::abs(fd), std::abs(fd_half), 1.0}))
      continue;
    const double an = analytic_grads.entries()[e].second.data[off];
    const double rel =
        std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace fens
