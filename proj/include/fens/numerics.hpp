// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "fens/rng.hpp"
#include "fens/tensor.hpp"

namespace fens {

/// y = xW + b for x[n×d], W[d×h], b[h].
Tensor linear_forward(const Tensor& x, const Tensor& W, const Tensor& b);

/// Elementwise max(x, 0). Subgradient at 0 is 0.
Tensor relu(const Tensor& x);

/// Gates upstream gradient by indicator(x > 0), where x is the pre-activation.
Tensor relu_backward(const Tensor& x, const Tensor& upstream);

struct LossGrad {
  double loss;   // mean over the batch, 64-bit
  Tensor grad;   // d loss / d logits, [n×C]
};

/// Mean negative log-softmax of the true class, with max-subtracted
/// log-sum-exp. grad = (softmax - onehot) / n.
LossGrad softmax_cross_entropy(const Tensor& logits,
                               const std::vector<int>& labels);

/// Row-wise softmax.
Tensor softmax_rows(const Tensor& logits);

/// p <- p - lr * g.
ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, float lr);

/// lr(t) = 0.5 * lr0 * (1 + cos(pi t / T)), minimum 0.
double cosine_anneal(double lr0, std::size_t t, std::size_t T);

enum class OptimizerKind { sgd, adam, yogi };

/// Server-side adaptive optimizer state. No bias correction; the adaptivity
/// floor tau keeps the denominator away from zero.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  ParamSet first_moment;
  ParamSet second_moment;
  std::size_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 1e-3;
  double lr = 1e-3;  // eta_s

  static OptimizerState init(OptimizerKind kind, const ParamSet& target,
                             double lr, double beta1 = 0.9,
                             double beta2 = 0.99, double tau = 1e-3);
};

/// One adaptive ascent step along the pseudo-gradient delta:
///   m <- b1 m + (1-b1) d
///   adam: v <- b2 v + (1-b2) d^2
///   yogi: v <- v - (1-b2) d^2 sign(v - d^2)
///   p <- p + lr * m / (sqrt(v) + tau)
ParamSet adaptive_step(OptimizerState& state, const ParamSet& delta,
                       const ParamSet& params);

/// Multilayer perceptron with ReLU between layers, given as widths
/// [d, h1, ..., C]. Parameters are named W0/b0, W1/b1, ...
namespace mlp {

ParamSet init_params(const std::vector<std::size_t>& widths, Rng rng);
std::size_t param_count(const std::vector<std::size_t>& widths);

struct Cache {
  std::vector<Tensor> pre;   // pre-activations per layer
  std::vector<Tensor> post;  // post-activations (post[0] = input)
};

/// Forward pass over a batch x[n×d]; returns raw logits [n×C].
Tensor forward(const ParamSet& params, const std::vector<std::size_t>& widths,
               const Tensor& x, Cache* cache = nullptr);

struct BackwardResult {
  ParamSet grads;
  Tensor dinput;  // gradient w.r.t. the input batch
};

BackwardResult backward(const ParamSet& params,
                        const std::vector<std::size_t>& widths,
                        const Cache& cache, const Tensor& dlogits);

}  // namespace mlp

/// Central finite differences on every coordinate (a 256-coordinate random
/// sample for large sets) against the supplied analytic gradient. Returns the
/// max relative error.
double grad_check(const std::function<double(const ParamSet&)>& loss_fn,
                  const ParamSet& params, const ParamSet& analytic_grads,
                  double eps = 1e-4, std::size_t max_coords = 256,
                  Rng rng = Rng(0));

}  // namespace fens
