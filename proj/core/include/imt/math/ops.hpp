#pragma once

#include "imt/math/tensor.hpp"

#include <span>
#include <vector>

namespace imt {

/// Numerically stable softmax (max-subtracted). Throws on empty input.
Vec softmax(const Vec& logits);
std::vector<double> softmax(std::span<const double> logits);

/// log(softmax(logits)) without forming the probabilities first.
Vec log_softmax(const Vec& logits);

double sigmoid(double x);
double log_add_exp(double a, double b);

/// Backprop through y = softmax(x): returns dL/dx given y and dL/dy.
Vec softmax_backward(const Vec& y, const Vec& dy);

/// Read-only view of one gated recurrent unit's weights.
///
/// Gate rows are stacked [update z; reset r; candidate n] in `input` (3H x I),
/// `recurrent` (3H x H) and `bias` (3H).
struct GruWeights {
  ConstMatMap input;
  ConstMatMap recurrent;
  ConstVecMap bias;

  Eigen::Index hidden_size() const { return recurrent.cols(); }
  Eigen::Index input_size() const { return input.cols(); }
};

/// Mutable gradient accumulators matching GruWeights.
struct GruGrads {
  MatMap input;
  MatMap recurrent;
  VecMap bias;
};

/// Activations saved by gru_forward for the backward pass.
struct GruCache {
  Vec x;
  Vec h_prev;
  Vec z;
  Vec r;
  Vec n;
  Vec rh;
};

/// h' = (1 - z) * n + z * h,  n = tanh(W_n x + U_n (r * h) + b_n).
Vec gru_forward(const GruWeights& w, const Vec& h_prev, const Vec& x, GruCache* cache = nullptr);

/// Accumulates parameter gradients into `grads` and writes dL/dh_prev, dL/dx.
void gru_backward(const GruWeights& w, const GruCache& cache, const Vec& dh, GruGrads& grads,
                  Vec& dh_prev, Vec& dx);

}  // namespace imt
