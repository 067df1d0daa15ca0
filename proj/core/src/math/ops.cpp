#include "imt/math/ops.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace imt {

Vec softmax(const Vec& logits) {
  if (logits.size() == 0) throw std::invalid_argument("softmax of empty vector");
  const double peak = logits.maxCoeff();
  Vec out = (logits.array() - peak).exp();
  out /= out.sum();
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  const Vec v = softmax(Vec(ConstVecMap(logits.data(), static_cast<Eigen::Index>(logits.size()))));
  return {v.data(), v.data() + v.size()};
}

Vec log_softmax(const Vec& logits) {
  if (logits.size() == 0) throw std::invalid_argument("log_softmax of empty vector");
  const double peak = logits.maxCoeff();
  const double log_sum = std::log((logits.array() - peak).exp().sum()) + peak;
  return logits.array() - log_sum;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_add_exp(double a, double b) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

Vec softmax_backward(const Vec& y, const Vec& dy) {
  return y.array() * (dy.array() - y.dot(dy));
}

Vec gru_forward(const GruWeights& w, const Vec& h_prev, const Vec& x, GruCache* cache) {
  const Eigen::Index hidden = w.hidden_size();
  if (h_prev.size() != hidden || x.size() != w.input_size()) {
    throw std::invalid_argument("gru_forward: dimension mismatch");
  }
  Vec gates = w.input * x + w.bias;
  gates.head(2 * hidden) += w.recurrent.topRows(2 * hidden) * h_prev;

  Vec z = gates.head(hidden).unaryExpr([](double v) { return sigmoid(v); });
  Vec r = gates.segment(hidden, hidden).unaryExpr([](double v) { return sigmoid(v); });
  Vec rh = r.cwiseProduct(h_prev);
  Vec n = (gates.tail(hidden) + w.recurrent.bottomRows(hidden) * rh).array().tanh();

  Vec h = (1.0 - z.array()) * n.array() + z.array() * h_prev.array();
  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->n = std::move(n);
    cache->rh = std::move(rh);
  }
  return h;
}

void gru_backward(const GruWeights& w, const GruCache& c, const Vec& dh, GruGrads& g, Vec& dh_prev,
                  Vec& dx) {
  const Eigen::Index hidden = w.hidden_size();
  const Vec dn = dh.array() * (1.0 - c.z.array());
  const Vec dz = dh.array() * (c.h_prev.array() - c.n.array());

  Vec da(3 * hidden);
  da.tail(hidden) = dn.array() * (1.0 - c.n.array().square());
  const Vec drh = w.recurrent.bottomRows(hidden).transpose() * da.tail(hidden);
  const Vec dr = drh.cwiseProduct(c.h_prev);
  da.head(hidden) = dz.array() * c.z.array() * (1.0 - c.z.array());
  da.segment(hidden, hidden) = dr.array() * c.r.array() * (1.0 - c.r.array());

  g.input.noalias() += da * c.x.transpose();
  g.bias += da;
  g.recurrent.topRows(2 * hidden).noalias() += da.head(2 * hidden) * c.h_prev.transpose();
  g.recurrent.bottomRows(hidden).noalias() += da.tail(hidden) * c.rh.transpose();

  dx = w.input.transpose() * da;
  dh_prev = dh.cwiseProduct(c.z) + drh.cwiseProduct(c.r);
  dh_prev.noalias() += w.recurrent.topRows(2 * hidden).transpose() * da.head(2 * hidden);
}

}  // namespace imt
