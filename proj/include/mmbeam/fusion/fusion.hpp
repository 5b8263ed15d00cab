#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mmbeam/core/graph_ops.hpp"
#include "mmbeam/core/tape.hpp"

namespace mmbeam::fusion {

// Predicted probability vector over the M beams and its argmax (lowest index
// on ties).
template <typename T>
struct BeamDistribution {
  Mat<T> p;  // [1 x M]
  int top = 0;
};

template <typename T>
int argmax_lowest(const Mat<T>& row) {
  int best = 0;
  for (Eigen::Index m = 1; m < row.cols(); ++m)
    if (row(0, m) > row(0, best)) best = static_cast<int>(m);
  return best;
}

// alpha = softmax(W_g concat(x_img, x_lidar, x_gps) + b_g)
template <typename T>
Mat<T> gate_weights(const Mat<T>& x_img, const Mat<T>& x_lidar,
                    const Mat<T>& x_gps, const Mat<T>& w_g, const Mat<T>& b_g) {
  if (x_img.cols() != x_lidar.cols() || x_img.cols() != x_gps.cols())
    throw std::invalid_argument("gate_weights: dimension mismatch");
  if (w_g.rows() != 3 * x_img.cols() || w_g.cols() != 3)
    throw std::invalid_argument("gate_weights: bad gate shape");
  Tape<T> t;
  int c = t.concat_cols({t.input(x_img), t.input(x_lidar), t.input(x_gps)});
  int a = t.softmax_rows(t.add_rowvec(t.matmul(c, t.input(w_g)), t.input(b_g)));
  return t.value(a);
}

template <typename T>
struct CrossAttnParams {
  Mat<T> wq, bq, wk, bk, wv, bv, wo, bo;
  int n_heads = 4;
};

// One multi-head self-attention layer over the modality tokens (rows of x)
// with a residual connection; no normalization or positional encoding, so the
// op is exactly equivariant to token permutation.
template <typename T>
Mat<T> cross_modal_attention(const Mat<T>& tokens, const CrossAttnParams<T>& p) {
  Tape<T> t;
  int x = t.input(tokens);
  AttnWeights w{t.input(p.wq), t.input(p.bq), t.input(p.wk), t.input(p.bk),
                t.input(p.wv), t.input(p.bv), t.input(p.wo), t.input(p.bo)};
  int refined = t.add(x, mhsa_n(t, x, w, p.n_heads));
  return t.value(refined);
}

// x_fused = sum_m alpha_m * refined_m  (rows of `refined`).
template <typename T>
Mat<T> fuse(const Mat<T>& refined, const Mat<T>& alpha) {
  if (alpha.rows() != 1 || alpha.cols() != refined.rows())
    throw std::invalid_argument("fuse: alpha must be [1 x n_tokens]");
  return alpha * refined;
}

template <typename T>
Mat<T> softmax_row(const Mat<T>& logits) {
  Tape<T> t;
  return t.value(t.softmax_rows(t.input(logits)));
}

// p = softmax(W x_fused + b)
template <typename T>
BeamDistribution<T> classify(const Mat<T>& x_fused, const Mat<T>& w,
                             const Mat<T>& b) {
  if (x_fused.cols() != w.rows())
    throw std::invalid_argument("classify: dimension mismatch");
  Tape<T> t;
  int logits = t.add_rowvec(t.matmul(t.input(x_fused), t.input(w)), t.input(b));
  BeamDistribution<T> out;
  out.p = t.value(t.softmax_rows(logits));
  out.top = argmax_lowest(out.p);
  return out;
}

// Cross-entropy against a one-hot target; the training path computes the same
// quantity from logits through a stable log-softmax (ce_from_logits_n).
template <typename T>
T ce_loss(const Mat<T>& p, const Mat<T>& y_onehot) {
  if (p.rows() != 1 || y_onehot.rows() != 1 || p.cols() != y_onehot.cols())
    throw std::invalid_argument("ce_loss: shape mismatch");
  int hot = -1;
  for (Eigen::Index m = 0; m < y_onehot.cols(); ++m) {
    T v = y_onehot(0, m);
    if (v == T(1)) {
      if (hot >= 0) throw std::invalid_argument("ce_loss: y is not one-hot");
      hot = static_cast<int>(m);
    } else if (v != T(0)) {
      throw std::invalid_argument("ce_loss: y is not one-hot");
    }
  }
  if (hot < 0) throw std::invalid_argument("ce_loss: y is not one-hot");
  T pm = p(0, hot);
  return -std::log(std::max(pm, std::numeric_limits<T>::min()));
}

}  // namespace mmbeam::fusion
