#pragma once

#include <cmath>
#include <vector>

#include "mmbeam/core/tape.hpp"

namespace mmbeam {

// Graph builders shared by the encoders and the fusion head. Weights are
// passed as tape node ids, so the same math runs against trainable params
// (tape.param) or against caller-supplied matrices (tape.input).

template <typename T>
int linear_n(Tape<T>& t, int x, int w, int b) {
  return t.add_rowvec(t.matmul(x, w), b);
}

struct AttnWeights {
  int wq, bq, wk, bk, wv, bv, wo, bo;
};

// Multi-head self-attention over the rows of x ([tokens x d]).
template <typename T>
int mhsa_n(Tape<T>& t, int x, const AttnWeights& w, int n_heads) {
  const Eigen::Index d = t.value(x).cols();
  const Eigen::Index dh = d / n_heads;
  int q = linear_n(t, x, w.wq, w.bq);
  int k = linear_n(t, x, w.wk, w.bk);
  int v = linear_n(t, x, w.wv, w.bv);
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<int> heads;
  heads.reserve(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    int qh = t.slice_cols(q, h * dh, dh);
    int kh = t.slice_cols(k, h * dh, dh);
    int vh = t.slice_cols(v, h * dh, dh);
    int scores = t.scale(t.matmul(qh, t.transpose(kh)), inv_sqrt);
    int attn = t.softmax_rows(scores);
    heads.push_back(t.matmul(attn, vh));
  }
  int o = n_heads == 1 ? heads[0] : t.concat_cols(heads);
  return linear_n(t, o, w.wo, w.bo);
}

struct BlockWeights {
  int ln1_g, ln1_b;
  AttnWeights attn;
  int ln2_g, ln2_b;
  int ff1_w, ff1_b, ff2_w, ff2_b;
};

// Pre-norm transformer block: x + MHSA(LN(x)), then x + FF(LN(x)).
// `window` < 0 attends over all tokens; otherwise rows are grouped into
// consecutive windows of that size and attention stays window-local.
template <typename T>
int transformer_block_n(Tape<T>& t, int x, const BlockWeights& w, int n_heads,
                        int window = -1) {
  int h = t.layer_norm_rows(x, w.ln1_g, w.ln1_b);
  int attn_out;
  if (window < 0 || t.value(h).rows() == window) {
    attn_out = mhsa_n(t, h, w.attn, n_heads);
  } else {
    const Eigen::Index rows = t.value(h).rows();
    std::vector<int> outs;
    for (Eigen::Index at = 0; at < rows; at += window) {
      int sub = t.slice_rows(h, at, window);
      outs.push_back(mhsa_n(t, sub, w.attn, n_heads));
    }
    attn_out = t.concat_rows(outs);
  }
  x = t.add(x, attn_out);
  int f = t.layer_norm_rows(x, w.ln2_g, w.ln2_b);
  f = linear_n(t, f, w.ff1_w, w.ff1_b);
  f = t.relu(f);
  f = linear_n(t, f, w.ff2_w, w.ff2_b);
  return t.add(x, f);
}

// Cosine similarity matrix S[i][j] = <A_i, B_j> / (|A_i| |B_j|).
template <typename T>
int cosine_similarity_n(Tape<T>& t, int a, int b) {
  return t.matmul(t.l2_normalize_rows(a), t.transpose(t.l2_normalize_rows(b)));
}

// InfoNCE over a similarity matrix (positives on the diagonal):
//   L = -(1/N) sum_i log softmax(S_i/tau)[i]
template <typename T>
int infonce_from_similarity_n(Tape<T>& t, int sim, T tau, bool symmetric) {
  const Eigen::Index n = t.value(sim).rows();
  int scaled = t.scale(sim, T(1) / tau);
  int loss = t.scale(t.sum_all(t.diag(t.log_softmax_rows(scaled))),
                     T(-1) / static_cast<T>(n));
  if (symmetric) {
    int loss2 = t.scale(t.sum_all(t.diag(t.log_softmax_rows(t.transpose(scaled)))),
                        T(-1) / static_cast<T>(n));
    loss = t.scale(t.add(loss, loss2), T(0.5));
  }
  return loss;
}

// Cross-entropy from a row of logits and an integer label.
template <typename T>
int ce_from_logits_n(Tape<T>& t, int logits, int label) {
  int lsm = t.log_softmax_rows(logits);
  return t.scale(t.row_select(lsm, {label}), T(-1));
}

}  // namespace mmbeam
