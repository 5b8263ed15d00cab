#pragma once

#include <stdexcept>

#include "mmbeam/core/graph_ops.hpp"
#include "mmbeam/core/tape.hpp"

namespace mmbeam::contrastive {

// Synchronized image/LiDAR embedding pairs; row i of each matrix comes from
// the same timestamp.
template <typename T>
struct ContrastiveBatch {
  Mat<T> img_embs;    // [N_b x d]
  Mat<T> lidar_embs;  // [N_b x d]
};

struct ContrastiveConfig {
  double temperature = 0.07;
  bool symmetric = false;

  void validate() const {
    if (temperature <= 0)
      throw std::invalid_argument("contrastive: temperature must be > 0");
  }
};

template <typename T>
Mat<T> cosine_similarity_matrix(const Mat<T>& a, const Mat<T>& b) {
  if (a.cols() != b.cols() || a.rows() != b.rows())
    throw std::invalid_argument("cosine_similarity_matrix: shape mismatch");
  Tape<T> t;
  return t.value(cosine_similarity_n(t, t.input(a), t.input(b)));
}

// InfoNCE over a precomputed similarity matrix; exposed so properties of the
// loss surface can be tested by perturbing similarities directly.
template <typename T>
T infonce_from_similarity(const Mat<T>& sim, T tau, bool symmetric = false) {
  if (sim.rows() != sim.cols())
    throw std::invalid_argument("infonce_from_similarity: not square");
  if (tau <= 0) throw std::invalid_argument("infonce_from_similarity: tau <= 0");
  Tape<T> t;
  return t.scalar_value(
      infonce_from_similarity_n(t, t.input(sim), tau, symmetric));
}

template <typename T>
T infonce_loss(const ContrastiveBatch<T>& batch, const ContrastiveConfig& cfg) {
  cfg.validate();
  if (batch.img_embs.rows() != batch.lidar_embs.rows() ||
      batch.img_embs.cols() != batch.lidar_embs.cols())
    throw std::invalid_argument("infonce_loss: batch shape mismatch");
  if (batch.img_embs.rows() < 1)
    throw std::invalid_argument("infonce_loss: empty batch");
  Tape<T> t;
  int sim = cosine_similarity_n(t, t.input(batch.img_embs),
                                t.input(batch.lidar_embs));
  return t.scalar_value(infonce_from_similarity_n(
      t, sim, static_cast<T>(cfg.temperature), cfg.symmetric));
}

// Top-1 retrieval accuracy of matching image row i to lidar row i by cosine
// similarity; the oracle for pretraining progress.
template <typename T>
double retrieval_top1(const Mat<T>& img_embs, const Mat<T>& lidar_embs) {
  Mat<T> sim = cosine_similarity_matrix(img_embs, lidar_embs);
  int hits = 0;
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < sim.cols(); ++j)
      if (sim(i, j) > sim(i, best)) best = j;
    if (best == i) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(sim.rows());
}

}  // namespace mmbeam::contrastive
