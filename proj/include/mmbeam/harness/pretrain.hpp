#pragma once

#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mmbeam/contrastive/infonce.hpp"
#include "mmbeam/core/parallel.hpp"
#include "mmbeam/core/rng.hpp"
#include "mmbeam/enc/model.hpp"
#include "mmbeam/harness/train.hpp"

namespace mmbeam::harness {

struct PretrainConfig {
  int epochs = 20;  // 0 is allowed and leaves parameters untouched
  double lr = 1e-3;
  int batch_size = 32;
  double weight_decay = 1e-4;
  uint64_t seed = 1;
  contrastive::ContrastiveConfig contrastive;
  int threads = 0;
  int retrieval_batch = 64;  // held-out pairs used for the retrieval probe

  void validate() const {
    if (epochs < 0) throw std::invalid_argument("pretrain: negative epochs");
    if (batch_size < 2)
      throw std::invalid_argument("pretrain: batch_size must be >= 2");
    contrastive.validate();
  }
};

struct PretrainResult {
  std::vector<double> mean_loss;       // per epoch
  std::vector<double> retrieval_top1;  // per epoch, held-out batch
};

namespace detail {

// Encode up to `limit` samples of `ds` into [n x d] image/lidar embedding
// matrices (forward only).
template <typename T>
std::pair<Mat<T>, Mat<T>> encode_pairs(const enc::Model<T>& model,
                                       const LoadedDataset<T>& ds, int limit,
                                       int threads) {
  const int n = std::min<int>(limit, ds.size());
  Mat<T> img(n, model.config().d_shared), lid(n, model.config().d_shared);
  parallel_chunks(kGradChunks, threads, [&](int c) {
    auto [begin, end] = chunk_range(c, n);
    for (int i = begin; i < end; ++i) {
      Tape<T> t(&model.params());
      img.row(i) = t.value(model.encode_image_t(t, t.input(ds.samples[i].image)));
      lid.row(i) = t.value(model.encode_lidar_t(t, ds.samples[i].vox));
    }
  });
  return {std::move(img), std::move(lid)};
}

}  // namespace detail

// Contrastive pretraining of the vision and LiDAR branches (all other
// parameter groups untouched). Batches with a single pair are dropped.
template <typename T>
PretrainResult pretrain(enc::Model<T>& model, const LoadedDataset<T>& train,
                        const LoadedDataset<T>& val, const PretrainConfig& cfg) {
  cfg.validate();
  if (train.samples.empty())
    throw std::invalid_argument("pretrain: empty training split");
  const int threads = resolve_threads(cfg.threads);
  const int d = model.config().d_shared;

  AdamW<T> opt;
  opt.lr = static_cast<T>(cfg.lr);
  opt.weight_decay = static_cast<T>(cfg.weight_decay);
  Rng rng(cfg.seed);

  PretrainResult result;
  for (int e = 1; e <= cfg.epochs; ++e) {
    std::vector<int> order(train.samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng erng = rng.fork(static_cast<uint64_t>(e));
    erng.shuffle(order);

    double loss_sum = 0.0;
    int n_seen = 0;
    for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
      const int B = static_cast<int>(
          std::min<size_t>(cfg.batch_size, order.size() - at));
      if (B < 2) break;  // a singleton pair carries no contrastive signal

      // Stage 1: per-sample forward passes, kept alive for the backward pass.
      std::vector<std::unique_ptr<Tape<T>>> tapes(B);
      std::vector<int> out_nodes(B);
      parallel_chunks(kGradChunks, threads, [&](int c) {
        auto [begin, end] = detail::chunk_range(c, B);
        for (int i = begin; i < end; ++i) {
          const LoadedSample<T>& s = train.samples[order[at + i]];
          tapes[i] = std::make_unique<Tape<T>>(&model.params());
          Tape<T>& t = *tapes[i];
          int xi = model.encode_image_t(t, t.input(s.image));
          int xl = model.encode_lidar_t(t, s.vox);
          out_nodes[i] = t.concat_cols({xi, xl});
        }
      });

      // Stage 2: batch loss over the collected embeddings.
      Mat<T> img(B, d), lid(B, d);
      for (int i = 0; i < B; ++i) {
        const Mat<T>& o = tapes[i]->value(out_nodes[i]);
        img.row(i) = o.middleCols(0, d);
        lid.row(i) = o.middleCols(d, d);
      }
      Tape<T> lt;
      int ia = lt.input(img), ib = lt.input(lid);
      int sim = cosine_similarity_n(lt, ia, ib);
      int loss = infonce_from_similarity_n(
          lt, sim, static_cast<T>(cfg.contrastive.temperature),
          cfg.contrastive.symmetric);
      double lv = lt.scalar_value(loss);
      if (!std::isfinite(lv))
        throw std::runtime_error("pretrain: non-finite InfoNCE loss (epoch " +
                                 std::to_string(e) + ")");
      lt.backward_scalar(loss, nullptr);
      Mat<T> d_img = lt.leaf_grad(ia), d_lid = lt.leaf_grad(ib);

      // Stage 3: push embedding gradients through the per-sample tapes.
      std::vector<GradBuffer<T>> gbs;
      gbs.reserve(kGradChunks);
      for (int c = 0; c < kGradChunks; ++c) gbs.emplace_back(model.params());
      parallel_chunks(kGradChunks, threads, [&](int c) {
        auto [begin, end] = detail::chunk_range(c, B);
        for (int i = begin; i < end; ++i) {
          Mat<T> seed(1, 2 * d);
          seed.middleCols(0, d) = d_img.row(i);
          seed.middleCols(d, d) = d_lid.row(i);
          tapes[i]->backward(out_nodes[i], seed, &gbs[c]);
        }
      });
      for (int c = 1; c < kGradChunks; ++c) gbs[0].merge(gbs[c]);
      opt.step(model.params(), gbs[0], enc::Model<T>::contrastive_param);

      loss_sum += lv * B;
      n_seen += B;
    }
    result.mean_loss.push_back(loss_sum / std::max(1, n_seen));

    double top1 = 0.0;
    if (!val.samples.empty()) {
      auto [vi, vl] =
          detail::encode_pairs(model, val, cfg.retrieval_batch, threads);
      top1 = contrastive::retrieval_top1(vi, vl);
    }
    result.retrieval_top1.push_back(top1);
  }
  return result;
}

}  // namespace mmbeam::harness
