#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmbeam/core/parallel.hpp"
#include "mmbeam/core/rng.hpp"
#include "mmbeam/enc/model.hpp"
#include "mmbeam/harness/dataset.hpp"
#include "mmbeam/metrics/dba.hpp"

namespace mmbeam::harness {

// Gradient work is split into a fixed number of chunks regardless of the
// thread count, and chunk buffers merge in chunk order, so results are
// bit-identical for any --threads setting.
constexpr int kGradChunks = 8;

struct ModalityMask {
  bool image = true;
  bool lidar = true;
  bool gps = true;

  int count() const { return (image ? 1 : 0) + (lidar ? 1 : 0) + (gps ? 1 : 0); }
};

struct TrainConfig {
  int epochs = 100;
  double lr = 1e-3;
  int batch_size = 32;
  int early_stop_patience = 10;
  uint64_t seed = 1;
  double weight_decay = 1e-4;
  enc::GateOrder gate_order = enc::GateOrder::kAfterAttention;
  bool use_pretrain = true;
  bool use_gps_text = true;
  ModalityMask modality_mask;
  int threads = 0;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (batch_size < 2) throw std::invalid_argument("train: batch_size must be >= 2");
    if (early_stop_patience < 1)
      throw std::invalid_argument("train: patience must be >= 1");
    if (modality_mask.count() == 0)
      throw std::invalid_argument("train: modality mask must not be empty");
  }
};

// Tracks the best validation metric; stops after `patience` epochs without
// improvement. Epochs are 1-based.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  // Returns true when training should halt after this epoch.
  bool update(int epoch, double value) {
    if (value > best_) {
      best_ = value;
      best_epoch_ = epoch;
      bad_ = 0;
      return false;
    }
    ++bad_;
    return bad_ >= patience_;
  }

  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_; }

 private:
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int best_epoch_ = -1;
  int bad_ = 0;
};

template <typename T>
typename enc::Model<T>::HeadOut forward_head(const enc::Model<T>& model,
                                             Tape<T>& t,
                                             const LoadedSample<T>& s,
                                             const TrainConfig& cfg) {
  std::vector<std::pair<enc::Modality, int>> tokens;
  if (cfg.modality_mask.image)
    tokens.push_back({enc::kImage, model.encode_image_t(t, t.input(s.image))});
  if (cfg.modality_mask.lidar)
    tokens.push_back({enc::kLidar, model.encode_lidar_t(t, s.vox)});
  if (cfg.modality_mask.gps) {
    int xp = model.encode_pos_t(t, t.input(s.gps_norm));
    int xt = cfg.use_gps_text ? model.encode_text_t(t, s.token_ids) : -1;
    tokens.push_back({enc::kGps, model.unify_gps_t(t, xp, xt)});
  }
  return model.head_t(t, tokens, cfg.gate_order);
}

// Parameters a finetuning phase owns (and therefore steps and decays).
inline std::function<bool(const std::string&)> finetune_params(
    const TrainConfig& cfg) {
  ModalityMask mask = cfg.modality_mask;
  bool text = cfg.use_gps_text;
  return [mask, text](const std::string& name) {
    auto pre = [&name](const char* p) { return name.rfind(p, 0) == 0; };
    if (pre("vision.")) return mask.image;
    if (pre("lidar.")) return mask.lidar;
    if (pre("pos.") || pre("gps.")) return mask.gps;
    if (pre("text.")) return mask.gps && text;
    if (pre("gate.") || pre("fus.")) return mask.count() > 1;
    if (pre("cls.")) return true;
    return false;
  };
}

namespace detail {
inline std::pair<int, int> chunk_range(int chunk, int total) {
  int base = total / kGradChunks, rem = total % kGradChunks;
  int begin = chunk * base + std::min(chunk, rem);
  int end = begin + base + (chunk < rem ? 1 : 0);
  return {begin, end};
}
}  // namespace detail

template <typename T>
double train_epoch_ce(enc::Model<T>& model, const LoadedDataset<T>& train,
                      const TrainConfig& cfg, AdamW<T>& opt, Rng& shuffle_rng,
                      int threads) {
  std::vector<int> order(train.samples.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_rng.shuffle(order);
  auto filter = finetune_params(cfg);

  double loss_sum = 0.0;
  int n_seen = 0;
  for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
    const int B = static_cast<int>(
        std::min<size_t>(cfg.batch_size, order.size() - at));
    std::vector<GradBuffer<T>> gbs;
    gbs.reserve(kGradChunks);
    for (int c = 0; c < kGradChunks; ++c) gbs.emplace_back(model.params());
    std::vector<double> closs(kGradChunks, 0.0);

    parallel_chunks(kGradChunks, threads, [&](int c) {
      auto [begin, end] = detail::chunk_range(c, B);
      for (int i = begin; i < end; ++i) {
        const LoadedSample<T>& s = train.samples[order[at + i]];
        Tape<T> t(&model.params());
        auto head = forward_head(model, t, s, cfg);
        int loss = ce_from_logits_n(t, head.logits, s.label);
        double lv = t.scalar_value(loss);
        if (!std::isfinite(lv))
          throw std::runtime_error("non-finite training loss at sample " + s.id);
        closs[c] += lv;
        Mat<T> seed(1, 1);
        seed(0, 0) = T(1) / static_cast<T>(B);
        t.backward(loss, seed, &gbs[c]);
      }
    });

    for (int c = 1; c < kGradChunks; ++c) gbs[0].merge(gbs[c]);
    opt.step(model.params(), gbs[0], filter);
    for (int c = 0; c < kGradChunks; ++c) loss_sum += closs[c];
    n_seen += B;
  }
  return loss_sum / std::max(1, n_seen);
}

template <typename T>
struct EvalOutputs {
  std::vector<int> truths;
  std::vector<std::vector<int>> ranked;
  double mean_ce = 0.0;
  Mat<T> mean_alpha;  // [1 x 3], slot order image/lidar/gps; zero if absent
  metrics::DbaReport report;
  double top1 = 0.0, top3 = 0.0;
};

template <typename T>
EvalOutputs<T> evaluate(const enc::Model<T>& model, const LoadedDataset<T>& ds,
                        const TrainConfig& cfg, const metrics::DbaConfig& dba,
                        int threads) {
  if (ds.samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const int N = ds.size();
  EvalOutputs<T> out;
  out.truths = ds.labels();
  out.ranked.assign(N, {});
  std::vector<double> ce(kGradChunks, 0.0);
  std::vector<Mat<T>> alpha(kGradChunks, Mat<T>::Zero(1, 3));

  parallel_chunks(kGradChunks, threads, [&](int c) {
    auto [begin, end] = detail::chunk_range(c, N);
    for (int i = begin; i < end; ++i) {
      const LoadedSample<T>& s = ds.samples[i];
      Tape<T> t(&model.params());
      auto head = forward_head(model, t, s, cfg);
      ce[c] += t.scalar_value(ce_from_logits_n(t, head.logits, s.label));
      const Mat<T>& p = t.value(t.softmax_rows(head.logits));
      out.ranked[i] = metrics::rank_predictions(p.row(0), dba.K);
      const Mat<T>& a = t.value(head.alpha);
      for (size_t j = 0; j < head.present.size(); ++j)
        alpha[c](0, head.present[j]) += a(0, static_cast<Eigen::Index>(j));
    }
  });

  out.mean_ce = 0.0;
  out.mean_alpha = Mat<T>::Zero(1, 3);
  for (int c = 0; c < kGradChunks; ++c) {
    out.mean_ce += ce[c];
    out.mean_alpha += alpha[c];
  }
  out.mean_ce /= N;
  out.mean_alpha /= static_cast<T>(N);
  out.report = metrics::dba_score(out.truths, out.ranked, dba);
  out.top1 = metrics::topk_accuracy(out.truths, out.ranked, 1);
  out.top3 = metrics::topk_accuracy(out.truths, out.ranked, std::min(3, dba.K));
  return out;
}

template <typename T>
std::vector<Mat<T>> snapshot_params(const ParamStore<T>& store) {
  std::vector<Mat<T>> vals;
  vals.reserve(store.size());
  for (int pid = 0; pid < store.size(); ++pid) vals.push_back(store.value(pid));
  return vals;
}

template <typename T>
void restore_params(ParamStore<T>& store, const std::vector<Mat<T>>& vals) {
  for (int pid = 0; pid < store.size(); ++pid) store.value(pid) = vals[pid];
}

template <typename T>
struct RunArtifacts {
  std::vector<double> train_loss, val_loss, val_dba;
  int best_epoch = -1;
  double best_val_dba = 0.0;
  std::vector<Mat<T>> best_values;
  int epochs_run = 0;
  EvalOutputs<T> test;
};

// Supervised finetuning with per-epoch validation DBA, early stopping, and
// best-checkpoint restore. The model is left holding the best parameters.
template <typename T>
RunArtifacts<T> finetune(enc::Model<T>& model, const LoadedDataset<T>& train,
                         const LoadedDataset<T>& val,
                         const LoadedDataset<T>& test, const TrainConfig& cfg,
                         const metrics::DbaConfig& dba) {
  cfg.validate();
  dba.validate();
  if (train.samples.empty() || val.samples.empty())
    throw std::invalid_argument("finetune: train and val must be non-empty");
  const int threads = resolve_threads(cfg.threads);

  AdamW<T> opt;
  opt.lr = static_cast<T>(cfg.lr);
  opt.weight_decay = static_cast<T>(cfg.weight_decay);
  Rng rng(cfg.seed);
  EarlyStopper stopper(cfg.early_stop_patience);

  RunArtifacts<T> art;
  art.best_values = snapshot_params(model.params());
  for (int e = 1; e <= cfg.epochs; ++e) {
    Rng erng = rng.fork(static_cast<uint64_t>(e));
    double tl = train_epoch_ce(model, train, cfg, opt, erng, threads);
    auto ev = evaluate(model, val, cfg, dba, threads);
    art.train_loss.push_back(tl);
    art.val_loss.push_back(ev.mean_ce);
    art.val_dba.push_back(ev.report.score);
    art.epochs_run = e;
    if (ev.report.score > art.best_val_dba || art.best_epoch < 0) {
      art.best_val_dba = ev.report.score;
      art.best_epoch = e;
      art.best_values = snapshot_params(model.params());
    }
    if (stopper.update(e, ev.report.score)) break;
  }
  restore_params(model.params(), art.best_values);
  if (!test.samples.empty()) art.test = evaluate(model, test, cfg, dba, threads);
  return art;
}

}  // namespace mmbeam::harness
