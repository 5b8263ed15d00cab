#pragma once

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace mmbeam::metrics {

struct DbaConfig {
  int K = 3;
  double delta = 5.0;

  void validate() const {
    if (K < 1) throw std::invalid_argument("DbaConfig: K must be >= 1");
    if (delta <= 0.0) throw std::invalid_argument("DbaConfig: delta must be > 0");
  }
};

struct DbaReport {
  std::vector<double> per_rank;  // Y_1..Y_K
  double score = 0.0;
  int n_samples = 0;
};

// Indices of the K largest probabilities, descending, ties by lowest index.
template <typename Vec>
std::vector<int> rank_predictions(const Vec& p, int K) {
  const int M = static_cast<int>(p.size());
  if (K > M) throw std::invalid_argument("rank_predictions: K > M");
  std::vector<int> order(M);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (p[a] != p[b]) return p[a] > p[b];
    return a < b;
  });
  order.resize(K);
  return order;
}

// Distance-based accuracy score over ranks 1..K:
//   Y_k = 1 - mean_n min_{k'<=k} min(|pred_{n,k'} - truth_n| / delta, 1)
//   score = mean_k Y_k
inline DbaReport dba_score(const std::vector<int>& truths,
                           const std::vector<std::vector<int>>& ranked,
                           const DbaConfig& cfg) {
  cfg.validate();
  if (truths.empty()) throw std::invalid_argument("dba_score: empty input");
  if (truths.size() != ranked.size())
    throw std::invalid_argument("dba_score: length mismatch");
  const int N = static_cast<int>(truths.size());
  for (const auto& r : ranked)
    if (static_cast<int>(r.size()) != cfg.K)
      throw std::invalid_argument("dba_score: ranked list must have K entries");

  DbaReport rep;
  rep.n_samples = N;
  rep.per_rank.assign(cfg.K, 0.0);
  std::vector<double> penalty_sum(cfg.K, 0.0);
  for (int n = 0; n < N; ++n) {
    double best = 1.0;
    for (int k = 0; k < cfg.K; ++k) {
      double d = std::abs(ranked[n][k] - truths[n]) / cfg.delta;
      best = std::min(best, std::min(d, 1.0));
      penalty_sum[k] += best;
    }
  }
  for (int k = 0; k < cfg.K; ++k)
    rep.per_rank[k] = 1.0 - penalty_sum[k] / static_cast<double>(N);
  rep.score = std::accumulate(rep.per_rank.begin(), rep.per_rank.end(), 0.0) /
              static_cast<double>(cfg.K);
  return rep;
}

// Fraction of samples whose truth appears among the first k ranked entries.
inline double topk_accuracy(const std::vector<int>& truths,
                            const std::vector<std::vector<int>>& ranked,
                            int k) {
  if (truths.empty()) return 0.0;
  int hits = 0;
  for (size_t n = 0; n < truths.size(); ++n) {
    int upto = std::min<int>(k, static_cast<int>(ranked[n].size()));
    for (int j = 0; j < upto; ++j) {
      if (ranked[n][j] == truths[n]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(truths.size());
}

inline nlohmann::json report_json(const DbaReport& rep, double top1, double top3) {
  nlohmann::json j;
  j["Y"] = rep.per_rank;
  j["dba"] = rep.score;
  j["top1"] = top1;
  j["top3"] = top3;
  j["n"] = rep.n_samples;
  return j;
}

}  // namespace mmbeam::metrics
