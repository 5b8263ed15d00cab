#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmbeam/harness/pretrain.hpp"
#include "mmbeam/harness/train.hpp"

namespace mmbeam::harness {

inline const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> v = {"full",       "no-pretrain",
                                             "no-gps-text", "image-only",
                                             "lidar-only", "position-only"};
  return v;
}

// Map a variant name onto the base config. Single-modality variants bypass
// fusion and skip contrastive pretraining; position-only keeps the unified
// numeric+text GPS representation.
inline TrainConfig variant_config(const std::string& variant,
                                  const TrainConfig& base) {
  TrainConfig cfg = base;
  if (variant == "full") {
    cfg.use_pretrain = true;
  } else if (variant == "no-pretrain") {
    cfg.use_pretrain = false;
  } else if (variant == "no-gps-text") {
    cfg.use_pretrain = true;
    cfg.use_gps_text = false;
  } else if (variant == "image-only") {
    cfg.modality_mask = {true, false, false};
    cfg.use_pretrain = false;
  } else if (variant == "lidar-only") {
    cfg.modality_mask = {false, true, false};
    cfg.use_pretrain = false;
  } else if (variant == "position-only") {
    cfg.modality_mask = {false, false, true};
    cfg.use_pretrain = false;
  } else {
    throw std::invalid_argument("unknown ablation variant " + variant);
  }
  return cfg;
}

struct AblationRow {
  std::string variant;
  uint64_t seed = 0;
  double dba = 0.0;
  double top1 = 0.0;
  std::string error;  // non-empty when this run failed
};

struct AblationSummary {
  std::vector<AblationRow> rows;
  std::map<std::string, double> mean_dba, std_dba;
};

// 6 variants x n_seeds runs on a fixed split. Pretraining is shared per seed
// across the variants that consume it (identical inputs and parameter init).
// Failures are recorded per run and do not stop the remaining runs.
template <typename T>
AblationSummary ablate(const enc::EncoderConfig& enc_cfg, int n_beams,
                       const LoadedDataset<T>& train, const LoadedDataset<T>& val,
                       const LoadedDataset<T>& test, const TrainConfig& base,
                       const PretrainConfig& pre_base, int n_seeds,
                       const metrics::DbaConfig& dba,
                       bool verbose = false) {
  AblationSummary out;
  std::map<std::string, std::vector<double>> dbas;
  for (int s = 0; s < n_seeds; ++s) {
    const uint64_t seed = base.seed + static_cast<uint64_t>(s);

    // One pretraining pass per seed, reused by pretrain-consuming variants.
    std::optional<std::vector<Mat<T>>> pretrained;
    try {
      enc::Model<T> pm(enc_cfg, n_beams, seed);
      PretrainConfig pcfg = pre_base;
      pcfg.seed = seed;
      pretrain(pm, train, val, pcfg);
      pretrained = snapshot_params(pm.params());
    } catch (const std::exception& ex) {
      if (verbose) std::fprintf(stderr, "[ablate] pretrain seed %llu failed: %s\n",
                                static_cast<unsigned long long>(seed), ex.what());
    }

    for (const std::string& variant : ablation_variants()) {
      AblationRow row;
      row.variant = variant;
      row.seed = seed;
      try {
        TrainConfig cfg = variant_config(variant, base);
        cfg.seed = seed;
        enc::Model<T> model(enc_cfg, n_beams, seed);
        if (cfg.use_pretrain) {
          if (!pretrained.has_value())
            throw std::runtime_error("pretraining unavailable for this seed");
          // Copy only the contrastively trained branches.
          const auto& vals = *pretrained;
          for (int pid = 0; pid < model.params().size(); ++pid)
            if (enc::Model<T>::contrastive_param(model.params().name(pid)))
              model.params().value(pid) = vals[pid];
        }
        auto art = finetune(model, train, val, test, cfg, dba);
        row.dba = art.test.report.score;
        row.top1 = art.test.top1;
        dbas[variant].push_back(row.dba);
        if (verbose)
          std::fprintf(stderr, "[ablate] %-14s seed %llu dba %.4f top1 %.4f\n",
                       variant.c_str(), static_cast<unsigned long long>(seed),
                       row.dba, row.top1);
      } catch (const std::exception& ex) {
        row.error = ex.what();
        if (verbose)
          std::fprintf(stderr, "[ablate] %-14s seed %llu FAILED: %s\n",
                       variant.c_str(), static_cast<unsigned long long>(seed),
                       ex.what());
      }
      out.rows.push_back(std::move(row));
    }
  }

  for (const auto& [variant, vals] : dbas) {
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size());
    out.mean_dba[variant] = mean;
    out.std_dba[variant] = std::sqrt(var);
  }
  return out;
}

}  // namespace mmbeam::harness
