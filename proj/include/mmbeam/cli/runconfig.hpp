#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmbeam/core/csv.hpp"
#include "mmbeam/data/synthetic.hpp"
#include "mmbeam/enc/config.hpp"
#include "mmbeam/harness/ablate.hpp"
#include "mmbeam/harness/pretrain.hpp"
#include "mmbeam/harness/train.hpp"
#include "mmbeam/metrics/dba.hpp"

namespace mmbeam::cli {

// Every tunable in one flat key=value namespace. Precedence: built-in default
// < config file < command-line flag.
struct RunConfig {
  long seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  std::string data_dir = "data";
  std::string run_dir = "run";

  int codebook_m = 32;
  int codebook_n_ant = 16;

  int scene_n_samples = 2000;
  double scene_road_min_m = 6.0;
  double scene_road_max_m = 120.0;
  double scene_bs_lat = 33.42;
  double scene_bs_lon = -111.93;
  int scene_image_h = 32;
  int scene_image_w = 32;
  int scene_points_per_vehicle = 48;
  double scene_gps_noise_std_deg = 1.2e-4;
  bool scene_night_mode = false;

  double split_train = 0.8;
  double split_val = 0.1;
  double split_test = 0.1;

  int enc_d_shared = 64;
  int enc_d_v = 64;
  int enc_d_l = 64;
  int enc_d_p = 16;
  int enc_d_t = 32;
  int enc_text_dim = 32;
  int enc_patch_size = 8;
  int enc_window_size = 4;
  int enc_n_vision_blocks = 4;
  int enc_n_heads = 4;
  int enc_ff_mult = 2;
  int enc_voxel_nx = 16;
  int enc_voxel_ny = 16;
  int enc_voxel_nz = 4;
  double enc_extent_x = 264.0;
  double enc_extent_y = 48.0;
  double enc_extent_z = 4.0;
  int enc_vfe_hidden = 8;
  int enc_conv1_ch = 16;
  int enc_conv2_ch = 24;
  int enc_mlp_hidden = 32;
  int enc_n_text_blocks = 2;
  int enc_max_text_len = 64;

  double contrastive_tau = 0.07;
  bool contrastive_symmetric = false;

  int pretrain_epochs = 20;
  double pretrain_lr = 1e-3;
  int pretrain_batch_size = 32;
  double pretrain_weight_decay = 1e-4;

  int train_epochs = 100;
  double train_lr = 1e-3;
  int train_batch_size = 32;
  int train_patience = 10;
  double train_weight_decay = 1e-4;
  std::string train_gate_order = "after";  // after | before
  bool train_use_pretrain = true;
  bool train_use_gps_text = true;
  std::string train_modality_mask = "image,lidar,gps";

  int metric_k = 3;
  double metric_delta = 5.0;

  int ablate_seeds = 5;
  int ablate_epochs = 30;
  int ablate_patience = 5;
};

struct KeyDef {
  std::string name;
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

namespace detail {

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected true/false, got '" + s + "'");
}

inline KeyDef key_int(const std::string& name, int RunConfig::* f,
                      const std::string& doc) {
  return {name, doc, [f](const RunConfig& c) { return std::to_string(c.*f); },
          [f](RunConfig& c, const std::string& v) {
            c.*f = static_cast<int>(parse_long(v));
          }};
}

inline KeyDef key_long(const std::string& name, long RunConfig::* f,
                       const std::string& doc) {
  return {name, doc, [f](const RunConfig& c) { return std::to_string(c.*f); },
          [f](RunConfig& c, const std::string& v) { c.*f = parse_long(v); }};
}

inline KeyDef key_double(const std::string& name, double RunConfig::* f,
                         const std::string& doc) {
  return {name, doc, [f](const RunConfig& c) { return fmt_num(c.*f); },
          [f](RunConfig& c, const std::string& v) { c.*f = parse_double(v); }};
}

inline KeyDef key_bool(const std::string& name, bool RunConfig::* f,
                       const std::string& doc) {
  return {name, doc,
          [f](const RunConfig& c) { return (c.*f) ? "true" : "false"; },
          [f](RunConfig& c, const std::string& v) { c.*f = parse_bool(v); }};
}

inline KeyDef key_string(const std::string& name, std::string RunConfig::* f,
                         const std::string& doc) {
  return {name, doc, [f](const RunConfig& c) { return c.*f; },
          [f](RunConfig& c, const std::string& v) { c.*f = v; }};
}

}  // namespace detail

inline const std::vector<KeyDef>& key_table() {
  using namespace detail;
  using C = RunConfig;
  static const std::vector<KeyDef> keys = {
      key_long("seed", &C::seed, "master RNG seed"),
      key_int("threads", &C::threads, "worker threads (0 = auto)"),
      key_string("data_dir", &C::data_dir, "dataset directory (holds index.csv)"),
      key_string("run_dir", &C::run_dir, "run output directory"),
      key_int("codebook.m", &C::codebook_m, "beam codebook size M"),
      key_int("codebook.n_ant", &C::codebook_n_ant, "array element count"),
      key_int("scene.n_samples", &C::scene_n_samples, "synthetic sample count"),
      key_double("scene.road_min_m", &C::scene_road_min_m, "road span start (m)"),
      key_double("scene.road_max_m", &C::scene_road_max_m, "road span end (m)"),
      key_double("scene.bs_lat", &C::scene_bs_lat, "base station latitude"),
      key_double("scene.bs_lon", &C::scene_bs_lon, "base station longitude"),
      key_int("scene.image_h", &C::scene_image_h, "rendered image height"),
      key_int("scene.image_w", &C::scene_image_w, "rendered image width"),
      key_int("scene.points_per_vehicle", &C::scene_points_per_vehicle,
              "lidar points sampled on the vehicle"),
      key_double("scene.gps_noise_std_deg", &C::scene_gps_noise_std_deg,
                 "GPS noise sigma in degrees"),
      key_bool("scene.night_mode", &C::scene_night_mode,
               "darken images and add sensor noise"),
      key_double("split.train", &C::split_train, "train fraction"),
      key_double("split.val", &C::split_val, "validation fraction"),
      key_double("split.test", &C::split_test, "test fraction"),
      key_int("enc.d_shared", &C::enc_d_shared, "shared latent dimension"),
      key_int("enc.d_v", &C::enc_d_v, "vision branch width"),
      key_int("enc.d_l", &C::enc_d_l, "lidar branch width"),
      key_int("enc.d_p", &C::enc_d_p, "positional feature dimension"),
      key_int("enc.d_t", &C::enc_d_t, "text feature dimension"),
      key_int("enc.text_dim", &C::enc_text_dim, "text transformer width"),
      key_int("enc.patch_size", &C::enc_patch_size, "vision patch size"),
      key_int("enc.window_size", &C::enc_window_size, "attention window size"),
      key_int("enc.n_vision_blocks", &C::enc_n_vision_blocks, "vision blocks"),
      key_int("enc.n_heads", &C::enc_n_heads, "attention heads"),
      key_int("enc.ff_mult", &C::enc_ff_mult, "feed-forward width multiplier"),
      key_int("enc.voxel_nx", &C::enc_voxel_nx, "voxel grid x cells"),
      key_int("enc.voxel_ny", &C::enc_voxel_ny, "voxel grid y cells"),
      key_int("enc.voxel_nz", &C::enc_voxel_nz, "voxel grid z cells"),
      key_double("enc.extent_x", &C::enc_extent_x, "voxel extent x (m)"),
      key_double("enc.extent_y", &C::enc_extent_y, "voxel extent y (m)"),
      key_double("enc.extent_z", &C::enc_extent_z, "voxel extent z (m)"),
      key_int("enc.vfe_hidden", &C::enc_vfe_hidden, "VFE per-point width"),
      key_int("enc.conv1_ch", &C::enc_conv1_ch, "first 3D conv channels"),
      key_int("enc.conv2_ch", &C::enc_conv2_ch, "second 3D conv channels"),
      key_int("enc.mlp_hidden", &C::enc_mlp_hidden, "positional MLP hidden"),
      key_int("enc.n_text_blocks", &C::enc_n_text_blocks, "text blocks"),
      key_int("enc.max_text_len", &C::enc_max_text_len, "max prompt tokens"),
      key_double("contrastive.tau", &C::contrastive_tau, "InfoNCE temperature"),
      key_bool("contrastive.symmetric", &C::contrastive_symmetric,
               "add the lidar-to-image direction"),
      key_int("pretrain.epochs", &C::pretrain_epochs, "pretraining epochs"),
      key_double("pretrain.lr", &C::pretrain_lr, "pretraining learning rate"),
      key_int("pretrain.batch_size", &C::pretrain_batch_size, "pretrain batch"),
      key_double("pretrain.weight_decay", &C::pretrain_weight_decay,
                 "pretrain weight decay"),
      key_int("train.epochs", &C::train_epochs, "finetune epochs"),
      key_double("train.lr", &C::train_lr, "finetune learning rate"),
      key_int("train.batch_size", &C::train_batch_size, "finetune batch"),
      key_int("train.patience", &C::train_patience, "early-stop patience"),
      key_double("train.weight_decay", &C::train_weight_decay,
                 "finetune weight decay"),
      key_string("train.gate_order", &C::train_gate_order,
                 "gate weights applied 'after' or 'before' attention"),
      key_bool("train.use_pretrain", &C::train_use_pretrain,
               "load the contrastive checkpoint before finetuning"),
      key_bool("train.use_gps_text", &C::train_use_gps_text,
               "include the GPS-text branch"),
      key_string("train.modality_mask", &C::train_modality_mask,
                 "comma list out of image,lidar,gps"),
      key_int("metric.k", &C::metric_k, "DBA ranks averaged"),
      key_double("metric.delta", &C::metric_delta, "DBA index tolerance"),
      key_int("ablate.seeds", &C::ablate_seeds, "seeds per ablation variant"),
      key_int("ablate.epochs", &C::ablate_epochs, "finetune epochs per variant"),
      key_int("ablate.patience", &C::ablate_patience, "early-stop patience"),
  };
  return keys;
}

inline void set_key(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  for (const KeyDef& k : key_table()) {
    if (k.name == key) {
      try {
        k.set(cfg, value);
      } catch (const std::exception& ex) {
        throw std::invalid_argument("config key '" + key + "': " + ex.what());
      }
      return;
    }
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

// Flat `key = value` file with '#' comments.
inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    size_t a = s.find_first_not_of(" \t");
    size_t b = s.find_last_not_of(" \t");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
    set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

// Effective configuration in registry order; written as config.snapshot.
inline std::string snapshot(const RunConfig& cfg) {
  std::ostringstream os;
  for (const KeyDef& k : key_table()) os << k.name << " = " << k.get(cfg) << "\n";
  return os.str();
}

// ---- conversions into module configs ----

inline enc::EncoderConfig to_encoder_config(const RunConfig& c) {
  enc::EncoderConfig e;
  e.d_shared = c.enc_d_shared;
  e.d_v = c.enc_d_v;
  e.d_l = c.enc_d_l;
  e.d_p = c.enc_d_p;
  e.d_t = c.enc_d_t;
  e.text_dim = c.enc_text_dim;
  e.image_h = c.scene_image_h;
  e.image_w = c.scene_image_w;
  e.patch_size = c.enc_patch_size;
  e.window_size = c.enc_window_size;
  e.n_vision_blocks = c.enc_n_vision_blocks;
  e.n_heads = c.enc_n_heads;
  e.ff_mult = c.enc_ff_mult;
  e.voxel_grid = {c.enc_voxel_nx, c.enc_voxel_ny, c.enc_voxel_nz};
  e.voxel_extent = {c.enc_extent_x, c.enc_extent_y, c.enc_extent_z};
  e.vfe_hidden = c.enc_vfe_hidden;
  e.conv1_ch = c.enc_conv1_ch;
  e.conv2_ch = c.enc_conv2_ch;
  e.mlp_hidden = c.enc_mlp_hidden;
  e.n_text_blocks = c.enc_n_text_blocks;
  e.max_text_len = c.enc_max_text_len;
  return e;
}

inline data::SyntheticSceneConfig to_scene_config(const RunConfig& c) {
  data::SyntheticSceneConfig s;
  s.n_samples = c.scene_n_samples;
  s.M = c.codebook_m;
  s.N_ant = c.codebook_n_ant;
  s.road_span_m = {c.scene_road_min_m, c.scene_road_max_m};
  s.bs_position = {c.scene_bs_lat, c.scene_bs_lon};
  s.image_size = {c.scene_image_h, c.scene_image_w};
  s.points_per_vehicle = c.scene_points_per_vehicle;
  s.gps_noise_std_deg = c.scene_gps_noise_std_deg;
  s.night_mode = c.scene_night_mode;
  s.rng_seed = static_cast<uint64_t>(c.seed);
  return s;
}

inline harness::ModalityMask parse_modality_mask(const std::string& spec) {
  harness::ModalityMask m{false, false, false};
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "image")
      m.image = true;
    else if (tok == "lidar")
      m.lidar = true;
    else if (tok == "gps")
      m.gps = true;
    else if (!tok.empty())
      throw std::invalid_argument("config key 'train.modality_mask': unknown modality '" +
                                  tok + "'");
  }
  return m;
}

inline harness::TrainConfig to_train_config(const RunConfig& c) {
  harness::TrainConfig t;
  t.epochs = c.train_epochs;
  t.lr = c.train_lr;
  t.batch_size = c.train_batch_size;
  t.early_stop_patience = c.train_patience;
  t.seed = static_cast<uint64_t>(c.seed);
  t.weight_decay = c.train_weight_decay;
  if (c.train_gate_order == "after")
    t.gate_order = enc::GateOrder::kAfterAttention;
  else if (c.train_gate_order == "before")
    t.gate_order = enc::GateOrder::kBeforeAttention;
  else
    throw std::invalid_argument(
        "config key 'train.gate_order': expected 'after' or 'before'");
  t.use_pretrain = c.train_use_pretrain;
  t.use_gps_text = c.train_use_gps_text;
  t.modality_mask = parse_modality_mask(c.train_modality_mask);
  t.threads = c.threads;
  return t;
}

inline harness::PretrainConfig to_pretrain_config(const RunConfig& c) {
  harness::PretrainConfig p;
  p.epochs = c.pretrain_epochs;
  p.lr = c.pretrain_lr;
  p.batch_size = c.pretrain_batch_size;
  p.weight_decay = c.pretrain_weight_decay;
  p.seed = static_cast<uint64_t>(c.seed);
  p.contrastive.temperature = c.contrastive_tau;
  p.contrastive.symmetric = c.contrastive_symmetric;
  p.threads = c.threads;
  return p;
}

inline metrics::DbaConfig to_dba_config(const RunConfig& c) {
  metrics::DbaConfig d;
  d.K = c.metric_k;
  d.delta = c.metric_delta;
  return d;
}

}  // namespace mmbeam::cli
