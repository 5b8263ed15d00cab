#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mmbeam/core/graph_ops.hpp"
#include "mmbeam/core/rng.hpp"
#include "mmbeam/core/tape.hpp"
#include "mmbeam/enc/config.hpp"
#include "mmbeam/enc/voxel.hpp"

namespace mmbeam::enc {

enum class GateOrder { kAfterAttention, kBeforeAttention };

enum Modality : int { kImage = 0, kLidar = 1, kGps = 2 };

template <typename T>
struct EmbeddingSet {
  Mat<T> x_img;    // [1 x d_shared]
  Mat<T> x_lidar;  // [1 x d_shared]
  Mat<T> x_pos;    // [1 x d_p]
  Mat<T> x_text;   // [1 x d_t]
  Mat<T> x_gps;    // [1 x d_shared]
};

// 3D conv as gather + matmul: index table mapping each (output position,
// kernel tap) to an input grid row, -1 for zero padding.
struct ConvPlan {
  std::vector<int> gather;
  std::array<int, 3> out_dims{};
  int n_out = 0;
  int taps = 27;
};

inline ConvPlan make_conv_plan(const std::array<int, 3>& in_dims, int stride) {
  ConvPlan plan;
  for (int a = 0; a < 3; ++a) plan.out_dims[a] = in_dims[a] / stride;
  plan.n_out = plan.out_dims[0] * plan.out_dims[1] * plan.out_dims[2];
  plan.gather.reserve(static_cast<size_t>(plan.n_out) * 27);
  for (int ox = 0; ox < plan.out_dims[0]; ++ox)
    for (int oy = 0; oy < plan.out_dims[1]; ++oy)
      for (int oz = 0; oz < plan.out_dims[2]; ++oz)
        for (int kx = -1; kx <= 1; ++kx)
          for (int ky = -1; ky <= 1; ++ky)
            for (int kz = -1; kz <= 1; ++kz) {
              int ix = ox * stride + kx;
              int iy = oy * stride + ky;
              int iz = oz * stride + kz;
              bool in = ix >= 0 && ix < in_dims[0] && iy >= 0 &&
                        iy < in_dims[1] && iz >= 0 && iz < in_dims[2];
              plan.gather.push_back(
                  in ? (ix * in_dims[1] + iy) * in_dims[2] + iz : -1);
            }
  return plan;
}

// The full trainable model: four modality encoders, the unified GPS
// projection, the gated cross-modal fusion head, and the beam classifier.
// Parameter initialization draws from a single seeded stream in registration
// order, so two models with the same (config, M, seed) are identical.
template <typename T>
class Model {
 public:
  Model(EncoderConfig cfg, int n_beams, uint64_t seed)
      : cfg_(std::move(cfg)), M_(n_beams) {
    cfg_.validate();
    if (M_ < 2) throw std::invalid_argument("model: need at least 2 beams");
    vocab_map_ = vocab_lookup(cfg_.vocab);
    build_plans();
    Rng rng(seed);
    register_params(rng);
  }

  const EncoderConfig& config() const { return cfg_; }
  int n_beams() const { return M_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const std::unordered_map<std::string, int>& vocab_map() const {
    return vocab_map_;
  }

  // ---- branch forward builders ----

  // image node: [H*W x 3] pixel rows.
  int encode_image_t(Tape<T>& t, int image) const {
    const auto& v = t.value(image);
    if (v.rows() != cfg_.image_h * cfg_.image_w || v.cols() != 3)
      throw std::invalid_argument("encode_image: image dims incompatible");
    int x = t.row_gather(image, patch_plan_);
    x = t.reshape(x, cfg_.n_patches(), cfg_.patch_size * cfg_.patch_size * 3);
    x = t.linear(x, pid("vision.patch_w"), pid("vision.patch_b"));
    x = t.add(x, t.param(pid("vision.pos")));
    const int win_area = cfg_.window_size * cfg_.window_size;
    for (int b = 0; b < cfg_.n_vision_blocks; ++b) {
      bool shifted = (b % 2) == 1;
      const auto& perm = win_perm_[shifted ? 1 : 0];
      const auto& inv = win_inv_[shifted ? 1 : 0];
      int xw = t.row_gather(x, perm);
      BlockWeights w = block_weights(t, "vision.b" + std::to_string(b));
      xw = transformer_block_n(t, xw, w, cfg_.n_heads, win_area);
      x = t.row_gather(xw, inv);
    }
    x = t.layer_norm_rows(x, t.param(pid("vision.lnf_g")),
                          t.param(pid("vision.lnf_b")));
    x = t.mean_rows(x);
    return t.linear(x, pid("vision.proj_w"), pid("vision.proj_b"));
  }

  int encode_lidar_t(Tape<T>& t, const VoxelizedPoints<T>& vox) const {
    int f = t.input(vox.features);
    f = t.linear(f, pid("lidar.vfe_w"), pid("lidar.vfe_b"));
    f = t.relu(f);
    int mean = t.segment_mean(f, vox.seg, vox.n_voxels);
    int mx = t.segment_max(f, vox.seg, vox.n_voxels);
    int grid = t.concat_cols({mean, mx});
    int g = conv3d(t, grid, conv1_plan_, "lidar.conv1", 2 * cfg_.vfe_hidden);
    g = conv3d(t, g, conv2_plan_, "lidar.conv2", cfg_.conv1_ch);
    int pooled = t.mean_rows(g);
    // The grid is mostly empty, so pooled magnitudes are occupancy-diluted;
    // normalize to keep this branch on the same scale as the others.
    pooled = t.layer_norm_rows(pooled, t.param(pid("lidar.ln_g")),
                               t.param(pid("lidar.ln_b")));
    int h = t.relu(t.linear(pooled, pid("lidar.head_w"), pid("lidar.head_b")));
    return t.linear(h, pid("lidar.proj_w"), pid("lidar.proj_b"));
  }

  int encode_lidar_t(Tape<T>& t, const data::PointCloud& cloud,
                     VoxelizedPoints<T>& scratch) const {
    scratch = voxelize<T>(cloud, cfg_);
    return encode_lidar_t(t, scratch);
  }

  // g node: [1 x 2] normalized coordinates.
  int encode_pos_t(Tape<T>& t, int g) const {
    if (t.value(g).rows() != 1 || t.value(g).cols() != 2)
      throw std::invalid_argument("encode_pos: expected a [1 x 2] input");
    int h = t.relu(t.linear(g, pid("pos.w1"), pid("pos.b1")));
    return t.linear(h, pid("pos.w2"), pid("pos.b2"));
  }

  int encode_text_t(Tape<T>& t, const std::vector<int>& token_ids) const {
    if (token_ids.empty()) throw std::invalid_argument("encode_text: empty prompt");
    std::vector<int> ids = token_ids;
    if (static_cast<int>(ids.size()) > cfg_.max_text_len)
      ids.resize(cfg_.max_text_len);
    int e = t.row_gather(t.param(pid("text.tok")), ids);
    int p = t.slice_rows(t.param(pid("text.pos")), 0,
                         static_cast<Eigen::Index>(ids.size()));
    int x = t.add(e, p);
    for (int b = 0; b < cfg_.n_text_blocks; ++b) {
      BlockWeights w = block_weights(t, "text.b" + std::to_string(b));
      x = transformer_block_n(t, x, w, cfg_.n_heads);
    }
    x = t.layer_norm_rows(x, t.param(pid("text.lnf_g")),
                          t.param(pid("text.lnf_b")));
    x = t.mean_rows(x);
    return t.linear(x, pid("text.proj_w"), pid("text.proj_b"));
  }

  // x_gps = proj(concat(x_pos, x_text)); pass x_text < 0 to zero out the text
  // branch (the no-GPS-text ablation keeps shapes identical).
  int unify_gps_t(Tape<T>& t, int x_pos, int x_text) const {
    int text_node = x_text;
    if (x_text < 0) {
      text_node = t.input_owned(Mat<T>::Zero(1, cfg_.d_t));
    }
    int c = t.concat_cols({x_pos, text_node});
    return t.linear(c, pid("gps.unify_w"), pid("gps.unify_b"));
  }

  // ---- fusion head ----

  struct HeadOut {
    int logits = -1;
    int alpha = -1;        // [1 x n_present], softmax over present modalities
    int refined = -1;      // [n_present x d_shared]
    std::vector<Modality> present;
  };

  // tokens: (modality, node) pairs in ascending modality order.
  HeadOut head_t(Tape<T>& t,
                 const std::vector<std::pair<Modality, int>>& tokens,
                 GateOrder order = GateOrder::kAfterAttention) const {
    if (tokens.empty()) throw std::invalid_argument("head: no modalities");
    HeadOut out;
    for (const auto& [m, node] : tokens) out.present.push_back(m);

    if (tokens.size() == 1) {
      // Single modality bypasses gating and attention entirely.
      out.refined = tokens[0].second;
      out.alpha = t.input_owned(Mat<T>::Ones(1, 1));
      out.logits = t.linear(tokens[0].second, pid("cls.w"), pid("cls.b"));
      return out;
    }

    // Gate logits from the raw concatenation; absent slots contribute zeros.
    std::vector<int> slots(3, -1);
    for (const auto& [m, node] : tokens) slots[m] = node;
    std::vector<int> gate_in;
    for (int m = 0; m < 3; ++m) {
      gate_in.push_back(slots[m] >= 0
                            ? slots[m]
                            : t.input_owned(Mat<T>::Zero(1, cfg_.d_shared)));
    }
    int logits3 = t.linear(t.concat_cols(gate_in), pid("gate.w"), pid("gate.b"));
    int gate_logits = logits3;
    if (tokens.size() < 3) {
      std::vector<int> picks;
      for (const auto& [m, node] : tokens)
        picks.push_back(t.slice_cols(logits3, m, 1));
      gate_logits = t.concat_cols(picks);
    }
    int alpha = t.softmax_rows(gate_logits);

    AttnWeights aw{pid_n(t, "fus.wq"), pid_n(t, "fus.bq"), pid_n(t, "fus.wk"),
                   pid_n(t, "fus.bk"), pid_n(t, "fus.wv"), pid_n(t, "fus.bv"),
                   pid_n(t, "fus.wo"), pid_n(t, "fus.bo")};
    std::vector<int> rows;
    for (const auto& [m, node] : tokens) rows.push_back(node);
    int fused;
    if (order == GateOrder::kAfterAttention) {
      int x = t.concat_rows(rows);
      int refined = t.add(x, mhsa_n(t, x, aw, cfg_.n_heads));
      fused = t.matmul(alpha, refined);
      out.refined = refined;
    } else {
      std::vector<int> weighted;
      for (size_t i = 0; i < rows.size(); ++i)
        weighted.push_back(t.mul_by_scalar_node(
            rows[i], t.slice_cols(alpha, static_cast<Eigen::Index>(i), 1)));
      int x = t.concat_rows(weighted);
      int refined = t.add(x, mhsa_n(t, x, aw, cfg_.n_heads));
      Mat<T> ones = Mat<T>::Ones(1, static_cast<Eigen::Index>(rows.size()));
      fused = t.matmul(t.input_owned(std::move(ones)), refined);
      out.refined = refined;
    }
    out.alpha = alpha;
    out.logits = t.linear(fused, pid("cls.w"), pid("cls.b"));
    return out;
  }

  int pid(const std::string& name) const { return params_.id(name); }

  // Trainable-set predicates for the two phases.
  static bool contrastive_param(const std::string& name) {
    return name.rfind("vision.", 0) == 0 || name.rfind("lidar.", 0) == 0;
  }

  // What finetuning imports from a contrastive checkpoint: the vision and
  // LiDAR backbones without their d_shared projection heads. The projections
  // are shaped by the cosine loss geometry and transfer poorly; re-learning
  // them supervised keeps the aligned backbone features.
  static bool pretrained_transfer_param(const std::string& name) {
    if (!contrastive_param(name)) return false;
    return name.find(".proj_") == std::string::npos;
  }

 private:
  int pid_n(Tape<T>& t, const std::string& name) const {
    return t.param(params_.id(name));
  }

  int conv3d(Tape<T>& t, int grid, const ConvPlan& plan,
             const std::string& prefix, int in_ch) const {
    int g = t.row_gather(grid, plan.gather);
    g = t.reshape(g, plan.n_out, plan.taps * in_ch);
    g = t.linear(g, pid(prefix + "_w"), pid(prefix + "_b"));
    return t.relu(g);
  }

  BlockWeights block_weights(Tape<T>& t, const std::string& p) const {
    BlockWeights w;
    w.ln1_g = pid_n(t, p + ".ln1_g");
    w.ln1_b = pid_n(t, p + ".ln1_b");
    w.attn = {pid_n(t, p + ".wq"), pid_n(t, p + ".bq"), pid_n(t, p + ".wk"),
              pid_n(t, p + ".bk"), pid_n(t, p + ".wv"), pid_n(t, p + ".bv"),
              pid_n(t, p + ".wo"), pid_n(t, p + ".bo")};
    w.ln2_g = pid_n(t, p + ".ln2_g");
    w.ln2_b = pid_n(t, p + ".ln2_b");
    w.ff1_w = pid_n(t, p + ".ff1_w");
    w.ff1_b = pid_n(t, p + ".ff1_b");
    w.ff2_w = pid_n(t, p + ".ff2_w");
    w.ff2_b = pid_n(t, p + ".ff2_b");
    return w;
  }

  void build_plans() {
    // Patch extraction: pixel rows listed patch by patch, row-major.
    const int ps = cfg_.patch_size;
    patch_plan_.reserve(static_cast<size_t>(cfg_.n_patches()) * ps * ps);
    for (int pr = 0; pr < cfg_.patches_y(); ++pr)
      for (int pc = 0; pc < cfg_.patches_x(); ++pc)
        for (int i = 0; i < ps; ++i)
          for (int j = 0; j < ps; ++j)
            patch_plan_.push_back((pr * ps + i) * cfg_.image_w + (pc * ps + j));

    // Window partitions for both parities. The shifted parity cyclically
    // rolls the patch grid by half a window before tiling.
    const int py = cfg_.patches_y(), px = cfg_.patches_x();
    const int ws = cfg_.window_size;
    for (int parity = 0; parity < 2; ++parity) {
      int s = parity == 1 ? ws / 2 : 0;
      auto& perm = win_perm_[parity];
      auto& inv = win_inv_[parity];
      perm.clear();
      for (int wr = 0; wr < py / ws; ++wr)
        for (int wc = 0; wc < px / ws; ++wc)
          for (int i = 0; i < ws; ++i)
            for (int j = 0; j < ws; ++j) {
              int r = (wr * ws + i + s) % py;
              int c = (wc * ws + j + s) % px;
              perm.push_back(r * px + c);
            }
      inv.assign(perm.size(), 0);
      for (size_t k = 0; k < perm.size(); ++k) inv[perm[k]] = static_cast<int>(k);
    }

    conv1_plan_ = make_conv_plan(cfg_.voxel_grid, 2);
    conv2_plan_ = make_conv_plan(conv1_plan_.out_dims, 1);
  }

  // ---- initialization ----

  Mat<T> xavier(int rows, int cols, Rng& rng) {
    double a = std::sqrt(6.0 / (rows + cols));
    Mat<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = static_cast<T>(rng.uniform(-a, a));
    return m;
  }

  Mat<T> gaussian(int rows, int cols, double std, Rng& rng) {
    Mat<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = static_cast<T>(rng.normal(0.0, std));
    return m;
  }

  void add_linear(const std::string& name, int in, int out, Rng& rng) {
    params_.add(name + "_w", xavier(in, out, rng));
    params_.add(name + "_b", Mat<T>::Zero(1, out));
  }

  void add_block(const std::string& p, int d, int ff, Rng& rng) {
    params_.add(p + ".ln1_g", Mat<T>::Ones(1, d));
    params_.add(p + ".ln1_b", Mat<T>::Zero(1, d));
    for (const char* nm : {".wq", ".wk", ".wv", ".wo"})
      params_.add(p + nm, xavier(d, d, rng));
    for (const char* nm : {".bq", ".bk", ".bv", ".bo"})
      params_.add(p + nm, Mat<T>::Zero(1, d));
    params_.add(p + ".ln2_g", Mat<T>::Ones(1, d));
    params_.add(p + ".ln2_b", Mat<T>::Zero(1, d));
    params_.add(p + ".ff1_w", xavier(d, ff, rng));
    params_.add(p + ".ff1_b", Mat<T>::Zero(1, ff));
    params_.add(p + ".ff2_w", xavier(ff, d, rng));
    params_.add(p + ".ff2_b", Mat<T>::Zero(1, d));
  }

  void register_params(Rng& rng) {
    const int ps2 = cfg_.patch_size * cfg_.patch_size * 3;
    add_linear("vision.patch", ps2, cfg_.d_v, rng);
    params_.add("vision.pos", Mat<T>::Zero(cfg_.n_patches(), cfg_.d_v));
    for (int b = 0; b < cfg_.n_vision_blocks; ++b)
      add_block("vision.b" + std::to_string(b), cfg_.d_v,
                cfg_.ff_mult * cfg_.d_v, rng);
    params_.add("vision.lnf_g", Mat<T>::Ones(1, cfg_.d_v));
    params_.add("vision.lnf_b", Mat<T>::Zero(1, cfg_.d_v));
    add_linear("vision.proj", cfg_.d_v, cfg_.d_shared, rng);

    add_linear("lidar.vfe", 7, cfg_.vfe_hidden, rng);
    add_linear("lidar.conv1", 27 * 2 * cfg_.vfe_hidden, cfg_.conv1_ch, rng);
    add_linear("lidar.conv2", 27 * cfg_.conv1_ch, cfg_.conv2_ch, rng);
    params_.add("lidar.ln_g", Mat<T>::Ones(1, cfg_.conv2_ch));
    params_.add("lidar.ln_b", Mat<T>::Zero(1, cfg_.conv2_ch));
    add_linear("lidar.head", cfg_.conv2_ch, cfg_.d_l, rng);
    add_linear("lidar.proj", cfg_.d_l, cfg_.d_shared, rng);

    params_.add("pos.w1", xavier(2, cfg_.mlp_hidden, rng));
    params_.add("pos.b1", Mat<T>::Zero(1, cfg_.mlp_hidden));
    params_.add("pos.w2", xavier(cfg_.mlp_hidden, cfg_.d_p, rng));
    params_.add("pos.b2", Mat<T>::Zero(1, cfg_.d_p));

    params_.add("text.tok", gaussian(static_cast<int>(cfg_.vocab.size()),
                                     cfg_.text_dim, 0.02, rng));
    params_.add("text.pos", Mat<T>::Zero(cfg_.max_text_len, cfg_.text_dim));
    for (int b = 0; b < cfg_.n_text_blocks; ++b)
      add_block("text.b" + std::to_string(b), cfg_.text_dim,
                cfg_.ff_mult * cfg_.text_dim, rng);
    params_.add("text.lnf_g", Mat<T>::Ones(1, cfg_.text_dim));
    params_.add("text.lnf_b", Mat<T>::Zero(1, cfg_.text_dim));
    add_linear("text.proj", cfg_.text_dim, cfg_.d_t, rng);

    add_linear("gps.unify", cfg_.d_p + cfg_.d_t, cfg_.d_shared, rng);

    params_.add("gate.w", xavier(3 * cfg_.d_shared, 3, rng));
    params_.add("gate.b", Mat<T>::Zero(1, 3));
    for (const char* nm : {"fus.wq", "fus.wk", "fus.wv", "fus.wo"})
      params_.add(nm, xavier(cfg_.d_shared, cfg_.d_shared, rng));
    for (const char* nm : {"fus.bq", "fus.bk", "fus.bv", "fus.bo"})
      params_.add(nm, Mat<T>::Zero(1, cfg_.d_shared));
    params_.add("cls.w", xavier(cfg_.d_shared, M_, rng));
    params_.add("cls.b", Mat<T>::Zero(1, M_));
  }

  EncoderConfig cfg_;
  int M_;
  ParamStore<T> params_;
  std::unordered_map<std::string, int> vocab_map_;
  std::vector<int> patch_plan_;
  std::array<std::vector<int>, 2> win_perm_, win_inv_;
  ConvPlan conv1_plan_, conv2_plan_;
};

}  // namespace mmbeam::enc
