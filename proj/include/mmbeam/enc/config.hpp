#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmbeam/enc/tokenizer.hpp"

namespace mmbeam::enc {

// Desk-scale encoder dimensions. Every structural mechanism of the full-size
// backbones is kept (patch embedding, windowed + shifted attention, voxel
// feature encoding, stacked 3D convolutions, transformer text encoder); only
// the widths are small enough to train on a CPU.
struct EncoderConfig {
  int d_shared = 64;  // common latent dim of x_img, x_lidar, x_gps
  int d_v = 64;       // vision branch output before projection
  int d_l = 64;       // lidar branch output before projection
  int d_p = 16;       // positional MLP output
  int d_t = 32;       // text output after P_text
  int text_dim = 32;  // text transformer width

  int image_h = 32;
  int image_w = 32;
  int patch_size = 8;
  int window_size = 4;
  int n_vision_blocks = 4;
  int n_heads = 4;
  int ff_mult = 2;

  std::array<int, 3> voxel_grid = {16, 16, 4};
  // Extent sizes in meters; grid covers x in [-x/2, x/2], y in [0, y],
  // z in [-1, z-1] around the base station.
  std::array<double, 3> voxel_extent = {264.0, 48.0, 4.0};
  int vfe_hidden = 8;    // per-point feature width before mean/max pooling
  int conv1_ch = 16;     // first 3D conv output channels (stride 2)
  int conv2_ch = 24;     // second 3D conv output channels

  int mlp_hidden = 32;
  int n_text_blocks = 2;
  int max_text_len = 64;
  std::vector<std::string> vocab = default_vocab();

  int patches_x() const { return image_w / patch_size; }
  int patches_y() const { return image_h / patch_size; }
  int n_patches() const { return patches_x() * patches_y(); }

  void validate() const {
    if (d_shared < 8) throw std::invalid_argument("encoder: d_shared must be >= 8");
    for (int d : {d_v, d_l, d_p, d_t, text_dim, mlp_hidden, vfe_hidden, conv1_ch,
                  conv2_ch})
      if (d < 1) throw std::invalid_argument("encoder: dims must be positive");
    if (image_h < 8 || image_w < 8)
      throw std::invalid_argument("encoder: image must be at least 8x8");
    if (image_h % patch_size != 0 || image_w % patch_size != 0)
      throw std::invalid_argument("encoder: image dims must divide by patch_size");
    if (patches_x() % window_size != 0 || patches_y() % window_size != 0)
      throw std::invalid_argument(
          "encoder: patch grid must divide by window_size");
    if (d_v % n_heads != 0 || text_dim % n_heads != 0 || d_shared % n_heads != 0)
      throw std::invalid_argument("encoder: dims must divide by n_heads");
    for (int g : voxel_grid)
      if (g < 2 || g % 2 != 0)
        throw std::invalid_argument("encoder: voxel grid dims must be even");
    for (double e : voxel_extent)
      if (e <= 0) throw std::invalid_argument("encoder: voxel extent must be > 0");
    if (vocab.empty()) throw std::invalid_argument("encoder: empty vocab");
  }
};

inline nlohmann::json to_json(const EncoderConfig& c) {
  nlohmann::json j;
  j["d_shared"] = c.d_shared;
  j["d_v"] = c.d_v;
  j["d_l"] = c.d_l;
  j["d_p"] = c.d_p;
  j["d_t"] = c.d_t;
  j["text_dim"] = c.text_dim;
  j["image_h"] = c.image_h;
  j["image_w"] = c.image_w;
  j["patch_size"] = c.patch_size;
  j["window_size"] = c.window_size;
  j["n_vision_blocks"] = c.n_vision_blocks;
  j["n_heads"] = c.n_heads;
  j["ff_mult"] = c.ff_mult;
  j["voxel_grid"] = c.voxel_grid;
  j["voxel_extent"] = c.voxel_extent;
  j["vfe_hidden"] = c.vfe_hidden;
  j["conv1_ch"] = c.conv1_ch;
  j["conv2_ch"] = c.conv2_ch;
  j["mlp_hidden"] = c.mlp_hidden;
  j["n_text_blocks"] = c.n_text_blocks;
  j["max_text_len"] = c.max_text_len;
  j["vocab"] = c.vocab;
  return j;
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  j.at("d_shared").get_to(c.d_shared);
  j.at("d_v").get_to(c.d_v);
  j.at("d_l").get_to(c.d_l);
  j.at("d_p").get_to(c.d_p);
  j.at("d_t").get_to(c.d_t);
  j.at("text_dim").get_to(c.text_dim);
  j.at("image_h").get_to(c.image_h);
  j.at("image_w").get_to(c.image_w);
  j.at("patch_size").get_to(c.patch_size);
  j.at("window_size").get_to(c.window_size);
  j.at("n_vision_blocks").get_to(c.n_vision_blocks);
  j.at("n_heads").get_to(c.n_heads);
  j.at("ff_mult").get_to(c.ff_mult);
  j.at("voxel_grid").get_to(c.voxel_grid);
  j.at("voxel_extent").get_to(c.voxel_extent);
  j.at("vfe_hidden").get_to(c.vfe_hidden);
  j.at("conv1_ch").get_to(c.conv1_ch);
  j.at("conv2_ch").get_to(c.conv2_ch);
  j.at("mlp_hidden").get_to(c.mlp_hidden);
  j.at("n_text_blocks").get_to(c.n_text_blocks);
  j.at("max_text_len").get_to(c.max_text_len);
  j.at("vocab").get_to(c.vocab);
  return c;
}

}  // namespace mmbeam::enc
