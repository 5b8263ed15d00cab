#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mmbeam/data/gps.hpp"
#include "mmbeam/data/image_io.hpp"
#include "mmbeam/data/index.hpp"
#include "mmbeam/data/pointcloud.hpp"
#include "mmbeam/enc/config.hpp"
#include "mmbeam/enc/tokenizer.hpp"
#include "mmbeam/enc/verbalize.hpp"
#include "mmbeam/enc/voxel.hpp"

namespace mmbeam::harness {

// One frame with every modality prepared for the encoders: pixels as rows,
// points voxelized in canonical order, GPS both normalized (numeric branch)
// and verbalized + tokenized (text branch).
template <typename T>
struct LoadedSample {
  std::string id;
  Mat<T> image;  // [H*W x 3]
  enc::VoxelizedPoints<T> vox;
  Mat<T> gps_norm;  // [1 x 2]
  std::vector<int> token_ids;
  int label = 0;
};

template <typename T>
struct LoadedDataset {
  std::vector<LoadedSample<T>> samples;

  int size() const { return static_cast<int>(samples.size()); }
  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
  }
};

template <typename T>
LoadedDataset<T> load_dataset(const data::DatasetIndex& index,
                              const enc::EncoderConfig& cfg,
                              const data::GpsNormalizer& norm,
                              std::pair<double, double> bs_position) {
  auto vocab = enc::vocab_lookup(cfg.vocab);
  LoadedDataset<T> out;
  out.samples.reserve(index.records.size());
  for (const data::IndexRecord& rec : index.records) {
    LoadedSample<T> s;
    s.id = rec.sample_id;
    s.label = rec.beam_index;

    data::ImageF img = data::read_png(index.image_path(rec).string());
    if (img.h != cfg.image_h || img.w != cfg.image_w)
      throw std::runtime_error(rec.sample_id + ": image is " +
                               std::to_string(img.h) + "x" + std::to_string(img.w) +
                               ", config expects " + std::to_string(cfg.image_h) +
                               "x" + std::to_string(cfg.image_w));
    s.image.resize(img.h * img.w, 3);
    for (int p = 0; p < img.h * img.w; ++p)
      for (int c = 0; c < 3; ++c)
        s.image(p, c) = static_cast<T>(img.px[static_cast<size_t>(p) * 3 + c]);

    data::PointCloud cloud = data::read_pointcloud(index.lidar_path(rec).string());
    s.vox = enc::voxelize<T>(cloud, cfg);

    auto [nlat, nlon] = norm.normalize(rec.latitude, rec.longitude);
    s.gps_norm.resize(1, 2);
    s.gps_norm(0, 0) = static_cast<T>(nlat);
    s.gps_norm(0, 1) = static_cast<T>(nlon);

    std::string prompt = enc::verbalize_gps(rec.latitude, rec.longitude,
                                            bs_position.first, bs_position.second);
    s.token_ids = enc::tokenize(prompt, vocab);
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace mmbeam::harness
