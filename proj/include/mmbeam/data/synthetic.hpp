#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmbeam/core/rng.hpp"
#include "mmbeam/data/image_io.hpp"
#include "mmbeam/data/index.hpp"
#include "mmbeam/data/pointcloud.hpp"
#include "mmbeam/signal/signal.hpp"

namespace mmbeam::data {

// Scene frame: base station at the local origin with its array boresight
// facing +y; the road runs parallel to the x axis at kRoadStandoffM. The
// azimuth of the vehicle seen from the array determines the steering channel
// and, through the exhaustive-search oracle, the beam label.
constexpr double kRoadStandoffM = 30.0;
constexpr double kLaneHalfWidthM = 2.0;
constexpr double kVehicleLenM = 4.5;
constexpr double kVehicleWidthM = 1.8;
constexpr double kVehicleHeightM = 1.6;
constexpr double kMetersPerDegLat = 111320.0;
constexpr double kRenderPadM = 5.0;
// Modality-specific nuisances. The camera picks up vehicle-sized glare blobs
// at night, the LiDAR sees parked-vehicle-like clutter boxes and poles; none
// of them transmit, and none appear in the other sensor. The UE is the only
// object consistent across both sensors, so each sensor alone is ambiguous
// about which return the beam should point at, while cross-modal agreement
// (and the UE's own GPS) disambiguates.
constexpr int kMaxImageGhosts = 3;
constexpr int kMaxLidarGhosts = 2;

struct SyntheticSceneConfig {
  int n_samples = 2000;
  int M = 32;
  int N_ant = 16;
  std::pair<double, double> road_span_m = {6.0, 120.0};
  std::pair<double, double> bs_position = {33.42, -111.93};  // lat, lon
  std::pair<int, int> image_size = {32, 32};                 // H, W
  int points_per_vehicle = 48;
  double gps_noise_std_deg = 1.2e-4;
  bool night_mode = false;
  uint64_t rng_seed = 1;

  void validate() const {
    if (n_samples < 1) throw std::invalid_argument("scene: n_samples must be >= 1");
    if (road_span_m.first >= road_span_m.second)
      throw std::invalid_argument("scene: road span min must be < max");
    if (M < 2 || N_ant < 1) throw std::invalid_argument("scene: bad codebook dims");
    if (image_size.first < 8 || image_size.second < 8)
      throw std::invalid_argument("scene: image must be at least 8x8");
    if (points_per_vehicle < 1)
      throw std::invalid_argument("scene: points_per_vehicle must be >= 1");
    if (gps_noise_std_deg < 0)
      throw std::invalid_argument("scene: negative gps noise");
  }
};

struct SceneTruth {
  double x_m = 0.0;       // vehicle center along the road
  double y_m = 0.0;       // vehicle center standoff from BS
  double angle_rad = 0.0; // azimuth from array boresight
  int beam = 0;
};

inline double azimuth_of(double x_m, double y_m) { return std::atan2(x_m, y_m); }

// Beam label for a vehicle at local position (x, y); the generator applies
// this to every sample, and tests use it to pin boresight geometry.
inline int label_for_position(double x_m, double y_m,
                              const signal::BeamCodebook& cb) {
  auto ch = signal::steering_channel(azimuth_of(x_m, y_m), cb.N_ant, {1.0, 0.0});
  return signal::optimal_beam(ch, cb);
}

inline double vehicle_x_for_angle(double angle_rad, double y_m = kRoadStandoffM) {
  return y_m * std::tan(angle_rad);
}

struct ScenePoses {
  double ue_x = 0.0, ue_y = 0.0;
  std::vector<std::pair<double, double>> image_ghosts;  // camera-only blobs
  std::vector<std::pair<double, double>> lidar_ghosts;  // lidar-only boxes
};

namespace detail {

// Coverage of [lo, hi] over the unit pixel cell [p, p+1).
inline double cell_coverage(double lo, double hi, int p) {
  double l = std::max(lo, static_cast<double>(p));
  double h = std::min(hi, static_cast<double>(p) + 1.0);
  return std::max(0.0, h - l);
}

inline ImageF render_scene(const SyntheticSceneConfig& cfg,
                           const ScenePoses& poses, Rng& rng) {
  const int H = cfg.image_size.first;
  const int W = cfg.image_size.second;
  const double span_lo = cfg.road_span_m.first - kRenderPadM;
  const double span_hi = cfg.road_span_m.second + kRenderPadM;
  const double y_lo = kRoadStandoffM - 8.0;
  const double y_hi = kRoadStandoffM + 8.0;
  auto col_of = [&](double x) {
    return (x - span_lo) / (span_hi - span_lo) * static_cast<double>(W);
  };
  auto row_of = [&](double y) {
    return (1.0 - (y - y_lo) / (y_hi - y_lo)) * static_cast<double>(H);
  };

  ImageF img;
  img.h = H;
  img.w = W;
  img.px.assign(static_cast<size_t>(H) * W * 3, 0.0f);

  const double road_top = row_of(kRoadStandoffM + 4.0);
  const double road_bot = row_of(kRoadStandoffM - 4.0);
  for (int r = 0; r < H; ++r) {
    double sky = 0.45 - 0.15 * static_cast<double>(r) / H;
    double base = (r >= road_top && r <= road_bot) ? 0.22 : sky;
    for (int c = 0; c < W; ++c)
      for (int ch = 0; ch < 3; ++ch)
        img.at(r, c, ch) = static_cast<float>(base);
  }

  // Vehicle bodies: axis-aligned bright rectangles, edges antialiased by
  // pixel coverage so horizontal positions survive at sub-pixel precision.
  // The UE and the distractors are drawn identically distributed; nothing in
  // the image marks which one transmits.
  auto draw_vehicle = [&](double vx, double vy) {
    const double c_lo = col_of(vx - kVehicleLenM / 2.0);
    const double c_hi = col_of(vx + kVehicleLenM / 2.0);
    const double r_lo = row_of(vy + kVehicleWidthM / 2.0) - 0.06 * H;
    const double r_hi = row_of(vy - kVehicleWidthM / 2.0) + 0.06 * H;
    double body_r = rng.uniform(0.75, 0.95);
    double body_g = rng.uniform(0.70, 0.95);
    double body_b = rng.uniform(0.70, 0.95);
    for (int r = std::max(0, static_cast<int>(std::floor(r_lo)));
         r < std::min(H, static_cast<int>(std::ceil(r_hi))); ++r) {
      double rc = cell_coverage(r_lo, r_hi, r);
      for (int c = std::max(0, static_cast<int>(std::floor(c_lo)));
           c < std::min(W, static_cast<int>(std::ceil(c_hi))); ++c) {
        double cov = rc * cell_coverage(c_lo, c_hi, c);
        if (cov <= 0.0) continue;
        img.at(r, c, 0) =
            static_cast<float>(img.at(r, c, 0) * (1 - cov) + body_r * cov);
        img.at(r, c, 1) =
            static_cast<float>(img.at(r, c, 1) * (1 - cov) + body_g * cov);
        img.at(r, c, 2) =
            static_cast<float>(img.at(r, c, 2) * (1 - cov) + body_b * cov);
      }
    }
  };
  draw_vehicle(poses.ue_x, poses.ue_y);
  for (const auto& [ox, oy] : poses.image_ghosts) draw_vehicle(ox, oy);

  // Day texture noise; night darkens and adds heavier sensor noise.
  for (float& v : img.px) {
    if (cfg.night_mode) {
      v = static_cast<float>(v * 0.25 + rng.normal(0.0, 0.05));
    } else {
      v = static_cast<float>(v + rng.normal(0.0, 0.01));
    }
    v = std::clamp(v, 0.0f, 1.0f);
  }
  return img;
}

inline void sample_box_points(PointCloud& pc, double cx, double cy, int count,
                              Rng& rng) {
  // Surface of a vehicle box, faces weighted by area.
  const double L = kVehicleLenM, Wd = kVehicleWidthM, Hh = kVehicleHeightM;
  const double a_top = L * Wd, a_front = L * Hh, a_side = Wd * Hh;
  const double total = 2 * a_top + 2 * a_front + 2 * a_side;
  for (int i = 0; i < count; ++i) {
    double pick = rng.uniform(0.0, total);
    double u = rng.uniform(), v = rng.uniform();
    double dx = 0, dy = 0, dz = 0;
    if (pick < 2 * a_top) {
      dx = (u - 0.5) * L;
      dy = (v - 0.5) * Wd;
      dz = pick < a_top ? Hh : 0.0;
    } else if (pick < 2 * a_top + 2 * a_front) {
      dx = (u - 0.5) * L;
      dz = v * Hh;
      dy = (pick < 2 * a_top + a_front) ? Wd / 2 : -Wd / 2;
    } else {
      dy = (u - 0.5) * Wd;
      dz = v * Hh;
      dx = (pick < 2 * a_top + 2 * a_front + a_side) ? L / 2 : -L / 2;
    }
    pc.push_back({cx + dx, cy + dy, dz, rng.uniform(0.4, 0.9)});
  }
}

inline PointCloud sample_scene_points(const SyntheticSceneConfig& cfg,
                                      const ScenePoses& poses, Rng& rng) {
  PointCloud pc;
  const int ppv = cfg.points_per_vehicle;
  pc.reserve(static_cast<size_t>(ppv) * (2 + poses.lidar_ghosts.size()));

  sample_box_points(pc, poses.ue_x, poses.ue_y, ppv, rng);
  for (const auto& [ox, oy] : poses.lidar_ghosts)
    sample_box_points(pc, ox, oy, ppv, rng);

  // Clutter: a ground-return carpet plus pole-like vertical clusters,
  // all uncorrelated with the vehicle poses.
  const double x_lo = cfg.road_span_m.first - kRenderPadM;
  const double x_hi = cfg.road_span_m.second + kRenderPadM;
  const int n_poles = 2;
  const int per_pole = std::max(1, ppv / 8);
  for (int p = 0; p < n_poles; ++p) {
    double px = rng.uniform(x_lo, x_hi);
    double py = rng.uniform(kRoadStandoffM - 7.0, kRoadStandoffM + 7.0);
    for (int i = 0; i < per_pole; ++i)
      pc.push_back({px + rng.normal(0.0, 0.3), py + rng.normal(0.0, 0.3),
                    rng.uniform(0.0, 1.7), rng.uniform(0.3, 0.8)});
  }
  for (int i = 0; i < ppv; ++i) {
    double x = rng.uniform(x_lo, x_hi);
    double y = rng.uniform(kRoadStandoffM - 8.0, kRoadStandoffM + 8.0);
    pc.push_back({x, y, rng.uniform(-0.05, 0.05), rng.uniform(0.05, 0.3)});
  }
  return pc;
}

}  // namespace detail

struct SyntheticResult {
  DatasetIndex index;
  std::vector<SceneTruth> truths;
};

// Draw vehicle poses along the road, label them with the exhaustive-search
// beam oracle, and write images, point clouds, and the index CSV to out_dir.
// Identical (cfg, rng_seed) reproduce byte-identical outputs.
inline SyntheticResult generate_synthetic(const SyntheticSceneConfig& cfg,
                                          const std::filesystem::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  std::filesystem::create_directories(out_dir / "lidar", ec);
  if (!std::filesystem::is_directory(out_dir / "images") ||
      !std::filesystem::is_directory(out_dir / "lidar"))
    throw std::runtime_error("generate_synthetic: cannot create output dirs under " +
                             out_dir.string());

  const auto cb = signal::make_dft_codebook(cfg.M, cfg.N_ant);
  const double coslat = std::cos(cfg.bs_position.first * M_PI / 180.0);

  SyntheticResult out;
  out.index.base_dir = out_dir;
  out.index.split_seed = cfg.rng_seed;
  // Positions are drawn uniformly in the sine of the azimuth rather than in
  // x, which balances the beam-label histogram across the span (beams are
  // equally spaced in sin space, not in road meters).
  auto sin_of = [](double x) {
    return x / std::sqrt(x * x + kRoadStandoffM * kRoadStandoffM);
  };
  const double s_lo = sin_of(cfg.road_span_m.first);
  const double s_hi = sin_of(cfg.road_span_m.second);
  Rng base(cfg.rng_seed);
  for (int i = 0; i < cfg.n_samples; ++i) {
    Rng rng = base.fork(static_cast<uint64_t>(i));
    SceneTruth truth;
    double s = rng.uniform(s_lo, s_hi);
    truth.x_m = kRoadStandoffM * s / std::sqrt(1.0 - s * s);
    truth.y_m = kRoadStandoffM + rng.uniform(-kLaneHalfWidthM, kLaneHalfWidthM);
    truth.angle_rad = azimuth_of(truth.x_m, truth.y_m);
    truth.beam = label_for_position(truth.x_m, truth.y_m, cb);

    ScenePoses poses;
    poses.ue_x = truth.x_m;
    poses.ue_y = truth.y_m;
    auto place_ghosts = [&](std::vector<std::pair<double, double>>& out,
                            int count) {
      for (int d = 0; d < count; ++d) {
        for (int attempt = 0; attempt < 8; ++attempt) {
          double ox = rng.uniform(cfg.road_span_m.first, cfg.road_span_m.second);
          double oy = kRoadStandoffM + rng.uniform(-6.0, 6.0);
          if (std::abs(ox - truth.x_m) < 8.0 && std::abs(oy - truth.y_m) < 3.0)
            continue;  // too close to the UE; redraw
          out.push_back({ox, oy});
          break;
        }
      }
    };
    place_ghosts(poses.image_ghosts, 1 + rng.uniform_int(kMaxImageGhosts));
    place_ghosts(poses.lidar_ghosts, 1 + rng.uniform_int(kMaxLidarGhosts));

    char id[16];
    std::snprintf(id, sizeof(id), "s%05d", i);
    IndexRecord rec;
    rec.sample_id = id;
    rec.image_relpath = std::string("images/") + id + ".png";
    rec.lidar_relpath = std::string("lidar/") + id + ".csv";
    rec.latitude = cfg.bs_position.first + truth.y_m / kMetersPerDegLat +
                   rng.normal(0.0, cfg.gps_noise_std_deg);
    rec.longitude = cfg.bs_position.second +
                    truth.x_m / (kMetersPerDegLat * coslat) +
                    rng.normal(0.0, cfg.gps_noise_std_deg);
    rec.beam_index = truth.beam;

    ImageF img = detail::render_scene(cfg, poses, rng);
    write_png(img, (out_dir / rec.image_relpath).string());
    PointCloud pc = detail::sample_scene_points(cfg, poses, rng);
    write_pointcloud(pc, (out_dir / rec.lidar_relpath).string());

    out.index.records.push_back(std::move(rec));
    out.truths.push_back(truth);
  }
  save_index(out.index, out_dir / "index.csv");
  return out;
}

}  // namespace mmbeam::data
