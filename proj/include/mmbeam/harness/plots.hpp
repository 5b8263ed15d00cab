#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "mmbeam/core/csv.hpp"
#include "mmbeam/data/image_io.hpp"

namespace mmbeam::harness {

// Minimal line-chart renderer. The CSV files are the contract; these PNGs are
// a best-effort visual aid (axes + grid + one polyline per series).
namespace plotdetail {

struct Series {
  std::vector<double> y;
  float r, g, b;
};

inline void render_chart(const std::vector<Series>& series,
                         const std::string& path, int W = 640, int H = 400) {
  data::ImageF img;
  img.h = H;
  img.w = W;
  img.px.assign(static_cast<size_t>(H) * W * 3, 1.0f);

  double ymin = 1e300, ymax = -1e300;
  size_t n = 0;
  for (const Series& s : series) {
    n = std::max(n, s.y.size());
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (n == 0) return;
  if (ymax - ymin < 1e-12) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  const int ml = 40, mr = 10, mt = 10, mb = 30;
  auto px_of = [&](size_t i) {
    double frac = n <= 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    return ml + frac * (W - ml - mr - 1);
  };
  auto py_of = [&](double v) {
    return mt + (1.0 - (v - ymin) / (ymax - ymin)) * (H - mt - mb - 1);
  };
  auto put = [&](int x, int y, float r, float g, float b) {
    if (x < 0 || x >= W || y < 0 || y >= H) return;
    img.at(y, x, 0) = r;
    img.at(y, x, 1) = g;
    img.at(y, x, 2) = b;
  };
  auto line = [&](double x0, double y0, double x1, double y1, float r, float g,
                  float b) {
    int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
    for (int s = 0; s <= steps; ++s) {
      double t = static_cast<double>(s) / steps;
      put(static_cast<int>(std::lround(x0 + t * (x1 - x0))),
          static_cast<int>(std::lround(y0 + t * (y1 - y0))), r, g, b);
    }
  };

  for (int gx = 0; gx <= 4; ++gx) {
    double x = ml + gx * (W - ml - mr - 1) / 4.0;
    line(x, mt, x, H - mb, 0.9f, 0.9f, 0.9f);
  }
  for (int gy = 0; gy <= 4; ++gy) {
    double y = mt + gy * (H - mt - mb - 1) / 4.0;
    line(ml, y, W - mr, y, 0.9f, 0.9f, 0.9f);
  }
  line(ml, mt, ml, H - mb, 0.1f, 0.1f, 0.1f);
  line(ml, H - mb, W - mr, H - mb, 0.1f, 0.1f, 0.1f);

  for (const Series& s : series) {
    for (size_t i = 0; i + 1 < s.y.size(); ++i)
      line(px_of(i), py_of(s.y[i]), px_of(i + 1), py_of(s.y[i + 1]), s.r, s.g,
           s.b);
  }
  write_png(img, path);
}

}  // namespace plotdetail

// Writes finetune_log.csv / dba_log.csv plus loss_curve.png / dba_curve.png.
inline void plot_curves(const std::vector<double>& train_loss,
                        const std::vector<double>& val_loss,
                        const std::vector<double>& val_dba,
                        const std::filesystem::path& out_dir) {
  if (train_loss.empty())
    throw std::invalid_argument("plot_curves: empty curves");
  std::filesystem::create_directories(out_dir);
  {
    CsvWriter w((out_dir / "finetune_log.csv").string());
    w.row({"epoch", "train_loss", "val_loss"});
    for (size_t e = 0; e < train_loss.size(); ++e)
      w.row({fmt_num(static_cast<int>(e + 1)), fmt_num(train_loss[e]),
             fmt_num(val_loss[e])});
  }
  {
    CsvWriter w((out_dir / "dba_log.csv").string());
    w.row({"epoch", "val_dba"});
    for (size_t e = 0; e < val_dba.size(); ++e)
      w.row({fmt_num(static_cast<int>(e + 1)), fmt_num(val_dba[e])});
  }
  plotdetail::render_chart({{train_loss, 0.85f, 0.3f, 0.2f},
                            {val_loss, 0.2f, 0.35f, 0.8f}},
                           (out_dir / "loss_curve.png").string());
  plotdetail::render_chart({{val_dba, 0.15f, 0.55f, 0.25f}},
                           (out_dir / "dba_curve.png").string());
}

}  // namespace mmbeam::harness
