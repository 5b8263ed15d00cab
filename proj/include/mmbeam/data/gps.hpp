#pragma once

#include <stdexcept>
#include <utility>

namespace mmbeam::data {

// Min-max GPS scaler fitted on the training split only. Values outside the
// training hull map outside [0,1]; no clamping.
struct GpsNormalizer {
  double lat_min = 0.0, lat_max = 0.0;
  double lon_min = 0.0, lon_max = 0.0;

  std::pair<double, double> normalize(double lat, double lon) const {
    return {(lat - lat_min) / (lat_max - lat_min),
            (lon - lon_min) / (lon_max - lon_min)};
  }

  std::pair<double, double> denormalize(double nlat, double nlon) const {
    return {lat_min + nlat * (lat_max - lat_min),
            lon_min + nlon * (lon_max - lon_min)};
  }
};

template <typename It>
GpsNormalizer fit_gps_normalizer(It first, It last) {
  if (first == last) throw std::invalid_argument("fit_gps_normalizer: empty");
  GpsNormalizer n;
  n.lat_min = n.lat_max = first->latitude;
  n.lon_min = n.lon_max = first->longitude;
  for (It it = first; it != last; ++it) {
    n.lat_min = std::min(n.lat_min, it->latitude);
    n.lat_max = std::max(n.lat_max, it->latitude);
    n.lon_min = std::min(n.lon_min, it->longitude);
    n.lon_max = std::max(n.lon_max, it->longitude);
  }
  if (n.lat_min >= n.lat_max)
    throw std::invalid_argument("fit_gps_normalizer: degenerate latitude axis");
  if (n.lon_min >= n.lon_max)
    throw std::invalid_argument("fit_gps_normalizer: degenerate longitude axis");
  return n;
}

}  // namespace mmbeam::data
