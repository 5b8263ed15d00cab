#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <string>

namespace mmbeam::enc {

inline const std::array<std::string, 8>& compass_words() {
  static const std::array<std::string, 8> words = {
      "north", "northeast", "east", "southeast",
      "south", "southwest", "west", "northwest"};
  return words;
}

// 8-sector compass word for a bearing in degrees clockwise from north.
// Sector boundaries sit at 22.5 + k*45 degrees; a boundary value belongs to
// the sector it opens.
inline const std::string& compass_word(double bearing_deg) {
  double b = std::fmod(bearing_deg, 360.0);
  if (b < 0) b += 360.0;
  int sector = static_cast<int>(std::floor(std::fmod(b + 22.5, 360.0) / 45.0));
  return compass_words()[static_cast<size_t>(sector)];
}

// Bearing of the vehicle as seen from the base station, computed on raw
// lat/lon axes (planar atan2 of degree offsets). A coincident vehicle maps to
// bearing 0 ("north") by convention.
inline double bearing_deg(double veh_lat, double veh_lon, double bs_lat,
                          double bs_lon) {
  double dn = veh_lat - bs_lat;
  double de = veh_lon - bs_lon;
  if (dn == 0.0 && de == 0.0) return 0.0;
  double b = std::atan2(de, dn) * 180.0 / M_PI;
  if (b < 0) b += 360.0;
  return b;
}

// Fixed prompt template of the GPS-text branch.
inline std::string verbalize_gps(double veh_lat, double veh_lon, double bs_lat,
                                 double bs_lon) {
  if (!std::isfinite(veh_lat) || !std::isfinite(veh_lon))
    throw std::invalid_argument("verbalize_gps: non-finite coordinates");
  const std::string& dir =
      compass_word(bearing_deg(veh_lat, veh_lon, bs_lat, bs_lon));
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "The vehicle is currently at latitude %.6f, longitude %.6f, "
                "located to the %s of the base station.",
                veh_lat, veh_lon, dir.c_str());
  return std::string(buf);
}

}  // namespace mmbeam::enc
