#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace mmbeam::signal {

using cxd = std::complex<double>;
using CVec = Eigen::VectorXcd;

// Fixed set of M unit-norm beamforming vectors over an N_ant-element array.
struct BeamCodebook {
  std::vector<CVec> vectors;
  int M = 0;
  int N_ant = 0;
};

// Single channel realization at one timestep.
struct Channel {
  CVec h;
};

struct RxSignal {
  cxd y;
  cxd x_sym;
  double noise_var = 0.0;
};

// Uniform-linear-array DFT codebook: entry n of beam m is
// exp(j*2*pi*n*m/M) / sqrt(N_ant).
inline BeamCodebook make_dft_codebook(int M, int N_ant) {
  if (M < 2) throw std::invalid_argument("make_dft_codebook: M must be >= 2");
  if (N_ant < 1)
    throw std::invalid_argument("make_dft_codebook: N_ant must be >= 1");
  BeamCodebook cb;
  cb.M = M;
  cb.N_ant = N_ant;
  cb.vectors.reserve(M);
  const double scale = 1.0 / std::sqrt(static_cast<double>(N_ant));
  for (int m = 0; m < M; ++m) {
    CVec f(N_ant);
    for (int n = 0; n < N_ant; ++n) {
      double phase = 2.0 * M_PI * static_cast<double>(n) *
                     static_cast<double>(m) / static_cast<double>(M);
      f(n) = scale * cxd(std::cos(phase), std::sin(phase));
    }
    cb.vectors.push_back(std::move(f));
  }
  return cb;
}

// y = h^T f * x + z. Plain transpose, not conjugate.
inline RxSignal received_signal(const Channel& h, const CVec& f, cxd x_sym,
                                cxd noise, double noise_var = 0.0) {
  if (h.h.size() != f.size())
    throw std::invalid_argument("received_signal: dimension mismatch");
  if (noise_var < 0.0)
    throw std::invalid_argument("received_signal: negative noise variance");
  RxSignal rx;
  rx.x_sym = x_sym;
  rx.noise_var = noise_var;
  rx.y = (h.h.array() * f.array()).sum() * x_sym + noise;
  return rx;
}

inline double beam_gain(const Channel& h, const CVec& f) {
  // |h^T f|^2 without conjugation of either factor.
  cxd g(0.0, 0.0);
  for (Eigen::Index n = 0; n < f.size(); ++n) g += h.h(n) * f(n);
  return std::norm(g);
}

// argmax_m |h^T f_m|^2, lowest index on ties.
inline int optimal_beam(const Channel& h, const BeamCodebook& cb) {
  if (cb.M < 1) throw std::invalid_argument("optimal_beam: empty codebook");
  if (h.h.size() != cb.N_ant)
    throw std::invalid_argument("optimal_beam: dimension mismatch");
  int best = 0;
  double best_gain = beam_gain(h, cb.vectors[0]);
  for (int m = 1; m < cb.M; ++m) {
    double g = beam_gain(h, cb.vectors[m]);
    if (g > best_gain) {
      best_gain = g;
      best = m;
    }
  }
  return best;
}

// Line-of-sight half-wavelength ULA channel: h[n] = gain * exp(j*pi*n*sin(a)).
inline Channel steering_channel(double angle_rad, int N_ant, cxd gain) {
  if (N_ant < 1)
    throw std::invalid_argument("steering_channel: N_ant must be >= 1");
  Channel ch;
  ch.h.resize(N_ant);
  for (int n = 0; n < N_ant; ++n) {
    double phase = M_PI * static_cast<double>(n) * std::sin(angle_rad);
    ch.h(n) = gain * cxd(std::cos(phase), std::sin(phase));
  }
  return ch;
}

// sin of the steering angle at which DFT beam m peaks against
// steering_channel: pi*sin(a) + 2*pi*m/M = 0 (mod 2*pi), wrapped to [-1, 1).
inline double dft_beam_sin(int m, int M) {
  double s = -2.0 * static_cast<double>(m) / static_cast<double>(M);
  while (s < -1.0) s += 2.0;
  while (s >= 1.0) s -= 2.0;
  return s;
}

inline double dft_beam_angle(int m, int M) { return std::asin(dft_beam_sin(m, M)); }

}  // namespace mmbeam::signal
