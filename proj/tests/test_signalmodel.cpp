#include <gtest/gtest.h>

#include <complex>

#include "mmbeam/core/rng.hpp"
#include "mmbeam/signal/signal.hpp"

using namespace mmbeam;
using namespace mmbeam::signal;

namespace {

CVec random_channel(int n, Rng& rng) {
  CVec h(n);
  for (int i = 0; i < n; ++i) h(i) = cxd(rng.normal(), rng.normal());
  return h;
}

// Independent transcription of the argmax search, kept separate from
// optimal_beam on purpose.
int brute_force_beam(const Channel& h, const BeamCodebook& cb) {
  int best = -1;
  double best_gain = -1.0;
  for (int m = 0; m < cb.M; ++m) {
    cxd acc(0, 0);
    for (int n = 0; n < cb.N_ant; ++n) acc += h.h(n) * cb.vectors[m](n);
    double gain = std::norm(acc);
    if (gain > best_gain) {
      best_gain = gain;
      best = m;
    }
  }
  return best;
}

}  // namespace

TEST(Codebook, SingleAntennaCollapses) {
  auto cb = make_dft_codebook(2, 1);
  EXPECT_EQ(cb.M, 2);
  for (const auto& f : cb.vectors) {
    ASSERT_EQ(f.size(), 1);
    EXPECT_NEAR(f(0).real(), 1.0, 1e-12);
    EXPECT_NEAR(f(0).imag(), 0.0, 1e-12);
  }
}

TEST(Codebook, ZeroPhaseColumn) {
  auto cb = make_dft_codebook(4, 4);
  for (int n = 0; n < 4; ++n) {
    EXPECT_NEAR(cb.vectors[0](n).real(), 0.5, 1e-12);
    EXPECT_NEAR(cb.vectors[0](n).imag(), 0.0, 1e-12);
  }
}

TEST(Codebook, DftColumnsOrthogonal) {
  auto cb = make_dft_codebook(8, 8);
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) {
      cxd ip = cb.vectors[a].dot(cb.vectors[b]);  // conjugating inner product
      EXPECT_NEAR(std::abs(ip), a == b ? 1.0 : 0.0, 1e-9);
    }
}

TEST(Codebook, UnitNorms) {
  auto cb = make_dft_codebook(16, 16);
  for (const auto& f : cb.vectors) EXPECT_NEAR(f.norm(), 1.0, 1e-6);
}

TEST(Codebook, RejectsBadSizes) {
  EXPECT_THROW(make_dft_codebook(1, 4), std::invalid_argument);
  EXPECT_THROW(make_dft_codebook(4, 0), std::invalid_argument);
}

TEST(ReceivedSignal, IdentityChannel) {
  Channel h;
  h.h = CVec::Ones(1);
  CVec f = CVec::Ones(1);
  auto rx = received_signal(h, f, cxd(2, 0), cxd(0, 0));
  EXPECT_NEAR(rx.y.real(), 2.0, 1e-12);
  EXPECT_NEAR(rx.y.imag(), 0.0, 1e-12);
}

TEST(ReceivedSignal, ZeroChannel) {
  Channel h;
  h.h = CVec::Zero(2);
  CVec f(2);
  f << cxd(0.3, 0.1), cxd(-0.7, 0.2);
  auto rx = received_signal(h, f, cxd(5, 3), cxd(0, 0));
  EXPECT_NEAR(std::abs(rx.y), 0.0, 1e-12);
}

TEST(ReceivedSignal, HandEvaluatedPlainTranspose) {
  // h = [1, j], f = [1/sqrt2, 1/sqrt2]: h^T f = (1 + j)/sqrt2
  Channel h;
  h.h.resize(2);
  h.h << cxd(1, 0), cxd(0, 1);
  CVec f(2);
  const double r = 1.0 / std::sqrt(2.0);
  f << cxd(r, 0), cxd(r, 0);
  auto rx = received_signal(h, f, cxd(1, 0), cxd(0, 0));
  EXPECT_NEAR(rx.y.real(), r, 1e-12);
  EXPECT_NEAR(rx.y.imag(), r, 1e-12);
}

TEST(ReceivedSignal, LinearInSymbol) {
  Rng rng(5);
  Channel h;
  h.h = random_channel(8, rng);
  CVec f = random_channel(8, rng);
  cxd x1(0.3, -0.8), scale(2.5, 1.25);
  auto rx1 = received_signal(h, f, x1, cxd(0, 0));
  auto rx2 = received_signal(h, f, x1 * scale, cxd(0, 0));
  EXPECT_NEAR(std::abs(rx2.y - rx1.y * scale), 0.0, 1e-10);
}

TEST(ReceivedSignal, DimensionMismatchThrows) {
  Channel h;
  h.h = CVec::Ones(3);
  CVec f = CVec::Ones(2);
  EXPECT_THROW(received_signal(h, f, cxd(1, 0), cxd(0, 0)),
               std::invalid_argument);
}

TEST(OptimalBeam, ConjugateOfCodewordWins) {
  auto cb = make_dft_codebook(4, 4);
  Channel h;
  h.h = cb.vectors[2].conjugate();
  EXPECT_EQ(optimal_beam(h, cb), 2);
}

TEST(OptimalBeam, ZeroChannelTieBreaksToLowestIndex) {
  auto cb = make_dft_codebook(8, 4);
  Channel h;
  h.h = CVec::Zero(4);
  EXPECT_EQ(optimal_beam(h, cb), 0);
}

TEST(OptimalBeam, MatchesBruteForceOn1000RandomChannels) {
  auto cb = make_dft_codebook(64, 16);
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    Channel h;
    h.h = random_channel(16, rng);
    ASSERT_EQ(optimal_beam(h, cb), brute_force_beam(h, cb)) << "trial " << trial;
  }
}

TEST(OptimalBeam, InvariantToChannelScaling) {
  auto cb = make_dft_codebook(32, 8);
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    Channel h;
    h.h = random_channel(8, rng);
    int base = optimal_beam(h, cb);
    cxd c(rng.normal(), rng.normal());
    if (std::abs(c) < 1e-3) c = cxd(1.0, -0.5);
    Channel hs;
    hs.h = h.h * c;
    EXPECT_EQ(optimal_beam(hs, cb), base);
  }
}

TEST(OptimalBeam, ConjugatedCodewordsRecoverEveryIndex) {
  auto cb = make_dft_codebook(16, 16);
  Rng rng(23);
  for (int k = 0; k < 16; ++k) {
    cxd c(rng.normal(), rng.normal());
    if (std::abs(c) < 1e-3) c = cxd(0.7, 0.7);
    Channel h;
    h.h = cb.vectors[k].conjugate() * c;
    EXPECT_EQ(optimal_beam(h, cb), k);
  }
}

TEST(SteeringChannel, Broadside) {
  auto ch = steering_channel(0.0, 4, cxd(1, 0));
  for (int n = 0; n < 4; ++n) {
    EXPECT_NEAR(ch.h(n).real(), 1.0, 1e-12);
    EXPECT_NEAR(ch.h(n).imag(), 0.0, 1e-12);
  }
}

TEST(SteeringChannel, EndfirePhaseAlternates) {
  auto ch = steering_channel(M_PI / 2.0, 2, cxd(1, 0));
  EXPECT_NEAR(ch.h(0).real(), 1.0, 1e-12);
  EXPECT_NEAR(ch.h(1).real(), -1.0, 1e-12);
  EXPECT_NEAR(ch.h(1).imag(), 0.0, 1e-9);
}

TEST(SteeringChannel, ZeroGainGivesZeroVector) {
  auto ch = steering_channel(0.77, 6, cxd(0, 0));
  EXPECT_NEAR(ch.h.norm(), 0.0, 1e-15);
}

TEST(SteeringChannel, BoresightAngleRecoversBeamIndex) {
  const int M = 16, N = 16;
  auto cb = make_dft_codebook(M, N);
  for (int k = 0; k < M; ++k) {
    Channel h = steering_channel(dft_beam_angle(k, M), N, cxd(1, 0));
    EXPECT_EQ(optimal_beam(h, cb), k) << "beam " << k;
  }
}
