#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "holomem/engine.hpp"
#include "holomem/ensemble.hpp"
#include "oracle/programs.hpp"
#include "oracle/scalar_oracle.hpp"

using namespace holomem;
using oracle::random_program;
using oracle::rich_config;
using oracle::scrambled;

namespace {

void expect_state_close(const Ensemble& e, const oracle::Model& m, double tol) {
  ASSERT_EQ(e.size(), m.spins().size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto& s = m.spins()[i];
    EXPECT_NEAR(e.sx[i], s.mx, tol) << "site " << i;
    EXPECT_NEAR(e.sy[i], s.my, tol) << "site " << i;
    EXPECT_NEAR(e.sz[i], s.mz, tol) << "site " << i;
    EXPECT_NEAR(e.an_re[i], s.a.real(), tol) << "site " << i;
    EXPECT_NEAR(e.an_im[i], s.a.imag(), tol) << "site " << i;
  }
  EXPECT_NEAR(e.time(), m.time(), 1e-18);
}

}  // namespace

TEST(Engine, PiHalfAboutXTakesZToMinusY) {
  auto e = Ensemble::from_sites(EnsembleConfig{}, {SpinSite{}});
  Engine().microwave_pulse(e, 0.5 * pi, 0.0);
  EXPECT_NEAR(e.sx[0], 0.0, 1e-15);
  EXPECT_NEAR(e.sy[0], -1.0, 1e-15);
  EXPECT_NEAR(e.sz[0], 0.0, 1e-15);
}

TEST(Engine, PulsePhaseSetsTransverseDirection) {
  for (double phase : {0.0, 0.5 * pi, pi, 1.5 * pi, 0.3}) {
    auto e = Ensemble::from_sites(EnsembleConfig{}, {SpinSite{}});
    Engine().microwave_pulse(e, 0.5 * pi, phase);
    const std::complex<double> m(e.sx[0], e.sy[0]);
    const auto expected = std::complex<double>(0, -1) * std::polar(1.0, phase);
    EXPECT_NEAR(std::abs(m - expected), 0.0, 1e-15) << phase;
  }
}

TEST(Engine, FreePrecessionPhaseAndDecay) {
  EnsembleConfig c;
  c.relaxation = {10e-6, 1e-6, 50e-6, INFINITY};
  SpinSite s;
  s.delta = 2e6;
  s.s = {1, 0, 0.2};
  auto e = Ensemble::from_sites(c, {s});
  Engine().evolve_free(e, 3e-6);
  const auto m = std::complex<double>(e.sx[0], e.sy[0]);
  const auto expected = std::polar(std::exp(-0.3), 6.0);
  EXPECT_NEAR(std::abs(m - expected), 0.0, 1e-14);
  EXPECT_NEAR(e.sz[0], 1.0 - 0.8 * std::exp(-3.0 / 50.0), 1e-14);
}

TEST(Engine, PiRefocusingConjugatesAboutPulseAxis) {
  // pi(psi) maps m -> e^{2 i psi} conj(m).
  for (double psi : {0.0, 0.5 * pi, 0.7}) {
    SpinSite s;
    s.s = {0.6, 0.8, 0.0};
    auto e = Ensemble::from_sites(EnsembleConfig{}, {s});
    Engine().microwave_pulse(e, pi, psi);
    const std::complex<double> m(e.sx[0], e.sy[0]);
    const auto expected = std::polar(1.0, 2 * psi) * std::conj(std::complex<double>(0.6, 0.8));
    EXPECT_NEAR(std::abs(m - expected), 0.0, 1e-15);
  }
}

TEST(Engine, RfPulseCoherenceMixing) {
  SpinSite s;
  s.a_n = {0.3, -0.4};
  auto e = Ensemble::from_sites(EnsembleConfig{}, {s});
  const double th = 1.1, ph = 0.4;
  Engine().rf_pulse(e, th, ph);
  const std::complex<double> a(0.3, -0.4);
  const auto expected = std::pow(std::cos(th / 2), 2) * a +
                        std::pow(std::sin(th / 2), 2) * std::conj(a) * std::polar(1.0, 2 * ph);
  EXPECT_NEAR(e.an_re[0], expected.real(), 1e-15);
  EXPECT_NEAR(e.an_im[0], expected.imag(), 1e-15);
}

TEST(Engine, TransferRoundTripIsIdentity) {
  auto e = scrambled(rich_config(), 3);
  auto c = rich_config();
  c.transfer_fidelity = 1.0;
  auto ideal = Ensemble::from_sites(c, [&] {
    std::vector<SpinSite> v;
    for (std::size_t i = 0; i < e.size(); ++i) v.push_back(e.site(i));
    return v;
  }());
  const auto before = ideal;
  Engine eng;
  eng.transfer(ideal, TransferDirection::E2N);
  eng.transfer(ideal, TransferDirection::N2E);
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    EXPECT_NEAR(ideal.sx[i], before.sx[i], 1e-12);
    EXPECT_NEAR(ideal.sy[i], before.sy[i], 1e-12);
    EXPECT_NEAR(ideal.an_re[i], before.an_re[i], 1e-12);
    EXPECT_NEAR(ideal.an_im[i], before.an_im[i], 1e-12);
    EXPECT_EQ(ideal.sz[i], before.sz[i]);
  }
}

TEST(Engine, EachOperationMatchesScalarOracle) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto e = scrambled(rich_config(), seed);
    oracle::Model m(e);
    Engine eng;
    for (const auto& ev : random_program(seed * 7919, 25)) {
      Signal got, want;
      const bool acq = eng.apply(e, ev, &got);
      m.apply(ev, &want);
      if (acq) {
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
          EXPECT_NEAR(got.t[k], want.t[k], 1e-18);
          EXPECT_NEAR(got.m_plus[k].real(), want.m_plus[k].real(), 1e-12);
          EXPECT_NEAR(got.m_plus[k].imag(), want.m_plus[k].imag(), 1e-12);
        }
      }
      expect_state_close(e, m, 1e-12);
      if (HasFailure()) FAIL() << "seed " << seed << " at " << describe(ev);
    }
  }
}

TEST(Engine, CoalescedRunMatchesEventByEvent) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto a = scrambled(rich_config(), seed);
    auto b = a;
    const auto prog = random_program(seed, 40);
    Engine eng;
    const auto res = eng.run(a, prog);
    std::vector<Signal> step;
    for (const auto& ev : prog) {
      Signal s;
      if (eng.apply(b, ev, &s)) step.push_back(s);
    }
    ASSERT_EQ(res.signals.size(), step.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(a.sx[i], b.sx[i], 1e-12);
      EXPECT_NEAR(a.sy[i], b.sy[i], 1e-12);
      EXPECT_NEAR(a.an_re[i], b.an_re[i], 1e-12);
    }
  }
}

TEST(Engine, PulsesPreserveBlochNorm) {
  auto c = rich_config();
  c.relaxation = {};
  c.n_spins = 1000;
  auto e = scrambled(c, 5);
  Engine eng;
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(0.0, 2 * pi);
  for (int k = 0; k < 50; ++k) {
    eng.microwave_pulse(e, u(g), u(g));
    eng.evolve_combined(e, 1e-7 * (k % 3), 1e-8 * (k % 5));
  }
  for (std::size_t i = 0; i < e.size(); ++i)
    EXPECT_NEAR(e.site(i).s.norm(), 1.0, 1e-12);
}

TEST(Engine, GradientThenReversedGradientRestoresPhase) {
  EnsembleConfig c;
  c.n_spins = 2000;
  c.relaxation = {INFINITY, 1e-6, INFINITY, INFINITY};
  auto e = build_ensemble(c);
  for (auto& d : e.delta) d = 0.0;
  Engine eng;
  eng.microwave_pulse(e, 0.5 * pi, 0.0);
  const auto m0 = eng.magnetization(e);
  eng.gradient(e, 0.03, 1.3e-6);
  EXPECT_LT(std::abs(eng.magnetization(e)), 0.1);
  eng.gradient(e, -0.03, 1.3e-6);
  EXPECT_NEAR(std::abs(eng.magnetization(e) - m0), 0.0, 1e-12);
}

TEST(Engine, GradientPiGradientRefocusesWithKReversal) {
  EnsembleConfig c;
  c.n_spins = 2000;
  c.relaxation = {INFINITY, 1e-6, INFINITY, INFINITY};
  auto e = build_ensemble(c);
  for (auto& d : e.delta) d = 0.0;
  Engine eng;
  eng.microwave_pulse(e, 0.5 * pi, 0.0);
  const auto m0 = eng.magnetization(e);
  eng.gradient(e, 0.03, 1.3e-6);
  eng.microwave_pulse(e, pi, 0.5 * pi);
  eng.gradient(e, 0.03, 1.3e-6);
  // Uniform phase is restored up to the pi-pulse reflection.
  const auto expected = std::polar(1.0, pi) * std::conj(m0);
  EXPECT_NEAR(std::abs(eng.magnetization(e) - expected), 0.0, 1e-12);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const std::complex<double> m(e.sx[i], e.sy[i]);
    EXPECT_NEAR(std::abs(m - expected), 0.0, 1e-9);
  }
}

TEST(Engine, SmallTipResponseIsLinear) {
  EnsembleConfig c;
  c.n_spins = 500;
  auto base = build_ensemble(c);
  Engine eng;
  auto run = [&](double theta) {
    auto e = base;
    eng.microwave_pulse(e, theta, 0.3);
    eng.evolve_free(e, 0.4e-6);
    return eng.magnetization(e);
  };
  const auto m1 = run(1e-4), m2 = run(2e-4);
  EXPECT_NEAR(std::abs(m2 - 2.0 * m1) / std::abs(m1), 0.0, 1e-7);
}

TEST(Engine, ThreadCountDoesNotChangeResults) {
  EnsembleConfig c;
  c.n_spins = 3 * kBlockSize + 123;
  c.static_gradient = 0.01;
  c.b1_beta = 0.1;
  const auto prog = random_program(99, 30);
  std::vector<Signal> ref;
  Ensemble ref_state;
  for (unsigned threads : {1u, 2u, 3u, 8u}) {
    auto e = build_ensemble(c);
    const auto res = Engine(threads).run(e, prog);
    if (threads == 1) {
      ref = res.signals;
      ref_state = e;
      continue;
    }
    EXPECT_TRUE(e == ref_state);
    ASSERT_EQ(res.signals.size(), ref.size());
    for (std::size_t s = 0; s < ref.size(); ++s)
      EXPECT_EQ(res.signals[s].m_plus, ref[s].m_plus);
  }
}

TEST(Engine, InvalidEventsReportTheirIndex) {
  auto e = build_ensemble(EnsembleConfig{}, 10, 1);
  std::vector<SequenceEvent> prog = {MicrowavePulse{1, 0}, Delay{1e-6}, Delay{-1e-6}};
  try {
    Engine().run(e, prog);
    FAIL();
  } catch (const SequenceRunError& ex) {
    EXPECT_EQ(ex.index(), 2u);
  }
  std::vector<SequenceEvent> bad_acq = {Acquire{1e-6, 2e-6}};
  EXPECT_THROW(Engine().run(e, bad_acq), SequenceRunError);
}

TEST(Engine, AcquisitionSampleTimes) {
  auto e = build_ensemble(EnsembleConfig{}, 10, 1);
  Engine eng;
  eng.evolve_free(e, 1e-6);
  const auto s = eng.acquire(e, 1e-7, 1e-8);
  ASSERT_EQ(s.size(), 10u);
  EXPECT_NEAR(s.t.front(), 1.01e-6, 1e-18);
  EXPECT_NEAR(s.t.back(), 1.1e-6, 1e-18);
  EXPECT_NEAR(e.time(), 1.1e-6, 1e-18);
}
