#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "pulseprep/control.hpp"
#include "pulseprep/dataset.hpp"
#include "pulseprep/quantum.hpp"
#include "support/oracles.hpp"

using namespace pulseprep;
using std::numbers::pi;

namespace {

PureState ket(std::initializer_list<Complex> amps) {
  CVector v(static_cast<Eigen::Index>(amps.size()));
  int i = 0;
  for (auto a : amps) v(i++) = a;
  return PureState::normalized(v);
}

const PureState k0 = PureState::basis(2, 0);
const PureState k1 = PureState::basis(2, 1);

CMatrix to_cm(const oracle::Mat& m) { return m; }

double max_diff(const CMatrix& a, const CMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

DensityMatrix random_density(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  CMatrix g(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) g(i, j) = Complex(n(rng), n(rng));
  }
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(rho);
}

}  // namespace

TEST(PureState, RejectsBadDimensionAndNorm) {
  EXPECT_THROW(PureState(CVector::Ones(3) / std::sqrt(3.0)), TaskError);
  EXPECT_THROW(PureState(CVector::Ones(2)), TaskError);
  EXPECT_NO_THROW(PureState(CVector::Ones(4) / 2.0));
}

TEST(DensityMatrix, RejectsInvalid) {
  CMatrix m = CMatrix::Identity(2, 2);
  EXPECT_THROW(DensityMatrix{m}, TaskError);  // trace 2
  CMatrix neg(2, 2);
  neg << 1.5, 0, 0, -0.5;
  EXPECT_THROW(DensityMatrix{neg}, TaskError);
  CMatrix nh(2, 2);
  nh << 0.5, 0.1, 0.0, 0.5;
  EXPECT_THROW(DensityMatrix{nh}, TaskError);
}

TEST(Fidelity, PureExamples) {
  EXPECT_DOUBLE_EQ(fidelity(k0, k0), 1.0);
  EXPECT_DOUBLE_EQ(fidelity(k0, k1), 0.0);
  EXPECT_NEAR(fidelity(k0, ket({1.0, 1.0})), 0.5, 1e-15);
  EXPECT_THROW(fidelity(k0, PureState::basis(4, 0)), TaskError);
}

TEST(Fidelity, MixedExamples) {
  EXPECT_NEAR(fidelity_mixed(DensityMatrix::from_pure(k0), k0), 1.0, 1e-15);
  EXPECT_NEAR(fidelity_mixed(DensityMatrix::maximally_mixed(2), k0), 0.5, 1e-15);
  // Bit flip p = 0.2 on |0><0| by hand: 0.8 |0><0| + 0.2 |1><1|.
  const oracle::Mat rho0 = DensityMatrix::from_pure(k0).entries();
  const oracle::Mat by_hand = oracle::apply_kraus(rho0, oracle::kraus(oracle::Kind::BitFlip, 0.2));
  EXPECT_NEAR(by_hand(1, 1).real(), 0.2, 1e-15);
  const auto rho = apply_channel(DensityMatrix::from_pure(k0), make_channel(ChannelKind::BitFlip, 0.2));
  EXPECT_NEAR(fidelity_mixed(rho, k1), 0.2, 1e-14);
}

TEST(Propagator, ZeroTimeIsIdentity) {
  for (double j : {0.0, 3.0, 7.0}) {
    EXPECT_LT(max_diff(propagator(single_qubit_hamiltonian(j, 1.0), 0.0), CMatrix::Identity(2, 2)), 1e-15);
  }
  EXPECT_LT(max_diff(propagator(two_qubit_hamiltonian(2, 3, 1, 1), 0.0), CMatrix::Identity(4, 4)), 1e-15);
  EXPECT_THROW(propagator(single_qubit_hamiltonian(0, 1), -0.1), TaskError);
}

TEST(Propagator, SigmaXClosedForm) {
  const double t = pi / 5;
  const CMatrix u = propagator(single_qubit_hamiltonian(0.0, 1.0), t);
  const CMatrix expected = std::cos(t) * pauli::identity() - Complex(0, 1) * std::sin(t) * pauli::x();
  EXPECT_LT(max_diff(u, expected), 1e-14);
  EXPECT_LT(max_diff(u, to_cm(oracle::taylor_expm(oracle::h_single(0.0, 1.0), t))), 1e-10);
}

TEST(Propagator, AxisAngleClosedForm) {
  const double t = pi / 5;
  const double w = std::sqrt(2.0);
  const CMatrix u = propagator(single_qubit_hamiltonian(1.0, 1.0), t);
  const CMatrix expected =
      std::cos(w * t) * pauli::identity() - Complex(0, 1) * std::sin(w * t) * (pauli::z() + pauli::x()) / w;
  EXPECT_LT(max_diff(u, expected), 1e-14);
}

TEST(Propagator, MatchesTaylorOracleOnEveryAction) {
  const auto c1 = ControlConfig::single_qubit();
  for (int j = 0; j <= 7; ++j) {
    const CMatrix u = propagator(single_qubit_hamiltonian(j, 1.0), c1.dt);
    EXPECT_LT(max_diff(u, to_cm(oracle::taylor_expm(oracle::h_single(j, 1.0), c1.dt))), 1e-8) << "J=" << j;
  }
  const auto c2 = ControlConfig::two_qubit();
  for (int j1 = 1; j1 <= 4; ++j1) {
    for (int j2 = 1; j2 <= 4; ++j2) {
      const CMatrix u = propagator(two_qubit_hamiltonian(j1, j2, 1, 1), c2.dt);
      const CMatrix ref = to_cm(oracle::taylor_expm(oracle::h_two(j1, j2, 1, 1), c2.dt));
      EXPECT_LT(max_diff(u, ref), 1e-8) << j1 << "," << j2;
    }
  }
}

TEST(Propagator, IsUnitary) {
  for (double t : {0.1, pi / 5, pi / 2, 3.0}) {
    for (int j = 0; j <= 7; ++j) {
      const CMatrix u = propagator(single_qubit_hamiltonian(j, 1.0), t);
      EXPECT_LT(max_diff(u.adjoint() * u, CMatrix::Identity(2, 2)), 1e-12);
    }
    const CMatrix u = propagator(two_qubit_hamiltonian(3, 4, 1, 1), t);
    EXPECT_LT(max_diff(u.adjoint() * u, CMatrix::Identity(4, 4)), 1e-12);
  }
}

TEST(EvolvePure, Examples) {
  const auto hx = single_qubit_hamiltonian(0.0, 1.0);
  const PureState half = evolve_pure(k0, hx, pi / 2);
  EXPECT_NEAR(std::abs(half[1] - Complex(0, -1)), 0.0, 1e-14);
  EXPECT_NEAR(fidelity(half, k1), 1.0, 1e-14);
  EXPECT_NEAR(fidelity(evolve_pure(k0, hx, pi / 5), k1), std::pow(std::sin(pi / 5), 2), 1e-14);
  EXPECT_NEAR(std::pow(std::sin(pi / 5), 2), 0.3455, 1e-4);
  const PureState s = ket({Complex(0.3, 0.1), Complex(-0.2, 0.9)});
  EXPECT_TRUE(evolve_pure(s, single_qubit_hamiltonian(4, 1), 0.0).amplitudes().isApprox(s.amplitudes(), 1e-15));
}

TEST(EvolvePure, NormPreservedOverLongRollout) {
  const auto aset = ActionSet::single_qubit();
  const auto cfg = ControlConfig::single_qubit();
  PureState s = ket({Complex(0.6, 0.0), Complex(0.0, 0.8)});
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) s = step_pure(s, static_cast<int>(rng() % 8), aset, cfg);
  EXPECT_NEAR(s.amplitudes().squaredNorm(), 1.0, 1e-12);
}

TEST(EvolveDensity, Examples) {
  const auto hx = single_qubit_hamiltonian(0.0, 1.0);
  const auto rho = evolve_density(DensityMatrix::from_pure(k0), hx, pi / 2);
  EXPECT_NEAR(rho(1, 1).real(), 1.0, 1e-14);
  const auto mixed = evolve_density(DensityMatrix::maximally_mixed(2), single_qubit_hamiltonian(5, 1), 1.234);
  EXPECT_LT(max_diff(mixed.entries(), CMatrix::Identity(2, 2) / 2.0), 1e-15);
  const auto r5 = evolve_density(DensityMatrix::from_pure(k0), hx, pi / 5);
  EXPECT_NEAR(r5(1, 1).real(), std::pow(std::sin(pi / 5), 2), 1e-14);
}

TEST(EvolveDensity, TraceAndPositivityPreserved) {
  std::mt19937_64 rng(11);
  for (int d : {2, 4}) {
    for (int trial = 0; trial < 20; ++trial) {
      DensityMatrix rho = random_density(d, rng);
      const auto h = d == 2 ? single_qubit_hamiltonian(3, 1) : two_qubit_hamiltonian(2, 4, 1, 1);
      rho = evolve_density(rho, h, 0.7);
      EXPECT_NEAR(rho.trace(), 1.0, 1e-12);
      EXPECT_GE(rho.min_eigenvalue(), -1e-12);
      EXPECT_NO_THROW(rho.validate());
    }
  }
}

TEST(Channel, KrausCompletenessForAllKindsAndP) {
  for (auto k : {ChannelKind::BitFlip, ChannelKind::PhaseFlip, ChannelKind::AmplitudeDamping}) {
    for (double p : {0.0, 0.005, 0.2, 0.5, 1.0}) {
      EXPECT_LT(max_diff(make_channel(k, p).completeness(), CMatrix::Identity(2, 2)), 1e-14);
      const NoiseModel two = make_noise(k, p, 2);
      for (const auto& stage : two.stages) {
        EXPECT_LT(max_diff(stage.completeness(), CMatrix::Identity(4, 4)), 1e-14);
      }
    }
  }
  EXPECT_THROW(make_channel(ChannelKind::BitFlip, 1.5), TaskError);
  EXPECT_THROW(make_channel(ChannelKind::BitFlip, -0.1), TaskError);
}

TEST(Channel, Examples) {
  const auto r0 = DensityMatrix::from_pure(k0);
  const auto r1 = DensityMatrix::from_pure(k1);
  std::mt19937_64 rng(5);
  const auto any = random_density(2, rng);
  EXPECT_LT(max_diff(apply_channel(any, make_channel(ChannelKind::BitFlip, 0.0)).entries(), any.entries()), 1e-15);
  EXPECT_LT(max_diff(apply_channel(r0, make_channel(ChannelKind::BitFlip, 1.0)).entries(), r1.entries()), 1e-15);
  EXPECT_LT(max_diff(apply_channel(r0, make_channel(ChannelKind::BitFlip, 0.5)).entries(),
                     CMatrix::Identity(2, 2) / 2.0),
            1e-15);
  for (double p : {0.1, 0.37, 0.9}) {
    const auto ad = apply_channel(r1, make_channel(ChannelKind::AmplitudeDamping, p));
    EXPECT_NEAR(ad(0, 0).real(), p, 1e-15);
    EXPECT_NEAR(ad(1, 1).real(), 1 - p, 1e-15);
  }
  const PureState plus = ket({1.0, 1.0});
  const PureState minus = ket({1.0, -1.0});
  const auto pf = apply_channel(DensityMatrix::from_pure(plus), make_channel(ChannelKind::PhaseFlip, 0.3));
  const CMatrix expected = 0.7 * DensityMatrix::from_pure(plus).entries() + 0.3 * DensityMatrix::from_pure(minus).entries();
  EXPECT_LT(max_diff(pf.entries(), expected), 1e-15);
}

TEST(Channel, MatchesHandAppliedKraus) {
  std::mt19937_64 rng(17);
  const std::pair<ChannelKind, oracle::Kind> kinds[] = {{ChannelKind::BitFlip, oracle::Kind::BitFlip},
                                                        {ChannelKind::PhaseFlip, oracle::Kind::PhaseFlip},
                                                        {ChannelKind::AmplitudeDamping, oracle::Kind::AmplitudeDamping}};
  for (auto [k, ok] : kinds) {
    for (double p : {0.01, 0.04, 0.3}) {
      const auto rho = random_density(2, rng);
      const CMatrix ref = to_cm(oracle::apply_kraus(rho.entries(), oracle::kraus(ok, p)));
      EXPECT_LT(max_diff(apply_channel(rho, make_channel(k, p)).entries(), ref), 1e-14);
      const auto rho4 = random_density(4, rng);
      const CMatrix ref4 = to_cm(oracle::apply_kraus_two(rho4.entries(), oracle::kraus(ok, p)));
      EXPECT_LT(max_diff(apply_noise(rho4, make_noise(k, p, 2)).entries(), ref4), 1e-14);
    }
  }
}

TEST(Channel, TracePreservingAndPositive) {
  std::mt19937_64 rng(23);
  for (auto k : {ChannelKind::BitFlip, ChannelKind::PhaseFlip, ChannelKind::AmplitudeDamping}) {
    for (int trial = 0; trial < 20; ++trial) {
      const double p = std::uniform_real_distribution<double>(0, 1)(rng);
      for (int q : {1, 2}) {
        const auto out = apply_noise(random_density(q == 1 ? 2 : 4, rng), make_noise(k, p, q));
        EXPECT_NEAR(out.trace(), 1.0, 1e-12);
        EXPECT_GE(out.min_eigenvalue(), -1e-12);
      }
    }
  }
}

TEST(Channel, TwoQubitLiftExamples) {
  const auto r00 = DensityMatrix::from_pure(PureState::basis(4, 0));
  std::mt19937_64 rng(29);
  const auto any = random_density(4, rng);
  EXPECT_LT(max_diff(apply_noise(any, make_noise(ChannelKind::AmplitudeDamping, 0.0, 2)).entries(), any.entries()),
            1e-15);
  EXPECT_NEAR(apply_noise(r00, make_noise(ChannelKind::BitFlip, 1.0, 2))(3, 3).real(), 1.0, 1e-15);
  const auto out = apply_noise(r00, make_noise(ChannelKind::BitFlip, 0.1, 2));
  const double diag[] = {0.81, 0.09, 0.09, 0.01};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(out(i, i).real(), diag[i], 1e-15);
}

// Both qubits see independent channels, so the two stage orders must agree.
TEST(Channel, TwoQubitStagesCommute) {
  std::mt19937_64 rng(31);
  for (auto k : {ChannelKind::BitFlip, ChannelKind::PhaseFlip, ChannelKind::AmplitudeDamping}) {
    NoiseModel n = make_noise(k, 0.27, 2);
    NoiseModel reversed{{n.stages[1], n.stages[0]}};
    const auto rho = random_density(4, rng);
    EXPECT_LT(max_diff(apply_noise(rho, n).entries(), apply_noise(rho, reversed).entries()), 1e-14);
  }
}

TEST(Channel, ParseNames) {
  EXPECT_EQ(parse_channel_kind("bitflip"), ChannelKind::BitFlip);
  EXPECT_EQ(parse_channel_kind("phaseflip"), ChannelKind::PhaseFlip);
  EXPECT_EQ(parse_channel_kind("amplitude-damping"), ChannelKind::AmplitudeDamping);
  EXPECT_THROW(parse_channel_kind("depolarizing"), TaskError);
}

TEST(Bloch, Examples) {
  auto b = bloch_coordinates(k0);
  EXPECT_NEAR(b.z, 1.0, 1e-15);
  b = bloch_coordinates(k1);
  EXPECT_NEAR(b.z, -1.0, 1e-15);
  b = bloch_coordinates(ket({1.0, 1.0}));
  EXPECT_NEAR(b.x, 1.0, 1e-15);
  EXPECT_NEAR(b.y, 0.0, 1e-15);
  b = bloch_coordinates(ket({1.0, Complex(0, 1)}));
  EXPECT_NEAR(b.y, 1.0, 1e-15);
  EXPECT_THROW(bloch_coordinates(PureState::basis(4, 0)), TaskError);
}

TEST(Bloch, PureAndDensityAgree) {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 20; ++i) {
    const PureState s = sample_haar_state(2, rng);
    const auto a = bloch_coordinates(s);
    const auto b = bloch_coordinates(DensityMatrix::from_pure(s));
    EXPECT_NEAR(a.x, b.x, 1e-14);
    EXPECT_NEAR(a.y, b.y, 1e-14);
    EXPECT_NEAR(a.z, b.z, 1e-14);
    EXPECT_NEAR(a.x * a.x + a.y * a.y + a.z * a.z, 1.0, 1e-12);
  }
}

TEST(PhaseFix, Examples) {
  EXPECT_EQ(phase_fix(k0).amplitudes(), k0.amplitudes());
  const PureState rotated(CVector(k0.amplitudes() * std::polar(1.0, pi / 3)));
  EXPECT_LT((phase_fix(rotated).amplitudes() - k0.amplitudes()).norm(), 1e-15);
  const PureState i1(CVector(k1.amplitudes() * Complex(0, 1)));
  EXPECT_LT((phase_fix(i1).amplitudes() - k1.amplitudes()).norm(), 1e-15);
}

TEST(PhaseFix, RemovesAnyGlobalPhase) {
  std::mt19937_64 rng(41);
  for (int d : {2, 4}) {
    for (int i = 0; i < 50; ++i) {
      const PureState s = sample_haar_state(d, rng);
      const double phi = std::uniform_real_distribution<double>(0, 2 * pi)(rng);
      const PureState t(CVector(s.amplitudes() * std::polar(1.0, phi)));
      EXPECT_LT((phase_fix(s).amplitudes() - phase_fix(t).amplitudes()).norm(), 1e-14);
      EXPECT_GE(phase_fix(s)[0].real(), 0.0);
      EXPECT_NEAR(phase_fix(s)[0].imag(), 0.0, 1e-15);
    }
  }
}
