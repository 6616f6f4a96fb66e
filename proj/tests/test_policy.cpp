#include <sstream>

#include <gtest/gtest.h>

#include "pulseprep/baselines.hpp"
#include "pulseprep/policy.hpp"

using namespace pulseprep;

namespace {

MlpModel random_model(int qubits, std::uint64_t seed, Encoding enc = Encoding::Pure) {
  const auto aset = ActionSet::defaults(qubits);
  return init_model(default_layer_sizes(qubits, enc, aset.size()), seed, {qubits, aset.id(), enc, 0, ""});
}

void check_bounds(const PrepResult& r, const ControlConfig& cfg) {
  ASSERT_LE(static_cast<int>(r.actions.size()), cfg.max_steps);
  ASSERT_EQ(r.fidelity_trace.size(), r.actions.size() + 1);
  EXPECT_DOUBLE_EQ(r.f_max, *std::max_element(r.fidelity_trace.begin(), r.fidelity_trace.end()));
  EXPECT_LE(r.steps_used, static_cast<int>(r.actions.size()));
  EXPECT_DOUBLE_EQ(r.fidelity_trace[static_cast<std::size_t>(r.steps_used)], r.f_max);
  // steps_used is the first index reaching the maximum.
  for (int i = 0; i < r.steps_used; ++i) EXPECT_LT(r.fidelity_trace[static_cast<std::size_t>(i)], r.f_max);
  EXPECT_EQ(r.pulse_sequence().size(), static_cast<std::size_t>(r.steps_used));
  if (r.terminated_by == Termination::Threshold) {
    EXPECT_GT(r.f_max, cfg.fidelity_threshold);
    EXPECT_GT(r.fidelity_trace.back(), cfg.fidelity_threshold);
    for (std::size_t i = 0; i + 1 < r.fidelity_trace.size(); ++i) {
      EXPECT_LE(r.fidelity_trace[i], cfg.fidelity_threshold);
    }
  } else {
    EXPECT_EQ(r.terminated_by, Termination::StepCap);
    EXPECT_EQ(static_cast<int>(r.actions.size()), cfg.max_steps);
    EXPECT_LE(r.f_max, cfg.fidelity_threshold);
  }
}

}  // namespace

TEST(Prepare, IdenticalStatesExitAtStepZero) {
  const auto m = random_model(1, 1);
  Rng rng(1);
  const PureState s = sample_haar_state(2, rng);
  const PrepResult r = prepare(m, s, s, ActionSet::single_qubit(), ControlConfig::single_qubit());
  EXPECT_EQ(r.terminated_by, Termination::Threshold);
  EXPECT_TRUE(r.actions.empty());
  EXPECT_EQ(r.steps_used, 0);
  EXPECT_NEAR(r.f_max, 1.0, 1e-12);
}

TEST(Prepare, TerminationBoundsHoldForArbitraryNetworks) {
  for (int q : {1, 2}) {
    const auto aset = ActionSet::defaults(q);
    const auto cfg = ControlConfig::defaults(q);
    Rng rng(10 + q);
    for (int trial = 0; trial < 60; ++trial) {
      const auto m = random_model(q, 100 + static_cast<std::uint64_t>(trial));
      const PureState a = sample_haar_state(cfg.dim(), rng);
      const PureState b = sample_haar_state(cfg.dim(), rng);
      check_bounds(prepare(m, a, b, aset, cfg), cfg);
    }
  }
}

TEST(Prepare, LowThresholdStopsEarly) {
  auto cfg = ControlConfig::single_qubit();
  cfg.fidelity_threshold = 0.3;
  const auto m = random_model(1, 4);
  Rng rng(2);
  for (int i = 0; i < 40; ++i) {
    const PureState a = sample_haar_state(2, rng);
    const PureState b = sample_haar_state(2, rng);
    const PrepResult r = prepare(m, a, b, ActionSet::single_qubit(), cfg);
    check_bounds(r, cfg);
  }
}

TEST(Prepare, ReplayedSequenceReproducesTrace) {
  const auto aset = ActionSet::single_qubit();
  const auto cfg = ControlConfig::single_qubit();
  const auto m = random_model(1, 8);
  Rng rng(3);
  const PureState a = sample_haar_state(2, rng);
  const PureState b = sample_haar_state(2, rng);
  const PrepResult r = prepare(m, a, b, aset, cfg);
  PureState s = a;
  for (std::size_t i = 0; i < r.actions.size(); ++i) {
    s = step_pure(s, r.actions[i], aset, cfg);
    EXPECT_NEAR(fidelity(s, b), r.fidelity_trace[i + 1], 1e-14);
  }
}

TEST(Prepare, RejectsMismatchedModel) {
  const auto m1 = random_model(1, 1);
  const auto cfg2 = ControlConfig::two_qubit();
  EXPECT_THROW(prepare(m1, PureState::basis(4, 0), PureState::basis(4, 1), ActionSet::two_qubit(), cfg2),
               MismatchError);
  const auto dens = random_model(1, 1, Encoding::Density);
  EXPECT_THROW(prepare(dens, PureState::basis(2, 0), PureState::basis(2, 1), ActionSet::single_qubit(),
                       ControlConfig::single_qubit()),
               MismatchError);
}

// A zero channel must leave the noisy pipeline equal to the noiseless one.
TEST(PrepareNoisy, ZeroChannelMatchesNoiseless) {
  for (int q : {1, 2}) {
    const auto aset = ActionSet::defaults(q);
    const auto cfg = ControlConfig::defaults(q);
    const auto m = random_model(q, 21);
    Rng rng(30 + q);
    for (auto kind : {ChannelKind::BitFlip, ChannelKind::PhaseFlip, ChannelKind::AmplitudeDamping}) {
      const NoiseModel noise = make_noise(kind, 0.0, q);
      for (int i = 0; i < 50; ++i) {
        const PureState a = sample_haar_state(cfg.dim(), rng);
        const PureState b = sample_haar_state(cfg.dim(), rng);
        const PrepResult ideal = prepare(m, a, b, aset, cfg);
        const PrepResult noisy = prepare_noisy(m, DensityMatrix::from_pure(a), b, aset, cfg, noise);
        EXPECT_NEAR(noisy.f_max, ideal.f_max, 1e-9);
        EXPECT_EQ(noisy.pulse_sequence(), ideal.pulse_sequence());
        // Full-length replay through the density pipeline tracks the pure trace.
        const PrepResult full = replay_noisy(ideal.actions, DensityMatrix::from_pure(a), b, aset, cfg, noise);
        for (std::size_t k = 0; k < full.fidelity_trace.size(); ++k) {
          EXPECT_NEAR(full.fidelity_trace[k], ideal.fidelity_trace[k], 1e-9);
        }
      }
    }
  }
}

TEST(PrepareNoisy, DensityModelRespectsBounds) {
  const auto aset = ActionSet::single_qubit();
  const auto cfg = ControlConfig::single_qubit();
  const auto m = random_model(1, 5, Encoding::Density);
  const NoiseModel noise = make_noise(ChannelKind::BitFlip, 0.005, 1);
  Rng rng(4);
  for (int i = 0; i < 30; ++i) {
    const PureState a = sample_haar_state(2, rng);
    const PureState b = sample_haar_state(2, rng);
    check_bounds(prepare_noisy(m, DensityMatrix::from_pure(a), b, aset, cfg, noise), cfg);
  }
  EXPECT_THROW(prepare_noisy(m, DensityMatrix::maximally_mixed(2), PureState::basis(2, 0), aset, cfg,
                             make_noise(ChannelKind::BitFlip, 0.005, 2)),
               TaskError);
}

// The target is the noiseless endpoint, so any channel can only lose fidelity.
TEST(PrepareNoisy, NoiseLowersFidelityOfPerfectPulse) {
  const auto aset = ActionSet::single_qubit();
  const auto cfg = ControlConfig::single_qubit();
  const PureState a = PureState::basis(2, 0);
  const std::vector<int> pulse = {0, 3, 0};
  PureState b = a;
  for (int act : pulse) b = step_pure(b, act, aset, cfg);
  const PrepResult ideal = evaluate_actions(pulse, a, b, aset, cfg);
  EXPECT_NEAR(ideal.f_max, 1.0, 1e-12);
  for (auto kind : {ChannelKind::BitFlip, ChannelKind::PhaseFlip, ChannelKind::AmplitudeDamping}) {
    const PrepResult noisy = replay_noisy(pulse, DensityMatrix::from_pure(a), b, aset, cfg, make_noise(kind, 0.05, 1));
    EXPECT_LT(noisy.f_max, ideal.f_max - 1e-3);
  }
}

TEST(PrepResult, RecordFormat) {
  const auto aset = ActionSet::single_qubit();
  const auto cfg = ControlConfig::single_qubit();
  const auto m = random_model(1, 9);
  const PureState a = PureState::basis(2, 0);
  const PureState b = PureState::basis(2, 1);
  const PrepResult r = prepare(m, a, b, aset, cfg);
  std::ostringstream os;
  write_prep_result(os, r, a, b, aset, cfg, "sp");
  std::istringstream is(os.str());
  int header = 0, rows = 0;
  for (std::string line; std::getline(is, line);) {
    if (line.rfind("#", 0) == 0) {
      ++header;
    } else if (line != "step J fidelity") {
      ++rows;
    }
  }
  EXPECT_EQ(header, 5);
  EXPECT_EQ(rows, r.steps_used + 1);
}
