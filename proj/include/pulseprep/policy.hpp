#pragma once

// Pulse design by rolling a trained policy network forward. At each step the network's
// most probable action is applied; the best fidelity seen and the action prefix reaching
// it form the designed sequence.

#include <algorithm>
#include <chrono>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "pulseprep/control.hpp"
#include "pulseprep/dataset.hpp"
#include "pulseprep/mlp.hpp"
#include "pulseprep/quantum.hpp"

namespace pulseprep {

enum class Termination { Threshold, StepCap, LocalOptimum };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Threshold:
      return "threshold";
    case Termination::StepCap:
      return "step-cap";
    case Termination::LocalOptimum:
      return "local-optimum";
  }
  return "?";
}

struct PrepResult {
  // Every action executed, in order.
  std::vector<int> actions;
  // Fidelity before the first action, then after each action (size = actions + 1).
  std::vector<double> fidelity_trace;
  double f_max = 0.0;
  // Length of the shortest action prefix reaching f_max; this prefix is the designed pulse sequence.
  int steps_used = 0;
  Termination terminated_by = Termination::StepCap;
  double design_time = 0.0;
  // Optimizers over continuous controls also report their pre-discretization fidelity.
  std::optional<double> continuous_fidelity;

  std::vector<int> pulse_sequence() const {
    return {actions.begin(), actions.begin() + steps_used};
  }

  double final_fidelity() const { return fidelity_trace.empty() ? 0.0 : fidelity_trace.back(); }

  // Fidelities closer than this count as equal when locating the shortest prefix,
  // so rounding in a revisited state cannot lengthen the sequence.
  static constexpr double kPrefixTolerance = 1e-12;

  // Recomputes f_max and steps_used from the trace.
  void finalize() {
    f_max = fidelity_trace.empty() ? 0.0 : *std::max_element(fidelity_trace.begin(), fidelity_trace.end());
    steps_used = 0;
    for (std::size_t i = 0; i < fidelity_trace.size(); ++i) {
      if (fidelity_trace[i] >= f_max - kPrefixTolerance) {
        steps_used = static_cast<int>(i);
        break;
      }
    }
  }
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

// Network-driven design on pure states. Stops once the best fidelity exceeds the
// threshold (checked before the first action too) or after max_steps actions.
inline PrepResult prepare(const MlpModel& model, const PureState& init, const PureState& target, const ActionSet& aset,
                          const ControlConfig& cfg) {
  detail::Stopwatch clock;
  check_model_matches(model, cfg.qubits, aset, Encoding::Pure);
  require_same_dim(init.dim(), cfg.dim(), "prepare");
  require_same_dim(target.dim(), cfg.dim(), "prepare");

  PrepResult r;
  PureState state = init;
  double f_max = fidelity(state, target);
  r.fidelity_trace.push_back(f_max);
  r.terminated_by = Termination::StepCap;
  if (f_max > cfg.fidelity_threshold) {
    r.terminated_by = Termination::Threshold;
  } else {
    for (int step = 0; step < cfg.max_steps; ++step) {
      const int a = predict_action(model, encode_pure_pair(state, target));
      state = step_pure(state, a, aset, cfg);
      const double f = fidelity(state, target);
      r.actions.push_back(a);
      r.fidelity_trace.push_back(f);
      f_max = std::max(f_max, f);
      if (f_max > cfg.fidelity_threshold) {
        r.terminated_by = Termination::Threshold;
        break;
      }
    }
  }
  r.finalize();
  r.design_time = clock.seconds();
  return r;
}

// Applies a fixed action list to rho step by step (unitary, then channel) and records the
// fidelity trace. Termination is copied from the design that produced the actions.
inline PrepResult replay_noisy(const std::vector<int>& actions, const DensityMatrix& rho_init, const PureState& target,
                               const ActionSet& aset, const ControlConfig& cfg, const NoiseModel& noise,
                               Termination terminated_by = Termination::StepCap) {
  PrepResult r;
  DensityMatrix rho = rho_init;
  r.fidelity_trace.push_back(fidelity_mixed(rho, target));
  for (int a : actions) {
    rho = step_density(rho, a, aset, cfg, &noise);
    r.actions.push_back(a);
    r.fidelity_trace.push_back(fidelity_mixed(rho, target));
  }
  r.terminated_by = terminated_by;
  r.finalize();
  return r;
}

// Dominant eigenvector of a (numerically) pure density matrix.
inline PureState purification(const DensityMatrix& rho) {
  if (std::abs(rho.purity() - 1.0) > 1e-9) throw TaskError("initial density matrix is not pure");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.entries());
  return PureState::normalized(es.eigenvectors().col(rho.dim() - 1));
}

// Design under noise. A density-encoded (noise-trained) model drives the density matrix
// directly, one channel application after every step. A pure-encoded model designs the
// ideal sequence on the pure initial state and that sequence is replayed through the channel.
inline PrepResult prepare_noisy(const MlpModel& model, const DensityMatrix& rho_init, const PureState& target,
                                const ActionSet& aset, const ControlConfig& cfg, const NoiseModel& noise) {
  detail::Stopwatch clock;
  require_same_dim(rho_init.dim(), cfg.dim(), "prepare_noisy");
  require_same_dim(target.dim(), cfg.dim(), "prepare_noisy");
  if (!noise.empty()) require_same_dim(noise.dim(), cfg.dim(), "prepare_noisy channel");

  if (model.metadata().encoding == Encoding::Pure) {
    const PrepResult ideal = prepare(model, purification(rho_init), target, aset, cfg);
    PrepResult r = replay_noisy(ideal.pulse_sequence(), rho_init, target, aset, cfg, noise, ideal.terminated_by);
    r.design_time = clock.seconds();
    return r;
  }

  check_model_matches(model, cfg.qubits, aset, Encoding::Density);
  PrepResult r;
  DensityMatrix rho = rho_init;
  double f_max = fidelity_mixed(rho, target);
  r.fidelity_trace.push_back(f_max);
  r.terminated_by = Termination::StepCap;
  if (f_max > cfg.fidelity_threshold) {
    r.terminated_by = Termination::Threshold;
  } else {
    for (int step = 0; step < cfg.max_steps; ++step) {
      const int a = predict_action(model, encode_density_pair(rho, target));
      rho = step_density(rho, a, aset, cfg, &noise);
      const double f = fidelity_mixed(rho, target);
      r.actions.push_back(a);
      r.fidelity_trace.push_back(f);
      f_max = std::max(f_max, f);
      if (f_max > cfg.fidelity_threshold) {
        r.terminated_by = Termination::Threshold;
        break;
      }
    }
  }
  r.finalize();
  r.design_time = clock.seconds();
  return r;
}

namespace detail {

inline void write_state(std::ostream& os, const PureState& s) {
  for (int i = 0; i < s.dim(); ++i) os << (i ? " " : "") << s[i].real() << ' ' << s[i].imag();
}

}  // namespace detail

// Control-trajectory record: commented header lines, then one row per step of the designed
// pulse sequence ("step <action values> fidelity"); step 0 carries the initial fidelity.
inline void write_prep_result(std::ostream& os, const PrepResult& r, const PureState& init, const PureState& target,
                              const ActionSet& aset, const ControlConfig& cfg, std::string_view method = "sp") {
  os.precision(12);
  os << "# method " << method << '\n';
  os << "# qubits " << cfg.qubits << " dt " << cfg.dt << " max_steps " << cfg.max_steps << " threshold "
     << cfg.fidelity_threshold << '\n';
  os << "# init ";
  detail::write_state(os, init);
  os << "\n# target ";
  detail::write_state(os, target);
  os << "\n# f_max " << r.f_max << " steps_used " << r.steps_used << " terminated_by " << to_string(r.terminated_by)
     << " design_time " << r.design_time << '\n';
  os << (cfg.qubits == 1 ? "step J fidelity\n" : "step J1 J2 fidelity\n");
  os << 0 << (cfg.qubits == 1 ? " -" : " - -") << ' ' << r.fidelity_trace.front() << '\n';
  for (int i = 0; i < r.steps_used; ++i) {
    os << i + 1 << ' ' << aset.describe(r.actions[static_cast<std::size_t>(i)]) << ' '
       << r.fidelity_trace[static_cast<std::size_t>(i) + 1] << '\n';
  }
}

}  // namespace pulseprep
