#pragma once

// Discrete control values and the singlet-triplet Hamiltonians they select.

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "pulseprep/quantum.hpp"

namespace pulseprep {

struct ControlConfig {
  int qubits = 1;
  double total_time = 4.0 * std::numbers::pi;
  double dt = std::numbers::pi / 5.0;
  int max_steps = 20;
  double fidelity_threshold = 0.999;
  double h = 1.0;
  double h1 = 1.0;
  double h2 = 1.0;

  int dim() const { return qubits == 1 ? 2 : 4; }

  static ControlConfig single_qubit() { return ControlConfig{}; }

  static ControlConfig two_qubit() {
    ControlConfig c;
    c.qubits = 2;
    c.total_time = 10.0 * std::numbers::pi;
    c.dt = std::numbers::pi / 2.0;
    c.max_steps = 20;
    return c;
  }

  static ControlConfig defaults(int qubits) {
    if (qubits == 1) return single_qubit();
    if (qubits == 2) return two_qubit();
    throw TaskError("qubit count must be 1 or 2");
  }

  // Recomputes dt from T/N.
  void set_schedule(double total, int steps) {
    total_time = total;
    max_steps = steps;
    dt = total / steps;
  }

  void validate() const {
    if (qubits != 1 && qubits != 2) throw TaskError("qubit count must be 1 or 2");
    if (!(dt > 0.0)) throw TaskError("dt must be positive");
    if (max_steps < 1) throw TaskError("max_steps must be at least 1");
    if (max_steps != static_cast<int>(std::lround(total_time / dt))) {
      throw TaskError("max_steps must equal round(T/dt)");
    }
    if (!(fidelity_threshold > 0.0 && fidelity_threshold <= 1.0)) {
      throw TaskError("fidelity threshold must lie in (0, 1]");
    }
  }
};

// H = J sz + h sx, basis {|S>, |T0>}.
inline HermitianOperator single_qubit_hamiltonian(double j, double h) {
  if (!(j >= 0.0)) throw TaskError("exchange coupling J must be non-negative");
  CMatrix m(2, 2);
  m << j, h, h, -j;
  return HermitianOperator(m);
}

// H = 1/2 [J1 sz(x)I + J2 I(x)sz + h1 sx(x)I + h2 I(x)sx + J12/2 (sz-I)(x)(sz-I)], J12 = J1 J2 / 2,
// basis {|SS>, |ST0>, |T0S>, |T0T0>}.
inline HermitianOperator two_qubit_hamiltonian(double j1, double j2, double h1, double h2) {
  if (!(j1 >= 0.0) || !(j2 >= 0.0)) throw TaskError("exchange couplings must be non-negative");
  using namespace pauli;
  const CMatrix id = identity();
  const CMatrix zm = z() - id;
  const double j12 = j1 * j2 / 2.0;
  CMatrix m = j1 * kron(z(), id) + j2 * kron(id, z()) + h1 * kron(x(), id) + h2 * kron(id, x()) +
              (j12 / 2.0) * kron(zm, zm);
  return HermitianOperator(0.5 * m);
}

// Ordered list of allowed control values. Single qubit: one coupling J per action;
// two qubits: (J1, J2) pairs, row-major so index = 4 (J1 - 1) + (J2 - 1).
class ActionSet {
 public:
  using Value = std::array<double, 2>;

  ActionSet(int qubits, std::vector<Value> values) : qubits_(qubits), values_(std::move(values)) {
    if (qubits_ != 1 && qubits_ != 2) throw TaskError("action set qubit count must be 1 or 2");
    if (values_.empty()) throw TaskError("action set is empty");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (values_[i][0] < 0.0 || values_[i][1] < 0.0) throw TaskError("action values must be non-negative");
      for (std::size_t k = 0; k < i; ++k) {
        if (values_[k] == values_[i]) throw TaskError("action values must be distinct");
      }
    }
  }

  static ActionSet single_qubit() {
    std::vector<Value> v;
    for (int j = 0; j <= 7; ++j) v.push_back({static_cast<double>(j), 0.0});
    return ActionSet(1, std::move(v));
  }

  static ActionSet two_qubit() {
    std::vector<Value> v;
    for (int j1 = 1; j1 <= 4; ++j1) {
      for (int j2 = 1; j2 <= 4; ++j2) v.push_back({static_cast<double>(j1), static_cast<double>(j2)});
    }
    return ActionSet(2, std::move(v));
  }

  static ActionSet defaults(int qubits) { return qubits == 1 ? single_qubit() : two_qubit(); }

  int qubits() const { return qubits_; }
  int channels() const { return qubits_; }
  int size() const { return static_cast<int>(values_.size()); }
  const Value& value(int action) const {
    check(action);
    return values_[static_cast<std::size_t>(action)];
  }
  const std::vector<Value>& values() const { return values_; }

  void check(int action) const {
    if (action < 0 || action >= size()) {
      throw TaskError("action index " + std::to_string(action) + " out of range [0, " +
                      std::to_string(size()) + ")");
    }
  }

  // Lowest and highest value taken by one control channel.
  std::pair<double, double> channel_range(int channel) const {
    double lo = values_.front()[channel], hi = lo;
    for (const auto& v : values_) {
      lo = std::min(lo, v[channel]);
      hi = std::max(hi, v[channel]);
    }
    return {lo, hi};
  }

  // Compact textual identity used in file headers, e.g. "J:0,1,2" or "J1J2:1/1,1/2".
  std::string id() const {
    std::ostringstream os;
    os << (qubits_ == 1 ? "J:" : "J1J2:");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (i) os << ',';
      os << values_[i][0];
      if (qubits_ == 2) os << '/' << values_[i][1];
    }
    return os.str();
  }

  std::string describe(int action) const {
    const auto& v = value(action);
    std::ostringstream os;
    os << v[0];
    if (qubits_ == 2) os << ' ' << v[1];
    return os.str();
  }

  // Index of the value closest to the given continuous control, rounding each channel
  // independently to its nearest allowed level.
  int nearest(const Value& control) const;

 private:
  int qubits_;
  std::vector<Value> values_;
};

inline int ActionSet::nearest(const Value& control) const {
  Value snapped{};
  for (int c = 0; c < channels(); ++c) {
    double best = values_.front()[c];
    for (const auto& v : values_) {
      if (std::abs(v[c] - control[c]) < std::abs(best - control[c])) best = v[c];
    }
    snapped[c] = best;
  }
  for (int i = 0; i < size(); ++i) {
    const auto& v = values_[static_cast<std::size_t>(i)];
    if (v[0] == snapped[0] && (channels() == 1 || v[1] == snapped[1])) return i;
  }
  // Grid-shaped action sets always contain the per-channel snap; fall back to Euclidean nearest.
  int best = 0;
  double best_d = 1e300;
  for (int i = 0; i < size(); ++i) {
    const auto& v = values_[static_cast<std::size_t>(i)];
    double d = 0.0;
    for (int c = 0; c < channels(); ++c) d += (v[c] - control[c]) * (v[c] - control[c]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

inline HermitianOperator control_hamiltonian(const ActionSet::Value& v, const ControlConfig& cfg) {
  if (cfg.qubits == 1) return single_qubit_hamiltonian(v[0], cfg.h);
  return two_qubit_hamiltonian(v[0], v[1], cfg.h1, cfg.h2);
}

inline HermitianOperator action_to_hamiltonian(int action, const ActionSet& aset, const ControlConfig& cfg) {
  if (aset.qubits() != cfg.qubits) throw MismatchError("action set and control config disagree on qubit count");
  return control_hamiltonian(aset.value(action), cfg);
}

// One dt of evolution under the given action.
inline PureState step_pure(const PureState& s, int action, const ActionSet& aset, const ControlConfig& cfg) {
  return evolve_pure(s, action_to_hamiltonian(action, aset, cfg), cfg.dt);
}

// One dt of unitary evolution followed by the noise channel (if any).
inline DensityMatrix step_density(const DensityMatrix& rho, int action, const ActionSet& aset,
                                  const ControlConfig& cfg, const NoiseModel* noise) {
  DensityMatrix next = evolve_density(rho, action_to_hamiltonian(action, aset, cfg), cfg.dt);
  if (noise != nullptr && !noise->empty()) {
    require_same_dim(next.dim(), noise->dim(), "noise channel");
    next = apply_noise(next, *noise);
  }
  return next;
}

}  // namespace pulseprep
