#pragma once

// Dense linear algebra for 2- and 4-level systems: pure states, density
// matrices, propagators and Kraus channels.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pulseprep/error.hpp"

namespace pulseprep {

using Complex = std::complex<double>;

// Storage is inline (no heap) since dimensions never exceed 4.
using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 4, 4>;
using CVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;

inline constexpr double kNormTolerance = 1e-10;
inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kPositivityTolerance = -1e-9;

inline bool valid_dimension(Eigen::Index d) { return d == 2 || d == 4; }

namespace pauli {

inline CMatrix identity(int d = 2) { return CMatrix::Identity(d, d); }

inline CMatrix x() {
  CMatrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

inline CMatrix y() {
  CMatrix m(2, 2);
  m << 0.0, Complex(0.0, -1.0), Complex(0.0, 1.0), 0.0;
  return m;
}

inline CMatrix z() {
  CMatrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

}  // namespace pauli

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Unit-norm amplitude vector of dimension 2 or 4.
class PureState {
 public:
  explicit PureState(CVector amplitudes) : amps_(std::move(amplitudes)) {
    if (!valid_dimension(amps_.size())) {
      throw TaskError("pure state dimension must be 2 or 4, got " + std::to_string(amps_.size()));
    }
    if (std::abs(amps_.squaredNorm() - 1.0) > kNormTolerance) {
      throw TaskError("pure state is not normalized (norm^2 = " + std::to_string(amps_.squaredNorm()) +
                      ")");
    }
  }

  static PureState normalized(const CVector& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw TaskError("cannot normalize a zero or non-finite vector");
    return PureState(v / n);
  }

  static PureState basis(int dim, int index) {
    if (index < 0 || index >= dim) throw TaskError("basis index out of range");
    CVector v = CVector::Zero(dim);
    v(index) = 1.0;
    return PureState(v);
  }

  int dim() const { return static_cast<int>(amps_.size()); }
  const CVector& amplitudes() const { return amps_; }
  Complex operator[](int i) const { return amps_(i); }

  bool operator==(const PureState& other) const { return amps_ == other.amps_; }

 private:
  CVector amps_;
};

// Hermitian, unit-trace, positive-semidefinite matrix.
class DensityMatrix {
 public:
  // Tag for results of trace-preserving maps whose validity is guaranteed by construction.
  struct Unchecked {};

  explicit DensityMatrix(CMatrix entries) : rho_(std::move(entries)) { validate(); }
  DensityMatrix(CMatrix entries, Unchecked) : rho_(std::move(entries)) {}

  static DensityMatrix from_pure(const PureState& s) {
    return DensityMatrix(s.amplitudes() * s.amplitudes().adjoint(), Unchecked{});
  }

  static DensityMatrix maximally_mixed(int dim) {
    if (!valid_dimension(dim)) throw TaskError("density matrix dimension must be 2 or 4");
    return DensityMatrix(CMatrix::Identity(dim, dim) / static_cast<double>(dim), Unchecked{});
  }

  int dim() const { return static_cast<int>(rho_.rows()); }
  const CMatrix& entries() const { return rho_; }
  Complex operator()(int i, int j) const { return rho_(i, j); }

  double trace() const { return rho_.trace().real(); }
  double purity() const { return (rho_ * rho_).trace().real(); }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  void validate() const {
    if (rho_.rows() != rho_.cols() || !valid_dimension(rho_.rows())) {
      throw TaskError("density matrix must be square of dimension 2 or 4");
    }
    if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > kNormTolerance) {
      throw TaskError("density matrix is not Hermitian");
    }
    if (std::abs(rho_.trace() - Complex(1.0)) > kNormTolerance) {
      throw TaskError("density matrix trace is not 1");
    }
    if (min_eigenvalue() < kPositivityTolerance) {
      throw TaskError("density matrix has a negative eigenvalue");
    }
  }

 private:
  CMatrix rho_;
};

// Hamiltonian in units with hbar = 1.
class HermitianOperator {
 public:
  explicit HermitianOperator(CMatrix entries) : h_(std::move(entries)) {
    if (h_.rows() != h_.cols() || !valid_dimension(h_.rows())) {
      throw TaskError("Hamiltonian must be square of dimension 2 or 4");
    }
    if ((h_ - h_.adjoint()).cwiseAbs().maxCoeff() > kHermitianTolerance) {
      throw TaskError("Hamiltonian is not Hermitian");
    }
  }

  int dim() const { return static_cast<int>(h_.rows()); }
  const CMatrix& entries() const { return h_; }

 private:
  CMatrix h_;
};

inline void require_same_dim(int a, int b, std::string_view what) {
  if (a != b) {
    throw TaskError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                    std::to_string(b) + ")");
  }
}

// |<a|b>|^2
inline double fidelity(const PureState& a, const PureState& b) {
  require_same_dim(a.dim(), b.dim(), "fidelity");
  return std::clamp(std::norm(a.amplitudes().dot(b.amplitudes())), 0.0, 1.0);
}

// <target|rho|target>
inline double fidelity_mixed(const DensityMatrix& rho, const PureState& target) {
  require_same_dim(rho.dim(), target.dim(), "fidelity_mixed");
  const CVector& t = target.amplitudes();
  return std::clamp(t.dot(rho.entries() * t).real(), 0.0, 1.0);
}

// exp(-i H dt) through the eigendecomposition H = V diag(w) V^dagger.
inline CMatrix propagator(const HermitianOperator& h, double dt) {
  if (dt < 0.0) throw TaskError("propagator time step must be non-negative");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h.entries());
  const CMatrix& v = es.eigenvectors();
  CVector phases(h.dim());
  for (int k = 0; k < h.dim(); ++k) phases(k) = std::polar(1.0, -es.eigenvalues()(k) * dt);
  return v * phases.asDiagonal() * v.adjoint();
}

inline PureState evolve_pure(const PureState& s, const CMatrix& unitary) {
  require_same_dim(s.dim(), static_cast<int>(unitary.rows()), "evolve_pure");
  CVector next = unitary * s.amplitudes();
  // Renormalize the O(1e-16) drift so long rollouts keep the norm invariant.
  next /= next.norm();
  return PureState(std::move(next));
}

inline PureState evolve_pure(const PureState& s, const HermitianOperator& h, double dt) {
  require_same_dim(s.dim(), h.dim(), "evolve_pure");
  return evolve_pure(s, propagator(h, dt));
}

inline DensityMatrix evolve_density(const DensityMatrix& rho, const CMatrix& unitary) {
  require_same_dim(rho.dim(), static_cast<int>(unitary.rows()), "evolve_density");
  CMatrix next = unitary * rho.entries() * unitary.adjoint();
  next = 0.5 * (next + next.adjoint()).eval();
  return DensityMatrix(std::move(next), DensityMatrix::Unchecked{});
}

inline DensityMatrix evolve_density(const DensityMatrix& rho, const HermitianOperator& h, double dt) {
  require_same_dim(rho.dim(), h.dim(), "evolve_density");
  return evolve_density(rho, propagator(h, dt));
}

enum class ChannelKind { BitFlip, PhaseFlip, AmplitudeDamping };

inline std::string_view to_string(ChannelKind k) {
  switch (k) {
    case ChannelKind::BitFlip:
      return "bitflip";
    case ChannelKind::PhaseFlip:
      return "phaseflip";
    case ChannelKind::AmplitudeDamping:
      return "amplitude-damping";
  }
  return "?";
}

inline ChannelKind parse_channel_kind(std::string_view name) {
  if (name == "bitflip" || name == "bit-flip") return ChannelKind::BitFlip;
  if (name == "phaseflip" || name == "phase-flip") return ChannelKind::PhaseFlip;
  if (name == "amplitude-damping" || name == "amplitudedamping") return ChannelKind::AmplitudeDamping;
  throw TaskError("unknown channel kind '" + std::string(name) +
                  "' (expected bitflip, phaseflip or amplitude-damping)");
}

struct KrausChannel {
  ChannelKind kind = ChannelKind::BitFlip;
  double p = 0.0;
  std::vector<CMatrix> operators;

  int dim() const { return operators.empty() ? 0 : static_cast<int>(operators.front().rows()); }

  // sum_m E_m^dagger E_m, which must be the identity.
  CMatrix completeness() const {
    CMatrix sum = CMatrix::Zero(dim(), dim());
    for (const auto& e : operators) sum += e.adjoint() * e;
    return sum;
  }
};

inline KrausChannel make_channel(ChannelKind kind, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw TaskError("channel parameter p must lie in [0, 1]");
  KrausChannel ch{kind, p, {}};
  switch (kind) {
    case ChannelKind::BitFlip:
      ch.operators = {std::sqrt(1.0 - p) * pauli::identity(), std::sqrt(p) * pauli::x()};
      break;
    case ChannelKind::PhaseFlip:
      ch.operators = {std::sqrt(1.0 - p) * pauli::identity(), std::sqrt(p) * pauli::z()};
      break;
    case ChannelKind::AmplitudeDamping: {
      CMatrix e0(2, 2), e1(2, 2);
      e0 << 1.0, 0.0, 0.0, std::sqrt(1.0 - p);
      e1 << 0.0, std::sqrt(p), 0.0, 0.0;
      ch.operators = {e0, e1};
      break;
    }
  }
  return ch;
}

inline DensityMatrix apply_channel(const DensityMatrix& rho, const KrausChannel& ch) {
  require_same_dim(rho.dim(), ch.dim(), "apply_channel");
  CMatrix out = CMatrix::Zero(rho.dim(), rho.dim());
  for (const auto& e : ch.operators) out += e * rho.entries() * e.adjoint();
  out = 0.5 * (out + out.adjoint()).eval();
  return DensityMatrix(std::move(out), DensityMatrix::Unchecked{});
}

// Kraus maps applied one after another. A single-qubit channel has one stage;
// the two-qubit lift has one stage per qubit.
struct NoiseModel {
  std::vector<KrausChannel> stages;

  int dim() const { return stages.empty() ? 0 : stages.front().dim(); }
  bool empty() const { return stages.empty(); }
};

inline DensityMatrix apply_noise(const DensityMatrix& rho, const NoiseModel& noise) {
  DensityMatrix out = rho;
  for (const auto& stage : noise.stages) out = apply_channel(out, stage);
  return out;
}

// ch (x) I followed by I (x) ch, with the same p on both qubits.
inline NoiseModel lift_channel_two_qubit(const KrausChannel& ch) {
  require_same_dim(ch.dim(), 2, "lift_channel_two_qubit");
  KrausChannel first{ch.kind, ch.p, {}};
  KrausChannel second{ch.kind, ch.p, {}};
  for (const auto& e : ch.operators) {
    first.operators.push_back(kron(e, pauli::identity()));
    second.operators.push_back(kron(pauli::identity(), e));
  }
  return NoiseModel{{std::move(first), std::move(second)}};
}

inline NoiseModel make_noise(ChannelKind kind, double p, int qubits) {
  KrausChannel ch = make_channel(kind, p);
  if (qubits == 1) return NoiseModel{{std::move(ch)}};
  if (qubits == 2) return lift_channel_two_qubit(ch);
  throw TaskError("noise model supports 1 or 2 qubits");
}

struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

inline BlochVector bloch_coordinates(const DensityMatrix& rho) {
  if (rho.dim() != 2) throw TaskError("Bloch coordinates are defined for single-qubit states only");
  const Complex off = rho(0, 1);
  return {2.0 * off.real(), -2.0 * off.imag(), (rho(0, 0) - rho(1, 1)).real()};
}

inline BlochVector bloch_coordinates(const PureState& s) {
  if (s.dim() != 2) throw TaskError("Bloch coordinates are defined for single-qubit states only");
  const Complex c = std::conj(s[0]) * s[1];
  return {2.0 * c.real(), 2.0 * c.imag(), std::norm(s[0]) - std::norm(s[1])};
}

// Global phase chosen so the first amplitude with modulus > 1e-9 is real and non-negative.
inline PureState phase_fix(const PureState& s) {
  for (int i = 0; i < s.dim(); ++i) {
    const double mag = std::abs(s[i]);
    if (mag > 1e-9) {
      const Complex phase = std::conj(s[i]) / mag;
      CVector v = s.amplitudes() * phase;
      v(i) = mag;
      return PureState(std::move(v));
    }
  }
  return s;
}

}  // namespace pulseprep
