#include <gtest/gtest.h>

#include "pulseprep/control.hpp"
#include "support/oracles.hpp"

using namespace pulseprep;

namespace {

double max_diff(const CMatrix& a, const CMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(SingleQubitHamiltonian, Examples) {
  EXPECT_LT(max_diff(single_qubit_hamiltonian(0, 1).entries(), pauli::x()), 1e-15);
  CMatrix m(2, 2);
  m << 1, 1, 1, -1;
  EXPECT_LT(max_diff(single_qubit_hamiltonian(1, 1).entries(), m), 1e-15);
  m << 7, 1, 1, -7;
  EXPECT_LT(max_diff(single_qubit_hamiltonian(7, 1).entries(), m), 1e-15);
  EXPECT_THROW(single_qubit_hamiltonian(-1, 1), TaskError);
}

TEST(TwoQubitHamiltonian, ZeroCouplingIsHalfTransverseField) {
  const CMatrix expected = 0.5 * (kron(pauli::x(), pauli::identity()) + kron(pauli::identity(), pauli::x()));
  EXPECT_LT(max_diff(two_qubit_hamiltonian(0, 0, 1, 1).entries(), expected), 1e-15);
}

// Direct substitution at J1 = J2 = 1: J12 = 1/2 and the coupling term only touches |T0T0>.
TEST(TwoQubitHamiltonian, HandExpandedUnitCouplings) {
  CMatrix expected = CMatrix::Zero(4, 4);
  expected(0, 0) = 1.0;
  expected(3, 3) = -0.5;
  for (auto [i, j] : {std::pair{0, 1}, {2, 3}, {0, 2}, {1, 3}}) {
    expected(i, j) = 0.5;
    expected(j, i) = 0.5;
  }
  const CMatrix h = two_qubit_hamiltonian(1, 1, 1, 1).entries();
  EXPECT_LT(max_diff(h, expected), 1e-15);
  EXPECT_LT(max_diff(h, h.adjoint()), 1e-15);
}

TEST(TwoQubitHamiltonian, CouplingScalesAsProduct) {
  // At J1 = J2 = 4, J12 = 8: (3,3) = 1/2 (-4 - 4 + (8/2) * 4) = 4.
  EXPECT_NEAR(two_qubit_hamiltonian(4, 4, 1, 1).entries()(3, 3).real(), 4.0, 1e-15);
  for (int j1 = 1; j1 <= 4; ++j1) {
    for (int j2 = 1; j2 <= 4; ++j2) {
      EXPECT_LT(max_diff(two_qubit_hamiltonian(j1, j2, 1, 1).entries(), oracle::h_two(j1, j2, 1, 1)), 1e-15);
    }
  }
  EXPECT_THROW(two_qubit_hamiltonian(-1, 1, 1, 1), TaskError);
}

TEST(ActionSet, Defaults) {
  const auto a1 = ActionSet::single_qubit();
  ASSERT_EQ(a1.size(), 8);
  for (int j = 0; j < 8; ++j) EXPECT_EQ(a1.value(j)[0], j);
  const auto a2 = ActionSet::two_qubit();
  ASSERT_EQ(a2.size(), 16);
  EXPECT_EQ(a2.value(0), (ActionSet::Value{1, 1}));
  EXPECT_EQ(a2.value(1), (ActionSet::Value{1, 2}));
  EXPECT_EQ(a2.value(4), (ActionSet::Value{2, 1}));
  EXPECT_EQ(a2.value(15), (ActionSet::Value{4, 4}));
  EXPECT_EQ(a1.id(), "J:0,1,2,3,4,5,6,7");
  EXPECT_EQ(a2.channel_range(1), (std::pair<double, double>{1, 4}));
}

TEST(ActionSet, Validation) {
  EXPECT_THROW(ActionSet(1, {{1, 0}, {1, 0}}), TaskError);
  EXPECT_THROW(ActionSet(1, {{-1, 0}}), TaskError);
  EXPECT_THROW(ActionSet(1, {}), TaskError);
  EXPECT_THROW(ActionSet::single_qubit().value(8), TaskError);
  EXPECT_THROW(ActionSet::single_qubit().value(-1), TaskError);
}

TEST(ActionSet, NearestSnapsPerChannel) {
  const auto a1 = ActionSet::single_qubit();
  EXPECT_EQ(a1.nearest({3.4, 0}), 3);
  EXPECT_EQ(a1.nearest({-2, 0}), 0);
  EXPECT_EQ(a1.nearest({100, 0}), 7);
  const auto a2 = ActionSet::two_qubit();
  EXPECT_EQ(a2.nearest({0.2, 3.7}), 3);
  EXPECT_EQ(a2.nearest({2.6, 2.4}), 4 * 2 + 1);
}

TEST(ActionToHamiltonian, Examples) {
  const auto c1 = ControlConfig::single_qubit();
  const auto a1 = ActionSet::single_qubit();
  EXPECT_LT(max_diff(action_to_hamiltonian(0, a1, c1).entries(), single_qubit_hamiltonian(0, 1).entries()), 1e-15);
  EXPECT_LT(max_diff(action_to_hamiltonian(7, a1, c1).entries(), single_qubit_hamiltonian(7, 1).entries()), 1e-15);
  const auto c2 = ControlConfig::two_qubit();
  const auto a2 = ActionSet::two_qubit();
  EXPECT_LT(max_diff(action_to_hamiltonian(0, a2, c2).entries(), two_qubit_hamiltonian(1, 1, 1, 1).entries()),
            1e-15);
  EXPECT_THROW(action_to_hamiltonian(0, a2, c1), MismatchError);
  EXPECT_THROW(action_to_hamiltonian(16, a2, c2), TaskError);
}

TEST(ControlConfig, DefaultsAndValidation) {
  const auto c1 = ControlConfig::single_qubit();
  EXPECT_NEAR(c1.dt, std::numbers::pi / 5, 1e-15);
  EXPECT_EQ(c1.max_steps, 20);
  EXPECT_NO_THROW(c1.validate());
  const auto c2 = ControlConfig::two_qubit();
  EXPECT_NEAR(c2.dt, std::numbers::pi / 2, 1e-15);
  EXPECT_EQ(c2.max_steps, 20);
  EXPECT_EQ(c2.dim(), 4);
  ControlConfig bad = c1;
  bad.max_steps = 19;
  EXPECT_THROW(bad.validate(), TaskError);
  EXPECT_THROW(ControlConfig::defaults(3), TaskError);
}
