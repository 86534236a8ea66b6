/*
   Copyright 2026 The qanneal Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/
#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <bit>
#include <cmath>

#include "qanneal/exact_dynamics.hpp"

namespace qanneal {
namespace {

// Transverse-field Hamiltonian assembled from Kronecker products of Pauli
// matrices; spin k is tensor factor k counted from the least significant bit.
Eigen::MatrixXd kron_hamiltonian(const IsingInstance& inst, double gamma) {
  const int n = inst.n_spins();
  Eigen::Matrix2d sz, sx, id;
  sz << 1, 0, 0, -1;
  sx << 0, 1, 1, 0;
  id.setIdentity();
  auto embed = [&](std::vector<std::pair<int, Eigen::Matrix2d>> ops) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Ones(1, 1);
    for (int k = n - 1; k >= 0; --k) {
      Eigen::Matrix2d f = id;
      for (auto& [site, op] : ops)
        if (site == k) f = op;
      Eigen::MatrixXd next(m.rows() * 2, m.cols() * 2);
      for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) next.block(2 * r, 2 * c, 2, 2) = m(r, c) * f;
      m = next;
    }
    return m;
  };
  const Eigen::Index dim = Eigen::Index{1} << n;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& b : inst.bonds()) h -= b.coupling * embed({{b.i, sz}, {b.j, sz}});
  for (int k = 0; k < n; ++k) h -= inst.field() * embed({{k, sz}}) + gamma * embed({{k, sx}});
  return h;
}

std::vector<double> boltzmann_direct(const IsingInstance& inst, double temp) {
  const std::uint64_t dim = std::uint64_t{1} << inst.n_spins();
  std::vector<double> w(dim);
  double z = 0.0;
  for (std::uint64_t x = 0; x < dim; ++x) z += w[x] = std::exp(-inst.energy(SpinConfiguration::from_index(inst.n_spins(), x)) / temp);
  for (auto& v : w) v /= z;
  return w;
}

IsingInstance random_three(Rng& rng) {
  std::vector<Bond> bonds;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) bonds.push_back({i, j, rng.normal()});
  return IsingInstance(3, bonds, 0.5 * rng.normal());
}

TEST(Hamiltonian, SingleSpinActions) {
  const IsingInstance one(1, {}, 0.1);
  const auto up = QuantumState::basis(1, 0);
  const auto d = apply_hamiltonian(one, 0.0, up);
  EXPECT_NEAR(d.amplitudes[0].real(), -0.1, 1e-15);
  EXPECT_EQ(d.amplitudes[1], cdouble(0.0));
  const IsingInstance bare(1, {}, 0.0);
  const auto f = apply_hamiltonian(bare, 1.0, up);
  EXPECT_EQ(f.amplitudes[0], cdouble(0.0));
  EXPECT_NEAR(f.amplitudes[1].real(), -1.0, 1e-15);
}

TEST(Hamiltonian, UniformExpectationOnFerromagnet) {
  const auto f = make_ferromagnet(8, 1.0 / 7.0);
  const double gamma = 0.7;
  const auto psi = QuantumState::uniform(8);
  const auto hpsi = apply_hamiltonian(f, gamma, psi);
  cdouble e = 0.0;
  for (std::size_t x = 0; x < psi.dim(); ++x) e += std::conj(psi.amplitudes[x]) * hpsi.amplitudes[x];
  EXPECT_NEAR(e.real(), -gamma * 8, 1e-12);
  EXPECT_NEAR(e.imag(), 0.0, 1e-14);
}

TEST(Hamiltonian, MatrixFreeEqualsKroneckerDense) {
  Rng rng(31);
  for (int n = 2; n <= 4; ++n) {
    const auto inst = make_sk(n, 100 + n);
    const double gamma = 0.37;
    const Eigen::MatrixXd h = kron_hamiltonian(inst, gamma);
    EXPECT_LT((h - dense_hamiltonian(inst, gamma)).cwiseAbs().maxCoeff(), 1e-12);
    QuantumState psi{n, std::vector<cdouble>(std::size_t{1} << n)};
    for (auto& a : psi.amplitudes) a = cdouble(rng.normal(), rng.normal());
    const auto got = apply_hamiltonian(inst, gamma, psi);
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
      cdouble want = 0.0;
      for (Eigen::Index c = 0; c < h.cols(); ++c) want += h(r, c) * psi.amplitudes[c];
      EXPECT_LT(std::abs(got.amplitudes[r] - want), 1e-12);
    }
  }
}

TEST(Hamiltonian, SizeMismatch) {
  EXPECT_THROW((void)apply_hamiltonian(make_sk(3, 1), 1.0, QuantumState::uniform(2)), ContractError);
}

TEST(Stationary, AgreesWithIndependentDenseSolve) {
  for (int n = 2; n <= 4; ++n) {
    const auto inst = make_sk(n, 7 * n);
    for (double gamma : {0.05, 0.5, 2.0}) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kron_hamiltonian(inst, gamma));
      const auto gs = stationary_ground_state(inst, gamma);
      EXPECT_NEAR(gs.energy, es.eigenvalues()(0), 1e-10);
      EXPECT_LE(gs.residual, 1e-8);
      double ov = 0.0;
      for (Eigen::Index x = 0; x < es.eigenvectors().rows(); ++x) ov += es.eigenvectors()(x, 0) * gs.state.amplitudes[x].real();
      EXPECT_NEAR(std::abs(ov), 1.0, 1e-10);
    }
  }
}

TEST(Stationary, LanczosMatchesDense) {
  const auto inst = make_sk(9, 3);
  TransverseIsingOperator op(inst);
  for (double gamma : {0.1, 1.0}) {
    const auto [v, e] = detail::lanczos_lowest(op, gamma, 1e-10);
    const auto gs = stationary_ground_state(inst, gamma);
    EXPECT_NEAR(e, gs.energy, 1e-9);
  }
  const auto big = make_sk(12, 4);
  const auto gs = stationary_ground_state(big, 0.3);
  EXPECT_LE(gs.residual, 1e-8);
  EXPECT_NEAR(gs.state.norm2(), 1.0, 1e-12);
}

TEST(Stationary, Limits) {
  const auto inst = make_sk(6, 2);
  const auto wide = stationary_ground_state(inst, 1e3);
  double ov = 0.0;
  for (const auto& a : wide.state.amplitudes) ov += a.real() / 8.0;
  EXPECT_GE(ov * ov, 0.999);
  const auto cert = enumerate_ground_states(inst);
  ASSERT_EQ(cert.configurations.size(), 1u);
  const auto zero = stationary_ground_state(inst, 0.0);
  EXPECT_NEAR(zero.state.amplitudes[cert.configurations[0].to_index()].real(), 1.0, 1e-15);
  // phase convention: largest-magnitude amplitude real positive
  const auto mid = stationary_ground_state(inst, 0.4);
  std::size_t arg = 0;
  for (std::size_t x = 0; x < mid.state.dim(); ++x)
    if (std::abs(mid.state.amplitudes[x]) > std::abs(mid.state.amplitudes[arg])) arg = x;
  EXPECT_GT(mid.state.amplitudes[arg].real(), 0.0);
}

TEST(Stationary, SecondOrderPerturbationLaw) {
  const auto f = make_ferromagnet(8, 1.0 / 7.0);
  const auto ground = ground_indices(enumerate_ground_states(f));
  double prev_err = 1.0;
  for (double gamma : {0.04, 0.02, 0.01}) {
    const double miss = 1.0 - stationary_qa_probability(f, gamma, ground);
    const double err = std::abs(miss / perturbative_qa_miss(f, gamma) - 1.0);
    EXPECT_LT(err, prev_err);
    prev_err = err;
  }
  EXPECT_LT(prev_err, 0.01);
}

TEST(Schrodinger, EigenstateStaysPut) {
  const auto inst = make_sk(5, 9);
  const auto cert = enumerate_ground_states(inst);
  EvolutionOptions opts;
  opts.initial = QuantumState::basis(5, cert.configurations[0].to_index());
  const auto traj = evolve_schrodinger(inst, Schedule::constant(0.0), 50.0, log_spaced_times(0.1, 50.0, 5), opts);
  // RK4 is not exactly unitary; the loss is bounded by the norm tolerance.
  for (const auto& s : traj.samples) EXPECT_NEAR(s.p, 1.0, opts.norm_tolerance);
  EXPECT_EQ(traj.label, TrajectoryLabel::P_QA);
}

TEST(Schrodinger, NormDriftAndMonotoneTimes) {
  const auto f = make_ferromagnet(6, 0.2);
  const auto traj = evolve_schrodinger(f, Schedule::inverse_sqrt(3.0), 100.0, log_spaced_times(1.0, 100.0, 10));
  EXPECT_LE(traj.diagnostics.max_norm_drift, 1e-6);
  for (std::size_t k = 1; k < traj.samples.size(); ++k) EXPECT_GT(traj.samples[k].t, traj.samples[k - 1].t);
  for (const auto& s : traj.samples) {
    EXPECT_GE(s.p, 0.0);
    EXPECT_LE(s.p, 1.0);
  }
}

TEST(Schrodinger, TightToleranceRaisesIntegrationError) {
  EvolutionOptions opts;
  opts.step_factor = 0.5;
  opts.norm_tolerance = 1e-14;
  EXPECT_THROW((void)evolve_schrodinger(make_sk(4, 1), Schedule::inverse(1.0), 10.0, {}, opts), IntegrationError);
}

TEST(Schrodinger, RefusesOversize) {
  EXPECT_THROW((void)evolve_schrodinger(make_sk(15, 1), Schedule::inverse(1.0), 1.0, {}), SizeLimitError);
  EXPECT_THROW((void)master_evolve(make_sk(20, 1), Schedule::inverse(1.0), 1.0, {}), SizeLimitError);
}

TEST(ImaginaryTime, InitialOverlap) {
  const auto f = make_ferromagnet(8, 1.0 / 7.0, 0.0);
  const std::vector<double> times{0.0};
  const auto traj = evolve_imaginary_time(f, Schedule::constant(0.5), 0.0, times);
  ASSERT_FALSE(traj.samples.empty());
  EXPECT_NEAR(traj.samples.front().p, 2.0 / 256.0, 1e-15);
}

TEST(ImaginaryTime, ConvergesToStationaryState) {
  const auto inst = make_sk(6, 11);
  const double gamma = 0.5;
  const auto ground = ground_indices(enumerate_ground_states(inst));
  const auto traj = evolve_imaginary_time(inst, Schedule::constant(gamma), 200.0, {});
  EXPECT_NEAR(traj.final_p(), stationary_qa_probability(inst, gamma, ground), 1e-6);
  EXPECT_EQ(traj.label, TrajectoryLabel::P_QA_imaginary);
}

TEST(ImaginaryTime, FastScheduleStillReachesGround) {
  const auto sk = make_sk(8, 7);
  const auto s = Schedule::inverse(3.0);
  const auto imag = evolve_imaginary_time(sk, s, 100.0, {});
  const auto real = evolve_schrodinger(sk, s, 100.0, {});
  EXPECT_GT(imag.final_p(), 0.99);
  EXPECT_LT(real.final_p(), imag.final_p());
}

TEST(Master, GeneratorStructure) {
  Rng rng(2024);
  for (int k = 0; k < 100; ++k) {
    const auto inst = random_three(rng);
    const double temp = 0.2 + 3.0 * rng.uniform();
    const Eigen::MatrixXd l = Eigen::MatrixXd(build_transition_matrix(inst, temp));
    const auto e = diagonal_energies(inst);
    for (int j = 0; j < 8; ++j) {
      EXPECT_NEAR(l.col(j).sum(), 0.0, 1e-12);
      for (int i = 0; i < 8; ++i) {
        if (i == j) continue;
        const int hamming = std::popcount(static_cast<unsigned>(i ^ j));
        if (hamming != 1) {
          EXPECT_EQ(l(i, j), 0.0);
        }
        EXPECT_GE(l(i, j), 0.0);
        // rate j -> i weighted by the source population balances i -> j
        EXPECT_NEAR(l(i, j) * std::exp(-e[j] / temp), l(j, i) * std::exp(-e[i] / temp), 1e-12 * std::exp(-std::min(e[i], e[j]) / temp));
      }
    }
  }
}

TEST(Master, NullVectorIsBoltzmann) {
  Rng rng(99);
  for (int k = 0; k < 20; ++k) {
    const auto inst = random_three(rng);
    const double temp = 0.5 + rng.uniform();
    const Eigen::MatrixXd l = Eigen::MatrixXd(build_transition_matrix(inst, temp));
    Eigen::FullPivLU<Eigen::MatrixXd> lu(l);
    const Eigen::MatrixXd ker = lu.kernel();
    ASSERT_EQ(ker.cols(), 1);
    const Eigen::VectorXd p = ker.col(0) / ker.col(0).sum();
    const auto want = boltzmann_direct(inst, temp);
    for (int x = 0; x < 8; ++x) EXPECT_NEAR(p(x), want[x], 1e-10);
  }
}

TEST(Master, EqualEnergiesGiveHalfRate) {
  EXPECT_DOUBLE_EQ(detail::heat_bath_rate(1.3, 1.3, 0.7), 0.5);
  EXPECT_THROW((void)build_transition_matrix(make_sk(3, 1), 0.0), DomainError);
}

TEST(Master, ConstantTemperatureRelaxesToBoltzmann) {
  const auto inst = make_sk(5, 3);
  const double temp = 1.0;
  const auto traj = master_evolve(inst, Schedule::constant(temp), 400.0, {});
  EXPECT_NEAR(traj.final_p(), boltzmann_ground_probability(inst, temp), 1e-8);
  EXPECT_EQ(traj.label, TrajectoryLabel::P_SA);
}

TEST(Boltzmann, Limits) {
  const auto deg = make_ferromagnet(4, 0.3, 0.0);
  EXPECT_NEAR(boltzmann_ground_probability(deg, 1e9), 2.0 / 16.0, 1e-8);
  const auto sk = make_sk(6, 5);
  EXPECT_NEAR(boltzmann_ground_probability(sk, 1e-3), 1.0, 1e-6);
  const auto three = make_sk(3, 8);
  const auto w = boltzmann_direct(three, 0.8);
  const auto cert = enumerate_ground_states(three);
  double want = 0.0;
  for (auto idx : ground_indices(cert)) want += w[idx];
  EXPECT_NEAR(boltzmann_ground_probability(three, 0.8), want, 1e-14);
}

TEST(Correlation, FrustratedPair) {
  const auto f = make_frustrated8();
  EXPECT_LT(correlation_pair(f, 10.0, 2, 5, CorrelationKind::ThermalT), 0.0);
  EXPECT_GT(correlation_pair(f, 0.1, 2, 5, CorrelationKind::ThermalT), 0.0);
  EXPECT_EQ(correlation_pair(f, 1.0, 3, 3, CorrelationKind::QuantumGamma), 1.0);
  const double lo = correlation_pair(f, 0.05, 2, 5, CorrelationKind::QuantumGamma);
  const double hi = correlation_pair(f, 20.0, 2, 5, CorrelationKind::QuantumGamma);
  EXPECT_LT(lo * hi, 0.0);
  for (double v : {lo, hi}) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW((void)correlation_pair(f, 1.0, 0, 8, CorrelationKind::ThermalT), ContractError);
}

TEST(StationaryTrajectory, LabelsAndValues) {
  const auto f = make_ferromagnet(4, 1.0 / 3.0);
  const auto times = log_spaced_times(1.0, 100.0, 2);
  const auto sa = stationary_trajectory(f, Schedule::inverse_log(3.0), times, TrajectoryLabel::P_SA_stationary);
  ASSERT_EQ(sa.samples.size(), times.size());
  EXPECT_NEAR(sa.samples.back().p, boltzmann_ground_probability(f, 3.0 / std::log1p(100.0)), 1e-15);
  EXPECT_THROW((void)stationary_trajectory(f, Schedule::inverse_log(3.0), times, TrajectoryLabel::P_QA), ContractError);
}

TEST(LogGrid, EndpointsAndDensity) {
  const auto g = log_spaced_times(1.0, 1000.0, 50);
  EXPECT_EQ(g.size(), 151u);
  EXPECT_EQ(g.front(), 1.0);
  EXPECT_EQ(g.back(), 1000.0);
  EXPECT_THROW((void)log_spaced_times(0.0, 1.0), ContractError);
}

}  // namespace
}  // namespace qanneal
