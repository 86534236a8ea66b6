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

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "qanneal/mc.hpp"

namespace qanneal {
namespace {

bool same_records(const std::vector<RunRecord>& a, const std::vector<RunRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r].seed != b[r].seed || a[r].observations.size() != b[r].observations.size()) return false;
    for (std::size_t i = 0; i < a[r].observations.size(); ++i) {
      const auto& x = a[r].observations[i];
      const auto& y = b[r].observations[i];
      if (x.mc_step != y.mc_step || x.avg_energy != y.avg_energy || x.ground_hits != y.ground_hits ||
          x.magnetization != y.magnetization)
        return false;
    }
  }
  return true;
}

TEST(HeatBath, SymmetryAndRange) {
  for (double x : {-800.0, -3.0, -0.1, 0.0, 0.1, 3.0, 800.0}) {
    const double p = heat_bath_probability(x);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    EXPECT_NEAR(p + heat_bath_probability(-x), 1.0, 1e-15);
  }
  EXPECT_DOUBLE_EQ(heat_bath_probability(0.0), 0.5);
}

TEST(Trotter, ReferenceValue) { EXPECT_NEAR(trotter_coupling(0.0316228, 1.0, 100), 1.73, 0.01); }

TEST(Trotter, DecreasingInGamma) {
  double prev = std::numeric_limits<double>::infinity();
  for (double g = 1e-3; g < 10; g *= 1.5) {
    const double v = trotter_coupling(g, 1.0, 16);
    EXPECT_LT(v, prev);
    EXPECT_GE(v, 0.0);
    prev = v;
  }
}

TEST(Trotter, LargeArgumentAsymptote) {
  for (double be : {0.5, 1.0, 2.0}) {
    const double g = 10.0 / be;
    EXPECT_NEAR(trotter_coupling(g, be, 8) / (std::exp(-2.0 * be * g) / be), 1.0, 1e-8);
  }
}

TEST(Trotter, Errors) {
  EXPECT_THROW((void)trotter_coupling(0.0, 1.0, 4), DomainError);
  EXPECT_THROW((void)trotter_coupling(-1.0, 1.0, 4), DomainError);
  EXPECT_THROW((void)trotter_coupling(1.0, 0.0, 4), DomainError);
}

TEST(SampleSteps, IncreasingAndClosed) {
  const auto s = mc_sample_steps(1000, 10);
  ASSERT_GE(s.size(), 2u);
  EXPECT_EQ(s[0], 0u);
  EXPECT_EQ(s[1], 1u);
  EXPECT_EQ(s.back(), 1000u);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
}

TEST(Sa, FrozenAtGroundState) {
  const auto sk = make_sk(8, 7);
  const auto cert = enumerate_ground_states(sk);
  McOptions opts;
  opts.initial = cert.configurations[0];
  opts.ground_energy = cert.energy;
  const auto recs = run_sa(sk, Schedule::constant(1e-6), 1000, 3, 5, opts);
  for (const auto& r : recs)
    for (const auto& o : r.observations) {
      EXPECT_EQ(o.ground_hits, 1);
      EXPECT_NEAR(o.avg_energy, cert.energy, 1e-12);
    }
}

TEST(Sa, ThreeSpinBoltzmannFrequencies) {
  const auto inst = make_sk(3, 21, 0.3);
  const double temp = 0.8;
  std::vector<double> w(8);
  double z = 0.0;
  for (std::uint64_t x = 0; x < 8; ++x) z += w[x] = std::exp(-inst.energy(SpinConfiguration::from_index(3, x)) / temp);
  SaChain chain(inst, SpinConfiguration::all_up(3), 77);
  for (int k = 0; k < 1000; ++k) chain.step(temp);
  const int batches = 100, per = 4000;
  std::vector<std::vector<double>> freq(8, std::vector<double>(batches, 0.0));
  for (int b = 0; b < batches; ++b)
    for (int k = 0; k < per; ++k) {
      chain.step(temp);
      freq[chain.configuration().to_index()][b] += 1.0 / per;
    }
  for (int x = 0; x < 8; ++x) {
    double m = 0.0, m2 = 0.0;
    for (double f : freq[x]) m += f, m2 += f * f;
    m /= batches;
    const double se = std::sqrt((m2 / batches - m * m) / (batches - 1));
    EXPECT_LE(std::abs(m - w[x] / z), 3.0 * se) << "state " << x;
  }
}

TEST(Sa, EnergyTracksFlips) {
  const auto ea = make_ea2d(4, true, 3);
  SaChain chain(ea, SpinConfiguration::all_up(16), 9);
  for (int k = 0; k < 200; ++k) {
    chain.step(1.5);
    ASSERT_NEAR(chain.energy(), ea.energy(chain.configuration()), 1e-9);
  }
}

TEST(Sa, ReproducibleAndThreadInvariant) {
  const auto sk = make_sk(8, 7);
  McOptions one;
  McOptions four;
  four.threads = 4;
  const auto a = run_sa(sk, Schedule::inverse_sqrt(3.0), 200, 6, 42, one);
  const auto b = run_sa(sk, Schedule::inverse_sqrt(3.0), 200, 6, 42, one);
  const auto c = run_sa(sk, Schedule::inverse_sqrt(3.0), 200, 6, 42, four);
  EXPECT_TRUE(same_records(a, b));
  EXPECT_TRUE(same_records(a, c));
  EXPECT_FALSE(same_records(a, run_sa(sk, Schedule::inverse_sqrt(3.0), 200, 6, 43, one)));
}

TEST(Sa, RecordShape) {
  const auto sk = make_sk(6, 1);
  McOptions opts;
  opts.ground_energy = enumerate_ground_states(sk).energy;
  const auto recs = run_sa(sk, Schedule::inverse_sqrt(3.0), 500, 2, 1, opts);
  for (const auto& r : recs) {
    EXPECT_EQ(r.time_scale, 1);
    EXPECT_EQ(r.observations.back().mc_step, 500u);
    for (std::size_t i = 0; i < r.observations.size(); ++i) {
      const auto& o = r.observations[i];
      EXPECT_EQ(o.rescaled_time, static_cast<double>(o.mc_step));
      EXPECT_LE(o.ground_hits, o.n_replicas);
      if (i > 0) {
        EXPECT_GT(o.mc_step, r.observations[i - 1].mc_step);
      }
    }
  }
  EXPECT_THROW((void)run_sa(sk, Schedule::inverse(1.0), 0, 1, 1), ContractError);
}

TEST(Qmc, RecordShapeAndEnergyExcludesTrotterTerm) {
  const auto sk = make_sk(6, 2);
  const int m = 8;
  QmcSession s(sk, Schedule::inverse_sqrt(3.0), 1.0, m, 11);
  s.run_to(50);
  const auto o = s.observe(std::nullopt);
  double e = 0.0;
  for (const auto& c : s.slice_configurations()) e += sk.energy(c);
  EXPECT_NEAR(o.avg_energy, e / m, 1e-9);
  EXPECT_EQ(o.rescaled_time, 50.0 * m);
  EXPECT_EQ(o.n_replicas, m);
  const auto rec = run_qmc(sk, Schedule::inverse_sqrt(3.0), 1.0, m, 100, 11);
  EXPECT_EQ(rec.time_scale, m);
  for (const auto& ob : rec.observations) EXPECT_EQ(ob.rescaled_time, static_cast<double>(m * ob.mc_step));
  EXPECT_THROW(QmcSession(sk, Schedule::inverse(1.0), 1.0, 1, 1), ContractError);
  EXPECT_THROW(QmcSession(sk, Schedule::inverse(1.0), 0.0, 4, 1), ContractError);
}

TEST(Qmc, EnsembleThreadInvariant) {
  const auto sk = make_sk(6, 2);
  McOptions par;
  par.threads = 3;
  const auto a = run_qmc_ensemble(sk, Schedule::inverse_sqrt(3.0), 1.0, 8, 100, 5, 7);
  const auto b = run_qmc_ensemble(sk, Schedule::inverse_sqrt(3.0), 1.0, 8, 100, 5, 7, par);
  EXPECT_TRUE(same_records(a, b));
}

TEST(Qmc, CheckpointResumeIsExact) {
  const auto sk = make_sk(7, 4);
  QmcSession straight(sk, Schedule::inverse_sqrt(3.0), 1.0, 6, 19);
  straight.run_to(120);
  QmcSession first(sk, Schedule::inverse_sqrt(3.0), 1.0, 6, 19);
  first.run_to(47);
  std::stringstream buf;
  first.save(buf);
  auto resumed = QmcSession::load(buf, sk);
  EXPECT_EQ(resumed.step_count(), 47u);
  resumed.run_to(120);
  EXPECT_EQ(resumed.lattice().spins, straight.lattice().spins);
  const auto a = resumed.observe(std::nullopt), b = straight.observe(std::nullopt);
  EXPECT_EQ(a.avg_energy, b.avg_energy);
}

TEST(Qmc, CheckpointRejectsForeignOrCorrupt) {
  const auto sk = make_sk(7, 4);
  QmcSession s(sk, Schedule::inverse_sqrt(3.0), 1.0, 4, 1);
  s.run_to(3);
  std::stringstream buf;
  s.save(buf);
  const std::string bytes = buf.str();
  std::stringstream other(bytes);
  EXPECT_THROW((void)QmcSession::load(other, make_sk(7, 5)), IoError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW((void)QmcSession::load(truncated, sk), IoError);
  std::stringstream junk("not a checkpoint");
  EXPECT_THROW((void)QmcSession::load(junk, sk), IoError);
}

TEST(Quench, GroundStateIsFixedPoint) {
  const auto sk = make_sk(10, 3);
  const auto cert = enumerate_ground_states(sk);
  const auto q = zero_t_quench(sk, cert.configurations[0], 100, 1);
  EXPECT_NEAR(sk.energy(q), cert.energy, 1e-12);
}

TEST(Quench, DescendsToSingleFlipMinimum) {
  const auto ea = make_ea2d(8, true, 5);
  Rng rng(2);
  for (int k = 0; k < 30; ++k) {
    const auto start = SpinConfiguration::random(64, rng);
    const auto q = zero_t_quench(ea, start, kQuenchSweeps, 100 + k);
    EXPECT_LE(ea.energy(q), ea.energy(start));
    for (int i = 0; i < 64; ++i) EXPECT_GE(ea.flip_delta(q, i), -kEnergyTolerance);
  }
}

TEST(Quench, AnnealedSlicesCollapseToOneConfiguration) {
  const auto ea = make_ea2d(25, true, 2026);
  const int m = 20;
  QmcSession s(ea, Schedule::inverse_sqrt(3.0), 1.0, m, 8);
  s.run_to(10000);
  std::map<SpinConfiguration, int> counts;
  Rng seeds(4);
  for (const auto& c : s.slice_configurations()) ++counts[zero_t_quench(ea, c, kQuenchSweeps, seeds.next_u64())];
  int top = 0;
  for (const auto& [cfg, n] : counts) top = std::max(top, n);
  EXPECT_GT(static_cast<double>(top) / m, 0.8);
}

TEST(Quench, FinalQuenchOptionOnlyLowersEnergy) {
  const auto ea = make_ea2d(6, true, 1);
  McOptions plain, quenched;
  quenched.final_zero_t_quench = true;
  const auto a = run_sa(ea, Schedule::inverse_sqrt(3.0), 300, 4, 3, plain);
  const auto b = run_sa(ea, Schedule::inverse_sqrt(3.0), 300, 4, 3, quenched);
  for (std::size_t r = 0; r < a.size(); ++r) {
    EXPECT_LE(b[r].observations.back().avg_energy, a[r].observations.back().avg_energy + kEnergyTolerance);
  }
}

TEST(Merge, OrderIndependent) {
  const auto sk = make_sk(6, 2);
  McOptions opts;
  opts.ground_energy = enumerate_ground_states(sk).energy;
  auto recs = run_sa(sk, Schedule::inverse_sqrt(3.0), 300, 9, 5, opts);
  const auto a = merge_records(recs);
  std::mt19937 g(1);
  std::shuffle(recs.begin(), recs.end(), g);
  const auto b = merge_records(recs);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(a.points[i].probability, b.points[i].probability);
    EXPECT_EQ(a.points[i].mean_energy, b.points[i].mean_energy);
    EXPECT_EQ(a.points[i].energy_stderr, b.points[i].energy_stderr);
  }
  EXPECT_EQ(a.n_records, 9);
}

TEST(Merge, RejectsMismatchedGrids) {
  const auto sk = make_sk(5, 2);
  auto a = run_sa(sk, Schedule::inverse(1.0), 100, 1, 1);
  auto b = run_sa(sk, Schedule::inverse(1.0), 200, 1, 2);
  a.insert(a.end(), b.begin(), b.end());
  EXPECT_THROW((void)merge_records(a), ContractError);
  EXPECT_THROW((void)merge_records({}), ContractError);
}

TEST(Pimc, PolarizesAlongField) {
  const auto f = make_ferromagnet(4, 0.3, 0.1);
  const auto res = run_pimc(f, Schedule::inverse(3.0), 100.0, 20, 500, 500, 3, enumerate_ground_states(f).energy);
  EXPECT_GT(res.center_magnetization, 0.8);
  EXPECT_GT(res.center_probability, 0.8);
  EXPECT_EQ(res.record.observations.size(), 500u);
  EXPECT_THROW((void)run_pimc(f, Schedule::inverse(3.0), 1.0, 5, 1, 1, 1), ContractError);
}

TEST(QuenchReport, RowsAndMatchedStart) {
  const auto ea = make_ea2d(4, true, 9);
  QuenchSetup q;
  q.steps = 200;
  q.n_runs = 2;
  q.m = 4;
  q.anneal = Schedule::inverse_sqrt(matched_coefficient(ScheduleForm::InverseSqrt, q.value, 200));
  const auto rows = quench_vs_anneal_report(ea, q);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].method, "sa_anneal");
  EXPECT_EQ(rows[3].method, "gamma_quench");
  for (const auto& r : rows) EXPECT_EQ(r.series.points.size(), rows[0].series.points.size());
  EXPECT_NEAR(q.anneal(200), q.value, 1e-15);
}

}  // namespace
}  // namespace qanneal
