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
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "qanneal/error.hpp"
#include "qanneal/ising.hpp"
#include "qanneal/rng.hpp"
#include "qanneal/schedule.hpp"

namespace qanneal {

/// exp(-x) / (1 + exp(-x)) without overflow; heat-bath probability of a move costing x.
inline double heat_bath_probability(double x) {
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

/// Inter-slice coupling Gamma_M = (1 / 2 beta_eff) ln coth(beta_eff Gamma).
/// beta_eff Gamma equals gamma / M with gamma = beta Gamma and beta = M beta_eff,
/// so `m` drops out; it is accepted for interface symmetry.
inline double trotter_coupling(double gamma, double beta_eff, int m = 1) {
  if (!(gamma > 0.0)) throw DomainError("trotter_coupling needs Gamma > 0 (Gamma = 0 freezes the Trotter direction)");
  if (!(beta_eff > 0.0)) throw DomainError("beta_eff must be positive");
  if (m < 1) throw ContractError("Trotter number must be positive");
  const double q = std::exp(-2.0 * beta_eff * gamma);
  // ln coth x = ln(1 + e^{-2x}) - ln(1 - e^{-2x})
  return 0.5 * (std::log1p(q) - std::log1p(-q)) / beta_eff;
}

// ---------------------------------------------------------------------------
// Records

struct Observation {
  std::uint64_t mc_step = 0;
  double rescaled_time = 0.0;
  double avg_energy = 0.0;
  double best_energy = 0.0;
  int ground_hits = 0;
  int n_replicas = 1;
  double magnetization = 0.0;
};

struct RunRecord {
  RngSeed seed = 0;
  int time_scale = 1;  // 1 for SA, M for QA: rescaled_time = time_scale * mc_step
  std::vector<Observation> observations;
};

/// Integer steps in [1, total], `per_decade` per decade on a log axis, with 0 and total.
inline std::vector<std::uint64_t> mc_sample_steps(std::uint64_t total, int per_decade = 50) {
  std::vector<std::uint64_t> out{0};
  if (total == 0) return out;
  const double decades = std::log10(static_cast<double>(total));
  const int n = std::max(1, static_cast<int>(std::ceil(decades * per_decade)));
  for (int k = 0; k <= n; ++k) {
    const auto s = static_cast<std::uint64_t>(std::llround(std::pow(10.0, decades * k / n)));
    if (s >= 1 && s <= total && s != out.back()) out.push_back(s);
  }
  if (out.back() != total) out.push_back(total);
  return out;
}

struct McOptions {
  std::optional<double> ground_energy;          // hit when |E - E0| <= kEnergyTolerance
  std::vector<std::uint64_t> sample_steps;      // empty: mc_sample_steps(mc_steps)
  std::optional<SpinConfiguration> initial;     // SA only; default uniform random
  bool final_zero_t_quench = false;             // descend every replica before the last observation
  int threads = 1;
};

/// Sub-stream slice index reserved for the zero-T finisher.
inline constexpr std::uint64_t kQuenchStream = std::uint64_t{1} << 32;

namespace detail {

inline std::vector<std::uint64_t> resolve_steps(const McOptions& opts, std::uint64_t total) {
  std::vector<std::uint64_t> s = opts.sample_steps.empty() ? mc_sample_steps(total) : opts.sample_steps;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  while (!s.empty() && s.back() > total) s.pop_back();
  if (s.empty() || s.back() != total) s.push_back(total);
  return s;
}

inline bool is_ground(double e, const std::optional<double>& e0) {
  return e0 && std::abs(e - *e0) <= kEnergyTolerance;
}

/// Runs body(r) for r in [0, n); results are written by index, so the outcome
/// does not depend on the thread count.
inline void parallel_runs(int n, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int r = 0; r < n; ++r) body(r);
    return;
  }
  std::vector<std::jthread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (int r = w; r < n; r += threads) body(r);
    });
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Zero-temperature quench

/// Random-site descent: strictly downhill flips always, ties with probability 1/2.
/// Stops after `sweeps` sweeps or at the first sweep boundary with no downhill flip.
/// Sweep cap used by the final-quench option; descent on N <= 10^4 spins stops long before.
inline constexpr std::uint64_t kQuenchSweeps = 100000;

inline SpinConfiguration zero_t_quench(const IsingInstance& instance, const SpinConfiguration& start,
                                       std::uint64_t sweeps, RngSeed seed) {
  instance.check_size(start);
  const int n = instance.n_spins();
  std::vector<int> s(start.spins().begin(), start.spins().end());
  Rng rng(seed);
  for (std::uint64_t sw = 0; sw < sweeps; ++sw) {
    for (int trial = 0; trial < n; ++trial) {
      const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      const double de = 2.0 * s[i] * instance.local_field(s, i);
      if (de < -kEnergyTolerance || (std::abs(de) <= kEnergyTolerance && rng.uniform() < 0.5)) s[i] = -s[i];
    }
    bool downhill = false;
    for (int i = 0; i < n && !downhill; ++i) downhill = 2.0 * s[i] * instance.local_field(s, i) < -kEnergyTolerance;
    if (!downhill) break;
  }
  return SpinConfiguration(std::move(s));
}

// ---------------------------------------------------------------------------
// Classical SA

/// Single heat-bath chain: N random-site trials per MC step.
class SaChain {
 public:
  SaChain(const IsingInstance& instance, SpinConfiguration start, RngSeed seed)
      : inst_(&instance), spins_(start.spins().begin(), start.spins().end()), rng_(seed) {
    instance.check_size(start);
    energy_ = instance.energy(start);
  }

  void step(double temperature) {
    const int n = inst_->n_spins();
    for (int trial = 0; trial < n; ++trial) {
      const int i = static_cast<int>(rng_.below(static_cast<std::uint64_t>(n)));
      const double de = 2.0 * spins_[i] * inst_->local_field(spins_, i);
      if (rng_.uniform() < heat_bath_probability(de / temperature)) {
        spins_[i] = -spins_[i];
        energy_ += de;
      }
    }
  }

  double energy() const noexcept { return energy_; }
  SpinConfiguration configuration() const { return SpinConfiguration(spins_); }
  double magnetization() const {
    double m = 0.0;
    for (int s : spins_) m += s;
    return m / static_cast<double>(spins_.size());
  }

 private:
  const IsingInstance* inst_;
  std::vector<int> spins_;
  double energy_ = 0.0;
  Rng rng_;
};

/// Independent SA runs; run r draws its start from derive_seed(seed, r, 1)
/// and its moves from derive_seed(seed, r, 0). T at step s is schedule(s).
inline std::vector<RunRecord> run_sa(const IsingInstance& instance, const Schedule& temperature,
                                     std::uint64_t mc_steps, int n_runs, RngSeed seed, const McOptions& opts = {}) {
  if (mc_steps < 1) throw ContractError("mc_steps must be >= 1");
  if (n_runs < 1) throw ContractError("n_runs must be >= 1");
  const auto steps = detail::resolve_steps(opts, mc_steps);
  std::vector<RunRecord> out(n_runs);
  detail::parallel_runs(n_runs, opts.threads, [&](int r) {
    Rng init(derive_seed(seed, r, 1));
    auto start = opts.initial ? *opts.initial : SpinConfiguration::random(instance.n_spins(), init);
    SaChain chain(instance, std::move(start), derive_seed(seed, r, 0));
    RunRecord rec;
    rec.seed = derive_seed(seed, r, 0);
    rec.time_scale = 1;
    auto observe = [&](std::uint64_t s) {
      const double e = chain.energy();
      rec.observations.push_back({s, static_cast<double>(s), e, e, detail::is_ground(e, opts.ground_energy) ? 1 : 0, 1,
                                  chain.magnetization()});
    };
    std::size_t next = 0;
    if (steps[next] == 0) observe(steps[next++]);
    for (std::uint64_t s = 1; s <= mc_steps; ++s) {
      chain.step(temperature.value(static_cast<double>(s)));
      if (s == mc_steps && opts.final_zero_t_quench) {
        const auto q = zero_t_quench(instance, chain.configuration(), kQuenchSweeps, derive_seed(seed, r, kQuenchStream));
        const double e = instance.energy(q);
        rec.observations.push_back({s, static_cast<double>(s), e, e, detail::is_ground(e, opts.ground_energy) ? 1 : 0, 1,
                                    q.magnetization()});
        break;
      }
      if (next < steps.size() && steps[next] == s) observe(steps[next++]);
    }
    out[r] = std::move(rec);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Suzuki-Trotter quantum Monte Carlo

/// M coupled copies of the classical system; slice k couples to k +- 1 (periodic).
struct TrotterLattice {
  int n = 0;
  int m_trotter = 0;
  double beta_eff = 1.0;
  double current_gamma = 0.0;
  double gamma_m = 0.0;      // Gamma_M
  std::vector<int> spins;    // slice-major: spins[k * n + j]

  std::span<const int> slice(int k) const { return {spins.data() + static_cast<std::size_t>(k) * n, std::size_t(n)}; }
  std::span<int> slice(int k) { return {spins.data() + static_cast<std::size_t>(k) * n, std::size_t(n)}; }

  void set_gamma(double gamma) {
    if (gamma != current_gamma || gamma_m == 0.0) {
      current_gamma = gamma;
      gamma_m = trotter_coupling(gamma, beta_eff, m_trotter);
    }
  }
};

/// A resumable QMC run: owns the lattice, per-slice energies and the RNG stream.
class QmcSession {
 public:
  static constexpr std::uint32_t kCheckpointVersion = 1;

  QmcSession(const IsingInstance& instance, Schedule gamma_schedule, double beta_eff, int m, RngSeed seed,
             std::uint64_t run = 0)
      : inst_(&instance), schedule_(std::move(gamma_schedule)), rng_(derive_seed(seed, run, 0)) {
    if (m < 2) throw ContractError("Trotter number must be >= 2");
    if (!(beta_eff > 0.0)) throw ContractError("beta_eff must be positive");
    lat_.n = instance.n_spins();
    lat_.m_trotter = m;
    lat_.beta_eff = beta_eff;
    lat_.spins.resize(static_cast<std::size_t>(lat_.n) * m);
    for (int k = 0; k < m; ++k) {
      Rng init(derive_seed(seed, run, static_cast<std::uint64_t>(k) + 1));
      for (auto& s : lat_.slice(k)) s = init.spin();
    }
  }

  const TrotterLattice& lattice() const noexcept { return lat_; }
  std::uint64_t step_count() const noexcept { return step_; }
  const Schedule& schedule() const noexcept { return schedule_; }
  /// Classical energy of every slice, evaluated from the spins.
  std::vector<double> slice_energies() const {
    std::vector<double> out(static_cast<std::size_t>(lat_.m_trotter));
    for (int k = 0; k < lat_.m_trotter; ++k) {
      auto sl = lat_.slice(k);
      out[static_cast<std::size_t>(k)] = inst_->energy(SpinConfiguration(std::vector<int>(sl.begin(), sl.end())));
    }
    return out;
  }

  /// One MC step: N*M heat-bath trials at random (site, slice); Gamma = schedule(step).
  void step() {
    ++step_;
    lat_.set_gamma(schedule_.value(static_cast<double>(step_)));
    const int n = lat_.n, m = lat_.m_trotter;
    const double be = lat_.beta_eff;
    const double gm = be * lat_.gamma_m;  // gamma_M, dimensionless
    const std::uint64_t cells = static_cast<std::uint64_t>(n) * m;
    for (std::uint64_t trial = 0; trial < cells; ++trial) {
      const auto cell = rng_.below(cells);
      const int k = static_cast<int>(cell / n);
      const int j = static_cast<int>(cell % n);
      auto sl = lat_.slice(k);
      const int s = sl[j];
      const double de = 2.0 * s * inst_->local_field(sl, j);
      const int up = lat_.spins[static_cast<std::size_t>((k + 1) % m) * n + j];
      const int dn = lat_.spins[static_cast<std::size_t>((k + m - 1) % m) * n + j];
      const double ds = be * de + 2.0 * gm * s * (up + dn);
      if (rng_.uniform() < heat_bath_probability(ds)) sl[j] = -s;
    }
  }

  void run_to(std::uint64_t target) {
    while (step_ < target) step();
  }

  Observation observe(const std::optional<double>& ground_energy) const {
    Observation o;
    o.mc_step = step_;
    o.rescaled_time = static_cast<double>(lat_.m_trotter) * static_cast<double>(step_);
    o.n_replicas = lat_.m_trotter;
    double sum = 0.0, best = std::numeric_limits<double>::infinity();
    for (double e : slice_energies()) {
      sum += e;
      best = std::min(best, e);
      if (detail::is_ground(e, ground_energy)) ++o.ground_hits;
    }
    o.avg_energy = sum / lat_.m_trotter;
    o.best_energy = best;
    double mag = 0.0;
    for (int s : lat_.spins) mag += s;
    o.magnetization = mag / static_cast<double>(lat_.spins.size());
    return o;
  }

  /// Like observe(), but on copies of the slices after a zero-T descent.
  Observation observe_quenched(const std::optional<double>& ground_energy, RngSeed seed) const {
    Observation o = observe(ground_energy);
    o.ground_hits = 0;
    double sum = 0.0, best = std::numeric_limits<double>::infinity(), mag = 0.0;
    Rng seeds(seed);
    for (const auto& c : slice_configurations()) {
      const auto q = zero_t_quench(*inst_, c, kQuenchSweeps, seeds.next_u64());
      const double e = inst_->energy(q);
      sum += e;
      best = std::min(best, e);
      mag += q.magnetization();
      if (detail::is_ground(e, ground_energy)) ++o.ground_hits;
    }
    o.avg_energy = sum / lat_.m_trotter;
    o.best_energy = best;
    o.magnetization = mag / lat_.m_trotter;
    return o;
  }

  std::vector<SpinConfiguration> slice_configurations() const {
    std::vector<SpinConfiguration> out;
    for (int k = 0; k < lat_.m_trotter; ++k) {
      auto s = lat_.slice(k);
      out.emplace_back(std::vector<int>(s.begin(), s.end()));
    }
    return out;
  }

  // Checkpoint layout (little-endian), see docs/checkpoint_format.md.
  void save(std::ostream& os) const {
    if constexpr (std::endian::native != std::endian::little) throw IoError("checkpoints need a little-endian host");
    os.write("QANNQMC", 8);
    put(os, kCheckpointVersion);
    put(os, static_cast<std::uint32_t>(lat_.n));
    put(os, static_cast<std::uint32_t>(lat_.m_trotter));
    put(os, lat_.beta_eff);
    put(os, step_);
    put(os, instance_hash(*inst_));
    put_string(os, schedule_.descriptor());
    put_string(os, rng_.serialize());
    std::vector<std::int8_t> packed(lat_.spins.begin(), lat_.spins.end());
    os.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (!os) throw IoError("failed to write QMC checkpoint");
  }

  static QmcSession load(std::istream& is, const IsingInstance& instance) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "QANNQMC", 8) != 0) throw IoError("not a QMC checkpoint");
    const auto version = get<std::uint32_t>(is);
    if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
    const auto n = get<std::uint32_t>(is);
    const auto m = get<std::uint32_t>(is);
    const auto beta_eff = get<double>(is);
    const auto step = get<std::uint64_t>(is);
    const auto hash = get<std::uint64_t>(is);
    const auto sched = get_string(is);
    const auto rng = get_string(is);
    if (static_cast<int>(n) != instance.n_spins() || hash != instance_hash(instance)) {
      throw IoError("checkpoint belongs to a different instance");
    }
    QmcSession s(instance, Schedule::parse(sched), beta_eff, static_cast<int>(m), 0);
    std::vector<std::int8_t> packed(static_cast<std::size_t>(n) * m);
    is.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (!is) throw IoError("truncated QMC checkpoint");
    for (std::size_t c = 0; c < packed.size(); ++c) {
      if (packed[c] != 1 && packed[c] != -1) throw IoError("corrupt spin value in checkpoint");
      s.lat_.spins[c] = packed[c];
    }
    s.step_ = step;
    s.rng_ = Rng::deserialize(rng);
    if (step > 0) s.lat_.set_gamma(s.schedule_.value(static_cast<double>(step)));
    return s;
  }

 private:
  template <class T>
  static void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  static void put_string(std::ostream& os, const std::string& s) {
    put(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  template <class T>
  static T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("truncated QMC checkpoint");
    return v;
  }
  static std::string get_string(std::istream& is) {
    const auto len = get<std::uint32_t>(is);
    if (len > (1u << 20)) throw IoError("corrupt string length in checkpoint");
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw IoError("truncated QMC checkpoint");
    return s;
  }

  const IsingInstance* inst_;
  Schedule schedule_;
  TrotterLattice lat_;
  std::uint64_t step_ = 0;
  Rng rng_;
};

inline RunRecord run_qmc(const IsingInstance& instance, const Schedule& gamma, double beta_eff, int m,
                         std::uint64_t mc_steps, RngSeed seed, const McOptions& opts = {}, std::uint64_t run = 0) {
  if (mc_steps < 1) throw ContractError("mc_steps must be >= 1");
  const auto steps = detail::resolve_steps(opts, mc_steps);
  QmcSession session(instance, gamma, beta_eff, m, seed, run);
  RunRecord rec;
  rec.seed = derive_seed(seed, run, 0);
  rec.time_scale = m;
  for (auto s : steps) {
    session.run_to(s);
    if (s == mc_steps && opts.final_zero_t_quench) {
      rec.observations.push_back(session.observe_quenched(opts.ground_energy, derive_seed(seed, run, kQuenchStream)));
    } else {
      rec.observations.push_back(session.observe(opts.ground_energy));
    }
  }
  return rec;
}

/// `n_runs` independent QMC runs (run index r feeds derive_seed).
inline std::vector<RunRecord> run_qmc_ensemble(const IsingInstance& instance, const Schedule& gamma, double beta_eff,
                                               int m, std::uint64_t mc_steps, int n_runs, RngSeed seed,
                                               const McOptions& opts = {}) {
  std::vector<RunRecord> out(n_runs);
  detail::parallel_runs(n_runs, opts.threads, [&](int r) {
    out[r] = run_qmc(instance, gamma, beta_eff, m, mc_steps, seed, opts, static_cast<std::uint64_t>(r));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Path-integral MC

struct PimcResult {
  double center_probability = 0.0;  // ground-set frequency on the two center slices
  double center_energy = 0.0;
  double center_magnetization = 0.0;
  RunRecord record;                 // one observation per measurement step
};

/// Static open chain of M slices representing e^{-int H dtau} acting on the
/// uniform state from both ends. Bond b (between slices b-1 and b) carries
/// Gamma(tau_b), tau_b = beta * min(b, M - b) / M, floored at the schedule start;
/// each slice has classical weight e^{-(beta/M) E}.
inline PimcResult run_pimc(const IsingInstance& instance, const Schedule& gamma, double beta, int m,
                           std::uint64_t equil_steps, std::uint64_t measure_steps, RngSeed seed,
                           const std::optional<double>& ground_energy = std::nullopt, std::uint64_t run = 0) {
  if (m < 2 || m % 2 != 0) throw ContractError("PIMC needs an even Trotter number >= 2");
  if (!(beta > 0.0)) throw ContractError("beta must be positive");
  if (measure_steps < 1) throw ContractError("measure_steps must be >= 1");
  const int n = instance.n_spins();
  const double dtau = beta / m;
  std::vector<double> bond(m + 1, 0.0);  // bond[b], b in [1, M-1]; 0 at the open ends
  for (int b = 1; b < m; ++b) {
    const double tau = std::max(beta * std::min(b, m - b) / m, gamma.t_start());
    bond[b] = dtau * trotter_coupling(gamma.value(tau), dtau, m);
  }
  std::vector<int> spins(static_cast<std::size_t>(n) * m);
  std::vector<double> energies(m);
  for (int k = 0; k < m; ++k) {
    Rng init(derive_seed(seed, run, static_cast<std::uint64_t>(k) + 1));
    for (int j = 0; j < n; ++j) spins[static_cast<std::size_t>(k) * n + j] = init.spin();
    energies[k] = instance.energy(SpinConfiguration(
        std::vector<int>(spins.begin() + static_cast<std::ptrdiff_t>(k) * n, spins.begin() + static_cast<std::ptrdiff_t>(k + 1) * n)));
  }
  Rng rng(derive_seed(seed, run, 0));
  const std::uint64_t cells = static_cast<std::uint64_t>(n) * m;
  auto sweep = [&] {
    for (std::uint64_t trial = 0; trial < cells; ++trial) {
      const auto cell = rng.below(cells);
      const int k = static_cast<int>(cell / n);
      const int j = static_cast<int>(cell % n);
      std::span<const int> sl(spins.data() + static_cast<std::size_t>(k) * n, n);
      const int s = sl[j];
      const double de = 2.0 * s * instance.local_field(sl, j);
      double nb = 0.0;
      if (k > 0) nb += bond[k] * spins[static_cast<std::size_t>(k - 1) * n + j];
      if (k + 1 < m) nb += bond[k + 1] * spins[static_cast<std::size_t>(k + 1) * n + j];
      const double ds = dtau * de + 2.0 * s * nb;
      if (rng.uniform() < heat_bath_probability(ds)) {
        spins[static_cast<std::size_t>(k) * n + j] = -s;
        energies[k] += de;
      }
    }
  };
  for (std::uint64_t s = 0; s < equil_steps; ++s) sweep();
  PimcResult res;
  res.record.seed = derive_seed(seed, run, 0);
  res.record.time_scale = m;
  const int c0 = m / 2 - 1, c1 = m / 2;
  double hits = 0.0, esum = 0.0, msum = 0.0;
  for (std::uint64_t s = 1; s <= measure_steps; ++s) {
    sweep();
    Observation o;
    o.mc_step = equil_steps + s;
    o.rescaled_time = static_cast<double>(m) * static_cast<double>(o.mc_step);
    o.n_replicas = 2;
    o.ground_hits = (detail::is_ground(energies[c0], ground_energy) ? 1 : 0) +
                    (detail::is_ground(energies[c1], ground_energy) ? 1 : 0);
    o.avg_energy = 0.5 * (energies[c0] + energies[c1]);
    o.best_energy = std::min(energies[c0], energies[c1]);
    double mag = 0.0;
    for (int j = 0; j < n; ++j)
      mag += spins[static_cast<std::size_t>(c0) * n + j] + spins[static_cast<std::size_t>(c1) * n + j];
    o.magnetization = mag / (2.0 * n);
    hits += o.ground_hits;
    esum += o.avg_energy;
    msum += o.magnetization;
    res.record.observations.push_back(o);
  }
  const double ms = static_cast<double>(measure_steps);
  res.center_probability = hits / (2.0 * ms);
  res.center_energy = esum / ms;
  res.center_magnetization = msum / ms;
  return res;
}

// ---------------------------------------------------------------------------
// Ensemble reduction

struct EnsemblePoint {
  std::uint64_t mc_step = 0;
  double rescaled_time = 0.0;
  double probability = 0.0;        // sum(ground_hits) / sum(n_replicas)
  double probability_stderr = 0.0; // from the spread of per-run hit fractions
  double mean_energy = 0.0;
  double energy_stderr = 0.0;
  double best_energy = 0.0;
  double magnetization = 0.0;
};

struct EnsembleSeries {
  int n_records = 0;
  std::vector<EnsemblePoint> points;

  const EnsemblePoint& final_point() const { return points.back(); }
};

/// Averages records sampled on the same steps. Records are summed in seed
/// order, so the result does not depend on the order they are passed in.
inline EnsembleSeries merge_records(std::vector<RunRecord> records) {
  if (records.empty()) throw ContractError("nothing to merge");
  std::stable_sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
  const auto& ref = records.front().observations;
  for (const auto& r : records) {
    if (r.observations.size() != ref.size()) throw ContractError("records are sampled on different step grids");
    for (std::size_t i = 0; i < ref.size(); ++i)
      if (r.observations[i].mc_step != ref[i].mc_step) throw ContractError("records are sampled on different step grids");
  }
  EnsembleSeries out;
  out.n_records = static_cast<int>(records.size());
  const double nr = static_cast<double>(records.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EnsemblePoint p;
    p.mc_step = ref[i].mc_step;
    p.rescaled_time = ref[i].rescaled_time;
    double hits = 0.0, reps = 0.0, e = 0.0, e2 = 0.0, f = 0.0, f2 = 0.0, m = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : records) {
      const auto& o = r.observations[i];
      hits += o.ground_hits;
      reps += o.n_replicas;
      const double frac = static_cast<double>(o.ground_hits) / o.n_replicas;
      f += frac;
      f2 += frac * frac;
      e += o.avg_energy;
      e2 += o.avg_energy * o.avg_energy;
      m += o.magnetization;
      best = std::min(best, o.best_energy);
    }
    p.probability = hits / reps;
    p.mean_energy = e / nr;
    p.magnetization = m / nr;
    p.best_energy = best;
    if (nr > 1) {
      const double fvar = std::max(0.0, (f2 - f * f / nr) / (nr - 1));
      const double evar = std::max(0.0, (e2 - e * e / nr) / (nr - 1));
      p.probability_stderr = std::sqrt(fvar / nr);
      p.energy_stderr = std::sqrt(evar / nr);
    }
    out.points.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quench versus anneal

struct QuenchSetup {
  Schedule anneal = Schedule::inverse_sqrt(10.0);  // used for both T(t) and Gamma(t)
  double value = 0.1 / std::sqrt(10.0);            // quenched T and Gamma
  std::uint64_t steps = 100000;
  int n_runs = 4;
  double beta_eff = 1.0;
  int m = 20;
  RngSeed seed = 1;
  bool final_zero_t_quench = false;
  int threads = 1;
};

struct QuenchRow {
  std::string method;  // sa_anneal, qa_anneal, t_quench, gamma_quench
  double initial_energy = 0.0;
  double final_energy = 0.0;
  double final_stderr = 0.0;
  EnsembleSeries series;
};

inline std::vector<QuenchRow> quench_vs_anneal_report(const IsingInstance& instance, const QuenchSetup& q) {
  McOptions opts;
  opts.threads = q.threads;
  opts.sample_steps = mc_sample_steps(q.steps, 10);
  opts.final_zero_t_quench = q.final_zero_t_quench;
  const auto constant = Schedule::constant(q.value);
  auto finish = [&](std::string name, std::vector<RunRecord> recs) {
    QuenchRow row;
    row.method = std::move(name);
    row.series = merge_records(std::move(recs));
    row.initial_energy = row.series.points.front().mean_energy;
    row.final_energy = row.series.final_point().mean_energy;
    row.final_stderr = row.series.final_point().energy_stderr;
    return row;
  };
  std::vector<QuenchRow> rows;
  rows.push_back(finish("sa_anneal", run_sa(instance, q.anneal, q.steps, q.n_runs, q.seed, opts)));
  rows.push_back(finish("qa_anneal", run_qmc_ensemble(instance, q.anneal, q.beta_eff, q.m, q.steps, q.n_runs, q.seed, opts)));
  rows.push_back(finish("t_quench", run_sa(instance, constant, q.steps, q.n_runs, q.seed, opts)));
  rows.push_back(finish("gamma_quench", run_qmc_ensemble(instance, constant, q.beta_eff, q.m, q.steps, q.n_runs, q.seed, opts)));
  return rows;
}

/// Coefficient c so that a c/t^p schedule ends at `value` after `steps`.
inline double matched_coefficient(ScheduleForm form, double value, double steps) {
  switch (form) {
    case ScheduleForm::InverseSqrt: return value * std::sqrt(steps);
    case ScheduleForm::Inverse: return value * steps;
    case ScheduleForm::InverseLog: return value * std::log1p(steps);
    default: throw ContractError("matched_coefficient needs an inverse-family schedule");
  }
}

}  // namespace qanneal
