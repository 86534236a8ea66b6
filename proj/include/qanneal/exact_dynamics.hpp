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
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "qanneal/error.hpp"
#include "qanneal/ising.hpp"
#include "qanneal/schedule.hpp"

namespace qanneal {

using cdouble = std::complex<double>;

/// Exact solvers work on the full 2^N basis and stop here.
inline constexpr int kMaxExactSpins = 14;
/// Up to this size the stationary state comes from a dense eigen-solve.
inline constexpr int kMaxDenseSpins = 10;

inline void check_exact_size(int n) {
  if (n > kMaxExactSpins) {
    throw SizeLimitError("exact methods are limited to " + std::to_string(kMaxExactSpins) + " spins, got " +
                         std::to_string(n));
  }
}

/// Amplitudes over the z basis; bit k of the index set <=> spin k is -1.
struct QuantumState {
  int n_spins = 0;
  std::vector<cdouble> amplitudes;

  static QuantumState uniform(int n) {
    const std::size_t dim = std::size_t{1} << n;
    return {n, std::vector<cdouble>(dim, cdouble(1.0 / std::sqrt(static_cast<double>(dim))))};
  }

  static QuantumState basis(int n, std::uint64_t index) {
    QuantumState s{n, std::vector<cdouble>(std::size_t{1} << n)};
    s.amplitudes.at(index) = 1.0;
    return s;
  }

  std::size_t dim() const noexcept { return amplitudes.size(); }

  double norm2() const {
    double s = 0.0;
    for (const auto& a : amplitudes) s += std::norm(a);
    return s;
  }

  void normalize() {
    const double inv = 1.0 / std::sqrt(norm2());
    for (auto& a : amplitudes) a *= inv;
  }
};

/// Total weight on a set of basis indices.
inline double overlap_probability(const QuantumState& psi, std::span<const std::uint64_t> indices) {
  double p = 0.0;
  for (auto idx : indices) p += std::norm(psi.amplitudes.at(idx));
  return p;
}

enum class TrajectoryLabel { P_QA, P_SA, P_QA_stationary, P_SA_stationary, P_QA_imaginary };

inline const char* label_name(TrajectoryLabel l) {
  switch (l) {
    case TrajectoryLabel::P_QA: return "P_QA";
    case TrajectoryLabel::P_SA: return "P_SA";
    case TrajectoryLabel::P_QA_stationary: return "P_QA_stationary";
    case TrajectoryLabel::P_SA_stationary: return "P_SA_stationary";
    case TrajectoryLabel::P_QA_imaginary: return "P_QA_imaginary";
  }
  return "?";
}

struct TrajectorySample {
  double t = 0.0;
  double p = 0.0;
};

struct IntegratorDiagnostics {
  double step_factor = 0.0;   // dt = step_factor / ||H(t)|| (Schrodinger) or fixed cap (master)
  double min_dt = 0.0;
  double max_dt = 0.0;
  std::uint64_t steps = 0;
  double max_norm_drift = 0.0;
  int rejected_steps = 0;
};

struct OverlapTrajectory {
  TrajectoryLabel label = TrajectoryLabel::P_QA;
  std::vector<TrajectorySample> samples;
  IntegratorDiagnostics diagnostics;

  double final_p() const { return samples.empty() ? 0.0 : samples.back().p; }
};

/// `per_decade` log-spaced points covering [t_lo, t_hi], both ends included.
inline std::vector<double> log_spaced_times(double t_lo, double t_hi, int per_decade = 50) {
  if (!(t_lo > 0.0) || !(t_hi > t_lo)) throw ContractError("log grid needs 0 < t_lo < t_hi");
  const double decades = std::log10(t_hi / t_lo);
  const int n = std::max(1, static_cast<int>(std::ceil(decades * per_decade)));
  std::vector<double> out(n + 1);
  for (int k = 0; k <= n; ++k) out[k] = t_lo * std::pow(10.0, decades * k / n);
  out.back() = t_hi;
  return out;
}

// ---------------------------------------------------------------------------
// Hamiltonian

/// H = diag(E) - Gamma sum_k sigma^x_k, applied matrix-free.
class TransverseIsingOperator {
 public:
  explicit TransverseIsingOperator(const IsingInstance& instance)
      : n_(instance.n_spins()), energies_((check_exact_size(instance.n_spins()), diagonal_energies(instance))) {
    for (double e : energies_) max_abs_energy_ = std::max(max_abs_energy_, std::abs(e));
  }

  int n_spins() const noexcept { return n_; }
  std::size_t dim() const noexcept { return energies_.size(); }
  const std::vector<double>& energies() const noexcept { return energies_; }

  /// Upper bound on the spectral radius at this Gamma.
  double norm_bound(double gamma) const { return max_abs_energy_ + n_ * std::abs(gamma); }

  template <class T>
  void apply(double gamma, std::span<const T> in, std::span<T> out) const {
    const std::size_t dim = energies_.size();
    for (std::size_t x = 0; x < dim; ++x) {
      T flip{};
      for (int k = 0; k < n_; ++k) flip += in[x ^ (std::size_t{1} << k)];
      out[x] = energies_[x] * in[x] - gamma * flip;
    }
  }

 private:
  int n_;
  std::vector<double> energies_;
  double max_abs_energy_ = 0.0;
};

inline QuantumState apply_hamiltonian(const IsingInstance& instance, double gamma, const QuantumState& state) {
  if (state.n_spins != instance.n_spins() || state.dim() != (std::size_t{1} << instance.n_spins())) {
    throw ContractError("state dimension does not match the instance");
  }
  TransverseIsingOperator op(instance);
  QuantumState out{state.n_spins, std::vector<cdouble>(state.dim())};
  op.apply<cdouble>(gamma, state.amplitudes, out.amplitudes);
  return out;
}

inline Eigen::MatrixXd dense_hamiltonian(const IsingInstance& instance, double gamma) {
  const int n = instance.n_spins();
  if (n > kMaxDenseSpins) throw SizeLimitError("dense Hamiltonian limited to " + std::to_string(kMaxDenseSpins) + " spins");
  const auto e = diagonal_energies(instance);
  const Eigen::Index dim = static_cast<Eigen::Index>(e.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index x = 0; x < dim; ++x) {
    h(x, x) = e[x];
    for (int k = 0; k < n; ++k) h(x ^ (Eigen::Index{1} << k), x) = -gamma;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Stationary ground state

struct GroundStateResult {
  QuantumState state;
  double energy = 0.0;
  double residual = 0.0;
};

namespace detail {

inline void fix_phase(std::vector<double>& v) {
  auto it = std::max_element(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (*it < 0.0)
    for (auto& x : v) x = -x;
}

inline double residual_norm(const TransverseIsingOperator& op, double gamma, const std::vector<double>& v, double e) {
  std::vector<double> hv(v.size());
  op.apply<double>(gamma, v, hv);
  double r = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) r += (hv[k] - e * v[k]) * (hv[k] - e * v[k]);
  return std::sqrt(r);
}

// Restarted Lanczos with full reorthogonalization for the lowest eigenpair.
inline std::pair<std::vector<double>, double> lanczos_lowest(const TransverseIsingOperator& op, double gamma,
                                                             double tol, int krylov = 60, int max_restarts = 200) {
  const std::size_t dim = op.dim();
  std::vector<double> x(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  // Deterministic perturbation so symmetric subspaces are not missed.
  for (std::size_t k = 0; k < dim; ++k) x[k] *= 1.0 + 1e-3 * std::sin(1.0 + static_cast<double>(k));
  double theta = 0.0;
  const int m = static_cast<int>(std::min<std::size_t>(krylov, dim));
  std::vector<std::vector<double>> v;
  std::vector<double> w(dim);
  for (int restart = 0; restart < max_restarts; ++restart) {
    v.assign(1, x);
    {
      double nrm = 0.0;
      for (double a : v[0]) nrm += a * a;
      nrm = std::sqrt(nrm);
      for (double& a : v[0]) a /= nrm;
    }
    std::vector<double> alpha, beta;
    for (int j = 0; j < m; ++j) {
      op.apply<double>(gamma, v[j], w);
      double a = 0.0;
      for (std::size_t k = 0; k < dim; ++k) a += v[j][k] * w[k];
      alpha.push_back(a);
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& q : v) {
          double d = 0.0;
          for (std::size_t k = 0; k < dim; ++k) d += q[k] * w[k];
          for (std::size_t k = 0; k < dim; ++k) w[k] -= d * q[k];
        }
      }
      double b = 0.0;
      for (double c : w) b += c * c;
      b = std::sqrt(b);
      if (j + 1 == m || b < 1e-13) break;
      beta.push_back(b);
      v.emplace_back(dim);
      for (std::size_t k = 0; k < dim; ++k) v.back()[k] = w[k] / b;
    }
    const int ksize = static_cast<int>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(ksize, ksize);
    for (int i = 0; i < ksize; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < ksize) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    theta = es.eigenvalues()(0);
    const Eigen::VectorXd y = es.eigenvectors().col(0);
    std::fill(x.begin(), x.end(), 0.0);
    for (int i = 0; i < ksize; ++i)
      for (std::size_t k = 0; k < dim; ++k) x[k] += y(i) * v[i][k];
    double nrm = 0.0;
    for (double a : x) nrm += a * a;
    nrm = std::sqrt(nrm);
    for (double& a : x) a /= nrm;
    if (residual_norm(op, gamma, x, theta) <= tol) return {x, theta};
  }
  throw ConvergenceError("Lanczos did not reach residual " + std::to_string(tol) + " at Gamma = " +
                         std::to_string(gamma));
}

}  // namespace detail

/// Lowest eigenvector of H(Gamma), phase fixed so the largest-magnitude
/// amplitude is real and positive. At Gamma = 0 with a degenerate classical
/// minimum the equal superposition of the minima is returned.
inline GroundStateResult stationary_ground_state(const IsingInstance& instance, double gamma, double tol = 1e-8) {
  const int n = instance.n_spins();
  check_exact_size(n);
  TransverseIsingOperator op(instance);
  std::vector<double> v;
  double e = 0.0;
  if (gamma == 0.0) {
    const auto& en = op.energies();
    e = *std::min_element(en.begin(), en.end());
    v.assign(en.size(), 0.0);
    for (std::size_t k = 0; k < en.size(); ++k)
      if (en[k] <= e + kEnergyTolerance) v[k] = 1.0;
    double cnt = 0.0;
    for (double a : v) cnt += a;
    for (double& a : v) a /= std::sqrt(cnt);
  } else if (n <= kMaxDenseSpins) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_hamiltonian(instance, gamma));
    if (es.info() != Eigen::Success) throw ConvergenceError("dense eigen-solve failed");
    e = es.eigenvalues()(0);
    v.assign(es.eigenvectors().col(0).data(), es.eigenvectors().col(0).data() + op.dim());
  } else {
    std::tie(v, e) = detail::lanczos_lowest(op, gamma, tol);
  }
  detail::fix_phase(v);
  const double res = detail::residual_norm(op, gamma, v, e);
  if (res > tol) {
    std::ostringstream os;
    os << "stationary state residual " << res << " exceeds " << tol;
    throw ConvergenceError(os.str());
  }
  QuantumState s{n, std::vector<cdouble>(v.begin(), v.end())};
  return {std::move(s), e, res};
}

/// P_QA^st(Gamma): ground-set weight of the stationary state.
inline double stationary_qa_probability(const IsingInstance& instance, double gamma,
                                        std::span<const std::uint64_t> ground) {
  return overlap_probability(stationary_ground_state(instance, gamma).state, ground);
}

/// Second-order estimate of 1 - P_QA^st for small Gamma (non-degenerate ground state g):
///   Gamma^2 sum over single flips i of g of (E_i - E_g)^{-2}.
inline double perturbative_qa_miss(const IsingInstance& instance, double gamma) {
  const auto cert = enumerate_ground_states(instance);
  if (cert.configurations.size() != 1) throw ContractError("perturbative estimate needs a unique ground state");
  const auto& g = cert.configurations.front();
  double s = 0.0;
  for (int k = 0; k < instance.n_spins(); ++k) {
    const double d = instance.flip_delta(g, k);
    s += 1.0 / (d * d);
  }
  return gamma * gamma * s;
}

// ---------------------------------------------------------------------------
// Schrodinger evolution

struct EvolutionOptions {
  double step_factor = 0.02;      // dt = step_factor / ||H(t)||
  double norm_tolerance = 1e-6;   // real-time drift allowed over the run
  std::optional<QuantumState> initial;  // default: uniform superposition
  std::optional<GroundStateCertificate> certificate;
};

namespace detail {

// Advances psi across [t, t_next] with RK4 steps of dt = kappa / ||H||.
// `imaginary` selects d psi/d tau = -(H - shift) psi with renormalization.
inline void rk4_segment(const TransverseIsingOperator& op, const Schedule& schedule, std::vector<cdouble>& psi,
                        double& t, double t_next, double kappa, bool imaginary, IntegratorDiagnostics& diag) {
  const std::size_t dim = psi.size();
  std::vector<cdouble> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  const cdouble factor = imaginary ? cdouble(-1.0, 0.0) : cdouble(0.0, -1.0);
  auto deriv = [&](double time, std::span<const cdouble> in, std::span<cdouble> out) {
    op.apply<cdouble>(schedule.value(time), in, out);
    for (std::size_t x = 0; x < dim; ++x) out[x] *= factor;
  };
  while (t < t_next) {
    const double g = schedule.value(t);
    double dt = kappa / op.norm_bound(g);
    bool last = false;
    if (t + dt >= t_next || (t_next - t - dt) < 1e-12 * std::abs(t_next)) {
      dt = t_next - t;
      last = true;
    }
    deriv(t, psi, k1);
    for (std::size_t x = 0; x < dim; ++x) tmp[x] = psi[x] + 0.5 * dt * k1[x];
    deriv(t + 0.5 * dt, tmp, k2);
    for (std::size_t x = 0; x < dim; ++x) tmp[x] = psi[x] + 0.5 * dt * k2[x];
    deriv(t + 0.5 * dt, tmp, k3);
    for (std::size_t x = 0; x < dim; ++x) tmp[x] = psi[x] + dt * k3[x];
    deriv(t + dt, tmp, k4);
    for (std::size_t x = 0; x < dim; ++x) psi[x] += dt / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
    if (imaginary) {
      double s = 0.0;
      for (const auto& a : psi) s += std::norm(a);
      const double inv = 1.0 / std::sqrt(s);
      for (auto& a : psi) a *= inv;
    }
    t = last ? t_next : t + dt;
    ++diag.steps;
    diag.min_dt = diag.steps == 1 ? dt : std::min(diag.min_dt, dt);
    diag.max_dt = std::max(diag.max_dt, dt);
  }
}

inline OverlapTrajectory evolve_impl(const IsingInstance& instance, const Schedule& schedule, double t_end,
                                     std::span<const double> sample_times, const EvolutionOptions& opts,
                                     bool imaginary) {
  check_exact_size(instance.n_spins());
  const double t0 = schedule.t_start();
  if (!(t_end >= t0)) throw ContractError("t_end precedes the schedule start");
  const auto cert = opts.certificate ? *opts.certificate : enumerate_ground_states(instance);
  const auto ground = ground_indices(cert);
  TransverseIsingOperator op(instance);
  auto psi = opts.initial ? opts.initial->amplitudes : QuantumState::uniform(instance.n_spins()).amplitudes;
  if (psi.size() != op.dim()) throw ContractError("initial state dimension does not match the instance");

  OverlapTrajectory traj;
  traj.label = imaginary ? TrajectoryLabel::P_QA_imaginary : TrajectoryLabel::P_QA;
  traj.diagnostics.step_factor = opts.step_factor;
  auto prob = [&] {
    double p = 0.0;
    for (auto idx : ground) p += std::norm(psi[idx]);
    return std::clamp(p, 0.0, 1.0);
  };
  double norm0 = 0.0;
  for (const auto& a : psi) norm0 += std::norm(a);

  std::vector<double> times;
  for (double s : sample_times)
    if (s >= t0 && s <= t_end) times.push_back(s);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  if (times.empty() || times.back() != t_end) times.push_back(t_end);

  double t = t0;
  for (double ts : times) {
    rk4_segment(op, schedule, psi, t, ts, opts.step_factor, imaginary, traj.diagnostics);
    if (!imaginary) {
      double nrm = 0.0;
      for (const auto& a : psi) nrm += std::norm(a);
      const double drift = std::abs(nrm - norm0);
      traj.diagnostics.max_norm_drift = std::max(traj.diagnostics.max_norm_drift, drift);
      if (drift > opts.norm_tolerance) {
        std::ostringstream os;
        os << "norm drift " << drift << " at t = " << t << " exceeds " << opts.norm_tolerance
           << " (step factor " << opts.step_factor << ", " << traj.diagnostics.steps << " steps, min dt "
           << traj.diagnostics.min_dt << ")";
        throw IntegrationError(os.str());
      }
    }
    traj.samples.push_back({ts, prob()});
  }
  return traj;
}

}  // namespace detail

/// Real-time evolution from the uniform superposition at schedule.t_start();
/// records P_QA(t) = sum over ground states |<g|psi(t)>|^2.
inline OverlapTrajectory evolve_schrodinger(const IsingInstance& instance, const Schedule& gamma, double t_end,
                                            std::span<const double> sample_times, const EvolutionOptions& opts = {}) {
  return detail::evolve_impl(instance, gamma, t_end, sample_times, opts, false);
}

/// Imaginary-time evolution d psi/d tau = -H(Gamma(tau)) psi, renormalized every step.
inline OverlapTrajectory evolve_imaginary_time(const IsingInstance& instance, const Schedule& gamma, double t_end,
                                               std::span<const double> sample_times,
                                               const EvolutionOptions& opts = {}) {
  return detail::evolve_impl(instance, gamma, t_end, sample_times, opts, true);
}

/// Halves the step factor until two successive trajectories differ by less
/// than `tolerance` at every sample. Returns the finer trajectory.
inline OverlapTrajectory evolve_schrodinger_converged(const IsingInstance& instance, const Schedule& gamma,
                                                      double t_end, std::span<const double> sample_times,
                                                      EvolutionOptions opts = {}, double tolerance = 1e-6,
                                                      int max_halvings = 8) {
  auto coarse = evolve_schrodinger(instance, gamma, t_end, sample_times, opts);
  for (int k = 0; k < max_halvings; ++k) {
    opts.step_factor *= 0.5;
    auto fine = evolve_schrodinger(instance, gamma, t_end, sample_times, opts);
    double diff = 0.0;
    for (std::size_t s = 0; s < fine.samples.size(); ++s)
      diff = std::max(diff, std::abs(fine.samples[s].p - coarse.samples[s].p));
    if (diff < tolerance) return fine;
    coarse = std::move(fine);
  }
  throw IntegrationError("step-factor halving did not converge to " + std::to_string(tolerance));
}

// ---------------------------------------------------------------------------
// Master equation

namespace detail {

/// Heat-bath rate for i -> j: 1 / (1 + exp((E_j - E_i) / T)).
inline double heat_bath_rate(double e_from, double e_to, double temperature) {
  const double x = (e_to - e_from) / temperature;
  if (x > 0.0) {
    const double ex = std::exp(-x);
    return ex / (1.0 + ex);
  }
  return 1.0 / (1.0 + std::exp(x));
}

}  // namespace detail

/// Generator L of dP/dt = L P for single-spin heat-bath flips at temperature T.
/// L(j, i) is the rate i -> j; diagonal entries make every column sum to zero.
inline Eigen::SparseMatrix<double> build_transition_matrix(const IsingInstance& instance, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("temperature must be positive");
  const int n = instance.n_spins();
  check_exact_size(n);
  const auto e = diagonal_energies(instance);
  const Eigen::Index dim = static_cast<Eigen::Index>(e.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(dim) * (n + 1));
  for (Eigen::Index i = 0; i < dim; ++i) {
    double out = 0.0;
    for (int k = 0; k < n; ++k) {
      const Eigen::Index j = i ^ (Eigen::Index{1} << k);
      const double r = detail::heat_bath_rate(e[i], e[j], temperature);
      trip.emplace_back(j, i, r);
      out += r;
    }
    trip.emplace_back(i, i, -out);
  }
  Eigen::SparseMatrix<double> l(dim, dim);
  l.setFromTriplets(trip.begin(), trip.end());
  return l;
}

struct MasterOptions {
  double dt_fraction = 0.1;          // dt <= dt_fraction / max|L_ii|
  double negative_tolerance = 1e-12;
  int max_halvings = 30;
  std::optional<GroundStateCertificate> certificate;
  std::optional<std::vector<double>> initial;  // default: uniform
  // Hold T at schedule(ceil(t)) and start from t = 0: the control protocol of
  // an MC run whose step s (covering (s-1, s]) uses schedule(s).
  bool stepwise = false;
};

/// Integrates dP/dt = L(T(t)) P from the uniform distribution at schedule.t_start()
/// and records P_SA(t), the total probability on the ground set.
inline OverlapTrajectory master_evolve(const IsingInstance& instance, const Schedule& temperature, double t_end,
                                       std::span<const double> sample_times, const MasterOptions& opts = {}) {
  const int n = instance.n_spins();
  check_exact_size(n);
  const double t0 = opts.stepwise ? 0.0 : temperature.t_start();
  if (!(t_end >= t0)) throw ContractError("t_end precedes the schedule start");
  const auto cert = opts.certificate ? *opts.certificate : enumerate_ground_states(instance);
  const auto ground = ground_indices(cert);
  const auto e = diagonal_energies(instance);
  const std::size_t dim = e.size();
  std::vector<double> p = opts.initial ? *opts.initial : std::vector<double>(dim, 1.0 / static_cast<double>(dim));
  if (p.size() != dim) throw ContractError("initial distribution has the wrong size");

  std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim), trial(dim);
  // rate[i * n + k]: heat-bath rate for flipping spin k out of state i. The
  // rates for i -> j and j -> i sum to one, so each pair needs one exp.
  std::vector<double> rate(dim * n);
  double rate_temp = std::numeric_limits<double>::quiet_NaN();
  auto fill_rates = [&](double temp) {
    if (temp == rate_temp) return;
    if (!(temp > 0.0)) throw DomainError("temperature must stay positive");
    for (std::size_t i = 0; i < dim; ++i) {
      for (int k = 0; k < n; ++k) {
        const std::size_t j = i ^ (std::size_t{1} << k);
        if (j < i) continue;
        const double r = detail::heat_bath_rate(e[i], e[j], temp);
        rate[i * n + k] = r;
        rate[j * n + k] = 1.0 - r;
      }
    }
    rate_temp = temp;
  };
  auto deriv = [&](double temp, const std::vector<double>& in, std::vector<double>& out) {
    fill_rates(temp);
    for (std::size_t i = 0; i < dim; ++i) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) {
        const std::size_t j = i ^ (std::size_t{1} << k);
        acc += rate[j * n + k] * in[j] - rate[i * n + k] * in[i];
      }
      out[i] = acc;
    }
  };
  // Every rate is below 1, so |L_ii| <= n.
  const double dt_cap = opts.dt_fraction / static_cast<double>(n);

  OverlapTrajectory traj;
  traj.label = TrajectoryLabel::P_SA;
  traj.diagnostics.step_factor = opts.dt_fraction;
  std::vector<double> times;
  for (double s : sample_times)
    if (s >= t0 && s <= t_end) times.push_back(s);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  if (times.empty() || times.back() != t_end) times.push_back(t_end);

  double t = t0;
  for (double ts : times) {
    while (t < ts) {
      double dt = std::min(dt_cap, ts - t);
      double held = 0.0;
      if (opts.stepwise) {
        // stay inside the current step interval (k, k+1], where T = schedule(k+1)
        const double k = std::floor(t * (1.0 + 1e-15) + 1e-12);
        dt = std::min(dt, k + 1.0 - t);
        held = temperature.value(k + 1.0);
      }
      int halvings = 0;
      for (;;) {
        const double ta = opts.stepwise ? held : temperature.value(t);
        const double tb = opts.stepwise ? held : temperature.value(t + 0.5 * dt);
        const double tc = opts.stepwise ? held : temperature.value(t + dt);
        deriv(ta, p, k1);
        for (std::size_t x = 0; x < dim; ++x) tmp[x] = p[x] + 0.5 * dt * k1[x];
        deriv(tb, tmp, k2);
        for (std::size_t x = 0; x < dim; ++x) tmp[x] = p[x] + 0.5 * dt * k2[x];
        deriv(tb, tmp, k3);
        for (std::size_t x = 0; x < dim; ++x) tmp[x] = p[x] + dt * k3[x];
        deriv(tc, tmp, k4);
        bool ok = true;
        for (std::size_t x = 0; x < dim; ++x) {
          trial[x] = p[x] + dt / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
          if (trial[x] < -opts.negative_tolerance) ok = false;
        }
        if (ok) break;
        if (++halvings > opts.max_halvings) {
          std::ostringstream os;
          os << "master equation produced negative probabilities at t = " << t << " after " << halvings
             << " step halvings";
          throw IntegrationError(os.str());
        }
        ++traj.diagnostics.rejected_steps;
        dt *= 0.5;
      }
      for (std::size_t x = 0; x < dim; ++x) p[x] = std::max(trial[x], 0.0);
      t = (ts - t - dt) <= 1e-12 * std::abs(ts) ? ts : t + dt;
      if (opts.stepwise && std::abs(t - std::round(t)) < 1e-9) t = std::round(t);
      ++traj.diagnostics.steps;
      traj.diagnostics.min_dt = traj.diagnostics.steps == 1 ? dt : std::min(traj.diagnostics.min_dt, dt);
      traj.diagnostics.max_dt = std::max(traj.diagnostics.max_dt, dt);
    }
    double pg = 0.0;
    for (auto idx : ground) pg += p[idx];
    traj.samples.push_back({ts, std::clamp(pg, 0.0, 1.0)});
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Equilibrium references

/// Boltzmann weight of the ground set at temperature T (k_B = 1).
inline double boltzmann_ground_probability(const IsingInstance& instance, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("temperature must be positive");
  const auto e = diagonal_energies(instance);
  const double emin = *std::min_element(e.begin(), e.end());
  double z = 0.0, zg = 0.0;
  for (double x : e) {
    const double w = std::exp(-(x - emin) / temperature);
    z += w;
    if (x <= emin + kEnergyTolerance) zg += w;
  }
  return zg / z;
}

enum class CorrelationKind { ThermalT, QuantumGamma };

/// <sigma^z_i sigma^z_j> in the Boltzmann state at T or the stationary state at Gamma.
inline double correlation_pair(const IsingInstance& instance, double control, int i, int j, CorrelationKind kind) {
  instance.check_index(i);
  instance.check_index(j);
  if (i == j) return 1.0;
  const std::uint64_t mask = (std::uint64_t{1} << i) | (std::uint64_t{1} << j);
  auto sign = [mask](std::uint64_t x) {
    const auto bits = x & mask;
    return (bits == 0 || bits == mask) ? 1.0 : -1.0;
  };
  if (kind == CorrelationKind::ThermalT) {
    if (!(control > 0.0)) throw DomainError("temperature must be positive");
    const auto e = diagonal_energies(instance);
    const double emin = *std::min_element(e.begin(), e.end());
    double z = 0.0, acc = 0.0;
    for (std::uint64_t x = 0; x < e.size(); ++x) {
      const double w = std::exp(-(e[x] - emin) / control);
      z += w;
      acc += sign(x) * w;
    }
    return acc / z;
  }
  if (control < 0.0) throw DomainError("transverse field must be non-negative");
  const auto gs = stationary_ground_state(instance, control);
  double acc = 0.0;
  for (std::uint64_t x = 0; x < gs.state.dim(); ++x) acc += sign(x) * std::norm(gs.state.amplitudes[x]);
  return acc;
}

/// P^st along a trajectory's sample times: Boltzmann ground weight at T(t)
/// (label P_SA_stationary) or stationary-state overlap at Gamma(t) (P_QA_stationary).
inline OverlapTrajectory stationary_trajectory(const IsingInstance& instance, const Schedule& control,
                                               std::span<const double> times, TrajectoryLabel label) {
  OverlapTrajectory traj;
  traj.label = label;
  const auto ground = ground_indices(enumerate_ground_states(instance));
  for (double t : times) {
    const double v = control.value(t);
    double p = 0.0;
    if (label == TrajectoryLabel::P_SA_stationary) {
      p = boltzmann_ground_probability(instance, v);
    } else if (label == TrajectoryLabel::P_QA_stationary) {
      p = stationary_qa_probability(instance, v, ground);
    } else {
      throw ContractError("stationary_trajectory needs a stationary label");
    }
    traj.samples.push_back({t, p});
  }
  return traj;
}

}  // namespace qanneal
