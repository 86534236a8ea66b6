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

// Two-level system H = -h sigma^z - Gamma(t) sigma^x with amplitudes
// a = <+|psi>, b = <-|psi>:
//   i da/dt = -h a - Gamma b
//   i db/dt =  h b - Gamma a
// For h > 0 the state |+> is the classical ground state, so the final miss
// probability is the weight left in the excited level.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <sstream>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "qanneal/error.hpp"
#include "qanneal/schedule.hpp"
#include "qanneal/special_functions.hpp"

namespace qanneal {

struct SingleSpinParams {
  double h = 1.0;
  double c = 1.0;

  SingleSpinParams() = default;
  SingleSpinParams(double h_, double c_) : h(h_), c(c_) {
    if (!(h > 0.0) || !(c > 0.0)) throw ContractError("single-spin parameters need h > 0 and c > 0");
  }

  double gamma() const { return c * c / (2.0 * h); }
};

struct AmplitudePair {
  cdouble a;
  cdouble b;

  double norm2() const { return std::norm(a) + std::norm(b); }

  static AmplitudePair uniform() {
    const double s = 1.0 / std::sqrt(2.0);
    return {cdouble(s), cdouble(s)};
  }
};

/// Asymptotic formula value and whether the parameters sit in its validity regime.
struct AsymptoticMiss {
  double value = 0.0;
  bool in_regime = false;
};

// ---------------------------------------------------------------------------
// Closed-form limits

/// Gamma = -c t swept from -infinity to 0: miss ~ c^2 / (16 h^4), valid for h^2/c >> 1.
inline AsymptoticMiss lz_final_miss_probability(const SingleSpinParams& p) {
  return {p.c * p.c / (16.0 * std::pow(p.h, 4)), p.h * p.h / p.c >= 10.0};
}

/// Exact t -> infinity miss for Gamma = c/t:
///   sinh(pi c) e^{-pi c} / sinh(2 pi c) = e^{-2 pi c} / (1 + e^{-2 pi c}).
inline double inverse_time_final_miss_probability(double c) {
  if (!(c > 0.0)) throw ContractError("c must be positive");
  const double x = std::exp(-2.0 * std::numbers::pi * c);
  return x / (1.0 + x);
}

/// Large-c form of the above.
inline double inverse_time_final_miss_large_c(double c) { return std::exp(-2.0 * std::numbers::pi * c); }

/// Gamma = c/sqrt(t): miss ~ h^2 / (64 c^4), valid for c^2/h >> 1.
inline AsymptoticMiss inverse_sqrt_final_miss_probability(const SingleSpinParams& p) {
  return {p.h * p.h / (64.0 * std::pow(p.c, 4)), p.c * p.c / p.h >= 10.0};
}

/// Exact |b(infinity)|^2 for Gamma = c/sqrt(t) from the Gamma-function limit:
///   (pi/2) e^{-pi g} |1/Gamma(1/2 - i g) + g^{-1/2} e^{5 pi i/4} / Gamma(-i g)|^2,  g = c^2/2h.
inline double inverse_sqrt_final_miss_exact(const SingleSpinParams& p) {
  using std::numbers::pi;
  const double g = p.gamma();
  const cdouble i(0.0, 1.0);
  // 1/Gamma via exp(-lgamma) keeps the e^{pi g/2} growth inside the exponent.
  const cdouble t1 = std::exp(-log_gamma(cdouble(0.5, -g)) - 0.5 * pi * g);
  const cdouble t2 = std::exp(-log_gamma(cdouble(0.0, -g)) - 0.5 * pi * g + 1.25 * pi * i) / std::sqrt(g);
  return 0.5 * pi * std::norm(t1 + t2);
}

// ---------------------------------------------------------------------------
// Closed-form amplitudes

/// b(t) for Gamma = c/t with a = b = 1/sqrt(2) at t -> 0 (up to the t^{ic} phase):
///   b(t) = e^{iht} t^{ic} F(1+ic, 1+2ic; -2iht) / sqrt(2).
inline cdouble amplitude_b_inverse_time(const SingleSpinParams& p, double t) {
  if (!(t > 0.0)) throw DomainError("t must be positive");
  const cdouble i(0.0, 1.0);
  const cdouble z = -2.0 * i * p.h * t;
  const cdouble pre = std::exp(i * (p.h * t + p.c * std::log(t))) / std::sqrt(2.0);
  return pre * hyp1f1(1.0 + i * p.c, 1.0 + 2.0 * i * p.c, z);
}

/// a(t) for Gamma = c/t, from a = (h b - i db/dt) / Gamma.
inline cdouble amplitude_a_inverse_time(const SingleSpinParams& p, double t) {
  if (!(t > 0.0)) throw DomainError("t must be positive");
  const cdouble i(0.0, 1.0);
  const cdouble z = -2.0 * i * p.h * t;
  const cdouble alpha = 1.0 + i * p.c, beta = 1.0 + 2.0 * i * p.c;
  const cdouble pre = std::exp(i * (p.h * t + p.c * std::log(t))) / std::sqrt(2.0);
  const cdouble f = hyp1f1(alpha, beta, z);
  const cdouble df = alpha / beta * hyp1f1(alpha + 1.0, beta + 1.0, z);
  const cdouble b = pre * f;
  const cdouble db = b * (i * p.h + i * p.c / t) + pre * df * (-2.0 * i * p.h);
  return (p.h * b - i * db) / (p.c / t);
}

namespace detail {

struct SqrtPieces {
  cdouble b, db;
};

inline SqrtPieces inverse_sqrt_pieces(const SingleSpinParams& p, double t) {
  using std::numbers::pi;
  if (!(t > 0.0)) throw DomainError("t must be positive");
  const cdouble i(0.0, 1.0);
  const double g = p.gamma();
  const cdouble z = -2.0 * i * p.h * t;
  const cdouble e = std::exp(i * p.h * t);
  const cdouble k = p.c / std::sqrt(p.h) * std::exp(0.75 * pi * i);
  const cdouble s = std::sqrt(z);  // principal branch
  const cdouble a1 = 0.5 - i * g, b1 = 0.5;
  const cdouble a2 = 1.0 - i * g, b2 = 1.5;
  const cdouble f1 = hyp1f1(a1, b1, z), df1 = a1 / b1 * hyp1f1(a1 + 1.0, b1 + 1.0, z);
  const cdouble f2 = hyp1f1(a2, b2, z), df2 = a2 / b2 * hyp1f1(a2 + 1.0, b2 + 1.0, z);
  const cdouble dz = -2.0 * i * p.h;
  const cdouble b = e * (f1 / std::sqrt(2.0) + k * s * f2);
  const cdouble db = i * p.h * b + e * (df1 * dz / std::sqrt(2.0) + k * (s / (2.0 * t) * f2 + s * df2 * dz));
  return {b, db};
}

}  // namespace detail

/// b(t) for Gamma = c/sqrt(t) with a = b = 1/sqrt(2) at t = 0.
inline cdouble amplitude_b_inverse_sqrt(const SingleSpinParams& p, double t) {
  return detail::inverse_sqrt_pieces(p, t).b;
}

inline cdouble amplitude_a_inverse_sqrt(const SingleSpinParams& p, double t) {
  const auto [b, db] = detail::inverse_sqrt_pieces(p, t);
  const cdouble i(0.0, 1.0);
  return (p.h * b - i * db) / (p.c / std::sqrt(t));
}

/// Large-t expansion of b(t) for Gamma = c/sqrt(t).
inline cdouble amplitude_b_inverse_sqrt_asymptotic(const SingleSpinParams& p, double t) {
  using std::numbers::pi;
  const cdouble i(0.0, 1.0);
  const double g = p.gamma();
  const double ht2 = 2.0 * p.h * t;
  const double sh = std::sqrt(p.h);
  // Each 1/Gamma is formed as exp(-lgamma - pi g/2) so the prefactor e^{-pi g/2} never underflows alone.
  auto rg = [&](cdouble z) { return std::exp(-log_gamma(z) - 0.5 * pi * g); };
  const cdouble first = std::exp(-i * p.h * t) * std::exp(-i * g * std::log(ht2)) *
                        (rg(cdouble(0.5, -g)) / std::sqrt(2.0) + sh * std::exp(1.25 * pi * i) / p.c * rg(cdouble(0.0, -g)));
  const cdouble second = std::exp(i * p.h * t) * std::exp((-0.5 + i * g) * std::log(ht2)) *
                         (std::exp(-0.25 * pi * i) / std::sqrt(2.0) * rg(cdouble(0.0, g)) +
                          p.c / (2.0 * sh) * rg(cdouble(0.5, g)));
  return std::sqrt(pi) * (first + second);
}

/// Initial amplitudes at t = 0 that make the Gamma = c/sqrt(t) evolution end in |+>:
///   C1 = {1 + sinh(pi c^2/h) / (2 sinh^2(pi c^2/2h))}^{-1/2}
///   C2 = i c^2 Gamma(-i g) / (h Gamma(1/2 - i g)) C1
///   b(0) = C1,  a(0) = sqrt(h) / (sqrt(2) c) e^{5 pi i/4} C2.
inline AmplitudePair tuned_initial_condition(const SingleSpinParams& p) {
  using std::numbers::pi;
  const cdouble i(0.0, 1.0);
  const double g = p.gamma();
  // sinh(2x) / (2 sinh^2 x) = coth x, with x = pi g.
  const double c1 = 1.0 / std::sqrt(1.0 + 1.0 / std::tanh(pi * g));
  const cdouble ratio = std::exp(log_gamma(cdouble(0.0, -g)) - log_gamma(cdouble(0.5, -g)));
  const cdouble c2 = i * p.c * p.c / p.h * ratio * c1;
  const cdouble a0 = std::sqrt(p.h) / (std::sqrt(2.0) * p.c) * std::exp(1.25 * pi * i) * c2;
  return {a0, cdouble(c1)};
}

// ---------------------------------------------------------------------------
// ODE oracle

struct SpinSample {
  double t = 0.0;
  AmplitudePair psi;
};

struct OdeOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  double norm_tol = 1e-8;
};

/// Integrates the two-level equations from t0 to t1 (adaptive Dormand-Prince,
/// dense output). Returns samples at t0, each of `sample_times` inside (t0, t1), and t1.
inline std::vector<SpinSample> solve_ode(const Schedule& schedule, double h, double t0, double t1,
                                         AmplitudePair initial = AmplitudePair::uniform(),
                                         std::span<const double> sample_times = {}, OdeOptions opts = {}) {
  namespace ode = boost::numeric::odeint;
  using State = std::array<double, 4>;
  if (!(t1 > t0)) throw ContractError("solve_ode needs t1 > t0");
  if (!schedule.in_domain(t0) || !schedule.in_domain(t1)) {
    throw DomainError("integration interval leaves the schedule's domain");
  }
  auto rhs = [&](const State& y, State& dy, double t) {
    const double g = schedule.value(t);
    // da/dt = i(h a + g b), db/dt = i(g a - h b)
    const double ar = y[0], ai = y[1], br = y[2], bi = y[3];
    dy[0] = -(h * ai + g * bi);
    dy[1] = h * ar + g * br;
    dy[2] = -(g * ai - h * bi);
    dy[3] = g * ar - h * br;
  };
  std::vector<double> times{t0};
  for (double s : sample_times)
    if (s > t0 && s < t1) times.push_back(s);
  std::sort(times.begin() + 1, times.end());
  times.push_back(t1);

  State y{initial.a.real(), initial.a.imag(), initial.b.real(), initial.b.imag()};
  const double norm0 = initial.norm2();
  std::vector<SpinSample> out;
  out.reserve(times.size());
  auto observer = [&](const State& s, double t) {
    out.push_back({t, {cdouble(s[0], s[1]), cdouble(s[2], s[3])}});
  };
  auto stepper = ode::make_dense_output(opts.abs_tol, opts.rel_tol, ode::runge_kutta_dopri5<State>());
  const double dt0 = std::min(1e-3 * (t1 - t0), std::abs(t0) > 0 ? 1e-3 * std::abs(t0) : 1e-6);
  ode::integrate_times(stepper, rhs, y, times.begin(), times.end(), dt0, observer);

  for (const auto& s : out) {
    const double drift = std::abs(s.psi.norm2() - norm0);
    if (drift > opts.norm_tol) {
      std::ostringstream os;
      os << "two-level integration lost unitarity: |norm^2 - 1| = " << drift << " at t = " << s.t
         << " (tolerances abs " << opts.abs_tol << ", rel " << opts.rel_tol << ")";
      throw IntegrationError(os.str());
    }
  }
  return out;
}

/// Ground and excited eigenvectors of [[-h, -g], [-g, h]] in the (a, b) basis.
inline std::pair<AmplitudePair, AmplitudePair> instantaneous_eigenstates(double h, double g) {
  const double e = std::hypot(h, g);
  double gx = h + e, gy = g;       // eigenvalue -e
  double ex = -g, ey = h + e;      // eigenvalue +e, orthogonal to ground
  if (gx == 0.0 && gy == 0.0) {    // h <= 0 and g == 0
    gx = 0.0, gy = 1.0, ex = 1.0, ey = 0.0;
  }
  const double ng = std::hypot(gx, gy), ne = std::hypot(ex, ey);
  return {{cdouble(gx / ng), cdouble(gy / ng)}, {cdouble(ex / ne), cdouble(ey / ne)}};
}

/// Weight in the instantaneous excited level of H(t) = -h sigma^z - g sigma^x.
/// As g -> 0 this is |b|^2; at finite g it removes the adiabatic dressing of |+>.
inline double adiabatic_miss(double h, double g, const AmplitudePair& psi) {
  const auto excited = instantaneous_eigenstates(h, g).second;
  return std::norm(std::conj(excited.a) * psi.a + std::conj(excited.b) * psi.b);
}

struct OdeMiss {
  double adiabatic = 0.0;  // instantaneous excited-level weight at t1
  double raw = 0.0;        // |b(t1)|^2
};

inline OdeMiss ode_final_miss(const Schedule& schedule, double h, double t0, double t1,
                              AmplitudePair initial = AmplitudePair::uniform(), OdeOptions opts = {}) {
  const auto traj = solve_ode(schedule, h, t0, t1, initial, {}, opts);
  const auto& psi = traj.back().psi;
  return {adiabatic_miss(h, schedule.value(t1), psi), std::norm(psi.b)};
}

/// Landau-Zener run: start in the instantaneous ground state at t0 = -50/sqrt(c)
/// (or `t0` if given) and integrate to Gamma = 0 at t = 0.
inline OdeMiss lz_ode_miss(const SingleSpinParams& p, double t0 = 0.0, OdeOptions opts = {}) {
  if (t0 == 0.0) t0 = -50.0 / std::sqrt(p.c);
  const auto s = Schedule::linear_negative(p.c).with_start(t0);
  const auto ground = instantaneous_eigenstates(p.h, s.value(t0)).first;
  return ode_final_miss(s, p.h, t0, 0.0, ground, opts);
}

}  // namespace qanneal
