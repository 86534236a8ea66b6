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

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include <boost/multiprecision/cpp_complex.hpp>

#include "qanneal/error.hpp"

namespace qanneal {

using cdouble = std::complex<double>;

namespace detail {

inline bool is_nonpositive_integer(cdouble z) {
  return z.imag() == 0.0 && z.real() <= 0.0 && z.real() == std::nearbyint(z.real());
}

// log sin(pi z) without overflow for large |Im z|.
inline cdouble log_sin_pi(cdouble z) {
  using std::numbers::pi;
  if (z.imag() < 0.0) return std::conj(log_sin_pi(std::conj(z)));
  const cdouble i(0.0, 1.0);
  if (z.imag() < 5.0) return std::log(std::sin(pi * z));
  // sin(pi z) = e^{-i pi z} (e^{2 i pi z} - 1) / (2i)
  return -i * pi * z + std::log(std::exp(2.0 * i * pi * z) - 1.0) - cdouble(std::log(2.0), pi / 2);
}

}  // namespace detail

/// log Gamma(z) for complex z (Lanczos, g = 7, 9 terms, with reflection).
/// The imaginary part is only defined modulo 2 pi.
inline cdouble log_gamma(cdouble z) {
  using std::numbers::pi;
  if (detail::is_nonpositive_integer(z)) {
    std::ostringstream os;
    os << "Gamma has a pole at z = " << z.real();
    throw DomainError(os.str());
  }
  if (z.real() < 0.5) {
    return std::log(pi) - detail::log_sin_pi(z) - log_gamma(1.0 - z);
  }
  static constexpr std::array<double, 9> p = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double g = 7.0;
  z -= 1.0;
  cdouble x = p[0];
  for (int k = 1; k < 9; ++k) x += p[k] / (z + static_cast<double>(k));
  const cdouble t = z + g + 0.5;
  return 0.5 * std::log(2.0 * pi) + (z + 0.5) * std::log(t) - t + std::log(x);
}

inline cdouble complex_gamma(cdouble z) { return std::exp(log_gamma(z)); }

// ---------------------------------------------------------------------------
// Kummer's confluent hypergeometric function 1F1(a; b; z)

struct SeriesResult {
  cdouble value;
  double error_estimate = 0.0;  // absolute
  int terms = 0;
  int working_digits = 0;
};

class SeriesError : public ConvergenceError {
 public:
  SeriesError(const std::string& what, cdouble partial, int terms)
      : ConvergenceError(what), partial_sum(partial), terms_used(terms) {}
  cdouble partial_sum;
  int terms_used;
};

namespace detail {

template <class C>
struct RawSeries {
  C sum;
  double abs_sum = 0.0;
  double last_term = 0.0;
  int terms = 0;
  bool converged = false;
};

template <class C>
double abs_d(const C& c) {
  using std::abs;
  return static_cast<double>(abs(c));
}

template <class C>
RawSeries<C> kummer_series(cdouble a_d, cdouble b_d, cdouble z_d, double eps, int max_terms) {
  const C a(a_d.real(), a_d.imag());
  const C b(b_d.real(), b_d.imag());
  const C z(z_d.real(), z_d.imag());
  RawSeries<C> r;
  C term(1);
  r.sum = term;
  r.abs_sum = 1.0;
  const double az = std::abs(z_d);
  int quiet = 0;
  for (int k = 0; k < max_terms; ++k) {
    const C kk(k);
    term *= (a + kk) / (b + kk) * z / (kk + C(1));
    r.sum += term;
    const double mag = abs_d(term);
    r.abs_sum += mag;
    r.last_term = mag;
    r.terms = k + 1;
    // Ratio |(a+k) z / ((b+k)(k+1))| is below 1/2 from here on, so the tail
    // is bounded by the current term.
    const bool decaying = std::abs(a_d + double(k + 1)) * az <=
                          0.5 * std::abs(b_d + double(k + 1)) * double(k + 2);
    if (decaying && mag <= eps * abs_d(r.sum)) {
      if (++quiet >= 2) {
        r.converged = true;
        return r;
      }
    } else {
      quiet = 0;
    }
    if (mag == 0.0 && decaying) {
      r.converged = true;
      return r;
    }
  }
  return r;
}

template <class C>
cdouble to_cdouble(const C& c) {
  using std::imag;
  using std::real;
  return {static_cast<double>(real(c)), static_cast<double>(imag(c))};
}

}  // namespace detail

/// F(a; b; z) by direct power series.
///
/// The series alternates heavily for large |z| (terms up to ~e^|z|), so the
/// working precision is raised (double, 50 digits, 100 digits) until the
/// rounding estimate eps * sum|t_k| falls below `rel_tol` * |F|.
inline SeriesResult hypergeometric_1f1(cdouble a, cdouble b, cdouble z, double rel_tol = 1e-13,
                                       int max_terms = 20000) {
  using boost::multiprecision::cpp_complex_100;
  using boost::multiprecision::cpp_complex_50;
  if (detail::is_nonpositive_integer(b)) throw DomainError("1F1 undefined for b a non-positive integer");
  if (z == cdouble(0.0)) return {cdouble(1.0), 0.0, 0, 16};

  auto finish = [&](auto raw, double eps, int digits) -> std::pair<bool, SeriesResult> {
    const cdouble v = detail::to_cdouble(raw.sum);
    if (!raw.converged) {
      std::ostringstream os;
      os << "1F1 series did not converge within " << max_terms << " terms";
      throw SeriesError(os.str(), v, raw.terms);
    }
    const double err = 8.0 * eps * raw.abs_sum + raw.last_term;
    return {err <= rel_tol * std::abs(v), SeriesResult{v, err, raw.terms, digits}};
  };

  constexpr double eps_d = std::numeric_limits<double>::epsilon();
  auto [ok_d, res_d] = finish(detail::kummer_series<cdouble>(a, b, z, eps_d / 4, max_terms), eps_d, 16);
  if (ok_d) return res_d;
  auto [ok_50, res_50] = finish(detail::kummer_series<cpp_complex_50>(a, b, z, 1e-20, max_terms), 1e-49, 50);
  if (ok_50) return res_50;
  auto [ok_100, res_100] = finish(detail::kummer_series<cpp_complex_100>(a, b, z, 1e-20, max_terms), 1e-99, 100);
  if (ok_100) return res_100;
  std::ostringstream os;
  os << "1F1 cancellation exceeds 100-digit working precision (|z| = " << std::abs(z) << ")";
  throw SeriesError(os.str(), res_100.value, res_100.terms);
}

inline cdouble hyp1f1(cdouble a, cdouble b, cdouble z) { return hypergeometric_1f1(a, b, z).value; }

}  // namespace qanneal
