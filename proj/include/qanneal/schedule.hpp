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

#include <cmath>
#include <sstream>
#include <string>
#include <string_view>

#include "qanneal/error.hpp"

namespace qanneal {

enum class ScheduleForm { InverseLog, InverseSqrt, Inverse, LinearNegative, Constant };

/// Control parameter Gamma(t) or T(t).
///
///   InverseLog      c / log(t + 1)
///   InverseSqrt     c / sqrt(t)
///   Inverse         c / t
///   LinearNegative  -c t        (t <= 0)
///   Constant        v
///
/// `t_start` is where continuous-time integrations begin; the inverse forms
/// diverge at t = 0.
class Schedule {
 public:
  static constexpr double kDefaultStart = 1e-2;

  Schedule() = default;

  static Schedule inverse_log(double c) { return Schedule(ScheduleForm::InverseLog, c, kDefaultStart); }
  static Schedule inverse_sqrt(double c) { return Schedule(ScheduleForm::InverseSqrt, c, kDefaultStart); }
  static Schedule inverse(double c) { return Schedule(ScheduleForm::Inverse, c, kDefaultStart); }
  static Schedule linear_negative(double c) {
    return Schedule(ScheduleForm::LinearNegative, c, c > 0 ? -50.0 / std::sqrt(c) : 0.0);
  }
  static Schedule constant(double v) { return Schedule(ScheduleForm::Constant, v, 0.0); }

  Schedule with_start(double t0) const {
    Schedule s = *this;
    s.t_start_ = t0;
    s.validate();
    return s;
  }

  ScheduleForm form() const noexcept { return form_; }
  /// c for the time-dependent forms, v for Constant.
  double amplitude() const noexcept { return amp_; }
  double t_start() const noexcept { return t_start_; }

  bool in_domain(double t) const noexcept {
    switch (form_) {
      case ScheduleForm::InverseLog:
      case ScheduleForm::InverseSqrt:
      case ScheduleForm::Inverse:
        return t > 0.0 && std::isfinite(t);
      case ScheduleForm::LinearNegative:
        return t <= 0.0 && std::isfinite(t);
      case ScheduleForm::Constant:
        return !std::isnan(t);
    }
    return false;
  }

  double value(double t) const {
    if (!in_domain(t)) {
      std::ostringstream os;
      os << "t = " << t << " outside the domain of schedule " << descriptor();
      throw DomainError(os.str());
    }
    switch (form_) {
      case ScheduleForm::InverseLog:
        return amp_ / std::log1p(t);
      case ScheduleForm::InverseSqrt:
        return amp_ / std::sqrt(t);
      case ScheduleForm::Inverse:
        return amp_ / t;
      case ScheduleForm::LinearNegative:
        return -amp_ * t;
      case ScheduleForm::Constant:
        return amp_;
    }
    return 0.0;
  }

  double operator()(double t) const { return value(t); }

  /// d value / dt, used by the analytic single-spin checks.
  double derivative(double t) const {
    const double v = value(t);
    switch (form_) {
      case ScheduleForm::InverseLog: {
        const double l = std::log1p(t);
        return -amp_ / ((1.0 + t) * l * l);
      }
      case ScheduleForm::InverseSqrt:
        return -0.5 * v / t;
      case ScheduleForm::Inverse:
        return -v / t;
      case ScheduleForm::LinearNegative:
        return -amp_;
      case ScheduleForm::Constant:
        return 0.0;
    }
    return 0.0;
  }

  std::string descriptor() const {
    std::ostringstream os;
    os.precision(17);
    switch (form_) {
      case ScheduleForm::InverseLog: os << "inv_log:c=" << amp_; break;
      case ScheduleForm::InverseSqrt: os << "inv_sqrt:c=" << amp_; break;
      case ScheduleForm::Inverse: os << "inv:c=" << amp_; break;
      case ScheduleForm::LinearNegative: os << "linear_neg:c=" << amp_; break;
      case ScheduleForm::Constant: os << "const:v=" << amp_; break;
    }
    if (form_ != ScheduleForm::Constant && t_start_ != default_start(form_, amp_)) os << ",t0=" << t_start_;
    return os.str();
  }

  /// Parses `inv_sqrt:c=3`, `const:v=0.0316228`, optionally with `,t0=...`.
  static Schedule parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) throw ConfigError("schedule descriptor '" + std::string(text) + "' lacks ':'");
    const std::string_view kind = text.substr(0, colon);
    ScheduleForm form;
    std::string_view expected;
    if (kind == "inv_log") {
      form = ScheduleForm::InverseLog;
      expected = "c";
    } else if (kind == "inv_sqrt") {
      form = ScheduleForm::InverseSqrt;
      expected = "c";
    } else if (kind == "inv") {
      form = ScheduleForm::Inverse;
      expected = "c";
    } else if (kind == "linear_neg") {
      form = ScheduleForm::LinearNegative;
      expected = "c";
    } else if (kind == "const") {
      form = ScheduleForm::Constant;
      expected = "v";
    } else {
      throw ConfigError("unknown schedule form '" + std::string(kind) + "'");
    }
    bool have_amp = false, have_t0 = false;
    double amp = 0.0, t0 = 0.0;
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) throw ConfigError("schedule parameter '" + std::string(item) + "' lacks '='");
      const std::string_view key = item.substr(0, eq);
      const double value = parse_number(item.substr(eq + 1));
      if (key == expected) {
        amp = value;
        have_amp = true;
      } else if (key == "t0" && form != ScheduleForm::Constant) {
        t0 = value;
        have_t0 = true;
      } else {
        throw ConfigError("unknown schedule parameter '" + std::string(key) + "' for form " + std::string(kind));
      }
    }
    if (!have_amp) throw ConfigError("schedule '" + std::string(text) + "' needs " + std::string(expected) + "=");
    try {
      Schedule s(form, amp, have_t0 ? t0 : default_start(form, amp));
      return s;
    } catch (const ContractError& e) {
      throw ConfigError(e.what());
    }
  }

  friend bool operator==(const Schedule&, const Schedule&) = default;

 private:
  Schedule(ScheduleForm form, double amp, double t0) : form_(form), amp_(amp), t_start_(t0) { validate(); }

  static double default_start(ScheduleForm form, double amp) {
    if (form == ScheduleForm::Constant) return 0.0;
    if (form == ScheduleForm::LinearNegative) return amp > 0 ? -50.0 / std::sqrt(amp) : 0.0;
    return kDefaultStart;
  }

  static double parse_number(std::string_view s) {
    std::string str(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(str, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + str + "' in schedule descriptor");
    }
    if (used != str.size()) throw ConfigError("bad number '" + str + "' in schedule descriptor");
    return v;
  }

  void validate() const {
    if (!std::isfinite(amp_)) throw ContractError("schedule amplitude must be finite");
    if (form_ == ScheduleForm::Constant) {
      if (amp_ < 0.0) throw ContractError("constant schedule value must be >= 0");
      return;
    }
    if (!(amp_ > 0.0)) throw ContractError("schedule coefficient c must be positive");
    if (!in_domain(t_start_)) throw ContractError("t_start outside the schedule's domain");
  }

  ScheduleForm form_ = ScheduleForm::Constant;
  double amp_ = 0.0;
  double t_start_ = 0.0;
};

}  // namespace qanneal
