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
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qanneal/error.hpp"
#include "qanneal/exact_dynamics.hpp"
#include "qanneal/ising.hpp"
#include "qanneal/mc.hpp"
#include "qanneal/rng.hpp"
#include "qanneal/schedule.hpp"
#include "qanneal/single_spin.hpp"
#include "qanneal/tsp.hpp"

namespace qanneal {

inline constexpr std::string_view kVersion = "0.1.0";

inline constexpr std::string_view kSeedDerivation =
    "derive_seed(m, r, s) = splitmix64(splitmix64(m ^ splitmix64(r + 1)) ^ splitmix64(~(s + 1))); "
    "s = 0 moves, s = k + 1 initial state of replica/slice k, s = 2^32 zero-T finisher";

// ---------------------------------------------------------------------------
// Configuration

enum class Method { Schrodinger, SchrodingerImag, Master, SaMc, Qmc, Pimc, TspSa, TspQa };

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::Schrodinger: return "schrodinger";
    case Method::SchrodingerImag: return "schrodinger-imag";
    case Method::Master: return "master";
    case Method::SaMc: return "sa-mc";
    case Method::Qmc: return "qmc";
    case Method::Pimc: return "pimc";
    case Method::TspSa: return "tsp-sa";
    case Method::TspQa: return "tsp-qa";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::Schrodinger, Method::SchrodingerImag, Method::Master, Method::SaMc, Method::Qmc,
                   Method::Pimc, Method::TspSa, Method::TspQa})
    if (method_name(m) == s) return m;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

inline bool is_exact(Method m) { return m == Method::Schrodinger || m == Method::SchrodingerImag || m == Method::Master; }
inline bool is_tsp(Method m) { return m == Method::TspSa || m == Method::TspQa; }

/// Instance description. `family` selects which of the other fields apply.
struct ModelSpec {
  std::string family = "ferromagnet";  // ferromagnet | frustrated8 | sk | ea2d | file | tsp
  int n = 8;
  std::optional<double> j;             // ferromagnet coupling; default 1/(n-1)
  double field = kDefaultField;
  RngSeed seed = 1;
  int side = 10;
  bool periodic = true;
  std::string path;                    // family=file: instance text; tsp ulysses16: TSPLIB file
  std::string kind = "random";         // tsp family

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct PimcSpec {
  double beta = 10.0;
  std::uint64_t equilibration = 1000;
  std::uint64_t measurement = 1000;

  friend bool operator==(const PimcSpec&, const PimcSpec&) = default;
};

struct ExperimentConfig {
  std::string name = "run";
  ModelSpec model;
  Method method = Method::Schrodinger;
  std::string schedule = "inv_sqrt:c=3";
  std::uint64_t steps = 1000;   // MC steps
  double duration = 1000.0;     // exact methods: t_end
  double t_min = 1.0;           // exact methods: first sample time
  int replicas = 20;            // Trotter number M
  int n_runs = 1;
  double beta_eff = 1.0;
  PimcSpec pimc;
  int samples_per_decade = 50;
  bool final_quench = false;
  bool stepwise = false;        // master: hold T(ceil t) as in an MC sweep
  RngSeed seed = 1;
  std::string output = ".";
  int threads = 1;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
  }
}

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json model = {{"family", c.model.family}, {"n", c.model.n},           {"field", c.model.field},
                          {"seed", c.model.seed},     {"side", c.model.side},     {"periodic", c.model.periodic},
                          {"path", c.model.path},     {"kind", c.model.kind}};
  if (c.model.j) model["j"] = *c.model.j;
  return {{"name", c.name},
          {"model", model},
          {"method", std::string(method_name(c.method))},
          {"schedule", c.schedule},
          {"steps", c.steps},
          {"duration", c.duration},
          {"t_min", c.t_min},
          {"replicas", c.replicas},
          {"n_runs", c.n_runs},
          {"beta_eff", c.beta_eff},
          {"pimc", {{"beta", c.pimc.beta}, {"equilibration", c.pimc.equilibration}, {"measurement", c.pimc.measurement}}},
          {"samples_per_decade", c.samples_per_decade},
          {"final_quench", c.final_quench},
          {"stepwise", c.stepwise},
          {"seed", c.seed},
          {"output", c.output},
          {"threads", c.threads}};
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::read_field;
  detail::reject_unknown(j,
                         {"name", "model", "method", "schedule", "steps", "duration", "t_min", "replicas", "n_runs",
                          "beta_eff", "pimc", "samples_per_decade", "final_quench", "stepwise", "seed", "output",
                          "threads"},
                         "config");
  ExperimentConfig c;
  read_field(j, "name", c.name);
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::reject_unknown(m, {"family", "n", "j", "field", "seed", "side", "periodic", "path", "kind"}, "model");
    read_field(m, "family", c.model.family);
    read_field(m, "n", c.model.n);
    if (m.contains("j")) {
      double v = 0.0;
      read_field(m, "j", v);
      c.model.j = v;
    }
    read_field(m, "field", c.model.field);
    read_field(m, "seed", c.model.seed);
    read_field(m, "side", c.model.side);
    read_field(m, "periodic", c.model.periodic);
    read_field(m, "path", c.model.path);
    read_field(m, "kind", c.model.kind);
  }
  std::string method(method_name(c.method));
  read_field(j, "method", method);
  c.method = parse_method(method);
  read_field(j, "schedule", c.schedule);
  read_field(j, "steps", c.steps);
  read_field(j, "duration", c.duration);
  read_field(j, "t_min", c.t_min);
  read_field(j, "replicas", c.replicas);
  read_field(j, "n_runs", c.n_runs);
  read_field(j, "beta_eff", c.beta_eff);
  if (j.contains("pimc")) {
    const auto& p = j.at("pimc");
    detail::reject_unknown(p, {"beta", "equilibration", "measurement"}, "pimc");
    read_field(p, "beta", c.pimc.beta);
    read_field(p, "equilibration", c.pimc.equilibration);
    read_field(p, "measurement", c.pimc.measurement);
  }
  read_field(j, "samples_per_decade", c.samples_per_decade);
  read_field(j, "final_quench", c.final_quench);
  read_field(j, "stepwise", c.stepwise);
  read_field(j, "seed", c.seed);
  read_field(j, "output", c.output);
  read_field(j, "threads", c.threads);
  return c;
}

inline ExperimentConfig parse_config(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

/// FNV-1a of the canonical (sorted-key) JSON dump.
inline std::uint64_t config_hash(const ExperimentConfig& c) { return fnv1a64(to_json(c).dump()); }

// ---------------------------------------------------------------------------
// Instances

inline bool is_tsp_model(const ModelSpec& m) { return m.family == "tsp"; }

inline IsingInstance build_ising(const ModelSpec& m) {
  if (m.family == "ferromagnet") {
    if (m.n < 2) throw ConfigError("ferromagnet needs n >= 2");
    return make_ferromagnet(m.n, m.j.value_or(1.0 / (m.n - 1)), m.field);
  }
  if (m.family == "frustrated8") return make_frustrated8(m.field);
  if (m.family == "sk") {
    if (m.n < 2) throw ConfigError("sk needs n >= 2");
    return make_sk(m.n, m.seed, m.field);
  }
  if (m.family == "ea2d") {
    if (m.side < 2) throw ConfigError("ea2d needs side >= 2");
    return make_ea2d(m.side, m.periodic, m.seed, m.field);
  }
  if (m.family == "file") {
    std::ifstream is(m.path);
    if (!is) throw IoError("cannot open instance file '" + m.path + "'");
    return read_instance(is);
  }
  throw ConfigError("unknown Ising model family '" + m.family + "'");
}

inline TspInstance build_tsp(const ModelSpec& m) {
  if (!is_tsp_model(m)) throw ConfigError("TSP methods need model.family = tsp");
  const TspKind kind = parse_kind(m.kind);
  const int n = kind == TspKind::Random ? m.n : 16;
  if (kind == TspKind::Ulysses16 && !m.path.empty()) return generate_instance(kind, m.seed, 16, m.path);
  return generate_instance(kind, m.seed, n);
}

/// Throws ConfigError for method/model mismatches and SizeLimitError for
/// exact methods on more than kMaxExactSpins spins.
inline void validate(const ExperimentConfig& c) {
  if (is_tsp(c.method) != is_tsp_model(c.model))
    throw ConfigError("method " + std::string(method_name(c.method)) + " does not fit model family " + c.model.family);
  (void)Schedule::parse(c.schedule);
  if (c.samples_per_decade < 1) throw ConfigError("samples_per_decade must be >= 1");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  if (c.n_runs < 1) throw ConfigError("n_runs must be >= 1");
  if (is_exact(c.method)) {
    const int n = c.model.family == "ea2d" ? c.model.side * c.model.side
                  : c.model.family == "frustrated8" ? 8
                  : c.model.family == "file" ? build_ising(c.model).n_spins()
                                             : c.model.n;
    check_exact_size(n);
    if (!(c.duration > c.t_min) || !(c.t_min > 0.0)) throw ConfigError("exact methods need 0 < t_min < duration");
  } else if (c.steps < 1) {
    throw ConfigError("steps must be >= 1");
  }
  if ((c.method == Method::Qmc || c.method == Method::TspQa) && c.replicas < 2)
    throw ConfigError("replicas (Trotter number) must be >= 2");
  if (c.method == Method::Pimc && (c.replicas < 2 || c.replicas % 2))
    throw ConfigError("pimc needs an even replicas >= 2");
}

// ---------------------------------------------------------------------------
// CSV writers

inline void write_trajectory_csv(std::ostream& os, std::span<const OverlapTrajectory> trajectories) {
  os << "t,p,label\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& tr : trajectories)
    for (const auto& s : tr.samples) os << s.t << ',' << s.p << ',' << label_name(tr.label) << '\n';
}

namespace detail {

inline Observation sum_observations(std::span<const RunRecord> records, std::size_t i) {
  Observation o = records.front().observations[i];
  o.ground_hits = 0;
  o.n_replicas = 0;
  double e = 0.0, m = 0.0;
  o.best_energy = std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    const auto& x = r.observations[i];
    o.ground_hits += x.ground_hits;
    o.n_replicas += x.n_replicas;
    e += x.avg_energy;
    m += x.magnetization;
    o.best_energy = std::min(o.best_energy, x.best_energy);
  }
  o.avg_energy = e / static_cast<double>(records.size());
  o.magnetization = m / static_cast<double>(records.size());
  return o;
}

}  // namespace detail

/// Ensemble CSV: per sample step, hits and replicas summed over runs, energy
/// and magnetization averaged. With `tsp`, best_length and optimal_hits follow.
inline void write_records_csv(std::ostream& os, std::span<const RunRecord> records, bool tsp = false) {
  if (records.empty()) throw ContractError("no records to write");
  auto sorted = std::vector<RunRecord>(records.begin(), records.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
  (void)merge_records(sorted);  // grid check
  os << "mc_step,rescaled_time,avg_energy,ground_hits,n_replicas,magnetization" << (tsp ? ",best_length,optimal_hits" : "")
     << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < sorted.front().observations.size(); ++i) {
    const auto o = detail::sum_observations(sorted, i);
    os << o.mc_step << ',' << o.rescaled_time << ',' << o.avg_energy << ',' << o.ground_hits << ',' << o.n_replicas
       << ',' << o.magnetization;
    if (tsp) os << ',' << o.best_energy << ',' << o.ground_hits;
    os << '\n';
  }
}

/// One row per (run, sample): the per-run view behind write_records_csv.
inline void write_runs_csv(std::ostream& os, std::span<const RunRecord> records) {
  os << "run,mc_step,rescaled_time,avg_energy,best_energy,ground_hits,n_replicas,magnetization\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t r = 0; r < records.size(); ++r)
    for (const auto& o : records[r].observations)
      os << r << ',' << o.mc_step << ',' << o.rescaled_time << ',' << o.avg_energy << ',' << o.best_energy << ','
         << o.ground_hits << ',' << o.n_replicas << ',' << o.magnetization << '\n';
}

// ---------------------------------------------------------------------------
// Running

struct RunOutputs {
  std::filesystem::path csv;
  std::filesystem::path runs_csv;  // MC methods only
  std::filesystem::path meta;
  double wall_seconds = 0.0;
  std::vector<OverlapTrajectory> trajectories;
  std::vector<RunRecord> records;
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write '" + p.string() + "'");
  return os;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline std::vector<double> sample_times(const ExperimentConfig& c) {
  return log_spaced_times(c.t_min, c.duration, c.samples_per_decade);
}

}  // namespace detail

/// Executes one experiment and writes <output>/<name>.csv plus a .meta.json
/// sidecar (and <name>.runs.csv for MC methods). Output files depend only on
/// the config; the sidecar's wall time and timestamp are the only variable fields.
inline RunOutputs run(const ExperimentConfig& c) {
  validate(c);
  const auto t_begin = std::chrono::steady_clock::now();
  const Schedule schedule = Schedule::parse(c.schedule);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(c.output, ec);
  if (ec) throw IoError("cannot create output directory '" + c.output + "': " + ec.message());
  RunOutputs out;
  out.csv = fs::path(c.output) / (c.name + ".csv");
  out.meta = fs::path(c.output) / (c.name + ".meta.json");
  nlohmann::json meta;
  meta["artifact_version"] = std::string(kVersion);
  meta["config"] = to_json(c);
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << config_hash(c);
  meta["config_hash"] = hash.str();
  meta["seed_derivation"] = std::string(kSeedDerivation);
  meta["schedule"] = schedule.descriptor();

  if (is_tsp(c.method)) {
    const auto inst = build_tsp(c.model);
    const double opt = inst.n_cities() <= kMaxHeldKarpCities ? held_karp_length(inst) : 0.0;
    TspOptions o;
    if (inst.n_cities() <= kMaxHeldKarpCities) o.optimal_length = opt;
    o.sample_steps = mc_sample_steps(c.steps, c.samples_per_decade);
    o.final_quench = c.final_quench;
    o.threads = c.threads;
    out.records = c.method == Method::TspSa
                      ? sa_tsp(inst, schedule, c.steps, c.n_runs, c.seed, o)
                      : qa_tsp_ensemble(inst, schedule, c.beta_eff, c.replicas, c.steps, c.n_runs, c.seed, o);
    meta["instance"] = inst.label();
    meta["optimal_length"] = opt;
    auto os = detail::open_out(out.csv);
    write_records_csv(os, out.records, true);
  } else {
    const auto inst = build_ising(c.model);
    std::ostringstream ih;
    ih << std::hex << std::setw(16) << std::setfill('0') << instance_hash(inst);
    meta["instance_hash"] = ih.str();
    if (is_exact(c.method)) {
      const auto times = detail::sample_times(c);
      const auto cert = enumerate_ground_states(inst);
      if (c.method == Method::Master) {
        MasterOptions mo;
        mo.certificate = cert;
        mo.stepwise = c.stepwise;
        out.trajectories.push_back(master_evolve(inst, schedule, c.duration, times, mo));
        out.trajectories.push_back(stationary_trajectory(inst, schedule, times, TrajectoryLabel::P_SA_stationary));
      } else {
        EvolutionOptions eo;
        eo.certificate = cert;
        out.trajectories.push_back(c.method == Method::Schrodinger
                                       ? evolve_schrodinger(inst, schedule, c.duration, times, eo)
                                       : evolve_imaginary_time(inst, schedule, c.duration, times, eo));
        out.trajectories.push_back(stationary_trajectory(inst, schedule, times, TrajectoryLabel::P_QA_stationary));
      }
      const auto& d = out.trajectories.front().diagnostics;
      meta["integrator"] = {{"step_factor", d.step_factor}, {"min_dt", d.min_dt},   {"max_dt", d.max_dt},
                            {"steps", d.steps},             {"max_norm_drift", d.max_norm_drift},
                            {"rejected_steps", d.rejected_steps}};
      meta["ground_energy"] = cert.energy;
      auto os = detail::open_out(out.csv);
      write_trajectory_csv(os, out.trajectories);
    } else {
      std::optional<double> e0;
      if (inst.n_spins() <= kMaxEnumerationSpins) e0 = enumerate_ground_states(inst).energy;
      if (e0) meta["ground_energy"] = *e0;
      McOptions mo;
      mo.ground_energy = e0;
      mo.sample_steps = mc_sample_steps(c.steps, c.samples_per_decade);
      mo.final_zero_t_quench = c.final_quench;
      mo.threads = c.threads;
      if (c.method == Method::SaMc) {
        out.records = run_sa(inst, schedule, c.steps, c.n_runs, c.seed, mo);
      } else if (c.method == Method::Qmc) {
        out.records = run_qmc_ensemble(inst, schedule, c.beta_eff, c.replicas, c.steps, c.n_runs, c.seed, mo);
      } else {
        out.records.resize(static_cast<std::size_t>(c.n_runs));
        std::vector<double> probs(static_cast<std::size_t>(c.n_runs));
        detail::parallel_runs(c.n_runs, c.threads, [&](int r) {
          auto res = run_pimc(inst, schedule, c.pimc.beta, c.replicas, c.pimc.equilibration, c.pimc.measurement,
                              c.seed, e0, static_cast<std::uint64_t>(r));
          probs[static_cast<std::size_t>(r)] = res.center_probability;
          out.records[static_cast<std::size_t>(r)] = std::move(res.record);
        });
        meta["pimc_center_probability"] = probs;
      }
      auto os = detail::open_out(out.csv);
      write_records_csv(os, out.records);
    }
  }
  if (!out.records.empty()) {
    out.runs_csv = fs::path(c.output) / (c.name + ".runs.csv");
    auto os = detail::open_out(out.runs_csv);
    write_runs_csv(os, out.records);
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  meta["wall_time_seconds"] = out.wall_seconds;
  meta["timestamp"] = detail::utc_timestamp();
  auto ms = detail::open_out(out.meta);
  ms << meta.dump(2) << '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Series I/O and analysis

/// A scalar observable against time.
struct Series {
  std::string label;
  std::vector<double> t;
  std::vector<double> y;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' in " + where);
  }
}

}  // namespace detail

/// Reads a trajectory CSV (`t,p,label`, one series per label) or an ensemble
/// CSV (`mc_step,...`). `observable` is `p` (probability) or `energy`; with
/// `rescaled`, ensemble series use rescaled_time as the time axis.
inline std::vector<Series> read_series_csv(std::istream& is, const std::string& observable = "p",
                                           bool rescaled = false) {
  if (observable != "p" && observable != "energy") throw ConfigError("observable must be 'p' or 'energy'");
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv(line);
  auto col = [&](std::string_view name) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  std::vector<Series> out;
  if (col("t") == 0 && col("p") == 1 && col("label") == 2) {
    if (observable != "p") throw ConfigError("trajectory CSV only carries probabilities");
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto cells = detail::split_csv(line);
      if (cells.size() != 3) throw ConfigError("bad trajectory row '" + line + "'");
      auto it = std::find_if(out.begin(), out.end(), [&](const Series& s) { return s.label == cells[2]; });
      if (it == out.end()) {
        out.push_back({cells[2], {}, {}});
        it = out.end() - 1;
      }
      it->t.push_back(detail::to_double(cells[0], "t"));
      it->y.push_back(detail::to_double(cells[1], "p"));
    }
    return out;
  }
  const int c_step = col("mc_step"), c_rt = col("rescaled_time"), c_e = col("avg_energy"), c_h = col("ground_hits"),
            c_n = col("n_replicas");
  if (c_step < 0 || c_rt < 0 || c_e < 0 || c_h < 0 || c_n < 0) throw ConfigError("unrecognised CSV header '" + line + "'");
  Series s{observable == "p" ? "P" : "E", {}, {}};
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size()) throw ConfigError("bad ensemble row '" + line + "'");
    s.t.push_back(detail::to_double(cells[rescaled ? c_rt : c_step], "time"));
    s.y.push_back(observable == "p"
                      ? detail::to_double(cells[c_h], "ground_hits") / detail::to_double(cells[c_n], "n_replicas")
                      : detail::to_double(cells[c_e], "avg_energy"));
  }
  out.push_back(std::move(s));
  return out;
}

inline std::vector<Series> read_series_file(const std::string& path, const std::string& observable = "p",
                                            bool rescaled = false) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_series_csv(is, observable, rescaled);
}

inline Series to_series(const OverlapTrajectory& tr) {
  Series s{label_name(tr.label), {}, {}};
  for (const auto& x : tr.samples) {
    s.t.push_back(x.t);
    s.y.push_back(x.p);
  }
  return s;
}

class FitError : public ContractError {
 public:
  using ContractError::ContractError;
};

struct FitReport {
  double t_lo = 0.0;
  double t_hi = 0.0;
  double slope = 0.0;
  double intercept = 0.0;  // log(1 - p) at log t = 0
  double r2 = 0.0;
  int n_used = 0;
  int n_excluded = 0;      // samples with p >= 1
  std::vector<std::string> warnings;
};

/// Least squares of log(1 - p) on log t over samples with t in [t_lo, t_hi].
inline FitReport fit_one_over_t(const Series& s, double t_lo, double t_hi, int min_samples = 10) {
  if (!(t_lo > 0.0) || !(t_hi > t_lo)) throw FitError("fit window needs 0 < t_lo < t_hi");
  if (s.t.size() != s.y.size()) throw FitError("series has mismatched columns");
  FitReport rep;
  rep.t_lo = t_lo;
  rep.t_hi = t_hi;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    if (s.t[i] < t_lo || s.t[i] > t_hi) continue;
    if (!(s.y[i] < 1.0)) {
      ++rep.n_excluded;
      continue;
    }
    x.push_back(std::log(s.t[i]));
    y.push_back(std::log1p(-s.y[i]));
  }
  if (rep.n_excluded > 0) rep.warnings.push_back(std::to_string(rep.n_excluded) + " samples with p >= 1 excluded");
  rep.n_used = static_cast<int>(x.size());
  if (rep.n_used < min_samples) {
    throw FitError("fit window [" + std::to_string(t_lo) + ", " + std::to_string(t_hi) + "] holds " +
                   std::to_string(rep.n_used) + " usable samples; need " + std::to_string(min_samples));
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw FitError("fit window has a single distinct time");
  rep.slope = sxy / sxx;
  rep.intercept = my - rep.slope * mx;
  rep.r2 = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  return rep;
}

/// Linear interpolation in log t; t must lie inside the series range.
inline double interpolate_log_t(const Series& s, double t) {
  if (s.t.empty()) throw ContractError("empty series");
  if (t <= s.t.front()) return s.y.front();
  if (t >= s.t.back()) return s.y.back();
  const auto it = std::upper_bound(s.t.begin(), s.t.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - s.t.begin());
  const double t0 = s.t[i - 1], t1 = s.t[i];
  if (t0 <= 0.0) {
    const double w = (t - t0) / (t1 - t0);
    return s.y[i - 1] + w * (s.y[i] - s.y[i - 1]);
  }
  const double w = std::log(t / t0) / std::log(t1 / t0);
  return s.y[i - 1] + w * (s.y[i] - s.y[i - 1]);
}

struct ComparisonRow {
  double t = 0.0;
  double a = 0.0;
  double b = 0.0;
  double diff = 0.0;  // a - b
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  bool resampled = false;          // b interpolated onto a's grid
  double final_a = 0.0;
  double final_b = 0.0;
  std::string final_ordering;      // "a<b", "a>b" or "a=b"
  std::vector<double> crossings;   // times where a - b changes sign
  std::vector<std::string> notes;
};

/// Aligns b onto a's time grid over their common range (log-t interpolation when
/// the grids differ) and reports final-value ordering and sign changes of a - b.
inline Comparison compare(const Series& a, const Series& b, double tie_tolerance = 0.0) {
  if (a.t.empty() || b.t.empty()) throw ContractError("cannot compare empty series");
  Comparison c;
  const double lo = std::max(a.t.front(), b.t.front()), hi = std::min(a.t.back(), b.t.back());
  if (lo > hi) throw ContractError("series do not overlap in time");
  c.resampled = a.t != b.t;
  if (c.resampled) c.notes.push_back("b resampled onto a's grid by linear interpolation in log t");
  for (std::size_t i = 0; i < a.t.size(); ++i) {
    if (a.t[i] < lo || a.t[i] > hi) continue;
    const double bv = c.resampled ? interpolate_log_t(b, a.t[i]) : b.y[i];
    c.rows.push_back({a.t[i], a.y[i], bv, a.y[i] - bv});
  }
  if (c.rows.empty()) throw ContractError("no common sample times");
  c.final_a = c.rows.back().a;
  c.final_b = c.rows.back().b;
  const double d = c.final_a - c.final_b;
  c.final_ordering = std::abs(d) <= tie_tolerance ? "a=b" : d < 0 ? "a<b" : "a>b";
  for (std::size_t i = 1; i < c.rows.size(); ++i) {
    const double d0 = c.rows[i - 1].diff, d1 = c.rows[i].diff;
    if ((d0 < 0 && d1 > 0) || (d0 > 0 && d1 < 0)) {
      const double t0 = c.rows[i - 1].t, t1 = c.rows[i].t;
      const double w = d0 / (d0 - d1);
      c.crossings.push_back(t0 > 0 ? t0 * std::pow(t1 / t0, w) : t0 + w * (t1 - t0));
    }
  }
  return c;
}

inline void write_comparison_csv(std::ostream& os, const Comparison& c) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& n : c.notes) os << "# " << n << '\n';
  os << "t,a,b,diff\n";
  for (const auto& r : c.rows) os << r.t << ',' << r.a << ',' << r.b << ',' << r.diff << '\n';
}

/// Control value at the last MC step of each side, e.g. to confirm that
/// SA c=20 over t' and QA c=2 over t reach the same endpoint.
inline std::pair<double, double> endpoint_controls(const Schedule& a, double steps_a, const Schedule& b, double steps_b) {
  return {a.value(steps_a), b.value(steps_b)};
}

// ---------------------------------------------------------------------------
// Single-spin table

struct SingleSpinRow {
  double h = 0.0;
  double c = 0.0;
  std::string schedule;
  double analytic_miss = 0.0;
  double ode_miss = 0.0;
  double rel_err = 0.0;
};

/// Final miss probability from the ODE against the asymptotic formula for the
/// form `inv`, `inv_sqrt` or `linear_neg`. Runs end at h t = ht_end (t = 0 for linear_neg).
inline SingleSpinRow single_spin_row(std::string_view form, double h, double c, double ht_end = 1e3) {
  SingleSpinRow row;
  row.h = h;
  row.c = c;
  const SingleSpinParams p(h, c);
  if (form == "inv") {
    const auto s = Schedule::inverse(c);
    row.schedule = s.descriptor();
    row.analytic_miss = inverse_time_final_miss_probability(c);
    row.ode_miss = ode_final_miss(s, h, 1e-8 / h, ht_end / h).adiabatic;
  } else if (form == "inv_sqrt") {
    const auto s = Schedule::inverse_sqrt(c);
    row.schedule = s.descriptor();
    row.analytic_miss = inverse_sqrt_final_miss_probability(p).value;
    row.ode_miss = ode_final_miss(s, h, 1e-12, ht_end / h).adiabatic;
  } else if (form == "linear_neg") {
    row.schedule = Schedule::linear_negative(c).descriptor();
    row.analytic_miss = lz_final_miss_probability(p).value;
    row.ode_miss = lz_ode_miss(p).adiabatic;
  } else {
    throw ConfigError("single-spin form must be inv, inv_sqrt or linear_neg");
  }
  row.rel_err = std::abs(row.ode_miss - row.analytic_miss) / row.analytic_miss;
  return row;
}

inline void write_single_spin_csv(std::ostream& os, std::span<const SingleSpinRow> rows) {
  os << "h,c,schedule,analytic_miss,ode_miss,rel_err\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : rows)
    os << r.h << ',' << r.c << ',' << r.schedule << ',' << r.analytic_miss << ',' << r.ode_miss << ',' << r.rel_err
       << '\n';
}

}  // namespace qanneal
