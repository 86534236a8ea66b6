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
// qanneal command-line driver.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qanneal/qanneal.hpp"

namespace {

using namespace qanneal;

constexpr int kExitConfig = 2;
constexpr int kExitSize = 3;
constexpr int kExitIo = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Experiment config (JSON)")->required();
  app->add_option("--seed", c.seed, "Override the master seed");
  app->add_option("--out", c.out, "Override the output directory");
  app->add_option("--threads", c.threads, "Worker threads for independent runs");
}

ExperimentConfig load(const Common& c) {
  auto cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.output = *c.out;
  if (c.threads) cfg.threads = *c.threads;
  return cfg;
}

std::ofstream open_file(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write '" + p.string() + "'");
  return os;
}

int cmd_gen(const Common& c) {
  const auto cfg = load(c);
  const auto path = std::filesystem::path(cfg.output) / (cfg.name + ".instance");
  auto os = open_file(path);
  if (is_tsp_model(cfg.model)) {
    write_tsp_instance(os, build_tsp(cfg.model));
  } else {
    write_instance(os, build_ising(cfg.model));
  }
  std::cout << path.string() << '\n';
  return 0;
}

int cmd_run(const Common& c) {
  const auto out = run(load(c));
  std::cout << out.csv.string() << '\n' << out.meta.string() << '\n';
  if (!out.runs_csv.empty()) std::cout << out.runs_csv.string() << '\n';
  std::cerr << "wall time " << std::fixed << std::setprecision(2) << out.wall_seconds << " s\n";
  return 0;
}

const Series& pick(const std::vector<Series>& all, const std::string& label, const std::string& file) {
  if (label.empty()) {
    if (all.size() != 1) throw ConfigError(file + " holds several series; pass a label");
    return all.front();
  }
  for (const auto& s : all)
    if (s.label == label) return s;
  throw ConfigError("no series '" + label + "' in " + file);
}

int cmd_fit(const std::string& input, const std::string& label, double lo, double hi) {
  const auto all = read_series_file(input);
  const auto rep = fit_one_over_t(pick(all, label, input), lo, hi);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << std::setprecision(6) << "window " << rep.t_lo << ' ' << rep.t_hi << "\nslope " << rep.slope
            << "\nintercept " << rep.intercept << "\nr2 " << rep.r2 << "\nsamples " << rep.n_used << '\n';
  return 0;
}

struct CompareArgs {
  std::string a, b, label_a, label_b, observable = "p", out;
  bool rescale = false;
};

int cmd_compare(const CompareArgs& args) {
  const auto sa = read_series_file(args.a, args.observable, args.rescale);
  const auto sb = read_series_file(args.b, args.observable, args.rescale);
  const auto cmp = compare(pick(sa, args.label_a, args.a), pick(sb, args.label_b, args.b));
  for (const auto& n : cmp.notes) std::cout << "note: " << n << '\n';
  std::cout << std::setprecision(8) << "final a " << cmp.final_a << "\nfinal b " << cmp.final_b << "\nordering "
            << cmp.final_ordering << "\ncrossings";
  for (double t : cmp.crossings) std::cout << ' ' << t;
  std::cout << '\n';
  if (!args.out.empty()) {
    auto os = open_file(args.out);
    write_comparison_csv(os, cmp);
  }
  return 0;
}

int cmd_quench(const Common& c, std::optional<double> value) {
  const auto cfg = load(c);
  if (is_tsp_model(cfg.model)) throw ConfigError("quench runs on Ising models");
  const auto inst = build_ising(cfg.model);
  QuenchSetup q;
  q.anneal = Schedule::parse(cfg.schedule);
  q.steps = cfg.steps;
  q.value = value ? *value : q.anneal.value(static_cast<double>(cfg.steps));
  q.n_runs = cfg.n_runs;
  q.beta_eff = cfg.beta_eff;
  q.m = cfg.replicas;
  q.seed = cfg.seed;
  q.final_zero_t_quench = cfg.final_quench;
  q.threads = cfg.threads;
  const auto rows = quench_vs_anneal_report(inst, q);
  const auto path = std::filesystem::path(cfg.output) / (cfg.name + ".quench.csv");
  auto os = open_file(path);
  os << "method,mc_step,rescaled_time,mean_energy,energy_stderr,probability\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : rows)
    for (const auto& p : r.series.points)
      os << r.method << ',' << p.mc_step << ',' << p.rescaled_time << ',' << p.mean_energy << ',' << p.energy_stderr
         << ',' << p.probability << '\n';
  std::cout << "quench value " << q.value << '\n';
  for (const auto& r : rows)
    std::cout << std::left << std::setw(14) << r.method << " E0 " << r.initial_energy << "  E_final " << r.final_energy
              << " +- " << r.final_stderr << '\n';
  std::cout << path.string() << '\n';
  return 0;
}

struct SingleSpinArgs {
  std::string form = "inv";
  std::vector<double> h{1.0}, c{1.0};
  double ht_end = 1e3;
  std::string out;
};

int cmd_single_spin(const SingleSpinArgs& a) {
  std::vector<SingleSpinRow> rows;
  for (double h : a.h)
    for (double c : a.c) rows.push_back(single_spin_row(a.form, h, c, a.ht_end));
  if (a.out.empty()) {
    write_single_spin_csv(std::cout, rows);
  } else {
    auto os = open_file(a.out);
    write_single_spin_csv(os, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum and simulated annealing experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(qanneal::kVersion));

  Common gen_c, run_c, quench_c;
  auto* gen = app.add_subcommand("gen", "Write the configured instance to <out>/<name>.instance");
  add_common(gen, gen_c);
  auto* runc = app.add_subcommand("run", "Run an experiment config");
  add_common(runc, run_c);

  std::string fit_in, fit_label;
  double fit_lo = 100.0, fit_hi = 1000.0;
  auto* fit = app.add_subcommand("fit", "Log-log slope of 1 - p over a time window");
  fit->add_option("--input", fit_in, "Trajectory or ensemble CSV")->required();
  fit->add_option("--label", fit_label, "Series label (trajectory CSVs)");
  fit->add_option("--t-lo", fit_lo, "Window start");
  fit->add_option("--t-hi", fit_hi, "Window end");

  CompareArgs cmp_args;
  auto* cmp = app.add_subcommand("compare", "Align two outputs and report ordering and crossings");
  cmp->add_option("--a", cmp_args.a, "First CSV")->required();
  cmp->add_option("--b", cmp_args.b, "Second CSV")->required();
  cmp->add_option("--label-a", cmp_args.label_a, "Series label in the first CSV");
  cmp->add_option("--label-b", cmp_args.label_b, "Series label in the second CSV");
  cmp->add_option("--observable", cmp_args.observable, "p or energy")->check(CLI::IsMember({"p", "energy"}));
  cmp->add_flag("--rescale", cmp_args.rescale, "Use t' = M t for ensemble CSVs");
  cmp->add_option("--out", cmp_args.out, "Write the aligned table here");

  std::optional<double> quench_value;
  auto* quench = app.add_subcommand("quench", "Quench versus anneal on the configured Ising model");
  add_common(quench, quench_c);
  quench->add_option("--value", quench_value, "Quenched T = Gamma (default: schedule(steps))");

  SingleSpinArgs ss;
  auto* single = app.add_subcommand("single-spin", "Single-spin ODE against the asymptotic miss probability");
  single->add_option("--form", ss.form, "inv, inv_sqrt or linear_neg")
      ->check(CLI::IsMember({"inv", "inv_sqrt", "linear_neg"}));
  single->add_option("--field", ss.h, "Longitudinal field(s)")->delimiter(',');
  single->add_option("--coeff", ss.c, "Schedule coefficient(s)")->delimiter(',');
  single->add_option("--ht-end", ss.ht_end, "Final h t");
  single->add_option("--out", ss.out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen(gen_c);
    if (*runc) return cmd_run(run_c);
    if (*fit) return cmd_fit(fit_in, fit_label, fit_lo, fit_hi);
    if (*cmp) return cmd_compare(cmp_args);
    if (*quench) return cmd_quench(quench_c, quench_value);
    if (*single) return cmd_single_spin(ss);
  } catch (const qanneal::SizeLimitError& e) {
    std::cerr << "size limit: " << e.what() << '\n';
    return kExitSize;
  } catch (const qanneal::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const qanneal::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
