// Copyright 2026 The cfsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Subcommands:
//   simulate        draw from the observational joint, emit CSV
//   counterfactual  run a conditioned + intervened query, emit table + summary
//   fairness        audit a predictor over sampled or listed cases
//   bench           score randomized conditioning cases against the oracle
//
// Exit codes: 0 success, 2 input or model error, 3 infeasible evidence,
// 4 predictor protocol failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cfsim/bench.hpp"
#include "cfsim/conditioning.hpp"
#include "cfsim/counterfactual.hpp"
#include "cfsim/errors.hpp"
#include "cfsim/fairness.hpp"
#include "cfsim/format.hpp"
#include "cfsim/io.hpp"
#include "cfsim/model.hpp"
#include "cfsim/simulate.hpp"

namespace {

int default_threads() {
  if (const char* env = std::getenv("CFSIM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<int>(v);
  }
  return 1;
}

cfsim::ResampleScheme scheme_from(const std::string& name) {
  if (name == "multinomial") return cfsim::ResampleScheme::kMultinomial;
  if (name == "systematic") return cfsim::ResampleScheme::kSystematic;
  throw cfsim::IoError("unknown resampling scheme '" + name +
                       "' (use multinomial or systematic)");
}

std::ostream& open_output(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw cfsim::IoError("cannot open '" + path + "' for writing");
  return file;
}

void print_summary(std::ostream& os, const cfsim::TableSummary& s) {
  os << "rows              " << s.rows << "\n";
  os << "ess               " << cfsim::format_double(s.ess) << "\n";
  os << "unique rows (%)   "
     << cfsim::format_double(100.0 * s.unique_fraction) << "\n";
  os << "na roots          " << s.na_roots << "\n";
  os << "column,mean,variance";
  for (double q : cfsim::kSummaryQuantiles) os << ",q" << q;
  os << "\n";
  for (const auto& c : s.columns) {
    os << cfsim::csv_escape(c.name) << "," << cfsim::format_double(c.mean)
       << "," << cfsim::format_double(c.variance);
    for (double q : c.quantiles) os << "," << cfsim::format_double(q);
    os << "\n";
  }
}

struct SimulateArgs {
  std::string model;
  std::string out;
  size_t n = 1000;
  std::uint64_t seed = 0;
  int threads = default_threads();
};

int run_simulate(const SimulateArgs& a) {
  cfsim::Scm m = cfsim::load_model(a.model);
  cfsim::ParticleTable t = cfsim::simulate(m, a.n, a.seed, nullptr, a.threads);
  std::ofstream file;
  cfsim::write_csv(open_output(file, a.out), t);
  return 0;
}

struct CounterfactualArgs {
  std::string model;
  std::string query;
  std::string out;
  std::string format = "table";
  std::string resampling = "multinomial";
  bool has_n = false;
  size_t n = 0;
  bool has_seed = false;
  std::uint64_t seed = 0;
  double tol = 0.0;
  bool no_prune = false;
  int threads = default_threads();
};

int run_counterfactual(const CounterfactualArgs& a) {
  cfsim::Scm m = cfsim::load_model(a.model);
  cfsim::CounterfactualQuery q = cfsim::load_query(a.query);
  if (a.has_n) q.n = a.n;
  if (a.has_seed) q.seed = a.seed;
  if (a.no_prune) q.prune = false;
  q.opts.scheme = scheme_from(a.resampling);
  q.opts.root.tol = a.tol;
  q.opts.threads = a.threads;
  cfsim::ParticleTable t = cfsim::simulate_counterfactual(m, q);
  if (!a.out.empty()) cfsim::write_csv_file(a.out, t);
  if (a.format == "csv") {
    if (a.out.empty()) cfsim::write_csv(std::cout, t);
  } else if (a.format == "table") {
    print_summary(std::cout, cfsim::summarize(t, q.targets));
  } else {
    throw cfsim::IoError("unknown format '" + a.format +
                         "' (use csv or table)");
  }
  return 0;
}

struct FairnessArgs {
  std::string model;
  std::string audit;
  std::string out;
  std::string resampling = "multinomial";
  bool has_n = false;
  size_t n = 0;
  bool has_seed = false;
  std::uint64_t seed = 0;
  double tol = 0.0;
  int threads = default_threads();
};

void write_fairness_csv(std::ostream& os, const cfsim::FairnessAudit& audit,
                        const cfsim::AggregateReport& rep) {
  os << "case";
  for (const auto& s : audit.sensitive) os << "," << cfsim::csv_escape(s.name);
  os << ",mean_prediction,case_difference,case_failed\n";
  for (size_t i = 0; i < rep.cases.size(); ++i) {
    const cfsim::CaseReport& cr = rep.cases[i];
    for (const cfsim::CellResult& cell : cr.cells) {
      os << i;
      for (double v : cell.s_values) os << "," << cfsim::format_double(v);
      os << "," << cfsim::format_double(cell.mean_prediction) << ","
         << cfsim::format_double(cr.difference) << "," << (cr.failed ? 1 : 0)
         << "\n";
    }
  }
  if (!os) throw cfsim::IoError("failed to write fairness report");
}

int run_fairness(const FairnessArgs& a) {
  cfsim::Scm m = cfsim::load_model(a.model);
  cfsim::FairnessFile file = cfsim::load_fairness(a.audit);
  if (a.has_n) file.audit.n = a.n;
  if (a.has_seed) file.audit.seed = a.seed;
  file.audit.opts.scheme = scheme_from(a.resampling);
  file.audit.opts.root.tol = a.tol;
  file.audit.opts.threads = a.threads;
  std::unique_ptr<cfsim::Predictor> pred = file.predictor.make();
  std::vector<cfsim::FairnessCase> cases =
      file.sample ? cfsim::sample_cases(m, file.audit, file.case_count,
                                        file.audit.seed)
                  : file.cases;
  cfsim::AggregateReport rep =
      cfsim::evaluate_fairness_batch(*pred, m, file.audit, cases);
  std::cout << "predictor               " << pred->describe() << "\n";
  std::cout << "cases run               " << rep.cases_run << "\n";
  std::cout << "cases completed         " << rep.cases_completed << "\n";
  std::cout << "cases failed            " << rep.cases_failed << "\n";
  std::cout << "zero difference (%)     "
            << cfsim::format_double(rep.zero_pct) << "\n";
  std::cout << "difference < 0.01 (%)   "
            << cfsim::format_double(rep.small_pct) << "\n";
  std::cout << "median difference       "
            << cfsim::format_double(rep.median_difference) << "\n";
  std::cout << "maximum difference      "
            << cfsim::format_double(rep.max_difference) << "\n";
  if (!a.out.empty()) {
    std::ofstream file_out;
    write_fairness_csv(open_output(file_out, a.out), file.audit, rep);
  }
  return 0;
}

struct BenchArgs {
  std::vector<std::string> cases;
  std::string out;
  std::string resampling = "multinomial";
  bool has_rounds = false;
  int rounds = 0;
  std::vector<size_t> n_grid;
  bool has_seed = false;
  std::uint64_t seed = 0;
  int threads = default_threads();
};

void write_bench_csv(std::ostream& os, const std::vector<cfsim::BenchRow>& rows) {
  os << "case,n,rounds,infeasible,unique_pct,z_mean,z_mean_min,z_mean_max,"
        "z_sd,z_sd_min,z_sd_max,ks,cor_diff,seconds_per_round\n";
  for (const cfsim::BenchRow& r : rows) {
    os << cfsim::csv_escape(r.case_name) << "," << r.n << ","
       << r.rounds_completed << "," << r.rounds_infeasible << ","
       << cfsim::format_double(r.unique_pct) << ","
       << cfsim::format_double(r.z_mean) << ","
       << cfsim::format_double(r.z_mean_min) << ","
       << cfsim::format_double(r.z_mean_max) << ","
       << cfsim::format_double(r.z_sd) << ","
       << cfsim::format_double(r.z_sd_min) << ","
       << cfsim::format_double(r.z_sd_max) << ","
       << cfsim::format_double(r.ks) << ","
       << cfsim::format_double(r.cor_diff) << ","
       << cfsim::format_double(r.seconds_per_round) << "\n";
  }
  if (!os) throw cfsim::IoError("failed to write benchmark report");
}

int run_bench(const BenchArgs& a) {
  std::vector<cfsim::BenchCase> cases;
  for (const std::string& name : a.cases) {
    if (name.size() > 5 && name.substr(name.size() - 5) == ".json") {
      for (cfsim::BenchCase& bc : cfsim::load_bench(name)) {
        cases.push_back(std::move(bc));
      }
    } else {
      cases.push_back(cfsim::bench_preset(name));
    }
  }
  cfsim::ConditioningOptions opts;
  opts.scheme = scheme_from(a.resampling);
  opts.threads = a.threads;
  std::vector<cfsim::BenchRow> rows;
  for (cfsim::BenchCase& bc : cases) {
    if (a.has_rounds) bc.rounds = a.rounds;
    if (!a.n_grid.empty()) bc.n_grid = a.n_grid;
    if (a.has_seed) bc.seed = a.seed;
    bc.validate();
    std::cerr << bc.settings_note() << "\n";
    cfsim::BenchReport rep = cfsim::run_case(bc, opts);
    rows.insert(rows.end(), rep.rows.begin(), rep.rows.end());
  }
  std::ofstream file;
  write_bench_csv(open_output(file, a.out), rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"counterfactual simulation and fairness auditing"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "draw from the observational joint");
  sim_cmd->add_option("--model", sim.model, "model file (JSON)")->required();
  sim_cmd->add_option("--n", sim.n, "number of rows");
  sim_cmd->add_option("--seed", sim.seed, "random seed");
  sim_cmd->add_option("--threads", sim.threads, "worker threads");
  sim_cmd->add_option("--out", sim.out, "output CSV path (default stdout)");

  CounterfactualArgs cf;
  CLI::App* cf_cmd = app.add_subcommand(
      "counterfactual", "simulate a conditioned and intervened distribution");
  cf_cmd->add_option("--model", cf.model, "model file (JSON)")->required();
  cf_cmd->add_option("--query", cf.query, "query file (JSON)")->required();
  cf_cmd->add_option("--n", cf.n, "particle count (overrides query)")
      ->each([&cf](const std::string&) { cf.has_n = true; });
  cf_cmd->add_option("--seed", cf.seed, "random seed (overrides query)")
      ->each([&cf](const std::string&) { cf.has_seed = true; });
  cf_cmd->add_option("--threads", cf.threads, "worker threads");
  cf_cmd->add_option("--resampling", cf.resampling,
                     "multinomial or systematic");
  cf_cmd->add_option("--tol", cf.tol, "root-finding tolerance (0 = auto)");
  cf_cmd->add_flag("--no-prune", cf.no_prune,
                   "simulate every variable, not just relevant ancestors");
  cf_cmd->add_option("--out", cf.out, "write the particle table CSV here");
  cf_cmd->add_option("--format", cf.format,
                     "stdout content: table (summary) or csv");

  FairnessArgs fair;
  CLI::App* fair_cmd =
      app.add_subcommand("fairness", "audit a predictor for counterfactual "
                                     "fairness");
  fair_cmd->add_option("--model", fair.model, "model file (JSON)")->required();
  fair_cmd->add_option("--case", fair.audit, "audit file (JSON)")->required();
  fair_cmd->add_option("--n", fair.n, "particles per cell (overrides file)")
      ->each([&fair](const std::string&) { fair.has_n = true; });
  fair_cmd->add_option("--seed", fair.seed, "random seed (overrides file)")
      ->each([&fair](const std::string&) { fair.has_seed = true; });
  fair_cmd->add_option("--threads", fair.threads, "worker threads");
  fair_cmd->add_option("--resampling", fair.resampling,
                       "multinomial or systematic");
  fair_cmd->add_option("--tol", fair.tol, "root-finding tolerance (0 = auto)");
  fair_cmd->add_option("--out", fair.out, "write the per-case CSV here");

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand(
      "bench", "score randomized linear Gaussian cases against the exact "
               "conditional law");
  bench_cmd
      ->add_option("--case", bench.cases,
                   "stock case name (A..E) or case file (JSON); repeatable")
      ->required();
  bench_cmd->add_option("--rounds", bench.rounds, "rounds per case")
      ->each([&bench](const std::string&) { bench.has_rounds = true; });
  bench_cmd->add_option("--n", bench.n_grid, "particle counts; repeatable");
  bench_cmd->add_option("--seed", bench.seed, "random seed")
      ->each([&bench](const std::string&) { bench.has_seed = true; });
  bench_cmd->add_option("--threads", bench.threads, "worker threads");
  bench_cmd->add_option("--resampling", bench.resampling,
                        "multinomial or systematic");
  bench_cmd->add_option("--out", bench.out, "output CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim_cmd->parsed()) return run_simulate(sim);
    if (cf_cmd->parsed()) return run_counterfactual(cf);
    if (fair_cmd->parsed()) return run_fairness(fair);
    if (bench_cmd->parsed()) return run_bench(bench);
  } catch (const cfsim::InfeasibleEvidenceError& e) {
    const auto& d = e.diagnostics();
    std::cerr << "infeasible evidence: " << e.what() << "\n";
    if (!d.condition.empty()) {
      std::cerr << "  condition: " << d.condition;
      if (d.condition_index >= 0) {
        std::cerr << " (stage " << d.condition_index << ")";
      }
      std::cerr << "\n";
    }
    if (d.na_roots > 0) {
      std::cerr << "  rows with no error-term root: " << d.na_roots << "\n";
    }
    if (d.observed_min != d.observed_max) {
      std::cerr << "  simulated range: [" << cfsim::format_double(d.observed_min)
                << ", " << cfsim::format_double(d.observed_max) << "]\n";
    }
    if (!d.marginal.empty()) {
      std::cerr << "  simulated marginal:";
      for (const auto& [v, c] : d.marginal) {
        std::cerr << " " << cfsim::format_double(v) << ":" << c;
      }
      std::cerr << "\n";
    }
    return 3;
  } catch (const cfsim::PredictorError& e) {
    std::cerr << "predictor error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
