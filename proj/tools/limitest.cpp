// Command-line front end: run preset or configured experiments, print
// redundancy bounds, verify the tail-bound lemmas, and estimate limits
// from count files. Stdout is machine-parseable (CSV rows or a single
// number); prose goes to stderr. Exit codes: 0 success, 1 validation
// error, 2 runtime failure.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "limitest/limitest.hpp"

namespace {

using namespace limitest;

std::vector<std::uint64_t> read_count_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open counts file '" + path + "'");
  std::vector<std::uint64_t> counts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      std::size_t pos = 0;
      if (line.find('-') != std::string::npos) throw std::invalid_argument("negative");
      const std::uint64_t v = std::stoull(line, &pos);
      if (pos != line.size()) throw std::invalid_argument("junk");
      counts.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument(path + ": line " + std::to_string(lineno) +
                                  ": expected a non-negative integer");
    }
  }
  if (counts.empty()) throw std::invalid_argument(path + ": no counts found");
  return counts;
}

FiniteDistribution read_probability_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open probability file '" + path + "'");
  std::vector<double> probs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      std::size_t pos = 0;
      const double v = std::stod(line, &pos);
      if (pos != line.size()) throw std::invalid_argument("junk");
      probs.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument(path + ": line " + std::to_string(lineno) +
                                  ": expected a decimal probability");
    }
  }
  if (probs.empty()) throw std::invalid_argument(path + ": no probabilities found");
  KahanSum s;
  for (double p : probs) s.add(p);
  if (std::abs(s.value() - 1.0) > 1e-9)
    throw std::invalid_argument(path + ": probabilities sum to " + std::to_string(s.value()) +
                                ", expected 1 within 1e-9");
  // renormalize the 1e-9 slack away so the strict constructor accepts it
  const double inv = 1.0 / s.value();
  for (double& p : probs) p *= inv;
  return FiniteDistribution::strict(std::move(probs));
}

LemmaGrid parse_lemma_grid(const std::string& spec) {
  // "lambdas=0.1,1,10;deltas=0.5,1;ns=30,100" — omitted keys keep defaults
  LemmaGrid grid;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--grid: expected key=v1,v2,... in '" + part + "'");
    const std::string key = part.substr(0, eq);
    std::vector<double> values;
    std::stringstream vs(part.substr(eq + 1));
    std::string tok;
    while (std::getline(vs, tok, ',')) {
      try {
        values.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw std::invalid_argument("--grid: bad number '" + tok + "'");
      }
    }
    if (values.empty()) throw std::invalid_argument("--grid: empty list for '" + key + "'");
    if (key == "lambdas") {
      grid.lambdas = values;
    } else if (key == "deltas") {
      grid.deltas = values;
    } else if (key == "ns") {
      grid.ns.clear();
      for (double v : values) grid.ns.push_back(static_cast<std::uint64_t>(v));
    } else {
      throw std::invalid_argument("--grid: unknown key '" + key + "'");
    }
  }
  return grid;
}

int cmd_simulate(const std::string& config_path, const std::string& preset,
                 const std::string& out_path, unsigned threads, std::uint64_t seed) {
  ExperimentConfig cfg;
  if (!preset.empty()) {
    const auto p = preset_config(preset);
    if (!p) throw std::invalid_argument("unknown preset '" + preset + "'");
    cfg = *p;
  } else {
    cfg = load_config(config_path);
  }
  cfg.master_seed = seed;
  const RunResult res = run_experiment(cfg, threads);
  emit_csv(res.records, out_path);
  if (!res.warnings.empty()) {
    std::ofstream side(out_path + ".warnings.csv", std::ios::binary);
    if (!side) throw std::runtime_error("cannot write sidecar warnings file");
    side << "warning\n";
    for (const auto& w : res.warnings) side << w << "\n";
  }

  // one summary row per (n, method), in record order
  struct Agg {
    KahanSum value, abs_error, regret;
    std::size_t n_value = 0, n_abs = 0, n_regret = 0;
  };
  std::vector<std::pair<std::pair<std::uint64_t, std::string>, Agg>> agg;
  auto slot = [&](std::uint64_t n, const std::string& m) -> Agg& {
    for (auto& [key, a] : agg)
      if (key.first == n && key.second == m) return a;
    agg.emplace_back(std::make_pair(n, m), Agg{});
    return agg.back().second;
  };
  for (const auto& r : res.records) {
    Agg& a = slot(r.n, r.method);
    if (!std::isnan(r.value)) {
      a.value.add(r.value);
      ++a.n_value;
    }
    if (!std::isnan(r.abs_error)) {
      a.abs_error.add(r.abs_error);
      ++a.n_abs;
    }
    if (!std::isnan(r.regret)) {
      a.regret.add(r.regret);
      ++a.n_regret;
    }
  }
  std::printf("n,method,mean_value,mean_abs_error,mean_regret\n");
  for (const auto& [key, a] : agg) {
    std::printf("%" PRIu64 ",%s", key.first, key.second.c_str());
    if (a.n_value > 0)
      std::printf(",%.10g", a.value.value() / static_cast<double>(a.n_value));
    else
      std::printf(",");
    if (a.n_abs > 0)
      std::printf(",%.10g", a.abs_error.value() / static_cast<double>(a.n_abs));
    else
      std::printf(",");
    if (a.n_regret > 0)
      std::printf(",%.10g\n", a.regret.value() / static_cast<double>(a.n_regret));
    else
      std::printf(",\n");
  }
  std::fprintf(stderr, "wrote %zu records to %s\n", res.records.size(), out_path.c_str());
  if (!res.warnings.empty())
    std::fprintf(stderr, "%zu regime warning(s) in %s.warnings.csv\n", res.warnings.size(),
                 out_path.c_str());
  return 0;
}

int cmd_bounds(std::optional<double> alpha, const std::string& grid) {
  std::vector<double> alphas;
  if (alpha) {
    alphas.push_back(*alpha);
  } else {
    double a = 0.0, b = 0.0, step = 0.0;
    if (std::sscanf(grid.c_str(), "%lf:%lf:%lf", &a, &b, &step) != 3 || step <= 0.0)
      throw std::invalid_argument("--alpha-grid: expected A:B:STEP with STEP > 0");
    for (double x = a; x <= b + 1e-12; x += step) alphas.push_back(x);
  }
  for (const double a : alphas) {
    const RedundancyBounds rb = redundancy_bounds(a);  // throws on bad alpha
    std::printf("%g,%.5f,%.5f\n", a, rb.lower_bits, rb.upper_bits);
  }
  return 0;
}

int cmd_verify(int lemma, const std::string& grid_spec) {
  if (lemma != 6 && lemma != 8)
    throw std::invalid_argument("unknown lemma id " + std::to_string(lemma) +
                                " (supported: 6, 8)");
  const LemmaGrid grid = grid_spec.empty() ? LemmaGrid{} : parse_lemma_grid(grid_spec);
  const LemmaCheckReport rep =
      lemma == 6 ? verify_poisson_tail(grid) : verify_poisson_difference(grid);
  std::printf("%d,%s,%.6g,%.6g\n", lemma, rep.pass ? "pass" : "fail", rep.max_ratio_m1,
              rep.max_ratio_m2);
  std::fprintf(stderr, "lemma %d: %s; max ratios %.6g / %.6g (%s)\n", lemma,
               rep.grid_description.c_str(), rep.max_ratio_m1, rep.max_ratio_m2,
               rep.pass ? "pass" : "FAIL");
  return rep.pass ? 0 : 2;
}

int cmd_estimate(const std::string& task, const std::string& counts_path,
                 const std::string& q_path, const std::string& method,
                 std::optional<double> truth) {
  if (method != "plugin" && method != "optimal")
    throw std::invalid_argument("unknown method '" + method + "' (supported: plugin, optimal)");
  const auto raw = read_count_file(counts_path);
  std::uint64_t total = 0;
  for (const auto c : raw) total += c;
  if (total == 0) throw std::invalid_argument(counts_path + ": counts are all zero");
  const EmpiricalCounts counts(raw, total, SamplingMode::Multinomial);

  EstimateReport rep;
  if (task == "entropy") {
    rep = method == "plugin" ? plugin_entropy(counts) : optimal_entropy_estimator(counts);
  } else if (task == "bayes-error" || task == "l1") {
    if (q_path.empty())
      throw std::invalid_argument("--q is required for task '" + task + "'");
    const FiniteDistribution q = read_probability_file(q_path);
    if (q.support_size() != counts.counts.size())
      throw std::invalid_argument("counts and q have different support sizes");
    if (task == "bayes-error") {
      rep = method == "plugin" ? plugin_bayes_error(counts, q) : optimal_bayes_error(counts, q);
    } else {
      if (method == "plugin") {
        rep.estimate = l1_distance(empirical_distribution(counts), q);
        rep.estimator_id = "plugin_l1";
      } else {
        rep = optimal_l1_estimator(counts, q);
      }
    }
  } else {
    throw std::invalid_argument("unknown task '" + task +
                                "' (supported: entropy, bayes-error, l1)");
  }
  if (truth) {
    rep = with_truth(rep, *truth);
    std::printf("%.17g,%.17g,%.17g\n", rep.estimate, rep.truth, rep.abs_error);
  } else {
    std::printf("%.17g\n", rep.estimate);
  }
  return 0;
}

int cmd_rates(const std::string& csv_path, const std::string& method) {
  const auto records = parse_csv(csv_path);
  std::vector<std::string> methods;
  if (!method.empty()) {
    methods.push_back(method);
  } else {
    for (const auto& r : records)
      if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
        methods.push_back(r.method);
  }
  for (const auto& m : methods) {
    try {
      const RateFit fit = fit_rate_slope(records, m);
      std::printf("%s,%.10g,%.10g,%.10g\n", m.c_str(), fit.slope, fit.intercept, fit.r_squared);
    } catch (const std::invalid_argument& e) {
      if (!method.empty()) throw;  // explicit method: propagate as validation error
      std::fprintf(stderr, "skipping %s: %s\n", m.c_str(), e.what());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"estimate, plug-in, and achieve classification/compression limits on finite alphabets"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "run a Monte Carlo experiment and write CSV");
  std::string sim_config, sim_preset, sim_out;
  unsigned sim_threads = 1;
  std::uint64_t sim_seed = 0;
  auto* opt_config = sim->add_option("--config", sim_config, "experiment config (JSON)");
  auto* opt_preset =
      sim->add_option("--preset", sim_preset, "preset name: fig1, fig2, entropy, enlargement");
  sim->add_option("--out", sim_out, "output CSV path")->required();
  sim->add_option("--threads", sim_threads, "worker threads (default 1)");
  sim->add_option("--seed", sim_seed, "master seed (required for reproducibility)")->required();
  opt_config->excludes(opt_preset);
  opt_preset->excludes(opt_config);

  auto* bnd = app.add_subcommand("bounds", "print redundancy bound rows: alpha,lower,upper");
  double bnd_alpha = 0.0;
  std::string bnd_grid;
  auto* opt_alpha = bnd->add_option("--alpha", bnd_alpha, "single alpha in (0, e/(2*pi))");
  auto* opt_agrid = bnd->add_option("--alpha-grid", bnd_grid, "grid A:B:STEP");
  opt_alpha->excludes(opt_agrid);
  opt_agrid->excludes(opt_alpha);

  auto* ver = app.add_subcommand("verify", "check a tail-bound lemma on an exact-CDF grid");
  int ver_lemma = 0;
  std::string ver_grid;
  ver->add_option("--lemma", ver_lemma, "lemma id: 6 or 8")->required();
  ver->add_option("--grid", ver_grid, "grid override: lambdas=..;deltas=..;ns=..");

  auto* est = app.add_subcommand("estimate", "estimate a limit from a counts file");
  std::string est_task, est_counts, est_q, est_method;
  double est_truth = 0.0;
  est->add_option("--task", est_task, "entropy | bayes-error | l1")->required();
  est->add_option("--counts", est_counts, "newline-delimited integer counts")->required();
  est->add_option("--q", est_q, "newline-delimited reference probabilities");
  est->add_option("--method", est_method, "plugin | optimal")->required();
  auto* opt_truth = est->add_option("--truth", est_truth, "known true value");

  auto* rat = app.add_subcommand("rates", "fit log-log error slopes from an emitted CSV");
  std::string rat_csv, rat_method;
  rat->add_option("--csv", rat_csv, "CSV produced by simulate")->required();
  rat->add_option("--method", rat_method, "restrict to one method tag");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (sim->parsed()) {
      if (sim_config.empty() == sim_preset.empty())
        throw std::invalid_argument("simulate: exactly one of --config/--preset is required");
      return cmd_simulate(sim_config, sim_preset, sim_out, sim_threads, sim_seed);
    }
    if (bnd->parsed()) {
      if ((opt_alpha->count() > 0) == (opt_agrid->count() > 0))
        throw std::invalid_argument("bounds: exactly one of --alpha/--alpha-grid is required");
      return cmd_bounds(opt_alpha->count() ? std::optional<double>(bnd_alpha) : std::nullopt,
                        bnd_grid);
    }
    if (ver->parsed()) return cmd_verify(ver_lemma, ver_grid);
    if (est->parsed())
      return cmd_estimate(est_task, est_counts, est_q, est_method,
                          opt_truth->count() ? std::optional<double>(est_truth) : std::nullopt);
    if (rat->parsed()) return cmd_rates(rat_csv, rat_method);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DegenerateSampleError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return 2;
  }
  return 0;
}
