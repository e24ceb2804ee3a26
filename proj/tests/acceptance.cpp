// Acceptance suite: every release gate runs at its stated tolerance and
// prints one PASS/FAIL line. Run all gates with no arguments or a single
// one with --criterion N; the exit code is 0 only if every executed gate
// passed.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "limitest/limitest.hpp"

using namespace limitest;

namespace {

struct Gate {
  int id;
  const char* name;
  std::function<bool(std::string&)> run;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  out.count = xs.size();
  if (xs.empty()) return out;
  KahanSum s;
  for (const double x : xs) s.add(x);
  out.mean = s.value() / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    KahanSum sq;
    for (const double x : xs) sq.add((x - out.mean) * (x - out.mean));
    out.se = std::sqrt(sq.value() / static_cast<double>(xs.size() - 1) /
                       static_cast<double>(xs.size()));
  }
  return out;
}

std::map<std::uint64_t, MeanSe> per_n(const std::vector<ResultRecord>& records,
                                      const std::string& method, bool use_regret) {
  std::map<std::uint64_t, std::vector<double>> buckets;
  for (const auto& r : records) {
    if (r.method != method) continue;
    buckets[r.n].push_back(use_regret ? r.regret : r.abs_error);
  }
  std::map<std::uint64_t, MeanSe> out;
  for (const auto& [n, xs] : buckets) out[n] = mean_se(xs);
  return out;
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

bool criterion_1_fig1(std::string& detail) {
  const ExperimentConfig cfg = fig1_config();  // seed 7, 20 trials, S = 1000
  const RunResult res = run_experiment(cfg, 2);
  const auto plugin = per_n(res.records, "plugin", false);
  const auto optimal = per_n(res.records, "optimal", false);
  const auto mle = per_n(res.records, "mle_regret", true);
  const auto tq = per_n(res.records, "tq_regret", true);

  bool ordered = true;
  for (const std::uint64_t n : cfg.n_grid)
    ordered = ordered && optimal.at(n).mean < plugin.at(n).mean;

  auto inversions = [&](const std::map<std::uint64_t, MeanSe>& curve) {
    int count = 0;
    double prev = 1e300;
    for (const auto& [n, ms] : curve) {
      if (ms.mean > prev) ++count;
      prev = ms.mean;
    }
    return count;
  };
  const int inv_plugin = inversions(plugin);
  const int inv_optimal = inversions(optimal);

  bool regret_ordered = true;
  for (const std::uint64_t n : cfg.n_grid) {
    const double slack = 2.0 * std::hypot(tq.at(n).se, mle.at(n).se);
    regret_ordered = regret_ordered && tq.at(n).mean <= mle.at(n).mean + slack + 1e-15;
  }

  std::ostringstream os;
  os << "optimal<plugin at all n: " << (ordered ? "yes" : "NO")
     << "; inversions plugin/optimal: " << inv_plugin << "/" << inv_optimal
     << "; tq<=mle+2se at all n: " << (regret_ordered ? "yes" : "NO");
  detail = os.str();
  return ordered && inv_plugin <= 1 && inv_optimal <= 1 && regret_ordered;
}

bool criterion_2_counterexample(std::string& detail) {
  const std::uint64_t n = 1000;
  const std::size_t S = 1001;
  std::vector<double> rv(S, 1.0 / static_cast<double>(n)), qv(S, 0.0);
  rv[S - 1] = 0.0;
  qv[S - 1] = 1.0;
  const LabeledDistribution ld(FiniteDistribution::strict(rv),
                               FiniteDistribution::strict(qv), 0.5);
  const double expected =
      0.5 * std::pow(1.0 - 1.0 / static_cast<double>(n), static_cast<double>(n));
  const auto mle = expected_regret_exact(ThresholdRule::mle(), ld, n);
  const auto tq = expected_regret_exact(ThresholdRule::tq(), ld, n);
  std::ostringstream os;
  os << "mle regret " << mle.regret << " vs closed form " << expected << " (diff "
     << std::abs(mle.regret - expected) << "); tq regret " << tq.regret;
  detail = os.str();
  return std::abs(mle.regret - expected) <= 1e-10 && std::abs(tq.regret) <= 1e-12;
}

bool criterion_3_rate_slopes(std::string& detail) {
  // (a) plug-in Bayes-error slope on uniform P = Q
  ExperimentConfig cfg;
  cfg.experiment_id = "rates";
  cfg.support_size = 1000;
  cfg.p_family = FamilySpec::uniform();
  cfg.q_family = FamilySpec::uniform();
  cfg.q_known = true;
  cfg.n_grid = {2000, 4000, 8000, 16000, 32000};
  cfg.trials = 50;
  cfg.master_seed = 7;
  cfg.estimators = {"plugin"};
  cfg.classifiers = {};
  cfg.task = Task::BayesError;
  const auto res = run_experiment(cfg, 2);
  const RateFit fit = fit_rate_slope(res.records, "plugin");
  const bool a_ok = std::abs(fit.slope + 0.5) <= 0.1;

  // (b) ERM regret slope on the alternating family with margin ~ sqrt(S/n)
  const std::size_t S = 100;
  std::vector<double> xs, ys;
  for (const std::uint64_t n : {100ull, 200ull, 400ull, 800ull, 1600ull, 3200ull, 6400ull}) {
    const double d = std::min(0.25 * std::sqrt(static_cast<double>(S) / n), 0.49);
    std::vector<double> rv(S), qv(S);
    for (std::size_t x = 0; x < S; ++x) {
      const double eta = 0.5 + ((x % 2 == 0) ? d : -d);
      qv[x] = 2.0 * eta / static_cast<double>(S);
      rv[x] = 2.0 * (1.0 - eta) / static_cast<double>(S);
    }
    const LabeledDistribution ld(FiniteDistribution::strict(rv),
                                 FiniteDistribution::strict(qv), 0.5);
    const auto rep =
        expected_regret_erm(ld, n, RegretReport::Method::MonteCarlo, 400, RngSeed{11, 0});
    xs.push_back(std::log(static_cast<double>(n)));
    ys.push_back(std::log(rep.regret));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double m = static_cast<double>(xs.size());
  const double erm_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const bool b_ok = std::abs(erm_slope + 0.5) <= 0.15;

  std::ostringstream os;
  os << "plugin slope " << fit.slope << " (target -0.5 +- 0.1); erm slope " << erm_slope
     << " (target -0.5 +- 0.15)";
  detail = os.str();
  return a_ok && b_ok;
}

bool criterion_4_enlargement(std::string& detail) {
  const ExperimentConfig cfg = enlargement_config();
  const auto res = run_experiment(cfg, 2);
  const auto table = enlargement_check(res.records, {2000, 4000, 8000});
  bool ok = true;
  std::ostringstream os;
  os << "ratios";
  for (const auto& row : table.rows) {
    os << " " << row.n << ":" << row.ratio;
    ok = ok && row.ratio >= 0.25 && row.ratio <= 4.0 && !row.interpolated;
  }
  detail = os.str();
  return ok;
}

bool criterion_5_bias_directions(std::string& detail) {
  const std::size_t S = 50;
  const std::uint64_t n = 200, trials = 10000;
  std::vector<double> two_point(S, 0.0);
  two_point[0] = 0.9;
  two_point[1] = 0.1;
  const std::vector<std::pair<const char*, FiniteDistribution>> sources = {
      {"uniform", make_uniform(S)},
      {"zipf1", make_zipf(S, 1.0)},
      {"two-point", FiniteDistribution::strict(two_point)},
  };
  bool ok = true;
  std::ostringstream os;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const double truth = shannon_entropy(sources[s].second);
    std::vector<double> plug, comp;
    plug.reserve(trials);
    comp.reserve(trials);
    std::size_t pathwise_violations = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
      const auto seq =
          sample_sequence(sources[s].second, n, RngSeed{1000 + s, t});
      const double hp = plugin_entropy(counts_from_sequence(seq, S)).estimate;
      const double hc = compression_entropy_estimator(seq, S).estimate;
      plug.push_back(hp);
      comp.push_back(hc);
      if (hc < hp - 1e-10) ++pathwise_violations;
    }
    const MeanSe mp = mean_se(plug), mc = mean_se(comp);
    const bool down = mp.mean <= truth + 3.0 * mp.se;
    const bool up = mc.mean >= truth - 3.0 * mc.se;
    ok = ok && down && up && pathwise_violations == 0;
    os << sources[s].first << "(H=" << truth << " plug " << mp.mean << " comp " << mc.mean
       << " viol " << pathwise_violations << ") ";
  }
  detail = os.str();
  return ok;
}

bool criterion_6_redundancy(std::string& detail) {
  // CLI value check
  const std::string out_path = "/tmp/limitest_acc_bounds.txt";
  const int code = run_command(std::string(LIMITEST_CLI_PATH) +
                               " bounds --alpha 0.1 > " + out_path + " 2>/dev/null");
  double lower = 0.0, upper = 0.0, alpha = 0.0;
  const std::string printed = slurp(out_path);
  const bool parsed =
      std::sscanf(printed.c_str(), "%lf,%lf,%lf", &alpha, &lower, &upper) == 3;
  const bool cli_ok = code == 0 && parsed && std::abs(lower - 0.10565635031520036) <= 1e-4 &&
                      std::abs(upper - 0.2534007814476135) <= 1e-4;

  bool grid_ok = true;
  for (int i = 1; i <= 100; ++i) {
    const double a = 0.001 + (kRedundancyAlphaMax - 0.002) * (i - 1) / 99.0;
    const auto b = redundancy_bounds(a);
    grid_ok = grid_ok && b.lower_bits <= b.upper_bits;
  }

  // measured add-half redundancy at S = 0.2 n
  const std::uint64_t n = 5000;
  const std::size_t S = 1000;
  const auto p = make_uniform(S);
  const double truth = shannon_entropy(p);
  std::vector<double> reds;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const auto seq = sample_sequence(p, n, RngSeed{606, t});
    reds.push_back(compression_entropy_estimator(seq, S).estimate - truth);
  }
  const MeanSe red = mean_se(reds);
  const double floor_bits = redundancy_bounds(0.2).lower_bits - 0.02;
  const bool mc_ok = red.mean >= floor_bits;

  std::ostringstream os;
  os << "cli (" << printed.substr(0, printed.find('\n')) << ") ok=" << cli_ok
     << "; grid ok=" << grid_ok << "; measured redundancy " << red.mean << " >= " << floor_bits
     << ": " << (mc_ok ? "yes" : "NO");
  detail = os.str();
  return cli_ok && grid_ok && mc_ok;
}

bool criterion_7_lemma_verifiers(std::string& detail) {
  const int c6 = run_command(std::string(LIMITEST_CLI_PATH) + " verify --lemma 6 > /dev/null 2>&1");
  const int c8 = run_command(std::string(LIMITEST_CLI_PATH) + " verify --lemma 8 > /dev/null 2>&1");
  const auto rep6 = verify_poisson_tail();
  const auto rep8 = verify_poisson_difference();
  std::ostringstream os;
  os << "lemma6 exit " << c6 << " ratios " << rep6.max_ratio_m1 << "/" << rep6.max_ratio_m2
     << "; lemma8 exit " << c8 << " ratios " << rep8.max_ratio_m1 << "/" << rep8.max_ratio_m2
     << " (guard " << kPoissonDifferenceGuard << ")";
  detail = os.str();
  return c6 == 0 && c8 == 0 && rep6.pass && rep8.pass;
}

bool criterion_8_lower_bound_fixture(std::string& detail) {
  const LowerBoundPrior prior(make_uniform(10), 100, 0.4);
  bool ok = true;
  std::ostringstream os;
  for (const auto& rule : {ThresholdRule::mle(), ThresholdRule::tq()}) {
    const auto rep = bayes_regret_lower_fixture(prior, rule);
    // exhaustive tau: mc_stderr is zero, so the bound must hold outright
    const bool pass = rep.tau_average >= rep.bound - 3.0 * rep.mc_stderr;
    ok = ok && pass && rep.exhaustive;
    os << rule.name() << " avg " << rep.tau_average << " vs bound " << rep.bound << "; ";
  }
  detail = os.str();
  return ok;
}

bool criterion_9_determinism(std::string& detail) {
  const std::string a = "/tmp/limitest_acc_det_a.csv";
  const std::string b = "/tmp/limitest_acc_det_b.csv";
  const std::string c = "/tmp/limitest_acc_det_c.csv";
  const std::string base = std::string(LIMITEST_CLI_PATH) + " simulate --preset fig1 --seed 7 ";
  const int ra = run_command(base + "--threads 1 --out " + a + " > /dev/null 2>&1");
  const int rb = run_command(base + "--threads 8 --out " + b + " > /dev/null 2>&1");
  const int rc = run_command(base + "--threads 8 --out " + c + " > /dev/null 2>&1");
  const std::string sa = slurp(a), sb = slurp(b), sc = slurp(c);
  const bool files_ok = !sa.empty() && sa == sb && sb == sc;
  const bool sidecars_ok = slurp(a + ".warnings.csv") == slurp(b + ".warnings.csv");
  std::ostringstream os;
  os << "exits " << ra << "/" << rb << "/" << rc << "; " << sa.size()
     << " bytes; 1-thread == 8-thread == repeat: " << (files_ok ? "yes" : "NO")
     << "; sidecars match: " << (sidecars_ok ? "yes" : "NO");
  detail = os.str();
  return ra == 0 && rb == 0 && rc == 0 && files_ok && sidecars_ok;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);
  }
  const std::vector<Gate> gates = {
      {1, "fig1 reproduction (ordering, monotonicity, regret)", criterion_1_fig1},
      {2, "exact rate counterexample (t_MLE vs t_Q)", criterion_2_counterexample},
      {3, "rate slopes (plug-in -1/2, ERM -1/2)", criterion_3_rate_slopes},
      {4, "effective sample size enlargement ratio in [1/4, 4]", criterion_4_enlargement},
      {5, "bias directions (plug-in below, compression above)", criterion_5_bias_directions},
      {6, "redundancy bounds and measured add-half redundancy", criterion_6_redundancy},
      {7, "tail-bound lemma verifiers", criterion_7_lemma_verifiers},
      {8, "perturbed-prior regret lower bound", criterion_8_lower_bound_fixture},
      {9, "byte-identical CSV across threads and runs", criterion_9_determinism},
  };
  bool all_ok = true;
  for (const auto& gate : gates) {
    if (only != 0 && gate.id != only) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = gate.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %d: %s [%s]\n", ok ? "PASS" : "FAIL", gate.id, gate.name,
                detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
