#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "limitest/classify.hpp"
#include "limitest/dist.hpp"
#include "limitest/envelope.hpp"
#include "limitest/estimate.hpp"
#include "limitest/numeric.hpp"

namespace limitest {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CsvError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class Task { BayesError, Entropy };

struct FamilySpec {
  enum class Kind { Uniform, Zipf, Explicit };
  Kind kind = Kind::Uniform;
  double beta = 0.0;                // Zipf only
  std::vector<double> probs;        // Explicit only

  static FamilySpec uniform() { return FamilySpec{}; }
  static FamilySpec zipf(double beta) { return FamilySpec{Kind::Zipf, beta, {}}; }
  static FamilySpec explicit_probs(std::vector<double> p) {
    return FamilySpec{Kind::Explicit, 0.0, std::move(p)};
  }

  FiniteDistribution build(std::size_t support_size) const {
    switch (kind) {
      case Kind::Uniform: return make_uniform(support_size);
      case Kind::Zipf: return make_zipf(support_size, beta);
      case Kind::Explicit:
        if (probs.size() != support_size)
          throw ConfigError("explicit family size does not match support_size");
        return FiniteDistribution::strict(probs);
    }
    throw ConfigError("unknown family kind");
  }

  bool operator==(const FamilySpec&) const = default;
};

/// Declarative Monte Carlo experiment. Method tags:
///   BayesError, q known:   estimators {plugin, optimal},
///                          classifiers {mle_regret, tq_regret}
///   BayesError, q unknown: estimators {two_sample_plugin, two_sample_optimal},
///                          classifiers {scheffe_regret}
///   Entropy:               estimators {plugin, optimal, compression}
struct ExperimentConfig {
  std::string experiment_id;
  std::uint32_t support_size = 0;
  FamilySpec p_family;
  FamilySpec q_family;
  bool q_known = true;
  std::vector<std::uint64_t> n_grid;
  std::uint32_t trials = 1;
  std::uint64_t master_seed = 0;
  std::vector<std::string> estimators;
  std::vector<std::string> classifiers;
  Task task = Task::BayesError;
  bool record_timing = false;  // off by default so CSVs are byte-reproducible

  bool operator==(const ExperimentConfig&) const = default;
};

/// One CSV row. NaN means the field is absent for this method.
struct ResultRecord {
  std::string experiment_id;
  std::uint64_t n = 0;
  std::uint64_t trial = 0;
  std::uint64_t seed = 0;  // stream index used by this trial
  std::string method;
  double value = std::numeric_limits<double>::quiet_NaN();
  double truth = std::numeric_limits<double>::quiet_NaN();
  double abs_error = std::numeric_limits<double>::quiet_NaN();
  double regret = std::numeric_limits<double>::quiet_NaN();
  double rate_bound = std::numeric_limits<double>::quiet_NaN();
  double wallclock_ms = 0.0;
};

inline bool record_equal(const ResultRecord& a, const ResultRecord& b) {
  auto feq = [](double x, double y) {
    return (std::isnan(x) && std::isnan(y)) || x == y;
  };
  return a.experiment_id == b.experiment_id && a.n == b.n && a.trial == b.trial &&
         a.seed == b.seed && a.method == b.method && feq(a.value, b.value) &&
         feq(a.truth, b.truth) && feq(a.abs_error, b.abs_error) && feq(a.regret, b.regret) &&
         feq(a.rate_bound, b.rate_bound) && feq(a.wallclock_ms, b.wallclock_ms);
}

struct RunResult {
  std::vector<ResultRecord> records;
  std::vector<std::string> warnings;  // sidecar metadata, never fatal
};

namespace detail {

inline std::vector<std::string> known_estimators(Task task, bool q_known) {
  if (task == Task::Entropy) return {"plugin", "optimal", "compression"};
  if (q_known) return {"plugin", "optimal"};
  return {"two_sample_plugin", "two_sample_optimal"};
}

inline std::vector<std::string> known_classifiers(Task task, bool q_known) {
  if (task == Task::Entropy) return {};
  if (q_known) return {"mle_regret", "tq_regret"};
  return {"scheffe_regret"};
}

inline void validate_methods(const ExperimentConfig& cfg) {
  const auto est = known_estimators(cfg.task, cfg.q_known);
  const auto cls = known_classifiers(cfg.task, cfg.q_known);
  auto check = [](const std::vector<std::string>& tags, const std::vector<std::string>& known,
                  const char* what) {
    for (const auto& t : tags) {
      if (std::find(known.begin(), known.end(), t) == known.end()) {
        std::string msg = std::string("unknown ") + what + " tag '" + t + "'; valid:";
        for (const auto& k : known) msg += " " + k;
        throw ConfigError(msg);
      }
    }
  };
  check(cfg.estimators, est, "estimator");
  check(cfg.classifiers, cls, "classifier");
}

/// Literal reading (constant 1) of the operating-regime condition
/// ln S <= ln n <= ln(sum_i sqrt(q_i) ^ q_i sqrt(n ln n)).
inline std::optional<std::string> regime_warning(std::uint64_t n, const FiniteDistribution& q) {
  const double ln_n = std::log(static_cast<double>(n));
  const double ln_s = std::log(static_cast<double>(q.support_size()));
  KahanSum s;
  for (std::size_t i = 0; i < q.support_size(); ++i)
    s.add(std::min(std::sqrt(q[i]),
                   q[i] * std::sqrt(static_cast<double>(n) * ln_n)));
  const double rhs = s.value() > 0.0 ? std::log(s.value()) : -1e300;
  if (ln_s <= ln_n && ln_n <= rhs) return std::nullopt;
  std::ostringstream os;
  os << "n=" << n << ": outside literal operating regime (ln S=" << ln_s << ", ln n=" << ln_n
     << ", ln sum=" << rhs << ")";
  return os.str();
}

struct MethodPlan {
  std::vector<std::string> order;  // estimators then classifiers, config order
  std::size_t index_of(const std::string& m) const {
    for (std::size_t i = 0; i < order.size(); ++i)
      if (order[i] == m) return i;
    return order.size();
  }
};

}  // namespace detail

/// Runs trials x n_grid x methods and returns deterministically ordered
/// records. Trial t draws from stream t at every grid point, so the samples
/// for growing n are nested prefixes of one path (common random numbers:
/// error curves in n stay smooth at modest trial counts); the second sample
/// of two-sample methods lives in streams offset by `trials`. Output is
/// identical for any worker count.
inline RunResult run_experiment(const ExperimentConfig& cfg, unsigned threads = 1) {
  if (cfg.support_size == 0) throw ConfigError("support_size must be positive");
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.n_grid.empty()) throw ConfigError("n_grid must be non-empty");
  for (std::size_t i = 1; i < cfg.n_grid.size(); ++i)
    if (cfg.n_grid[i] <= cfg.n_grid[i - 1])
      throw ConfigError("n_grid must be strictly increasing");
  detail::validate_methods(cfg);

  const FiniteDistribution p = cfg.p_family.build(cfg.support_size);
  const FiniteDistribution q = cfg.q_family.build(cfg.support_size);
  const std::uint64_t grid_count = cfg.n_grid.size();
  const std::uint64_t trials = cfg.trials;
  const std::uint64_t q_stream_base = trials;

  double truth = 0.0;
  std::optional<LabeledDistribution> ld;
  if (cfg.task == Task::BayesError) {
    ld.emplace(p, q, 0.5);
    truth = bayes_error(*ld);
  } else {
    truth = shannon_entropy(p);
  }

  detail::MethodPlan plan;
  plan.order = cfg.estimators;
  plan.order.insert(plan.order.end(), cfg.classifiers.begin(), cfg.classifiers.end());

  RunResult out;
  if (cfg.task == Task::BayesError) {
    for (const std::uint64_t n : cfg.n_grid)
      if (auto w = detail::regime_warning(n, q)) out.warnings.push_back(*w);
  }

  // Exact regrets are per-n constants; precompute them serially.
  std::map<std::pair<std::uint64_t, std::string>, RegretReport> exact_regret;
  for (const auto& tag : cfg.classifiers) {
    if (tag == "mle_regret" || tag == "tq_regret") {
      const ThresholdRule rule = tag == "mle_regret" ? ThresholdRule::mle() : ThresholdRule::tq();
      for (const std::uint64_t n : cfg.n_grid)
        exact_regret.emplace(std::make_pair(n, tag), expected_regret_exact(rule, *ld, n));
    }
  }

  struct Job {
    std::uint64_t g;
    std::uint64_t t;
  };
  std::vector<Job> jobs;
  jobs.reserve(grid_count * trials);
  for (std::uint64_t g = 0; g < grid_count; ++g)
    for (std::uint64_t t = 0; t < trials; ++t) jobs.push_back(Job{g, t});

  std::vector<std::vector<ResultRecord>> slots(jobs.size());
  std::mutex clamp_mu;
  std::set<std::pair<std::uint64_t, std::string>> clamp_events;

  auto run_job = [&](const Job& job) {
    const std::uint64_t n = cfg.n_grid[job.g];
    const std::uint64_t stream = job.t;
    const RngSeed seed{cfg.master_seed, stream};
    std::vector<ResultRecord>& recs = slots[job.g * trials + job.t];

    auto emit = [&](const std::string& method, double value, bool with_truth_flag, double regret,
                    double rate_bound, double ms) {
      ResultRecord r;
      r.experiment_id = cfg.experiment_id;
      r.n = n;
      r.trial = job.t;
      r.seed = stream;
      r.method = method;
      r.value = value;
      if (with_truth_flag) {
        r.truth = truth;
        r.abs_error = std::abs(value - truth);
      }
      r.regret = regret;
      r.rate_bound = rate_bound;
      r.wallclock_ms = cfg.record_timing ? ms : 0.0;
      recs.push_back(std::move(r));
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto unclamped = [&](const EstimateReport& rep, const std::string& method) {
      if (!std::isnan(rep.pre_clamp) && rep.estimate != rep.pre_clamp) {
        std::lock_guard<std::mutex> lock(clamp_mu);
        clamp_events.emplace(n, method);
      }
      return rep.estimate;
    };
    auto timed = [&](auto&& fn) {
      const auto start = std::chrono::steady_clock::now();
      const double v = fn();
      const auto stop = std::chrono::steady_clock::now();
      return std::pair<double, double>(
          v, std::chrono::duration<double, std::milli>(stop - start).count());
    };

    if (cfg.task == Task::Entropy) {
      const auto seq = sample_sequence(p, n, seed);
      const EmpiricalCounts counts = counts_from_sequence(seq, cfg.support_size);
      for (const auto& tag : cfg.estimators) {
        if (tag == "plugin") {
          auto [v, ms] = timed([&] { return unclamped(plugin_entropy(counts), tag); });
          emit(tag, v, true, nan, nan, ms);
        } else if (tag == "optimal") {
          auto [v, ms] = timed([&] { return unclamped(optimal_entropy_estimator(counts), tag); });
          emit(tag, v, true, nan, nan, ms);
        } else if (tag == "compression") {
          auto [v, ms] = timed(
              [&] { return unclamped(compression_entropy_estimator(seq, cfg.support_size), tag); });
          emit(tag, v, true, nan, nan, ms);
        }
      }
      return;
    }

    // Bayes-error task
    const EmpiricalCounts counts_r = sample_counts(p, n, SamplingMode::Multinomial, seed);
    std::optional<EmpiricalCounts> counts_q;
    if (!cfg.q_known) {
      const RngSeed qseed{cfg.master_seed, q_stream_base + stream};
      counts_q.emplace(sample_counts(q, n, SamplingMode::Multinomial, qseed));
    }
    for (const auto& tag : cfg.estimators) {
      if (tag == "plugin") {
        auto [v, ms] = timed([&] { return unclamped(plugin_bayes_error(counts_r, q), tag); });
        emit(tag, v, true, nan, nan, ms);
      } else if (tag == "optimal") {
        auto [v, ms] = timed([&] { return unclamped(optimal_bayes_error(counts_r, q), tag); });
        emit(tag, v, true, nan, nan, ms);
      } else if (tag == "two_sample_plugin") {
        auto [v, ms] =
            timed([&] { return unclamped(two_sample_plugin_bayes_error(counts_r, *counts_q), tag); });
        emit(tag, v, true, nan, nan, ms);
      } else if (tag == "two_sample_optimal") {
        auto [v, ms] =
            timed([&] { return unclamped(two_sample_optimal_bayes_error(counts_r, *counts_q), tag); });
        emit(tag, v, true, nan, nan, ms);
      }
    }
    for (const auto& tag : cfg.classifiers) {
      if (tag == "scheffe_regret") {
        auto [v, ms] = timed([&] {
          return envelope_regret(two_sample_regime(counts_r, *counts_q), *ld);
        });
        emit(tag, nan, false, v, regret_rate_bound(q, n), ms);
      } else {
        const RegretReport& rep = exact_regret.at(std::make_pair(n, tag));
        emit(tag, nan, false, rep.regret, rep.rate_bound, 0.0);
      }
    }
  };

  threads = std::max(1u, threads);
  if (threads == 1 || jobs.size() <= 1) {
    for (const Job& job : jobs) run_job(job);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        run_job(jobs[i]);
      }
    };
    std::vector<std::thread> pool;
    const unsigned k = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
    pool.reserve(k);
    for (unsigned i = 0; i < k; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (const auto& [n, method] : clamp_events) {
    std::ostringstream os;
    os << "n=" << n << " method=" << method << ": range clamp activated";
    out.warnings.push_back(os.str());
  }
  for (auto& slot : slots)
    for (auto& r : slot) out.records.push_back(std::move(r));
  std::stable_sort(out.records.begin(), out.records.end(),
                   [&](const ResultRecord& a, const ResultRecord& b) {
                     if (a.n != b.n) return a.n < b.n;
                     if (a.trial != b.trial) return a.trial < b.trial;
                     return plan.index_of(a.method) < plan.index_of(b.method);
                   });
  return out;
}

// ---------------------------------------------------------------------------
// Rate fitting and the enlargement check.

struct RateFit {
  std::string method_id;
  double slope = 0.0;      // d log error / d log n
  double intercept = 0.0;
  double r_squared = 0.0;
};

namespace detail {

/// Per-n mean of abs_error (estimators) or regret (classifiers).
inline std::map<std::uint64_t, double> method_error_means(const std::vector<ResultRecord>& records,
                                                          const std::string& method,
                                                          std::size_t min_per_n = 0) {
  std::map<std::uint64_t, std::pair<KahanSum, std::size_t>> acc;
  bool use_abs_error = false;
  for (const auto& r : records)
    if (r.method == method && !std::isnan(r.abs_error)) use_abs_error = true;
  for (const auto& r : records) {
    if (r.method != method) continue;
    const double v = use_abs_error ? r.abs_error : r.regret;
    if (std::isnan(v)) continue;
    acc[r.n].first.add(v);
    acc[r.n].second += 1;
  }
  std::map<std::uint64_t, double> means;
  for (const auto& [n, pair] : acc) {
    if (pair.second < min_per_n) continue;
    means[n] = pair.first.value() / static_cast<double>(pair.second);
  }
  return means;
}

}  // namespace detail

inline RateFit fit_rate_slope(const std::vector<ResultRecord>& records,
                              const std::string& method_id) {
  const auto means = detail::method_error_means(records, method_id, 5);
  if (means.size() < 4)
    throw std::invalid_argument(
        "fit_rate_slope: need >= 4 distinct n values with >= 5 records each");
  std::vector<double> xs, ys;
  for (const auto& [n, mean] : means) {
    if (!(mean > 0.0))
      throw std::invalid_argument("fit_rate_slope: non-positive mean error at some n");
    xs.push_back(std::log(static_cast<double>(n)));
    ys.push_back(std::log(mean));
  }
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  RateFit fit;
  fit.method_id = method_id;
  fit.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / m;
  double ss_res = 0, ss_tot = 0;
  const double ymean = sy / m;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double pred = fit.intercept + fit.slope * xs[i];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - ymean) * (ys[i] - ymean);
  }
  fit.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
  return fit;
}

enum class EnlargementMap { NLogN, Identity };

struct EnlargementRow {
  std::uint64_t n = 0;
  std::uint64_t m = 0;  // comparison sample size for the plug-in side
  double optimal_error = 0.0;
  double plugin_error = 0.0;
  double ratio = 1.0;
  bool interpolated = false;
};

struct EnlargementTable {
  std::vector<EnlargementRow> rows;
  double max_fold_deviation = 1.0;  // max over rows of max(ratio, 1/ratio)
};

/// Ratios mean_error(optimal, n) / mean_error(plugin, m(n)) with
/// m(n) = round(n ln n) (or m = n for the identity map). When m is not on
/// the grid the plug-in mean is taken from its log-log fit and flagged.
inline EnlargementTable enlargement_check(const std::vector<ResultRecord>& records,
                                          const std::vector<std::uint64_t>& base_ns,
                                          const std::string& optimal_method = "optimal",
                                          const std::string& plugin_method = "plugin",
                                          EnlargementMap map = EnlargementMap::NLogN) {
  const auto opt_means = detail::method_error_means(records, optimal_method);
  const auto plu_means = detail::method_error_means(records, plugin_method);
  if (opt_means.empty() || plu_means.empty())
    throw std::invalid_argument("enlargement_check: both methods must be present in records");
  std::optional<RateFit> plugin_fit;
  EnlargementTable table;
  for (const std::uint64_t n : base_ns) {
    const auto it = opt_means.find(n);
    if (it == opt_means.end())
      throw std::invalid_argument("enlargement_check: no optimal records at requested n");
    EnlargementRow row;
    row.n = n;
    row.m = map == EnlargementMap::NLogN
                ? static_cast<std::uint64_t>(std::llround(static_cast<double>(n) *
                                                          std::log(static_cast<double>(n))))
                : n;
    row.optimal_error = it->second;
    if (const auto pit = plu_means.find(row.m); pit != plu_means.end()) {
      row.plugin_error = pit->second;
    } else {
      if (!plugin_fit) plugin_fit = fit_rate_slope(records, plugin_method);
      row.plugin_error = std::exp(plugin_fit->intercept +
                                  plugin_fit->slope * std::log(static_cast<double>(row.m)));
      row.interpolated = true;
    }
    if (row.optimal_error < 1e-15 && row.plugin_error < 1e-15)
      row.ratio = 1.0;  // degenerate case: both exactly solved
    else
      row.ratio = row.optimal_error / row.plugin_error;
    table.rows.push_back(row);
    const double fold = std::max(row.ratio, row.ratio > 0.0 ? 1.0 / row.ratio : 1e300);
    table.max_fold_deviation = std::max(table.max_fold_deviation, fold);
  }
  return table;
}

// ---------------------------------------------------------------------------
// CSV and config I/O.

inline constexpr const char* kCsvHeader =
    "experiment_id,n,trial,seed,method,value,truth,abs_error,regret,rate_bound,wallclock_ms";

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double_field(const std::string& s, std::size_t line, const char* field) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw CsvError("line " + std::to_string(line) + ": field '" + field + "' is not a number");
  }
  if (pos != s.size())
    throw CsvError("line " + std::to_string(line) + ": trailing junk in field '" + field + "'");
  return v;
}

inline std::uint64_t parse_u64_field(const std::string& s, std::size_t line, const char* field) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("junk");
    return v;
  } catch (const std::exception&) {
    throw CsvError("line " + std::to_string(line) + ": field '" + field +
                   "' is not a non-negative integer");
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

/// Writes records with the fixed header; doubles carry 17 significant
/// digits so parsing restores them exactly.
inline void emit_csv(const std::vector<ResultRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_csv: cannot open '" + path + "' for writing");
  out << kCsvHeader << "\n";
  for (const auto& r : records) {
    out << r.experiment_id << ',' << r.n << ',' << r.trial << ',' << r.seed << ',' << r.method
        << ',' << detail::format_double(r.value) << ',' << detail::format_double(r.truth) << ','
        << detail::format_double(r.abs_error) << ',' << detail::format_double(r.regret) << ','
        << detail::format_double(r.rate_bound) << ',' << detail::format_double(r.wallclock_ms)
        << "\n";
  }
  if (!out) throw std::runtime_error("emit_csv: write failure on '" + path + "'");
}

inline std::vector<ResultRecord> parse_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("parse_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw CsvError("parse_csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw CsvError("parse_csv: line 1: unexpected header");
  std::vector<ResultRecord> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 11)
      throw CsvError("line " + std::to_string(lineno) + ": expected 11 fields, got " +
                     std::to_string(f.size()));
    ResultRecord r;
    r.experiment_id = f[0];
    r.n = detail::parse_u64_field(f[1], lineno, "n");
    r.trial = detail::parse_u64_field(f[2], lineno, "trial");
    r.seed = detail::parse_u64_field(f[3], lineno, "seed");
    r.method = f[4];
    r.value = detail::parse_double_field(f[5], lineno, "value");
    r.truth = detail::parse_double_field(f[6], lineno, "truth");
    r.abs_error = detail::parse_double_field(f[7], lineno, "abs_error");
    r.regret = detail::parse_double_field(f[8], lineno, "regret");
    r.rate_bound = detail::parse_double_field(f[9], lineno, "rate_bound");
    r.wallclock_ms = detail::parse_double_field(f[10], lineno, "wallclock_ms");
    if (std::isnan(r.wallclock_ms)) r.wallclock_ms = 0.0;
    records.push_back(std::move(r));
  }
  return records;
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                                const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

inline FamilySpec family_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  const std::string type = j.value("type", "");
  if (type == "uniform") {
    reject_unknown_keys(j, {"type"}, where);
    return FamilySpec::uniform();
  }
  if (type == "zipf") {
    reject_unknown_keys(j, {"type", "beta"}, where);
    if (!j.contains("beta")) throw ConfigError("config: " + where + ".beta is required");
    return FamilySpec::zipf(j.at("beta").get<double>());
  }
  if (type == "explicit") {
    reject_unknown_keys(j, {"type", "probs"}, where);
    if (!j.contains("probs")) throw ConfigError("config: " + where + ".probs is required");
    return FamilySpec::explicit_probs(j.at("probs").get<std::vector<double>>());
  }
  throw ConfigError("config: " + where + ".type must be uniform, zipf, or explicit");
}

inline nlohmann::json family_to_json(const FamilySpec& f) {
  nlohmann::json j;
  switch (f.kind) {
    case FamilySpec::Kind::Uniform: j["type"] = "uniform"; break;
    case FamilySpec::Kind::Zipf:
      j["type"] = "zipf";
      j["beta"] = f.beta;
      break;
    case FamilySpec::Kind::Explicit:
      j["type"] = "explicit";
      j["probs"] = f.probs;
      break;
  }
  return j;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  detail::reject_unknown_keys(
      j,
      {"experiment_id", "support_size", "p_family", "q_family", "q_known", "n_grid", "trials",
       "master_seed", "estimators", "classifiers", "task", "record_timing"},
      "top level");
  for (const char* key : {"experiment_id", "support_size", "p_family", "q_family", "q_known",
                          "n_grid", "trials", "master_seed", "estimators", "classifiers", "task"})
    if (!j.contains(key)) throw ConfigError(std::string("config: missing key '") + key + "'");
  ExperimentConfig cfg;
  cfg.experiment_id = j.at("experiment_id").get<std::string>();
  if (cfg.experiment_id.empty() || cfg.experiment_id.find(',') != std::string::npos)
    throw ConfigError("config: experiment_id must be non-empty and comma-free");
  cfg.support_size = j.at("support_size").get<std::uint32_t>();
  cfg.p_family = detail::family_from_json(j.at("p_family"), "p_family");
  cfg.q_family = detail::family_from_json(j.at("q_family"), "q_family");
  cfg.q_known = j.at("q_known").get<bool>();
  cfg.n_grid = j.at("n_grid").get<std::vector<std::uint64_t>>();
  cfg.trials = j.at("trials").get<std::uint32_t>();
  cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
  cfg.estimators = j.at("estimators").get<std::vector<std::string>>();
  cfg.classifiers = j.at("classifiers").get<std::vector<std::string>>();
  const std::string task = j.at("task").get<std::string>();
  if (task == "bayes_error")
    cfg.task = Task::BayesError;
  else if (task == "entropy")
    cfg.task = Task::Entropy;
  else
    throw ConfigError("config: task must be 'bayes_error' or 'entropy'");
  cfg.record_timing = j.value("record_timing", false);
  detail::validate_methods(cfg);
  return cfg;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["experiment_id"] = cfg.experiment_id;
  j["support_size"] = cfg.support_size;
  j["p_family"] = detail::family_to_json(cfg.p_family);
  j["q_family"] = detail::family_to_json(cfg.q_family);
  j["q_known"] = cfg.q_known;
  j["n_grid"] = cfg.n_grid;
  j["trials"] = cfg.trials;
  j["master_seed"] = cfg.master_seed;
  j["estimators"] = cfg.estimators;
  j["classifiers"] = cfg.classifiers;
  j["task"] = cfg.task == Task::BayesError ? "bayes_error" : "entropy";
  if (cfg.record_timing) j["record_timing"] = true;
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("load_config: '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_config: cannot open '" + path + "' for writing");
  out << config_to_json(cfg).dump(2) << "\n";
  if (!out) throw std::runtime_error("save_config: write failure on '" + path + "'");
}

// ---------------------------------------------------------------------------
// Presets.

inline std::vector<std::uint64_t> arithmetic_grid(std::uint64_t from, std::uint64_t to,
                                                  std::uint64_t step) {
  std::vector<std::uint64_t> g;
  for (std::uint64_t n = from; n <= to; n += step) g.push_back(n);
  return g;
}

/// Zipf(0.3) source vs a known uniform reference on S = 1000,
/// n = 10k..100k in steps of 10k, 20 trials.
inline ExperimentConfig fig1_config() {
  ExperimentConfig cfg;
  cfg.experiment_id = "fig1";
  cfg.support_size = 1000;
  cfg.p_family = FamilySpec::zipf(0.3);
  cfg.q_family = FamilySpec::uniform();
  cfg.q_known = true;
  cfg.n_grid = arithmetic_grid(10000, 100000, 10000);
  cfg.trials = 20;
  cfg.master_seed = 7;
  cfg.estimators = {"plugin", "optimal"};
  cfg.classifiers = {"mle_regret", "tq_regret"};
  cfg.task = Task::BayesError;
  return cfg;
}

/// Same source pair, both distributions unknown (two-sample methods).
inline ExperimentConfig fig2_config() {
  ExperimentConfig cfg = fig1_config();
  cfg.experiment_id = "fig2";
  cfg.q_known = false;
  cfg.estimators = {"two_sample_plugin", "two_sample_optimal"};
  cfg.classifiers = {"scheffe_regret"};
  return cfg;
}

inline ExperimentConfig entropy_config() {
  ExperimentConfig cfg;
  cfg.experiment_id = "entropy";
  cfg.support_size = 1000;
  cfg.p_family = FamilySpec::uniform();
  cfg.q_family = FamilySpec::uniform();
  cfg.q_known = true;
  cfg.n_grid = arithmetic_grid(2000, 20000, 2000);
  cfg.trials = 20;
  cfg.master_seed = 7;
  cfg.estimators = {"plugin", "optimal", "compression"};
  cfg.classifiers = {};
  cfg.task = Task::Entropy;
  return cfg;
}

/// Geometric base grid plus the matching round(n ln n) points, so the
/// sample-size-enlargement ratio needs no interpolation.
inline ExperimentConfig enlargement_config() {
  ExperimentConfig cfg;
  cfg.experiment_id = "enlargement";
  cfg.support_size = 1000;
  cfg.p_family = FamilySpec::uniform();
  cfg.q_family = FamilySpec::uniform();
  cfg.q_known = true;
  cfg.n_grid = {2000, 4000, 8000, 15202, 33176, 71898};
  cfg.trials = 30;
  cfg.master_seed = 7;
  cfg.estimators = {"plugin", "optimal"};
  cfg.classifiers = {};
  cfg.task = Task::BayesError;
  return cfg;
}

inline std::optional<ExperimentConfig> preset_config(const std::string& name) {
  if (name == "fig1") return fig1_config();
  if (name == "fig2") return fig2_config();
  if (name == "entropy") return entropy_config();
  if (name == "enlargement") return enlargement_config();
  return std::nullopt;
}

}  // namespace limitest
