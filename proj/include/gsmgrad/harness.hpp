#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gsmgrad/common.hpp"
#include "gsmgrad/diagnostics.hpp"
#include "gsmgrad/objectives.hpp"
#include "gsmgrad/optimizers.hpp"

namespace gsmgrad {

/// Fully validated experiment description: problem, optimizer, noise,
/// seeds, and output destination.
struct ExperimentConfig {
  std::string problem;
  int m = 1;
  ProblemParams problem_params;
  ParamPoint x0;                   // resolved to size m
  std::string w0_init = "uniform"; // uniform | random-simplex
  OptimizerConfig opt;
  bool has_noise = false;
  double sigma = 0.0;
  std::vector<std::uint64_t> seeds;
  long record_every = 1;
  std::string output_dir = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& v, int line, const char* key) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    std::ostringstream os;
    os << "config line " << line << ": key '" << key
       << "' expects a number, got '" << v << "'";
    throw std::invalid_argument(os.str());
  }
}

inline long long parse_int(const std::string& v, int line, const char* key) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    std::ostringstream os;
    os << "config line " << line << ": key '" << key
       << "' expects an integer, got '" << v << "'";
    throw std::invalid_argument(os.str());
  }
}

inline std::vector<double> parse_double_list(const std::string& v, int line,
                                             const char* key) {
  std::vector<double> out;
  for (const std::string& item : split(v, ','))
    out.push_back(parse_double(trim(item), line, key));
  return out;
}

inline std::string format17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

/// Parses a `key = value` document ('#' starts a comment). Unknown keys are
/// rejected; later assignments override earlier ones; every semantic error
/// names the offending key.
inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  cfg.opt.beta_prime = 0.0;  // spectral auto unless set

  static const std::set<std::string> known = {
      "problem", "m",       "centers",          "x0",    "algorithm",
      "alpha",   "beta",    "beta_prime",       "rho",   "warm_start_iters",
      "T",       "batch",   "sigma",            "seed",  "seeds",
      "record_every",       "output_dir",       "w0"};

  std::map<std::string, std::pair<int, std::string>> kv;  // key -> (line, value)
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    const auto hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::ostringstream os;
      os << "config line " << line << ": expected key=value, got '" << s
         << "'";
      throw std::invalid_argument(os.str());
    }
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    if (key.empty() || value.empty()) {
      std::ostringstream os;
      os << "config line " << line << ": empty key or value";
      throw std::invalid_argument(os.str());
    }
    if (!known.count(key)) {
      std::ostringstream os;
      os << "config line " << line << ": unknown key '" << key << "'";
      throw std::invalid_argument(os.str());
    }
    kv[key] = {line, value};
  }

  auto has = [&](const char* k) { return kv.count(k) > 0; };
  auto get = [&](const char* k) -> const std::pair<int, std::string>& {
    return kv.at(k);
  };

  if (!has("problem"))
    throw std::invalid_argument("config: missing required key 'problem'");
  cfg.problem = get("problem").second;
  static const std::set<std::string> problems = {
      "quadratic-pair", "quartic-pair", "exp-pair", "mixed-smooth"};
  if (!problems.count(cfg.problem))
    throw std::invalid_argument(
        "config: unknown problem '" + cfg.problem +
        "'; valid: quadratic-pair, quartic-pair, exp-pair, mixed-smooth");

  if (has("m")) {
    const auto& [ln, v] = get("m");
    const long long m = detail::parse_int(v, ln, "m");
    if (m < 1) throw std::invalid_argument("config: m must be >= 1");
    cfg.m = static_cast<int>(m);
  }
  if (has("centers")) {
    const auto& [ln, v] = get("centers");
    cfg.problem_params["centers"] = detail::parse_double_list(v, ln, "centers");
  }

  if (!has("algorithm"))
    throw std::invalid_argument("config: missing required key 'algorithm'");
  cfg.opt.algorithm = algorithm_from_string(get("algorithm").second);

  auto require_positive = [&](const char* k, double& dst) {
    if (!has(k)) {
      std::ostringstream os;
      os << "config: missing required key '" << k << "'";
      throw std::invalid_argument(os.str());
    }
    const auto& [ln, v] = get(k);
    dst = detail::parse_double(v, ln, k);
    if (!(dst > 0.0) || !std::isfinite(dst)) {
      std::ostringstream os;
      os << "config: key '" << k << "' must be a positive finite number, got "
         << v;
      throw std::invalid_argument(os.str());
    }
  };
  require_positive("alpha", cfg.opt.alpha);
  require_positive("beta", cfg.opt.beta);

  if (has("beta_prime")) {
    const auto& [ln, v] = get("beta_prime");
    cfg.opt.beta_prime = detail::parse_double(v, ln, "beta_prime");
    if (cfg.opt.beta_prime < 0.0 || !std::isfinite(cfg.opt.beta_prime))
      throw std::invalid_argument(
          "config: key 'beta_prime' must be >= 0 (0 selects the spectral "
          "step)");
  }
  if (has("rho")) {
    const auto& [ln, v] = get("rho");
    cfg.opt.rho = detail::parse_double(v, ln, "rho");
    if (cfg.opt.rho < 0.0 || !std::isfinite(cfg.opt.rho))
      throw std::invalid_argument("config: key 'rho' must be >= 0");
  }
  if (has("warm_start_iters")) {
    const auto& [ln, v] = get("warm_start_iters");
    const long long n = detail::parse_int(v, ln, "warm_start_iters");
    if (n < 0)
      throw std::invalid_argument("config: warm_start_iters must be >= 0");
    cfg.opt.warm_start_iters = n;
  }

  if (!has("T"))
    throw std::invalid_argument("config: missing required key 'T'");
  {
    const auto& [ln, v] = get("T");
    const long long T = detail::parse_int(v, ln, "T");
    if (T < 1) throw std::invalid_argument("config: T must be >= 1");
    cfg.opt.horizon = T;
  }
  if (has("batch")) {
    const auto& [ln, v] = get("batch");
    const long long b = detail::parse_int(v, ln, "batch");
    if (b < 1) throw std::invalid_argument("config: batch must be >= 1");
    cfg.opt.batch = static_cast<int>(b);
  }
  if (has("sigma")) {
    const auto& [ln, v] = get("sigma");
    cfg.sigma = detail::parse_double(v, ln, "sigma");
    if (cfg.sigma < 0.0 || !std::isfinite(cfg.sigma))
      throw std::invalid_argument("config: key 'sigma' must be >= 0");
    cfg.has_noise = true;
  }
  if (cfg.opt.algorithm == Algorithm::kSgsmgrad && !cfg.has_noise)
    throw std::invalid_argument(
        "config: noise model required for sgsmgrad (set 'sigma')");
  if (cfg.opt.algorithm != Algorithm::kSgsmgrad && cfg.has_noise)
    throw std::invalid_argument(
        "config: key 'sigma' is only valid with algorithm=sgsmgrad");

  if (has("seed") && has("seeds"))
    throw std::invalid_argument("config: set either 'seed' or 'seeds'");
  if (has("seed")) {
    const auto& [ln, v] = get("seed");
    cfg.seeds = {static_cast<std::uint64_t>(detail::parse_int(v, ln, "seed"))};
  } else if (has("seeds")) {
    const auto& [ln, v] = get("seeds");
    for (const std::string& s : detail::split(v, ','))
      cfg.seeds.push_back(static_cast<std::uint64_t>(
          detail::parse_int(detail::trim(s), ln, "seeds")));
  } else {
    throw std::invalid_argument("config: missing required key 'seed'");
  }

  if (has("record_every")) {
    const auto& [ln, v] = get("record_every");
    const long long r = detail::parse_int(v, ln, "record_every");
    if (r < 1) throw std::invalid_argument("config: record_every must be >= 1");
    cfg.record_every = r;
  }
  if (has("output_dir")) cfg.output_dir = get("output_dir").second;
  if (has("w0")) {
    cfg.w0_init = get("w0").second;
    if (cfg.w0_init != "uniform" && cfg.w0_init != "random-simplex")
      throw std::invalid_argument(
          "config: key 'w0' must be 'uniform' or 'random-simplex'");
  }

  if (has("x0")) {
    const auto& [ln, v] = get("x0");
    const std::vector<double> vals = detail::parse_double_list(v, ln, "x0");
    if (vals.size() == 1) {
      cfg.x0 = ParamPoint::Constant(cfg.m, vals[0]);
    } else if (static_cast<int>(vals.size()) == cfg.m) {
      cfg.x0 = Eigen::Map<const Vec>(vals.data(),
                                     static_cast<Eigen::Index>(vals.size()));
    } else {
      std::ostringstream os;
      os << "config: key 'x0' expects 1 or m=" << cfg.m << " values, got "
         << vals.size();
      throw std::invalid_argument(os.str());
    }
    if (!cfg.x0.allFinite())
      throw std::invalid_argument("config: key 'x0' must be finite");
  } else {
    cfg.x0 = ParamPoint::Constant(cfg.m, 0.5);
  }

  // Construction validates centers count etc. against the problem family.
  (void)builtin_problem(cfg.problem, cfg.m, cfg.problem_params);
  return cfg;
}

/// Aggregate statistics of one run; every numeric field except wall_seconds
/// is recomputable from the emitted trace.
struct RunSummary {
  std::uint64_t seed = 0;
  long iterations = 0;
  bool diverged = false;
  std::string error;
  double final_stationarity = std::numeric_limits<double>::quiet_NaN();
  double avg_stationarity_sq = std::numeric_limits<double>::quiet_NaN();
  double avg_ca = std::numeric_limits<double>::quiet_NaN();
  double max_ca = std::numeric_limits<double>::quiet_NaN();
  double avg_sq_ca = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

inline RunSummary summarize_records(const std::vector<IterationRecord>& recs) {
  RunSummary s;
  if (recs.empty()) return s;
  double sum_stat = 0.0, sum_ca = 0.0, sum_sq_ca = 0.0, max_ca = 0.0;
  for (const IterationRecord& r : recs) {
    sum_stat += r.stationarity_wt;
    sum_ca += r.ca_distance;
    sum_sq_ca += r.ca_distance * r.ca_distance;
    max_ca = std::max(max_ca, r.ca_distance);
  }
  const double n = static_cast<double>(recs.size());
  s.iterations = recs.back().t;
  s.final_stationarity = recs.back().stationarity_min;
  s.avg_stationarity_sq = sum_stat / n;
  s.avg_ca = sum_ca / n;
  s.max_ca = max_ca;
  s.avg_sq_ca = sum_sq_ca / n;
  return s;
}

/// Fixed trace header: t,x1..xm,w1..wK,stationarity_wt,stationarity_min,
/// ca_distance,f1..fK. Floats carry 17 significant digits so parsing the
/// file reproduces every double exactly.
inline std::string trace_csv_header(int m, int K) {
  std::ostringstream os;
  os << "t";
  for (int j = 1; j <= m; ++j) os << ",x" << j;
  for (int k = 1; k <= K; ++k) os << ",w" << k;
  os << ",stationarity_wt,stationarity_min,ca_distance";
  for (int k = 1; k <= K; ++k) os << ",f" << k;
  return os.str();
}

inline std::string trace_to_csv(const std::vector<IterationRecord>& recs,
                                int m, int K) {
  std::ostringstream os;
  os << trace_csv_header(m, K) << "\n";
  for (const IterationRecord& r : recs) {
    os << r.t;
    for (int j = 0; j < m; ++j) os << "," << detail::format17(r.x[j]);
    for (int k = 0; k < K; ++k) os << "," << detail::format17(r.w[k]);
    os << "," << detail::format17(r.stationarity_wt) << ","
       << detail::format17(r.stationarity_min) << ","
       << detail::format17(r.ca_distance);
    for (int k = 0; k < K; ++k) os << "," << detail::format17(r.values[k]);
    os << "\n";
  }
  return os.str();
}

/// Atomic write: the content lands under a temporary name and is renamed
/// into place.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.good()) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<IterationRecord> parse_trace_csv(const std::string& text,
                                                    int m, int K) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line))
    throw std::invalid_argument("trace: empty file");
  if (detail::trim(line) != trace_csv_header(m, K))
    throw std::invalid_argument("trace: unexpected header '" + line + "'");
  std::vector<IterationRecord> recs;
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> f = detail::split(line, ',');
    const std::size_t expected = 1 + m + K + 3 + K;
    if (f.size() != expected)
      throw std::invalid_argument("trace: malformed row '" + line + "'");
    IterationRecord r;
    std::size_t i = 0;
    r.t = std::stol(f[i++]);
    r.x = ParamPoint(m);
    for (int j = 0; j < m; ++j) r.x[j] = std::stod(f[i++]);
    r.w = WeightVector(K);
    for (int k = 0; k < K; ++k) r.w[k] = std::stod(f[i++]);
    r.stationarity_wt = std::stod(f[i++]);
    r.stationarity_min = std::stod(f[i++]);
    r.ca_distance = std::stod(f[i++]);
    r.values = ObjectiveValues(K);
    for (int k = 0; k < K; ++k) r.values[k] = std::stod(f[i++]);
    recs.push_back(std::move(r));
  }
  return recs;
}

inline std::vector<IterationRecord> read_trace_csv(
    const std::filesystem::path& path, int m, int K) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trace_csv(ss.str(), m, K);
}

/// Output root: $GSMGRAD_OUTPUT_ROOT (when set) prefixes relative output
/// directories.
inline std::filesystem::path resolve_output_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  const char* root = std::getenv("GSMGRAD_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0' && p.is_relative())
    p = std::filesystem::path(root) / p;
  return p;
}

inline nlohmann::json summary_to_json(const RunSummary& s) {
  nlohmann::json j;
  j["seed"] = s.seed;
  j["iterations"] = s.iterations;
  j["diverged"] = s.diverged;
  if (s.diverged) j["error"] = s.error;
  j["final_stationarity"] = s.final_stationarity;
  j["avg_stationarity_sq"] = s.avg_stationarity_sq;
  j["avg_ca_distance"] = s.avg_ca;
  j["max_ca_distance"] = s.max_ca;
  j["avg_sq_ca_distance"] = s.avg_sq_ca;
  j["wall_seconds"] = s.wall_seconds;
  return j;
}

/// One run per seed; traces land in <output_dir>/trace_seed<seed>.csv and
/// the aggregate in <output_dir>/summary.json. Seeds run concurrently up to
/// `jobs` workers; results do not depend on the worker count.
inline std::vector<RunSummary> run_experiment(const ExperimentConfig& cfg,
                                              int jobs = 1) {
  const ObjectiveProblem problem =
      builtin_problem(cfg.problem, cfg.m, cfg.problem_params);
  const std::filesystem::path out_dir = resolve_output_dir(cfg.output_dir);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  {  // fail before any compute if the directory is not writable
    const std::filesystem::path probe = out_dir / ".write_probe";
    std::ofstream test(probe);
    if (!test)
      throw std::runtime_error("output dir not writable: " + out_dir.string());
    test.close();
    std::filesystem::remove(probe, ec);
  }

  std::vector<RunSummary> summaries(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.seeds.size() || failed.load()) return;
      const std::uint64_t seed = cfg.seeds[i];
      try {
        const auto start = std::chrono::steady_clock::now();
        OptimizerConfig oc = cfg.opt;
        oc.seed = seed;
        NoiseModel noise{cfg.sigma, seed};
        WeightVector w0;
        if (cfg.w0_init == "random-simplex") {
          SplitMix rng(seed);
          w0 = random_simplex_point(problem.K, rng);
        } else {
          w0 = uniform_weights(problem.K);
        }
        const RunResult rr =
            run(problem, oc, cfg.has_noise ? &noise : nullptr,
                cfg.record_every, cfg.x0, &w0);
        std::ostringstream name;
        name << "trace_seed" << seed << ".csv";
        write_file_atomic(out_dir / name.str(),
                          trace_to_csv(rr.records, problem.m, problem.K));
        RunSummary s = summarize_records(rr.records);
        s.seed = seed;
        s.diverged = rr.diverged;
        s.error = rr.error;
        s.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          start)
                .count();
        summaries[i] = std::move(s);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failed = true;
        failure = e.what();
        return;
      }
    }
  };

  const int n_workers = std::max(
      1, std::min<int>(jobs, static_cast<int>(cfg.seeds.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failed) throw std::runtime_error(failure);

  nlohmann::json j;
  j["problem"] = cfg.problem;
  j["m"] = cfg.m;
  j["algorithm"] = to_string(cfg.opt.algorithm);
  j["alpha"] = cfg.opt.alpha;
  j["beta"] = cfg.opt.beta;
  j["rho"] = cfg.opt.rho;
  j["T"] = cfg.opt.horizon;
  j["warm_start_iters"] = cfg.opt.warm_start_iters;
  j["record_every"] = cfg.record_every;
  if (cfg.has_noise) {
    j["sigma"] = cfg.sigma;
    j["batch"] = cfg.opt.batch;
  }
  j["runs"] = nlohmann::json::array();
  for (const RunSummary& s : summaries) j["runs"].push_back(summary_to_json(s));
  write_file_atomic(out_dir / "summary.json", j.dump(2) + "\n");
  return summaries;
}

/// Step-size fragment derived from a target accuracy. The orders follow the
/// convergence guarantees with unit constants, so treat the output as a
/// starting point, not a tuned setting. The averaged deterministic regime
/// leaves alpha and beta as caller-supplied hints (they are
/// problem-constant, not accuracy-driven, in that regime).
struct HyperparamSuggestion {
  std::string regime;
  double alpha = 0.0;
  double beta = 0.0;
  double rho = 0.0;
  long warm_start_iters = 0;
  long horizon = 0;
  long batch = 1;
  bool impractical = false;
  std::string note;
};

namespace detail {

inline long ceil_order(double x) {
  if (!(x > 0)) return 1;
  if (x >= 9.0e18) return 9000000000000000000L;
  return static_cast<long>(std::ceil(x * (1.0 - 1e-12)));
}

}  // namespace detail

inline HyperparamSuggestion suggest_hyperparams(double epsilon,
                                                const std::string& regime,
                                                double alpha_hint = 0.1,
                                                double beta_hint = 0.1) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("suggest_hyperparams: epsilon must be > 0");
  const double e2 = epsilon * epsilon;
  HyperparamSuggestion s;
  s.regime = regime;
  if (regime == "det-average") {
    s.alpha = alpha_hint;
    s.beta = beta_hint;
    s.rho = e2;
    s.horizon = detail::ceil_order(
        std::max(1.0 / (s.alpha * e2), 1.0 / (s.beta * e2)));
    s.note = "unit-constant orders; alpha/beta are hints in this regime";
  } else if (regime == "det-iterwise") {
    s.alpha = std::pow(epsilon, 9.0);
    s.beta = std::pow(epsilon, 4.0);
    s.rho = e2;
    s.warm_start_iters = detail::ceil_order(std::pow(epsilon, -2.0));
    s.horizon = detail::ceil_order(std::pow(epsilon, -11.0));
    s.note = "unit-constant orders for iteration-wise CA control";
  } else if (regime == "stoch-average") {
    s.alpha = s.beta = s.rho = e2;
    s.horizon = detail::ceil_order(std::pow(epsilon, -4.0));
    s.note = "unit-constant orders for the stochastic averaged regime";
  } else if (regime == "stoch-iterwise") {
    s.alpha = std::pow(epsilon, 9.0);
    s.beta = std::pow(epsilon, 4.0);
    s.rho = e2;
    s.warm_start_iters = detail::ceil_order(std::pow(epsilon, -2.0));
    s.horizon = detail::ceil_order(std::pow(epsilon, -11.0));
    s.batch = detail::ceil_order(std::pow(epsilon, -6.0));
    s.note = "unit-constant orders; mini-batch grows as epsilon^-6";
  } else {
    throw std::invalid_argument(
        "suggest_hyperparams: unknown regime '" + regime +
        "'; valid: det-average, det-iterwise, stoch-average, stoch-iterwise");
  }
  if (s.horizon > 100000000L) {
    s.impractical = true;
    s.note += "; impractical at this epsilon, relax the target";
  }
  return s;
}

inline nlohmann::json suggestion_to_json(const HyperparamSuggestion& s) {
  nlohmann::json j;
  j["regime"] = s.regime;
  j["alpha"] = s.alpha;
  j["beta"] = s.beta;
  j["rho"] = s.rho;
  j["warm_start_iters"] = s.warm_start_iters;
  j["T"] = s.horizon;
  j["batch"] = s.batch;
  j["impractical"] = s.impractical;
  j["note"] = s.note;
  return j;
}

}  // namespace gsmgrad
