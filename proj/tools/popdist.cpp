// popdist: estimate, simulate, verify, evaluate and lowerbound subcommands.
//
// Exit codes: 0 success, 2 input error, 3 numerical non-convergence,
// 4 verification failure, 1 anything else.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "popdist/core.hpp"
#include "popdist/error.hpp"
#include "popdist/estimators.hpp"
#include "popdist/io.hpp"
#include "popdist/lowerbound.hpp"
#include "popdist/metrics.hpp"
#include "popdist/polyapprox.hpp"
#include "popdist/simulate.hpp"

namespace fs = std::filesystem;
using namespace popdist;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitVerification = 4;

const char* const kSpecFileHelp = R"(Spec file: one key=value per line, '#' starts a comment.
Keys: scenario_id, truth, N, t, methods, seed, reps, grid_size, moments, c1, c2, jobs.
Flags given on the command line override the file. Example:

  scenario_id = spike_n1e4
  truth = spike:0.5
  N = 10000
  t = 10
  methods = mle,empirical
  seed = 1
  reps = 5)";

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

void write_json(const fs::path& path, nlohmann::json j) {
  io::round_json(j);
  auto out = io::detail::open_out(path.string());
  out << j.dump(2) << '\n';
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(parse_method(n));
  return out;
}

std::map<std::string, std::string> read_spec_file(const std::string& path) {
  auto in = io::detail::open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = io::detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) io::detail::fail(path, line_no, "expected key=value");
    const std::string key = io::detail::trim(line.substr(0, eq));
    static const std::vector<std::string> known{"scenario_id", "truth", "N",  "t",  "methods", "seed",
                                                "reps",        "grid_size", "moments", "c1", "c2", "jobs"};
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      io::detail::fail(path, line_no, "unknown key '" + key + "'");
    }
    kv[key] = io::detail::trim(line.substr(eq + 1));
  }
  return kv;
}

template <class T>
T spec_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  T v{};
  if (!(in >> v) || !(in >> std::ws).eof()) throw InputError("bad value for " + key + ": '" + text + "'");
  return v;
}

struct EstimateArgs {
  std::string input;
  std::string method = "mle";
  int grid_size = 1000;
  int moments = 0;
  double c1 = 1.0;
  double c2 = 1.0;
  int bins = 0;
  std::string out_dir = ".";
  bool timing = false;
};

int cmd_estimate(const EstimateArgs& a, const CLI::App& sub) {
  const Method method = parse_method(a.method);
  const bool lmm = method == Method::local_moment_matching;
  // config conflicts are rejected before reading data
  if (sub.count("--moments") && method != Method::moment_matching) {
    throw InputError("--moments applies only to moment_matching");
  }
  if ((sub.count("--c1") || sub.count("--c2") || sub.count("--bins")) && !lmm) {
    throw InputError("--c1, --c2 and --bins apply only to local_moment_matching");
  }
  if (sub.count("--grid-size") && method == Method::empirical) {
    throw InputError("--grid-size does not apply to the empirical estimator");
  }

  const io::ObservationInput data = io::read_observations(a.input);
  const ObservationSet& obs = data.counts;
  EstimateReport rep;
  switch (method) {
    case Method::mle: {
      MleConfig cfg;
      cfg.grid_size = a.grid_size;
      rep = estimate_mle(obs, cfg);
      break;
    }
    case Method::empirical: rep = estimate_empirical(obs); break;
    case Method::moment_matching: {
      const int k = a.moments > 0 ? a.moments : obs.t();
      rep = estimate_moment_matching(obs, k, a.grid_size);
      break;
    }
    case Method::local_moment_matching: {
      LmmConfig cfg;
      cfg.c1 = a.c1;
      cfg.c2 = a.c2;
      if (sub.count("--grid-size")) cfg.grid_size = a.grid_size;
      if (a.bins > 0) cfg.bin_count = a.bins;
      rep = data.trials ? estimate_local_moment_matching(*data.trials, cfg) : estimate_local_moment_matching(obs, cfg);
      break;
    }
  }

  const fs::path dir = prepare_dir(a.out_dir);
  {
    auto out = io::detail::open_out((dir / "distribution.csv").string());
    io::write_distribution(out, rep.distribution);
  }
  {
    auto out = io::detail::open_out((dir / "moments.csv").string());
    io::write_moment_diagnostic(out, rep.distribution, obs);
  }
  nlohmann::json report = report_to_json(rep, a.timing);
  report["N"] = obs.size();
  report["t"] = obs.t();
  write_json(dir / "report.json", report);
  io::round_json(report);
  std::cout << report.dump() << '\n';
  if (!rep.converged) {
    std::cerr << "warning: " << to_string(method) << " stopped before meeting its convergence test\n";
    return kExitConvergence;
  }
  return 0;
}

struct SimulateArgs {
  std::string spec_file;
  std::string scenario_id = "scenario";
  std::string truth = "spike:0.5";
  std::size_t n = 1000;
  int t = 10;
  std::vector<std::string> methods{"mle", "empirical"};
  std::uint64_t seed = 1;
  bool seed_given = false;
  int reps = 5;
  int grid_size = 1000;
  int moments = 0;
  double c1 = 1.0;
  double c2 = 1.0;
  int jobs = 1;
  std::string out_dir = ".";
  bool timing = false;
};

int cmd_simulate(SimulateArgs a, const CLI::App& sub) {
  if (!a.spec_file.empty()) {
    const auto kv = read_spec_file(a.spec_file);
    auto from_file = [&](const char* key, const char* flag) { return kv.count(key) && !sub.count(flag); };
    if (from_file("scenario_id", "--scenario-id")) a.scenario_id = kv.at("scenario_id");
    if (from_file("truth", "--truth")) a.truth = kv.at("truth");
    if (from_file("N", "--N")) a.n = spec_value<std::size_t>("N", kv.at("N"));
    if (from_file("t", "--t")) a.t = spec_value<int>("t", kv.at("t"));
    if (from_file("methods", "--methods")) {
      a.methods.clear();
      std::stringstream ss(kv.at("methods"));
      for (std::string m; std::getline(ss, m, ',');) a.methods.push_back(io::detail::trim(m));
    }
    if (from_file("seed", "--seed")) {
      a.seed = spec_value<std::uint64_t>("seed", kv.at("seed"));
      a.seed_given = true;
    }
    if (from_file("reps", "--reps")) a.reps = spec_value<int>("reps", kv.at("reps"));
    if (from_file("grid_size", "--grid-size")) a.grid_size = spec_value<int>("grid_size", kv.at("grid_size"));
    if (from_file("moments", "--moments")) a.moments = spec_value<int>("moments", kv.at("moments"));
    if (from_file("c1", "--c1")) a.c1 = spec_value<double>("c1", kv.at("c1"));
    if (from_file("c2", "--c2")) a.c2 = spec_value<double>("c2", kv.at("c2"));
    if (from_file("jobs", "--jobs")) a.jobs = spec_value<int>("jobs", kv.at("jobs"));
  }
  // seed precedence: --seed, then the spec file, then POPDIST_SEED, then 1
  if (!a.seed_given) {
    if (const char* env = std::getenv("POPDIST_SEED"); env != nullptr && *env != '\0') {
      a.seed = spec_value<std::uint64_t>("POPDIST_SEED", env);
    }
  }
  ScenarioSpec spec;
  spec.scenario_id = a.scenario_id;
  detail::require(!spec.scenario_id.empty() && spec.scenario_id.find(',') == std::string::npos,
                  "scenario id must be nonempty and contain no commas");
  spec.truth = parse_truth(a.truth);
  spec.n = a.n;
  spec.t = a.t;
  spec.seed = a.seed;
  spec.replications = a.reps;
  spec.methods = parse_methods(a.methods);
  spec.grid_size = a.grid_size;
  spec.moments = a.moments;
  spec.lmm.c1 = a.c1;
  spec.lmm.c2 = a.c2;
  spec.jobs = a.jobs;
  detail::require(spec.n >= 1 && spec.t >= 1 && spec.replications >= 1, "need N >= 1, t >= 1 and reps >= 1");
  detail::require(spec.moments <= spec.t, "--moments cannot exceed t");

  const ScenarioResult result = run_scenario(spec);
  const fs::path dir = prepare_dir(a.out_dir);
  {
    auto out = io::detail::open_out((dir / "results.csv").string());
    io::write_results(out, result, a.timing);
  }
  {
    auto out = io::detail::open_out((dir / "summary.csv").string());
    io::write_summary(out, spec.scenario_id, result);
  }
  io::write_summary(std::cout, spec.scenario_id, result);
  for (const ResultRow& row : result.rows) {
    if (!row.error.empty()) {
      std::cerr << "rep " << row.rep << ' ' << to_string(row.estimator) << ": " << row.error << '\n';
    }
  }
  return 0;
}

int cmd_verify(int t_max, int k_max, const std::string& out_dir) {
  detail::require(t_max >= 1, "--t-max must be >= 1");
  detail::require(k_max >= 0, "--k-max must be >= 0");
  std::vector<CoeffBoundReport> bounds;
  std::vector<KravchukReport> krav;
  int violations = 0;
  int conjecture = 0;
  int krav_violations = 0;
  for (int t = 1; t <= t_max; ++t) {
    bounds.push_back(verify_coeff_bound(t));
    violations += bounds.back().violations;
    conjecture += bounds.back().conjecture_violations;
    const int kk = k_max > 0 ? std::min(k_max, t) : t;
    for (int k = 1; k <= kk; ++k) {
      krav.push_back(kravchuk_bound_check(t, k));
      if (!krav.back().holds || !krav.back().identity_ok) ++krav_violations;
    }
  }
  const fs::path dir = prepare_dir(out_dir);
  {
    auto out = io::detail::open_out((dir / "coeff_bounds.csv").string());
    io::write_coeff_bounds(out, bounds);
  }
  {
    auto out = io::detail::open_out((dir / "kravchuk.csv").string());
    io::write_kravchuk(out, krav);
  }
  std::cout << "coefficient bound violations: " << violations << '\n'
            << "conjecture exceptions (informational): " << conjecture << '\n'
            << "kravchuk bound violations: " << krav_violations << '\n';
  return violations + krav_violations == 0 ? 0 : kExitVerification;
}

int cmd_evaluate(const std::string& estimate, const std::string& truth_text, const std::string& observations) {
  const AtomicDistribution est = io::read_distribution(estimate);
  nlohmann::json out;
  if (!truth_text.empty()) {
    const AtomicDistribution truth =
        fs::exists(truth_text) ? io::read_distribution(truth_text) : truth_reference(parse_truth(truth_text));
    out["w1"] = wasserstein1(est, truth);
  }
  if (!observations.empty()) {
    const io::ObservationInput data = io::read_observations(observations);
    const Fingerprint observed = fingerprint_of(data.counts);
    const Fingerprint expected = expected_fingerprint(est, data.counts.t());
    out["kl"] = kl_divergence(observed, expected);
    out["fingerprint_tv"] = total_variation_fingerprint(observed, expected);
  }
  detail::require(!out.is_null(), "evaluate needs --truth and/or --observations");
  io::round_json(out);
  std::cout << out.dump() << '\n';
  return 0;
}

int cmd_lowerbound(double n, int t, int cap, int grid, const std::string& out_dir) {
  const Theorem4Report rep = theorem4_scenario(n, t, cap, grid);
  nlohmann::json j = theorem4_to_json(rep);
  write_json(prepare_dir(out_dir) / "lowerbound.json", j);
  io::round_json(j);
  std::cout << j.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimate the distribution of per-individual success probabilities from binomial counts."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "popdist 0.1.0");

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Fit one estimator to an observation file");
  estimate->add_option("input", est.input, "Observation CSV ('t=<int>' or 't=<int>,trials' header)")
      ->required()
      ->check(CLI::ExistingFile);
  estimate->add_option("--method", est.method, "mle, empirical, moment_matching (mm), local_moment_matching (lmm)")
      ->capture_default_str();
  estimate->add_option("--grid-size", est.grid_size, "Grid intervals m on [0,1]")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  estimate->add_option("--moments", est.moments, "Moments matched by moment_matching (default t)")
      ->check(CLI::PositiveNumber);
  estimate->add_option("--c1", est.c1, "Local moment matching bin-width constant")->check(CLI::PositiveNumber);
  estimate->add_option("--c2", est.c2, "Local moment matching moment-count constant")->check(CLI::PositiveNumber);
  estimate->add_option("--bins", est.bins, "Force the local moment matching bin count")->check(CLI::PositiveNumber);
  estimate->add_option("--out-dir", est.out_dir, "Directory for distribution.csv, report.json, moments.csv")
      ->capture_default_str();
  estimate->add_flag("--timing", est.timing, "Record wall-clock time in report.json");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a seeded synthetic benchmark");
  simulate->footer(kSpecFileHelp);
  simulate->add_option("--spec", sim.spec_file, "Flat key=value scenario file")->check(CLI::ExistingFile);
  simulate->add_option("--scenario-id", sim.scenario_id, "Label written to every result row")->capture_default_str();
  simulate->add_option("--truth", sim.truth, "spike:<c>, three_spikes, truncated_gaussian[:<mean>:<var>], uniform")
      ->capture_default_str();
  simulate->add_option("--N", sim.n, "Population size")->capture_default_str();
  simulate->add_option("--t", sim.t, "Trials per individual")->capture_default_str();
  simulate->add_option("--method,--methods", sim.methods, "Comma-separated estimators")
      ->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Base seed (fallback: POPDIST_SEED)")->capture_default_str();
  simulate->add_option("--reps", sim.reps, "Replications")->capture_default_str();
  simulate->add_option("--grid-size", sim.grid_size, "Grid intervals m")->capture_default_str();
  simulate->add_option("--moments", sim.moments, "Moments for moment_matching (default t)");
  simulate->add_option("--c1", sim.c1, "Local moment matching bin-width constant")->capture_default_str();
  simulate->add_option("--c2", sim.c2, "Local moment matching moment-count constant")->capture_default_str();
  simulate->add_option("--jobs", sim.jobs, "Worker threads across replications (0: all cores)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--out-dir", sim.out_dir, "Directory for results.csv and summary.csv")->capture_default_str();
  simulate->add_flag("--timing", sim.timing, "Fill runtime_ms instead of writing 0");

  int t_max = 10, k_max = 0;
  std::string verify_dir = ".";
  auto* verify = app.add_subcommand("verify", "Check the Bernstein-Chebyshev coefficient and Kravchuk bounds");
  verify->add_option("--t-max", t_max, "Largest t swept")->capture_default_str();
  verify->add_option("--k-max", k_max, "Largest Kravchuk order k (0: all k <= t)")->capture_default_str();
  verify->add_option("--out-dir", verify_dir, "Directory for coeff_bounds.csv and kravchuk.csv")
      ->capture_default_str();

  std::string eval_estimate, eval_truth, eval_obs;
  auto* evaluate = app.add_subcommand("evaluate", "Score a distribution CSV against a truth and/or observations");
  evaluate->add_option("estimate", eval_estimate, "Distribution CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--truth", eval_truth, "Distribution CSV or truth spec such as spike:0.5");
  evaluate->add_option("--observations", eval_obs, "Observation CSV for fingerprint KL and TV")
      ->check(CLI::ExistingFile);

  double lb_n = 1000.0;
  int lb_t = 100, lb_cap = kMomentOrderCap, lb_grid = 0;
  std::string lb_dir = ".";
  auto* lower = app.add_subcommand("lowerbound", "Build a moment-matched pair for population size N and t trials");
  lower->add_option("--N", lb_n, "Population size")->capture_default_str();
  lower->add_option("--t", lb_t, "Trials per individual")->capture_default_str();
  lower->add_option("--cap", lb_cap, "Largest matched moment order")->capture_default_str();
  lower->add_option("--grid-size", lb_grid, "Grid intervals (0: max(400, 4s))")->capture_default_str();
  lower->add_option("--out-dir", lb_dir, "Directory for lowerbound.json")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*estimate) return cmd_estimate(est, *estimate);
    if (*simulate) {
      sim.seed_given = simulate->count("--seed") > 0;
      return cmd_simulate(sim, *simulate);
    }
    if (*verify) return cmd_verify(t_max, k_max, verify_dir);
    if (*evaluate) return cmd_evaluate(eval_estimate, eval_truth, eval_obs);
    if (*lower) return cmd_lowerbound(lb_n, lb_t, lb_cap, lb_grid, lb_dir);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
