// Command-line front end: data generation, exact and dual distances,
// bootstrap, one/two-sample tests, confidence intervals, the MMD baseline and
// the simulation diagnostics.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wtest/wtest.hpp"

namespace {

using namespace wtest;
using Json = nlohmann::json;

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

struct Common {
  std::size_t threads = 0;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("bad list entry '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw InputError("empty list");
  return out;
}

TrainConfig load_config(const std::string& path, std::uint64_t seed) {
  TrainConfig cfg = path.empty() ? TrainConfig{} : read_config(path);
  cfg.seed = seed;
  return cfg;
}

RunManifest manifest(const std::string& command, std::uint64_t seed, const std::string& cfg_digest,
                     const std::vector<std::string>& inputs) {
  RunManifest m;
  m.command = command;
  m.seed = seed;
  m.config_digest = cfg_digest;
  for (const auto& path : inputs) m.input_digests[path] = digest(read_file(path));
  return m;
}

void write_json(const std::string& path, Json j) { write_file_atomic(path, j.dump(2) + "\n"); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein goodness-of-fit tests with a Gaussian multiplier bootstrap"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  Common common;
  if (const char* env = std::getenv("WTEST_THREADS")) {
    try {
      common.threads = static_cast<std::size_t>(std::stoul(env));
    } catch (const std::exception&) {
      std::cerr << "error: WTEST_THREADS must be a non-negative integer\n";
      return kExitInput;
    }
  }
  app.add_option("--threads", common.threads, "Worker threads for bootstrap/permutations (0 = all cores)");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic sample as CSV");
  std::string gen_dist, gen_out;
  std::size_t gen_d = 1, gen_n = 0;
  std::uint64_t gen_seed = 0;
  bool gen_header = false, gen_raw = false;
  gen->add_option("--dist", gen_dist, "gaussian[:shift] | exponential[:lambda] | mixture | circle-plain | "
                                      "circle-shift | circle-scale | point:<c>[,<c>...]")->required();
  gen->add_option("--d", gen_d, "Dimension")->required();
  gen->add_option("--n", gen_n, "Sample size")->required();
  gen->add_option("--seed", gen_seed)->required();
  gen->add_option("--out", gen_out)->required();
  gen->add_flag("--header", gen_header, "Write a header row x0..x{d-1}");
  gen->add_flag("--raw", gen_raw, "Skip the fixed map to the unit box");

  // exact
  auto* exact = app.add_subcommand("exact", "Exact W1 between two CSV samples");
  std::string ex_x, ex_y;
  std::size_t ex_budget = kDefaultTransportBudget;
  exact->add_option("--x", ex_x)->required();
  exact->add_option("--y", ex_y)->required();
  exact->add_option("--budget", ex_budget, "Maximum n*m cost entries for the LP solver");

  // dual
  auto* dual = app.add_subcommand("dual", "Dual-form estimate with a trained critic");
  std::string du_x, du_y, du_cfg;
  std::uint64_t du_seed = 0;
  dual->add_option("--x", du_x)->required();
  dual->add_option("--y", du_y)->required();
  dual->add_option("--config", du_cfg);
  dual->add_option("--seed", du_seed)->required();

  // bootstrap
  auto* boot = app.add_subcommand("bootstrap", "Multiplier bootstrap draws as single-column CSV");
  std::string bo_data, bo_cfg, bo_out;
  std::size_t bo_T = 0;
  std::uint64_t bo_seed = 0;
  boot->add_option("--data", bo_data)->required();
  boot->add_option("--T", bo_T)->required();
  boot->add_option("--config", bo_cfg);
  boot->add_option("--seed", bo_seed)->required();
  boot->add_option("--out", bo_out)->required();

  // one-sample / ci
  std::string os_data, os_ref, os_cfg, os_out;
  double os_alpha = 0.05;
  std::size_t os_T = 0;
  std::uint64_t os_seed = 0;
  bool os_warm = false;
  auto add_one_sample_flags = [&](CLI::App* sub) {
    sub->add_option("--data", os_data)->required();
    sub->add_option("--ref", os_ref, "Reference sample representing mu0")->required();
    sub->add_option("--alpha", os_alpha)->required();
    sub->add_option("--T", os_T)->required();
    sub->add_option("--config", os_cfg);
    sub->add_option("--seed", os_seed)->required();
    sub->add_option("--out", os_out)->required();
    sub->add_flag("--warm-start", os_warm, "Start bootstrap critics from the trained dual critic");
  };
  auto* one = app.add_subcommand("one-sample", "One-sample test against a reference sample");
  add_one_sample_flags(one);
  auto* ci = app.add_subcommand("ci", "Bootstrap confidence interval for W(mu_n, mu0)");
  add_one_sample_flags(ci);

  // two-sample
  auto* two = app.add_subcommand("two-sample", "Two-sample test");
  std::string ts_x, ts_y, ts_cfgx, ts_cfgy, ts_out, ts_grid;
  double ts_alpha = 0.05;
  std::size_t ts_T = 0;
  std::uint64_t ts_seed = 0;
  bool ts_warm = false;
  two->add_option("--x", ts_x)->required();
  two->add_option("--y", ts_y)->required();
  two->add_option("--alpha", ts_alpha)->required();
  two->add_option("--T", ts_T)->required();
  two->add_option("--config-x", ts_cfgx);
  two->add_option("--config-y", ts_cfgy);
  two->add_option("--seed", ts_seed)->required();
  two->add_option("--out", ts_out)->required();
  two->add_option("--r-grid", ts_grid, "Comma-separated split grid in (0,1)");
  two->add_flag("--warm-start", ts_warm);

  // mmd
  auto* mmd = app.add_subcommand("mmd", "Gaussian-kernel MMD permutation test");
  std::string mm_x, mm_y, mm_out;
  double mm_alpha = 0.05, mm_bw = 0.0;
  std::size_t mm_perm = 0;
  std::uint64_t mm_seed = 0;
  mmd->add_option("--x", mm_x)->required();
  mmd->add_option("--y", mm_y)->required();
  mmd->add_option("--alpha", mm_alpha)->required();
  mmd->add_option("--permutations", mm_perm)->required();
  mmd->add_option("--seed", mm_seed)->required();
  mmd->add_option("--out", mm_out)->required();
  mmd->add_option("--bandwidth", mm_bw, "Kernel bandwidth (default: median heuristic)");

  // qq
  auto* qq = app.add_subcommand("qq", "Reference vs bootstrap values for a Q-Q plot");
  std::string qq_dist, qq_cfg, qq_out;
  std::size_t qq_d = 1, qq_n = 0, qq_reps = 0, qq_T = 0, qq_m = 0;
  std::uint64_t qq_seed = 0;
  qq->add_option("--dist", qq_dist)->required();
  qq->add_option("--d", qq_d)->required();
  qq->add_option("--n", qq_n)->required();
  qq->add_option("--reps", qq_reps)->required();
  qq->add_option("--seed", qq_seed)->required();
  qq->add_option("--out", qq_out)->required();
  qq->add_option("--config", qq_cfg);
  qq->add_option("--T", qq_T, "Bootstrap draws (default: reps)");
  qq->add_option("--m", qq_m, "Second sample size of the reference (default: n)");

  // diag anti-concentration
  auto* diag = app.add_subcommand("diag", "Diagnostics");
  diag->require_subcommand(1);
  auto* anti = diag->add_subcommand("anti-concentration", "C_r table for W(mu_n, mu)");
  std::string ac_dist, ac_deltas, ac_out;
  std::size_t ac_d = 1, ac_n = 0, ac_reps = 0, ac_mref = 0;
  std::uint64_t ac_seed = 0;
  anti->add_option("--dist", ac_dist)->required();
  anti->add_option("--d", ac_d);
  anti->add_option("--n", ac_n)->required();
  anti->add_option("--reps", ac_reps)->required();
  anti->add_option("--deltas", ac_deltas)->required();
  anti->add_option("--out", ac_out)->required();
  anti->add_option("--m-ref", ac_mref, "Size of the sample standing in for mu (default: 10 n)");
  anti->add_option("--seed", ac_seed);

  // budget
  auto* budget = app.add_subcommand("budget", "Check the parameter-count window for n and d");
  std::size_t bu_n = 0, bu_d = 0, bu_S = 0;
  budget->add_option("--n", bu_n)->required();
  budget->add_option("--d", bu_d)->required();
  budget->add_option("--S", bu_S)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  const Stopwatch clock;
  try {
    if (gen->parsed()) {
      const DistSpec spec = parse_dist(gen_dist, gen_d);
      const Sample s = gen_raw ? generate(spec, gen_n, gen_seed) : generate_unit_box(spec, gen_n, gen_seed);
      write_file_atomic(gen_out, to_csv(s.data(), gen_header));
    } else if (exact->parsed()) {
      std::cout << format_double(wasserstein1_exact(read_csv(ex_x), read_csv(ex_y), ex_budget)) << "\n";
    } else if (dual->parsed()) {
      const TrainConfig cfg = load_config(du_cfg, du_seed);
      const DualEstimate est = train_dual_critic(read_csv(du_x), read_csv(du_y), cfg);
      RunManifest man = manifest("dual", du_seed, config_digest(cfg), {du_x, du_y});
      man.wall_clock_seconds = clock.seconds();
      std::cout << Json{{"estimate", est.value},
                        {"lipschitz_certificate", est.lipschitz_certificate},
                        {"S", est.net.parameter_count()},
                        {"manifest", to_json(man)}}
                       .dump(2)
                << "\n";
    } else if (boot->parsed()) {
      const TrainConfig cfg = load_config(bo_cfg, bo_seed);
      const BootstrapDraws d = run_bootstrap(read_csv(bo_data), bo_T, cfg, bo_seed, {common.threads, nullptr});
      write_file_atomic(bo_out, column_csv(d.draws));
    } else if (one->parsed() || ci->parsed()) {
      const bool is_ci = ci->parsed();
      const TrainConfig cfg = load_config(os_cfg, os_seed);
      const Sample x = read_csv(os_data);
      const Sample ref = read_csv(os_ref);
      TestOptions opts{os_T, os_seed, common.threads, os_warm, config_digest(cfg)};
      RunManifest man = manifest(is_ci ? "ci" : "one-sample", os_seed, opts.config_digest, {os_data, os_ref});
      Json out;
      if (is_ci) {
        const Interval iv = confidence_interval(x, ref, os_alpha, cfg, opts);
        out = to_json(iv, os_alpha);
        out["n"] = x.n();
        out["S"] = architecture_size(x.d(), cfg);
        out["T"] = os_T;
        out["seed"] = os_seed;
        out["config_digest"] = opts.config_digest;
        std::cout << "[" << format_double(iv.lo) << ", " << format_double(iv.hi) << "]\n";
      } else {
        const TestReport r = one_sample_test(x, ref, os_alpha, cfg, opts);
        out = to_json(r);
        std::cout << to_string(r.decision) << " statistic=" << format_double(r.statistic)
                  << " quantile=" << format_double(r.quantile) << "\n";
      }
      man.wall_clock_seconds = clock.seconds();
      out["manifest"] = to_json(man);
      write_json(os_out, out);
    } else if (two->parsed()) {
      const TrainConfig cfg_x = load_config(ts_cfgx, ts_seed);
      const TrainConfig cfg_y = load_config(ts_cfgy, ts_seed);
      const std::string cdig = digest(config_to_json(cfg_x).dump() + config_to_json(cfg_y).dump());
      TestOptions opts{ts_T, ts_seed, common.threads, ts_warm, cdig};
      const auto grid = ts_grid.empty() ? default_r_grid() : parse_list(ts_grid);
      const TwoSampleResult res = two_sample_test(read_csv(ts_x), read_csv(ts_y), ts_alpha, cfg_x, cfg_y, opts, grid);
      RunManifest man = manifest("two-sample", ts_seed, cdig, {ts_x, ts_y});
      man.wall_clock_seconds = clock.seconds();
      Json out = to_json(res.report);
      out["two_sample_quantile"] = to_json(res.quantile);
      out["manifest"] = to_json(man);
      write_json(ts_out, out);
      std::cout << to_string(res.report.decision) << " statistic=" << format_double(res.report.statistic)
                << " quantile=" << format_double(res.report.quantile) << "\n";
    } else if (mmd->parsed()) {
      MmdOptions mo{mm_bw, common.threads};
      const MmdReport r = mmd_permutation_test(read_csv(mm_x), read_csv(mm_y), mm_alpha, mm_perm, mm_seed, mo);
      RunManifest man = manifest("mmd", mm_seed, "", {mm_x, mm_y});
      man.wall_clock_seconds = clock.seconds();
      Json out = to_json(r);
      out["manifest"] = to_json(man);
      write_json(mm_out, out);
      std::cout << (r.reject ? "Reject" : "Accept") << " p_value=" << format_double(r.p_value) << "\n";
    } else if (qq->parsed()) {
      const DistSpec spec = parse_dist(qq_dist, qq_d);
      const TrainConfig cfg = load_config(qq_cfg, qq_seed);
      QqOptions qo;
      qo.m = qq_m;
      qo.threads = common.threads;
      std::vector<double> ref = qq_reference(spec, qq_n, qq_reps, derive_seed(qq_seed, "reference"), cfg, qo);
      const Sample x = generate_unit_box(spec, qq_n, derive_seed(qq_seed, "bootstrap-data"));
      const BootstrapDraws d = run_bootstrap(x, qq_T == 0 ? qq_reps : qq_T, cfg,
                                             derive_seed(qq_seed, "bootstrap"), {common.threads, nullptr});
      std::sort(ref.begin(), ref.end());
      std::string csv = "reference,bootstrap\n";
      for (std::size_t k = 0; k < ref.size(); ++k) {
        const double level = (static_cast<double>(k) + 0.5) / static_cast<double>(ref.size());
        csv += format_double(ref[k]) + "," + format_double(empirical_quantile(d, level)) + "\n";
      }
      write_file_atomic(qq_out, csv);
      std::cout << "ks=" << format_double(ks_statistic(ref, d.draws)) << "\n";
    } else if (anti->parsed()) {
      const DistSpec spec = parse_dist(ac_dist, ac_d);
      const auto rows = anti_concentration_diagnostic(spec, ac_n, ac_reps, ac_mref == 0 ? 10 * ac_n : ac_mref,
                                                      parse_list(ac_deltas), ac_seed, common.threads);
      std::string csv = "delta,r,count,c_r\n";
      for (const auto& row : rows) {
        csv += format_double(row.delta) + "," + format_double(row.r) + "," + std::to_string(row.count) + "," +
               format_double(row.c_r) + "\n";
      }
      write_file_atomic(ac_out, csv);
    } else if (budget->parsed()) {
      const BudgetReport r = check_parameter_budget(bu_n, bu_d, bu_S);
      if (!r.admissible) std::cerr << "warning: S is outside the unit-constant window\n";
      std::cout << Json{{"admissible", r.admissible}, {"lower", r.lower}, {"upper", r.upper}}.dump(2) << "\n";
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
