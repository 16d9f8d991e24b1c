#include "mtbandit/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "mtbandit/config_io.hpp"
#include "mtbandit/design.hpp"
#include "mtbandit/error.hpp"
#include "mtbandit/harness.hpp"
#include "mtbandit/rounding.hpp"

namespace mtbandit {

using nlohmann::json;

namespace {

// A run file is {instance, run, M?}; a bare instance object or a sweep file
// (first experiment, first M) is accepted as well.
struct RunFile {
  InstanceSpec instance;
  RunConfig run;
  std::optional<int> m;
};

RunFile load_run_file(const std::string& path) {
  const json j = read_json_file(path);
  if (!j.is_object()) throw Error(ErrorCode::kConfigInvalid, path + ": expected an object");
  RunFile f;
  if (j.contains("experiments")) {
    const SweepConfig sweep = parse_sweep_config(j);
    const Experiment& ex = sweep.experiments.front();
    f.instance = ex.instance;
    f.run = ex.run;
    f.m = ex.ms.front();
  } else if (j.contains("instance")) {
    for (const auto& item : j.items())
      if (item.key() != "instance" && item.key() != "run" && item.key() != "M")
        throw Error(ErrorCode::kConfigInvalid, item.key() + ": unknown key");
    f.instance = parse_instance_spec(j.at("instance"));
    f.run = parse_run_config(j.value("run", json::object()));
    if (j.contains("M")) {
      if (!j.at("M").is_number_integer()) throw Error(ErrorCode::kConfigInvalid, "M: expected an integer");
      f.m = j.at("M").get<int>();
    }
  } else {
    f.instance = parse_instance_spec(j);
  }
  return f;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string join_weights(const VectorXd& w) {
  std::string s;
  for (Eigen::Index i = 0; i < w.size(); ++i) s += (i ? ";" : "") + fmt(w(i));
  return s;
}

// Items for design and round: arm rows (linear) or true action moments (contextual).
struct DesignItems {
  std::optional<MatrixXd> rows;
  std::vector<MatrixXd> moments;
};

DesignItems design_items(const std::optional<std::string>& config, int dim) {
  DesignItems items;
  if (!config) {
    if (dim < 1) throw Error(ErrorCode::kConfigInvalid, "--dim: give --config or a positive --dim");
    items.rows = MatrixXd::Identity(dim, dim);
    return items;
  }
  const RunFile f = load_run_file(*config);
  if (f.instance.type == "linear") {
    items.rows = f.instance.arms.value_or(MatrixXd::Identity(f.instance.d, f.instance.d));
  } else {
    InstanceSpec spec = f.instance;
    if (!spec.m && !spec.predictions) spec.m = spec.k;
    const ContextualInstance inst = build_contextual_instance(spec);
    items.moments = inst.context().action_moments(inst.context().distribution);
  }
  return items;
}

Design solve_for(const DesignItems& items, const std::string& criterion, const std::string& targets,
                 MatrixXd& target_rows) {
  if (criterion == "e") return items.rows ? solve_e_optimal(*items.rows) : solve_e_optimal(items.moments);
  if (!items.rows) throw Error(ErrorCode::kConfigInvalid, "--criterion: g needs a linear instance");
  target_rows = targets == "items" ? *items.rows : difference_targets(*items.rows);
  return solve_g_optimal(*items.rows, target_rows);
}

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw Error(ErrorCode::kConfigInvalid, "--out: cannot open " + path);
      stream_ = &file_;
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

std::ofstream open_log(const std::string& path) {
  std::ofstream log(path);
  if (!log) throw Error(ErrorCode::kConfigInvalid, "--phase-log: cannot open " + path);
  return log;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-task representation learning for pure exploration in bandits", "mtbandit"};
  app.require_subcommand(1);

  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  std::string phase_log;
  std::string criterion = "e";
  std::string targets = "items";
  std::string algo;
  int jobs = 1;
  int n = 0;
  int dim = 0;
  std::optional<int> tasks;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", out_path, "Output path (default stdout)");
    sub->add_option("--seed", seed, "Override the seed");
  };

  CLI::App* design = app.add_subcommand("design", "Solve an E- or G-optimal design");
  design->add_option("--config", config, "Instance or run file");
  design->add_option("--dim", dim, "Use the canonical basis of R^dim when no config is given");
  design->add_option("--criterion", criterion)->check(CLI::IsMember({"e", "g"}));
  design->add_option("--targets", targets, "G targets")->check(CLI::IsMember({"items", "differences"}));
  design->add_option("--out", out_path, "Output path (default stdout)");

  CLI::App* round = app.add_subcommand("round", "Solve a design and round it to N samples");
  round->add_option("--config", config, "Instance or run file");
  round->add_option("--dim", dim, "Use the canonical basis of R^dim when no config is given");
  round->add_option("--criterion", criterion)->check(CLI::IsMember({"e", "g"}));
  round->add_option("--targets", targets, "G targets")->check(CLI::IsMember({"items", "differences"}));
  round->add_option("--n", n, "Batch size")->required();
  round->add_option("--out", out_path, "Output path (default stdout)");

  CLI::App* repbai = app.add_subcommand("repbai", "Run multi-task best-arm identification");
  repbai->add_option("--config", config, "Run file")->required();
  repbai->add_option("--algo", algo)->check(CLI::IsMember(algorithms_for(Problem::kRepBai)));
  repbai->add_option("--M", tasks, "Override the task count");
  repbai->add_option("--phase-log", phase_log, "Write per-phase rows to this path");
  common(repbai);

  CLI::App* repbpi = app.add_subcommand("repbpi", "Run multi-task contextual policy identification");
  repbpi->add_option("--config", config, "Run file")->required();
  repbpi->add_option("--algo", algo)->check(CLI::IsMember(algorithms_for(Problem::kRepBpi)));
  repbpi->add_option("--M", tasks, "Override the task count");
  repbpi->add_option("--phase-log", phase_log, "Write stage rows to this path");
  common(repbpi);

  CLI::App* sweep = app.add_subcommand("sweep", "Run a sweep file and emit CSV");
  sweep->add_option("--config", config, "Sweep file")->required();
  sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  common(sweep);

  CLI::App* check = app.add_subcommand("check", "Report instance assumption diagnostics");
  check->add_option("--config", config, "Instance, run or sweep file")->required();
  check->add_option("--M", tasks, "Override the task count");
  check->add_option("--out", out_path, "Output path (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (design->parsed()) {
      const DesignItems items = design_items(config, dim);
      MatrixXd target_rows;
      const Design d = solve_for(items, criterion, targets, target_rows);
      Output o(out_path, out);
      *o << "criterion,rho,gap,converged,lambda\n"
         << criterion << "," << fmt(d.objective_value) << "," << fmt(d.certificate_gap) << ","
         << (d.converged ? 1 : 0) << "," << join_weights(d.weights) << "\n";
      return d.converged ? kExitOk : kExitFailure;
    }

    if (round->parsed()) {
      const DesignItems items = design_items(config, dim);
      MatrixXd target_rows;
      const Design d = solve_for(items, criterion, targets, target_rows);
      RoundingOptions options;
      if (config) {
        const RunFile f = load_run_file(*config);
        options.zeta = f.run.zeta;
        options.scale_round = f.run.scale_round;
      }
      const RoundingCriterion crit = criterion == "e" ? RoundingCriterion::e() : RoundingCriterion::g(target_rows);
      const RoundedBatch b = items.rows ? round_design(*items.rows, d.weights, n, crit, options)
                                        : round_design(items.moments, d.weights, n, crit, options);
      const double factor = criterion == "e" ? b.realized_factor_E : b.realized_factor_G.value_or(0.0);
      std::string counts;
      for (std::size_t i = 0; i < b.counts.size(); ++i) counts += (i ? ";" : "") + std::to_string(b.counts[i]);
      Output o(out_path, out);
      *o << "criterion,N,factor,certified,swaps,counts\n"
         << criterion << "," << n << "," << fmt(factor) << "," << (b.certified ? 1 : 0) << "," << b.swaps << ","
         << counts << "\n";
      return b.certified ? kExitOk : kExitFailure;
    }

    if (repbai->parsed() || repbpi->parsed()) {
      const bool linear = repbai->parsed();
      RunFile f = load_run_file(*config);
      if (tasks) f.m = tasks;
      if (seed) f.run.seed = *seed;
      f.run.validate();
      if (algo.empty()) algo = linear ? "douexpdes" : "cdouexpdes";
      RunRecord record;
      std::vector<std::string> flags;
      if (linear) {
        if (f.instance.type != "linear") throw Error(ErrorCode::kConfigInvalid, "instance.type: repbai needs linear");
        const BanditInstance inst = build_linear_instance(f.instance, f.m);
        const LinearRun run = run_linear(algo, inst, f.run);
        record = run.record;
        if (!phase_log.empty()) {
          std::ofstream log = open_log(phase_log);
          write_phase_log(log, run.result);
        }
      } else {
        if (f.instance.type != "contextual")
          throw Error(ErrorCode::kConfigInvalid, "instance.type: repbpi needs contextual");
        const ContextualInstance inst = build_contextual_instance(f.instance, f.m);
        const ContextualRun run = run_contextual(algo, inst, f.run);
        record = run.record;
        if (!phase_log.empty()) {
          std::ofstream log = open_log(phase_log);
          write_stage_log(log, run.result);
        }
      }
      Output o(out_path, out);
      *o << csv_header() << "\n" << csv_row(record) << "\n";
      for (const auto& flag : record.flags) err << "flag: " << flag << "\n";
      return record.success && !has_failure_flag(record.flags) ? kExitOk : kExitFailure;
    }

    if (sweep->parsed()) {
      SweepConfig s = parse_sweep_config(read_json_file(*config));
      if (seed) s.seed = *seed;
      const std::vector<RunRecord> records = run_sweep(s, jobs);
      Output o(out_path, out);
      write_csv(*o, records);
      bool ok = true;
      for (const auto& r : records) ok = ok && r.success && !has_failure_flag(r.flags);
      return ok ? kExitOk : kExitFailure;
    }

    if (check->parsed()) {
      RunFile f = load_run_file(*config);
      if (tasks) f.m = tasks;
      InstanceDiagnostics diag;
      if (f.instance.type == "linear") {
        diag = diagnose(build_linear_instance(f.instance, f.m));
      } else {
        diag = diagnose(build_contextual_instance(f.instance, f.m));
      }
      Output o(out_path, out);
      *o << "tasks=" << diag.tasks << "\n";
      *o << "task_diversity=" << fmt(diag.task_diversity) << "\n";
      if (diag.omega) *o << "omega=" << fmt(*diag.omega) << "\n";
      if (diag.min_gap) *o << "min_gap=" << fmt(*diag.min_gap) << "\n";
      if (diag.nu) *o << "nu=" << fmt(*diag.nu) << "\n";
      const bool ok = diag.task_diversity > 1e-12 && (!diag.omega || *diag.omega > 1e-12) &&
                      (!diag.nu || *diag.nu > 1e-12);
      return ok ? kExitOk : kExitFailure;
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.code() == ErrorCode::kConfigInvalid ? kExitConfig : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitConfig;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace mtbandit
