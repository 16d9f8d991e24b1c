#include "mtbandit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "mtbandit/baselines.hpp"
#include "mtbandit/design.hpp"
#include "mtbandit/error.hpp"
#include "mtbandit/linalg.hpp"

namespace mtbandit {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kConfigInvalid, field + ": " + why);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string shape_prefix(const RunRecord& r) {
  std::string s = std::to_string(kCsvSchema) + "," + r.algo;
  for (int v : {r.d, r.k, r.m, r.n, r.s, r.a}) s += "," + std::to_string(v);
  for (double v : {r.delta, r.epsilon, r.zeta, r.gamma, r.scale_T0, r.scale_p, r.scale_T, r.scale_N}) s += "," + fmt(v);
  return s;
}

void fill_config(RunRecord& r, const RunConfig& c) {
  r.delta = c.delta;
  r.epsilon = c.epsilon;
  r.zeta = c.zeta;
  r.gamma = c.gamma;
  r.scale_T0 = c.scale_T0;
  r.scale_p = c.scale_p;
  r.scale_T = c.scale_T;
  r.scale_N = c.scale_N;
  r.seed = c.seed;
}

template <typename F>
auto timed(bool enabled, double& ms, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  auto result = body();
  if (enabled) ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<std::string> audited_flags(std::vector<std::string> flags, std::uint64_t samples, std::uint64_t pulls) {
  if (samples != pulls) flags.push_back("AUDIT_MISMATCH");
  return flags;
}

Problem parse_problem(const json& j, const std::string& where) {
  if (!j.is_string()) invalid(where, "expected \"repbai\" or \"repbpi\"");
  const std::string p = j.get<std::string>();
  if (p == "repbai") return Problem::kRepBai;
  if (p == "repbpi") return Problem::kRepBpi;
  invalid(where, "unknown problem '" + p + "'");
}

}  // namespace

std::string csv_header() {
  return "schema,algo,d,k,M,n,S,A,delta,epsilon,zeta,gamma,scale_T0,scale_p,scale_T,scale_N,seed,run_id,"
         "samples_total,success,max_subopt,wallclock_ms,flags";
}

std::string csv_row(const RunRecord& r) {
  return shape_prefix(r) + "," + std::to_string(r.seed) + "," + std::to_string(r.run_id) + "," +
         std::to_string(r.samples_total) + "," + (r.success ? "1" : "0") + "," + fmt(r.max_subopt) + "," +
         fmt(r.wallclock_ms) + "," + join(r.flags, '|');
}

void write_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << csv_header() << '\n';
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunRecord*>> cells;
  for (const auto& r : records) {
    out << csv_row(r) << '\n';
    const std::string key = shape_prefix(r);
    auto [it, fresh] = cells.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back(&r);
  }
  for (const auto& key : order) {
    const auto& rows = cells[key];
    const double count = static_cast<double>(rows.size());
    double samples = 0, successes = 0, subopt = 0, wall = 0;
    for (const auto* r : rows) {
      samples += static_cast<double>(r->samples_total);
      successes += r->success ? 1.0 : 0.0;
      subopt += r->max_subopt;
      wall += r->wallclock_ms;
    }
    const double mean_samples = samples / count, mean_subopt = subopt / count, mean_wall = wall / count;
    out << key << ",0,mean," << fmt(mean_samples) << "," << fmt(successes / count) << "," << fmt(mean_subopt) << ","
        << fmt(mean_wall) << ",summary\n";
    if (rows.size() > 1) {
      double vs = 0, vo = 0, vw = 0;
      for (const auto* r : rows) {
        vs += std::pow(static_cast<double>(r->samples_total) - mean_samples, 2);
        vo += std::pow(r->max_subopt - mean_subopt, 2);
        vw += std::pow(r->wallclock_ms - mean_wall, 2);
      }
      const double dof = count - 1.0;
      out << key << ",0,std," << fmt(std::sqrt(vs / dof)) << "," << fmt(successes / count) << ","
          << fmt(std::sqrt(vo / dof)) << "," << fmt(std::sqrt(vw / dof)) << ",summary\n";
    }
  }
}

bool has_failure_flag(const std::vector<std::string>& flags) {
  for (const auto& f : flags)
    if (f == "PHASE_CAP_REACHED" || f == "NO_CONVERGENCE" || f == "AUDIT_MISMATCH") return true;
  return false;
}

std::uint64_t cell_seed(std::uint64_t master, const std::string& algo, int m, int run_id) {
  return combine_keys(master, {hash_label(algo), static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(run_id)});
}

const std::vector<std::string>& algorithms_for(Problem problem) {
  static const std::vector<std::string> bai{"douexpdes", "indrage"};
  static const std::vector<std::string> bpi{"cdouexpdes", "indrflinucb"};
  return problem == Problem::kRepBai ? bai : bpi;
}

SweepConfig parse_sweep_config(const json& j) {
  if (!j.is_object()) invalid("config", "expected an object");
  for (const auto& item : j.items())
    if (item.key() != "seed" && item.key() != "record_wallclock" && item.key() != "experiments")
      invalid(item.key(), "unknown key");
  SweepConfig c;
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    invalid("seed", e.what());
  }
  try {
    if (j.contains("record_wallclock")) c.record_wallclock = j.at("record_wallclock").get<bool>();
  } catch (const json::exception& e) {
    invalid("record_wallclock", e.what());
  }
  if (!j.contains("experiments") || !j.at("experiments").is_array() || j.at("experiments").empty())
    invalid("experiments", "expected a non-empty array");

  const json& list = j.at("experiments");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = "experiments[" + std::to_string(i) + "].";
    const json& e = list[i];
    if (!e.is_object()) invalid(where.substr(0, where.size() - 1), "expected an object");
    for (const auto& item : e.items()) {
      static const std::set<std::string> allowed{"problem", "instance", "run", "algos", "M", "replications"};
      if (!allowed.count(item.key())) invalid(where + item.key(), "unknown key");
    }
    Experiment ex;
    if (!e.contains("problem")) invalid(where + "problem", "missing");
    ex.problem = parse_problem(e.at("problem"), where + "problem");
    if (!e.contains("instance")) invalid(where + "instance", "missing");
    try {
      ex.instance = parse_instance_spec(e.at("instance"));
      ex.run = parse_run_config(e.value("run", json::object()));
    } catch (const Error& err) {
      invalid(where.substr(0, where.size() - 1), err.what());
    }
    const bool contextual = ex.instance.type == "contextual";
    if (contextual != (ex.problem == Problem::kRepBpi))
      invalid(where + "instance.type", "does not match the problem");

    try {
      ex.algos = e.at("algos").get<std::vector<std::string>>();
    } catch (const json::exception&) {
      invalid(where + "algos", "expected an array of algorithm names");
    }
    if (ex.algos.empty()) invalid(where + "algos", "empty");
    const auto& known = algorithms_for(ex.problem);
    for (const auto& a : ex.algos)
      if (std::find(known.begin(), known.end(), a) == known.end()) invalid(where + "algos", "unknown algorithm '" + a + "'");

    if (e.contains("M")) {
      try {
        ex.ms = e.at("M").get<std::vector<int>>();
      } catch (const json::exception&) {
        invalid(where + "M", "expected an array of task counts");
      }
    } else if (ex.instance.predictions) {
      ex.ms = {static_cast<int>(ex.instance.predictions->cols())};
    } else if (ex.instance.m) {
      ex.ms = {*ex.instance.m};
    }
    if (ex.ms.empty()) invalid(where + "M", "no task counts");
    for (int m : ex.ms) {
      if (m < 1) invalid(where + "M", "task counts must be positive");
      if (!ex.instance.predictions && m % ex.instance.k != 0)
        invalid(where + "M", "k = " + std::to_string(ex.instance.k) + " must divide M = " + std::to_string(m));
      if (ex.instance.predictions && m != ex.instance.predictions->cols())
        invalid(where + "M", "explicit predictions fix M");
    }
    if (e.contains("replications")) {
      try {
        ex.replications = e.at("replications").get<int>();
      } catch (const json::exception& err) {
        invalid(where + "replications", err.what());
      }
      if (ex.replications < 1) invalid(where + "replications", "must be positive");
    }
    c.experiments.push_back(std::move(ex));
  }
  return c;
}

LinearRun run_linear(const std::string& algo, const BanditInstance& instance, const RunConfig& config,
                     bool record_wallclock) {
  if (algo != "douexpdes" && algo != "indrage") invalid("algo", "unknown linear algorithm '" + algo + "'");
  LinearEnvironment env(instance);
  LinearRun out;
  out.result = timed(record_wallclock, out.record.wallclock_ms,
                     [&] { return algo == "douexpdes" ? dou_exp_des(env, config) : ind_rage(env, config); });
  RunRecord& r = out.record;
  r.algo = algo;
  r.d = instance.dim();
  r.k = instance.rank();
  r.m = instance.num_tasks();
  r.n = instance.num_arms();
  fill_config(r, config);
  r.samples_total = out.result.samples_total;
  r.success = out.result.success;
  for (int m = 0; m < instance.num_tasks(); ++m) {
    const double gap = instance.mean_table().row(m).maxCoeff() -
                       instance.mean_reward(m, out.result.answers[static_cast<std::size_t>(m)]);
    r.max_subopt = std::max(r.max_subopt, gap);
  }
  r.flags = audited_flags(out.result.flags, out.result.samples_total, out.result.audited_pulls);
  return out;
}

ContextualRun run_contextual(const std::string& algo, const ContextualInstance& instance, const RunConfig& config,
                             bool record_wallclock) {
  if (algo != "cdouexpdes" && algo != "indrflinucb") invalid("algo", "unknown contextual algorithm '" + algo + "'");
  ContextualEnvironment env(instance);
  ContextualRun out;
  out.result = timed(record_wallclock, out.record.wallclock_ms,
                     [&] { return algo == "cdouexpdes" ? c_dou_exp_des(env, config) : ind_rf_linucb(env, config); });
  RunRecord& r = out.record;
  r.algo = algo;
  r.d = instance.dim();
  r.k = instance.rank();
  r.m = instance.num_tasks();
  r.s = instance.num_contexts();
  r.a = instance.num_actions();
  fill_config(r, config);
  r.samples_total = out.result.samples_total;
  r.success = out.result.success;
  r.max_subopt = out.result.max_suboptimality;
  r.flags = audited_flags(out.result.flags, out.result.samples_total, out.result.audited_pulls);
  return out;
}

std::vector<RunRecord> run_sweep(const SweepConfig& config, int jobs, const ProgressCallback& progress) {
  struct Cell {
    std::size_t experiment;
    std::size_t instance;
    std::string algo;
    int m;
    int run_id;
  };
  // Instances are immutable and shared by every run of the same (experiment, M).
  std::vector<std::unique_ptr<BanditInstance>> linear;
  std::vector<std::unique_ptr<ContextualInstance>> contextual;
  std::vector<Cell> cells;
  for (std::size_t e = 0; e < config.experiments.size(); ++e) {
    const Experiment& ex = config.experiments[e];
    for (int m : ex.ms) {
      std::size_t slot;
      if (ex.problem == Problem::kRepBai) {
        slot = linear.size();
        linear.push_back(std::make_unique<BanditInstance>(build_linear_instance(ex.instance, m)));
      } else {
        slot = contextual.size();
        contextual.push_back(std::make_unique<ContextualInstance>(build_contextual_instance(ex.instance, m)));
      }
      for (const auto& algo : ex.algos)
        for (int run = 0; run < ex.replications; ++run) cells.push_back({e, slot, algo, m, run});
    }
  }
  // Order cells as experiment, algo, M, run so that each algorithm's rows are contiguous.
  std::stable_sort(cells.begin(), cells.end(), [&](const Cell& a, const Cell& b) {
    if (a.experiment != b.experiment) return a.experiment < b.experiment;
    const auto& algos = config.experiments[a.experiment].algos;
    const auto ia = std::find(algos.begin(), algos.end(), a.algo) - algos.begin();
    const auto ib = std::find(algos.begin(), algos.end(), b.algo) - algos.begin();
    return ia < ib;
  });

  std::vector<RunRecord> records(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  std::mutex progress_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (failure) return;
      }
      const Cell& cell = cells[i];
      const Experiment& ex = config.experiments[cell.experiment];
      RunConfig run = ex.run;
      run.seed = cell_seed(config.seed, cell.algo, cell.m, cell.run_id);
      try {
        RunRecord r = ex.problem == Problem::kRepBai
                          ? run_linear(cell.algo, *linear[cell.instance], run, config.record_wallclock).record
                          : run_contextual(cell.algo, *contextual[cell.instance], run, config.record_wallclock).record;
        r.run_id = cell.run_id;
        records[i] = std::move(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
      const std::size_t finished = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(finished, cells.size());
      }
    }
  };

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

void write_phase_log(std::ostream& out, const BaiResult& result) {
  out << "phase,rounds,delta_t,representation_samples,elimination_samples,cumulative_samples,sin_theta,"
         "spectral_gap,active_tasks,candidates_total\n";
  for (const auto& p : result.phases) {
    int active = 0;
    std::size_t total = 0;
    for (const auto& set : p.candidates_after) {
      if (set.size() > 1) ++active;
      total += set.size();
    }
    out << p.phase << "," << p.rounds << "," << fmt(p.delta_t) << "," << p.representation_samples << ","
        << p.elimination_samples << "," << p.cumulative_samples << ","
        << (p.sin_theta ? fmt(*p.sin_theta) : std::string()) << ","
        << (p.spectral_gap ? fmt(*p.spectral_gap) : std::string()) << "," << active << "," << total << "\n";
  }
}

void write_stage_log(std::ostream& out, const BpiResult& r) {
  out << "t0,rounds,batch_size,steps,rho_e,nu_hat,sin_theta,jitter_fallbacks,samples_total\n";
  out << r.t0 << "," << r.rounds << "," << r.batch_size << "," << r.steps << "," << fmt(r.rho_e) << ","
      << fmt(r.nu_hat) << "," << (r.sin_theta ? fmt(*r.sin_theta) : std::string()) << "," << r.jitter_fallbacks << ","
      << r.samples_total << "\n";
}

double task_omega(const BanditInstance& instance, int task) {
  const MatrixXd& b = instance.tasks().extractor;
  const MatrixXd reduced = instance.arms().arms * b;
  const int best = instance.best_arm(task);
  const double top = instance.mean_reward(task, best);
  std::vector<VectorXd> rows;
  for (int i = 0; i < instance.num_arms(); ++i) {
    const double gap = top - instance.mean_reward(task, i);
    if (i == best || gap <= 1e-12) continue;
    rows.push_back((reduced.row(best) - reduced.row(i)).transpose() / gap);
  }
  if (rows.empty()) return linalg::min_eigenvalue(design_covariance(
                        VectorXd::Constant(instance.num_arms(), 1.0 / instance.num_arms()), reduced));
  MatrixXd targets(static_cast<Eigen::Index>(rows.size()), b.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) targets.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  const Design design = solve_g_optimal(reduced, targets);
  return linalg::min_eigenvalue(design.covariance);
}

InstanceDiagnostics diagnose(const BanditInstance& instance) {
  InstanceDiagnostics out;
  out.tasks = instance.num_tasks();
  out.task_diversity = instance.tasks().diversity();
  out.min_gap = instance.min_gap();
  // Tasks with identical mean rows share ω.
  std::map<std::vector<double>, double> cache;
  double omega = std::numeric_limits<double>::infinity();
  for (int m = 0; m < instance.num_tasks(); ++m) {
    const VectorXd row = instance.mean_table().row(m).transpose();
    std::vector<double> key(row.data(), row.data() + row.size());
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, task_omega(instance, m)).first;
    omega = std::min(omega, it->second);
  }
  out.omega = omega;
  return out;
}

InstanceDiagnostics diagnose(const ContextualInstance& instance) {
  InstanceDiagnostics out;
  out.tasks = instance.num_tasks();
  out.task_diversity = instance.tasks().diversity();
  out.nu = instance.context().assumption3_statistic();
  return out;
}

}  // namespace mtbandit
