#include "mtbandit/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mtbandit/error.hpp"

namespace mtbandit {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kConfigInvalid, field + ": " + why);
}

void reject_unknown(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  for (const auto& item : j.items())
    if (!allowed.count(item.key())) invalid(where + item.key(), "unknown key");
}

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    invalid(where + key, e.what());
  }
}

MatrixXd matrix_from(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) invalid(field, "expected a non-empty array of rows");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) invalid(field, "rows must be non-empty arrays");
  MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) invalid(field, "rows differ in length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) invalid(field, "entries must be numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

json matrix_to(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

NoiseModel noise_from(const json& j) {
  reject_unknown(j, "instance.noise.", {"kind", "scale", "test_mode"});
  NoiseModel noise;
  const std::string kind = j.value("kind", std::string("standard-gaussian"));
  if (kind == "standard-gaussian") noise.kind = NoiseKind::kStandardGaussian;
  else if (kind == "scaled-gaussian") noise.kind = NoiseKind::kScaledGaussian;
  else if (kind == "bounded-uniform") noise.kind = NoiseKind::kBoundedUniform;
  else invalid("instance.noise.kind", "unknown noise kind '" + kind + "'");
  if (j.contains("scale")) noise.scale = get_field<double>(j, "scale", "instance.noise.");
  if (j.contains("test_mode")) noise.test_mode = get_field<bool>(j, "test_mode", "instance.noise.");
  try {
    noise.validate();
  } catch (const Error& e) {
    invalid("instance.noise", e.what());
  }
  return noise;
}

const char* noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kStandardGaussian: return "standard-gaussian";
    case NoiseKind::kScaledGaussian: return "scaled-gaussian";
    case NoiseKind::kBoundedUniform: return "bounded-uniform";
  }
  return "standard-gaussian";
}

bool is_keyword(const json& j, const char* word) { return j.is_string() && j.get<std::string>() == word; }

TaskEnsemble tasks_from(const InstanceSpec& spec, std::optional<int> m) {
  if (spec.predictions && m && *m != spec.predictions->cols())
    invalid("instance.predictions", "explicit predictions fix M; cannot sweep M");
  const int tasks = spec.predictions ? static_cast<int>(spec.predictions->cols()) : m ? *m : spec.m.value_or(0);
  try {
    MatrixXd b;
    if (spec.extractor) {
      b = *spec.extractor;
    } else {
      b = MatrixXd::Zero(spec.d, spec.k);
      b.topRows(spec.k).setIdentity();
    }
    MatrixXd w;
    if (spec.predictions) {
      w = *spec.predictions;
    } else {
      if (tasks < 1 || tasks % spec.k != 0) invalid("instance.M", "group predictions need M ≥ 1 and k | M");
      w = MatrixXd::Zero(spec.k, tasks);
      const int group = tasks / spec.k;
      for (int t = 0; t < tasks; ++t) w(t / group, t) = 1.0;
    }
    return TaskEnsemble::create(b, w);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigInvalid) throw;
    invalid("instance", e.what());
  }
}

}  // namespace

InstanceSpec parse_instance_spec(const json& j) {
  if (!j.is_object()) invalid("instance", "expected an object");
  reject_unknown(j, "instance.", {"type", "d", "k", "M", "arms", "contexts", "actions", "features", "distribution",
                                  "extractor", "predictions", "noise"});
  InstanceSpec spec;
  spec.type = j.value("type", std::string("linear"));
  if (spec.type != "linear" && spec.type != "contextual") invalid("instance.type", "must be linear or contextual");
  spec.d = get_field<int>(j, "d", "instance.");
  spec.k = get_field<int>(j, "k", "instance.");
  if (spec.d < 1 || spec.k < 1 || spec.k > spec.d) invalid("instance.k", "need 1 ≤ k ≤ d");
  if (j.contains("M")) {
    spec.m = get_field<int>(j, "M", "instance.");
    if (*spec.m < 1) invalid("instance.M", "must be positive");
  }
  if (j.contains("noise")) spec.noise = noise_from(j.at("noise"));

  if (j.contains("extractor") && !is_keyword(j.at("extractor"), "canonical")) {
    spec.extractor = matrix_from(j.at("extractor"), "instance.extractor");
    if (spec.extractor->rows() != spec.d || spec.extractor->cols() != spec.k)
      invalid("instance.extractor", "must be d×k");
  }
  if (j.contains("predictions") && !is_keyword(j.at("predictions"), "groups")) {
    spec.predictions = matrix_from(j.at("predictions"), "instance.predictions");
    if (spec.predictions->rows() != spec.k) invalid("instance.predictions", "must have k rows");
    if (spec.m && *spec.m != spec.predictions->cols()) invalid("instance.M", "disagrees with predictions");
  }

  if (spec.type == "linear") {
    if (j.contains("arms") && !is_keyword(j.at("arms"), "canonical")) {
      spec.arms = matrix_from(j.at("arms"), "instance.arms");
      if (spec.arms->cols() != spec.d) invalid("instance.arms", "arms must have d entries");
    }
  } else {
    spec.contexts = get_field<int>(j, "contexts", "instance.");
    spec.actions = get_field<int>(j, "actions", "instance.");
    if (spec.contexts < 1 || spec.actions < 1) invalid("instance.contexts", "need at least one context and action");
    if (j.contains("features") && !is_keyword(j.at("features"), "canonical")) {
      const json& f = j.at("features");
      if (!f.is_array() || static_cast<int>(f.size()) != spec.contexts)
        invalid("instance.features", "need one table per context");
      std::vector<MatrixXd> tables;
      for (std::size_t s = 0; s < f.size(); ++s) {
        MatrixXd t = matrix_from(f[s], "instance.features[" + std::to_string(s) + "]");
        if (t.rows() != spec.actions || t.cols() != spec.d)
          invalid("instance.features[" + std::to_string(s) + "]", "must be actions×d");
        tables.push_back(std::move(t));
      }
      spec.features = std::move(tables);
    }
    if (j.contains("distribution") && !is_keyword(j.at("distribution"), "uniform")) {
      const auto probs = get_field<std::vector<double>>(j, "distribution", "instance.");
      if (static_cast<int>(probs.size()) != spec.contexts) invalid("instance.distribution", "one entry per context");
      spec.distribution = Eigen::Map<const VectorXd>(probs.data(), static_cast<Eigen::Index>(probs.size()));
    }
  }
  return spec;
}

json to_json(const InstanceSpec& spec) {
  json j;
  j["type"] = spec.type;
  j["d"] = spec.d;
  j["k"] = spec.k;
  if (spec.m) j["M"] = *spec.m;
  j["extractor"] = spec.extractor ? matrix_to(*spec.extractor) : json("canonical");
  j["predictions"] = spec.predictions ? matrix_to(*spec.predictions) : json("groups");
  j["noise"] = {{"kind", noise_kind_name(spec.noise.kind)}, {"scale", spec.noise.scale},
                {"test_mode", spec.noise.test_mode}};
  if (spec.type == "linear") {
    j["arms"] = spec.arms ? matrix_to(*spec.arms) : json("canonical");
  } else {
    j["contexts"] = spec.contexts;
    j["actions"] = spec.actions;
    if (spec.features) {
      json tables = json::array();
      for (const auto& t : *spec.features) tables.push_back(matrix_to(t));
      j["features"] = tables;
    } else {
      j["features"] = "canonical";
    }
    if (spec.distribution) {
      j["distribution"] = std::vector<double>(spec.distribution->data(),
                                              spec.distribution->data() + spec.distribution->size());
    } else {
      j["distribution"] = "uniform";
    }
  }
  return j;
}

BanditInstance build_linear_instance(const InstanceSpec& spec, std::optional<int> m) {
  if (spec.type != "linear") invalid("instance.type", "expected a linear instance");
  TaskEnsemble tasks = tasks_from(spec, m);
  try {
    ArmSet arms = ArmSet::from_rows(spec.arms.value_or(MatrixXd::Identity(spec.d, spec.d)));
    return BanditInstance(std::move(arms), std::move(tasks), spec.noise);
  } catch (const Error& e) {
    invalid("instance", e.what());
  }
}

ContextualInstance build_contextual_instance(const InstanceSpec& spec, std::optional<int> m) {
  if (spec.type != "contextual") invalid("instance.type", "expected a contextual instance");
  TaskEnsemble tasks = tasks_from(spec, m);
  try {
    std::vector<MatrixXd> features;
    if (spec.features) {
      features = *spec.features;
    } else {
      for (int s = 0; s < spec.contexts; ++s) {
        MatrixXd table = MatrixXd::Zero(spec.actions, spec.d);
        for (int a = 0; a < spec.actions; ++a) table(a, (a + s) % spec.d) = 1.0;
        features.push_back(std::move(table));
      }
    }
    const VectorXd dist = spec.distribution.value_or(VectorXd::Constant(spec.contexts, 1.0 / spec.contexts));
    ContextModel model = ContextModel::create(std::move(features), dist);
    return ContextualInstance(std::move(model), std::move(tasks), spec.noise);
  } catch (const Error& e) {
    invalid("instance", e.what());
  }
}

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) invalid("run", "expected an object");
  reject_unknown(j, "run.", {"delta", "epsilon", "zeta", "gamma", "scale_T", "scale_p", "scale_N", "scale_T0",
                             "scale_round", "omega_floor", "nu_floor", "max_phases", "seed", "parallelism",
                             "bias_correction"});
  RunConfig c;
  auto number = [&](const char* key, double& field) {
    if (j.contains(key)) field = get_field<double>(j, key, "run.");
  };
  number("delta", c.delta);
  number("epsilon", c.epsilon);
  number("zeta", c.zeta);
  number("gamma", c.gamma);
  number("scale_T", c.scale_T);
  number("scale_p", c.scale_p);
  number("scale_N", c.scale_N);
  number("scale_T0", c.scale_T0);
  number("scale_round", c.scale_round);
  number("omega_floor", c.omega_floor);
  number("nu_floor", c.nu_floor);
  if (j.contains("max_phases")) c.max_phases = get_field<int>(j, "max_phases", "run.");
  if (j.contains("seed")) c.seed = get_field<std::uint64_t>(j, "seed", "run.");
  if (j.contains("parallelism")) c.parallelism = get_field<int>(j, "parallelism", "run.");
  if (j.contains("bias_correction")) c.bias_correction = get_field<bool>(j, "bias_correction", "run.");
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  return json{{"delta", c.delta},           {"epsilon", c.epsilon},         {"zeta", c.zeta},
              {"gamma", c.gamma},           {"scale_T", c.scale_T},         {"scale_p", c.scale_p},
              {"scale_N", c.scale_N},       {"scale_T0", c.scale_T0},       {"scale_round", c.scale_round},
              {"omega_floor", c.omega_floor}, {"nu_floor", c.nu_floor},     {"max_phases", c.max_phases},
              {"seed", c.seed},             {"parallelism", c.parallelism}, {"bias_correction", c.bias_correction}};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) invalid(path, "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    invalid(path, e.what());
  }
}

}  // namespace mtbandit
