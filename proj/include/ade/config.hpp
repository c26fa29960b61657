#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ade/data.hpp"

namespace ade {

enum class EstimatorKind { kAde, kCd, kPcd, kSm, kNce, kMpf, kNf };

inline EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "ade") return EstimatorKind::kAde;
  if (s == "cd") return EstimatorKind::kCd;
  if (s == "pcd") return EstimatorKind::kPcd;
  if (s == "sm") return EstimatorKind::kSm;
  if (s == "nce") return EstimatorKind::kNce;
  if (s == "mpf") return EstimatorKind::kMpf;
  if (s == "nf") return EstimatorKind::kNf;
  throw ConfigError("config: unknown estimator '" + s + "'");
}

inline std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kAde: return "ade";
    case EstimatorKind::kCd: return "cd";
    case EstimatorKind::kPcd: return "pcd";
    case EstimatorKind::kSm: return "sm";
    case EstimatorKind::kNce: return "nce";
    case EstimatorKind::kMpf: return "mpf";
    case EstimatorKind::kNf: return "nf";
  }
  return "?";
}

struct DatasetConfig {
  std::string name = "moons";
  std::string path;  // for name == "csv"
  int n = 10000;
  double noise = std::numeric_limits<double>::quiet_NaN();
  bool has_seed = false;
  std::uint64_t seed = 0;  // defaults to the run seed
  int d = 5;
  std::vector<double> mu;     // diag_gaussian truth
  std::vector<double> sigma;  // diag_gaussian truth
};

struct ModelConfig {
  std::string kind = "mlp";  // mlp | quadratic
  std::vector<int> hidden = {128, 128, 128};
  std::string activation;  // empty: relu, except score matching gets softplus
};

struct DynamicsConfig {
  std::string kind = "langevin";  // leapfrog | generalized | langevin | det_langevin
  int steps = 5;
  double eta = 0.1;
  double grad_clip = 10.0;
  double v_clip = 0.0;
  bool learn_eta = true;
  bool scale_position_update = false;
  double noise_std = 1.0;
  int gen_hidden = 32;
  std::string logdet_method = "taylor";
  int logdet_order = 6;
  int logdet_probes = 8;
};

struct InitSection {
  std::string kind = "planar";  // gaussian | planar | empirical
  int layers = 10;
  double momentum_std = 1.0;
};

struct AdeSection {
  std::string gradient_mode = "bptt";
  double lambda = 1.0;
  double entropy_coeff = 1.0;
  double momentum_penalty = 1.0;
  double grad_penalty = 0.0;
  int inner_steps = 1;
};

struct CdSection {
  int steps = 15;
  double eta = 0.1;
  double grad_clip = 10.0;
  bool mh = false;
  int buffer = 10000;
};

struct NceSection {
  double noise_scale = 1.0;
};

struct MpfSection {
  double eta = 0.1;
  double exp_clamp = 20.0;
};

struct OptimizerConfig {
  double lr = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.999;
  double eps = 1e-8;
  double sampler_lr = -1.0;  // < 0: same as lr
};

struct RunConfig {
  std::string estimator = "ade";
  std::uint64_t seed = 0;
  long iterations = 2000;
  int batch = 128;
  std::string out_dir;
  long eval_interval = 100;
  long checkpoint_interval = 1000;
  DatasetConfig dataset;
  ModelConfig model;
  DynamicsConfig dynamics;
  InitSection init;
  AdeSection ade;
  CdSection cd;
  NceSection nce;
  MpfSection mpf;
  OptimizerConfig optimizer;

  EstimatorKind kind() const { return estimator_from_string(estimator); }
  std::uint64_t dataset_seed() const { return dataset.has_seed ? dataset.seed : seed; }
  int data_dim() const { return dataset.name == "diag_gaussian" ? dataset.d : 2; }
  std::string resolved_activation() const {
    if (!model.activation.empty()) return model.activation;
    return kind() == EstimatorKind::kSm ? "softplus" : "relu";
  }
  double sampler_lr() const {
    return optimizer.sampler_lr < 0.0 ? optimizer.lr : optimizer.sampler_lr;
  }
};

// ---------------------------------------------------------------------------
// Strict JSON parsing: every field has a default, unknown keys are rejected,
// and errors name the offending field.

namespace cfgdetail {

inline void check_keys(const nlohmann::json& j, const std::string& scope,
                       const std::set<std::string>& known) {
  if (!j.is_object()) throw ConfigError("config: '" + scope + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw ConfigError("config: unknown key '" + (scope.empty() ? key : scope + "." + key) + "'");
    }
  }
}

template <typename T>
void get_to(const nlohmann::json& j, const std::string& scope, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: bad value for '" + scope + "." + key + "'");
  }
}

inline void get_vec(const nlohmann::json& j, const std::string& scope, const char* key,
                    std::vector<double>& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  out.clear();
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("config: bad value for '" + scope + "." + key + "'");
      out.push_back(e.get<double>());
    }
  } else {
    throw ConfigError("config: bad value for '" + scope + "." + key + "'");
  }
}

}  // namespace cfgdetail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using cfgdetail::check_keys;
  using cfgdetail::get_to;
  RunConfig c;
  check_keys(j, "",
             {"estimator", "seed", "iterations", "batch", "out_dir", "eval_interval",
              "checkpoint_interval", "dataset", "model", "dynamics", "init", "ade", "cd", "nce",
              "mpf", "optimizer"});
  get_to(j, "", "estimator", c.estimator);
  estimator_from_string(c.estimator);
  get_to(j, "", "seed", c.seed);
  get_to(j, "", "iterations", c.iterations);
  get_to(j, "", "batch", c.batch);
  get_to(j, "", "out_dir", c.out_dir);
  get_to(j, "", "eval_interval", c.eval_interval);
  get_to(j, "", "checkpoint_interval", c.checkpoint_interval);
  if (c.iterations < 0) throw ConfigError("config: 'iterations' must be >= 0");
  if (c.batch < 1) throw ConfigError("config: 'batch' must be >= 1");

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, "dataset", {"name", "path", "n", "noise", "seed", "d", "mu", "sigma"});
    get_to(d, "dataset", "name", c.dataset.name);
    get_to(d, "dataset", "path", c.dataset.path);
    get_to(d, "dataset", "n", c.dataset.n);
    get_to(d, "dataset", "noise", c.dataset.noise);
    if (d.contains("seed")) {
      c.dataset.has_seed = true;
      get_to(d, "dataset", "seed", c.dataset.seed);
    }
    get_to(d, "dataset", "d", c.dataset.d);
    cfgdetail::get_vec(d, "dataset", "mu", c.dataset.mu);
    cfgdetail::get_vec(d, "dataset", "sigma", c.dataset.sigma);
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, "model", {"kind", "hidden", "activation"});
    get_to(m, "model", "kind", c.model.kind);
    get_to(m, "model", "hidden", c.model.hidden);
    get_to(m, "model", "activation", c.model.activation);
    if (c.model.kind != "mlp" && c.model.kind != "quadratic") {
      throw ConfigError("config: 'model.kind' must be mlp or quadratic");
    }
  }

  if (j.contains("dynamics")) {
    const auto& d = j.at("dynamics");
    check_keys(d, "dynamics",
               {"kind", "steps", "eta", "grad_clip", "v_clip", "learn_eta",
                "scale_position_update", "noise_std", "gen_hidden", "logdet_method",
                "logdet_order", "logdet_probes"});
    get_to(d, "dynamics", "kind", c.dynamics.kind);
    dynamics_kind_from_string(c.dynamics.kind);
    get_to(d, "dynamics", "steps", c.dynamics.steps);
    get_to(d, "dynamics", "eta", c.dynamics.eta);
    get_to(d, "dynamics", "grad_clip", c.dynamics.grad_clip);
    get_to(d, "dynamics", "v_clip", c.dynamics.v_clip);
    get_to(d, "dynamics", "learn_eta", c.dynamics.learn_eta);
    get_to(d, "dynamics", "scale_position_update", c.dynamics.scale_position_update);
    get_to(d, "dynamics", "noise_std", c.dynamics.noise_std);
    get_to(d, "dynamics", "gen_hidden", c.dynamics.gen_hidden);
    get_to(d, "dynamics", "logdet_method", c.dynamics.logdet_method);
    get_to(d, "dynamics", "logdet_order", c.dynamics.logdet_order);
    get_to(d, "dynamics", "logdet_probes", c.dynamics.logdet_probes);
    if (c.dynamics.steps < 0) throw ConfigError("config: 'dynamics.steps' must be >= 0");
    if (c.dynamics.eta <= 0.0) throw ConfigError("config: 'dynamics.eta' must be positive");
  }

  if (j.contains("init")) {
    const auto& i = j.at("init");
    check_keys(i, "init", {"kind", "layers", "momentum_std"});
    get_to(i, "init", "kind", c.init.kind);
    get_to(i, "init", "layers", c.init.layers);
    get_to(i, "init", "momentum_std", c.init.momentum_std);
    if (c.init.kind != "gaussian" && c.init.kind != "planar" && c.init.kind != "empirical") {
      throw ConfigError("config: 'init.kind' must be gaussian, planar, or empirical");
    }
  }

  if (j.contains("ade")) {
    const auto& a = j.at("ade");
    check_keys(a, "ade",
               {"gradient_mode", "lambda", "entropy_coeff", "momentum_penalty", "grad_penalty",
                "inner_steps"});
    get_to(a, "ade", "gradient_mode", c.ade.gradient_mode);
    get_to(a, "ade", "lambda", c.ade.lambda);
    get_to(a, "ade", "entropy_coeff", c.ade.entropy_coeff);
    get_to(a, "ade", "momentum_penalty", c.ade.momentum_penalty);
    get_to(a, "ade", "grad_penalty", c.ade.grad_penalty);
    get_to(a, "ade", "inner_steps", c.ade.inner_steps);
    if (c.ade.lambda <= 0.0) throw ConfigError("config: 'ade.lambda' must be positive");
    if (c.ade.entropy_coeff < 0.0) {
      throw ConfigError("config: 'ade.entropy_coeff' must be nonnegative");
    }
    if (c.ade.inner_steps < 1) throw ConfigError("config: 'ade.inner_steps' must be >= 1");
  }

  if (j.contains("cd")) {
    const auto& d = j.at("cd");
    check_keys(d, "cd", {"steps", "eta", "grad_clip", "mh", "buffer"});
    get_to(d, "cd", "steps", c.cd.steps);
    get_to(d, "cd", "eta", c.cd.eta);
    get_to(d, "cd", "grad_clip", c.cd.grad_clip);
    get_to(d, "cd", "mh", c.cd.mh);
    get_to(d, "cd", "buffer", c.cd.buffer);
    if (c.cd.steps < 1) throw ConfigError("config: 'cd.steps' must be >= 1");
  }

  if (j.contains("nce")) {
    const auto& n = j.at("nce");
    check_keys(n, "nce", {"noise_scale"});
    get_to(n, "nce", "noise_scale", c.nce.noise_scale);
  }

  if (j.contains("mpf")) {
    const auto& m = j.at("mpf");
    check_keys(m, "mpf", {"eta", "exp_clamp"});
    get_to(m, "mpf", "eta", c.mpf.eta);
    get_to(m, "mpf", "exp_clamp", c.mpf.exp_clamp);
  }

  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    check_keys(o, "optimizer", {"lr", "beta1", "beta2", "eps", "sampler_lr"});
    get_to(o, "optimizer", "lr", c.optimizer.lr);
    get_to(o, "optimizer", "beta1", c.optimizer.beta1);
    get_to(o, "optimizer", "beta2", c.optimizer.beta2);
    get_to(o, "optimizer", "eps", c.optimizer.eps);
    get_to(o, "optimizer", "sampler_lr", c.optimizer.sampler_lr);
    if (c.optimizer.lr < 0.0) throw ConfigError("config: 'optimizer.lr' must be >= 0");
  }
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["estimator"] = c.estimator;
  j["seed"] = c.seed;
  j["iterations"] = c.iterations;
  j["batch"] = c.batch;
  j["out_dir"] = c.out_dir;
  j["eval_interval"] = c.eval_interval;
  j["checkpoint_interval"] = c.checkpoint_interval;
  j["dataset"] = {{"name", c.dataset.name}, {"n", c.dataset.n}, {"seed", c.dataset_seed()},
                  {"d", c.dataset.d}};
  if (!c.dataset.path.empty()) j["dataset"]["path"] = c.dataset.path;
  if (!std::isnan(c.dataset.noise)) j["dataset"]["noise"] = c.dataset.noise;
  if (!c.dataset.mu.empty()) j["dataset"]["mu"] = c.dataset.mu;
  if (!c.dataset.sigma.empty()) j["dataset"]["sigma"] = c.dataset.sigma;
  j["model"] = {{"kind", c.model.kind},
                {"hidden", c.model.hidden},
                {"activation", c.resolved_activation()}};
  j["dynamics"] = {{"kind", c.dynamics.kind},
                   {"steps", c.dynamics.steps},
                   {"eta", c.dynamics.eta},
                   {"grad_clip", c.dynamics.grad_clip},
                   {"v_clip", c.dynamics.v_clip},
                   {"learn_eta", c.dynamics.learn_eta},
                   {"scale_position_update", c.dynamics.scale_position_update},
                   {"noise_std", c.dynamics.noise_std},
                   {"gen_hidden", c.dynamics.gen_hidden},
                   {"logdet_method", c.dynamics.logdet_method},
                   {"logdet_order", c.dynamics.logdet_order},
                   {"logdet_probes", c.dynamics.logdet_probes}};
  j["init"] = {{"kind", c.init.kind},
               {"layers", c.init.layers},
               {"momentum_std", c.init.momentum_std}};
  j["ade"] = {{"gradient_mode", c.ade.gradient_mode},
              {"lambda", c.ade.lambda},
              {"entropy_coeff", c.ade.entropy_coeff},
              {"momentum_penalty", c.ade.momentum_penalty},
              {"grad_penalty", c.ade.grad_penalty},
              {"inner_steps", c.ade.inner_steps}};
  j["cd"] = {{"steps", c.cd.steps},
             {"eta", c.cd.eta},
             {"grad_clip", c.cd.grad_clip},
             {"mh", c.cd.mh},
             {"buffer", c.cd.buffer}};
  j["nce"] = {{"noise_scale", c.nce.noise_scale}};
  j["mpf"] = {{"eta", c.mpf.eta}, {"exp_clamp", c.mpf.exp_clamp}};
  j["optimizer"] = {{"lr", c.optimizer.lr},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"eps", c.optimizer.eps},
                    {"sampler_lr", c.sampler_lr()}};
  return j;
}

inline DatasetSpec dataset_spec(const RunConfig& c) {
  DatasetSpec s;
  s.name = c.dataset.name;
  s.n = c.dataset.n;
  s.noise = c.dataset.noise;
  s.seed = c.dataset_seed();
  s.d = c.dataset.d;
  if (!c.dataset.mu.empty()) {
    s.mu = Eigen::Map<const Vec>(c.dataset.mu.data(), static_cast<Eigen::Index>(c.dataset.mu.size()));
    if (s.mu.size() == 1) s.mu = Vec::Constant(c.dataset.d, c.dataset.mu[0]);
  }
  if (!c.dataset.sigma.empty()) {
    s.sigma = Eigen::Map<const Vec>(c.dataset.sigma.data(),
                                    static_cast<Eigen::Index>(c.dataset.sigma.size()));
    if (s.sigma.size() == 1) s.sigma = Vec::Constant(c.dataset.d, c.dataset.sigma[0]);
  }
  return s;
}

// Training data for a run: a named generator or a CSV file.
inline Mat load_run_dataset(const RunConfig& c) {
  if (c.dataset.name == "csv") {
    if (c.dataset.path.empty()) throw ConfigError("config: 'dataset.path' required for csv");
    Mat m = load_csv(c.dataset.path);
    if (m.rows() == 0) throw ConfigError("config: csv dataset is empty");
    return m;
  }
  return generate(dataset_spec(c));
}

}  // namespace ade
