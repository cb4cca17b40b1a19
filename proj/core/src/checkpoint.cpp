#include "condafr/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "condafr/errors.hpp"
#include "condafr/eval_access.hpp"

namespace condafr::checkpoint {

namespace {

using nlohmann::json;

json tensor_json(const Tensor& t) { return json{{"shape", t.shape()}, {"values", t.values()}}; }

Tensor tensor_from(const json& j) {
  return Tensor(j.at("shape").get<Shape>(), j.at("values").get<std::vector<double>>());
}

json store_json(const ParamStore& store) {
  json params = json::object();
  for (const auto& [name, p] : store) {
    params[name] = {{"value", tensor_json(p.value)},
                    {"first_moment", tensor_json(p.first_moment)},
                    {"second_moment", tensor_json(p.second_moment)},
                    {"trainable", p.trainable}};
  }
  return {{"step", store.step()}, {"params", params}};
}

ParamStore store_from(const json& j) {
  ParamStore store;
  for (const auto& [name, p] : j.at("params").items()) {
    Parameter& param = store.add(name, tensor_from(p.at("value")), p.at("trainable").get<bool>());
    param.first_moment = tensor_from(p.at("first_moment"));
    param.second_moment = tensor_from(p.at("second_moment"));
  }
  store.set_step(j.at("step").get<std::uint64_t>());
  return store;
}

json batch_json(const FeatureBatch& b) { return {{"h", tensor_json(b.h)}, {"y", b.y}}; }

FeatureBatch batch_from(const json& j) { return {tensor_from(j.at("h")), j.at("y").get<std::vector<int>>()}; }

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string serialize(const config::CliConfig& config, const orchestrator::Learner& l) {
  const auto access = streams::grant_eval_access();
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["config"] = config::render(config);
  j["config_hash"] = config::hash(config);

  json envs = json::array();
  for (const auto& env : l.stream) {
    envs.push_back({{"index", env.index()},
                    {"support_x", tensor_json(env.support_x())},
                    {"support_y", env.support_y()},
                    {"query_x", tensor_json(env.query_x())},
                    {"query_labels", env.query_labels(access)},
                    {"support_domain", env.support_domain},
                    {"query_domain", env.query_domain}});
  }
  j["stream"] = envs;
  j["inference"] = {{"representation", store_json(l.inference.representation)},
                    {"heads", store_json(l.inference.heads)}};
  j["solver"] = store_json(l.solver.params);

  json snaps = json::array();
  for (const auto& s : l.snapshots) {
    snaps.push_back({{"env", s.env_index},
                     {"condition", s.condition},
                     {"has_encoder", s.has_encoder},
                     {"label_prior", s.label_prior},
                     {"representation", store_json(s.representation)},
                     {"hypothesis", store_json(s.hypothesis)},
                     {"hash", s.hash()}});
  }
  j["snapshots"] = snaps;

  json memory = json::object();
  memory["capacity_per_class"] = l.memory.capacity_per_class();
  json banks = json::array();
  for (const auto& [env, batch] : l.memory.banks()) banks.push_back({{"env", env}, {"batch", batch_json(batch)}});
  memory["banks"] = banks;
  j["memory"] = memory;

  j["rng"] = l.rng.state();
  j["global_step"] = l.global_step;
  j["envs_done"] = l.envs_done;

  json rows = json::array();
  for (const auto& r : l.log.rows()) {
    rows.push_back({{"global_step", r.global_step},
                    {"env", r.env},
                    {"method", r.method},
                    {"first_task_acc", r.first_task_acc},
                    {"all_seen_acc", r.all_seen_acc},
                    {"env_acc", r.env_acc},
                    {"lambda_hat", opt(r.lambda_hat)},
                    {"kl_hat", opt(r.kl_hat)},
                    {"bound_rhs", opt(r.bound_rhs)},
                    {"bound_lhs", opt(r.bound_lhs)},
                    {"loss_inference", r.loss_inference},
                    {"loss_solver", r.loss_solver}});
  }
  j["metrics"] = rows;

  json bounds = json::array();
  for (const auto& b : l.log.bounds()) {
    json envs_j = json::array();
    for (const auto& e : b.envs) {
      envs_j.push_back({{"env", e.env},
                        {"eps_support", e.eps_support},
                        {"lambda_hat", e.lambda_hat},
                        {"kl_raw", opt(e.kl_raw)},
                        {"kl_hat", e.kl_hat},
                        {"query_error", e.query_error}});
    }
    bounds.push_back({{"env_step", b.env_step}, {"envs", envs_j}, {"c_star", b.c_star}, {"rhs", b.rhs}, {"lhs", b.lhs}});
  }
  j["bounds"] = bounds;
  return j.dump(1);
}

void save(const std::filesystem::path& path, const config::CliConfig& config, const orchestrator::Learner& learner) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << serialize(config, learner) << '\n';
}

Loaded deserialize(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kFormat) throw DataError("not a condafr checkpoint");
  if (j.value("version", 0) != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  }
  try {
    config::CliConfig cfg = config::build(config::parse(j.at("config").get<std::string>()));

    streams::Stream stream;
    for (const auto& e : j.at("stream")) {
      streams::Environment env(e.at("index").get<std::size_t>(), tensor_from(e.at("support_x")),
                               e.at("support_y").get<std::vector<int>>(), tensor_from(e.at("query_x")),
                               e.at("query_labels").get<std::vector<int>>());
      env.support_domain = e.at("support_domain").get<int>();
      env.query_domain = e.at("query_domain").get<int>();
      stream.push_back(std::move(env));
    }

    orchestrator::Learner l = orchestrator::Learner::create(cfg.run, std::move(stream));
    l.inference.representation = store_from(j.at("inference").at("representation"));
    l.inference.heads = store_from(j.at("inference").at("heads"));
    l.solver.params = store_from(j.at("solver"));

    for (const auto& s : j.at("snapshots")) {
      replay::Snapshot snap;
      snap.env_index = s.at("env").get<std::size_t>();
      snap.condition = s.at("condition").get<std::size_t>();
      snap.dims = l.inference.dims;
      snap.has_encoder = s.at("has_encoder").get<bool>();
      snap.label_prior = s.at("label_prior").get<std::vector<double>>();
      snap.representation = store_from(s.at("representation"));
      snap.hypothesis = store_from(s.at("hypothesis"));
      if (snap.hash() != s.at("hash").get<std::uint64_t>()) {
        throw DataError("snapshot for env " + std::to_string(snap.env_index) + " fails its hash check");
      }
      l.snapshots.push_back(std::move(snap));
    }

    const auto& mem = j.at("memory");
    l.memory = replay::MemoryBank(mem.at("capacity_per_class").get<std::size_t>());
    for (const auto& b : mem.at("banks")) l.memory.restore(b.at("env").get<std::size_t>(), batch_from(b.at("batch")));

    l.rng.set_state(j.at("rng").get<std::string>());
    l.global_step = j.at("global_step").get<std::uint64_t>();
    l.envs_done = j.at("envs_done").get<std::size_t>();

    for (const auto& r : j.at("metrics")) {
      orchestrator::MetricsRow row;
      row.global_step = r.at("global_step").get<std::uint64_t>();
      row.env = r.at("env").get<std::size_t>();
      row.method = r.at("method").get<std::string>();
      row.first_task_acc = r.at("first_task_acc").get<double>();
      row.all_seen_acc = r.at("all_seen_acc").get<double>();
      row.env_acc = r.at("env_acc").get<double>();
      row.lambda_hat = opt_from(r.at("lambda_hat"));
      row.kl_hat = opt_from(r.at("kl_hat"));
      row.bound_rhs = opt_from(r.at("bound_rhs"));
      row.bound_lhs = opt_from(r.at("bound_lhs"));
      row.loss_inference = r.at("loss_inference").get<double>();
      row.loss_solver = r.at("loss_solver").get<double>();
      l.log.append(std::move(row));
    }
    for (const auto& b : j.at("bounds")) {
      std::vector<estimators::EnvEstimate> envs;
      for (const auto& e : b.at("envs")) {
        envs.push_back({e.at("env").get<std::size_t>(), e.at("eps_support").get<double>(),
                        e.at("lambda_hat").get<double>(), opt_from(e.at("kl_raw")), e.at("kl_hat").get<double>(),
                        e.at("query_error").get<double>()});
      }
      estimators::BoundEstimate be{b.at("env_step").get<std::size_t>(), std::move(envs), b.at("c_star").get<double>(),
                                   b.at("rhs").get<double>(), b.at("lhs").get<double>()};
      l.log.append_bound(std::move(be));
    }
    return Loaded{std::move(cfg), std::move(l)};
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint is missing or mistypes a field: ") + e.what());
  }
}

Loaded load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace condafr::checkpoint
