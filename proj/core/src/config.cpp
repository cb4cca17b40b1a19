#include "condafr/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "condafr/errors.hpp"

namespace condafr::config {

namespace {

using orchestrator::RunConfig;
using streams::StreamSpec;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

struct Field {
  std::function<std::string(const CliConfig&)> get;
  std::function<void(CliConfig&, const std::string& key, const std::string& value)> set;
};

Field size_field(std::size_t StreamSpec::*m) {
  return {[m](const CliConfig& c) { return std::to_string(c.stream.*m); },
          [m](CliConfig& c, const std::string& k, const std::string& v) { c.stream.*m = to_uint(k, v); }};
}

template <class T>
Field run_size(T RunConfig::*m) {
  return {[m](const CliConfig& c) { return std::to_string(c.run.*m); },
          [m](CliConfig& c, const std::string& k, const std::string& v) { c.run.*m = static_cast<T>(to_uint(k, v)); }};
}

Field run_bool(bool RunConfig::*m) {
  return {[m](const CliConfig& c) { return std::string(c.run.*m ? "true" : "false"); },
          [m](CliConfig& c, const std::string& k, const std::string& v) { c.run.*m = to_bool(k, v); }};
}

Field real(std::function<double&(CliConfig&)> ref) {
  return {[ref](const CliConfig& c) { return fmt(ref(const_cast<CliConfig&>(c))); },
          [ref](CliConfig& c, const std::string& k, const std::string& v) { ref(c) = to_double(k, v); }};
}

Field count(std::function<std::size_t&(CliConfig&)> ref) {
  return {[ref](const CliConfig& c) { return std::to_string(ref(const_cast<CliConfig&>(c))); },
          [ref](CliConfig& c, const std::string& k, const std::string& v) { ref(c) = to_uint(k, v); }};
}

template <class E>
Field enumeration(E StreamSpec::*m, std::vector<E> values) {
  return {[m](const CliConfig& c) { return streams::to_string(c.stream.*m); },
          [m, values](CliConfig& c, const std::string& k, const std::string& v) {
            for (E e : values) {
              if (streams::to_string(e) == v) {
                c.stream.*m = e;
                return;
              }
            }
            throw ConfigError(k, "unknown value '" + v + "'");
          }};
}

const std::map<std::string, Field>& registry() {
  static const std::map<std::string, Field> fields = [] {
    using streams::BaseDistribution;
    using streams::DifficultyOrder;
    using streams::Scenario;
    std::map<std::string, Field> f;
    f["stream.scenario"] = enumeration(&StreamSpec::scenario,
                                       std::vector{Scenario::task_drift, Scenario::domain_drift, Scenario::combined});
    f["stream.num_environments"] = size_field(&StreamSpec::num_environments);
    f["stream.classes_per_task"] = {
        [](const CliConfig& c) {
          std::string out;
          for (std::size_t i = 0; i < c.stream.classes_per_task.size(); ++i) {
            out += (i ? "," : "") + std::to_string(c.stream.classes_per_task[i]);
          }
          return out;
        },
        [](CliConfig& c, const std::string& k, const std::string& v) {
          c.stream.classes_per_task.clear();
          if (trim(v).empty()) return;
          for (const auto& part : split(v, ',')) c.stream.classes_per_task.push_back(to_uint(k, part));
        }};
    f["stream.num_classes"] = size_field(&StreamSpec::num_classes);
    f["stream.base"] = enumeration(&StreamSpec::base, std::vector{BaseDistribution::moons, BaseDistribution::blobs});
    f["stream.base_noise"] = real([](CliConfig& c) -> double& { return c.stream.base_noise; });
    f["stream.transforms"] = {[](const CliConfig& c) { return format_transforms(c.stream.transforms); },
                              [](CliConfig& c, const std::string& k, const std::string& v) {
                                try {
                                  c.stream.transforms = parse_transforms(v);
                                } catch (const std::invalid_argument& e) {
                                  throw ConfigError(k, e.what());
                                }
                              }};
    f["stream.order"] = enumeration(
        &StreamSpec::order, std::vector{DifficultyOrder::as_given, DifficultyOrder::ascending, DifficultyOrder::descending});
    f["stream.samples_per_class"] = size_field(&StreamSpec::samples_per_class);
    f["stream.seed"] = {[](const CliConfig& c) { return std::to_string(c.stream.seed); },
                        [](CliConfig& c, const std::string& k, const std::string& v) { c.stream.seed = to_uint(k, v); }};

    f["run.method"] = {[](const CliConfig& c) { return orchestrator::to_string(c.run.method); },
                       [](CliConfig& c, const std::string&, const std::string& v) {
                         c.run.apply_method(orchestrator::method_from_string(v));
                       }};
    f["run.replay"] = {[](const CliConfig& c) {
                         switch (c.run.replay) {
                           case orchestrator::ReplayKind::generative: return std::string("generative");
                           case orchestrator::ReplayKind::memory: return std::string("memory");
                           case orchestrator::ReplayKind::noise: return std::string("noise");
                           case orchestrator::ReplayKind::none: break;
                         }
                         return std::string("none");
                       },
                       [](CliConfig& c, const std::string& k, const std::string& v) {
                         using orchestrator::ReplayKind;
                         if (v == "generative") c.run.replay = ReplayKind::generative;
                         else if (v == "memory") c.run.replay = ReplayKind::memory;
                         else if (v == "noise") c.run.replay = ReplayKind::noise;
                         else if (v == "none") c.run.replay = ReplayKind::none;
                         else throw ConfigError(k, "unknown replay kind '" + v + "'");
                       }};
    f["run.task_confusion"] = run_bool(&RunConfig::task_confusion);
    f["run.warmup"] = run_bool(&RunConfig::warmup);
    f["run.snapshot"] = run_bool(&RunConfig::snapshot);
    f["run.with_encoder_snapshot"] = run_bool(&RunConfig::with_encoder_snapshot);
    f["run.train_solver_from_scratch_per_env"] = run_bool(&RunConfig::train_solver_from_scratch_per_env);
    f["run.estimate_bound"] = run_bool(&RunConfig::estimate_bound);
    f["run.warmup_steps"] = run_size(&RunConfig::warmup_steps);
    f["run.steps_per_env"] = run_size(&RunConfig::steps_per_env);
    f["run.batch_size"] = run_size(&RunConfig::batch_size);
    f["run.memory_capacity"] = run_size(&RunConfig::memory_capacity);
    f["run.eval_every"] = run_size(&RunConfig::eval_every);
    f["run.kl_samples"] = run_size(&RunConfig::kl_samples);
    f["run.seed"] = run_size(&RunConfig::seed);
    f["run.augment_ratio"] = real([](CliConfig& c) -> double& { return c.run.augment_ratio; });

    f["model.latent_dim"] = count([](CliConfig& c) -> std::size_t& { return c.run.dims.latent_dim; });
    f["model.feature_dim"] = count([](CliConfig& c) -> std::size_t& { return c.run.dims.feature_dim; });
    f["model.hidden_dim"] = count([](CliConfig& c) -> std::size_t& { return c.run.dims.hidden_dim; });
    f["model.solver_hidden"] = count([](CliConfig& c) -> std::size_t& { return c.run.solver_hidden; });

    f["inference.beta"] = real([](CliConfig& c) -> double& { return c.run.inference.beta; });
    f["inference.kl_weight"] = real([](CliConfig& c) -> double& { return c.run.inference.kl_weight; });
    f["inference.margin"] = real([](CliConfig& c) -> double& { return c.run.inference.margin; });
    f["inference.grl_amplitude"] = real([](CliConfig& c) -> double& { return c.run.inference.grl.amplitude; });
    f["inference.grl_horizon"] = real([](CliConfig& c) -> double& { return c.run.inference.grl.horizon; });

    f["optim.representation_lr"] = real([](CliConfig& c) -> double& { return c.run.representation_optimizer.lr; });
    f["optim.heads_lr"] = real([](CliConfig& c) -> double& { return c.run.heads_optimizer.lr; });
    f["optim.heads_momentum"] = real([](CliConfig& c) -> double& { return c.run.heads_optimizer.momentum; });
    f["optim.heads_weight_decay"] = real([](CliConfig& c) -> double& { return c.run.heads_optimizer.weight_decay; });
    f["optim.solver_lr"] = real([](CliConfig& c) -> double& { return c.run.solver_optimizer.lr; });
    f["optim.solver_momentum"] = real([](CliConfig& c) -> double& { return c.run.solver_optimizer.momentum; });
    f["optim.solver_weight_decay"] = real([](CliConfig& c) -> double& { return c.run.solver_optimizer.weight_decay; });

    f["estimator.lambda_hidden"] = count([](CliConfig& c) -> std::size_t& { return c.run.lambda.hidden_dim; });
    f["estimator.lambda_steps"] = count([](CliConfig& c) -> std::size_t& { return c.run.lambda.steps; });
    f["estimator.lambda_lr"] = real([](CliConfig& c) -> double& { return c.run.lambda.lr; });
    f["estimator.c_star_steps"] = count([](CliConfig& c) -> std::size_t& { return c.run.c_star.steps; });
    f["estimator.c_star_hidden"] = count([](CliConfig& c) -> std::size_t& { return c.run.c_star.hidden_dim; });
    return f;
  }();
  return fields;
}

}  // namespace

Entries parse(const std::string& text) {
  Entries out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number), "expected key = value, got '" + body + "'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(number), "empty key");
    out[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return out;
}

Entries parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::pair<std::string, std::string> parse_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must look like key=value");
  }
  return {trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1))};
}

CliConfig build(const Entries& entries) {
  const auto& fields = registry();
  for (const auto& [key, _] : entries) {
    if (!fields.contains(key)) throw ConfigError(key, "unknown configuration key");
  }
  CliConfig c;
  if (auto it = entries.find("stream.scenario"); it != entries.end()) {
    fields.at("stream.scenario").set(c, it->first, it->second);
    const auto seed = c.stream.seed;
    c.stream = streams::default_spec(c.stream.scenario);
    c.stream.seed = seed;
  }
  if (auto it = entries.find("run.method"); it != entries.end()) fields.at("run.method").set(c, it->first, it->second);
  for (const auto& [key, value] : entries) {
    if (key == "stream.scenario" || key == "run.method") continue;
    fields.at(key).set(c, key, value);
  }
  c.stream.validate();
  c.run.validate();
  return c;
}

std::string render(const CliConfig& config) {
  std::string out;
  for (const auto& [key, field] : registry()) out += key + " = " + field.get(config) + "\n";
  return out;
}

std::string hash(const CliConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : render(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& [key, _] : registry()) out.push_back(key);
  return out;
}

std::string format_transforms(const std::vector<streams::DomainTransform>& transforms) {
  std::string out;
  for (std::size_t i = 0; i < transforms.size(); ++i) {
    const auto& t = transforms[i];
    if (i) out += ';';
    out += fmt(t.rotation) + ':' + fmt(t.translation[0]) + ':' + fmt(t.translation[1]) + ':' + fmt(t.scale) + ':' +
           fmt(t.noise_std);
  }
  return out;
}

std::vector<streams::DomainTransform> parse_transforms(const std::string& text) {
  std::vector<streams::DomainTransform> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, ';')) {
    if (item.empty()) continue;
    const auto parts = split(item, ':');
    if (parts.size() != 5) {
      throw std::invalid_argument("transform '" + item + "' needs rotation:tx:ty:scale:noise");
    }
    const std::string key = "stream.transforms";
    streams::DomainTransform t;
    t.rotation = to_double(key, parts[0]);
    t.translation = {to_double(key, parts[1]), to_double(key, parts[2])};
    t.scale = to_double(key, parts[3]);
    t.noise_std = to_double(key, parts[4]);
    out.push_back(t);
  }
  return out;
}

}  // namespace condafr::config
