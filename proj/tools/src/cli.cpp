#include "condafr_cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "condafr/checkpoint.hpp"
#include "condafr/config.hpp"
#include "condafr/errors.hpp"
#include "condafr/eval_access.hpp"
#include "condafr/orchestrator.hpp"
#include "condafr/streams.hpp"

namespace condafr::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App& cmd, Common& c, bool with_out = true) {
  cmd.add_option("--config", c.config_path, "flat key = value config file");
  cmd.add_option("--set", c.overrides, "override one key (key=value), repeatable")->allow_extra_args(false);
  cmd.add_option("--seed", c.seed, "seed for both the stream and the run");
  if (with_out) cmd.add_option("--out", c.out, "output directory")->required();
}

config::CliConfig load_config(const Common& c) {
  config::Entries entries;
  if (!c.config_path.empty()) entries = config::parse_file(c.config_path);
  for (const auto& o : c.overrides) {
    auto [k, v] = config::parse_override(o);
    entries[k] = v;
  }
  if (c.seed) {
    entries["run.seed"] = std::to_string(*c.seed);
    entries["stream.seed"] = std::to_string(*c.seed);
  }
  return config::build(entries);
}

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

/// Evaluation-only dump of one environment's inferred features.
void dump_features(const orchestrator::Learner& l, std::size_t env, std::ostream& out) {
  if (env >= l.envs_done) throw DataError("checkpoint does not contain a trained environment " + std::to_string(env));
  const auto& e = l.stream[env];
  const Tensor hs = l.features(env, e.support_x());
  const Tensor hq = l.features(env, e.query_x());
  const auto& hidden = e.query_labels(streams::grant_eval_access());
  out << "# eval-only: query labels are hidden evaluation labels\n";
  out << "role,label";
  for (std::size_t c = 0; c < hs.cols(); ++c) out << ",h" << c;
  out << '\n';
  auto rows = [&](const Tensor& h, const std::vector<int>& y, const char* role) {
    for (std::size_t r = 0; r < h.rows(); ++r) {
      out << role << ',' << y[r];
      for (double v : h.row(r)) out << ',' << fmt(v);
      out << '\n';
    }
  };
  rows(hs, e.support_y(), "support");
  rows(hq, hidden, "query");
}

streams::Stream stream_for(const config::CliConfig& cfg, const std::string& stream_csv) {
  if (!stream_csv.empty()) return streams::ingest_csv(fs::path(stream_csv));
  return streams::build_stream(cfg.stream);
}

int cmd_generate(const Common& c, bool hide_labels, std::ostream& out) {
  const auto cfg = load_config(c);
  const auto stream = streams::build_stream(cfg.stream);
  fs::create_directories(c.out);
  const auto access = streams::grant_eval_access();
  const fs::path path = fs::path(c.out) / "stream.csv";
  streams::export_csv(stream, path, hide_labels ? nullptr : &access);
  write_text(fs::path(c.out) / "config.txt", config::render(cfg));
  out << "wrote " << path.string() << " (" << stream.size() << " environments)\n";
  return ok;
}

int cmd_run(const Common& c, const std::string& stream_csv, std::ostream& out) {
  const auto cfg = load_config(c);
  auto stream = stream_for(cfg, stream_csv);
  const fs::path dir(c.out);
  fs::create_directories(dir);
  write_text(dir / "config.txt", config::render(cfg));

  auto learner = orchestrator::Learner::create(cfg.run, std::move(stream));
  while (!learner.finished()) {
    learner.train_next_env();
    const auto& row = learner.log.rows().back();
    out << "env " << row.env << ": first_task_acc=" << fmt(row.first_task_acc)
        << " all_seen_acc=" << fmt(row.all_seen_acc) << '\n';
  }

  std::ostringstream metrics, bound;
  learner.log.write_csv(metrics);
  learner.log.write_bound_csv(bound);
  write_text(dir / "metrics.csv", metrics.str());
  write_text(dir / "bound.csv", bound.str());
  checkpoint::save(dir / "checkpoint.json", cfg, learner);
  fs::create_directories(dir / "features");
  for (std::size_t e = 0; e < learner.envs_done; ++e) {
    std::ostringstream f;
    dump_features(learner, e, f);
    write_text(dir / "features" / ("env_" + std::to_string(e) + ".csv"), f.str());
  }
  out << "run directory: " << dir.string() << '\n';
  return ok;
}

int cmd_ablate(const Common& c, std::size_t seeds, std::uint64_t first_seed, std::ostream& out) {
  const auto base = load_config(c);
  const fs::path dir(c.out);
  fs::create_directories(dir);
  write_text(dir / "config.txt", config::render(base));

  std::ostringstream table, curves;
  table << "method,seed,config_hash,all_seen_acc,first_task_acc\n";
  curves << "method,seed,global_step,env,first_task_acc,all_seen_acc\n";
  for (orchestrator::Method m : orchestrator::all_methods()) {
    for (std::size_t s = 0; s < seeds; ++s) {
      config::CliConfig cfg = base;
      cfg.run.apply_method(m);
      cfg.run.seed = first_seed + s;
      cfg.stream.seed = first_seed + s;
      const auto log = orchestrator::run_scenario(streams::build_stream(cfg.stream), cfg.run);
      const auto& last = log.rows().back();
      table << orchestrator::to_string(m) << ',' << cfg.run.seed << ',' << config::hash(cfg) << ','
            << fmt(last.all_seen_acc) << ',' << fmt(last.first_task_acc) << '\n';
      for (const auto& r : log.rows()) {
        curves << r.method << ',' << cfg.run.seed << ',' << r.global_step << ',' << r.env << ','
               << fmt(r.first_task_acc) << ',' << fmt(r.all_seen_acc) << '\n';
      }
      out << orchestrator::to_string(m) << " seed " << cfg.run.seed << ": all_seen_acc=" << fmt(last.all_seen_acc)
          << '\n';
    }
  }
  write_text(dir / "ablation.csv", table.str());
  write_text(dir / "curves.csv", curves.str());
  return ok;
}

int cmd_dump(const std::string& checkpoint_path, std::size_t env, const std::string& out_path, std::ostream& out) {
  const auto loaded = checkpoint::load(checkpoint_path);
  if (out_path.empty()) {
    dump_features(loaded.learner, env, out);
  } else {
    std::ostringstream f;
    dump_features(loaded.learner, env, f);
    write_text(out_path, f.str());
  }
  return ok;
}

int cmd_inspect(const std::string& checkpoint_path, std::ostream& out) {
  const auto loaded = checkpoint::load(checkpoint_path);
  const auto& l = loaded.learner;
  out << "format: " << checkpoint::kFormat << " v" << checkpoint::kVersion << '\n';
  out << "config_hash: " << config::hash(loaded.config) << '\n';
  out << "method: " << orchestrator::to_string(l.config.method) << '\n';
  out << "environments: " << l.envs_done << " of " << l.stream.size() << " trained\n";
  out << "global_step: " << l.global_step << '\n';
  out << "parameters: representation=" << l.inference.representation.scalar_count()
      << " heads=" << l.inference.heads.scalar_count() << " solver=" << l.solver.params.scalar_count() << '\n';
  for (const auto& s : l.snapshots) {
    out << "snapshot env " << s.env_index << ": condition=" << s.condition
        << " encoder=" << (s.has_encoder ? "yes" : "no") << " hash=" << std::hex << s.hash() << std::dec << '\n';
  }
  for (const auto& [env, bank] : l.memory.banks()) out << "memory env " << env << ": " << bank.size() << " rows\n";
  if (!l.log.rows().empty()) {
    const auto& r = l.log.rows().back();
    out << "final: first_task_acc=" << fmt(r.first_task_acc) << " all_seen_acc=" << fmt(r.all_seen_acc) << '\n';
  }
  return ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continual domain adaptation with generative feature replay"};
  app.require_subcommand(1);

  Common gen_opts, run_opts, ablate_opts;
  bool hide_labels = false;
  std::string stream_csv;
  std::size_t seeds = 5;
  std::uint64_t first_seed = 1;
  std::string ckpt, dump_out;
  std::size_t dump_env = 0;

  auto* gen = app.add_subcommand("generate", "write a synthetic stream as CSV");
  add_common(*gen, gen_opts);
  gen->add_flag("--hide-labels", hide_labels, "write -1 for query labels");

  auto* runc = app.add_subcommand("run", "train on a stream and write a run directory");
  add_common(*runc, run_opts);
  runc->add_option("--stream", stream_csv, "ingest environments from a CSV instead of generating them");

  auto* ablate = app.add_subcommand("ablate", "run every method of the component grid");
  add_common(*ablate, ablate_opts);
  ablate->add_option("--seeds", seeds, "number of seeds per method")->check(CLI::PositiveNumber);
  ablate->add_option("--first-seed", first_seed, "first seed of the sweep");

  auto* dump = app.add_subcommand("dump-features", "write one environment's inferred features");
  dump->add_option("--checkpoint", ckpt, "checkpoint.json of a run")->required();
  dump->add_option("--env", dump_env, "environment index")->required();
  dump->add_option("--out", dump_out, "output file (stdout when omitted)");

  auto* inspect = app.add_subcommand("inspect", "summarize a checkpoint");
  inspect->add_option("checkpoint", ckpt, "checkpoint.json of a run")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : config_error;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_opts, hide_labels, out);
    if (runc->parsed()) return cmd_run(run_opts, stream_csv, out);
    if (ablate->parsed()) return cmd_ablate(ablate_opts, seeds, first_seed, out);
    if (dump->parsed()) return cmd_dump(ckpt, dump_env, dump_out, out);
    if (inspect->parsed()) return cmd_inspect(ckpt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.key() << ": " << e.what() << '\n';
    return config_error;
  } catch (const NumericError& e) {
    err << "numeric failure at step " << e.step() << ": " << e.what() << '\n';
    return numeric_error;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return config_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return failure;
  }
  return failure;
}

}  // namespace condafr::cli
