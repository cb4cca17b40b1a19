#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "condafr/estimators.hpp"
#include "condafr/inference.hpp"
#include "condafr/replay.hpp"
#include "condafr/solver.hpp"
#include "condafr/streams.hpp"

namespace condafr::orchestrator {

enum class Method { gfr, memory_replay, noise_replay, baseline1_optimal, baseline2, baseline3, baseline4_naive };
enum class ReplayKind { none, generative, memory, noise };

std::string to_string(Method m);
Method method_from_string(const std::string& name);
const std::vector<Method>& all_methods();

struct RunConfig {
  Method method = Method::gfr;
  ReplayKind replay = ReplayKind::generative;
  bool task_confusion = true;
  bool warmup = true;
  bool snapshot = true;
  bool with_encoder_snapshot = true;
  bool train_solver_from_scratch_per_env = false;

  std::size_t warmup_steps = 500;
  std::size_t steps_per_env = 1000;
  std::size_t batch_size = 64;
  /// Fraction of the solver's current batch replaced by generated features
  /// of past environments (data augmentation); 0 disables it.
  double augment_ratio = 0.0;
  std::size_t memory_capacity = 64;
  std::size_t eval_every = 50;
  bool estimate_bound = true;

  inference::Dims dims;  // input, condition and class counts follow the stream
  inference::Options inference{.kl_weight = 0.1};
  std::size_t solver_hidden = 64;
  AdamOptions representation_optimizer{1e-3};
  SgdOptions heads_optimizer{1e-2, 0.9, 5e-4, true};
  SgdOptions solver_optimizer{1e-2, 0.9, 5e-4, true};

  estimators::LambdaOptions lambda;
  estimators::CStarOptions c_star;
  std::size_t kl_samples = 512;

  std::uint64_t seed = 1;

  /// Switches matching the named row of the component grid.
  static RunConfig preset(Method method);
  /// Re-applies the switches of `method`, keeping every other field.
  void apply_method(Method method);
  void validate() const;
};

struct MetricsRow {
  std::uint64_t global_step = 0;
  std::size_t env = 0;
  std::string method;
  double first_task_acc = 0.0;
  double all_seen_acc = 0.0;
  double env_acc = 0.0;
  std::optional<double> lambda_hat;
  std::optional<double> kl_hat;
  std::optional<double> bound_rhs;
  std::optional<double> bound_lhs;
  double loss_inference = 0.0;
  double loss_solver = 0.0;
};

/// Append-only record of a run; global steps never decrease.
class MetricsLog {
 public:
  static const char* header();

  void append(MetricsRow row);
  const std::vector<MetricsRow>& rows() const noexcept { return rows_; }
  const std::vector<estimators::BoundEstimate>& bounds() const noexcept { return bounds_; }
  void append_bound(estimators::BoundEstimate bound) { bounds_.push_back(std::move(bound)); }

  void write_csv(std::ostream& out) const;
  void write_bound_csv(std::ostream& out) const;
  static const char* bound_header();

 private:
  std::vector<MetricsRow> rows_;
  std::vector<estimators::BoundEstimate> bounds_;
};

/// Complete mutable state of one run.
struct Learner {
  RunConfig config;
  streams::Stream stream;
  inference::InferenceState inference;
  solver::SolverState solver;
  std::vector<replay::Snapshot> snapshots;
  replay::MemoryBank memory;
  Rng rng;
  std::uint64_t global_step = 0;
  std::size_t envs_done = 0;
  MetricsLog log;

  /// Validates the pairing of config and stream and builds fresh state.
  static Learner create(const RunConfig& config, streams::Stream stream);

  /// Evaluation-mode features of an environment that has been presented: the
  /// frozen snapshot encoder when one was kept, the live model with the
  /// environment's condition otherwise. z is drawn from the posterior, so
  /// `features` fixes the draw per (seed, env) and is repeatable.
  Tensor features(std::size_t env, const Tensor& x) const;
  Tensor sampled_features(std::size_t env, const Tensor& x, Rng& rng) const;
  std::vector<int> predict(const Tensor& h) const;
  double query_accuracy(std::size_t env) const;

  /// Trains on the next environment and records its metrics.
  void train_next_env();
  bool finished() const noexcept { return envs_done == stream.size(); }

  /// Snapshots whose features are replayed while training env `envs_done`.
  std::vector<const replay::Snapshot*> past_snapshots() const;
  const replay::Snapshot* snapshot_for(std::size_t env) const;
};

/// Runs every environment of `stream` in order.
MetricsLog run_scenario(const streams::Stream& stream, const RunConfig& config);
Learner run_learner(const streams::Stream& stream, const RunConfig& config);

/// Bound components for the environments presented so far.
estimators::BoundEstimate estimate_bound(const Learner& learner, Rng& rng);

/// Condition id used for environment `env`.
std::size_t condition_of(std::size_t env);

}  // namespace condafr::orchestrator
