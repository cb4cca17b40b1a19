#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "condafr/rng.hpp"
#include "condafr/tensor.hpp"

namespace condafr::streams {

enum class Scenario { task_drift, domain_drift, combined };
enum class BaseDistribution { moons, blobs };
/// Ordering of query domains in the domain-drift scenario.
enum class DifficultyOrder { as_given, ascending, descending };

std::string to_string(Scenario s);
std::string to_string(BaseDistribution b);
std::string to_string(DifficultyOrder o);

/// Affine map plus isotropic noise: x -> scale * R(rotation) * x + translation + N(0, noise_std^2).
struct DomainTransform {
  double rotation = 0.0;
  std::array<double, 2> translation{0.0, 0.0};
  double scale = 1.0;
  double noise_std = 0.0;

  bool is_identity() const noexcept;
  /// Sort key for difficulty ordering: rotation angle first, then the
  /// translation length, then |log scale|, then noise.
  std::array<double, 4> magnitude() const noexcept;

  friend bool operator==(const DomainTransform&, const DomainTransform&) = default;
};

struct StreamSpec {
  Scenario scenario = Scenario::task_drift;
  std::size_t num_environments = 5;
  /// Label-range sizes, one per task (task_drift and combined).
  std::vector<std::size_t> classes_per_task{2, 2, 2, 2, 2};
  /// Total class count; must equal the sum of classes_per_task for the
  /// task-split scenarios.
  std::size_t num_classes = 10;
  BaseDistribution base = BaseDistribution::moons;
  /// Spread of the base distribution (moons jitter, blob standard deviation).
  double base_noise = 0.1;
  /// task_drift: {support, query}. domain_drift: {support, query_1..query_T}.
  /// combined: pool sampled per environment.
  std::vector<DomainTransform> transforms;
  DifficultyOrder order = DifficultyOrder::as_given;
  std::size_t samples_per_class = 100;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  /// Label range [first, last) of task `i` for the task-split scenarios.
  std::pair<int, int> label_range(std::size_t task) const;
};

/// Default desk-scale specs for each scenario.
StreamSpec default_spec(Scenario scenario);

class Environment;

/// Passkey for reading hidden query labels; only obtainable through
/// condafr/eval_access.hpp, which training code does not include.
class EvalAccess {
 private:
  EvalAccess() = default;
  friend EvalAccess grant_eval_access();
};

/// One time step: labeled support, unlabeled query, and held-out query labels.
class Environment {
 public:
  Environment(std::size_t index, Tensor support_x, std::vector<int> support_y, Tensor query_x,
              std::vector<int> query_eval_labels);

  std::size_t index() const noexcept { return index_; }
  const Tensor& support_x() const noexcept { return support_x_; }
  const std::vector<int>& support_y() const noexcept { return support_y_; }
  const Tensor& query_x() const noexcept { return query_x_; }
  std::size_t input_dim() const { return support_x_.cols(); }
  /// Sorted distinct support labels.
  std::vector<int> classes() const;

  /// Hidden evaluation labels; -1 marks an unknown label.
  const std::vector<int>& query_labels(EvalAccess) const noexcept { return query_eval_labels_; }

  /// Transform indices used to synthesize this environment (-1 if unknown).
  int support_domain = -1;
  int query_domain = -1;

 private:
  std::size_t index_;
  Tensor support_x_;
  std::vector<int> support_y_;
  Tensor query_x_;
  std::vector<int> query_eval_labels_;
};

using Stream = std::vector<Environment>;

Tensor sample_base(const StreamSpec& spec, std::size_t label, std::size_t n, Rng& rng);
Tensor apply_transform(const Tensor& x, const DomainTransform& t, Rng& rng);

Stream build_scenario1(const StreamSpec& spec);
Stream build_scenario2(const StreamSpec& spec);
Stream build_combined(const StreamSpec& spec, Rng& rng);
/// Dispatches on spec.scenario, seeding everything from spec.seed.
Stream build_stream(const StreamSpec& spec);

/// Writes `env,role,label,f0..f{D-1}`; query labels come from the hidden
/// evaluation labels when `access` is given, else -1.
void export_csv(const Stream& stream, std::ostream& out, const EvalAccess* access);
void export_csv(const Stream& stream, const std::filesystem::path& path, const EvalAccess* access);
Stream ingest_csv(std::istream& in);
Stream ingest_csv(const std::filesystem::path& path);

}  // namespace condafr::streams
