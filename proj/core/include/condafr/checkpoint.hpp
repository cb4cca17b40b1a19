#pragma once

#include <filesystem>
#include <string>

#include "condafr/config.hpp"
#include "condafr/orchestrator.hpp"

namespace condafr::checkpoint {

inline constexpr const char* kFormat = "condafr-checkpoint";
inline constexpr int kVersion = 1;

/// Self-describing JSON container for one run:
///
///   format, version       header, checked on load
///   config                rendered key = value text of the effective config
///   stream                every environment, hidden query labels included
///   inference, solver     parameter stores with optimizer state
///   snapshots, memory     replay state
///   rng, global_step, envs_done
///   metrics, bounds       the run's MetricsLog
///
/// Doubles are written in shortest round-trip form, so a load reproduces the
/// state bit for bit.
std::string serialize(const config::CliConfig& config, const orchestrator::Learner& learner);
void save(const std::filesystem::path& path, const config::CliConfig& config, const orchestrator::Learner& learner);

struct Loaded {
  config::CliConfig config;
  orchestrator::Learner learner;
};

/// Throws DataError on a wrong header, a newer major version or missing fields.
Loaded deserialize(const std::string& text);
Loaded load(const std::filesystem::path& path);

}  // namespace condafr::checkpoint
