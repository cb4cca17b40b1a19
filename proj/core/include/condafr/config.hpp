#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "condafr/orchestrator.hpp"
#include "condafr/streams.hpp"

namespace condafr::config {

/// Stream and run settings addressable by dotted keys (`stream.*`, `run.*`,
/// `model.*`, `inference.*`, `optim.*`, `estimator.*`).
struct CliConfig {
  streams::StreamSpec stream = streams::default_spec(streams::Scenario::task_drift);
  orchestrator::RunConfig run;
};

using Entries = std::map<std::string, std::string>;

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Later duplicates win. Throws ConfigError on malformed lines.
Entries parse(const std::string& text);
Entries parse_file(const std::filesystem::path& path);
/// Parses a `key=value` command-line override.
std::pair<std::string, std::string> parse_override(const std::string& assignment);

/// Builds a config from defaults plus entries. `stream.scenario` selects the
/// default stream first and `run.method` selects the switch preset first, so
/// explicit keys override both regardless of order. Unknown keys and bad
/// values throw ConfigError naming the key.
CliConfig build(const Entries& entries);

/// Every key with its effective value, one per line in sorted order.
std::string render(const CliConfig& config);
/// FNV-1a of the rendered config, as 16 hex digits.
std::string hash(const CliConfig& config);

std::vector<std::string> known_keys();

std::string format_transforms(const std::vector<streams::DomainTransform>& transforms);
std::vector<streams::DomainTransform> parse_transforms(const std::string& text);

}  // namespace condafr::config
