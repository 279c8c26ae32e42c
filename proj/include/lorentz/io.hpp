#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lorentz/experiments.hpp"
#include "lorentz/geometry.hpp"

namespace lorentz {

/// Version recorded in manifests.
std::string tool_version();

/// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

/// A validated configuration document.
struct ParsedConfig {
    ScattererConfig config;
    ExperimentParams params;
    std::uint64_t seed{42};
    int probe_grid{200};
    double flight_cap{50.0};
    /// SHA-256 of the canonical form (compact JSON, keys sorted).
    std::string digest;
};

/// Parses and validates a configuration document.
///
/// Schema: {"disks": [{"center": [x, y], "radius": r}, ...],
/// "horizon": {"probe_grid": int, "flight_cap": num}, "experiments": {...},
/// "seed": int}. Only "disks" is required. Unknown keys are rejected.
/// Throws SchemaError, NonPositiveMargin or InfiniteHorizonSuspected.
ParsedConfig parse_config(const std::string& document);

/// The shipped default document.
std::string default_config_document();

/// Canonical form used for the digest.
std::string canonical_json(const std::string& document);

void write_fixture(const std::filesystem::path& path, const SigmaFixture& fixture, const std::string& config_digest);
/// Throws MissingFixture when the file is absent or was produced from another configuration.
SigmaFixture read_fixture(const std::filesystem::path& path, const std::string& config_digest);

/// Writes `<name>.json` and one `<name>_<table>.csv` per table. Returns the written paths.
std::vector<std::filesystem::path> write_verdict(const std::filesystem::path& dir, const Verdict& verdict);

/// Reproducibility record of one experiment run. Appended to manifest.jsonl;
/// existing lines are never rewritten.
struct RunManifest {
    std::string config_digest;
    std::uint64_t seed{0};
    std::string experiment;
    Json parameters;
    std::string version;
    double wall_clock_seconds{0.0};
    std::uint64_t events{0};
    int workers{0};
    bool pass{false};
};

void append_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

/// One row per verdict JSON found in `dir`: experiment name and PASS/FAIL.
Table collate_verdicts(const std::filesystem::path& dir);

}  // namespace lorentz
