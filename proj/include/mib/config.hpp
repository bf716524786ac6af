#pragma once

#include "mib/netsim.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mib::cli {

/// Per-protocol overrides from a [section].
struct ProtocolOverride {
    std::optional<int> batch;
    std::optional<int> epochs;
    std::optional<sim::FaultMode> fault;
    std::optional<sim::DelayPolicy> delay;

    friend bool operator==(const ProtocolOverride&, const ProtocolOverride&) = default;
};

/// One experiment file: a run matrix of protocols x seeds under a
/// common deployment study mode (same-n or same-f), fault plan and
/// delay policy. Flat key = value lines, one [protocol] section per
/// override block.
struct ExperimentConfig {
    std::vector<std::string> protocols;
    std::optional<int> n; // exactly one of n / f
    std::optional<int> f;
    int batch = 600;
    int epochs = 1;
    int tx_size = 250;
    std::vector<std::uint64_t> seeds = {1};
    sim::FaultMode fault = sim::FaultMode::none;
    std::optional<std::uint64_t> crash_time;
    std::optional<std::vector<ReplicaId>> victims; // default: the last f replicas
    sim::DelayPolicy delay;
    std::string out = "results";
    std::string format = "csv";
    std::map<std::string, ProtocolOverride> overrides;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

    /// Throws ConfigError with a line/field diagnostic.
    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    /// Canonical form; parse(serialize()) == *this.
    std::string serialize() const;

    /// Expands the run matrix (protocols x seeds), resolving n/f per
    /// protocol and filling default victims.
    std::vector<sim::RunConfig> expand() const;
};

} // namespace mib::cli
