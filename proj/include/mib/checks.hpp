#pragma once

#include "mib/netsim.hpp"
#include "mib/rbc.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mib::checks {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

bool all_pass(const std::vector<CheckResult>& results);

// ---------------------------------------------------------------
// Single-primitive harnesses: one broadcast or agreement instance
// hosted on the deterministic transport.

struct RbcRunOptions {
    RbcKind variant = RbcKind::mbc;
    Deployment dep;
    ReplicaId sender = 0;
    Bytes message;
    std::uint64_t seed = 1;
    sim::DelayPolicy delay;
    bool sender_crash = false;          // sender never provides input
    std::optional<Bytes> split_second;  // split-root attack: second message
    /// Raw sender emissions, overriding input() (crafted attacks).
    std::optional<std::vector<Envelope>> sender_envelopes;
    std::uint64_t event_cap = 2'000'000;
};

struct RbcRunOutcome {
    std::vector<std::optional<Bytes>> delivered; // per replica
    std::vector<std::uint32_t> depth;            // per replica, 0 if undelivered
    std::vector<bool> aborted;
    std::uint64_t messages = 0;
    std::uint64_t bytes = 0;
    bool drained = true;
};

RbcRunOutcome run_single_rbc(const RbcRunOptions& options);

struct AbaRunOptions {
    Deployment dep;
    bool one_step = true;
    std::vector<int> inputs; // per replica
    std::uint64_t seed = 1;
    sim::DelayPolicy delay;
    sim::FaultPlan fault;
    std::uint64_t event_cap = 2'000'000;
};

struct AbaRunOutcome {
    std::vector<std::optional<int>> decisions;
    std::vector<std::uint32_t> depth;
    std::vector<bool> one_step;
    std::vector<std::uint16_t> rounds;
    std::uint64_t messages = 0;
    bool drained = true;
};

AbaRunOutcome run_single_aba(const AbaRunOptions& options);

/// Measured failure-free message count of one broadcast instance.
std::uint64_t measure_rbc_messages(RbcKind variant, const Deployment& dep,
                                   std::uint64_t seed = 1, std::size_t payload = 250);

// ---------------------------------------------------------------
// Run verification: protocol-level safety over a finished run.

/// Returns violation descriptions (empty = safe): batch agreement and
/// total order across correct replicas, per-instance broadcast
/// agreement and integrity, per-instance agreement on decided bits,
/// and the n-f quorum rule per completed epoch.
std::vector<std::string> verify_run(const sim::RunResult& result);

// ---------------------------------------------------------------
// Property suites. Each returns one result per property.

std::vector<CheckResult> check_coding(int random_messages = 1000);
std::vector<CheckResult> check_rbc_counts();
std::vector<CheckResult> check_rbc_steps();
std::vector<CheckResult> check_rbc_safety(int seeds = 25);
std::vector<CheckResult> check_aba_onestep(int seeds = 200);
std::vector<CheckResult> check_aba_agreement(int seeds = 1000);
std::vector<CheckResult> check_acs_safety(int seeds = 100, int epochs = 3);
std::vector<CheckResult> check_determinism(int samples = 20);
std::vector<CheckResult> check_ordering();

/// Scope: core module name or "all". Unknown scopes throw ConfigError.
std::vector<CheckResult> run_scope(const std::string& scope, int seeds = 0);

} // namespace mib::checks
