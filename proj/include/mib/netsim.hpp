#pragma once

#include "mib/core.hpp"

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <string>

namespace mib::sim {

enum class FaultMode : std::uint8_t { none, crash, byz_aba, byz_rbc };

std::string_view fault_mode_name(FaultMode m);
FaultMode fault_mode_from_name(std::string_view name);

struct FaultPlan {
    FaultMode mode = FaultMode::none;
    std::vector<ReplicaId> victims;
    // Virtual time at which victims stop. Defaults: 0 for crash mode
    // (down from the start), never for the Byzantine modes.
    std::optional<std::uint64_t> crash_time;

    std::uint64_t effective_crash_time() const;
    bool is_victim(ReplicaId id) const;
};

enum class DelayKind : std::uint8_t { uniform, fixed_link, adversarial };

/// Message timing model. `uniform` draws each delay from [lo, hi];
/// `fixed_link` pins one delay per (sender, receiver) pair from the
/// same window; `adversarial` ignores the window and delivers each
/// recipient's queue newest-first (reverse arrival order).
struct DelayPolicy {
    DelayKind kind = DelayKind::uniform;
    std::uint64_t lo = 90;
    std::uint64_t hi = 110;

    friend bool operator==(const DelayPolicy&, const DelayPolicy&) = default;
};

std::string delay_policy_name(const DelayPolicy& p);
DelayPolicy delay_policy_from_name(std::string_view text);

/// A simulated process. Implementations must be deterministic: all
/// nondeterminism comes from the scheduler.
class Node {
public:
    virtual ~Node() = default;
    virtual Emitted start() = 0;
    virtual Emitted handle(const Envelope& env) = 0;
    /// Sum of invalid envelopes this node has dropped so far.
    virtual std::uint64_t dropped_invalid() const { return 0; }
};

struct InstanceMetrics {
    std::uint64_t messages = 0;
    std::uint64_t bytes = 0;
    std::uint32_t max_depth = 0;     // max delivery/decision depth over replicas
    std::uint16_t max_rounds = 0;    // aba only
    bool one_step_everywhere = true; // aba only: all correct deciders were one-step
};

struct EpochMetrics {
    std::uint64_t start_time = 0;
    std::uint64_t end_time = 0;
    std::uint64_t latency = 0;
    std::uint64_t messages = 0;
    std::uint64_t bytes = 0;
    std::uint32_t max_depth = 0;
    std::uint16_t max_aba_rounds = 0;
    int onestep_instances = 0;
    std::map<std::pair<Phase, std::uint16_t>, InstanceMetrics> instances;
};

struct RecordedEvent {
    std::uint64_t time = 0;
    ReplicaId replica = 0;
    ProgressEvent event;
};

struct SimMetrics {
    std::vector<EpochMetrics> epochs; // index = epoch number
    std::uint64_t events_processed = 0;
    std::uint64_t dropped_invalid = 0;
    std::uint64_t dropped_crashed = 0;
    bool liveness_ok = true;
    std::string stuck; // human-readable description of the stuck instance
};

/// Deterministic discrete-event transport for a set of nodes. Strictly
/// single-threaded; two runs with the same seed and node behavior
/// produce byte-identical traces.
class Simulation {
public:
    // (epoch, (phase, instance)) -> (messages, bytes)
    using CountKey = std::pair<std::uint32_t, std::pair<Phase, std::uint16_t>>;

    Simulation(int n, DelayPolicy delay, FaultPlan fault, std::uint64_t seed,
               std::uint64_t event_cap);

    void add_node(std::unique_ptr<Node> node); // must be called n times
    /// Runs every node's start() and drains the queue. Returns false
    /// when the event cap was hit.
    bool run();

    const std::vector<RecordedEvent>& events() const { return events_; }
    const std::map<CountKey, std::pair<std::uint64_t, std::uint64_t>>&
    message_counts() const { return counts_; }
    std::uint64_t events_processed() const { return events_processed_; }
    std::uint64_t dropped_crashed() const { return dropped_crashed_; }
    std::uint64_t now() const { return now_; }

private:
    struct Pending {
        std::uint64_t at = 0;
        std::uint64_t seq = 0;
        Envelope env;
        bool operator>(const Pending& other) const {
            return std::tie(at, seq) > std::tie(other.at, other.seq);
        }
    };

    void dispatch(Emitted&& emitted, ReplicaId from, std::uint64_t now);
    std::uint64_t pick_delay(const Envelope& env);
    bool crashed(ReplicaId id, std::uint64_t at) const;
    void rewrite_byzantine(Envelope& env) const;
    std::optional<Pending> pop();

    int n_;
    DelayPolicy delay_;
    FaultPlan fault_;
    std::uint64_t event_cap_;
    std::mt19937_64 rng_;
    std::uint64_t seq_ = 0;
    std::uint64_t now_ = 0;
    std::uint64_t events_processed_ = 0;
    std::uint64_t dropped_crashed_ = 0;

    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
    std::vector<std::deque<Pending>> stacks_; // adversarial mode, per recipient
    std::size_t stack_cursor_ = 0;
    std::uint64_t stacked_ = 0;

    std::vector<std::unique_ptr<Node>> nodes_;
    std::map<CountKey, std::pair<std::uint64_t, std::uint64_t>> counts_;
    std::vector<RecordedEvent> events_;
};

/// Folds raw simulation data into per-epoch metrics, counting depth
/// and decision data from correct replicas only.
std::vector<EpochMetrics> assemble_epoch_metrics(const Simulation& simulation,
                                                 const std::vector<bool>& correct);

/// Full-protocol run configuration: one protocol, one deployment, one
/// fault plan, a synthetic workload, one seed.
struct RunConfig {
    std::string protocol = "mib5";
    int n = 0;  // <= 0 means derive from f
    int f = -1; // < 0 means derive from n
    int batch = 0;   // global batch size B
    int prefill = -1; // transactions prefilled per replica; -1 = B
    int epochs = 1;
    int tx_size = 250;
    std::uint64_t seed = 1;
    FaultPlan fault;
    DelayPolicy delay;
    std::uint64_t event_cap = 10'000'000;
    /// Extra transactions placed in specific buffers before epoch 0.
    std::vector<std::pair<Transaction, std::vector<ReplicaId>>> injected;

    void validate() const;
    Deployment deployment() const;
    /// Derives the missing n or f from the protocol's resilience.
    void resolve();
};

struct RunResult {
    RunConfig config;
    SimMetrics metrics;
    std::vector<RecordedEvent> events;
    /// Per replica, the concatenated delivered batches in epoch order.
    std::vector<std::vector<Transaction>> delivered;
    /// Per replica per epoch, the delivered batch (empty for crashed).
    std::vector<std::vector<std::vector<Transaction>>> delivered_by_epoch;
    std::vector<bool> correct; // false for fault victims

    std::string metrics_json() const;
    std::vector<std::string> csv_rows() const; // one per epoch
    static std::string csv_header();
};

RunResult run(const RunConfig& config);

/// Per-instance spread of the delivery/decision depth across correct
/// replicas.
struct DepthStats {
    std::uint32_t min = 0;
    std::uint32_t median = 0;
    std::uint32_t max = 0;
    int samples = 0;
};

std::map<std::tuple<std::uint32_t, Phase, std::uint16_t>, DepthStats>
depth_report(const RunResult& result);

/// Environment override hook for the liveness cap (MIB_EVENT_CAP).
std::uint64_t default_event_cap();

} // namespace mib::sim
