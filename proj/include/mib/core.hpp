#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mib {

using Bytes = std::vector<std::uint8_t>;
using ReplicaId = std::uint16_t;

/// Thrown for invalid deployment parameters, unknown protocol or
/// threshold names, and malformed experiment configs.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a protocol API is driven outside its contract
/// (double input, non-binary vote, ...). Indicates a caller bug,
/// never a remote replica's fault.
struct ProtocolMisuse : std::logic_error {
    using std::logic_error::logic_error;
};

enum class Resilience : std::uint8_t { r3f1, r5f1, r7f1 };

/// Smallest n admitted by a resilience rule for a given fault bound.
int min_replicas(Resilience r, int f);
int resilience_denominator(Resilience r);
std::string_view resilience_name(Resilience r);

struct Deployment {
    int n = 0;
    int f = 0;
    Resilience resilience = Resilience::r3f1;

    /// Throws ConfigError unless f >= 0, n >= 1 and n satisfies the
    /// resilience bound.
    void validate() const;
};

enum class RbcKind : std::uint8_t { avid, mbc, avid_l, mbc_l };
enum class AbaKind : std::uint8_t { cobalt, w1s_cobalt, s1s_cobalt };

std::string_view rbc_kind_name(RbcKind k);
std::string_view aba_kind_name(AbaKind k);
RbcKind rbc_kind_from_name(std::string_view name);

struct ProtocolSpec {
    std::string name;
    RbcKind rbc;
    AbaKind aba;
    Resilience resilience;
};

/// Registry of the eight deployable protocols. Throws ConfigError
/// listing the valid names when `name` is unknown.
const ProtocolSpec& protocol_registry(std::string_view name);
const std::vector<ProtocolSpec>& all_protocols();

struct Transaction {
    std::uint64_t id = 0;
    Bytes payload;

    friend bool operator==(const Transaction&, const Transaction&) = default;
};

enum class Phase : std::uint8_t { rbc = 0, aba = 1 };

struct InstanceTag {
    Phase phase = Phase::rbc;
    std::uint16_t index = 0;

    friend bool operator==(const InstanceTag&, const InstanceTag&) = default;
};

/// Authenticated point-to-point message. `depth` is the causal step
/// depth within the instance: 1 + max depth over the envelopes whose
/// receipt enabled this send, or 1 when enabled only by local input.
struct Envelope {
    ReplicaId sender = 0;
    ReplicaId receiver = 0;
    std::uint32_t epoch = 0;
    InstanceTag tag;
    Bytes payload;
    std::uint32_t depth = 1;
};

/// Fixed per-envelope framing overhead counted by the byte metrics:
/// sender(2) receiver(2) epoch(4) phase(1) instance(2) depth(4).
inline constexpr std::size_t kEnvelopeHeaderBytes = 15;

/// The single authority for quorum arithmetic. Names: "n-f", "n-2f",
/// "f+1", "2f+1", plus "n1-f" and "n1-2f" which require the active
/// group size `n1`. Unknown names (or a missing n1) throw ConfigError.
int quorum_threshold(const Deployment& dep, std::string_view name,
                     std::optional<int> n1 = std::nullopt);

/// Progress reported by a protocol state machine to its host.
struct ProgressEvent {
    enum class Kind : std::uint8_t { rbc_deliver, aba_decide, epoch_done };

    Kind kind = Kind::rbc_deliver;
    std::uint32_t epoch = 0;
    std::uint16_t instance = 0;
    std::uint32_t depth = 0;
    int value = 0;            // aba_decide: the decided bit
    bool one_step = false;    // aba_decide: decided at the one-step phase
    std::uint16_t rounds = 0; // aba_decide: backup rounds entered
    Bytes digest;             // rbc_deliver: hash of the delivered value
    std::vector<Transaction> batch; // epoch_done: the delivered batch
};

struct Emitted {
    std::vector<Envelope> out;
    std::vector<ProgressEvent> events;

    void merge(Emitted&& other);
};

} // namespace mib
