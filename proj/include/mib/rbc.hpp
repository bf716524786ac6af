#pragma once

#include "mib/coding.hpp"
#include "mib/core.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>

namespace mib::rbc {

enum class RbcMsgType : std::uint8_t {
    init = 0,
    witness = 1,
    send = 2,
    echo = 3,
    ready = 4,
    val = 5,
};

/// Wire form: type(1) | root(32) | leaf index(2 BE) | branch count(1) |
/// branch digests | block length(4 BE) | block | optional active set
/// (count byte + 2-byte BE indices). Messages that carry no block use
/// a zero block length and an empty branch.
struct RbcMessage {
    RbcMsgType type = RbcMsgType::init;
    coding::Digest root{};
    std::uint16_t leaf_index = 0;
    std::vector<coding::Digest> branch;
    Bytes block;
    std::vector<ReplicaId> active_set; // non-empty only when carried

    Bytes encode() const;
    static std::optional<RbcMessage> decode(std::span<const std::uint8_t> wire);
};

struct RbcConfig {
    Deployment dep;
    ReplicaId sender = 0;
    RbcKind variant = RbcKind::mbc;
    std::vector<ReplicaId> active_set; // all n replicas for non-learner variants
    int k_data = 0;
    int k_total = 0;

    /// Builds the canonical configuration for one broadcast instance:
    /// active set {(sender + k) mod n : k in [0, n1)}, erasure
    /// parameters (n1 - 2f, n1). Validates the deployment.
    static RbcConfig make(const Deployment& dep, ReplicaId sender, RbcKind variant);

    int group_size() const { return static_cast<int>(active_set.size()); }
    bool is_active(ReplicaId id) const;
    /// Position of `id` within the active set, or -1.
    int active_pos(ReplicaId id) const;
    std::vector<ReplicaId> learners() const;
};

/// Closed-form failure-free message count for one instance.
long long analytic_message_count(RbcKind variant, const Deployment& dep);

struct RbcDelivery {
    Bytes value;
    std::uint32_t depth = 0;
};

struct RbcOutcome {
    std::vector<Envelope> out;
    std::optional<RbcDelivery> delivered;
};

/// One broadcast instance at one replica. Drives all four variants
/// behind the same surface: the sender calls input() once, everyone
/// feeds envelopes through handle(). Invalid or equivocating traffic
/// is dropped and counted, never fatal.
class RbcInstance {
public:
    RbcInstance(RbcConfig cfg, ReplicaId self, std::uint32_t epoch, std::uint16_t index);

    RbcOutcome input(const Bytes& message);
    RbcOutcome handle(const Envelope& env);

    /// Byzantine sender behavior for fault injection: two messages,
    /// each with its own valid tree, split across the two halves of
    /// the recipient group.
    std::vector<Envelope> split_input(const Bytes& m0, const Bytes& m1);

    bool has_delivered() const { return delivered_.has_value(); }
    bool is_aborted() const { return aborted_; }
    const RbcConfig& config() const { return cfg_; }
    std::uint64_t dropped_invalid() const { return dropped_invalid_; }
    std::uint64_t flagged_equivocations() const { return flagged_equivocations_; }

private:
    struct RootState {
        // leaf index -> (block, branch)
        std::map<std::uint16_t, std::pair<Bytes, std::vector<coding::Digest>>> blocks;
        std::set<ReplicaId> witness_from, echo_from, ready_from, val_from;
        std::uint32_t depth_witness = 0, depth_echo = 0, depth_ready = 0, depth_val = 0;
        std::optional<bool> consistent;
        std::vector<Bytes> all_blocks; // cached after interpolation
        std::vector<coding::MerkleProof> all_proofs;
        std::optional<Bytes> decoded;
    };

    RbcOutcome handle_init(const RbcMessage& msg, const Envelope& env);
    RbcOutcome handle_witness(const RbcMessage& msg, const Envelope& env);
    RbcOutcome handle_echo(const RbcMessage& msg, const Envelope& env);
    RbcOutcome handle_ready_avid(const RbcMessage& msg, const Envelope& env);
    RbcOutcome handle_ready_learner(const RbcMessage& msg, const Envelope& env);
    RbcOutcome handle_val(const RbcMessage& msg, const Envelope& env);
    void maybe_deliver_avid(const coding::Digest& root, RootState& rs, RbcOutcome& out);

    bool check_membership(const RbcMessage& msg, const Envelope& env);
    bool note_equivocation(RbcMsgType type, ReplicaId peer, const coding::Digest& root);
    void store_block(RootState& rs, const RbcMessage& msg);
    /// Runs the re-encode consistency check once per root; returns the
    /// verdict. On mismatch marks the instance aborted.
    bool check_consistency(const coding::Digest& root, RootState& rs);
    void ensure_full_blocks(const coding::Digest& root, RootState& rs);
    Bytes decode_root(RootState& rs) const;
    void deliver(RootState& rs, std::uint32_t depth, RbcOutcome& out);

    Envelope make_env(ReplicaId to, const RbcMessage& msg, std::uint32_t depth) const;
    std::vector<Envelope> broadcast_active(const RbcMessage& msg, std::uint32_t depth) const;
    RbcMessage own_share_message(RbcMsgType type, const coding::Digest& root,
                                 RootState& rs, bool carry_active) ;

    RbcConfig cfg_;
    ReplicaId self_ = 0;
    std::uint32_t epoch_ = 0;
    std::uint16_t index_ = 0;
    int self_pos_ = -1; // position in active set, -1 for learners

    int thr_reencode_ = 0; // n-2f within the group
    int thr_deliver_ = 0;  // n-f within the group
    int thr_amplify_ = 0;  // f+1
    int thr_commit_ = 0;   // 2f+1

    bool input_done_ = false;
    bool witness_sent_ = false;
    bool echo_sent_ = false;
    bool ready_sent_ = false;
    bool aborted_ = false;
    std::optional<Bytes> delivered_;

    std::map<coding::Digest, RootState> roots_;
    std::map<std::pair<std::uint8_t, ReplicaId>, coding::Digest> first_root_;
    std::uint64_t dropped_invalid_ = 0;
    std::uint64_t flagged_equivocations_ = 0;
};

} // namespace mib::rbc
