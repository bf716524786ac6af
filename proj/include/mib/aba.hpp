#pragma once

#include "mib/core.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>

namespace mib::aba {

enum class AbaMsgType : std::uint8_t {
    bval1step = 0,
    bval = 1,
    aux = 2,
    conf = 3,
    finish = 4,
};

/// Wire form: type(1) | round(2 BE) | value(1). `value` is a bit for
/// bval/aux/finish and a bitset for conf (bit0 = contains 0, bit1 =
/// contains 1).
struct AbaMessage {
    AbaMsgType type = AbaMsgType::bval;
    std::uint16_t round = 0;
    std::uint8_t value = 0;

    Bytes encode() const;
    static std::optional<AbaMessage> decode(std::span<const std::uint8_t> wire);
};

/// Trusted-dealer common coin: a keyed hash of (epoch, instance,
/// round), identical at every replica by construction.
class CoinSource {
public:
    explicit CoinSource(Bytes seed) : seed_(std::move(seed)) {}

    bool flip(std::uint32_t epoch, std::uint16_t instance, std::uint16_t round) const;

private:
    Bytes seed_;
};

struct OneStepVerdict {
    enum class Kind : std::uint8_t { decide, adopt, fallthrough };
    Kind kind = Kind::fallthrough;
    int value = 0;
};

/// The one-step predicate over a tally of exactly n-f votes: decide v
/// when count(v) > (n+3f)/2, adopt v when count(v) > (n-f)/2 and v is
/// the unique such value. Comparisons are rational (2*count > n+3f).
OneStepVerdict onestep_evaluate(int count0, int count1, const Deployment& dep);

struct AbaDecision {
    int value = 0;
    std::uint32_t depth = 0;
    bool one_step = false;
    std::uint16_t rounds = 0; // backup rounds entered by decision time
};

struct AbaOutcome {
    std::vector<Envelope> out;
    std::optional<AbaDecision> decided;
};

/// One binary-agreement instance at one replica: the optional
/// one-step phase, then common-coin backup rounds. Decided replicas
/// keep participating with their decided estimate until a finish
/// quorum retires the instance, so stragglers never starve.
class AbaInstance {
public:
    AbaInstance(Deployment dep, bool one_step, ReplicaId self, std::uint32_t epoch,
                std::uint16_t index, const CoinSource* coin);

    AbaOutcome propose(int v);
    AbaOutcome handle(const Envelope& env);

    bool has_proposed() const { return proposed_; }
    bool has_decided() const { return decided_.has_value(); }
    int decision() const { return decided_.value(); }
    bool is_halted() const { return halted_; }
    std::uint16_t rounds_entered() const { return rounds_entered_; }
    std::uint64_t dropped_invalid() const { return dropped_invalid_; }

private:
    struct RoundState {
        std::set<ReplicaId> bval_from[2];
        std::uint32_t bval_depth[2] = {0, 0};
        bool bval_sent[2] = {false, false};
        std::set<int> bin_values;
        bool aux_sent = false;
        std::map<ReplicaId, std::pair<int, std::uint32_t>> aux_from;
        bool conf_sent = false;
        std::map<ReplicaId, std::pair<std::uint8_t, std::uint32_t>> conf_from;
        bool coin_done = false;
    };

    void dispatch(const AbaMessage& msg, const Envelope& env, AbaOutcome& out);
    void evaluate_one_step(AbaOutcome& out);
    void enter_backup(AbaOutcome& out);
    void enter_round(std::uint16_t r, std::uint32_t depth, AbaOutcome& out);
    /// Fires every enabled transition of the current round until
    /// quiescent; may advance rounds.
    void run_round_triggers(AbaOutcome& out);
    void record_decision(int v, std::uint32_t depth, bool one_step, AbaOutcome& out);
    void handle_finish(const AbaMessage& msg, const Envelope& env, AbaOutcome& out);

    Envelope make_env(ReplicaId to, const AbaMessage& msg, std::uint32_t depth) const;
    void broadcast(const AbaMessage& msg, std::uint32_t depth, AbaOutcome& out) const;

    Deployment dep_;
    bool one_step_enabled_ = false;
    ReplicaId self_ = 0;
    std::uint32_t epoch_ = 0;
    std::uint16_t index_ = 0;
    const CoinSource* coin_ = nullptr;

    bool proposed_ = false;
    int v_p_ = 0;
    std::vector<Envelope> pre_propose_;

    bool onestep_evaluated_ = false;
    std::set<ReplicaId> onestep_from_;
    int onestep_count_[2] = {0, 0};
    std::uint32_t onestep_depth_ = 0;

    bool in_backup_ = false;
    int est_ = 0;
    std::uint16_t round_ = 0;
    std::uint16_t rounds_entered_ = 0;
    std::map<std::uint16_t, RoundState> rounds_;

    std::optional<int> decided_;
    bool halted_ = false;
    bool finish_sent_ = false;
    std::set<ReplicaId> finish_from_[2];
    std::uint32_t finish_depth_[2] = {0, 0};

    std::uint64_t dropped_invalid_ = 0;
};

} // namespace mib::aba
