#pragma once

#include "mib/aba.hpp"
#include "mib/core.hpp"
#include "mib/rbc.hpp"

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>

namespace mib::acs {

/// Wire form of a proposal: tx count(4 BE), then per transaction
/// id(8 BE) | length(4 BE) | payload. A zero count is the explicit
/// empty-batch marker.
Bytes serialize_proposal(const std::vector<Transaction>& txs);
std::optional<std::vector<Transaction>> parse_proposal(std::span<const std::uint8_t> wire);

/// Deterministically selects ceil(B/n) transactions from the first B
/// buffered ones (everything when the buffer is smaller). Pure in its
/// arguments: equal seeds and buffers select equally.
std::vector<Transaction> select_proposal(const std::deque<Transaction>& buf, int batch_B,
                                         int n, std::uint64_t selection_seed);

struct AcsConfig {
    ProtocolSpec protocol;
    Deployment dep;
    int batch_B = 0;
    int epochs = 1;
    std::uint64_t run_seed = 0;
    const aba::CoinSource* coin = nullptr;
};

/// One replica running the full protocol stack: per epoch, n broadcast
/// instances feeding n agreement instances, the n-f gating rule, and
/// canonically ordered batch delivery. Single-owner; one call at a
/// time.
class Replica {
public:
    Replica(AcsConfig cfg, ReplicaId self);

    void submit(Transaction tx);
    /// Marks this replica as a split-sender Byzantine broadcaster.
    void set_rbc_split(bool enabled) { rbc_split_ = enabled; }

    Emitted start();
    Emitted handle(const Envelope& env);

    std::uint32_t current_epoch() const { return epoch_; }
    bool finished() const { return epoch_ >= static_cast<std::uint32_t>(cfg_.epochs); }
    const std::vector<std::vector<Transaction>>& delivered_log() const { return delivered_; }
    std::size_t buffered_count() const { return buf_.size(); }
    std::uint64_t dropped_invalid() const;
    /// Description of the first incomplete instance, for stall reports.
    std::string stuck_instance() const;

private:
    struct Epoch {
        std::uint32_t number = 0;
        std::vector<std::unique_ptr<rbc::RbcInstance>> rbcs;
        std::vector<std::unique_ptr<aba::AbaInstance>> abas;
        std::vector<std::optional<Bytes>> rbc_values;
        std::vector<std::uint32_t> rbc_depths;
        std::vector<std::optional<int>> verdicts;
        std::vector<bool> aba_fed;
        int ones = 0;
        bool quorum_fired = false;
        bool finalized = false;
    };

    Emitted start_epoch(std::uint32_t number);
    void route(Epoch& ep, const Envelope& env, Emitted& out);
    void on_rbc_deliver(Epoch& ep, std::uint16_t j, rbc::RbcDelivery&& delivery,
                        Emitted& out);
    void on_aba_decide(Epoch& ep, std::uint16_t j, const aba::AbaDecision& decision,
                       Emitted& out);
    void feed_aba(Epoch& ep, std::uint16_t j, int value, Emitted& out);
    void maybe_finalize(Epoch& ep, Emitted& out);

    AcsConfig cfg_;
    ReplicaId self_ = 0;
    std::uint32_t epoch_ = 0;
    bool started_ = false;
    bool rbc_split_ = false;

    std::deque<Transaction> buf_;
    std::set<std::uint64_t> delivered_ids_;
    std::vector<std::vector<Transaction>> delivered_; // per epoch
    std::map<std::uint32_t, Epoch> epochs_;
    std::map<std::uint32_t, std::vector<Envelope>> future_; // epochs not yet started
};

} // namespace mib::acs
