#include "mib/acs.hpp"

#include "mib/coding.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace mib::acs {

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(Bytes& out, std::uint64_t v) {
    for (int i = 7; i >= 0; --i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// Stable tx-selection seed per (run, epoch, replica).
std::uint64_t mix_seed(std::uint64_t run_seed, std::uint32_t epoch, ReplicaId replica) {
    Bytes buf;
    const char tag[] = "sel";
    buf.insert(buf.end(), tag, tag + 3);
    put_u64(buf, run_seed);
    put_u32(buf, epoch);
    put_u32(buf, replica);
    auto digest = coding::sha256(buf);
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i)
        out = (out << 8) | digest[i];
    return out;
}

} // namespace

Bytes serialize_proposal(const std::vector<Transaction>& txs) {
    Bytes out;
    put_u32(out, static_cast<std::uint32_t>(txs.size()));
    for (const auto& tx : txs) {
        put_u64(out, tx.id);
        put_u32(out, static_cast<std::uint32_t>(tx.payload.size()));
        out.insert(out.end(), tx.payload.begin(), tx.payload.end());
    }
    return out;
}

std::optional<std::vector<Transaction>> parse_proposal(std::span<const std::uint8_t> wire) {
    std::size_t pos = 0;
    auto u32 = [&](std::uint32_t& v) {
        if (pos + 4 > wire.size())
            return false;
        v = (std::uint32_t{wire[pos]} << 24) | (std::uint32_t{wire[pos + 1]} << 16) |
            (std::uint32_t{wire[pos + 2]} << 8) | wire[pos + 3];
        pos += 4;
        return true;
    };
    std::uint32_t count;
    if (!u32(count))
        return std::nullopt;
    std::vector<Transaction> txs;
    txs.reserve(std::min<std::uint32_t>(count, 1 << 20));
    for (std::uint32_t i = 0; i < count; ++i) {
        if (pos + 8 > wire.size())
            return std::nullopt;
        std::uint64_t id = 0;
        for (int b = 0; b < 8; ++b)
            id = (id << 8) | wire[pos++];
        std::uint32_t len;
        if (!u32(len) || pos + len > wire.size())
            return std::nullopt;
        Transaction tx;
        tx.id = id;
        tx.payload.assign(wire.begin() + pos, wire.begin() + pos + len);
        pos += len;
        txs.push_back(std::move(tx));
    }
    if (pos != wire.size())
        return std::nullopt;
    return txs;
}

std::vector<Transaction> select_proposal(const std::deque<Transaction>& buf, int batch_B,
                                         int n, std::uint64_t selection_seed) {
    const int b = (batch_B + n - 1) / n;
    const int window = std::min<int>(batch_B, static_cast<int>(buf.size()));
    if (window <= b) {
        // Propose whatever exists rather than blocking.
        return {buf.begin(), buf.begin() + window};
    }
    // Partial Fisher-Yates over the window indices, then restore the
    // buffer order of the chosen subset.
    std::mt19937_64 rng(selection_seed);
    std::vector<int> idx(window);
    for (int i = 0; i < window; ++i)
        idx[i] = i;
    for (int i = 0; i < b; ++i) {
        const int j = i + static_cast<int>(rng() % (window - i));
        std::swap(idx[i], idx[j]);
    }
    std::vector<int> chosen(idx.begin(), idx.begin() + b);
    std::sort(chosen.begin(), chosen.end());
    std::vector<Transaction> out;
    out.reserve(chosen.size());
    for (int i : chosen)
        out.push_back(buf[i]);
    return out;
}

Replica::Replica(AcsConfig cfg, ReplicaId self) : cfg_(cfg), self_(self) {
    cfg_.dep.validate();
    if (!cfg_.coin)
        throw ConfigError("acs replica requires a coin source");
    if (cfg_.epochs < 1)
        throw ConfigError("epoch count must be positive");
}

void Replica::submit(Transaction tx) {
    buf_.push_back(std::move(tx));
}

std::uint64_t Replica::dropped_invalid() const {
    std::uint64_t total = 0;
    for (const auto& [num, ep] : epochs_) {
        for (const auto& r : ep.rbcs)
            total += r->dropped_invalid() + r->flagged_equivocations();
        for (const auto& a : ep.abas)
            total += a->dropped_invalid();
    }
    return total;
}

std::string Replica::stuck_instance() const {
    for (const auto& [num, ep] : epochs_) {
        if (ep.finalized)
            continue;
        for (int j = 0; j < cfg_.dep.n; ++j) {
            if (!ep.verdicts[j])
                return "epoch " + std::to_string(num) + " aba " + std::to_string(j) +
                       (ep.rbc_values[j] ? "" : " (rbc undelivered)");
            if (*ep.verdicts[j] == 1 && !ep.rbc_values[j])
                return "epoch " + std::to_string(num) + " rbc " + std::to_string(j);
        }
        return "epoch " + std::to_string(num) + " finalize";
    }
    if (!finished())
        return "epoch " + std::to_string(epoch_) + " not started";
    return "";
}

Emitted Replica::start() {
    if (started_)
        throw ProtocolMisuse("replica started twice");
    started_ = true;
    return start_epoch(0);
}

Emitted Replica::start_epoch(std::uint32_t number) {
    Emitted out;
    epoch_ = number;
    if (number >= static_cast<std::uint32_t>(cfg_.epochs))
        return out;

    Epoch& ep = epochs_[number];
    ep.number = number;
    const int n = cfg_.dep.n;
    ep.rbc_values.resize(n);
    ep.rbc_depths.resize(n, 0);
    ep.verdicts.resize(n);
    ep.aba_fed.resize(n, false);
    const bool one_step = cfg_.protocol.aba != AbaKind::cobalt;
    for (int j = 0; j < n; ++j) {
        auto rcfg = rbc::RbcConfig::make(cfg_.dep, static_cast<ReplicaId>(j),
                                         cfg_.protocol.rbc);
        ep.rbcs.push_back(std::make_unique<rbc::RbcInstance>(
            rcfg, self_, number, static_cast<std::uint16_t>(j)));
        ep.abas.push_back(std::make_unique<aba::AbaInstance>(
            cfg_.dep, one_step, self_, number, static_cast<std::uint16_t>(j),
            cfg_.coin));
    }

    auto proposal = select_proposal(buf_, cfg_.batch_B, n,
                                    mix_seed(cfg_.run_seed, number, self_));
    Bytes wire = serialize_proposal(proposal);
    if (rbc_split_) {
        // Byzantine broadcaster: a second, different proposal goes to
        // the other half of the group.
        auto alt = select_proposal(buf_, cfg_.batch_B, n,
                                   mix_seed(cfg_.run_seed, number, self_) ^ 0x9e3779b9);
        Bytes alt_wire = serialize_proposal(alt);
        if (alt_wire == wire)
            alt_wire.push_back(0xff); // force distinct trees even on equal picks
        out.out = ep.rbcs[self_]->split_input(wire, alt_wire);
    } else {
        auto rbc_out = ep.rbcs[self_]->input(wire);
        out.out = std::move(rbc_out.out);
        if (rbc_out.delivered)
            on_rbc_deliver(ep, self_, std::move(*rbc_out.delivered), out);
    }

    // Drain messages that arrived before this epoch started.
    auto pending = future_.find(number);
    if (pending != future_.end()) {
        auto envs = std::move(pending->second);
        future_.erase(pending);
        for (const auto& env : envs)
            route(ep, env, out);
    }
    return out;
}

Emitted Replica::handle(const Envelope& env) {
    Emitted out;
    if (!started_)
        throw ProtocolMisuse("replica handling before start");
    if (env.epoch >= static_cast<std::uint32_t>(cfg_.epochs))
        return out; // no such epoch can exist
    auto it = epochs_.find(env.epoch);
    if (it == epochs_.end()) {
        future_[env.epoch].push_back(env);
        return out;
    }
    route(it->second, env, out);
    return out;
}

void Replica::route(Epoch& ep, const Envelope& env, Emitted& out) {
    const int n = cfg_.dep.n;
    if (env.tag.index >= n)
        return;
    if (env.tag.phase == Phase::rbc) {
        auto outcome = ep.rbcs[env.tag.index]->handle(env);
        out.out.insert(out.out.end(), outcome.out.begin(), outcome.out.end());
        if (outcome.delivered)
            on_rbc_deliver(ep, env.tag.index, std::move(*outcome.delivered), out);
    } else {
        auto outcome = ep.abas[env.tag.index]->handle(env);
        out.out.insert(out.out.end(), outcome.out.begin(), outcome.out.end());
        if (outcome.decided)
            on_aba_decide(ep, env.tag.index, *outcome.decided, out);
    }
}

void Replica::on_rbc_deliver(Epoch& ep, std::uint16_t j, rbc::RbcDelivery&& delivery,
                             Emitted& out) {
    if (ep.rbc_values[j])
        throw ProtocolMisuse("rbc delivered twice in one instance");
    ep.rbc_values[j] = std::move(delivery.value);
    ep.rbc_depths[j] = delivery.depth;

    ProgressEvent ev;
    ev.kind = ProgressEvent::Kind::rbc_deliver;
    ev.epoch = ep.number;
    ev.instance = j;
    ev.depth = delivery.depth;
    auto digest = coding::sha256(*ep.rbc_values[j]);
    ev.digest.assign(digest.begin(), digest.end());
    out.events.push_back(std::move(ev));

    if (!ep.aba_fed[j])
        feed_aba(ep, j, 1, out);
    maybe_finalize(ep, out);
}

void Replica::feed_aba(Epoch& ep, std::uint16_t j, int value, Emitted& out) {
    ep.aba_fed[j] = true;
    auto outcome = ep.abas[j]->propose(value);
    out.out.insert(out.out.end(), outcome.out.begin(), outcome.out.end());
    if (outcome.decided)
        on_aba_decide(ep, j, *outcome.decided, out);
}

void Replica::on_aba_decide(Epoch& ep, std::uint16_t j, const aba::AbaDecision& decision,
                            Emitted& out) {
    if (ep.verdicts[j])
        return;
    ep.verdicts[j] = decision.value;

    ProgressEvent ev;
    ev.kind = ProgressEvent::Kind::aba_decide;
    ev.epoch = ep.number;
    ev.instance = j;
    ev.depth = decision.depth;
    ev.value = decision.value;
    ev.one_step = decision.one_step;
    ev.rounds = decision.rounds;
    out.events.push_back(std::move(ev));

    if (decision.value == 1) {
        ++ep.ones;
        if (ep.ones >= quorum_threshold(cfg_.dep, "n-f") && !ep.quorum_fired) {
            ep.quorum_fired = true;
            for (int k = 0; k < cfg_.dep.n; ++k)
                if (!ep.aba_fed[k])
                    feed_aba(ep, static_cast<std::uint16_t>(k), 0, out);
        }
    }
    maybe_finalize(ep, out);
}

void Replica::maybe_finalize(Epoch& ep, Emitted& out) {
    if (ep.finalized)
        return;
    for (int j = 0; j < cfg_.dep.n; ++j) {
        if (!ep.verdicts[j])
            return;
        if (*ep.verdicts[j] == 1 && !ep.rbc_values[j])
            return; // agreement guarantees the value arrives; wait
    }
    ep.finalized = true;

    // Canonical batch: proposer order, then intra-proposal order,
    // deduplicated by id against this and all prior epochs.
    std::vector<Transaction> batch;
    std::set<std::uint64_t> seen;
    std::vector<Transaction> leftovers; // delivered but excluded by verdict 0
    for (int j = 0; j < cfg_.dep.n; ++j) {
        if (!ep.rbc_values[j])
            continue;
        auto txs = parse_proposal(*ep.rbc_values[j]);
        if (!txs)
            continue; // garbage proposal: identical bytes at every replica
        if (*ep.verdicts[j] == 1) {
            for (auto& tx : *txs) {
                if (delivered_ids_.count(tx.id) || !seen.insert(tx.id).second)
                    continue;
                batch.push_back(std::move(tx));
            }
        } else {
            for (auto& tx : *txs)
                leftovers.push_back(std::move(tx));
        }
    }
    for (const auto& tx : batch)
        delivered_ids_.insert(tx.id);

    // Drop delivered transactions from the buffer; requeue the rest.
    std::deque<Transaction> rest;
    std::set<std::uint64_t> buffered;
    for (auto& tx : buf_) {
        if (!delivered_ids_.count(tx.id) && buffered.insert(tx.id).second)
            rest.push_back(std::move(tx));
    }
    for (auto& tx : leftovers) {
        if (!delivered_ids_.count(tx.id) && buffered.insert(tx.id).second)
            rest.push_back(std::move(tx));
    }
    buf_ = std::move(rest);

    delivered_.push_back(batch);

    ProgressEvent ev;
    ev.kind = ProgressEvent::Kind::epoch_done;
    ev.epoch = ep.number;
    ev.batch = std::move(batch);
    out.events.push_back(std::move(ev));

    out.merge(start_epoch(ep.number + 1));
}

} // namespace mib::acs
