#include "mib/aba.hpp"

#include "mib/coding.hpp"

#include <algorithm>

namespace mib::aba {

Bytes AbaMessage::encode() const {
    Bytes out;
    out.reserve(4);
    out.push_back(static_cast<std::uint8_t>(type));
    out.push_back(static_cast<std::uint8_t>(round >> 8));
    out.push_back(static_cast<std::uint8_t>(round));
    out.push_back(value);
    return out;
}

std::optional<AbaMessage> AbaMessage::decode(std::span<const std::uint8_t> wire) {
    if (wire.size() != 4)
        return std::nullopt;
    if (wire[0] > static_cast<std::uint8_t>(AbaMsgType::finish))
        return std::nullopt;
    AbaMessage msg;
    msg.type = static_cast<AbaMsgType>(wire[0]);
    msg.round = static_cast<std::uint16_t>((wire[1] << 8) | wire[2]);
    msg.value = wire[3];
    if (msg.type == AbaMsgType::conf) {
        if (msg.value == 0 || msg.value > 3)
            return std::nullopt;
    } else if (msg.value > 1) {
        return std::nullopt;
    }
    return msg;
}

bool CoinSource::flip(std::uint32_t epoch, std::uint16_t instance,
                      std::uint16_t round) const {
    Bytes buf = seed_;
    const char tag[] = "coin";
    buf.insert(buf.end(), tag, tag + 4);
    for (int i = 3; i >= 0; --i)
        buf.push_back(static_cast<std::uint8_t>(epoch >> (8 * i)));
    for (int i = 1; i >= 0; --i)
        buf.push_back(static_cast<std::uint8_t>(instance >> (8 * i)));
    for (int i = 1; i >= 0; --i)
        buf.push_back(static_cast<std::uint8_t>(round >> (8 * i)));
    return coding::sha256(buf)[0] & 1;
}

OneStepVerdict onestep_evaluate(int count0, int count1, const Deployment& dep) {
    if (count0 < 0 || count1 < 0 ||
        count0 + count1 != quorum_threshold(dep, "n-f"))
        throw ProtocolMisuse("one-step evaluation requires exactly n-f votes");
    const int n = dep.n;
    const int f = dep.f;
    for (int v = 0; v <= 1; ++v) {
        const int count = v == 0 ? count0 : count1;
        if (2 * count > n + 3 * f)
            return {OneStepVerdict::Kind::decide, v};
    }
    const bool adopt0 = 2 * count0 > n - f;
    const bool adopt1 = 2 * count1 > n - f;
    if (adopt0 != adopt1)
        return {OneStepVerdict::Kind::adopt, adopt1 ? 1 : 0};
    return {OneStepVerdict::Kind::fallthrough, 0};
}

AbaInstance::AbaInstance(Deployment dep, bool one_step, ReplicaId self,
                         std::uint32_t epoch, std::uint16_t index,
                         const CoinSource* coin)
    : dep_(dep), one_step_enabled_(one_step), self_(self), epoch_(epoch),
      index_(index), coin_(coin) {
    dep_.validate();
}

Envelope AbaInstance::make_env(ReplicaId to, const AbaMessage& msg,
                               std::uint32_t depth) const {
    Envelope env;
    env.sender = self_;
    env.receiver = to;
    env.epoch = epoch_;
    env.tag = InstanceTag{Phase::aba, index_};
    env.payload = msg.encode();
    env.depth = depth;
    return env;
}

void AbaInstance::broadcast(const AbaMessage& msg, std::uint32_t depth,
                            AbaOutcome& out) const {
    for (int i = 0; i < dep_.n; ++i)
        out.out.push_back(make_env(static_cast<ReplicaId>(i), msg, depth));
}

AbaOutcome AbaInstance::propose(int v) {
    if (v != 0 && v != 1)
        throw ProtocolMisuse("aba input must be binary, got " + std::to_string(v));
    if (proposed_)
        throw ProtocolMisuse("aba proposed twice");
    proposed_ = true;
    v_p_ = v;

    AbaOutcome out;
    if (one_step_enabled_) {
        AbaMessage msg{AbaMsgType::bval1step, 0, static_cast<std::uint8_t>(v)};
        broadcast(msg, 1, out);
    } else {
        est_ = v;
        enter_backup(out);
    }
    auto buffered = std::move(pre_propose_);
    pre_propose_.clear();
    for (const auto& env : buffered) {
        AbaOutcome chained = handle(env);
        if (chained.decided && !out.decided)
            out.decided = chained.decided;
        out.out.insert(out.out.end(), chained.out.begin(), chained.out.end());
    }
    return out;
}

AbaOutcome AbaInstance::handle(const Envelope& env) {
    AbaOutcome out;
    if (halted_)
        return out;
    if (env.sender >= dep_.n) {
        ++dropped_invalid_;
        return out;
    }
    if (!proposed_) {
        pre_propose_.push_back(env);
        return out;
    }
    auto decoded = AbaMessage::decode(env.payload);
    if (!decoded) {
        ++dropped_invalid_;
        return out;
    }
    dispatch(*decoded, env, out);
    return out;
}

void AbaInstance::dispatch(const AbaMessage& msg, const Envelope& env, AbaOutcome& out) {
    switch (msg.type) {
    case AbaMsgType::bval1step: {
        if (!one_step_enabled_) {
            ++dropped_invalid_;
            return;
        }
        if (!onestep_evaluated_) {
            if (!onestep_from_.insert(env.sender).second)
                return;
            ++onestep_count_[msg.value];
            onestep_depth_ = std::max(onestep_depth_, env.depth);
            if (static_cast<int>(onestep_from_.size()) ==
                quorum_threshold(dep_, "n-f"))
                evaluate_one_step(out);
            return;
        }
        // Stragglers feed the first backup round's tallies.
        RoundState& rs = rounds_[0];
        if (rs.bval_from[msg.value].insert(env.sender).second) {
            rs.bval_depth[msg.value] = std::max(rs.bval_depth[msg.value], env.depth);
            if (in_backup_ && round_ == 0)
                run_round_triggers(out);
        }
        return;
    }
    case AbaMsgType::bval: {
        if (msg.round < round_)
            return; // our contribution to that round is already on the wire
        RoundState& rs = rounds_[msg.round];
        if (!rs.bval_from[msg.value].insert(env.sender).second)
            return;
        rs.bval_depth[msg.value] = std::max(rs.bval_depth[msg.value], env.depth);
        if (in_backup_ && msg.round == round_)
            run_round_triggers(out);
        return;
    }
    case AbaMsgType::aux: {
        if (msg.round < round_)
            return;
        RoundState& rs = rounds_[msg.round];
        if (!rs.aux_from.emplace(env.sender, std::make_pair(int(msg.value), env.depth)).second)
            return;
        if (in_backup_ && msg.round == round_)
            run_round_triggers(out);
        return;
    }
    case AbaMsgType::conf: {
        if (msg.round < round_)
            return;
        RoundState& rs = rounds_[msg.round];
        if (!rs.conf_from.emplace(env.sender, std::make_pair(msg.value, env.depth)).second)
            return;
        if (in_backup_ && msg.round == round_)
            run_round_triggers(out);
        return;
    }
    case AbaMsgType::finish:
        handle_finish(msg, env, out);
        return;
    }
}

void AbaInstance::evaluate_one_step(AbaOutcome& out) {
    onestep_evaluated_ = true;
    auto verdict = onestep_evaluate(onestep_count_[0], onestep_count_[1], dep_);
    switch (verdict.kind) {
    case OneStepVerdict::Kind::decide:
        record_decision(verdict.value, onestep_depth_, true, out);
        v_p_ = verdict.value;
        break;
    case OneStepVerdict::Kind::adopt:
        v_p_ = verdict.value;
        break;
    case OneStepVerdict::Kind::fallthrough:
        break;
    }
    est_ = v_p_;
    enter_backup(out);
}

void AbaInstance::enter_backup(AbaOutcome& out) {
    in_backup_ = true;
    // The round-0 broadcast chains off the one-step exchange when
    // there was one, otherwise off the local input.
    const std::uint32_t depth = one_step_enabled_ ? onestep_depth_ + 1 : 1;
    enter_round(0, depth, out);
    run_round_triggers(out);
}

void AbaInstance::enter_round(std::uint16_t r, std::uint32_t depth, AbaOutcome& out) {
    round_ = r;
    rounds_entered_ = std::max<std::uint16_t>(rounds_entered_, r + 1);
    RoundState& rs = rounds_[r];
    if (decided_)
        est_ = *decided_; // decided estimates never drift
    if (!rs.bval_sent[est_]) {
        rs.bval_sent[est_] = true;
        AbaMessage msg{AbaMsgType::bval, r, static_cast<std::uint8_t>(est_)};
        broadcast(msg, depth, out);
    }
}

void AbaInstance::run_round_triggers(AbaOutcome& out) {
    const int thr_amplify = quorum_threshold(dep_, "f+1");
    const int thr_bin = quorum_threshold(dep_, "2f+1");
    const int thr_quorum = quorum_threshold(dep_, "n-f");

    bool progress = true;
    while (progress && !halted_) {
        progress = false;
        RoundState& rs = rounds_[round_];

        for (int b = 0; b <= 1; ++b) {
            const int have = static_cast<int>(rs.bval_from[b].size());
            if (have >= thr_amplify && !rs.bval_sent[b]) {
                rs.bval_sent[b] = true;
                AbaMessage msg{AbaMsgType::bval, round_, static_cast<std::uint8_t>(b)};
                broadcast(msg, rs.bval_depth[b] + 1, out);
                progress = true;
            }
            if (have >= thr_bin && !rs.bin_values.count(b)) {
                rs.bin_values.insert(b);
                if (!rs.aux_sent) {
                    rs.aux_sent = true;
                    const int w = rs.bin_values.size() == 1 ? b : est_;
                    AbaMessage msg{AbaMsgType::aux, round_, static_cast<std::uint8_t>(w)};
                    broadcast(msg, rs.bval_depth[b] + 1, out);
                }
                progress = true;
            }
        }

        if (rs.aux_sent && !rs.conf_sent) {
            int accepted = 0;
            std::uint8_t values = 0;
            std::uint32_t depth = 0;
            for (const auto& [peer, entry] : rs.aux_from) {
                if (!rs.bin_values.count(entry.first))
                    continue;
                ++accepted;
                values |= static_cast<std::uint8_t>(1u << entry.first);
                depth = std::max(depth, entry.second);
            }
            if (accepted >= thr_quorum) {
                rs.conf_sent = true;
                AbaMessage msg{AbaMsgType::conf, round_, values};
                broadcast(msg, depth + 1, out);
                progress = true;
            }
        }

        if (rs.conf_sent && !rs.coin_done) {
            int accepted = 0;
            std::uint8_t unions = 0;
            std::uint32_t depth = 0;
            for (const auto& [peer, entry] : rs.conf_from) {
                const std::uint8_t set = entry.first;
                const bool in_bin = ((set & 1) == 0 || rs.bin_values.count(0)) &&
                                    ((set & 2) == 0 || rs.bin_values.count(1));
                if (!in_bin)
                    continue;
                ++accepted;
                unions |= set;
                depth = std::max(depth, entry.second);
            }
            if (accepted >= thr_quorum) {
                rs.coin_done = true;
                const bool c = coin_->flip(epoch_, index_, round_);
                if (unions == 1 || unions == 2) {
                    const int v = unions == 2 ? 1 : 0;
                    if (v == static_cast<int>(c) && !decided_)
                        record_decision(v, depth, false, out);
                    est_ = decided_ ? *decided_ : v;
                } else {
                    est_ = decided_ ? *decided_ : static_cast<int>(c);
                }
                enter_round(round_ + 1, depth + 1, out);
                progress = true;
            }
        }
    }
}

void AbaInstance::record_decision(int v, std::uint32_t depth, bool one_step,
                                  AbaOutcome& out) {
    decided_ = v;
    est_ = v;
    out.decided = AbaDecision{v, depth, one_step, rounds_entered_};
    if (!finish_sent_) {
        finish_sent_ = true;
        AbaMessage msg{AbaMsgType::finish, 0, static_cast<std::uint8_t>(v)};
        broadcast(msg, depth + 1, out);
    }
}

void AbaInstance::handle_finish(const AbaMessage& msg, const Envelope& env,
                                AbaOutcome& out) {
    if (!finish_from_[msg.value].insert(env.sender).second)
        return;
    finish_depth_[msg.value] = std::max(finish_depth_[msg.value], env.depth);

    const int have = static_cast<int>(finish_from_[msg.value].size());
    if (have >= quorum_threshold(dep_, "f+1") && !finish_sent_) {
        finish_sent_ = true;
        AbaMessage amp{AbaMsgType::finish, 0, msg.value};
        broadcast(amp, finish_depth_[msg.value] + 1, out);
    }
    if (have >= quorum_threshold(dep_, "2f+1")) {
        if (!decided_)
            record_decision(msg.value, finish_depth_[msg.value], false, out);
        halted_ = true;
    }
}

} // namespace mib::aba
