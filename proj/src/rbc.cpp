#include "mib/rbc.hpp"

#include <algorithm>

namespace mib::rbc {

namespace {

void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

struct Reader {
    std::span<const std::uint8_t> in;
    std::size_t pos = 0;

    bool take(std::size_t count, const std::uint8_t** out) {
        if (pos + count > in.size())
            return false;
        *out = in.data() + pos;
        pos += count;
        return true;
    }
    bool u8(std::uint8_t& v) {
        const std::uint8_t* p;
        if (!take(1, &p)) return false;
        v = *p;
        return true;
    }
    bool u16(std::uint16_t& v) {
        const std::uint8_t* p;
        if (!take(2, &p)) return false;
        v = static_cast<std::uint16_t>((p[0] << 8) | p[1]);
        return true;
    }
    bool u32(std::uint32_t& v) {
        const std::uint8_t* p;
        if (!take(4, &p)) return false;
        v = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
            (std::uint32_t{p[2]} << 8) | p[3];
        return true;
    }
};

} // namespace

Bytes RbcMessage::encode() const {
    Bytes out;
    out.reserve(40 + 32 * branch.size() + block.size() + 2 * active_set.size());
    out.push_back(static_cast<std::uint8_t>(type));
    out.insert(out.end(), root.begin(), root.end());
    put_u16(out, leaf_index);
    out.push_back(static_cast<std::uint8_t>(branch.size()));
    for (const auto& d : branch)
        out.insert(out.end(), d.begin(), d.end());
    put_u32(out, static_cast<std::uint32_t>(block.size()));
    out.insert(out.end(), block.begin(), block.end());
    if (!active_set.empty()) {
        out.push_back(static_cast<std::uint8_t>(active_set.size()));
        for (ReplicaId id : active_set)
            put_u16(out, id);
    }
    return out;
}

std::optional<RbcMessage> RbcMessage::decode(std::span<const std::uint8_t> wire) {
    Reader r{wire};
    RbcMessage msg;
    std::uint8_t type_byte;
    if (!r.u8(type_byte) || type_byte > static_cast<std::uint8_t>(RbcMsgType::val))
        return std::nullopt;
    msg.type = static_cast<RbcMsgType>(type_byte);
    const std::uint8_t* p;
    if (!r.take(32, &p))
        return std::nullopt;
    std::copy(p, p + 32, msg.root.begin());
    if (!r.u16(msg.leaf_index))
        return std::nullopt;
    std::uint8_t branch_count;
    if (!r.u8(branch_count))
        return std::nullopt;
    msg.branch.resize(branch_count);
    for (auto& d : msg.branch) {
        if (!r.take(32, &p))
            return std::nullopt;
        std::copy(p, p + 32, d.begin());
    }
    std::uint32_t block_len;
    if (!r.u32(block_len))
        return std::nullopt;
    if (!r.take(block_len, &p))
        return std::nullopt;
    msg.block.assign(p, p + block_len);
    if (r.pos < wire.size()) {
        std::uint8_t count;
        if (!r.u8(count) || count == 0)
            return std::nullopt;
        msg.active_set.resize(count);
        for (auto& id : msg.active_set)
            if (!r.u16(id))
                return std::nullopt;
    }
    if (r.pos != wire.size())
        return std::nullopt;
    return msg;
}

RbcConfig RbcConfig::make(const Deployment& dep, ReplicaId sender, RbcKind variant) {
    dep.validate();
    if (sender >= dep.n)
        throw ConfigError("sender index out of range");
    int n1 = dep.n;
    if (variant == RbcKind::mbc_l)
        n1 = 5 * dep.f + 1;
    else if (variant == RbcKind::avid_l)
        n1 = 3 * dep.f + 1;
    if (n1 > dep.n)
        throw ConfigError("learner variant requires n >= the active group size");

    RbcConfig cfg;
    cfg.dep = dep;
    cfg.sender = sender;
    cfg.variant = variant;
    cfg.active_set.reserve(n1);
    for (int k = 0; k < n1; ++k)
        cfg.active_set.push_back(static_cast<ReplicaId>((sender + k) % dep.n));
    cfg.k_total = n1;
    cfg.k_data = (variant == RbcKind::mbc_l || variant == RbcKind::avid_l)
                     ? quorum_threshold(dep, "n1-2f", n1)
                     : quorum_threshold(dep, "n-2f");
    if (cfg.k_data < 1)
        throw ConfigError("erasure data block count must be positive");
    return cfg;
}

bool RbcConfig::is_active(ReplicaId id) const {
    return active_pos(id) >= 0;
}

int RbcConfig::active_pos(ReplicaId id) const {
    auto it = std::find(active_set.begin(), active_set.end(), id);
    return it == active_set.end() ? -1 : static_cast<int>(it - active_set.begin());
}

std::vector<ReplicaId> RbcConfig::learners() const {
    std::vector<ReplicaId> out;
    for (int i = 0; i < dep.n; ++i)
        if (!is_active(static_cast<ReplicaId>(i)))
            out.push_back(static_cast<ReplicaId>(i));
    return out;
}

long long analytic_message_count(RbcKind variant, const Deployment& dep) {
    dep.validate();
    const long long n = dep.n;
    const long long f = dep.f;
    switch (variant) {
    case RbcKind::mbc:
        return n * n + n;
    case RbcKind::avid:
        return 2 * n * n + n;
    case RbcKind::mbc_l: {
        const long long n1 = 5 * f + 1;
        return n1 + n1 * n1 + (n - n1) * n1;
    }
    case RbcKind::avid_l: {
        const long long n1 = 3 * f + 1;
        return n1 + 2 * n1 * n1 + (n - n1) * n1;
    }
    }
    throw ConfigError("bad rbc variant");
}

RbcInstance::RbcInstance(RbcConfig cfg, ReplicaId self, std::uint32_t epoch,
                         std::uint16_t index)
    : cfg_(std::move(cfg)), self_(self), epoch_(epoch), index_(index) {
    self_pos_ = cfg_.active_pos(self_);
    const int n1 = cfg_.group_size();
    const bool learner_variant =
        cfg_.variant == RbcKind::mbc_l || cfg_.variant == RbcKind::avid_l;
    thr_reencode_ = learner_variant ? quorum_threshold(cfg_.dep, "n1-2f", n1)
                                    : quorum_threshold(cfg_.dep, "n-2f");
    thr_deliver_ = learner_variant ? quorum_threshold(cfg_.dep, "n1-f", n1)
                                   : quorum_threshold(cfg_.dep, "n-f");
    thr_amplify_ = quorum_threshold(cfg_.dep, "f+1");
    thr_commit_ = quorum_threshold(cfg_.dep, "2f+1");
}

Envelope RbcInstance::make_env(ReplicaId to, const RbcMessage& msg,
                               std::uint32_t depth) const {
    Envelope env;
    env.sender = self_;
    env.receiver = to;
    env.epoch = epoch_;
    env.tag = InstanceTag{Phase::rbc, index_};
    env.payload = msg.encode();
    env.depth = depth;
    return env;
}

std::vector<Envelope> RbcInstance::broadcast_active(const RbcMessage& msg,
                                                    std::uint32_t depth) const {
    std::vector<Envelope> out;
    out.reserve(cfg_.active_set.size());
    for (ReplicaId to : cfg_.active_set)
        out.push_back(make_env(to, msg, depth));
    return out;
}

RbcOutcome RbcInstance::input(const Bytes& message) {
    if (self_ != cfg_.sender)
        throw ProtocolMisuse("rbc input called at a non-sender replica");
    if (input_done_)
        throw ProtocolMisuse("rbc input called twice");
    input_done_ = true;

    auto blocks = coding::encode(message, cfg_.k_data, cfg_.k_total);
    std::vector<Bytes> leaves;
    leaves.reserve(blocks.size());
    for (const auto& b : blocks)
        leaves.push_back(b.data);
    auto tree = coding::merkle_build(leaves);

    const bool mbc_family = cfg_.variant == RbcKind::mbc || cfg_.variant == RbcKind::mbc_l;
    const bool carry_active =
        cfg_.variant == RbcKind::mbc_l || cfg_.variant == RbcKind::avid_l;

    RbcOutcome out;
    for (int j = 0; j < cfg_.group_size(); ++j) {
        RbcMessage msg;
        msg.type = mbc_family ? RbcMsgType::init : RbcMsgType::send;
        msg.root = tree.root;
        msg.leaf_index = static_cast<std::uint16_t>(j);
        msg.branch = tree.proofs[j].branch;
        msg.block = blocks[j].data;
        if (carry_active)
            msg.active_set = cfg_.active_set;
        out.out.push_back(make_env(cfg_.active_set[j], msg, 1));
    }
    return out;
}

std::vector<Envelope> RbcInstance::split_input(const Bytes& m0, const Bytes& m1) {
    input_done_ = true;
    const bool mbc_family = cfg_.variant == RbcKind::mbc || cfg_.variant == RbcKind::mbc_l;
    const bool carry_active =
        cfg_.variant == RbcKind::mbc_l || cfg_.variant == RbcKind::avid_l;

    struct Encoding {
        std::vector<coding::CodedBlock> blocks;
        coding::MerkleTree tree;
    };
    auto build = [&](const Bytes& m) {
        Encoding e;
        e.blocks = coding::encode(m, cfg_.k_data, cfg_.k_total);
        std::vector<Bytes> leaves;
        for (const auto& b : e.blocks)
            leaves.push_back(b.data);
        e.tree = coding::merkle_build(leaves);
        return e;
    };
    Encoding enc[2] = {build(m0), build(m1)};

    std::vector<Envelope> out;
    for (int j = 0; j < cfg_.group_size(); ++j) {
        const Encoding& e = enc[j < cfg_.group_size() / 2 ? 0 : 1];
        RbcMessage msg;
        msg.type = mbc_family ? RbcMsgType::init : RbcMsgType::send;
        msg.root = e.tree.root;
        msg.leaf_index = static_cast<std::uint16_t>(j);
        msg.branch = e.tree.proofs[j].branch;
        msg.block = e.blocks[j].data;
        if (carry_active)
            msg.active_set = cfg_.active_set;
        out.push_back(make_env(cfg_.active_set[j], msg, 1));
    }
    return out;
}

bool RbcInstance::note_equivocation(RbcMsgType type, ReplicaId peer,
                                    const coding::Digest& root) {
    auto key = std::make_pair(static_cast<std::uint8_t>(type), peer);
    auto [it, inserted] = first_root_.emplace(key, root);
    if (!inserted && it->second != root) {
        ++flagged_equivocations_;
        return true;
    }
    return false;
}

void RbcInstance::store_block(RootState& rs, const RbcMessage& msg) {
    rs.blocks.emplace(msg.leaf_index, std::make_pair(msg.block, msg.branch));
}

bool RbcInstance::check_consistency(const coding::Digest& root, RootState& rs) {
    if (rs.consistent)
        return *rs.consistent;
    std::vector<coding::CodedBlock> have;
    have.reserve(rs.blocks.size());
    for (const auto& [leaf, entry] : rs.blocks)
        have.push_back(coding::CodedBlock{leaf, entry.first});
    auto all = coding::reconstruct_all(have, cfg_.k_data, cfg_.k_total);
    auto tree = coding::merkle_build(all);
    rs.consistent = (tree.root == root);
    if (*rs.consistent) {
        std::vector<coding::CodedBlock> sys;
        for (int i = 0; i < cfg_.k_data; ++i)
            sys.push_back(coding::CodedBlock{static_cast<std::uint16_t>(i), all[i]});
        rs.decoded = coding::decode(sys, cfg_.k_data, cfg_.k_total);
        rs.all_blocks = std::move(all);
        rs.all_proofs = std::move(tree.proofs);
    } else {
        aborted_ = true;
    }
    return *rs.consistent;
}

void RbcInstance::ensure_full_blocks(const coding::Digest& root, RootState& rs) {
    if (!rs.all_blocks.empty())
        return;
    std::vector<coding::CodedBlock> have;
    for (const auto& [leaf, entry] : rs.blocks)
        have.push_back(coding::CodedBlock{leaf, entry.first});
    auto all = coding::reconstruct_all(have, cfg_.k_data, cfg_.k_total);
    auto tree = coding::merkle_build(all);
    // Every path here is gated on a quorum that vouches for the root.
    (void)root;
    rs.all_blocks = std::move(all);
    rs.all_proofs = std::move(tree.proofs);
}

Bytes RbcInstance::decode_root(RootState& rs) const {
    if (rs.decoded)
        return *rs.decoded;
    std::vector<coding::CodedBlock> have;
    for (const auto& [leaf, entry] : rs.blocks)
        have.push_back(coding::CodedBlock{leaf, entry.first});
    return coding::decode(have, cfg_.k_data, cfg_.k_total);
}

void RbcInstance::deliver(RootState& rs, std::uint32_t depth, RbcOutcome& out) {
    if (delivered_ || aborted_)
        return;
    Bytes value = decode_root(rs);
    delivered_ = value;
    out.delivered = RbcDelivery{std::move(value), depth};
}

RbcMessage RbcInstance::own_share_message(RbcMsgType type, const coding::Digest& root,
                                          RootState& rs, bool carry_active) {
    RbcMessage msg;
    msg.type = type;
    msg.root = root;
    msg.leaf_index = static_cast<std::uint16_t>(self_pos_);
    auto it = rs.blocks.find(msg.leaf_index);
    if (it != rs.blocks.end()) {
        msg.block = it->second.first;
        msg.branch = it->second.second;
    } else {
        ensure_full_blocks(root, rs);
        msg.block = rs.all_blocks[self_pos_];
        msg.branch = rs.all_proofs[self_pos_].branch;
    }
    if (carry_active)
        msg.active_set = cfg_.active_set;
    return msg;
}

bool RbcInstance::check_membership(const RbcMessage& msg, const Envelope& env) {
    // Messages that carry the active set must carry the canonical one;
    // membership alone is not enough against an equivocating sender.
    const bool learner_variant =
        cfg_.variant == RbcKind::mbc_l || cfg_.variant == RbcKind::avid_l;
    const bool should_carry =
        learner_variant &&
        (msg.type == RbcMsgType::init || msg.type == RbcMsgType::witness ||
         msg.type == RbcMsgType::send || msg.type == RbcMsgType::echo ||
         (msg.type == RbcMsgType::ready && cfg_.variant == RbcKind::avid_l));
    if (should_carry)
        return msg.active_set == cfg_.active_set;
    if (!msg.active_set.empty())
        return false;
    (void)env;
    return true;
}

RbcOutcome RbcInstance::handle(const Envelope& env) {
    RbcOutcome out;
    if (aborted_)
        return out;
    auto decoded = RbcMessage::decode(env.payload);
    if (!decoded) {
        ++dropped_invalid_;
        return out;
    }
    const RbcMessage& msg = *decoded;
    if (!check_membership(msg, env)) {
        ++dropped_invalid_;
        return out;
    }

    switch (msg.type) {
    case RbcMsgType::init:
        if (cfg_.variant == RbcKind::mbc || cfg_.variant == RbcKind::mbc_l)
            return handle_init(msg, env);
        break;
    case RbcMsgType::send:
        if (cfg_.variant == RbcKind::avid || cfg_.variant == RbcKind::avid_l)
            return handle_init(msg, env);
        break;
    case RbcMsgType::witness:
        if (cfg_.variant == RbcKind::mbc || cfg_.variant == RbcKind::mbc_l)
            return handle_witness(msg, env);
        break;
    case RbcMsgType::echo:
        if (cfg_.variant == RbcKind::avid || cfg_.variant == RbcKind::avid_l)
            return handle_echo(msg, env);
        break;
    case RbcMsgType::ready:
        if (cfg_.variant == RbcKind::avid || cfg_.variant == RbcKind::avid_l)
            return handle_ready_avid(msg, env);
        if (cfg_.variant == RbcKind::mbc_l)
            return handle_ready_learner(msg, env);
        break;
    case RbcMsgType::val:
        if (cfg_.variant == RbcKind::avid_l)
            return handle_val(msg, env);
        break;
    }
    ++dropped_invalid_;
    return out;
}

// init (MBC family) and send (AVID family): the sender hands us our block.
RbcOutcome RbcInstance::handle_init(const RbcMessage& msg, const Envelope& env) {
    RbcOutcome out;
    if (env.sender != cfg_.sender || self_pos_ < 0 ||
        msg.leaf_index != static_cast<std::uint16_t>(self_pos_) ||
        !coding::merkle_verify(msg.root,
                               coding::MerkleProof{msg.branch, msg.leaf_index},
                               msg.block)) {
        ++dropped_invalid_;
        return out;
    }
    if (note_equivocation(msg.type, env.sender, msg.root))
        return out;

    RootState& rs = roots_[msg.root];
    store_block(rs, msg);

    const bool mbc_family = msg.type == RbcMsgType::init;
    if (mbc_family && !witness_sent_) {
        witness_sent_ = true;
        RbcMessage reply = own_share_message(RbcMsgType::witness, msg.root, rs,
                                             cfg_.variant == RbcKind::mbc_l);
        out.out = broadcast_active(reply, env.depth + 1);
    } else if (!mbc_family && !echo_sent_) {
        echo_sent_ = true;
        RbcMessage reply = own_share_message(RbcMsgType::echo, msg.root, rs,
                                             cfg_.variant == RbcKind::avid_l);
        out.out = broadcast_active(reply, env.depth + 1);
    }
    return out;
}

RbcOutcome RbcInstance::handle_witness(const RbcMessage& msg, const Envelope& env) {
    RbcOutcome out;
    const int sender_pos = cfg_.active_pos(env.sender);
    if (self_pos_ < 0 || sender_pos < 0 ||
        msg.leaf_index != static_cast<std::uint16_t>(sender_pos) ||
        !coding::merkle_verify(msg.root,
                               coding::MerkleProof{msg.branch, msg.leaf_index},
                               msg.block)) {
        ++dropped_invalid_;
        return out;
    }
    if (note_equivocation(RbcMsgType::witness, env.sender, msg.root))
        return out;

    RootState& rs = roots_[msg.root];
    if (!rs.witness_from.insert(env.sender).second)
        return out; // duplicate
    store_block(rs, msg);
    rs.depth_witness = std::max(rs.depth_witness, env.depth);

    const int count = static_cast<int>(rs.witness_from.size());
    if (count >= thr_reencode_ && !rs.consistent) {
        if (!check_consistency(msg.root, rs))
            return out; // aborted: recomputed root mismatched
        if (!witness_sent_) {
            witness_sent_ = true;
            RbcMessage reply = own_share_message(RbcMsgType::witness, msg.root, rs,
                                                 cfg_.variant == RbcKind::mbc_l);
            auto msgs = broadcast_active(reply, rs.depth_witness + 1);
            out.out.insert(out.out.end(), msgs.begin(), msgs.end());
        }
    }
    if (count >= thr_deliver_ && rs.consistent.value_or(false) && !delivered_) {
        if (cfg_.variant == RbcKind::mbc_l) {
            // The ready fan-out is the instance's third step; local
            // delivery is sequenced after it.
            RbcMessage ready = own_share_message(RbcMsgType::ready, msg.root, rs, false);
            for (ReplicaId learner : cfg_.learners())
                out.out.push_back(make_env(learner, ready, rs.depth_witness + 1));
            deliver(rs, rs.depth_witness + 1, out);
        } else {
            deliver(rs, rs.depth_witness, out);
        }
    }
    return out;
}

RbcOutcome RbcInstance::handle_echo(const RbcMessage& msg, const Envelope& env) {
    RbcOutcome out;
    const int sender_pos = cfg_.active_pos(env.sender);
    if (self_pos_ < 0 || sender_pos < 0 ||
        msg.leaf_index != static_cast<std::uint16_t>(sender_pos) ||
        !coding::merkle_verify(msg.root,
                               coding::MerkleProof{msg.branch, msg.leaf_index},
                               msg.block)) {
        ++dropped_invalid_;
        return out;
    }
    if (note_equivocation(RbcMsgType::echo, env.sender, msg.root))
        return out;

    RootState& rs = roots_[msg.root];
    if (!rs.echo_from.insert(env.sender).second)
        return out;
    store_block(rs, msg);
    rs.depth_echo = std::max(rs.depth_echo, env.depth);

    if (static_cast<int>(rs.echo_from.size()) >= thr_deliver_ && !rs.consistent) {
        if (!check_consistency(msg.root, rs))
            return out;
        if (!ready_sent_) {
            ready_sent_ = true;
            RbcMessage ready;
            ready.type = RbcMsgType::ready;
            ready.root = msg.root;
            if (cfg_.variant == RbcKind::avid_l)
                ready.active_set = cfg_.active_set;
            auto msgs = broadcast_active(ready, rs.depth_echo + 1);
            out.out.insert(out.out.end(), msgs.begin(), msgs.end());
        }
    }
    maybe_deliver_avid(msg.root, rs, out);
    return out;
}

RbcOutcome RbcInstance::handle_ready_avid(const RbcMessage& msg, const Envelope& env) {
    RbcOutcome out;
    if (self_pos_ < 0 || !cfg_.is_active(env.sender) || !msg.block.empty() ||
        !msg.branch.empty()) {
        ++dropped_invalid_;
        return out;
    }
    if (note_equivocation(RbcMsgType::ready, env.sender, msg.root))
        return out;

    RootState& rs = roots_[msg.root];
    if (!rs.ready_from.insert(env.sender).second)
        return out;
    rs.depth_ready = std::max(rs.depth_ready, env.depth);

    if (static_cast<int>(rs.ready_from.size()) >= thr_amplify_ && !ready_sent_) {
        ready_sent_ = true;
        RbcMessage ready;
        ready.type = RbcMsgType::ready;
        ready.root = msg.root;
        if (cfg_.variant == RbcKind::avid_l)
            ready.active_set = cfg_.active_set;
        auto msgs = broadcast_active(ready, rs.depth_ready + 1);
        out.out.insert(out.out.end(), msgs.begin(), msgs.end());
    }
    maybe_deliver_avid(msg.root, rs, out);
    return out;
}

void RbcInstance::maybe_deliver_avid(const coding::Digest& root, RootState& rs,
                                     RbcOutcome& out) {
    if (delivered_ || aborted_)
        return;
    if (static_cast<int>(rs.ready_from.size()) < thr_commit_)
        return;
    if (static_cast<int>(rs.blocks.size()) < cfg_.k_data)
        return;
    if (rs.consistent && !*rs.consistent)
        return;
    const std::uint32_t depth = std::max(rs.depth_ready, rs.depth_echo);
    if (cfg_.variant == RbcKind::avid_l) {
        ensure_full_blocks(root, rs);
        RbcMessage val;
        val.type = RbcMsgType::val;
        val.root = root;
        val.leaf_index = static_cast<std::uint16_t>(self_pos_);
        val.block = rs.all_blocks[self_pos_];
        val.branch = rs.all_proofs[self_pos_].branch;
        for (ReplicaId learner : cfg_.learners())
            out.out.push_back(make_env(learner, val, depth + 1));
    }
    deliver(rs, depth, out);
}

// MBC-L ready, received by learners only.
RbcOutcome RbcInstance::handle_ready_learner(const RbcMessage& msg, const Envelope& env) {
    RbcOutcome out;
    const int sender_pos = cfg_.active_pos(env.sender);
    if (self_pos_ >= 0 || sender_pos < 0 ||
        msg.leaf_index != static_cast<std::uint16_t>(sender_pos) ||
        !coding::merkle_verify(msg.root,
                               coding::MerkleProof{msg.branch, msg.leaf_index},
                               msg.block)) {
        ++dropped_invalid_;
        return out;
    }
    if (note_equivocation(RbcMsgType::ready, env.sender, msg.root))
        return out;

    RootState& rs = roots_[msg.root];
    if (!rs.ready_from.insert(env.sender).second)
        return out;
    store_block(rs, msg);
    rs.depth_ready = std::max(rs.depth_ready, env.depth);

    if (static_cast<int>(rs.ready_from.size()) >= thr_deliver_ && !delivered_)
        deliver(rs, rs.depth_ready, out);
    return out;
}

RbcOutcome RbcInstance::handle_val(const RbcMessage& msg, const Envelope& env) {
    RbcOutcome out;
    const int sender_pos = cfg_.active_pos(env.sender);
    if (self_pos_ >= 0 || sender_pos < 0 ||
        msg.leaf_index != static_cast<std::uint16_t>(sender_pos) ||
        !coding::merkle_verify(msg.root,
                               coding::MerkleProof{msg.branch, msg.leaf_index},
                               msg.block)) {
        ++dropped_invalid_;
        return out;
    }
    if (note_equivocation(RbcMsgType::val, env.sender, msg.root))
        return out;

    RootState& rs = roots_[msg.root];
    if (!rs.val_from.insert(env.sender).second)
        return out;
    store_block(rs, msg);
    rs.depth_val = std::max(rs.depth_val, env.depth);

    if (static_cast<int>(rs.val_from.size()) >= thr_deliver_ && !delivered_)
        deliver(rs, rs.depth_val, out);
    return out;
}

} // namespace mib::rbc
