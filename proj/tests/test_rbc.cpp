#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mib/checks.hpp"
#include "mib/rbc.hpp"

#include <random>
#include <set>

using namespace mib;
using namespace mib::rbc;

namespace {

Bytes msg_of(std::size_t len, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Bytes m(len);
    for (auto& b : m)
        b = static_cast<std::uint8_t>(rng());
    return m;
}

Envelope wrap(ReplicaId from, ReplicaId to, const RbcMessage& msg,
              std::uint32_t depth = 1) {
    Envelope env;
    env.sender = from;
    env.receiver = to;
    env.epoch = 0;
    env.tag = InstanceTag{Phase::rbc, 0};
    env.payload = msg.encode();
    env.depth = depth;
    return env;
}

} // namespace

TEST_CASE("canonical configs per variant") {
    Deployment d6{6, 1, Resilience::r5f1};

    auto mbc = RbcConfig::make(d6, 0, RbcKind::mbc);
    CHECK(mbc.group_size() == 6);
    CHECK(mbc.k_data == 4); // n-2f
    CHECK(mbc.k_total == 6);

    auto avidl = RbcConfig::make(d6, 2, RbcKind::avid_l);
    CHECK(avidl.active_set == std::vector<ReplicaId>{2, 3, 4, 5});
    CHECK(avidl.k_data == 2); // n1-2f with n1=3f+1
    CHECK(avidl.k_total == 4);
    CHECK(avidl.learners() == std::vector<ReplicaId>{0, 1});

    // Wrap-around of the (sender + k) mod n rule.
    auto wrap_set = RbcConfig::make(d6, 4, RbcKind::avid_l);
    CHECK(wrap_set.active_set == std::vector<ReplicaId>{4, 5, 0, 1});

    Deployment d8{8, 1, Resilience::r7f1};
    auto mbcl = RbcConfig::make(d8, 0, RbcKind::mbc_l);
    CHECK(mbcl.group_size() == 6); // n1 = 5f+1
    CHECK(mbcl.k_data == 4);
    CHECK(mbcl.learners().size() == 2);

    // Degenerate deployment is rejected before any protocol runs.
    CHECK_THROWS_AS(RbcConfig::make(Deployment{1, 1, Resilience::r5f1}, 0, RbcKind::mbc),
                    ConfigError);
}

TEST_CASE("payload serialization round-trip") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        RbcMessage msg;
        msg.type = static_cast<RbcMsgType>(rng() % 6);
        for (auto& b : msg.root)
            b = static_cast<std::uint8_t>(rng());
        msg.leaf_index = static_cast<std::uint16_t>(rng() % 64);
        msg.branch.resize(rng() % 5);
        for (auto& d : msg.branch)
            for (auto& b : d)
                b = static_cast<std::uint8_t>(rng());
        msg.block = msg_of(rng() % 100, rng());
        if (rng() % 2) {
            msg.active_set.resize(1 + rng() % 6);
            for (auto& id : msg.active_set)
                id = static_cast<ReplicaId>(rng() % 100);
        }
        auto decoded = RbcMessage::decode(msg.encode());
        REQUIRE(decoded.has_value());
        CHECK(decoded->type == msg.type);
        CHECK(decoded->root == msg.root);
        CHECK(decoded->leaf_index == msg.leaf_index);
        CHECK(decoded->branch == msg.branch);
        CHECK(decoded->block == msg.block);
        CHECK(decoded->active_set == msg.active_set);
    }

    CHECK_FALSE(RbcMessage::decode(Bytes{}).has_value());
    CHECK_FALSE(RbcMessage::decode(Bytes{9}).has_value());
    RbcMessage msg;
    msg.type = RbcMsgType::ready;
    Bytes wire = msg.encode();
    wire.push_back(0); // trailing garbage
    CHECK_FALSE(RbcMessage::decode(wire).has_value());
}

TEST_CASE("analytic message counts") {
    CHECK(analytic_message_count(RbcKind::mbc, {6, 1, Resilience::r5f1}) == 42);
    CHECK(analytic_message_count(RbcKind::avid, {4, 1, Resilience::r3f1}) == 36);
    CHECK(analytic_message_count(RbcKind::mbc_l, {8, 1, Resilience::r7f1}) == 54);
    CHECK(analytic_message_count(RbcKind::mbc, {8, 1, Resilience::r7f1}) == 72);
    CHECK(analytic_message_count(RbcKind::mbc_l, {15, 2, Resilience::r7f1}) == 176);
    CHECK(analytic_message_count(RbcKind::mbc_l, {22, 3, Resilience::r7f1}) == 368);
}

TEST_CASE("failure-free delivery, counts and steps per variant") {
    struct Case {
        RbcKind variant;
        Deployment dep;
        std::uint32_t active_depth;
        std::uint32_t learner_depth;
    };
    const std::vector<Case> cases = {
        {RbcKind::mbc, {6, 1, Resilience::r5f1}, 2, 0},
        {RbcKind::avid, {4, 1, Resilience::r3f1}, 3, 0},
        {RbcKind::mbc_l, {8, 1, Resilience::r7f1}, 3, 3},
        {RbcKind::avid_l, {6, 1, Resilience::r5f1}, 3, 4},
    };
    for (const auto& c : cases) {
        CAPTURE(rbc_kind_name(c.variant));
        auto cfg = RbcConfig::make(c.dep, 0, c.variant);
        checks::RbcRunOptions options;
        options.variant = c.variant;
        options.dep = c.dep;
        options.message = msg_of(250, 1);
        options.seed = 3;
        auto outcome = checks::run_single_rbc(options);
        CHECK(outcome.drained);
        CHECK(outcome.messages ==
              static_cast<std::uint64_t>(analytic_message_count(c.variant, c.dep)));
        for (int i = 0; i < c.dep.n; ++i) {
            REQUIRE(outcome.delivered[i].has_value());
            CHECK(*outcome.delivered[i] == options.message);
            const bool active = cfg.is_active(static_cast<ReplicaId>(i));
            CHECK(outcome.depth[i] == (active ? c.active_depth : c.learner_depth));
        }
    }
}

TEST_CASE("crashed sender never delivers") {
    for (auto variant : {RbcKind::mbc, RbcKind::avid, RbcKind::mbc_l, RbcKind::avid_l}) {
        checks::RbcRunOptions options;
        options.variant = variant;
        options.dep = variant == RbcKind::mbc_l ? Deployment{8, 1, Resilience::r7f1}
                                                : Deployment{6, 1, Resilience::r5f1};
        options.message = msg_of(100, 2);
        options.sender_crash = true;
        auto outcome = checks::run_single_rbc(options);
        CHECK(outcome.drained);
        for (const auto& d : outcome.delivered)
            CHECK_FALSE(d.has_value());
        CHECK(outcome.messages == 0);
    }
}

TEST_CASE("split-root attack never yields two values") {
    for (auto variant : {RbcKind::mbc, RbcKind::avid, RbcKind::mbc_l, RbcKind::avid_l}) {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            checks::RbcRunOptions options;
            options.variant = variant;
            options.dep = variant == RbcKind::mbc_l ? Deployment{8, 1, Resilience::r7f1}
                                                    : Deployment{6, 1, Resilience::r5f1};
            options.message = msg_of(120, seed);
            options.split_second = msg_of(120, seed + 1000);
            options.seed = seed;
            auto outcome = checks::run_single_rbc(options);
            std::set<Bytes> values;
            for (const auto& d : outcome.delivered)
                if (d)
                    values.insert(*d);
            CHECK(values.size() <= 1);
        }
    }
}

TEST_CASE("input misuse") {
    Deployment dep{6, 1, Resilience::r5f1};
    auto cfg = RbcConfig::make(dep, 0, RbcKind::mbc);
    RbcInstance sender(cfg, 0, 0, 0);
    auto out = sender.input(msg_of(50, 1));
    CHECK(out.out.size() == 6); // one init per replica
    CHECK_THROWS_AS(sender.input(msg_of(50, 2)), ProtocolMisuse);

    RbcInstance other(cfg, 1, 0, 0);
    CHECK_THROWS_AS(other.input(msg_of(50, 3)), ProtocolMisuse);
}

TEST_CASE("invalid proofs are dropped and counted") {
    Deployment dep{6, 1, Resilience::r5f1};
    auto cfg = RbcConfig::make(dep, 0, RbcKind::mbc);
    RbcInstance sender(cfg, 0, 0, 0);
    auto inits = sender.input(msg_of(80, 7)).out;

    RbcInstance receiver(cfg, 1, 0, 0);
    // Find the init addressed to replica 1 and corrupt its block.
    for (auto env : inits) {
        if (env.receiver != 1)
            continue;
        auto msg = RbcMessage::decode(env.payload);
        REQUIRE(msg.has_value());
        msg->block[0] ^= 0xff;
        env.payload = msg->encode();
        auto outcome = receiver.handle(env);
        CHECK(outcome.out.empty());
        CHECK(receiver.dropped_invalid() == 1);
    }
}

TEST_CASE("witness equivocation is flagged, duplicates ignored") {
    Deployment dep{6, 1, Resilience::r5f1};
    auto cfg = RbcConfig::make(dep, 0, RbcKind::mbc);

    Bytes m1 = msg_of(64, 1), m2 = msg_of(64, 2);
    RbcInstance s1(cfg, 0, 0, 0), s2(cfg, 0, 0, 0);
    auto inits1 = s1.input(m1).out;
    auto inits2 = s2.input(m2).out;

    RbcInstance receiver(cfg, 1, 0, 0);
    auto first = RbcMessage::decode(inits1[3].payload);
    auto second = RbcMessage::decode(inits2[3].payload);
    REQUIRE(first.has_value());
    REQUIRE(second.has_value());
    RbcMessage w1{RbcMsgType::witness, first->root, first->leaf_index, first->branch,
                  first->block, {}};
    RbcMessage w2{RbcMsgType::witness, second->root, second->leaf_index, second->branch,
                  second->block, {}};

    CHECK(receiver.handle(wrap(3, 1, w1)).out.empty());
    CHECK(receiver.flagged_equivocations() == 0);
    receiver.handle(wrap(3, 1, w1)); // duplicate: silently ignored
    CHECK(receiver.flagged_equivocations() == 0);
    receiver.handle(wrap(3, 1, w2)); // second root from the same peer
    CHECK(receiver.flagged_equivocations() == 1);
}

TEST_CASE("learner delivery threshold boundary") {
    // AVID-L learner needs n1-f valid val messages with one root.
    Deployment dep{6, 1, Resilience::r5f1};
    auto cfg = RbcConfig::make(dep, 0, RbcKind::avid_l);
    const int n1 = cfg.group_size(); // 4
    const int need = n1 - dep.f;     // 3

    Bytes message = msg_of(96, 9);
    auto blocks = coding::encode(message, cfg.k_data, cfg.k_total);
    std::vector<Bytes> leaves;
    for (const auto& b : blocks)
        leaves.push_back(b.data);
    auto tree = coding::merkle_build(leaves);

    RbcInstance learner(cfg, 4, 0, 0); // replica 4 is outside {0,1,2,3}
    REQUIRE_FALSE(cfg.is_active(4));

    for (int j = 0; j < need; ++j) {
        RbcMessage val{RbcMsgType::val, tree.root,
                       static_cast<std::uint16_t>(j), tree.proofs[j].branch,
                       blocks[j].data, {}};
        auto outcome = learner.handle(wrap(cfg.active_set[j], 4, val, 4));
        if (j + 1 < need)
            CHECK_FALSE(outcome.delivered.has_value());
        else {
            REQUIRE(outcome.delivered.has_value());
            CHECK(outcome.delivered->value == message);
            CHECK(outcome.delivered->depth == 4);
        }
    }
    CHECK(learner.has_delivered());

    // An active replica drops learner-bound val messages.
    RbcInstance active(cfg, 1, 0, 0);
    RbcMessage val{RbcMsgType::val, tree.root, 0, tree.proofs[0].branch,
                   blocks[0].data, {}};
    active.handle(wrap(0, 1, val, 4));
    CHECK(active.dropped_invalid() == 1);
}

TEST_CASE("avid amplifies ready after f+1 copies, before any echo quorum") {
    Deployment dep{4, 1, Resilience::r3f1};
    auto cfg = RbcConfig::make(dep, 3, RbcKind::avid);
    RbcInstance inst(cfg, 0, 0, 0);

    coding::Digest root{};
    root[0] = 0xaa;
    RbcMessage ready{RbcMsgType::ready, root, 0, {}, {}, {}};

    auto first = inst.handle(wrap(1, 0, ready, 3));
    CHECK(first.out.empty()); // one copy is below f+1
    auto second = inst.handle(wrap(2, 0, ready, 3));
    REQUIRE(second.out.size() == 4); // amplified to the whole group
    for (const auto& env : second.out) {
        auto msg = RbcMessage::decode(env.payload);
        REQUIRE(msg.has_value());
        CHECK(msg->type == RbcMsgType::ready);
        CHECK(msg->root == root);
        CHECK(env.depth == 4);
    }
    // 2f+1 readys without n-2f stored blocks still withhold delivery.
    auto third = inst.handle(wrap(3, 0, ready, 3));
    CHECK_FALSE(third.delivered.has_value());
    CHECK_FALSE(inst.has_delivered());
}

TEST_CASE("mbc-l rejects a non-canonical active set") {
    Deployment dep{8, 1, Resilience::r7f1};
    auto cfg = RbcConfig::make(dep, 0, RbcKind::mbc_l);
    RbcInstance sender(cfg, 0, 0, 0);
    auto inits = sender.input(msg_of(70, 4)).out;

    RbcInstance receiver(cfg, 1, 0, 0);
    auto msg = RbcMessage::decode(inits[1].payload);
    REQUIRE(msg.has_value());
    msg->active_set[5] = 7; // not the canonical member
    Envelope env = inits[1];
    env.payload = msg->encode();
    receiver.handle(env);
    CHECK(receiver.dropped_invalid() == 1);

    // The canonical set is accepted.
    auto ok = receiver.handle(inits[1]);
    CHECK(ok.out.size() == 6); // witness broadcast to the active set
}
