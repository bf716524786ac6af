#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mib/aba.hpp"
#include "mib/checks.hpp"

#include <random>
#include <set>

using namespace mib;
using namespace mib::aba;

namespace {

// Independent route for the one-step thresholds: strict-majority
// comparisons rewritten as floor+1 bounds instead of 2c > x.
OneStepVerdict oracle(int c0, int c1, int n, int f) {
    const int decide_min = (n + 3 * f) / 2 + 1;
    const int adopt_min = (n - f) / 2 + 1;
    if (c0 >= decide_min)
        return {OneStepVerdict::Kind::decide, 0};
    if (c1 >= decide_min)
        return {OneStepVerdict::Kind::decide, 1};
    const bool a0 = c0 >= adopt_min, a1 = c1 >= adopt_min;
    if (a0 != a1)
        return {OneStepVerdict::Kind::adopt, a1 ? 1 : 0};
    return {OneStepVerdict::Kind::fallthrough, 0};
}

} // namespace

TEST_CASE("one-step evaluation matches the threshold oracle") {
    struct Config {
        int n, f;
    };
    for (auto [n, f] : {Config{4, 1}, Config{6, 1}, Config{8, 1}, Config{11, 2},
                        Config{15, 2}, Config{16, 3}}) {
        Deployment dep{n, f, Resilience::r3f1};
        for (int c1 = 0; c1 <= n - f; ++c1) {
            const int c0 = n - f - c1;
            auto got = onestep_evaluate(c0, c1, dep);
            auto want = oracle(c0, c1, n, f);
            CAPTURE(n);
            CAPTURE(f);
            CAPTURE(c1);
            CHECK(got.kind == want.kind);
            if (got.kind != OneStepVerdict::Kind::fallthrough)
                CHECK(got.value == want.value);
        }
    }
}

TEST_CASE("one-step evaluation fixed points") {
    Deployment d6{6, 1, Resilience::r5f1};
    auto r = onestep_evaluate(0, 5, d6);
    CHECK(r.kind == OneStepVerdict::Kind::decide);
    CHECK(r.value == 1);

    r = onestep_evaluate(1, 4, d6); // 4 > 2.5 but 4 <= 4.5
    CHECK(r.kind == OneStepVerdict::Kind::adopt);
    CHECK(r.value == 1);

    r = onestep_evaluate(5, 0, d6);
    CHECK(r.kind == OneStepVerdict::Kind::decide);
    CHECK(r.value == 0);

    Deployment d8{8, 1, Resilience::r7f1};
    r = onestep_evaluate(1, 6, d8); // 6 > 5.5 of the 7 collected
    CHECK(r.kind == OneStepVerdict::Kind::decide);
    CHECK(r.value == 1);

    CHECK_THROWS_AS(onestep_evaluate(2, 2, d6), ProtocolMisuse);
}

TEST_CASE("propose input validation") {
    Deployment dep{6, 1, Resilience::r5f1};
    CoinSource coin(Bytes{1, 2, 3});
    AbaInstance inst(dep, true, 0, 0, 0, &coin);
    CHECK_THROWS_AS(inst.propose(2), ProtocolMisuse);
    auto out = inst.propose(1);
    CHECK(out.out.size() == 6); // one vote per replica, self included
    for (const auto& env : out.out) {
        CHECK(env.depth == 1);
        auto msg = aba::AbaMessage::decode(env.payload);
        REQUIRE(msg.has_value());
        CHECK(msg->type == aba::AbaMsgType::bval1step);
        CHECK(msg->value == 1);
    }
    CHECK_THROWS_AS(inst.propose(1), ProtocolMisuse);
}

TEST_CASE("envelopes before propose are buffered") {
    Deployment dep{6, 1, Resilience::r5f1};
    CoinSource coin(Bytes{9});
    AbaInstance a(dep, true, 0, 0, 0, &coin);
    AbaInstance b(dep, true, 1, 0, 0, &coin);
    auto votes = b.propose(1).out;
    for (const auto& env : votes)
        if (env.receiver == 0)
            CHECK(a.handle(env).out.empty()); // buffered, no reaction
    auto out = a.propose(1);
    CHECK(out.out.size() == 6); // the buffered vote is replayed after
}

TEST_CASE("coin determinism and empirical balance") {
    CoinSource a(Bytes{1, 2, 3, 4});
    CoinSource b(Bytes{1, 2, 3, 4});
    CoinSource c(Bytes{1, 2, 3, 5});

    int ones = 0;
    bool any_differs = false;
    for (int e = 0; e < 10; ++e)
        for (int i = 0; i < 10; ++i)
            for (int r = 0; r < 100; ++r) {
                const bool bit = a.flip(e, i, r);
                CHECK(bit == b.flip(e, i, r));
                if (bit != c.flip(e, i, r))
                    any_differs = true;
                ones += bit ? 1 : 0;
            }
    const double freq = ones / 10000.0;
    CHECK(freq > 0.45);
    CHECK(freq < 0.55);
    CHECK(any_differs);
}

TEST_CASE("unanimous one-step decision at depth 1") {
    for (int value : {0, 1}) {
        checks::AbaRunOptions options;
        options.dep = {6, 1, Resilience::r5f1};
        options.one_step = true;
        options.inputs.assign(6, value);
        options.seed = 7 + value;
        auto outcome = checks::run_single_aba(options);
        CHECK(outcome.drained);
        for (int i = 0; i < 6; ++i) {
            REQUIRE(outcome.decisions[i].has_value());
            CHECK(*outcome.decisions[i] == value);
            CHECK(outcome.depth[i] == 1);
            CHECK(outcome.one_step[i]);
        }
    }
}

TEST_CASE("backup decides under unanimity with silent faulty replicas") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        checks::AbaRunOptions options;
        options.dep = {4, 1, Resilience::r3f1};
        options.one_step = false; // plain backup rounds
        options.inputs.assign(4, 1);
        options.seed = seed;
        options.fault.mode = sim::FaultMode::crash;
        options.fault.victims = {3};
        auto outcome = checks::run_single_aba(options);
        CHECK(outcome.drained);

        // With unanimous estimates the decision lands in the first
        // round whose coin shows the estimate.
        Bytes coin_seed(8);
        for (int i = 0; i < 8; ++i)
            coin_seed[i] = static_cast<std::uint8_t>(seed >> (8 * (7 - i)));
        aba::CoinSource coin(coin_seed);
        std::uint16_t first_match = 0;
        while (!coin.flip(0, 0, first_match))
            ++first_match;

        for (int i = 0; i < 3; ++i) {
            REQUIRE(outcome.decisions[i].has_value());
            CHECK(*outcome.decisions[i] == 1);
            CHECK(outcome.rounds[i] <= first_match + 2);
        }
    }
}

TEST_CASE("mixed inputs: agreement, validity, bounded rounds") {
    for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
        checks::AbaRunOptions options;
        options.dep = {6, 1, Resilience::r5f1};
        options.one_step = true;
        options.seed = seed;
        std::mt19937_64 rng(seed);
        options.inputs.resize(6);
        for (auto& v : options.inputs)
            v = static_cast<int>(rng() % 2);
        auto outcome = checks::run_single_aba(options);
        REQUIRE(outcome.drained);
        std::set<int> decided;
        for (int i = 0; i < 6; ++i) {
            REQUIRE(outcome.decisions[i].has_value());
            decided.insert(*outcome.decisions[i]);
            CHECK(outcome.rounds[i] <= 64);
        }
        CHECK(decided.size() == 1);
        // Validity: someone proposed the decided bit.
        CHECK(std::count(options.inputs.begin(), options.inputs.end(),
                         *decided.begin()) > 0);
    }
}

TEST_CASE("equivocating votes cannot split the decision") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        checks::AbaRunOptions options;
        options.dep = {6, 1, Resilience::r5f1};
        options.one_step = true;
        options.seed = seed;
        options.inputs.assign(6, 1);
        options.fault.mode = sim::FaultMode::byz_aba;
        options.fault.victims = {5};
        auto outcome = checks::run_single_aba(options);
        REQUIRE(outcome.drained);
        std::set<int> decided;
        for (int i = 0; i < 5; ++i) {
            REQUIRE(outcome.decisions[i].has_value());
            decided.insert(*outcome.decisions[i]);
        }
        CHECK(decided == std::set<int>{1});
    }
}

TEST_CASE("message serialization") {
    AbaMessage msg{AbaMsgType::conf, 513, 3};
    auto decoded = AbaMessage::decode(msg.encode());
    REQUIRE(decoded.has_value());
    CHECK(decoded->type == AbaMsgType::conf);
    CHECK(decoded->round == 513);
    CHECK(decoded->value == 3);

    CHECK_FALSE(AbaMessage::decode(Bytes{0, 0, 0}).has_value());
    CHECK_FALSE(AbaMessage::decode(Bytes{9, 0, 0, 1}).has_value());
    CHECK_FALSE(AbaMessage::decode(Bytes{1, 0, 0, 2}).has_value()); // bval bit > 1
    CHECK_FALSE(AbaMessage::decode(Bytes{3, 0, 0, 0}).has_value()); // empty conf set
}
