#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mib/checks.hpp"
#include "mib/netsim.hpp"

#include <cstdlib>

using namespace mib;

TEST_CASE("identical seeds replay byte-identically") {
    sim::RunConfig config;
    config.protocol = "mib5";
    config.n = 6;
    config.f = 1;
    config.batch = 12;
    config.epochs = 2;
    config.seed = 31;
    auto a = sim::run(config);
    auto b = sim::run(config);
    CHECK(a.metrics_json() == b.metrics_json());
    for (int i = 0; i < 6; ++i)
        CHECK(a.delivered[i] == b.delivered[i]);

    // Different seeds give a different trace.
    config.seed = 32;
    auto c = sim::run(config);
    CHECK(a.metrics_json() != c.metrics_json());
}

TEST_CASE("fault budget is enforced") {
    sim::RunConfig config;
    config.protocol = "beat";
    config.n = 4;
    config.f = 1;
    config.batch = 4;
    config.fault.mode = sim::FaultMode::crash;
    config.fault.victims = {2, 3}; // two victims, budget is one
    CHECK_THROWS_AS(sim::run(config), ConfigError);

    config.fault.victims = {9};
    CHECK_THROWS_AS(sim::run(config), ConfigError);
}

TEST_CASE("zero victims behave exactly like no faults") {
    sim::RunConfig byz;
    byz.protocol = "mib5";
    byz.n = 6;
    byz.f = 1;
    byz.batch = 10;
    byz.epochs = 1;
    byz.seed = 17;
    byz.fault.mode = sim::FaultMode::byz_aba; // no victims listed

    sim::RunConfig clean = byz;
    clean.fault.mode = sim::FaultMode::none;

    auto a = sim::run(byz);
    auto b = sim::run(clean);
    CHECK(a.metrics.events_processed == b.metrics.events_processed);
    for (int i = 0; i < 6; ++i)
        CHECK(a.delivered[i] == b.delivered[i]);
}

TEST_CASE("crash wins over byzantine behavior") {
    sim::RunConfig byz_crashed;
    byz_crashed.protocol = "mib5";
    byz_crashed.n = 6;
    byz_crashed.f = 1;
    byz_crashed.batch = 10;
    byz_crashed.epochs = 1;
    byz_crashed.seed = 13;
    byz_crashed.fault.mode = sim::FaultMode::byz_aba;
    byz_crashed.fault.victims = {5};
    byz_crashed.fault.crash_time = 0; // crashed before sending anything

    sim::RunConfig crash = byz_crashed;
    crash.fault.mode = sim::FaultMode::crash;

    auto a = sim::run(byz_crashed);
    auto b = sim::run(crash);
    CHECK(a.metrics.events_processed == b.metrics.events_processed);
    for (int i = 0; i < 5; ++i)
        CHECK(a.delivered[i] == b.delivered[i]);
}

TEST_CASE("mid-run crash keeps the survivors safe and live") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        sim::RunConfig config;
        config.protocol = "mib5";
        config.n = 6;
        config.f = 1;
        config.batch = 12;
        config.epochs = 3;
        config.seed = seed;
        config.fault.mode = sim::FaultMode::crash;
        config.fault.victims = {5};
        config.fault.crash_time = 450; // mid-flight in epoch 0 or 1
        auto result = sim::run(config);
        CAPTURE(seed);
        CHECK(result.metrics.liveness_ok);
        CHECK(checks::verify_run(result).empty());
        for (int i = 1; i < 5; ++i)
            CHECK(result.delivered[i] == result.delivered[0]);
    }
}

TEST_CASE("tiny event cap reports the stuck instance") {
    sim::RunConfig config;
    config.protocol = "mib5";
    config.n = 6;
    config.f = 1;
    config.batch = 10;
    config.epochs = 1;
    config.seed = 2;
    config.event_cap = 50;
    auto result = sim::run(config);
    CHECK_FALSE(result.metrics.liveness_ok);
    CHECK(result.metrics.stuck.find("epoch") != std::string::npos);
}

TEST_CASE("event cap environment override") {
    setenv("MIB_EVENT_CAP", "12345", 1);
    CHECK(sim::default_event_cap() == 12345);
    setenv("MIB_EVENT_CAP", "bogus", 1);
    CHECK(sim::default_event_cap() == 10'000'000);
    unsetenv("MIB_EVENT_CAP");
    CHECK(sim::default_event_cap() == 10'000'000);
}

TEST_CASE("adversarial reorder preserves safety and drains") {
    for (const auto& name : {"beat", "mib5", "mib7"}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            sim::RunConfig config;
            config.protocol = name;
            config.f = 1;
            config.batch = 8;
            config.tx_size = 8;
            config.epochs = 2;
            config.seed = seed;
            config.delay.kind = sim::DelayKind::adversarial;
            config.resolve();
            auto result = sim::run(config);
            CAPTURE(name);
            CAPTURE(seed);
            CHECK(result.metrics.liveness_ok);
            CHECK(checks::verify_run(result).empty());
        }
    }
}

TEST_CASE("fixed per-link delays are a deterministic policy") {
    sim::RunConfig config;
    config.protocol = "mib5";
    config.n = 6;
    config.f = 1;
    config.batch = 6;
    config.epochs = 1;
    config.seed = 77;
    config.delay.kind = sim::DelayKind::fixed_link;
    auto a = sim::run(config);
    auto b = sim::run(config);
    CHECK(a.metrics_json() == b.metrics_json());
    CHECK(a.metrics.liveness_ok);
    CHECK(checks::verify_run(a).empty());
}

TEST_CASE("depth report aggregates per instance") {
    sim::RunConfig config;
    config.protocol = "mib5";
    config.n = 6;
    config.f = 1;
    config.batch = 6;
    config.epochs = 1;
    config.seed = 19;
    auto result = sim::run(config);
    REQUIRE(result.metrics.liveness_ok);
    auto report = sim::depth_report(result);
    for (int j = 0; j < 6; ++j) {
        auto rbc = report.at({0, Phase::rbc, static_cast<std::uint16_t>(j)});
        CHECK(rbc.samples == 6);
        CHECK(rbc.min == 2); // two-step broadcast, failure-free
        CHECK(rbc.median == 2);
        CHECK(rbc.max == 2);
        auto aba = report.at({0, Phase::aba, static_cast<std::uint16_t>(j)});
        CHECK(aba.min == 1); // one-step agreement
        CHECK(aba.max == 1);
    }
}

TEST_CASE("csv rows carry the pinned column set") {
    CHECK(sim::RunResult::csv_header() ==
          "protocol,n,f,fault_mode,seed,latency,messages,bytes,max_depth,aba_rounds");
    sim::RunConfig config;
    config.protocol = "beat";
    config.n = 4;
    config.f = 1;
    config.batch = 4;
    config.epochs = 2;
    config.seed = 1;
    auto result = sim::run(config);
    auto rows = result.csv_rows();
    CHECK(rows.size() == 2);
    for (const auto& row : rows)
        CHECK(row.rfind("beat,4,1,none,1,", 0) == 0);
}
