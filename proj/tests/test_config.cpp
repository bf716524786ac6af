#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mib/config.hpp"

using namespace mib;
using cli::ExperimentConfig;

namespace {

const char* kSample = R"(
# same-f study
protocols = beat, mib5, mib7
f = 1
batch = 600
epochs = 3
seeds = 1..100
fault = crash
delay = uniform(90,110)
out = results/samef
format = csv

[mib5]
batch = 1200
delay = fixed(90,110)
)";

} // namespace

TEST_CASE("parse and round-trip identity") {
    auto cfg = ExperimentConfig::parse(kSample);
    CHECK(cfg.protocols == std::vector<std::string>{"beat", "mib5", "mib7"});
    REQUIRE(cfg.f.has_value());
    CHECK(*cfg.f == 1);
    CHECK_FALSE(cfg.n.has_value());
    CHECK(cfg.batch == 600);
    CHECK(cfg.epochs == 3);
    CHECK(cfg.seeds.size() == 100);
    CHECK(cfg.fault == sim::FaultMode::crash);
    CHECK(cfg.overrides.at("mib5").batch == 1200);
    CHECK(cfg.overrides.at("mib5").delay->kind == sim::DelayKind::fixed_link);

    auto again = ExperimentConfig::parse(cfg.serialize());
    CHECK(again == cfg);
    CHECK(again.serialize() == cfg.serialize());
}

TEST_CASE("line and field diagnostics") {
    auto expect_error = [](const std::string& text, const std::string& needle) {
        try {
            ExperimentConfig::parse(text);
            FAIL_CHECK("expected ConfigError for: " << text);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_error("protocols = beat\nbogus_field = 3\n", "line 2");
    expect_error("protocols = beat\nepochs = soon\n", "'epochs'");
    expect_error("protocols = beat\nn = 4\nf = 1\n", "exactly one");
    expect_error("protocols = beat\n", "exactly one");
    expect_error("n = 4\n", "protocols");
    expect_error("protocols = quux\nn = 4\n", "unknown protocol");
    expect_error("protocols = beat\nn = 4\nformat = yaml\n", "format");
    expect_error("protocols = beat\nn = 4\nseeds = 9..1\n", "ascending");
    expect_error("protocols = beat\nn = 4\n[nope]\nbatch = 1\n", "unknown protocol");
}

TEST_CASE("same-f expansion picks the protocol's deployment size") {
    auto cfg = ExperimentConfig::parse("protocols = beat, mib5, mib7\nf = 1\nseeds = 5\n");
    auto runs = cfg.expand();
    REQUIRE(runs.size() == 3);
    CHECK(runs[0].protocol == "beat");
    CHECK(runs[0].n == 4);
    CHECK(runs[1].protocol == "mib5");
    CHECK(runs[1].n == 6);
    CHECK(runs[2].protocol == "mib7");
    CHECK(runs[2].n == 8);
}

TEST_CASE("same-n expansion derives per-protocol fault bounds") {
    auto cfg = ExperimentConfig::parse("protocols = all\nn = 16\nseeds = 1,2\n");
    auto runs = cfg.expand();
    CHECK(runs.size() == 16); // 8 protocols x 2 seeds
    for (const auto& run : runs) {
        CHECK(run.n == 16);
        const auto& proto = protocol_registry(run.protocol);
        CHECK(run.f == (16 - 1) / resilience_denominator(proto.resilience));
    }
}

TEST_CASE("victims default to the last f replicas") {
    auto cfg = ExperimentConfig::parse(
        "protocols = mib5\nf = 2\nfault = byz-aba\nseeds = 1\n");
    auto runs = cfg.expand();
    REQUIRE(runs.size() == 1);
    CHECK(runs[0].n == 11);
    CHECK(runs[0].fault.victims == std::vector<ReplicaId>{10, 9});

    auto pinned = ExperimentConfig::parse(
        "protocols = mib5\nf = 2\nfault = byz-aba\nvictims = 0,3\nseeds = 1\n");
    CHECK(pinned.expand()[0].fault.victims == std::vector<ReplicaId>{0, 3});
}

TEST_CASE("seed lists and ranges") {
    auto list = ExperimentConfig::parse("protocols = beat\nn = 4\nseeds = 3,9,27\n");
    CHECK(list.seeds == std::vector<std::uint64_t>{3, 9, 27});
    auto range = ExperimentConfig::parse("protocols = beat\nn = 4\nseeds = 4..6\n");
    CHECK(range.seeds == std::vector<std::uint64_t>{4, 5, 6});
    // Non-contiguous lists survive the round trip too.
    CHECK(ExperimentConfig::parse(list.serialize()) == list);
}
