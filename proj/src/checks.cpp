#include "mib/checks.hpp"

#include "mib/aba.hpp"
#include "mib/acs.hpp"
#include "mib/coding.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mib::checks {

bool all_pass(const std::vector<CheckResult>& results) {
    return std::all_of(results.begin(), results.end(),
                       [](const CheckResult& r) { return r.pass; });
}

namespace {

CheckResult make_result(std::string name, bool pass, std::string detail = "") {
    return CheckResult{std::move(name), pass, std::move(detail)};
}

class SingleRbcNode : public sim::Node {
public:
    SingleRbcNode(const RbcRunOptions& options, ReplicaId self)
        : options_(options),
          instance_(rbc::RbcConfig::make(options.dep, options.sender, options.variant),
                    self, 0, 0),
          self_(self) {}

    Emitted start() override {
        Emitted out;
        if (self_ != options_.sender || options_.sender_crash)
            return out;
        if (options_.sender_envelopes) {
            out.out = *options_.sender_envelopes;
        } else if (options_.split_second) {
            out.out = instance_.split_input(options_.message, *options_.split_second);
        } else {
            auto rbc_out = instance_.input(options_.message);
            out.out = std::move(rbc_out.out);
            if (rbc_out.delivered)
                delivery_ = std::move(rbc_out.delivered);
        }
        return out;
    }

    Emitted handle(const Envelope& env) override {
        Emitted out;
        auto outcome = instance_.handle(env);
        out.out = std::move(outcome.out);
        if (outcome.delivered)
            delivery_ = std::move(outcome.delivered);
        return out;
    }

    const std::optional<rbc::RbcDelivery>& delivery() const { return delivery_; }
    bool aborted() const { return instance_.is_aborted(); }

private:
    const RbcRunOptions& options_;
    rbc::RbcInstance instance_;
    ReplicaId self_;
    std::optional<rbc::RbcDelivery> delivery_;
};

class SingleAbaNode : public sim::Node {
public:
    SingleAbaNode(const AbaRunOptions& options, ReplicaId self,
                  const aba::CoinSource* coin)
        : instance_(options.dep, options.one_step, self, 0, 0, coin),
          input_(options.inputs[self]) {}

    Emitted start() override {
        Emitted out;
        auto outcome = instance_.propose(input_);
        out.out = std::move(outcome.out);
        if (outcome.decided)
            decision_ = outcome.decided;
        return out;
    }

    Emitted handle(const Envelope& env) override {
        Emitted out;
        auto outcome = instance_.handle(env);
        out.out = std::move(outcome.out);
        if (outcome.decided && !decision_)
            decision_ = outcome.decided;
        return out;
    }

    const std::optional<aba::AbaDecision>& decision() const { return decision_; }
    std::uint16_t rounds() const { return instance_.rounds_entered(); }

private:
    aba::AbaInstance instance_;
    int input_;
    std::optional<aba::AbaDecision> decision_;
};

Bytes seed_bytes(std::uint64_t seed) {
    Bytes out(8);
    for (int i = 0; i < 8; ++i)
        out[i] = static_cast<std::uint8_t>(seed >> (8 * (7 - i)));
    return out;
}

Bytes pattern_message(std::size_t len, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Bytes m(len);
    for (auto& b : m)
        b = static_cast<std::uint8_t>(rng());
    return m;
}

} // namespace

RbcRunOutcome run_single_rbc(const RbcRunOptions& options) {
    sim::FaultPlan fault; // faults are expressed through the options
    sim::Simulation simulation(options.dep.n, options.delay, fault, options.seed,
                               options.event_cap);
    std::vector<SingleRbcNode*> raw;
    for (int i = 0; i < options.dep.n; ++i) {
        auto node = std::make_unique<SingleRbcNode>(options, static_cast<ReplicaId>(i));
        raw.push_back(node.get());
        simulation.add_node(std::move(node));
    }
    RbcRunOutcome outcome;
    outcome.drained = simulation.run();
    outcome.delivered.resize(options.dep.n);
    outcome.depth.resize(options.dep.n, 0);
    outcome.aborted.resize(options.dep.n, false);
    for (int i = 0; i < options.dep.n; ++i) {
        if (raw[i]->delivery()) {
            outcome.delivered[i] = raw[i]->delivery()->value;
            outcome.depth[i] = raw[i]->delivery()->depth;
        }
        outcome.aborted[i] = raw[i]->aborted();
    }
    for (const auto& [key, count] : simulation.message_counts()) {
        outcome.messages += count.first;
        outcome.bytes += count.second;
    }
    return outcome;
}

AbaRunOutcome run_single_aba(const AbaRunOptions& options) {
    if (static_cast<int>(options.inputs.size()) != options.dep.n)
        throw ConfigError("aba harness requires one input per replica");
    aba::CoinSource coin(seed_bytes(options.seed));
    sim::Simulation simulation(options.dep.n, options.delay, options.fault,
                               options.seed, options.event_cap);
    std::vector<SingleAbaNode*> raw;
    for (int i = 0; i < options.dep.n; ++i) {
        auto node = std::make_unique<SingleAbaNode>(options, static_cast<ReplicaId>(i),
                                                    &coin);
        raw.push_back(node.get());
        simulation.add_node(std::move(node));
    }
    AbaRunOutcome outcome;
    outcome.drained = simulation.run();
    outcome.decisions.resize(options.dep.n);
    outcome.depth.resize(options.dep.n, 0);
    outcome.one_step.resize(options.dep.n, false);
    outcome.rounds.resize(options.dep.n, 0);
    for (int i = 0; i < options.dep.n; ++i) {
        if (raw[i]->decision()) {
            outcome.decisions[i] = raw[i]->decision()->value;
            outcome.depth[i] = raw[i]->decision()->depth;
            outcome.one_step[i] = raw[i]->decision()->one_step;
        }
        outcome.rounds[i] = raw[i]->rounds();
    }
    for (const auto& [key, count] : simulation.message_counts())
        outcome.messages += count.first;
    return outcome;
}

std::uint64_t measure_rbc_messages(RbcKind variant, const Deployment& dep,
                                   std::uint64_t seed, std::size_t payload) {
    RbcRunOptions options;
    options.variant = variant;
    options.dep = dep;
    options.message = pattern_message(payload, seed ^ 0xfeed);
    options.seed = seed;
    return run_single_rbc(options).messages;
}

std::vector<std::string> verify_run(const sim::RunResult& result) {
    std::vector<std::string> violations;
    const int n = result.config.n;
    const int f = result.config.f;

    auto describe = [&](const std::string& what) {
        std::ostringstream os;
        os << result.config.protocol << " n=" << n << " f=" << f << " fault="
           << sim::fault_mode_name(result.config.fault.mode)
           << " seed=" << result.config.seed << ": " << what;
        violations.push_back(os.str());
    };

    // Batch agreement per epoch, and total order on the flattened logs.
    int reference = -1;
    for (int i = 0; i < n; ++i)
        if (result.correct[i]) {
            reference = i;
            break;
        }
    if (reference < 0)
        return violations;
    for (int i = reference + 1; i < n; ++i) {
        if (!result.correct[i])
            continue;
        const auto& a = result.delivered_by_epoch[reference];
        const auto& b = result.delivered_by_epoch[i];
        const std::size_t epochs = std::min(a.size(), b.size());
        for (std::size_t e = 0; e < epochs; ++e) {
            if (a[e] != b[e]) {
                describe("epoch " + std::to_string(e) + " batches differ between replicas " +
                         std::to_string(reference) + " and " + std::to_string(i));
                break;
            }
        }
        const auto& fa = result.delivered[reference];
        const auto& fb = result.delivered[i];
        const std::size_t common = std::min(fa.size(), fb.size());
        for (std::size_t k = 0; k < common; ++k) {
            if (!(fa[k] == fb[k])) {
                describe("total order violated at position " + std::to_string(k) +
                         " between replicas " + std::to_string(reference) + " and " +
                         std::to_string(i));
                break;
            }
        }
    }

    // Event-level checks: per-instance broadcast agreement and
    // integrity, per-instance decided-bit agreement, quorum rule.
    std::map<std::pair<std::uint32_t, std::uint16_t>, Bytes> rbc_digest;
    std::map<std::tuple<ReplicaId, std::uint32_t, std::uint16_t>, int> rbc_deliveries;
    std::map<std::pair<std::uint32_t, std::uint16_t>, int> aba_value;
    std::map<std::pair<ReplicaId, std::uint32_t>, int> ones;
    std::set<std::pair<ReplicaId, std::uint32_t>> completed;

    for (const auto& rec : result.events) {
        if (rec.replica < result.correct.size() && !result.correct[rec.replica])
            continue;
        const ProgressEvent& ev = rec.event;
        switch (ev.kind) {
        case ProgressEvent::Kind::rbc_deliver: {
            auto key = std::make_pair(ev.epoch, ev.instance);
            auto [it, inserted] = rbc_digest.emplace(key, ev.digest);
            if (!inserted && it->second != ev.digest)
                describe("rbc agreement violated in epoch " + std::to_string(ev.epoch) +
                         " instance " + std::to_string(ev.instance));
            auto& count = rbc_deliveries[{rec.replica, ev.epoch, ev.instance}];
            if (++count > 1)
                describe("rbc integrity violated: replica " + std::to_string(rec.replica) +
                         " delivered twice in epoch " + std::to_string(ev.epoch) +
                         " instance " + std::to_string(ev.instance));
            break;
        }
        case ProgressEvent::Kind::aba_decide: {
            auto key = std::make_pair(ev.epoch, ev.instance);
            auto [it, inserted] = aba_value.emplace(key, ev.value);
            if (!inserted && it->second != ev.value)
                describe("aba agreement violated in epoch " + std::to_string(ev.epoch) +
                         " instance " + std::to_string(ev.instance));
            if (ev.rounds > 64)
                describe("aba round cap exceeded in epoch " + std::to_string(ev.epoch) +
                         " instance " + std::to_string(ev.instance) + " (" +
                         std::to_string(ev.rounds) + " rounds)");
            if (ev.value == 1)
                ++ones[{rec.replica, ev.epoch}];
            break;
        }
        case ProgressEvent::Kind::epoch_done:
            completed.insert({rec.replica, ev.epoch});
            break;
        }
    }
    for (const auto& done : completed) {
        auto it = ones.find(done);
        const int have = it == ones.end() ? 0 : it->second;
        if (have < n - f)
            describe("quorum rule violated: replica " + std::to_string(done.first) +
                     " completed epoch " + std::to_string(done.second) + " with " +
                     std::to_string(have) + " ones");
    }
    return violations;
}

// ---------------------------------------------------------------

std::vector<CheckResult> check_coding(int random_messages) {
    std::vector<CheckResult> results;
    std::mt19937_64 rng(0xc0dec);

    // MDS: every k_data-subset of every (k_data, k_total <= 8) decodes.
    bool mds_ok = true;
    std::string mds_detail;
    long long subsets_checked = 0;
    for (int m = 0; m < random_messages && mds_ok; ++m) {
        const int k_total = 1 + static_cast<int>(rng() % 8);
        const int k_data = 1 + static_cast<int>(rng() % k_total);
        Bytes message = pattern_message(1 + rng() % 600, rng());
        auto blocks = coding::encode(message, k_data, k_total);
        std::vector<int> idx(k_data);
        for (int i = 0; i < k_data; ++i)
            idx[i] = i;
        while (mds_ok) {
            std::vector<coding::CodedBlock> subset;
            for (int i : idx)
                subset.push_back(blocks[i]);
            ++subsets_checked;
            if (coding::decode(subset, k_data, k_total) != message) {
                mds_ok = false;
                mds_detail = "subset decode mismatch at k=(" + std::to_string(k_data) +
                             "," + std::to_string(k_total) + ")";
            }
            int i = k_data - 1;
            while (i >= 0 && idx[i] == k_total - k_data + i)
                --i;
            if (i < 0)
                break;
            ++idx[i];
            for (int j = i + 1; j < k_data; ++j)
                idx[j] = idx[j - 1] + 1;
        }
    }
    if (mds_ok)
        mds_detail = std::to_string(subsets_checked) + " subset decodes over " +
                     std::to_string(random_messages) + " messages";
    results.push_back(make_result("coding.mds_round_trip", mds_ok, mds_detail));

    // Merkle: every single-bit tampering of (leaf, branch, index) rejected.
    // Index flips are judged against the committed digest layer: the
    // padding rule duplicates the last leaf digest, so an index landing
    // on an identical committed digest is a valid claim, not a forgery.
    bool merkle_ok = true;
    long long tamperings = 0;
    for (int count : {1, 2, 5, 8}) {
        std::vector<Bytes> leaves;
        for (int i = 0; i < count; ++i)
            leaves.push_back(pattern_message(24, rng()));
        auto tree = coding::merkle_build(leaves);

        std::size_t padded = 1;
        while (padded < static_cast<std::size_t>(count))
            padded <<= 1;
        std::vector<coding::Digest> layer;
        for (const auto& l : leaves) {
            Bytes tagged;
            tagged.push_back(0x00);
            tagged.insert(tagged.end(), l.begin(), l.end());
            layer.push_back(coding::sha256(tagged));
        }
        while (layer.size() < padded)
            layer.push_back(layer.back());

        for (int i = 0; i < count && merkle_ok; ++i) {
            const auto& proof = tree.proofs[i];
            if (!coding::merkle_verify(tree.root, proof, leaves[i])) {
                merkle_ok = false;
                break;
            }
            for (std::size_t byte = 0; byte < leaves[i].size() && merkle_ok; ++byte)
                for (int bit = 0; bit < 8; ++bit) {
                    Bytes tampered = leaves[i];
                    tampered[byte] ^= static_cast<std::uint8_t>(1u << bit);
                    ++tamperings;
                    if (coding::merkle_verify(tree.root, proof, tampered)) {
                        merkle_ok = false;
                        break;
                    }
                }
            for (std::size_t d = 0; d < proof.branch.size() && merkle_ok; ++d)
                for (std::size_t byte = 0; byte < 32 && merkle_ok; ++byte)
                    for (int bit = 0; bit < 8; ++bit) {
                        auto mutated = proof;
                        mutated.branch[d][byte] ^= static_cast<std::uint8_t>(1u << bit);
                        ++tamperings;
                        if (coding::merkle_verify(tree.root, mutated, leaves[i])) {
                            merkle_ok = false;
                            break;
                        }
                    }
            for (int bit = 0; bit < 20 && merkle_ok; ++bit) {
                auto mutated = proof;
                mutated.leaf_index ^= (1u << bit);
                ++tamperings;
                if (!coding::merkle_verify(tree.root, mutated, leaves[i]))
                    continue;
                // Accepted index flips must still bind to an identical
                // committed digest (a padding duplicate), never to a
                // different leaf.
                const bool same_claim = mutated.leaf_index < padded &&
                                        layer[mutated.leaf_index] == layer[proof.leaf_index];
                if (!same_claim)
                    merkle_ok = false;
            }
        }
    }
    results.push_back(make_result("coding.merkle_mutations", merkle_ok,
                                  std::to_string(tamperings) + " tamperings rejected"));
    return results;
}

std::vector<CheckResult> check_rbc_counts() {
    std::vector<CheckResult> results;

    struct Case {
        RbcKind variant;
        int n;
        int f;
        long long expect;
    };
    std::vector<Case> cases;
    for (int n : {4, 6, 8, 11, 16}) {
        cases.push_back({RbcKind::mbc, n, (n - 1) / 5, 1LL * n * n + n});
        cases.push_back({RbcKind::avid, n, (n - 1) / 3, 2LL * n * n + n});
    }
    for (int f : {1, 2, 3}) {
        const int n = 7 * f + 1;
        cases.push_back({RbcKind::mbc_l, n, f, 35LL * f * f + 17 * f + 2});
        cases.push_back({RbcKind::mbc, n, f, 49LL * f * f + 21 * f + 2});
    }
    // Learner variants beyond the headline formulas, against the
    // general closed form.
    for (int f : {1, 2}) {
        for (int n : {5 * f + 1, 7 * f + 1}) {
            Deployment dep{n, f, Resilience::r3f1};
            cases.push_back({RbcKind::avid_l, n, f, rbc::analytic_message_count(RbcKind::avid_l, dep)});
        }
    }

    for (const auto& c : cases) {
        Resilience res = c.variant == RbcKind::mbc || c.variant == RbcKind::mbc_l
                             ? (c.n >= 5 * c.f + 1 ? Resilience::r5f1 : Resilience::r3f1)
                             : Resilience::r3f1;
        Deployment dep{c.n, c.f, res};
        const long long analytic = rbc::analytic_message_count(c.variant, dep);
        bool ok = analytic == c.expect;
        std::uint64_t measured = 0;
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            measured = measure_rbc_messages(c.variant, dep, seed);
            ok = ok && measured == static_cast<std::uint64_t>(c.expect);
        }
        std::ostringstream name;
        name << "rbc.count." << rbc_kind_name(c.variant) << ".n" << c.n << ".f" << c.f;
        std::ostringstream detail;
        detail << "analytic=" << analytic << " measured=" << measured
               << " expect=" << c.expect;
        results.push_back(make_result(name.str(), ok, detail.str()));
    }
    return results;
}

std::vector<CheckResult> check_rbc_steps() {
    std::vector<CheckResult> results;

    struct Case {
        RbcKind variant;
        int n;
        int f;
        std::uint32_t active_depth;
        std::uint32_t learner_depth; // 0 = no learners
    };
    std::vector<Case> cases = {
        {RbcKind::mbc, 6, 1, 2, 0},    {RbcKind::mbc, 11, 2, 2, 0},
        {RbcKind::mbc, 16, 3, 2, 0},   {RbcKind::avid, 4, 1, 3, 0},
        {RbcKind::avid, 8, 2, 3, 0},   {RbcKind::avid, 16, 5, 3, 0},
        {RbcKind::mbc_l, 8, 1, 3, 3},  {RbcKind::mbc_l, 15, 2, 3, 3},
        {RbcKind::avid_l, 6, 1, 3, 4}, {RbcKind::avid_l, 8, 1, 3, 4},
        {RbcKind::avid_l, 15, 2, 3, 4},
    };

    for (const auto& c : cases) {
        Deployment dep{c.n, c.f, Resilience::r3f1};
        auto cfg = rbc::RbcConfig::make(dep, 0, c.variant);
        bool ok = true;
        std::ostringstream detail;
        for (std::uint64_t seed : {1ull, 7ull}) {
            RbcRunOptions options;
            options.variant = c.variant;
            options.dep = dep;
            options.message = pattern_message(250, seed);
            options.seed = seed;
            auto outcome = run_single_rbc(options);
            for (int i = 0; i < c.n; ++i) {
                if (!outcome.delivered[i]) {
                    ok = false;
                    detail << "replica " << i << " undelivered; ";
                    continue;
                }
                const std::uint32_t expect =
                    cfg.is_active(static_cast<ReplicaId>(i)) ? c.active_depth
                                                             : c.learner_depth;
                if (outcome.depth[i] != expect) {
                    ok = false;
                    detail << "replica " << i << " depth " << outcome.depth[i]
                           << " expect " << expect << "; ";
                }
            }
        }
        std::ostringstream name;
        name << "rbc.steps." << rbc_kind_name(c.variant) << ".n" << c.n << ".f" << c.f;
        results.push_back(make_result(name.str(), ok, detail.str()));
    }
    return results;
}

std::vector<CheckResult> check_rbc_safety(int seeds) {
    std::vector<CheckResult> results;

    struct Case {
        RbcKind variant;
        int n;
        int f;
    };
    const std::vector<Case> cases = {
        {RbcKind::mbc, 6, 1},   {RbcKind::avid, 4, 1},
        {RbcKind::mbc_l, 8, 1}, {RbcKind::avid_l, 6, 1},
    };

    for (const auto& c : cases) {
        Deployment dep{c.n, c.f, Resilience::r3f1};

        // Validity and agreement, failure-free, across seeds and
        // delay policies including adversarial reorder.
        bool ok = true;
        std::string detail;
        for (int s = 1; s <= seeds && ok; ++s) {
            for (auto kind : {sim::DelayKind::uniform, sim::DelayKind::adversarial}) {
                RbcRunOptions options;
                options.variant = c.variant;
                options.dep = dep;
                options.message = pattern_message(60 + s, s);
                options.seed = s;
                options.delay.kind = kind;
                auto outcome = run_single_rbc(options);
                for (int i = 0; i < c.n; ++i) {
                    if (!outcome.drained || !outcome.delivered[i] ||
                        *outcome.delivered[i] != options.message) {
                        ok = false;
                        detail = "delivery mismatch at replica " + std::to_string(i) +
                                 " seed " + std::to_string(s);
                        break;
                    }
                }
            }
        }
        results.push_back(make_result(
            "rbc.validity." + std::string(rbc_kind_name(c.variant)), ok, detail));

        // Crashed sender: nothing delivers anywhere.
        bool crash_ok = true;
        for (int s = 1; s <= std::min(seeds, 5); ++s) {
            RbcRunOptions options;
            options.variant = c.variant;
            options.dep = dep;
            options.message = pattern_message(64, s);
            options.seed = s;
            options.sender_crash = true;
            auto outcome = run_single_rbc(options);
            for (const auto& d : outcome.delivered)
                crash_ok = crash_ok && !d;
        }
        results.push_back(make_result(
            "rbc.crashed_sender." + std::string(rbc_kind_name(c.variant)), crash_ok));

        // Split-root attack: never two distinct delivered values.
        bool split_ok = true;
        for (int s = 1; s <= seeds && split_ok; ++s) {
            RbcRunOptions options;
            options.variant = c.variant;
            options.dep = dep;
            options.message = pattern_message(80, s);
            options.split_second = pattern_message(80, s + 77777);
            options.seed = s;
            auto outcome = run_single_rbc(options);
            std::set<Bytes> values;
            for (const auto& d : outcome.delivered)
                if (d)
                    values.insert(*d);
            if (values.size() > 1)
                split_ok = false;
        }
        results.push_back(make_result(
            "rbc.split_root_agreement." + std::string(rbc_kind_name(c.variant)),
            split_ok));
    }

    // Inconsistent-encoding attack: blocks committed honestly in a
    // tree but not forming a codeword. Every correct replica aborts.
    {
        Deployment dep{6, 1, Resilience::r5f1};
        auto cfg = rbc::RbcConfig::make(dep, 0, RbcKind::mbc);
        Bytes message = pattern_message(200, 42);
        auto blocks = coding::encode(message, cfg.k_data, cfg.k_total);
        blocks[5].data[0] ^= 0x5a; // not a codeword any more
        std::vector<Bytes> leaves;
        for (const auto& b : blocks)
            leaves.push_back(b.data);
        auto tree = coding::merkle_build(leaves);
        std::vector<Envelope> envs;
        for (int j = 0; j < dep.n; ++j) {
            rbc::RbcMessage msg;
            msg.type = rbc::RbcMsgType::init;
            msg.root = tree.root;
            msg.leaf_index = static_cast<std::uint16_t>(j);
            msg.branch = tree.proofs[j].branch;
            msg.block = blocks[j].data;
            Envelope env;
            env.sender = 0;
            env.receiver = static_cast<ReplicaId>(j);
            env.epoch = 0;
            env.tag = InstanceTag{Phase::rbc, 0};
            env.payload = msg.encode();
            env.depth = 1;
            envs.push_back(std::move(env));
        }
        bool ok = true;
        for (int s = 1; s <= std::min(seeds, 10); ++s) {
            RbcRunOptions options;
            options.variant = RbcKind::mbc;
            options.dep = dep;
            options.message = message;
            options.sender_envelopes = envs;
            options.seed = s;
            auto outcome = run_single_rbc(options);
            for (int i = 0; i < dep.n; ++i)
                ok = ok && !outcome.delivered[i] && outcome.aborted[i];
        }
        results.push_back(make_result("rbc.garbled_encoding_aborts.mbc", ok));
    }
    return results;
}

std::vector<CheckResult> check_aba_onestep(int seeds) {
    std::vector<CheckResult> results;

    struct Case {
        std::string name;
        Deployment dep;
        bool crash_f; // crash f replicas from the start
    };
    const std::vector<Case> cases = {
        {"w1s.n6", {6, 1, Resilience::r5f1}, false},
        {"w1s.n11", {11, 2, Resilience::r5f1}, false},
        {"s1s.n8", {8, 1, Resilience::r7f1}, true},
        {"s1s.n15", {15, 2, Resilience::r7f1}, true},
    };

    for (const auto& c : cases) {
        bool ok = true;
        std::string detail;
        for (int s = 1; s <= seeds && ok; ++s) {
            const int value = s % 2; // unanimity for both bits
            AbaRunOptions options;
            options.dep = c.dep;
            options.one_step = true;
            options.inputs.assign(c.dep.n, value);
            options.seed = s;
            if (c.crash_f) {
                options.fault.mode = sim::FaultMode::crash;
                for (int v = 0; v < c.dep.f; ++v)
                    options.fault.victims.push_back(
                        static_cast<ReplicaId>(c.dep.n - 1 - v));
            }
            auto outcome = run_single_aba(options);
            for (int i = 0; i < c.dep.n; ++i) {
                if (options.fault.is_victim(static_cast<ReplicaId>(i)))
                    continue;
                if (!outcome.decisions[i] || *outcome.decisions[i] != value ||
                    !outcome.one_step[i] || outcome.depth[i] != 1) {
                    ok = false;
                    detail = "seed " + std::to_string(s) + " replica " +
                             std::to_string(i) + ": value/depth/one-step mismatch";
                    break;
                }
            }
            if (!outcome.drained) {
                ok = false;
                detail = "seed " + std::to_string(s) + ": event cap hit";
            }
        }
        results.push_back(make_result("aba.onestep." + c.name, ok, detail));
    }
    return results;
}

std::vector<CheckResult> check_aba_agreement(int seeds) {
    std::vector<CheckResult> results;

    struct Case {
        std::string name;
        Deployment dep;
        bool one_step;
        sim::FaultMode mode;
        bool random_inputs;
        sim::DelayKind delay;
    };
    const std::vector<Case> cases = {
        {"cobalt.unanimous.silent_byz", {4, 1, Resilience::r3f1}, false,
         sim::FaultMode::crash, false, sim::DelayKind::uniform},
        {"cobalt.mixed", {4, 1, Resilience::r3f1}, false, sim::FaultMode::none, true,
         sim::DelayKind::uniform},
        {"w1s.mixed", {6, 1, Resilience::r5f1}, true, sim::FaultMode::none, true,
         sim::DelayKind::uniform},
        {"s1s.mixed", {8, 1, Resilience::r7f1}, true, sim::FaultMode::none, true,
         sim::DelayKind::uniform},
        {"w1s.byz_votes", {6, 1, Resilience::r5f1}, true, sim::FaultMode::byz_aba,
         true, sim::DelayKind::uniform},
        {"cobalt.mixed.adversarial", {4, 1, Resilience::r3f1}, false,
         sim::FaultMode::none, true, sim::DelayKind::adversarial},
        {"w1s.mixed.adversarial", {6, 1, Resilience::r5f1}, true, sim::FaultMode::none,
         true, sim::DelayKind::adversarial},
    };

    for (const auto& c : cases) {
        bool ok = true;
        std::string detail;
        std::uint16_t max_rounds = 0;
        for (int s = 1; s <= seeds && ok; ++s) {
            AbaRunOptions options;
            options.dep = c.dep;
            options.one_step = c.one_step;
            options.seed = s;
            options.delay.kind = c.delay;
            std::mt19937_64 rng(s * 977u);
            options.inputs.resize(c.dep.n);
            for (auto& v : options.inputs)
                v = c.random_inputs ? static_cast<int>(rng() % 2) : 1;
            if (c.mode != sim::FaultMode::none) {
                options.fault.mode = c.mode;
                for (int v = 0; v < c.dep.f; ++v)
                    options.fault.victims.push_back(
                        static_cast<ReplicaId>(c.dep.n - 1 - v));
            }
            auto outcome = run_single_aba(options);
            if (!outcome.drained) {
                ok = false;
                detail = "seed " + std::to_string(s) + " hit the event cap";
                break;
            }
            std::set<int> decided;
            std::set<int> correct_inputs;
            for (int i = 0; i < c.dep.n; ++i) {
                if (options.fault.is_victim(static_cast<ReplicaId>(i)))
                    continue;
                correct_inputs.insert(options.inputs[i]);
                if (!outcome.decisions[i]) {
                    ok = false;
                    detail = "seed " + std::to_string(s) + " replica " +
                             std::to_string(i) + " undecided";
                    break;
                }
                decided.insert(*outcome.decisions[i]);
                max_rounds = std::max(max_rounds, outcome.rounds[i]);
                if (outcome.rounds[i] > 64) {
                    ok = false;
                    detail = "seed " + std::to_string(s) + " exceeded the round cap";
                }
            }
            if (ok && decided.size() != 1) {
                ok = false;
                detail = "seed " + std::to_string(s) + " split decision";
            }
            if (ok && !correct_inputs.count(*decided.begin())) {
                ok = false;
                detail = "seed " + std::to_string(s) + " decided a value no correct replica proposed";
            }
        }
        if (ok)
            detail = "max rounds " + std::to_string(max_rounds);
        results.push_back(make_result("aba.agreement." + c.name, ok, detail));
    }
    return results;
}

std::vector<CheckResult> check_acs_safety(int seeds, int epochs) {
    std::vector<CheckResult> results;

    struct RunSpec {
        std::string protocol;
        sim::FaultMode mode;
        std::uint64_t seed;
    };
    std::vector<RunSpec> specs;
    for (const auto& proto : all_protocols())
        for (auto mode : {sim::FaultMode::none, sim::FaultMode::crash,
                          sim::FaultMode::byz_aba, sim::FaultMode::byz_rbc})
            for (int s = 1; s <= seeds; ++s)
                specs.push_back({proto.name, mode, static_cast<std::uint64_t>(s)});

    std::vector<std::string> violations(specs.size());
    std::vector<std::string> liveness(specs.size());
    std::vector<std::string> quorum(specs.size());

    #pragma omp parallel for schedule(dynamic)
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(specs.size()); ++k) {
        const auto& spec = specs[k];
        sim::RunConfig config;
        config.protocol = spec.protocol;
        config.f = 1; // smallest deployment per protocol
        config.batch = 24;
        config.tx_size = 32;
        config.epochs = epochs;
        config.seed = spec.seed;
        config.fault.mode = spec.mode;
        config.resolve();
        if (spec.mode != sim::FaultMode::none)
            config.fault.victims = {static_cast<ReplicaId>(config.n - 1)};

        auto result = sim::run(config);
        auto v = verify_run(result);
        for (const auto& violation : v) {
            auto& slot = violation.find("quorum rule") != std::string::npos ? quorum[k]
                                                                            : violations[k];
            if (slot.empty())
                slot = violation;
        }
        if (!result.metrics.liveness_ok)
            liveness[k] = spec.protocol + "/" +
                          std::string(sim::fault_mode_name(spec.mode)) + " seed " +
                          std::to_string(spec.seed) + ": " + result.metrics.stuck;
    }

    auto summarize = [&](const std::vector<std::string>& slots, const std::string& name,
                         const std::string& clean) {
        int count = 0;
        std::string first;
        for (const auto& s : slots)
            if (!s.empty()) {
                ++count;
                if (first.empty())
                    first = s;
            }
        results.push_back(make_result(name, count == 0, count == 0 ? clean : first));
    };
    summarize(violations, "acs.safety_sweep",
              std::to_string(specs.size()) + " runs clean");
    summarize(quorum, "acs.quorum_rule", "every completed epoch had >= n-f ones");
    summarize(liveness, "acs.liveness", "no run hit the event cap");
    return results;
}

std::vector<CheckResult> check_determinism(int samples) {
    std::vector<CheckResult> results;
    const std::vector<std::string> protocols = {"beat", "mib5", "mib5b", "mib7", "mib7c"};
    const std::vector<sim::FaultMode> modes = {
        sim::FaultMode::none, sim::FaultMode::crash, sim::FaultMode::byz_aba,
        sim::FaultMode::byz_rbc};
    const std::vector<sim::DelayKind> delays = {sim::DelayKind::uniform,
                                                sim::DelayKind::fixed_link,
                                                sim::DelayKind::adversarial};

    bool ok = true;
    std::string detail;
    for (int k = 0; k < samples && ok; ++k) {
        sim::RunConfig config;
        config.protocol = protocols[k % protocols.size()];
        config.f = 1;
        config.batch = 18;
        config.tx_size = 16;
        config.epochs = 2;
        config.seed = 1000 + 37 * k;
        config.fault.mode = modes[k % modes.size()];
        config.delay.kind = delays[k % delays.size()];
        config.resolve();
        if (config.fault.mode != sim::FaultMode::none)
            config.fault.victims = {static_cast<ReplicaId>(config.n - 1)};

        auto a = sim::run(config);
        auto b = sim::run(config);
        if (a.metrics_json() != b.metrics_json()) {
            ok = false;
            detail = config.protocol + " seed " + std::to_string(config.seed) +
                     ": metrics differ between executions";
        }
        if (ok) {
            for (int i = 0; i < config.n; ++i)
                if (!(a.delivered[i] == b.delivered[i])) {
                    ok = false;
                    detail = config.protocol + " seed " + std::to_string(config.seed) +
                             ": delivery logs differ";
                    break;
                }
        }
    }
    if (ok)
        detail = std::to_string(samples) + " configs replayed byte-identically";
    results.push_back(make_result("netsim.determinism", ok, detail));
    return results;
}

std::vector<CheckResult> check_ordering() {
    std::vector<CheckResult> results;
    for (int n : {16, 31}) {
        bool ok = true;
        std::string detail;
        for (std::uint64_t seed : {1ull, 2ull}) {
            auto run_one = [&](const std::string& protocol) {
                sim::RunConfig config;
                config.protocol = protocol;
                config.n = n;
                config.batch = 2 * n;
                config.tx_size = 32;
                config.epochs = 2;
                config.seed = seed;
                return sim::run(config);
            };
            auto mib5 = run_one("mib5");
            auto beat = run_one("beat");
            if (!mib5.metrics.liveness_ok || !beat.metrics.liveness_ok) {
                ok = false;
                detail = "run hit the event cap";
                break;
            }
            const std::size_t epochs =
                std::min(mib5.metrics.epochs.size(), beat.metrics.epochs.size());
            for (std::size_t e = 0; e < epochs; ++e) {
                const auto& m5 = mib5.metrics.epochs[e];
                const auto& bt = beat.metrics.epochs[e];
                if (!(m5.max_depth < bt.max_depth && m5.messages < bt.messages)) {
                    ok = false;
                    std::ostringstream os;
                    os << "n=" << n << " seed=" << seed << " epoch=" << e
                       << ": mib5 depth/messages " << m5.max_depth << "/" << m5.messages
                       << " vs beat " << bt.max_depth << "/" << bt.messages;
                    detail = os.str();
                }
            }
        }
        results.push_back(make_result("acs.ordering.n" + std::to_string(n), ok, detail));
    }
    return results;
}

std::vector<CheckResult> run_scope(const std::string& scope, int seeds) {
    std::vector<CheckResult> results;
    auto append = [&](std::vector<CheckResult>&& more) {
        for (auto& r : more)
            results.push_back(std::move(r));
    };
    const bool all = scope == "all";
    if (all || scope == "coding")
        append(check_coding(seeds > 0 ? seeds : 1000));
    if (all || scope == "rbc") {
        append(check_rbc_counts());
        append(check_rbc_steps());
        append(check_rbc_safety(seeds > 0 ? seeds : 25));
    }
    if (all || scope == "aba") {
        append(check_aba_onestep(seeds > 0 ? seeds : 200));
        append(check_aba_agreement(seeds > 0 ? seeds : 1000));
    }
    if (all || scope == "acs") {
        append(check_acs_safety(seeds > 0 ? seeds : 100));
        append(check_ordering());
    }
    if (all || scope == "netsim")
        append(check_determinism(20));
    if (results.empty())
        throw ConfigError("unknown check scope '" + scope +
                          "' (valid: coding, rbc, aba, acs, netsim, all)");
    return results;
}

} // namespace mib::checks
