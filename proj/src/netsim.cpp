#include "mib/netsim.hpp"

#include "mib/aba.hpp"
#include "mib/acs.hpp"
#include "mib/coding.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace mib::sim {

std::string_view fault_mode_name(FaultMode m) {
    switch (m) {
    case FaultMode::none: return "none";
    case FaultMode::crash: return "crash";
    case FaultMode::byz_aba: return "byz-aba";
    case FaultMode::byz_rbc: return "byz-rbc";
    }
    return "?";
}

FaultMode fault_mode_from_name(std::string_view name) {
    if (name == "none") return FaultMode::none;
    if (name == "crash") return FaultMode::crash;
    if (name == "byz-aba") return FaultMode::byz_aba;
    if (name == "byz-rbc") return FaultMode::byz_rbc;
    throw ConfigError("unknown fault mode '" + std::string(name) +
                      "' (valid: none, crash, byz-aba, byz-rbc)");
}

std::uint64_t FaultPlan::effective_crash_time() const {
    if (crash_time)
        return *crash_time;
    return mode == FaultMode::crash ? 0 : UINT64_MAX;
}

bool FaultPlan::is_victim(ReplicaId id) const {
    return std::find(victims.begin(), victims.end(), id) != victims.end();
}

std::string delay_policy_name(const DelayPolicy& p) {
    std::ostringstream os;
    switch (p.kind) {
    case DelayKind::uniform:
        os << "uniform(" << p.lo << "," << p.hi << ")";
        break;
    case DelayKind::fixed_link:
        os << "fixed(" << p.lo << "," << p.hi << ")";
        break;
    case DelayKind::adversarial:
        os << "adversarial";
        break;
    }
    return os.str();
}

DelayPolicy delay_policy_from_name(std::string_view text) {
    DelayPolicy p;
    if (text == "adversarial") {
        p.kind = DelayKind::adversarial;
        return p;
    }
    auto parse_window = [&](std::string_view body) {
        auto comma = body.find(',');
        if (comma == std::string_view::npos)
            throw ConfigError("delay window must be '(lo,hi)'");
        p.lo = std::stoull(std::string(body.substr(0, comma)));
        p.hi = std::stoull(std::string(body.substr(comma + 1)));
        if (p.hi < p.lo)
            throw ConfigError("delay window requires lo <= hi");
    };
    if (text.starts_with("uniform(") && text.ends_with(")")) {
        p.kind = DelayKind::uniform;
        parse_window(text.substr(8, text.size() - 9));
        return p;
    }
    if (text.starts_with("fixed(") && text.ends_with(")")) {
        p.kind = DelayKind::fixed_link;
        parse_window(text.substr(6, text.size() - 7));
        return p;
    }
    if (text == "uniform") {
        p.kind = DelayKind::uniform;
        return p;
    }
    if (text == "fixed") {
        p.kind = DelayKind::fixed_link;
        return p;
    }
    throw ConfigError("unknown delay policy '" + std::string(text) +
                      "' (valid: uniform(lo,hi), fixed(lo,hi), adversarial)");
}

Simulation::Simulation(int n, DelayPolicy delay, FaultPlan fault, std::uint64_t seed,
                       std::uint64_t event_cap)
    : n_(n), delay_(delay), fault_(fault), event_cap_(event_cap),
      rng_(seed ^ 0x6d69622d73696dULL), stacks_(n) {}

void Simulation::add_node(std::unique_ptr<Node> node) {
    nodes_.push_back(std::move(node));
}

bool Simulation::crashed(ReplicaId id, std::uint64_t at) const {
    return fault_.is_victim(id) && at >= fault_.effective_crash_time();
}

void Simulation::rewrite_byzantine(Envelope& env) const {
    if (fault_.mode != FaultMode::byz_aba || !fault_.is_victim(env.sender))
        return;
    if (env.tag.phase != Phase::aba)
        return;
    auto msg = aba::AbaMessage::decode(env.payload);
    if (!msg)
        return;
    if (msg->type == aba::AbaMsgType::bval ||
        msg->type == aba::AbaMsgType::bval1step) {
        // Inconsistent votes: 0 to even-index peers, 1 to odd.
        msg->value = static_cast<std::uint8_t>(env.receiver % 2);
        env.payload = msg->encode();
    }
}

std::uint64_t Simulation::pick_delay(const Envelope& env) {
    const std::uint64_t span = delay_.hi - delay_.lo + 1;
    switch (delay_.kind) {
    case DelayKind::uniform:
        return delay_.lo + rng_() % span;
    case DelayKind::fixed_link: {
        // One stable delay per ordered (sender, receiver) pair.
        std::uint64_t h = 0x9e3779b97f4a7c15ULL;
        h ^= env.sender + 0x517cc1b727220a95ULL + (h << 6) + (h >> 2);
        h ^= env.receiver + 0x2545f4914f6cdd1dULL + (h << 6) + (h >> 2);
        return delay_.lo + h % span;
    }
    case DelayKind::adversarial:
        return 0; // unused: stacks carry the order
    }
    return delay_.lo;
}

void Simulation::dispatch(Emitted&& emitted, ReplicaId from, std::uint64_t now) {
    for (auto& ev : emitted.events)
        events_.push_back(RecordedEvent{now, from, std::move(ev)});
    for (auto& env : emitted.out) {
        rewrite_byzantine(env);
        auto key = std::make_pair(env.epoch, std::make_pair(env.tag.phase, env.tag.index));
        auto& slot = counts_[key];
        slot.first += 1;
        slot.second += kEnvelopeHeaderBytes + env.payload.size();
        Pending p{now + (delay_.kind == DelayKind::adversarial ? 0 : pick_delay(env)),
                  seq_++, std::move(env)};
        if (delay_.kind == DelayKind::adversarial) {
            stacks_[p.env.receiver].push_back(std::move(p));
            ++stacked_;
        } else {
            queue_.push(std::move(p));
        }
    }
}

std::optional<Simulation::Pending> Simulation::pop() {
    if (delay_.kind == DelayKind::adversarial) {
        if (stacked_ == 0)
            return std::nullopt;
        // Round-robin across recipients, newest message first. Every
        // stack drains because the total push count per run is finite.
        for (std::size_t step = 0; step < stacks_.size(); ++step) {
            auto& stack = stacks_[stack_cursor_];
            stack_cursor_ = (stack_cursor_ + 1) % stacks_.size();
            if (!stack.empty()) {
                Pending p = std::move(stack.back());
                stack.pop_back();
                --stacked_;
                p.at = now_ + 1;
                return p;
            }
        }
        return std::nullopt;
    }
    if (queue_.empty())
        return std::nullopt;
    Pending p = queue_.top();
    queue_.pop();
    return p;
}

bool Simulation::run() {
    if (static_cast<int>(nodes_.size()) != n_)
        throw ProtocolMisuse("simulation node count mismatch");
    for (int i = 0; i < n_; ++i) {
        if (crashed(static_cast<ReplicaId>(i), 0))
            continue;
        dispatch(nodes_[i]->start(), static_cast<ReplicaId>(i), 0);
    }
    while (auto p = pop()) {
        if (++events_processed_ > event_cap_)
            return false;
        now_ = p->at;
        const ReplicaId to = p->env.receiver;
        if (crashed(to, now_)) {
            ++dropped_crashed_;
            continue;
        }
        dispatch(nodes_[to]->handle(p->env), to, now_);
    }
    return true;
}

std::vector<EpochMetrics> assemble_epoch_metrics(const Simulation& simulation,
                                                 const std::vector<bool>& correct) {
    std::vector<EpochMetrics> epochs;
    auto at = [&](std::uint32_t e) -> EpochMetrics& {
        if (epochs.size() <= e)
            epochs.resize(e + 1);
        return epochs[e];
    };

    for (const auto& [key, count] : simulation.message_counts()) {
        EpochMetrics& em = at(key.first);
        auto& inst = em.instances[key.second];
        inst.messages = count.first;
        inst.bytes = count.second;
        em.messages += count.first;
        em.bytes += count.second;
    }

    // Track one-step unanimity per agreement instance.
    std::map<std::pair<std::uint32_t, std::uint16_t>, bool> aba_all_onestep;
    std::map<std::uint32_t, std::uint64_t> prev_done_min;

    for (const auto& rec : simulation.events()) {
        if (rec.replica < correct.size() && !correct[rec.replica])
            continue;
        const ProgressEvent& ev = rec.event;
        EpochMetrics& em = at(ev.epoch);
        switch (ev.kind) {
        case ProgressEvent::Kind::rbc_deliver: {
            auto& inst = em.instances[{Phase::rbc, ev.instance}];
            inst.max_depth = std::max(inst.max_depth, ev.depth);
            em.max_depth = std::max(em.max_depth, ev.depth);
            break;
        }
        case ProgressEvent::Kind::aba_decide: {
            auto& inst = em.instances[{Phase::aba, ev.instance}];
            inst.max_depth = std::max(inst.max_depth, ev.depth);
            inst.max_rounds = std::max(inst.max_rounds, ev.rounds);
            em.max_depth = std::max(em.max_depth, ev.depth);
            em.max_aba_rounds = std::max(em.max_aba_rounds, ev.rounds);
            auto [it, inserted] = aba_all_onestep.emplace(
                std::make_pair(ev.epoch, ev.instance), ev.one_step);
            if (!inserted)
                it->second = it->second && ev.one_step;
            break;
        }
        case ProgressEvent::Kind::epoch_done: {
            em.end_time = std::max(em.end_time, rec.time);
            auto [it, inserted] = prev_done_min.emplace(ev.epoch, rec.time);
            if (!inserted)
                it->second = std::min(it->second, rec.time);
            break;
        }
        }
    }

    for (auto& [key, all_one] : aba_all_onestep) {
        EpochMetrics& em = at(key.first);
        em.instances[{Phase::aba, key.second}].one_step_everywhere = all_one;
        if (all_one)
            ++em.onestep_instances;
    }
    for (std::size_t e = 0; e < epochs.size(); ++e) {
        epochs[e].start_time =
            e == 0 ? 0 : prev_done_min.count(static_cast<std::uint32_t>(e - 1))
                             ? prev_done_min[static_cast<std::uint32_t>(e - 1)]
                             : 0;
        if (epochs[e].end_time >= epochs[e].start_time)
            epochs[e].latency = epochs[e].end_time - epochs[e].start_time;
    }
    return epochs;
}

void RunConfig::resolve() {
    const auto& proto = protocol_registry(protocol);
    const int den = resilience_denominator(proto.resilience);
    if (n <= 0 && f < 0)
        throw ConfigError("one of n or f is required");
    if (n > 0 && f < 0)
        f = (n - 1) / den;
    else if (n <= 0)
        n = den * f + 1;
}

Deployment RunConfig::deployment() const {
    const auto& proto = protocol_registry(protocol);
    return Deployment{n, f, proto.resilience};
}

void RunConfig::validate() const {
    deployment().validate();
    if (static_cast<int>(fault.victims.size()) > f)
        throw ConfigError("fault plan names " + std::to_string(fault.victims.size()) +
                          " victims, budget is f=" + std::to_string(f));
    for (ReplicaId v : fault.victims)
        if (v >= n)
            throw ConfigError("fault victim index out of range");
    if (epochs < 1)
        throw ConfigError("epochs must be positive");
    if (batch < 0)
        throw ConfigError("batch must be non-negative");
}

std::uint64_t default_event_cap() {
    if (const char* env = std::getenv("MIB_EVENT_CAP")) {
        char* end = nullptr;
        const std::uint64_t cap = std::strtoull(env, &end, 10);
        if (end && *end == '\0' && cap > 0)
            return cap;
    }
    return 10'000'000;
}

namespace {

class ReplicaNode : public Node {
public:
    explicit ReplicaNode(std::unique_ptr<acs::Replica> replica)
        : replica_(std::move(replica)) {}

    Emitted start() override { return replica_->start(); }
    Emitted handle(const Envelope& env) override { return replica_->handle(env); }
    std::uint64_t dropped_invalid() const override { return replica_->dropped_invalid(); }
    acs::Replica& replica() { return *replica_; }

private:
    std::unique_ptr<acs::Replica> replica_;
};

Bytes coin_seed_for(std::uint64_t seed) {
    Bytes out(8);
    for (int i = 0; i < 8; ++i)
        out[i] = static_cast<std::uint8_t>(seed >> (8 * (7 - i)));
    return out;
}

} // namespace

RunResult run(const RunConfig& input) {
    RunConfig config = input;
    config.resolve();
    config.validate();

    const auto& proto = protocol_registry(config.protocol);
    Deployment dep = config.deployment();
    aba::CoinSource coin(coin_seed_for(config.seed));

    acs::AcsConfig acfg;
    acfg.protocol = proto;
    acfg.dep = dep;
    acfg.batch_B = config.batch;
    acfg.epochs = config.epochs;
    acfg.run_seed = config.seed;
    acfg.coin = &coin;

    Simulation simulation(dep.n, config.delay, config.fault, config.seed,
                          config.event_cap);
    std::vector<ReplicaNode*> raw;
    std::mt19937_64 payload_rng(config.seed * 0x9e3779b97f4a7c15ULL + 1);
    for (int i = 0; i < dep.n; ++i) {
        auto replica = std::make_unique<acs::Replica>(acfg, static_cast<ReplicaId>(i));
        // Saturated synthetic workload: B distinct transactions per
        // replica, ids partitioned by proposer.
        const int prefill = config.prefill < 0 ? config.batch : config.prefill;
        for (int k = 0; k < prefill; ++k) {
            Transaction tx;
            tx.id = (std::uint64_t(i + 1) << 32) | static_cast<std::uint32_t>(k);
            tx.payload.resize(config.tx_size);
            for (auto& b : tx.payload)
                b = static_cast<std::uint8_t>(payload_rng());
            replica->submit(std::move(tx));
        }
        for (const auto& [tx, targets] : config.injected)
            if (std::find(targets.begin(), targets.end(), i) != targets.end())
                replica->submit(tx);
        if (config.fault.mode == FaultMode::byz_rbc && config.fault.is_victim(i))
            replica->set_rbc_split(true);
        auto node = std::make_unique<ReplicaNode>(std::move(replica));
        raw.push_back(node.get());
        simulation.add_node(std::move(node));
    }

    RunResult result;
    result.config = config;
    const bool within_cap = simulation.run();

    result.correct.resize(dep.n, true);
    for (ReplicaId v : config.fault.victims)
        if (config.fault.mode != FaultMode::none)
            result.correct[v] = false;

    result.metrics.epochs = assemble_epoch_metrics(simulation, result.correct);
    result.metrics.events_processed = simulation.events_processed();
    result.metrics.dropped_crashed = simulation.dropped_crashed();
    result.metrics.liveness_ok = within_cap;
    result.events = simulation.events();
    for (int i = 0; i < dep.n; ++i)
        result.metrics.dropped_invalid += raw[i]->dropped_invalid();

    result.delivered.resize(dep.n);
    result.delivered_by_epoch.resize(dep.n);
    for (int i = 0; i < dep.n; ++i) {
        result.delivered_by_epoch[i] = raw[i]->replica().delivered_log();
        for (const auto& batch : result.delivered_by_epoch[i])
            result.delivered[i].insert(result.delivered[i].end(), batch.begin(),
                                       batch.end());
    }

    // Liveness audit: with the queue drained, every correct replica
    // must have completed every epoch.
    if (within_cap) {
        for (int i = 0; i < dep.n; ++i) {
            if (!result.correct[i])
                continue;
            if (!raw[i]->replica().finished()) {
                result.metrics.liveness_ok = false;
                result.metrics.stuck = "replica " + std::to_string(i) + " stuck at " +
                                       raw[i]->replica().stuck_instance();
                break;
            }
        }
    } else {
        for (int i = 0; i < dep.n; ++i) {
            if (result.correct[i] && !raw[i]->replica().finished()) {
                result.metrics.stuck = "event cap hit; replica " + std::to_string(i) +
                                       " stuck at " + raw[i]->replica().stuck_instance();
                break;
            }
        }
        if (result.metrics.stuck.empty())
            result.metrics.stuck = "event cap hit";
    }
    return result;
}

std::string RunResult::metrics_json() const {
    nlohmann::json j;
    j["protocol"] = config.protocol;
    j["n"] = config.n;
    j["f"] = config.f;
    j["fault"] = std::string(fault_mode_name(config.fault.mode));
    j["victims"] = config.fault.victims;
    j["delay"] = delay_policy_name(config.delay);
    j["seed"] = config.seed;
    j["batch"] = config.batch;
    j["epochs_requested"] = config.epochs;
    j["events"] = metrics.events_processed;
    j["dropped_invalid"] = metrics.dropped_invalid;
    j["dropped_crashed"] = metrics.dropped_crashed;
    j["liveness_ok"] = metrics.liveness_ok;
    if (!metrics.stuck.empty())
        j["stuck"] = metrics.stuck;

    nlohmann::json epochs = nlohmann::json::array();
    for (std::size_t e = 0; e < metrics.epochs.size(); ++e) {
        const auto& em = metrics.epochs[e];
        nlohmann::json je;
        je["epoch"] = e;
        je["latency"] = em.latency;
        je["messages"] = em.messages;
        je["bytes"] = em.bytes;
        je["max_depth"] = em.max_depth;
        je["aba_rounds"] = em.max_aba_rounds;
        je["onestep_instances"] = em.onestep_instances;
        nlohmann::json insts = nlohmann::json::array();
        for (const auto& [key, inst] : em.instances) {
            nlohmann::json ji;
            ji["phase"] = key.first == Phase::rbc ? "rbc" : "aba";
            ji["instance"] = key.second;
            ji["messages"] = inst.messages;
            ji["bytes"] = inst.bytes;
            ji["max_depth"] = inst.max_depth;
            if (key.first == Phase::aba) {
                ji["rounds"] = inst.max_rounds;
                ji["one_step"] = inst.one_step_everywhere;
            }
            insts.push_back(std::move(ji));
        }
        je["instances"] = std::move(insts);
        epochs.push_back(std::move(je));
    }
    j["epochs"] = std::move(epochs);
    return j.dump(2);
}

std::map<std::tuple<std::uint32_t, Phase, std::uint16_t>, DepthStats>
depth_report(const RunResult& result) {
    std::map<std::tuple<std::uint32_t, Phase, std::uint16_t>, std::vector<std::uint32_t>>
        samples;
    for (const auto& rec : result.events) {
        if (rec.replica < result.correct.size() && !result.correct[rec.replica])
            continue;
        const ProgressEvent& ev = rec.event;
        if (ev.kind == ProgressEvent::Kind::rbc_deliver)
            samples[{ev.epoch, Phase::rbc, ev.instance}].push_back(ev.depth);
        else if (ev.kind == ProgressEvent::Kind::aba_decide)
            samples[{ev.epoch, Phase::aba, ev.instance}].push_back(ev.depth);
    }
    std::map<std::tuple<std::uint32_t, Phase, std::uint16_t>, DepthStats> report;
    for (auto& [key, depths] : samples) {
        std::sort(depths.begin(), depths.end());
        DepthStats stats;
        stats.samples = static_cast<int>(depths.size());
        stats.min = depths.front();
        stats.max = depths.back();
        stats.median = depths[depths.size() / 2];
        report[key] = stats;
    }
    return report;
}

std::string RunResult::csv_header() {
    return "protocol,n,f,fault_mode,seed,latency,messages,bytes,max_depth,aba_rounds";
}

std::vector<std::string> RunResult::csv_rows() const {
    std::vector<std::string> rows;
    for (const auto& em : metrics.epochs) {
        std::ostringstream os;
        os << config.protocol << ',' << config.n << ',' << config.f << ','
           << fault_mode_name(config.fault.mode) << ',' << config.seed << ','
           << em.latency << ',' << em.messages << ',' << em.bytes << ','
           << em.max_depth << ',' << em.max_aba_rounds;
        rows.push_back(os.str());
    }
    return rows;
}

} // namespace mib::sim
