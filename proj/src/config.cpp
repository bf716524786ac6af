#include "mib/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mib::cli {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(value);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

long long parse_int(const std::string& value, int line, const std::string& key) {
    try {
        std::size_t used = 0;
        long long v = std::stoll(value, &used);
        if (used != value.size())
            throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": field '" + key +
                          "' expects an integer, got '" + value + "'");
    }
}

std::vector<std::uint64_t> parse_seeds(const std::string& value, int line) {
    std::vector<std::uint64_t> seeds;
    for (const auto& part : split_list(value)) {
        auto dots = part.find("..");
        if (dots != std::string::npos) {
            const auto lo = parse_int(trim(part.substr(0, dots)), line, "seeds");
            const auto hi = parse_int(trim(part.substr(dots + 2)), line, "seeds");
            if (hi < lo)
                throw ConfigError("line " + std::to_string(line) +
                                  ": seed range must be ascending");
            for (long long s = lo; s <= hi; ++s)
                seeds.push_back(static_cast<std::uint64_t>(s));
        } else {
            seeds.push_back(static_cast<std::uint64_t>(parse_int(part, line, "seeds")));
        }
    }
    if (seeds.empty())
        throw ConfigError("line " + std::to_string(line) + ": seeds list is empty");
    return seeds;
}

std::string render_seeds(const std::vector<std::uint64_t>& seeds) {
    // Compress a contiguous ascending run into lo..hi.
    bool contiguous = seeds.size() > 1;
    for (std::size_t i = 1; i < seeds.size() && contiguous; ++i)
        contiguous = seeds[i] == seeds[i - 1] + 1;
    std::ostringstream os;
    if (contiguous) {
        os << seeds.front() << ".." << seeds.back();
        return os.str();
    }
    for (std::size_t i = 0; i < seeds.size(); ++i)
        os << (i ? "," : "") << seeds[i];
    return os.str();
}

} // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig cfg;
    cfg.seeds.clear();
    bool protocols_seen = false, seeds_seen = false;
    std::string section;
    std::istringstream is(text);
    std::string raw;
    int line = 0;

    while (std::getline(is, raw)) {
        ++line;
        auto hash = raw.find('#');
        if (hash != std::string::npos)
            raw.resize(hash);
        std::string s = trim(raw);
        if (s.empty())
            continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("line " + std::to_string(line) +
                                  ": unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            protocol_registry(section); // must name a known protocol
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line) +
                              ": expected 'key = value', got '" + s + "'");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(line) + ": empty key or value");

        if (!section.empty()) {
            ProtocolOverride& ov = cfg.overrides[section];
            if (key == "batch")
                ov.batch = static_cast<int>(parse_int(value, line, key));
            else if (key == "epochs")
                ov.epochs = static_cast<int>(parse_int(value, line, key));
            else if (key == "fault")
                ov.fault = sim::fault_mode_from_name(value);
            else if (key == "delay")
                ov.delay = sim::delay_policy_from_name(value);
            else
                throw ConfigError("line " + std::to_string(line) + ": field '" + key +
                                  "' is not overridable per protocol");
            continue;
        }

        if (key == "protocols") {
            cfg.protocols.clear();
            for (const auto& name : split_list(value)) {
                if (name == "all") {
                    for (const auto& p : all_protocols())
                        cfg.protocols.push_back(p.name);
                } else {
                    cfg.protocols.push_back(protocol_registry(name).name);
                }
            }
            protocols_seen = true;
        } else if (key == "n") {
            cfg.n = static_cast<int>(parse_int(value, line, key));
        } else if (key == "f") {
            cfg.f = static_cast<int>(parse_int(value, line, key));
        } else if (key == "batch") {
            cfg.batch = static_cast<int>(parse_int(value, line, key));
        } else if (key == "epochs") {
            cfg.epochs = static_cast<int>(parse_int(value, line, key));
        } else if (key == "tx_size") {
            cfg.tx_size = static_cast<int>(parse_int(value, line, key));
        } else if (key == "seeds") {
            cfg.seeds = parse_seeds(value, line);
            seeds_seen = true;
        } else if (key == "fault") {
            cfg.fault = sim::fault_mode_from_name(value);
        } else if (key == "crash_time") {
            cfg.crash_time = static_cast<std::uint64_t>(parse_int(value, line, key));
        } else if (key == "victims") {
            std::vector<ReplicaId> v;
            for (const auto& part : split_list(value))
                v.push_back(static_cast<ReplicaId>(parse_int(part, line, key)));
            cfg.victims = std::move(v);
        } else if (key == "delay") {
            cfg.delay = sim::delay_policy_from_name(value);
        } else if (key == "out") {
            cfg.out = value;
        } else if (key == "format") {
            if (value != "csv" && value != "json")
                throw ConfigError("line " + std::to_string(line) +
                                  ": format must be csv or json");
            cfg.format = value;
        } else {
            throw ConfigError("line " + std::to_string(line) + ": unknown field '" +
                              key + "'");
        }
    }

    if (!protocols_seen || cfg.protocols.empty())
        throw ConfigError("field 'protocols' is required");
    if (!seeds_seen)
        cfg.seeds = {1};
    if (cfg.n.has_value() == cfg.f.has_value())
        throw ConfigError("exactly one of 'n' and 'f' must be given");
    if (cfg.epochs < 1)
        throw ConfigError("field 'epochs' must be positive");
    if (cfg.batch < 0)
        throw ConfigError("field 'batch' must be non-negative");
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string ExperimentConfig::serialize() const {
    std::ostringstream os;
    os << "protocols = ";
    for (std::size_t i = 0; i < protocols.size(); ++i)
        os << (i ? "," : "") << protocols[i];
    os << "\n";
    if (n)
        os << "n = " << *n << "\n";
    if (f)
        os << "f = " << *f << "\n";
    os << "batch = " << batch << "\n";
    os << "epochs = " << epochs << "\n";
    os << "tx_size = " << tx_size << "\n";
    os << "seeds = " << render_seeds(seeds) << "\n";
    os << "fault = " << sim::fault_mode_name(fault) << "\n";
    if (crash_time)
        os << "crash_time = " << *crash_time << "\n";
    if (victims) {
        os << "victims = ";
        for (std::size_t i = 0; i < victims->size(); ++i)
            os << (i ? "," : "") << (*victims)[i];
        os << "\n";
    }
    os << "delay = " << sim::delay_policy_name(delay) << "\n";
    os << "out = " << out << "\n";
    os << "format = " << format << "\n";
    for (const auto& [name, ov] : overrides) {
        os << "[" << name << "]\n";
        if (ov.batch)
            os << "batch = " << *ov.batch << "\n";
        if (ov.epochs)
            os << "epochs = " << *ov.epochs << "\n";
        if (ov.fault)
            os << "fault = " << sim::fault_mode_name(*ov.fault) << "\n";
        if (ov.delay)
            os << "delay = " << sim::delay_policy_name(*ov.delay) << "\n";
    }
    return os.str();
}

std::vector<sim::RunConfig> ExperimentConfig::expand() const {
    std::vector<sim::RunConfig> runs;
    for (const auto& name : protocols) {
        const ProtocolOverride* ov = nullptr;
        if (auto it = overrides.find(name); it != overrides.end())
            ov = &it->second;
        for (std::uint64_t seed : seeds) {
            sim::RunConfig config;
            config.protocol = name;
            if (n)
                config.n = *n;
            if (f)
                config.f = *f;
            config.batch = ov && ov->batch ? *ov->batch : batch;
            config.epochs = ov && ov->epochs ? *ov->epochs : epochs;
            config.tx_size = tx_size;
            config.seed = seed;
            config.fault.mode = ov && ov->fault ? *ov->fault : fault;
            config.fault.crash_time = crash_time;
            config.delay = ov && ov->delay ? *ov->delay : delay;
            config.event_cap = sim::default_event_cap();
            config.resolve();
            if (config.fault.mode != sim::FaultMode::none) {
                if (victims) {
                    config.fault.victims = *victims;
                } else {
                    for (int v = 0; v < config.f; ++v)
                        config.fault.victims.push_back(
                            static_cast<ReplicaId>(config.n - 1 - v));
                }
            }
            config.validate();
            runs.push_back(std::move(config));
        }
    }
    return runs;
}

} // namespace mib::cli
