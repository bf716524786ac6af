#include "mib/core.hpp"

#include <algorithm>
#include <sstream>

namespace mib {

int resilience_denominator(Resilience r) {
    switch (r) {
    case Resilience::r3f1: return 3;
    case Resilience::r5f1: return 5;
    case Resilience::r7f1: return 7;
    }
    throw ConfigError("bad resilience enum");
}

int min_replicas(Resilience r, int f) {
    return resilience_denominator(r) * f + 1;
}

std::string_view resilience_name(Resilience r) {
    switch (r) {
    case Resilience::r3f1: return "3f+1";
    case Resilience::r5f1: return "5f+1";
    case Resilience::r7f1: return "7f+1";
    }
    return "?";
}

void Deployment::validate() const {
    if (f < 0)
        throw ConfigError("fault bound f must be non-negative, got " + std::to_string(f));
    if (n < 1)
        throw ConfigError("replica count n must be positive, got " + std::to_string(n));
    if (n < min_replicas(resilience, f)) {
        std::ostringstream os;
        os << "deployment violates resilience " << resilience_name(resilience)
           << ": n=" << n << " < " << min_replicas(resilience, f) << " for f=" << f;
        throw ConfigError(os.str());
    }
}

std::string_view rbc_kind_name(RbcKind k) {
    switch (k) {
    case RbcKind::avid: return "avid";
    case RbcKind::mbc: return "mbc";
    case RbcKind::avid_l: return "avid-l";
    case RbcKind::mbc_l: return "mbc-l";
    }
    return "?";
}

RbcKind rbc_kind_from_name(std::string_view name) {
    if (name == "avid") return RbcKind::avid;
    if (name == "mbc") return RbcKind::mbc;
    if (name == "avid-l") return RbcKind::avid_l;
    if (name == "mbc-l") return RbcKind::mbc_l;
    throw ConfigError("unknown rbc variant '" + std::string(name) +
                      "' (valid: avid, mbc, avid-l, mbc-l)");
}

std::string_view aba_kind_name(AbaKind k) {
    switch (k) {
    case AbaKind::cobalt: return "cobalt";
    case AbaKind::w1s_cobalt: return "w1s+cobalt";
    case AbaKind::s1s_cobalt: return "s1s+cobalt";
    }
    return "?";
}

const std::vector<ProtocolSpec>& all_protocols() {
    static const std::vector<ProtocolSpec> table = {
        {"beat", RbcKind::avid, AbaKind::cobalt, Resilience::r3f1},
        {"mib5", RbcKind::mbc, AbaKind::w1s_cobalt, Resilience::r5f1},
        {"mib5a", RbcKind::avid, AbaKind::w1s_cobalt, Resilience::r5f1},
        {"mib5b", RbcKind::avid_l, AbaKind::w1s_cobalt, Resilience::r5f1},
        {"mib7", RbcKind::mbc_l, AbaKind::s1s_cobalt, Resilience::r7f1},
        {"mib7a", RbcKind::avid, AbaKind::s1s_cobalt, Resilience::r7f1},
        {"mib7b", RbcKind::mbc, AbaKind::s1s_cobalt, Resilience::r7f1},
        {"mib7c", RbcKind::avid_l, AbaKind::s1s_cobalt, Resilience::r7f1},
    };
    return table;
}

const ProtocolSpec& protocol_registry(std::string_view name) {
    for (const auto& p : all_protocols())
        if (p.name == name)
            return p;
    std::ostringstream os;
    os << "unknown protocol '" << name << "'; valid names:";
    for (const auto& p : all_protocols())
        os << " " << p.name;
    throw ConfigError(os.str());
}

int quorum_threshold(const Deployment& dep, std::string_view name,
                     std::optional<int> n1) {
    const int n = dep.n;
    const int f = dep.f;
    if (name == "n-f") return n - f;
    if (name == "n-2f") return n - 2 * f;
    if (name == "f+1") return f + 1;
    if (name == "2f+1") return 2 * f + 1;
    if (name == "n1-f" || name == "n1-2f") {
        if (!n1)
            throw ConfigError("threshold '" + std::string(name) +
                              "' requires the active group size n1");
        return name == "n1-f" ? *n1 - f : *n1 - 2 * f;
    }
    throw ConfigError("unknown threshold name '" + std::string(name) + "'");
}

void Emitted::merge(Emitted&& other) {
    out.insert(out.end(), std::make_move_iterator(other.out.begin()),
               std::make_move_iterator(other.out.end()));
    events.insert(events.end(), std::make_move_iterator(other.events.begin()),
                  std::make_move_iterator(other.events.end()));
}

} // namespace mib
