#include "mib/checks.hpp"
#include "mib/config.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace mib;

int cmd_run(const std::string& config_path, const std::string& out_override,
            const std::string& format_override, std::uint64_t seed_override,
            int jobs) {
    cli::ExperimentConfig config;
    try {
        config = cli::ExperimentConfig::load(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    if (!out_override.empty())
        config.out = out_override;
    if (!format_override.empty())
        config.format = format_override;
    if (seed_override)
        config.seeds = {seed_override};

    std::vector<sim::RunConfig> runs;
    try {
        runs = config.expand();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

#ifdef _OPENMP
    if (jobs > 0)
        omp_set_num_threads(jobs);
#else
    (void)jobs;
#endif

    std::vector<sim::RunResult> results(runs.size());
    std::vector<std::vector<std::string>> violations(runs.size());
    #pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(runs.size()); ++i) {
        results[i] = sim::run(runs[i]);
        violations[i] = checks::verify_run(results[i]);
    }

    std::filesystem::create_directories(config.out);
    bool safety_violation = false;
    bool liveness_failure = false;

    if (config.format == "csv") {
        std::ofstream csv(config.out + "/metrics.csv");
        csv << sim::RunResult::csv_header() << "\n";
        for (const auto& r : results)
            for (const auto& row : r.csv_rows())
                csv << row << "\n";
    } else {
        nlohmann::json all = nlohmann::json::array();
        for (const auto& r : results)
            all.push_back(nlohmann::json::parse(r.metrics_json()));
        std::ofstream json(config.out + "/metrics.json");
        json << all.dump(2) << "\n";
    }

    for (std::size_t i = 0; i < runs.size(); ++i) {
        for (const auto& v : violations[i]) {
            safety_violation = true;
            std::cerr << "SAFETY VIOLATION: " << v << "\n";
        }
        if (!results[i].metrics.liveness_ok) {
            liveness_failure = true;
            std::cerr << "LIVENESS FAILURE: " << runs[i].protocol << " seed "
                      << runs[i].seed << ": " << results[i].metrics.stuck << "\n";
        }
    }

    std::cout << runs.size() << " runs, metrics written to " << config.out << "/metrics."
              << config.format << "\n";
    if (safety_violation)
        return 2;
    if (liveness_failure)
        return 3;
    return 0;
}

int cmd_check(const std::string& scope, int seeds, int jobs) {
#ifdef _OPENMP
    if (jobs > 0)
        omp_set_num_threads(jobs);
#else
    (void)jobs;
#endif
    std::vector<checks::CheckResult> results;
    try {
        results = checks::run_scope(scope, seeds);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::size_t width = 0;
    for (const auto& r : results)
        width = std::max(width, r.name.size());
    bool all_ok = true;
    for (const auto& r : results) {
        all_ok = all_ok && r.pass;
        std::cout << (r.pass ? "PASS  " : "FAIL  ") << r.name
                  << std::string(width - r.name.size() + 2, ' ') << r.detail << "\n";
    }
    std::cout << (all_ok ? "all checks passed" : "CHECK FAILURES PRESENT") << "\n";
    return all_ok ? 0 : 2;
}

int cmd_count(const std::string& protocol, int n, int f, bool measure) {
    struct Variant {
        RbcKind kind;
        int denominator; // natural deployment family for the variant
    };
    std::vector<Variant> variants;
    auto add = [&](RbcKind k, int den) { variants.push_back({k, den}); };
    if (protocol == "all") {
        add(RbcKind::mbc, 5);
        add(RbcKind::avid, 3);
        add(RbcKind::mbc_l, 7);
        add(RbcKind::avid_l, 5);
    } else {
        RbcKind k = rbc_kind_from_name(protocol);
        switch (k) {
        case RbcKind::mbc: add(k, 5); break;
        case RbcKind::avid: add(k, 3); break;
        case RbcKind::mbc_l: add(k, 7); break;
        case RbcKind::avid_l: add(k, 5); break;
        }
    }

    std::cout << "variant   n     f   analytic";
    if (measure)
        std::cout << "   measured   match";
    std::cout << "\n";
    bool all_match = true;
    for (const auto& v : variants) {
        int vn = n, vf = f;
        if (vn > 0)
            vf = (vn - 1) / v.denominator;
        else
            vn = v.denominator * vf + 1;
        Deployment dep{vn, vf, Resilience::r3f1};
        try {
            dep.validate();
            const long long analytic = rbc::analytic_message_count(v.kind, dep);
            std::cout << rbc_kind_name(v.kind) << std::string(10 - std::string(rbc_kind_name(v.kind)).size(), ' ')
                      << vn << (vn < 10 ? "    " : vn < 100 ? "   " : "  ") << " " << vf
                      << "   " << analytic;
            if (measure) {
                const auto measured = checks::measure_rbc_messages(v.kind, dep);
                const bool match = measured == static_cast<std::uint64_t>(analytic);
                all_match = all_match && match;
                std::cout << "        " << measured << "      " << (match ? "yes" : "NO");
            }
            std::cout << "\n";
        } catch (const ConfigError& e) {
            std::cerr << "error: " << rbc_kind_name(v.kind) << ": " << e.what() << "\n";
            return 1;
        }
    }
    return all_match ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MiB asynchronous BFT simulator"};
    app.require_subcommand(1);

    int jobs = 0;
    app.add_option("--jobs", jobs, "worker threads for independent runs (0 = default)");

    auto* run = app.add_subcommand("run", "execute an experiment config");
    std::string config_path, out_override, format_override;
    std::uint64_t seed_override = 0;
    run->add_option("config", config_path, "experiment file")->required();
    run->add_option("--out", out_override, "output directory override");
    run->add_option("--format", format_override, "csv or json")
        ->check(CLI::IsMember({"csv", "json", ""}));
    run->add_option("--seed", seed_override, "run a single seed only");

    auto* check = app.add_subcommand("check", "run the property suites");
    std::string scope = "all";
    int seeds = 0;
    check->add_option("scope", scope, "coding|rbc|aba|acs|netsim|all");
    check->add_option("--seeds", seeds, "seed count override for the sweeps");

    auto* count = app.add_subcommand("count", "analytic broadcast message counts");
    std::string count_protocol;
    int count_n = 0, count_f = 0;
    bool measure = false;
    count->add_option("--protocol", count_protocol, "mbc|avid|mbc-l|avid-l|all")
        ->required();
    auto* n_opt = count->add_option("--n", count_n, "replica count");
    auto* f_opt = count->add_option("--f", count_f, "fault bound");
    n_opt->excludes(f_opt);
    count->add_flag("--measure", measure, "cross-check against a simulated run");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(config_path, out_override, format_override, seed_override,
                           jobs);
        if (check->parsed())
            return cmd_check(scope, seeds, jobs);
        if (count->parsed()) {
            if (count_n <= 0 && count_f <= 0) {
                std::cerr << "error: one of --n or --f is required\n";
                return 1;
            }
            return cmd_count(count_protocol, count_n, count_f, measure);
        }
    } catch (const mib::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
