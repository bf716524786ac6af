// Compares the serial and parallel execution of an independent-run
// sweep. Individual runs are single-threaded by contract; the sweep
// across (protocol, seed) pairs is the only parallel surface, so this
// is the benchmark for it. Also asserts that per-run outputs do not
// depend on the thread count.

#include "mib/checks.hpp"
#include "mib/netsim.hpp"

#include <chrono>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace mib;

namespace {

std::vector<sim::RunConfig> build_matrix(int seeds) {
    std::vector<sim::RunConfig> runs;
    for (const auto& proto : all_protocols()) {
        for (int s = 1; s <= seeds; ++s) {
            sim::RunConfig config;
            config.protocol = proto.name;
            config.f = 1;
            config.batch = 32;
            config.tx_size = 64;
            config.epochs = 2;
            config.seed = s;
            config.resolve();
            runs.push_back(std::move(config));
        }
    }
    return runs;
}

std::vector<std::string> sweep(const std::vector<sim::RunConfig>& runs, int threads,
                               double& elapsed) {
#ifdef _OPENMP
    omp_set_num_threads(threads);
#else
    (void)threads;
#endif
    std::vector<std::string> outputs(runs.size());
    const auto begin = std::chrono::steady_clock::now();
    #pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(runs.size()); ++i)
        outputs[i] = sim::run(runs[i]).metrics_json();
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin)
                  .count();
    return outputs;
}

} // namespace

int main(int argc, char** argv) {
    const int seeds = argc > 1 ? std::atoi(argv[1]) : 8;
    auto runs = build_matrix(seeds);

    double serial_s = 0, parallel_s = 0;
    auto serial = sweep(runs, 1, serial_s);
#ifdef _OPENMP
    const int threads = omp_get_max_threads() > 1 ? omp_get_max_threads() : 2;
#else
    const int threads = 1;
#endif
    auto parallel = sweep(runs, threads, parallel_s);

    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (serial[i] != parallel[i]) {
            std::cerr << "thread count changed run output at index " << i << "\n";
            return 1;
        }
    }

    std::cout << runs.size() << " runs\n";
    std::cout << "serial   (1 thread):  " << serial_s << " s\n";
    std::cout << "parallel (" << threads << " threads): " << parallel_s << " s\n";
    if (parallel_s > 0)
        std::cout << "speedup: " << serial_s / parallel_s << "x\n";
    return 0;
}
