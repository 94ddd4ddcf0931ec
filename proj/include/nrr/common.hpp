#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nrr {

// invalid configuration (bad level sets, unknown keys, provenance mismatch)
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// input data missing or inconsistent (coverage gaps, absent stage outputs)
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// shape or topology violation (mismatched widths, bad layer graphs)
struct StructuralError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse (backward without forward, empty metric input)
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// a pipeline stage was invoked before the stage it depends on
struct StageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// a training or evaluation run failed; the failing run is named
struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runs fn(i) for i in [0, n) over at most `jobs` threads. Work is split into
// contiguous static chunks, so any write pattern indexed by i is
// deterministic regardless of the thread count.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (jobs < 1) jobs = 1;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    std::mutex mu;
    std::exception_ptr first_error;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([lo, hi, &fn, &mu, &first_error] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace nrr
