#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace ctmc {

// CTMC_THREADS if set, else the hardware concurrency
int default_threads();

// Runs fn(i) for i in [0, n) over contiguous blocks; threads <= 0 means default.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based stream keyed by (seed, id): the k-th draw depends only on
// (seed, id, k).
class Stream {
public:
    using result_type = std::uint64_t;
    Stream(std::uint64_t seed, std::uint64_t id);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }
    result_type operator()();
    // uniform on (0, 1)
    double uniform();
    double exponential(double rate);

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace ctmc
