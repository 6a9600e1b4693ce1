#pragma once
// Small hand-rolled generators for property tests.

#include <cstdint>
#include <functional>
#include <random>
#include <string>

namespace kftest {

struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    bool coin(double p = 0.5) { return real(0, 1) < p; }
};

/// Run `prop` over `cases` generated instances; the case index is reported on failure
/// through the gtest SCOPED_TRACE set up by the caller.
template<class F>
void for_all(int cases, std::uint64_t seed, F &&prop)
{
    Gen g(seed);
    for (int i = 0; i < cases; ++i)
        prop(g, i);
}

} // namespace kftest
