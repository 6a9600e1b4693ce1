#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace kinoforge {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Independent generator for one named subsystem ("imu", "odom", ...) of a run.
inline Rng named_stream(std::uint64_t seed, std::string_view name)
{
    return Rng(splitmix64(seed ^ fnv1a(name)));
}

/// Uniform double in [lo, hi) built from raw 53-bit draws, so values do not
/// depend on the standard library's distribution implementation.
inline double uniform(Rng &rng, double lo, double hi)
{
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

inline std::size_t uniform_index(Rng &rng, std::size_t n)
{
    return static_cast<std::size_t>(uniform(rng, 0.0, static_cast<double>(n))) % n;
}

/// Fisher-Yates with uniform_index, stable across standard libraries.
template<class Range>
void shuffle(Range &r, Rng &rng)
{
    const auto n = static_cast<std::size_t>(std::size(r));
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = uniform_index(rng, i);
        using std::swap;
        swap(r[i - 1], r[j]);
    }
}

/// Standard normal via Box-Muller on uniform().
class Gaussian {
public:
    double operator()(Rng &rng)
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform(rng, 0.0, 1.0);
        while (u1 <= 0.0)
            u1 = uniform(rng, 0.0, 1.0);
        const double u2 = uniform(rng, 0.0, 1.0);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace kinoforge
