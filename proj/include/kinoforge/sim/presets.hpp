#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinoforge/common/random.hpp"
#include "kinoforge/sim/terrain.hpp"

namespace kinoforge::sim {

/// Closed polygonal course with every corner rounded by the same fillet radius.
/// Corners are listed counter-clockwise; each fillet is one labeled turn.
struct RouteSpec {
    std::vector<std::array<double, 2>> corners;
    double radius = 5.0;

    void save(const std::string &path) const
    {
        std::ofstream f(path);
        if (!f)
            throw std::runtime_error("cannot write route file: " + path);
        f.precision(17);
        f << "kinoforge-route 1\nradius " << radius << "\ncorners " << corners.size() << "\n";
        for (const auto &c : corners)
            f << c[0] << ' ' << c[1] << "\n";
    }

    static RouteSpec load(const std::string &path)
    {
        std::ifstream f(path);
        if (!f)
            throw std::runtime_error("cannot open route file: " + path);
        std::string key;
        int ver = 0;
        std::size_t n = 0;
        RouteSpec r;
        if (!(f >> key >> ver) || key != "kinoforge-route" || ver != 1)
            throw std::runtime_error("route file: bad header in " + path);
        if (!(f >> key >> r.radius) || key != "radius" || !(f >> key >> n) || key != "corners" || n < 3)
            throw std::runtime_error("route file: bad radius/corners in " + path);
        r.corners.resize(n);
        for (auto &c : r.corners)
            if (!(f >> c[0] >> c[1]))
                throw std::runtime_error("route file: truncated corner list in " + path);
        return r;
    }
};

struct Preset {
    TerrainMap world;
    RouteSpec route;
};

inline const std::vector<std::string> &preset_names()
{
    static const std::vector<std::string> names{"two-terrain-oval", "outdoor-mix", "uniform"};
    return names;
}

inline RouteSpec oval_route()
{
    return RouteSpec{{{4.0, 3.5}, {36.0, 3.5}, {36.0, 24.5}, {4.0, 24.5}}, 8.5};
}

// Indoor analog: high-grip rough turf and a slick, smooth wooden floor.  Wood covers the
// right-hand side and the top-left corner, so T1..T3 contain a grip change and T4 does not.
inline Preset two_terrain_oval(std::uint64_t seed)
{
    std::vector<TerrainClass> classes{
        {"turf", 1.0, 0.6, {0.22, 0.52, 0.20}, splitmix64(seed ^ 0x7475726full)},
        {"wood", 0.35, 0.05, {0.66, 0.47, 0.28}, splitmix64(seed ^ 0x776f6f64ull)},
    };
    TerrainMap m(40.0, 28.0, 0.25, std::move(classes));
    m.paint(1, [](double x, double y) { return x > 31.75 || (x < 10.4 && y > 19.8); });
    return {std::move(m), oval_route()};
}

inline Preset uniform_world(std::uint64_t seed)
{
    std::vector<TerrainClass> classes{{"turf", 1.0, 0.3, {0.22, 0.52, 0.20}, splitmix64(seed ^ 0x7475726full)}};
    return {TerrainMap(40.0, 28.0, 0.25, std::move(classes)), oval_route()};
}

// Outdoor analog: five surface classes laid out as a seeded Voronoi mosaic around a
// three-turn course.
inline Preset outdoor_mix(std::uint64_t seed)
{
    std::vector<TerrainClass> classes{
        {"grass", 0.85, 0.5, {0.30, 0.58, 0.22}, splitmix64(seed ^ 1)},
        {"leaves", 0.5, 0.35, {0.55, 0.36, 0.16}, splitmix64(seed ^ 2)},
        {"cement", 1.0, 0.05, {0.62, 0.62, 0.60}, splitmix64(seed ^ 3)},
        {"pebbles", 0.6, 0.9, {0.45, 0.42, 0.40}, splitmix64(seed ^ 4)},
        {"dirt", 0.7, 0.3, {0.48, 0.33, 0.22}, splitmix64(seed ^ 5)},
    };
    TerrainMap m(46.0, 34.0, 0.25, std::move(classes));
    Rng rng = named_stream(seed, "outdoor-layout");
    struct Site {
        double x, y;
        int id;
    };
    std::vector<Site> sites;
    for (int i = 0; i < 14; ++i)
        sites.push_back({uniform(rng, 0.0, 46.0), uniform(rng, 0.0, 34.0), i % 5});
    for (int iy = 0; iy < m.ny(); ++iy)
        for (int ix = 0; ix < m.nx(); ++ix) {
            const double x = (ix + 0.5) * m.cell_size(), y = (iy + 0.5) * m.cell_size();
            double best = 1e300;
            int id = 0;
            for (const auto &s : sites) {
                const double d = (s.x - x) * (s.x - x) + (s.y - y) * (s.y - y);
                if (d < best) {
                    best = d;
                    id = s.id;
                }
            }
            m.id_at_index(ix, iy) = id;
        }
    return {std::move(m), RouteSpec{{{5.0, 4.0}, {41.0, 4.0}, {23.0, 30.0}}, 6.0}};
}

inline Preset make_preset(const std::string &name, std::uint64_t seed)
{
    if (name == "two-terrain-oval")
        return two_terrain_oval(seed);
    if (name == "outdoor-mix")
        return outdoor_mix(seed);
    if (name == "uniform")
        return uniform_world(seed);
    throw std::invalid_argument("unknown preset '" + name + "'");
}

} // namespace kinoforge::sim
