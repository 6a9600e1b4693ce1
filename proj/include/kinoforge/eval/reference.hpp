#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinoforge/common/angles.hpp"
#include "kinoforge/sim/presets.hpp"

namespace kinoforge::eval {

struct TurnSegment {
    int id = 0;         // 1-based, T1..Tn
    double s_start = 0; // arc length along the reference
    double s_end = 0;
};

/// Closed reference path sampled densely, with per-point arc length and turn label
/// (0 on straights, otherwise the turn id).
struct ReferencePath {
    std::vector<double> x, y, s;
    std::vector<int> turn;
    std::vector<TurnSegment> turns;
    double lap_length = 0;

    std::size_t size() const { return x.size(); }

    /// Index of the closest point (plain scan; references hold ~10^3 points).
    std::size_t nearest(double px, double py, double *dist = nullptr) const
    {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = (x[i] - px) * (x[i] - px) + (y[i] - py) * (y[i] - py);
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        if (dist)
            *dist = std::sqrt(bd);
        return best;
    }

    struct Projection {
        double s = 0;        // arc length of the foot point
        double distance = 0; // to the polyline
    };

    /// Foot point on the segments adjacent to the nearest vertex.
    Projection project(double px, double py) const
    {
        double d0 = 0;
        const std::size_t i = nearest(px, py, &d0);
        Projection best{s[i], d0};
        const std::size_t n = size();
        for (std::size_t a : {(i + n - 1) % n, i}) {
            const std::size_t b = (a + 1) % n;
            const double ex = x[b] - x[a], ey = y[b] - y[a];
            const double len2 = ex * ex + ey * ey;
            if (len2 <= 0)
                continue;
            const double f = std::clamp(((px - x[a]) * ex + (py - y[a]) * ey) / len2, 0.0, 1.0);
            const double d = std::hypot(px - x[a] - f * ex, py - y[a] - f * ey);
            if (d < best.distance) {
                const double sb = b == 0 ? lap_length : s[b];
                best = {s[a] + f * (sb - s[a]), d};
            }
        }
        if (best.s >= lap_length)
            best.s -= lap_length;
        return best;
    }

    /// Point at arc length s (wrapped to the lap), linearly interpolated.
    Pose2 at(double s_query) const
    {
        double q = std::fmod(s_query, lap_length);
        if (q < 0)
            q += lap_length;
        auto it = std::upper_bound(s.begin(), s.end(), q);
        const std::size_t j = it == s.end() ? 0 : static_cast<std::size_t>(it - s.begin());
        const std::size_t i = j == 0 ? size() - 1 : j - 1;
        const double sj = j == 0 ? lap_length : s[j];
        const double span = sj - s[i];
        const double f = span > 0 ? (q - s[i]) / span : 0.0;
        const double px = x[i] + f * (x[j] - x[i]), py = y[i] + f * (y[j] - y[i]);
        return {px, py, std::atan2(y[j] - y[i], x[j] - x[i])};
    }

    int turn_at(double s_query) const
    {
        double q = std::fmod(s_query, lap_length);
        if (q < 0)
            q += lap_length;
        for (const auto &t : turns)
            if (q >= t.s_start && q < t.s_end)
                return t.id;
        return 0;
    }

    /// Rebuilds s, lap_length and the turn segments from x, y and turn.
    void finalize()
    {
        if (x.size() < 3 || x.size() != y.size() || turn.size() != x.size())
            throw std::invalid_argument("reference path needs >= 3 labeled points");
        s.assign(x.size(), 0.0);
        for (std::size_t i = 1; i < x.size(); ++i)
            s[i] = s[i - 1] + std::hypot(x[i] - x[i - 1], y[i] - y[i - 1]);
        lap_length = s.back() + std::hypot(x.front() - x.back(), y.front() - y.back());
        turns.clear();
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (turn[i] == 0)
                continue;
            if (!turns.empty() && turns.back().id == turn[i] && i > 0 && turn[i - 1] == turn[i]) {
                turns.back().s_end = i + 1 < x.size() ? s[i + 1] : lap_length;
                continue;
            }
            turns.push_back({turn[i], s[i], i + 1 < x.size() ? s[i + 1] : lap_length});
        }
    }
};

/// Geometric course for a route: straight edges joined by circular fillets.  Starts at the
/// end of the fillet at corners[0], heading along the first edge; the fillet at corners[i]
/// is turn i (the one at corners[0] is the last turn, Tn).
inline ReferencePath route_path(const sim::RouteSpec &route, double step = 0.05)
{
    const std::size_t n = route.corners.size();
    if (n < 3 || !(route.radius > 0))
        throw std::invalid_argument("route needs >= 3 corners and a positive radius");
    struct Corner {
        double in_x, in_y, out_x, out_y, cx, cy, a0, sweep;
    };
    std::vector<Corner> cs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto &p = route.corners[(i + n - 1) % n], &c = route.corners[i], &q = route.corners[(i + 1) % n];
        const double h_in = std::atan2(c[1] - p[1], c[0] - p[0]);
        const double h_out = std::atan2(q[1] - c[1], q[0] - c[0]);
        const double phi = normalize_angle(h_out - h_in);
        if (!(phi > 0))
            throw std::invalid_argument("route corners must be listed counter-clockwise around a convex course");
        const double d = route.radius * std::tan(0.5 * phi);
        const double len_in = std::hypot(c[0] - p[0], c[1] - p[1]), len_out = std::hypot(q[0] - c[0], q[1] - c[1]);
        if (2 * d > std::min(len_in, len_out) + 1e-9)
            throw std::invalid_argument("fillet radius too large for the route edges");
        Corner k;
        k.in_x = c[0] - d * std::cos(h_in);
        k.in_y = c[1] - d * std::sin(h_in);
        k.out_x = c[0] + d * std::cos(h_out);
        k.out_y = c[1] + d * std::sin(h_out);
        k.cx = k.in_x - route.radius * std::sin(h_in);
        k.cy = k.in_y + route.radius * std::cos(h_in);
        k.a0 = h_in - 0.5 * std::numbers::pi;
        k.sweep = phi;
        cs[i] = k;
    }
    ReferencePath r;
    auto add = [&](double px, double py, int t) {
        r.x.push_back(px);
        r.y.push_back(py);
        r.turn.push_back(t);
    };
    for (std::size_t e = 0; e < n; ++e) {
        const Corner &a = cs[e], &b = cs[(e + 1) % n];
        const double len = std::hypot(b.in_x - a.out_x, b.in_y - a.out_y);
        const int m = std::max(1, static_cast<int>(std::ceil(len / step)));
        for (int i = 0; i < m; ++i)
            add(a.out_x + (b.in_x - a.out_x) * i / m, a.out_y + (b.in_y - a.out_y) * i / m, 0);
        const int turn_id = static_cast<int>((e + 1) % n == 0 ? n : (e + 1) % n);
        const int k = std::max(1, static_cast<int>(std::ceil(route.radius * b.sweep / step)));
        for (int i = 0; i < k; ++i) {
            const double a_i = b.a0 + b.sweep * i / k;
            add(b.cx + route.radius * std::cos(a_i), b.cy + route.radius * std::sin(a_i), turn_id);
        }
    }
    r.finalize();
    return r;
}

// Reference file: "kinoforge-ref 1", "points N", then N lines "x y turn".
inline void save_reference(const std::string &path, const ReferencePath &r)
{
    std::ofstream f(path);
    if (!f)
        throw std::runtime_error("cannot write reference file: " + path);
    f.precision(17);
    f << "kinoforge-ref 1\npoints " << r.size() << "\n";
    for (std::size_t i = 0; i < r.size(); ++i)
        f << r.x[i] << ' ' << r.y[i] << ' ' << r.turn[i] << "\n";
    if (!f)
        throw std::runtime_error("write failed: " + path);
}

inline ReferencePath load_reference(const std::string &path)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("cannot open reference file: " + path);
    std::string key;
    int ver = 0;
    std::size_t n = 0;
    if (!(f >> key >> ver) || key != "kinoforge-ref" || ver != 1 || !(f >> key >> n) || key != "points" || n < 3)
        throw std::runtime_error("reference file: bad header in " + path);
    ReferencePath r;
    r.x.resize(n);
    r.y.resize(n);
    r.turn.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!(f >> r.x[i] >> r.y[i] >> r.turn[i]))
            throw std::runtime_error("reference file: truncated point list in " + path);
    r.finalize();
    return r;
}

} // namespace kinoforge::eval
