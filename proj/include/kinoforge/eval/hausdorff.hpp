#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace kinoforge::eval {

using Point2 = std::array<double, 2>;

/// max over a of min over b of |a - b|.
inline double directed_hausdorff(const std::vector<Point2> &a, const std::vector<Point2> &b)
{
    if (a.empty() || b.empty())
        throw std::invalid_argument("hausdorff: point sets must be non-empty");
    double worst = 0;
    for (const auto &p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto &q : b) {
            const double d = (p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]);
            if (d < best) {
                best = d;
                if (best <= worst) // cannot raise the max any more
                    break;
            }
        }
        worst = std::max(worst, best);
    }
    return std::sqrt(worst);
}

inline double hausdorff(const std::vector<Point2> &a, const std::vector<Point2> &b)
{
    return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

} // namespace kinoforge::eval
