#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinoforge/eval/episode.hpp"

namespace kinoforge::eval {

/// One episode as a results-table row.  `turn_ok[i]` counts successful attempts of turn
/// i+1 over all laps (0/1 for single-lap episodes).
struct ResultRow {
    std::string controller;
    double speed = 0;
    std::uint64_t seed = 0;
    int laps = 1;
    double hausdorff = 0;
    double max_speed = 0;
    bool completed = false;
    int reinits = 0;
    std::vector<int> turn_ok;
    std::string failure;
};

inline ResultRow make_row(ControllerKind c, double speed, std::uint64_t seed, int laps, const EpisodeResult &r, int n_turns)
{
    ResultRow row{controller_name(c), speed, seed, laps, r.hausdorff, r.max_speed, r.completed, r.reinits, {}, r.failure};
    row.turn_ok.assign(static_cast<std::size_t>(n_turns), 0);
    for (const auto &a : r.turns)
        if (a.success && a.turn >= 1 && a.turn <= n_turns)
            ++row.turn_ok[static_cast<std::size_t>(a.turn - 1)];
    return row;
}

inline std::string csv_header(int n_turns)
{
    std::string h = "controller,speed,seed,laps,hausdorff,max_speed,completed,reinits";
    for (int i = 1; i <= n_turns; ++i)
        h += ",T" + std::to_string(i);
    return h + ",failure";
}

inline std::string csv_line(const ResultRow &r)
{
    std::ostringstream os;
    os.precision(10);
    os << r.controller << ',' << r.speed << ',' << r.seed << ',' << r.laps << ',' << r.hausdorff << ',' << r.max_speed
       << ',' << (r.completed ? 1 : 0) << ',' << r.reinits;
    for (int ok : r.turn_ok)
        os << ',' << ok;
    os << ',' << r.failure;
    return os.str();
}

inline void write_results_csv(const std::string &path, const std::vector<ResultRow> &rows)
{
    if (rows.empty())
        throw std::invalid_argument("no results to write");
    std::ofstream f(path);
    if (!f)
        throw std::runtime_error("cannot write " + path);
    f << csv_header(static_cast<int>(rows.front().turn_ok.size())) << '\n';
    for (const auto &r : rows) {
        if (r.turn_ok.size() != rows.front().turn_ok.size())
            throw std::invalid_argument("results mix courses with different turn counts");
        f << csv_line(r) << '\n';
    }
    if (!f)
        throw std::runtime_error("write failed: " + path);
}

inline std::vector<ResultRow> read_results_csv(const std::string &path)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("cannot open results table: " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("controller,speed,seed,", 0) != 0)
        throw std::runtime_error("not a results table: " + path);
    const int n_turns = static_cast<int>(std::count(line.begin(), line.end(), ',')) - 8;
    if (n_turns < 1)
        throw std::runtime_error("results table has no turn columns: " + path);
    std::vector<ResultRow> out;
    while (std::getline(f, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ','))
            cells.push_back(c);
        if (!line.empty() && line.back() == ',')
            cells.emplace_back();
        if (cells.size() != static_cast<std::size_t>(n_turns) + 9)
            throw std::runtime_error("malformed results row in " + path + ": " + line);
        ResultRow r;
        try {
            r.controller = cells[0];
            r.speed = std::stod(cells[1]);
            r.seed = std::stoull(cells[2]);
            r.laps = std::stoi(cells[3]);
            r.hausdorff = std::stod(cells[4]);
            r.max_speed = std::stod(cells[5]);
            r.completed = cells[6] == "1";
            r.reinits = std::stoi(cells[7]);
            for (int i = 0; i < n_turns; ++i)
                r.turn_ok.push_back(std::stoi(cells[8 + static_cast<std::size_t>(i)]));
        } catch (const std::logic_error &) {
            throw std::runtime_error("malformed results row in " + path + ": " + line);
        }
        r.failure = cells.back();
        out.push_back(std::move(r));
    }
    return out;
}

struct SeriesPoint {
    double speed = 0;
    double mean = 0, stddev = 0;
    int n = 0;
};

/// Mean and sample standard deviation of the Hausdorff distance per controller and speed.
inline std::map<std::string, std::vector<SeriesPoint>> hausdorff_series(const std::vector<ResultRow> &rows)
{
    std::map<std::string, std::map<double, std::vector<double>>> g;
    for (const auto &r : rows)
        g[r.controller][r.speed].push_back(r.hausdorff);
    std::map<std::string, std::vector<SeriesPoint>> out;
    for (const auto &[c, by_speed] : g)
        for (const auto &[s, hs] : by_speed) {
            SeriesPoint p{s, 0, 0, static_cast<int>(hs.size())};
            for (double h : hs)
                p.mean += h;
            p.mean /= p.n;
            if (p.n > 1) {
                for (double h : hs)
                    p.stddev += (h - p.mean) * (h - p.mean);
                p.stddev = std::sqrt(p.stddev / (p.n - 1));
            }
            out[c].push_back(p);
        }
    return out;
}

// Paper-style ordering of the controller columns.
inline std::vector<std::string> ordered_controllers(const std::vector<ResultRow> &rows)
{
    std::set<std::string> seen;
    for (const auto &r : rows)
        seen.insert(r.controller);
    std::vector<std::string> out;
    for (const char *c : {"baseline", "imu", "vi"})
        if (seen.erase(c))
            out.emplace_back(c);
    out.insert(out.end(), seen.begin(), seen.end());
    return out;
}

/// Success counts at one speed: one row per turn, one "ok/attempts" column per controller.
inline std::string success_table(const std::vector<ResultRow> &rows, double speed)
{
    const auto ctls = ordered_controllers(rows);
    std::size_t n_turns = 0;
    for (const auto &r : rows)
        n_turns = std::max(n_turns, r.turn_ok.size());
    std::ostringstream os;
    os << "turn";
    for (const auto &c : ctls)
        os << ',' << c;
    os << '\n';
    for (std::size_t t = 0; t < n_turns; ++t) {
        os << 'T' << t + 1;
        for (const auto &c : ctls) {
            int ok = 0, tried = 0;
            for (const auto &r : rows)
                if (r.controller == c && std::abs(r.speed - speed) < 1e-9 && t < r.turn_ok.size()) {
                    ok += r.turn_ok[t];
                    tried += r.laps;
                }
            os << ',' << ok << '/' << tried;
        }
        os << '\n';
    }
    return os.str();
}

inline std::string summary_table(const std::vector<ResultRow> &rows)
{
    std::ostringstream os;
    os.precision(6);
    os << "controller,speed,episodes,mean_hausdorff,std_hausdorff,turn_successes,turn_attempts\n";
    const auto series = hausdorff_series(rows);
    for (const auto &c : ordered_controllers(rows))
        for (const auto &p : series.at(c)) {
            int ok = 0, tried = 0;
            for (const auto &r : rows)
                if (r.controller == c && std::abs(r.speed - p.speed) < 1e-9) {
                    for (int v : r.turn_ok)
                        ok += v;
                    tried += r.laps * static_cast<int>(r.turn_ok.size());
                }
            os << c << ',' << p.speed << ',' << p.n << ',' << p.mean << ',' << p.stddev << ',' << ok << ',' << tried << '\n';
        }
    return os.str();
}

/// Mean Hausdorff distance against top speed, one polyline (with std error bars) per controller.
inline std::string hausdorff_plot_svg(const std::vector<ResultRow> &rows)
{
    if (rows.empty())
        throw std::invalid_argument("report: no results");
    const auto series = hausdorff_series(rows);
    double s_lo = 1e300, s_hi = -1e300, h_hi = 0;
    for (const auto &[c, pts] : series)
        for (const auto &p : pts) {
            s_lo = std::min(s_lo, p.speed);
            s_hi = std::max(s_hi, p.speed);
            h_hi = std::max(h_hi, p.mean + p.stddev);
        }
    if (s_hi - s_lo < 1e-9) {
        s_lo -= 0.5;
        s_hi += 0.5;
    }
    h_hi = h_hi > 0 ? h_hi * 1.1 : 1.0;
    const double W = 640, H = 420, ml = 70, mr = 130, mt = 40, mb = 60;
    auto X = [&](double s) { return ml + (s - s_lo) / (s_hi - s_lo) * (W - ml - mr); };
    auto Y = [&](double h) { return H - mb - h / h_hi * (H - mt - mb); };
    const std::map<std::string, std::string> colors{{"baseline", "#d62728"}, {"imu", "#1f77b4"}, {"vi", "#2ca02c"}};
    std::ostringstream os;
    os.precision(5);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">Hausdorff distance (lower is better)</text>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double h = h_hi * i / 4, s = s_lo + (s_hi - s_lo) * i / 4;
        os << "<text x=\"" << ml - 6 << "\" y=\"" << Y(h) + 4 << "\" text-anchor=\"end\">" << h << "</text>\n";
        os << "<text x=\"" << X(s) << "\" y=\"" << H - mb + 18 << "\" text-anchor=\"middle\">" << s << "</text>\n";
    }
    os << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">top speed (m/s)</text>\n";
    os << "<text x=\"18\" y=\"" << (mt + H - mb) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << (mt + H - mb) / 2 << ")\">Hausdorff distance (m)</text>\n";
    int li = 0;
    for (const auto &c : ordered_controllers(rows)) {
        const auto &pts = series.at(c);
        const auto it = colors.find(c);
        const std::string col = it == colors.end() ? "#7f7f7f" : it->second;
        os << "<g class=\"series\" data-controller=\"" << c << "\">\n<polyline fill=\"none\" stroke=\"" << col
           << "\" stroke-width=\"2\" points=\"";
        for (const auto &p : pts)
            os << X(p.speed) << ',' << Y(p.mean) << ' ';
        os << "\"/>\n";
        for (const auto &p : pts) {
            os << "<circle cx=\"" << X(p.speed) << "\" cy=\"" << Y(p.mean) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
            if (p.stddev > 0)
                os << "<line x1=\"" << X(p.speed) << "\" y1=\"" << Y(p.mean - p.stddev) << "\" x2=\"" << X(p.speed)
                   << "\" y2=\"" << Y(p.mean + p.stddev) << "\" stroke=\"" << col << "\"/>\n";
        }
        os << "</g>\n";
        const double ly = mt + 10 + 20 * li++;
        os << "<line x1=\"" << W - mr + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - mr + 40 << "\" y2=\"" << ly
           << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << W - mr + 46 << "\" y=\"" << ly + 4 << "\">" << c << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace kinoforge::eval
