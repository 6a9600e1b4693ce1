#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kinoforge/common/binary_io.hpp"
#include "kinoforge/common/random.hpp"
#include "kinoforge/datagen/sample.hpp"

namespace kinoforge::datagen {

// Sample file: magic "KFSMP001", u64 count, then `count` sample records (see write_sample).
inline void write_samples(const std::string &path, const std::vector<TrainingSample> &samples)
{
    BinaryWriter w(path);
    w.magic("KFSMP001");
    w.put<std::uint64_t>(samples.size());
    for (const auto &s : samples)
        write_sample(w, s);
    w.close();
}

inline std::vector<TrainingSample> read_samples(const std::string &path)
{
    BinaryReader r(path);
    r.expect_magic("KFSMP001");
    const auto n = r.get<std::uint64_t>();
    if (n > (1ull << 28))
        throw FormatError("implausible sample count in " + path);
    std::vector<TrainingSample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (std::uint64_t i = 0; i < n; ++i)
        out.push_back(read_sample(r));
    return out;
}

/// Plain-text manifest: "kinoforge-manifest 1", then one "key value" line per field in
/// insertion order, then one "file <name> <records>" line per data file.
struct Manifest {
    std::vector<std::pair<std::string, std::string>> fields;
    std::vector<std::pair<std::string, std::uint64_t>> files;

    void set(const std::string &key, const std::string &value)
    {
        for (auto &f : fields)
            if (f.first == key) {
                f.second = value;
                return;
            }
        fields.emplace_back(key, value);
    }
    template<class T>
        requires std::is_arithmetic_v<T>
    void set(const std::string &key, T value)
    {
        std::ostringstream os;
        os.precision(17);
        os << value;
        set(key, os.str());
    }

    const std::string *get(const std::string &key) const
    {
        for (const auto &f : fields)
            if (f.first == key)
                return &f.second;
        return nullptr;
    }

    std::string require(const std::string &key) const
    {
        if (const auto *v = get(key))
            return *v;
        throw FormatError("manifest is missing '" + key + "'");
    }

    void save(const std::string &path) const
    {
        std::ofstream out(path);
        if (!out)
            throw std::runtime_error("cannot open for writing: " + path);
        out << "kinoforge-manifest 1\n";
        for (const auto &[k, v] : fields)
            out << k << ' ' << v << '\n';
        for (const auto &[name, n] : files)
            out << "file " << name << ' ' << n << '\n';
        if (!out)
            throw std::runtime_error("write failed: " + path);
    }

    static Manifest load(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("cannot open for reading: " + path);
        std::string line;
        if (!std::getline(in, line) || line != "kinoforge-manifest 1")
            throw FormatError("not a kinoforge manifest: " + path);
        Manifest m;
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            const auto sp = line.find(' ');
            const std::string key = line.substr(0, sp);
            const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
            if (key == "file") {
                std::istringstream is(rest);
                std::string name;
                std::uint64_t n = 0;
                if (!(is >> name >> n))
                    throw FormatError("bad file line in " + path + ": " + line);
                m.files.emplace_back(name, n);
            } else {
                m.fields.emplace_back(key, rest);
            }
        }
        return m;
    }
};

inline std::string trajectory_file(int index, const char *ext)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "traj_%04d.%s", index, ext);
    return buf;
}

/// Reads every sample file listed in a sample-directory manifest.
inline std::vector<TrainingSample> load_sample_dir(const std::filesystem::path &dir, Manifest *manifest = nullptr)
{
    const Manifest m = Manifest::load((dir / "manifest.txt").string());
    if (m.require("kind") != "samples")
        throw FormatError(dir.string() + " is not a sample directory");
    std::vector<TrainingSample> out;
    for (const auto &[name, n] : m.files) {
        auto part = read_samples((dir / name).string());
        if (part.size() != n)
            throw FormatError(name + ": manifest lists " + std::to_string(n) + " samples, file has "
                              + std::to_string(part.size()));
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    if (manifest)
        *manifest = m;
    return out;
}

/// 50/50 split at trajectory granularity.  With an odd trajectory count the extra one
/// goes to the training side.  Pass an rvalue to avoid copying patch data.
inline std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> split(std::vector<TrainingSample> samples,
                                                                                 std::uint64_t seed)
{
    std::set<std::int32_t> ids;
    for (const auto &s : samples)
        ids.insert(s.trajectory);
    if (ids.size() < 2)
        throw std::invalid_argument("split: need at least 2 trajectories, got " + std::to_string(ids.size()));
    std::vector<std::int32_t> order(ids.begin(), ids.end());
    Rng rng = named_stream(seed, "split");
    shuffle(order, rng);
    const std::set<std::int32_t> train_ids(order.begin(), order.begin() + static_cast<std::ptrdiff_t>((order.size() + 1) / 2));
    std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> out;
    for (auto &s : samples)
        (train_ids.count(s.trajectory) ? out.first : out.second).push_back(std::move(s));
    return out;
}

} // namespace kinoforge::datagen
