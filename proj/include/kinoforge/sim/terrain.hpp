#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinoforge/common/random.hpp"

namespace kinoforge::sim {

using Color = std::array<double, 3>;

struct TerrainClass {
    std::string name;
    double grip = 1.0;
    double roughness = 0.0;
    Color color{0.5, 0.5, 0.5};
    std::uint64_t texture_seed = 0;
};

struct TerrainCell {
    int class_id = 0;
    double grip = 1.0;
    double roughness = 0.0;
    std::uint64_t texture_seed = 0;
    Color base_color{0.5, 0.5, 0.5};
};

class OutOfBounds : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// Lattice value noise in [-1, 1], C1-smooth between lattice points.
inline double lattice_value(std::uint64_t seed, std::int64_t ix, std::int64_t iy)
{
    const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x9e3779b97f4a7c15ULL
                                                         + static_cast<std::uint64_t>(iy)));
    return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

inline double value_noise(std::uint64_t seed, double x, double y)
{
    const double fx = std::floor(x), fy = std::floor(y);
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    double tx = x - fx, ty = y - fy;
    tx = tx * tx * (3.0 - 2.0 * tx);
    ty = ty * ty * (3.0 - 2.0 * ty);
    const double a = lattice_value(seed, ix, iy), b = lattice_value(seed, ix + 1, iy);
    const double c = lattice_value(seed, ix, iy + 1), d = lattice_value(seed, ix + 1, iy + 1);
    return (a + (b - a) * tx) + ((c + (d - c) * tx) - (a + (b - a) * tx)) * ty;
}

struct TextureParams {
    double coarse_wavelength = 0.4;
    double coarse_amplitude = 0.08;
    double fine_wavelength = 0.15;
    double fine_amplitude = 0.05;
};

/// Pure in (seed, base, position): the renderer relies on this for repeatable frames.
inline Color texture_color(std::uint64_t seed, const Color &base, double x, double y,
                           const TextureParams &tp = {})
{
    const double m = 1.0 + tp.coarse_amplitude * value_noise(seed, x / tp.coarse_wavelength, y / tp.coarse_wavelength)
                   + tp.fine_amplitude * value_noise(seed + 1, x / tp.fine_wavelength, y / tp.fine_wavelength);
    Color c;
    for (int i = 0; i < 3; ++i)
        c[i] = std::clamp(base[i] * m, 0.0, 1.0);
    return c;
}

class TerrainMap {
public:
    TerrainMap() = default;

    TerrainMap(double width, double height, double cell_size, std::vector<TerrainClass> classes)
        : width_(width), height_(height), cell_size_(cell_size), classes_(std::move(classes))
    {
        if (!(width > 0 && height > 0 && cell_size > 0))
            throw std::invalid_argument("terrain dimensions must be positive");
        nx_ = static_cast<int>(std::ceil(width / cell_size - 1e-9));
        ny_ = static_cast<int>(std::ceil(height / cell_size - 1e-9));
        if (classes_.empty())
            throw std::invalid_argument("terrain needs at least one class");
        for (const auto &c : classes_)
            if (!(c.grip > 0 && c.grip <= 1) || !(c.roughness >= 0))
                throw std::invalid_argument("terrain class '" + c.name + "' has grip outside (0,1] or negative roughness");
        ids_.assign(static_cast<std::size_t>(nx_) * ny_, 0);
    }

    double width() const { return width_; }
    double height() const { return height_; }
    double cell_size() const { return cell_size_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    const std::vector<TerrainClass> &classes() const { return classes_; }
    const TextureParams &texture() const { return texture_; }
    void set_texture(const TextureParams &tp) { texture_ = tp; }

    bool contains(double x, double y) const { return x >= 0.0 && y >= 0.0 && x < width_ && y < height_; }

    int &id_at_index(int ix, int iy) { return ids_[static_cast<std::size_t>(iy) * nx_ + ix]; }
    int id_at_index(int ix, int iy) const { return ids_[static_cast<std::size_t>(iy) * nx_ + ix]; }

    int class_id(double x, double y) const
    {
        if (!contains(x, y))
            throw OutOfBounds("terrain query outside map at (" + std::to_string(x) + ", " + std::to_string(y) + ")");
        const int ix = std::min(nx_ - 1, static_cast<int>(x / cell_size_));
        const int iy = std::min(ny_ - 1, static_cast<int>(y / cell_size_));
        return id_at_index(ix, iy);
    }

    TerrainCell cell(double x, double y) const
    {
        const int id = class_id(x, y);
        const auto &c = classes_[static_cast<std::size_t>(id)];
        return TerrainCell{id, c.grip, c.roughness, c.texture_seed, c.color};
    }

    Color color_at(double x, double y) const
    {
        const auto &c = classes_[static_cast<std::size_t>(class_id(x, y))];
        return texture_color(c.texture_seed, c.color, x, y, texture_);
    }

    /// Fill every cell whose center satisfies pred(x, y) with class id.
    template<class Pred>
    void paint(int id, Pred pred)
    {
        for (int iy = 0; iy < ny_; ++iy)
            for (int ix = 0; ix < nx_; ++ix)
                if (pred((ix + 0.5) * cell_size_, (iy + 0.5) * cell_size_))
                    id_at_index(ix, iy) = id;
    }

    std::uint64_t content_hash() const
    {
        std::ostringstream os;
        write(os);
        return fnv1a(os.str());
    }

    // Format:
    //   kinoforge-world 1
    //   width W / height H / cell_size S / classes N
    //   class <id> <name> <grip> <roughness> <r> <g> <b> <texture_seed>   (N lines)
    //   grid <nx> <ny>
    //   <ny rows of nx ids, row 0 = lowest y>
    void write(std::ostream &os) const
    {
        os.precision(17);
        os << "kinoforge-world 1\n";
        os << "width " << width_ << "\nheight " << height_ << "\ncell_size " << cell_size_ << "\n";
        os << "texture " << texture_.coarse_wavelength << ' ' << texture_.coarse_amplitude << ' '
           << texture_.fine_wavelength << ' ' << texture_.fine_amplitude << "\n";
        os << "classes " << classes_.size() << "\n";
        for (std::size_t i = 0; i < classes_.size(); ++i) {
            const auto &c = classes_[i];
            os << "class " << i << ' ' << c.name << ' ' << c.grip << ' ' << c.roughness << ' ' << c.color[0] << ' '
               << c.color[1] << ' ' << c.color[2] << ' ' << c.texture_seed << "\n";
        }
        os << "grid " << nx_ << ' ' << ny_ << "\n";
        for (int iy = 0; iy < ny_; ++iy) {
            for (int ix = 0; ix < nx_; ++ix)
                os << (ix ? " " : "") << id_at_index(ix, iy);
            os << "\n";
        }
    }

    void save(const std::string &path) const
    {
        std::ofstream f(path);
        if (!f)
            throw std::runtime_error("cannot write world file: " + path);
        write(f);
    }

    static TerrainMap read(std::istream &is)
    {
        auto fail = [](const std::string &why) { return std::runtime_error("world file: " + why); };
        std::string key;
        int version = 0;
        if (!(is >> key >> version) || key != "kinoforge-world" || version != 1)
            throw fail("missing 'kinoforge-world 1' header");
        double w = 0, h = 0, s = 0;
        TextureParams tp;
        std::size_t n = 0;
        auto expect = [&](const char *name) {
            if (!(is >> key) || key != name)
                throw fail(std::string("expected '") + name + "'");
        };
        expect("width");
        is >> w;
        expect("height");
        is >> h;
        expect("cell_size");
        is >> s;
        expect("texture");
        is >> tp.coarse_wavelength >> tp.coarse_amplitude >> tp.fine_wavelength >> tp.fine_amplitude;
        expect("classes");
        is >> n;
        if (!is || n == 0 || n > 255)
            throw fail("bad class count");
        std::vector<TerrainClass> classes(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t id = 0;
            expect("class");
            auto &c = classes[i];
            is >> id >> c.name >> c.grip >> c.roughness >> c.color[0] >> c.color[1] >> c.color[2] >> c.texture_seed;
            if (!is || id != i)
                throw fail("bad class line " + std::to_string(i));
        }
        TerrainMap m(w, h, s, std::move(classes));
        m.texture_ = tp;
        int nx = 0, ny = 0;
        expect("grid");
        is >> nx >> ny;
        if (nx != m.nx_ || ny != m.ny_)
            throw fail("grid size does not match width/height/cell_size");
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) {
                int id = -1;
                if (!(is >> id) || id < 0 || static_cast<std::size_t>(id) >= n)
                    throw fail("bad cell id at row " + std::to_string(iy));
                m.id_at_index(ix, iy) = id;
            }
        return m;
    }

    static TerrainMap load(const std::string &path)
    {
        std::ifstream f(path);
        if (!f)
            throw std::runtime_error("cannot open world file: " + path);
        return read(f);
    }

private:
    double width_ = 0, height_ = 0, cell_size_ = 1;
    int nx_ = 0, ny_ = 0;
    std::vector<TerrainClass> classes_;
    std::vector<int> ids_;
    TextureParams texture_;
};

} // namespace kinoforge::sim
