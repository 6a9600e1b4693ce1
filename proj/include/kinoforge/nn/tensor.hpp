#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace kinoforge::nn {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> values; // row-major

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), values(count(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v))
    {
        if (values.size() != count(shape))
            throw std::invalid_argument("tensor value count " + std::to_string(values.size())
                                        + " does not match shape product " + std::to_string(count(shape)));
    }

    static std::size_t count(const std::vector<int> &s)
    {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, [](std::size_t a, int d) {
            if (d < 0)
                throw std::invalid_argument("negative tensor dimension");
            return a * static_cast<std::size_t>(d);
        });
    }

    std::size_t size() const { return values.size(); }

    bool all_finite() const
    {
        for (double v : values)
            if (!std::isfinite(v))
                return false;
        return true;
    }
};

} // namespace kinoforge::nn
