#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinoforge/common/random.hpp"
#include "kinoforge/nn/tensor.hpp"

namespace kinoforge::nn {

using Mat = Eigen::MatrixXd; // features x batch, one column per sample
using Vec = Eigen::VectorXd;

enum class LayerKind : std::uint8_t { dense, conv, activation, flatten };
enum class Activation : std::uint8_t { linear, leaky };

inline constexpr double kLeakySlope = 0.01;

inline const char *kind_name(LayerKind k)
{
    switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv: return "conv";
    case LayerKind::activation: return "activation";
    case LayerKind::flatten: return "flatten";
    }
    return "?";
}

/// Conv layers take CHW-flattened inputs: `in` channels of in_h x in_w, kernel 3, stride 2,
/// no padding.  Dense layers use in/out features.  Activation and flatten layers are
/// shape-preserving over `in` features (flatten only documents the CHW -> vector step).
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    int in = 0, out = 0;
    int in_h = 0, in_w = 0;
    int kernel = 3, stride = 2;
    Activation act = Activation::leaky;
    bool skip = false;

    static LayerSpec dense(int in, int out, Activation a = Activation::leaky, bool skip = false)
    {
        return {LayerKind::dense, in, out, 0, 0, 3, 2, a, skip};
    }
    static LayerSpec conv(int cin, int cout, int h, int w, Activation a = Activation::leaky)
    {
        return {LayerKind::conv, cin, cout, h, w, 3, 2, a, false};
    }
    static LayerSpec activation(int features, Activation a = Activation::leaky)
    {
        return {LayerKind::activation, features, features, 0, 0, 3, 2, a, false};
    }
    static LayerSpec flatten(int features) { return {LayerKind::flatten, features, features, 0, 0, 3, 2, Activation::linear, false}; }

    int out_h() const { return (in_h - kernel) / stride + 1; }
    int out_w() const { return (in_w - kernel) / stride + 1; }

    int in_features() const { return kind == LayerKind::conv ? in * in_h * in_w : in; }
    int out_features() const { return kind == LayerKind::conv ? out * out_h() * out_w() : out; }

    std::size_t weight_count() const
    {
        switch (kind) {
        case LayerKind::dense: return static_cast<std::size_t>(in) * out;
        case LayerKind::conv: return static_cast<std::size_t>(out) * in * kernel * kernel;
        default: return 0;
        }
    }
    std::size_t bias_count() const { return kind == LayerKind::dense || kind == LayerKind::conv ? out : 0; }
    std::size_t param_count() const { return weight_count() + bias_count(); }
    int fan_in() const { return kind == LayerKind::conv ? in * kernel * kernel : in; }

    bool operator==(const LayerSpec &) const = default;
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void apply_activation(Activation a, Mat &z)
{
    if (a == Activation::leaky)
        z = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
}

inline void activation_backward(Activation a, const Mat &pre, Mat &grad)
{
    if (a == Activation::leaky)
        grad = grad.binaryExpr(pre, [](double g, double z) { return z > 0.0 ? g : kLeakySlope * g; });
}

class Network {
public:
    struct Cache {
        std::uint64_t version = 0;
        const Network *owner = nullptr;
        std::vector<Mat> inputs; // input to each layer
        std::vector<Mat> pre;    // pre-activation (dense/conv/activation)
        std::vector<Mat> cols;   // im2col buffers for conv layers
        Mat output;
    };

    Network() = default;

    explicit Network(std::vector<LayerSpec> specs, std::uint64_t seed = 0) : specs_(std::move(specs)), seed_(seed)
    {
        if (specs_.empty())
            throw ShapeError("network needs at least one layer");
        std::size_t total = 0;
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const auto &s = specs_[i];
            if (s.kind == LayerKind::conv && (s.kernel != 3 || s.stride != 2 || s.out_h() < 1 || s.out_w() < 1))
                throw ShapeError("layer " + std::to_string(i) + " (conv): bad geometry");
            if (s.skip && (s.kind != LayerKind::dense || s.in != s.out))
                throw ShapeError("layer " + std::to_string(i) + ": skip needs a square dense layer");
            if (i > 0 && specs_[i - 1].out_features() != s.in_features())
                throw ShapeError("layer " + std::to_string(i) + " (" + kind_name(s.kind) + ") expects "
                                 + std::to_string(s.in_features()) + " inputs but layer " + std::to_string(i - 1)
                                 + " produces " + std::to_string(specs_[i - 1].out_features()));
            offsets_.push_back(total);
            total += s.param_count();
        }
        theta_ = Vec::Zero(static_cast<Eigen::Index>(total));
        init(seed);
    }

    const std::vector<LayerSpec> &specs() const { return specs_; }
    std::size_t layer_count() const { return specs_.size(); }
    std::size_t param_count() const { return static_cast<std::size_t>(theta_.size()); }
    std::size_t param_offset(std::size_t layer) const { return offsets_[layer]; }
    int in_features() const { return specs_.front().in_features(); }
    int out_features() const { return specs_.back().out_features(); }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t version() const { return version_; }

    const Vec &params() const { return theta_; }
    /// Writable view; any prior cache becomes stale.
    Vec &mutable_params()
    {
        ++version_;
        return theta_;
    }
    void set_params(const Vec &p)
    {
        if (p.size() != theta_.size())
            throw ShapeError("parameter vector length mismatch");
        theta_ = p;
        ++version_;
    }

    /// Fan-in scaled uniform init, zero biases: U(+-sqrt(6/fan_in)) before a leaky rectifier,
    /// U(+-sqrt(3/fan_in)) for linear outputs (unit gain, keeps a squashing head out of saturation).
    void init(std::uint64_t seed)
    {
        seed_ = seed;
        Rng rng = named_stream(seed, "nn-init");
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const auto &s = specs_[i];
            const double gain = s.act == Activation::leaky ? 6.0 : 3.0;
            const double lim = s.fan_in() > 0 ? std::sqrt(gain / s.fan_in()) : 0.0;
            for (std::size_t k = 0; k < s.weight_count(); ++k)
                theta_[static_cast<Eigen::Index>(offsets_[i] + k)] = uniform(rng, -lim, lim);
            for (std::size_t k = 0; k < s.bias_count(); ++k)
                theta_[static_cast<Eigen::Index>(offsets_[i] + s.weight_count() + k)] = 0.0;
        }
        ++version_;
    }

    Mat forward(const Mat &x, Cache *cache = nullptr) const { return forward_range(x, 0, specs_.size(), cache); }

    /// Run layers [first, last).  The cache (if any) records only that range.
    Mat forward_range(const Mat &x, std::size_t first, std::size_t last, Cache *cache = nullptr) const
    {
        if (x.rows() != specs_[first].in_features())
            throw ShapeError("layer " + std::to_string(first) + " (" + kind_name(specs_[first].kind) + ") expects "
                             + std::to_string(specs_[first].in_features()) + " inputs, got " + std::to_string(x.rows()));
        if (cache) {
            cache->version = version_;
            cache->owner = this;
            cache->inputs.assign(specs_.size(), Mat());
            cache->pre.assign(specs_.size(), Mat());
            cache->cols.assign(specs_.size(), Mat());
        }
        Mat h = x;
        for (std::size_t i = first; i < last; ++i) {
            const auto &s = specs_[i];
            Mat pre, cols, out;
            switch (s.kind) {
            case LayerKind::dense: {
                pre = weights(i) * h;
                pre.colwise() += bias(i);
                out = pre;
                apply_activation(s.act, out);
                if (s.skip)
                    out += h;
                break;
            }
            case LayerKind::conv: {
                cols = im2col(s, h);
                const Mat z = weights(i) * cols; // out x (B * P)
                pre = scatter_conv_output(s, z, h.cols());
                for (int c = 0; c < s.out; ++c)
                    pre.middleRows(static_cast<Eigen::Index>(c) * s.out_h() * s.out_w(), s.out_h() * s.out_w()).array() +=
                        bias(i)[c];
                out = pre;
                apply_activation(s.act, out);
                break;
            }
            case LayerKind::activation:
                pre = h;
                out = h;
                apply_activation(s.act, out);
                break;
            case LayerKind::flatten:
                out = h;
                break;
            }
            if (cache) {
                cache->inputs[i] = std::move(h);
                cache->pre[i] = std::move(pre);
                cache->cols[i] = std::move(cols);
            }
            h = std::move(out);
        }
        if (cache)
            cache->output = h;
        return h;
    }

    Tensor forward(const Tensor &x) const
    {
        const Mat m = Eigen::Map<const Mat>(x.values.data(), static_cast<Eigen::Index>(x.values.size()), 1);
        const Mat y = forward(m);
        return Tensor({static_cast<int>(y.rows())}, std::vector<double>(y.data(), y.data() + y.size()));
    }

    /// Reverse pass over [first, last).  Parameter gradients are accumulated into `grad`
    /// (full-length); the input gradient is returned when requested.
    Mat backward_range(const Cache &cache, const Mat &dy, Vec &grad, std::size_t first, std::size_t last,
                       bool want_input_grad) const
    {
        if (cache.owner != this || cache.version != version_)
            throw std::logic_error("stale cache: parameters changed since forward");
        if (grad.size() != theta_.size())
            throw ShapeError("gradient vector length mismatch");
        Mat g = dy;
        for (std::size_t i = last; i-- > first;) {
            const auto &s = specs_[i];
            const Mat &in = cache.inputs[i];
            const bool need_dx = want_input_grad || i > first;
            switch (s.kind) {
            case LayerKind::dense: {
                Mat dz = g;
                activation_backward(s.act, cache.pre[i], dz);
                const auto off = static_cast<Eigen::Index>(offsets_[i]);
                Eigen::Map<Mat>(grad.data() + off, s.out, s.in).noalias() += dz * in.transpose();
                grad.segment(off + static_cast<Eigen::Index>(s.weight_count()), s.out) += dz.rowwise().sum();
                if (need_dx) {
                    Mat dx = weights(i).transpose() * dz;
                    if (s.skip)
                        dx += g;
                    g = std::move(dx);
                }
                break;
            }
            case LayerKind::conv: {
                Mat dpre = g;
                activation_backward(s.act, cache.pre[i], dpre);
                const Mat dz = gather_conv_grad(s, dpre);
                const auto off = static_cast<Eigen::Index>(offsets_[i]);
                Eigen::Map<Mat>(grad.data() + off, s.out, s.in * 9).noalias() += dz * cache.cols[i].transpose();
                grad.segment(off + static_cast<Eigen::Index>(s.weight_count()), s.out) += dz.rowwise().sum();
                if (need_dx)
                    g = col2im(s, weights(i).transpose() * dz, in.cols());
                break;
            }
            case LayerKind::activation:
                activation_backward(s.act, cache.pre[i], g);
                break;
            case LayerKind::flatten:
                break;
            }
        }
        return want_input_grad ? g : Mat();
    }

    Mat backward(const Cache &cache, const Mat &dy, Vec &grad, bool want_input_grad = false) const
    {
        return backward_range(cache, dy, grad, 0, specs_.size(), want_input_grad);
    }

    Eigen::Map<const Mat> weights(std::size_t i) const
    {
        const auto &s = specs_[i];
        const int cols = s.kind == LayerKind::conv ? s.in * 9 : s.in;
        return Eigen::Map<const Mat>(theta_.data() + offsets_[i], s.out, cols);
    }
    Eigen::Map<const Vec> bias(std::size_t i) const
    {
        return Eigen::Map<const Vec>(theta_.data() + offsets_[i] + specs_[i].weight_count(), specs_[i].out);
    }

private:
    // rows: (c, ky, kx); cols: b * P + (oy * ow + ox)
    static Mat im2col(const LayerSpec &s, const Mat &x)
    {
        const int oh = s.out_h(), ow = s.out_w(), P = oh * ow, B = static_cast<int>(x.cols());
        const int plane = s.in_h * s.in_w;
        Mat cols(s.in * 9, static_cast<Eigen::Index>(B) * P);
        double *dst = cols.data(); // column-major: one output pixel's receptive field at a time
        for (int b = 0; b < B; ++b) {
            const double *src = x.col(b).data();
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const double *at = src + oy * 2 * s.in_w + ox * 2;
                    for (int c = 0; c < s.in; ++c, at += plane)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx)
                                *dst++ = at[ky * s.in_w + kx];
                }
        }
        return cols;
    }

    static Mat col2im(const LayerSpec &s, const Mat &dcols, Eigen::Index batch)
    {
        const int oh = s.out_h(), ow = s.out_w();
        const int plane = s.in_h * s.in_w;
        Mat dx = Mat::Zero(s.in_features(), batch);
        const double *src = dcols.data();
        for (Eigen::Index b = 0; b < batch; ++b) {
            double *base = dx.col(b).data();
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double *at = base + oy * 2 * s.in_w + ox * 2;
                    for (int c = 0; c < s.in; ++c, at += plane)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx)
                                at[ky * s.in_w + kx] += *src++;
                }
        }
        return dx;
    }

    static Mat scatter_conv_output(const LayerSpec &s, const Mat &z, Eigen::Index batch)
    {
        const int P = s.out_h() * s.out_w();
        Mat out(s.out_features(), batch);
        for (Eigen::Index b = 0; b < batch; ++b)
            for (int c = 0; c < s.out; ++c)
                out.col(b).segment(static_cast<Eigen::Index>(c) * P, P) = z.row(c).segment(b * P, P).transpose();
        return out;
    }

    static Mat gather_conv_grad(const LayerSpec &s, const Mat &g)
    {
        const int P = s.out_h() * s.out_w();
        Mat dz(s.out, g.cols() * P);
        for (Eigen::Index b = 0; b < g.cols(); ++b)
            for (int c = 0; c < s.out; ++c)
                dz.row(c).segment(b * P, P) = g.col(b).segment(static_cast<Eigen::Index>(c) * P, P).transpose();
        return dz;
    }

    std::vector<LayerSpec> specs_;
    std::vector<std::size_t> offsets_;
    Vec theta_;
    std::uint64_t seed_ = 0;
    std::uint64_t version_ = 0;
};

} // namespace kinoforge::nn
