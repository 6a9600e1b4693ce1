#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "kinoforge/nn/network.hpp"

namespace kinoforge::nn {

/// Mean over the batch of 0.5 * ||y - t||^2 per sample (halved so the gradient is y - t).
struct MseLoss {
    static double value(const Mat &y, const Mat &t) { return 0.5 * (y - t).squaredNorm() / static_cast<double>(y.cols()); }
    static Mat grad(const Mat &y, const Mat &t) { return (y - t) / static_cast<double>(y.cols()); }
};

class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AdamState {
    Vec m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    AdamState() = default;
    explicit AdamState(Eigen::Index n) : m(Vec::Zero(n)), v(Vec::Zero(n)) {}
};

/// Adam with bias correction.  Refuses non-finite gradients so divergence halts loudly.
inline void adam_step(Vec &params, const Vec &grads, AdamState &st, double lr)
{
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: params and grads differ in length");
    if (st.m.size() != params.size()) {
        st.m = Vec::Zero(params.size());
        st.v = Vec::Zero(params.size());
    }
    for (Eigen::Index i = 0; i < grads.size(); ++i)
        if (!std::isfinite(grads[i]))
            throw NonFiniteError("non-finite gradient at parameter " + std::to_string(i));
    ++st.step;
    st.m = st.beta1 * st.m + (1.0 - st.beta1) * grads;
    st.v = st.beta2 * st.v + (1.0 - st.beta2) * grads.cwiseProduct(grads);
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    params.array() -= lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + st.eps);
}

inline void adam_step(Network &net, const Vec &grads, AdamState &st, double lr)
{
    adam_step(net.mutable_params(), grads, st, lr);
}

} // namespace kinoforge::nn
