#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <type_traits>

#include "kinoforge/nn/network.hpp"
#include "kinoforge/nn/optim.hpp"

namespace kinoforge::nn {

inline double relative_error(double analytic, double numeric)
{
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

struct GradCheckResult {
    double max_rel_error = 0;
    Eigen::Index worst_index = -1;
    double worst_analytic = 0, worst_numeric = 0;
    Eigen::Index checked = 0;
    Eigen::Index kinked = 0; // coordinates whose +-h probes straddle a rectifier kink
};

/// A loss evaluation plus a fingerprint of which side of zero every rectified
/// pre-activation fell on.
struct Probe {
    double loss = 0;
    std::uint64_t signs = 0;
};

inline std::uint64_t sign_fingerprint(const Network &net, const Network::Cache &c,
                                      std::uint64_t hash = 1469598103934665603ull)
{
    for (std::size_t l = 0; l < c.pre.size(); ++l) {
        if (net.specs()[l].act != Activation::leaky)
            continue;
        for (double v : c.pre[l].reshaped())
            hash = (hash ^ (v > 0.0 ? 0x9eu : 0x35u)) * 1099511628211ull;
    }
    return hash;
}

/// Central differences over every entry of `theta`.  `loss_at(i)` must evaluate the loss
/// with the current theta; it receives the index being perturbed so callers can skip
/// recomputing parts of a model that do not depend on it.
///
/// If `loss_at` returns a Probe, a coordinate whose two probes land on different sides of
/// some kink has no valid central difference (the loss is only piecewise smooth there) and
/// is counted in `kinked` instead of being compared.
template<class LossAt>
GradCheckResult grad_check(Vec &theta, const Vec &analytic, LossAt &&loss_at, double h = 1e-5)
{
    GradCheckResult r;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + h;
        const auto pp = loss_at(i);
        theta[i] = saved - h;
        const auto pm = loss_at(i);
        theta[i] = saved;
        double lp, lm;
        if constexpr (std::is_same_v<std::decay_t<decltype(pp)>, Probe>) {
            if (pp.signs != pm.signs) {
                ++r.kinked;
                continue;
            }
            lp = pp.loss;
            lm = pm.loss;
        } else {
            lp = pp;
            lm = pm;
        }
        ++r.checked;
        const double numeric = (lp - lm) / (2.0 * h);
        const double e = relative_error(analytic[i], numeric);
        if (r.worst_index < 0 || e > r.max_rel_error) {
            r.max_rel_error = e;
            r.worst_index = i;
            r.worst_analytic = analytic[i];
            r.worst_numeric = numeric;
        }
    }
    return r;
}

/// Whole-network check against `target` under MseLoss.  When parameter i belongs to layer l,
/// only layers l.. are re-run, starting from the cached input of layer l.
/// `corrupt` lets tests tamper with the analytic gradient (negative controls).
inline GradCheckResult grad_check(Network &net, const Mat &input, const Mat &target, double h = 1e-5,
                                  const std::function<void(Vec &)> &corrupt = {})
{
    Network::Cache cache;
    const Mat y = net.forward(input, &cache);
    Vec grad = Vec::Zero(static_cast<Eigen::Index>(net.param_count()));
    net.backward(cache, MseLoss::grad(y, target), grad);
    if (corrupt)
        corrupt(grad);

    std::vector<std::size_t> layer_of(net.param_count());
    for (std::size_t l = 0; l < net.layer_count(); ++l)
        for (std::size_t k = 0; k < net.specs()[l].param_count(); ++k)
            layer_of[net.param_offset(l) + k] = l;

    // perturb a private copy so caches of the caller's network stay meaningful
    Network probe = net;
    Vec &theta = probe.mutable_params();
    auto loss_at = [&](Eigen::Index i) {
        const std::size_t l = layer_of[static_cast<std::size_t>(i)];
        Network::Cache c;
        const Mat out = probe.forward_range(cache.inputs[l], l, probe.layer_count(), &c);
        return Probe{MseLoss::value(out, target), sign_fingerprint(probe, c)};
    };
    return grad_check(theta, grad, loss_at, h);
}

} // namespace kinoforge::nn
