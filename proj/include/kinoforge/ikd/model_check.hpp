#pragma once

#include <vector>

#include "kinoforge/ikd/model.hpp"
#include "kinoforge/nn/grad_check.hpp"

namespace kinoforge::ikd {

struct ModelGradCheck {
    nn::GradCheckResult imu, vis, head;
    double max_rel_error() const { return std::max({imu.max_rel_error, vis.max_rel_error, head.max_rel_error}); }
    Eigen::Index checked() const { return imu.checked + vis.checked + head.checked; }
    Eigen::Index kinked() const { return imu.kinked + vis.kinked + head.kinked; }
};

/// Central-difference check of IkdModel::backward under MseLoss on the tanh outputs,
/// covering every parameter of all three networks.  Perturbing a parameter only re-runs
/// the layers downstream of it.
inline ModelGradCheck grad_check_model(const IkdModel &model, const Batch &batch, const Mat &target, double h = 1e-5)
{
    IkdModel::Cache cache;
    const Mat y = model.forward(batch, &cache);
    Vec gi = Vec::Zero(static_cast<Eigen::Index>(model.imu_net().param_count()));
    Vec gv = Vec::Zero(static_cast<Eigen::Index>(model.visual() ? model.vis_net().param_count() : 0));
    Vec gh = Vec::Zero(static_cast<Eigen::Index>(model.head_net().param_count()));
    model.backward(cache, nn::MseLoss::grad(y, target), gi, gv, gh);

    const Mat imu_emb = model.imu_net().forward(batch.imu);
    const Mat vis_emb = model.visual() ? model.visual_embedding(batch, nullptr) : Mat();

    auto layer_index = [](const nn::Network &n) {
        std::vector<std::size_t> of(n.param_count());
        for (std::size_t l = 0; l < n.layer_count(); ++l)
            for (std::size_t k = 0; k < n.specs()[l].param_count(); ++k)
                of[n.param_offset(l) + k] = l;
        return of;
    };
    auto head_loss = [&](const nn::Network &head, const Mat &ie, const Mat &ve, std::uint64_t signs) {
        Mat hin(head.in_features(), batch.size());
        hin.topRows(ie.rows()) = ie;
        hin.middleRows(ie.rows(), 2) = batch.desired;
        if (model.visual())
            hin.bottomRows(ve.rows()) = ve;
        nn::Network::Cache c;
        const Mat y = head.forward(hin, &c);
        return nn::Probe{nn::MseLoss::value(y.array().tanh().matrix(), target), nn::sign_fingerprint(head, c, signs)};
    };

    ModelGradCheck r;
    {
        nn::Network probe = model.imu_net();
        const auto of = layer_index(probe);
        r.imu = nn::grad_check(probe.mutable_params(), gi, [&](Eigen::Index i) {
            const auto l = of[static_cast<std::size_t>(i)];
            nn::Network::Cache c;
            const Mat e = probe.forward_range(cache.imu.inputs[l], l, probe.layer_count(), &c);
            return head_loss(model.head_net(), e, vis_emb, nn::sign_fingerprint(probe, c));
        }, h);
    }
    if (model.visual() && batch.patches.cols() > 0) {
        nn::Network probe = model.vis_net();
        const auto of = layer_index(probe);
        r.vis = nn::grad_check(probe.mutable_params(), gv, [&](Eigen::Index i) {
            const auto l = of[static_cast<std::size_t>(i)];
            nn::Network::Cache c;
            const Mat e = probe.forward_range(cache.vis.inputs[l], l, probe.layer_count(), &c);
            Mat ve = Mat::Zero(e.rows(), batch.size());
            for (Eigen::Index b = 0; b < batch.size(); ++b)
                if (batch.patch_col[static_cast<std::size_t>(b)] >= 0)
                    ve.col(b) = e.col(batch.patch_col[static_cast<std::size_t>(b)]);
            return head_loss(model.head_net(), imu_emb, ve, nn::sign_fingerprint(probe, c));
        }, h);
    }
    {
        nn::Network probe = model.head_net();
        const auto of = layer_index(probe);
        r.head = nn::grad_check(probe.mutable_params(), gh, [&](Eigen::Index i) {
            const auto l = of[static_cast<std::size_t>(i)];
            nn::Network::Cache c;
            const Mat y = probe.forward_range(cache.head.inputs[l], l, probe.layer_count(), &c);
            return nn::Probe{nn::MseLoss::value(y.array().tanh().matrix(), target), nn::sign_fingerprint(probe, c)};
        }, h);
    }
    return r;
}

} // namespace kinoforge::ikd
