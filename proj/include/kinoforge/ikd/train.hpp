#pragma once

#include <chrono>
#include <exception>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "kinoforge/common/random.hpp"
#include "kinoforge/datagen/sample.hpp"
#include "kinoforge/ikd/model.hpp"
#include "kinoforge/nn/optim.hpp"

namespace kinoforge::ikd {

struct TrainConfig {
    int epochs = 50;
    int batch = 64;
    double lr = 3e-4;
    std::uint64_t seed = 1;
    int hidden = 64;
    int k = kDefaultK;
    int jobs = 1;
};

struct TrainResult {
    IkdModel model;
    std::vector<double> train_loss; // mean over the epoch's minibatches
    std::vector<double> test_loss;  // full test split after the epoch, newest patch per sample
    double seconds = 0;
};

/// Per-epoch observer: (epoch counted from 0, train_loss, test_loss).
using EpochCallback = std::function<void(int, double, double)>;

// Gradients are accumulated over fixed 16-sample chunks and reduced in chunk order, so the
// result is bitwise independent of the number of worker threads.
inline constexpr int kGradChunk = 16;

namespace detail {

    using Samples = std::vector<datagen::TrainingSample>;

    inline Mat labels_of(const Samples &s, const std::vector<std::size_t> &idx)
    {
        Mat t(2, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) {
            t(0, static_cast<Eigen::Index>(j)) = normalize_v(s[idx[j]].label.v_cmd);
            t(1, static_cast<Eigen::Index>(j)) = normalize_w(s[idx[j]].label.omega_cmd);
        }
        return t;
    }

    /// pick(sample) returns the patch to use or nullptr for the zero embedding.
    template<class Pick>
    Batch assemble(const IkdModel &m, const Samples &s, const std::vector<std::size_t> &idx, Pick &&pick)
    {
        const int k = m.config().k;
        const Normalizer &nz = m.normalizer();
        const auto B = static_cast<Eigen::Index>(idx.size());
        Batch b;
        b.imu.resize(m.window_size(), B);
        b.desired.resize(2, B);
        b.patch_col.assign(idx.size(), -1);
        std::vector<const geometry::Patch *> chosen;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const auto &smp = s[idx[j]];
            if (smp.window.k != k || smp.window.values.size() != smp.window.expected_size())
                throw std::invalid_argument("sample " + std::to_string(idx[j]) + " has window k=" + std::to_string(smp.window.k)
                                            + ", model expects k=" + std::to_string(k));
            for (std::size_t i = 0; i < smp.window.values.size(); ++i)
                b.imu(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = nz.window_value(smp.window.values, i, k);
            b.desired(0, static_cast<Eigen::Index>(j)) = nz.desired_v(smp.desired.v_des);
            b.desired(1, static_cast<Eigen::Index>(j)) = nz.desired_w(smp.desired.omega_des);
            if (m.visual())
                if (const geometry::Patch *p = pick(smp)) {
                    b.patch_col[j] = static_cast<int>(chosen.size());
                    chosen.push_back(p);
                }
        }
        if (!chosen.empty()) {
            b.patches.resize(3 * geometry::kPatchSize * geometry::kPatchSize, static_cast<Eigen::Index>(chosen.size()));
            for (std::size_t c = 0; c < chosen.size(); ++c)
                patch_to_input(*chosen[c], b.patches.col(static_cast<Eigen::Index>(c)).data());
        }
        return b;
    }

    template<class Fn>
    void parallel_for(std::size_t n, int jobs, Fn &&fn)
    {
        if (jobs <= 1 || n <= 1) {
            for (std::size_t i = 0; i < n; ++i)
                fn(i);
            return;
        }
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t)
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = static_cast<std::size_t>(t); i < n; i += static_cast<std::size_t>(jobs))
                        fn(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(t)] = std::current_exception();
                }
            });
        for (auto &th : pool)
            th.join();
        for (auto &e : errors)
            if (e)
                std::rethrow_exception(e);
    }

} // namespace detail

/// Mean 0.5*||y - t||^2 over a sample set using each sample's newest patch.
inline double evaluate_loss(const IkdModel &m, const std::vector<datagen::TrainingSample> &s, int jobs = 1)
{
    if (s.empty())
        return 0.0;
    const std::size_t chunks = (s.size() + 255) / 256;
    std::vector<double> sums(chunks, 0.0);
    detail::parallel_for(chunks, jobs, [&](std::size_t c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = c * 256; i < std::min(s.size(), (c + 1) * 256); ++i)
            idx.push_back(i);
        const Batch b = detail::assemble(m, s, idx, [](const datagen::TrainingSample &x) {
            return x.patches.empty() ? nullptr : &x.patches.front();
        });
        sums[c] = 0.5 * (m.forward(b) - detail::labels_of(s, idx)).squaredNorm();
    });
    double total = 0;
    for (double v : sums)
        total += v;
    return total / static_cast<double>(s.size());
}

/// Minibatch Adam on the normalized-control MSE.  Each epoch draws one patch uniformly
/// from every sample's multi-view set.
inline TrainResult train(const std::vector<datagen::TrainingSample> &train_set,
                         const std::vector<datagen::TrainingSample> &test_set, const TrainConfig &cfg, Variant variant,
                         const EpochCallback &on_epoch = {})
{
    if (train_set.empty())
        throw std::invalid_argument("train: empty training split");
    if (cfg.epochs <= 0 || cfg.batch <= 0 || !(cfg.lr > 0) || cfg.hidden <= 0 || cfg.k <= 0)
        throw std::invalid_argument("train: epochs, batch, lr, hidden and k must be positive");
    if (variant == Variant::vi) {
        bool any = false;
        for (const auto &s : train_set)
            any = any || !s.patches.empty();
        if (!any)
            throw std::invalid_argument("train: variant vi needs patch sets, but no training sample has one");
    }
    const auto t0 = std::chrono::steady_clock::now();

    ModelConfig mc;
    mc.k = cfg.k;
    mc.hidden = cfg.hidden;
    mc.seed = cfg.seed;
    TrainResult out;
    out.model = IkdModel(variant, mc);
    IkdModel &model = out.model;
    {
        struct WindowRef {
            const std::vector<float> *p;
            std::size_t size() const { return p->size(); }
            float operator[](std::size_t i) const { return (*p)[i]; }
        };
        std::vector<WindowRef> windows;
        std::vector<DesiredTransition> desired;
        for (const auto &s : train_set) {
            windows.push_back({&s.window.values});
            desired.push_back(s.desired);
        }
        model.normalizer() = Normalizer::fit(windows, desired, cfg.k); // train split only
    }

    nn::AdamState a_imu, a_vis, a_head;
    Rng order_rng = named_stream(cfg.seed, "train-order");
    Rng patch_rng = named_stream(cfg.seed, "train-patches");
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::vector<int> pick(train_set.size(), -1);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, order_rng);
        for (std::size_t i = 0; i < train_set.size(); ++i)
            pick[i] = train_set[i].patches.empty()
                ? -1
                : static_cast<int>(uniform_index(patch_rng, train_set[i].patches.size()));

        double epoch_loss = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            const double B = static_cast<double>(stop - start);
            const std::size_t nchunks = (stop - start + kGradChunk - 1) / kGradChunk;
            struct ChunkOut {
                Vec gi, gv, gh;
                double loss = 0;
            };
            std::vector<ChunkOut> parts(nchunks);
            detail::parallel_for(nchunks, cfg.jobs, [&](std::size_t c) {
                std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start + c * kGradChunk),
                                             order.begin() + static_cast<std::ptrdiff_t>(std::min(stop, start + (c + 1) * kGradChunk)));
                const Batch b = detail::assemble(model, train_set, idx, [&](const datagen::TrainingSample &s) {
                    const int p = pick[static_cast<std::size_t>(&s - train_set.data())];
                    return p < 0 ? nullptr : &s.patches[static_cast<std::size_t>(p)];
                });
                IkdModel::Cache cache;
                const Mat y = model.forward(b, &cache);
                const Mat diff = y - detail::labels_of(train_set, idx);
                ChunkOut &o = parts[c];
                o.loss = 0.5 * diff.squaredNorm();
                o.gi = Vec::Zero(static_cast<Eigen::Index>(model.imu_net().param_count()));
                o.gv = Vec::Zero(static_cast<Eigen::Index>(model.visual() ? model.vis_net().param_count() : 0));
                o.gh = Vec::Zero(static_cast<Eigen::Index>(model.head_net().param_count()));
                model.backward(cache, diff / B, o.gi, o.gv, o.gh);
            });
            ChunkOut sum = std::move(parts[0]);
            for (std::size_t c = 1; c < nchunks; ++c) {
                sum.gi += parts[c].gi;
                sum.gv += parts[c].gv;
                sum.gh += parts[c].gh;
                sum.loss += parts[c].loss;
            }
            const double loss = sum.loss / B;
            if (!std::isfinite(loss))
                throw nn::NonFiniteError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch "
                                         + std::to_string(batches) + " (lr " + std::to_string(cfg.lr) + ")");
            nn::adam_step(model.imu_net(), sum.gi, a_imu, cfg.lr);
            if (model.visual())
                nn::adam_step(model.vis_net(), sum.gv, a_vis, cfg.lr);
            nn::adam_step(model.head_net(), sum.gh, a_head, cfg.lr);
            epoch_loss += loss;
            ++batches;
        }
        out.train_loss.push_back(epoch_loss / static_cast<double>(batches));
        out.test_loss.push_back(evaluate_loss(model, test_set, cfg.jobs));
        if (!std::isfinite(out.test_loss.back()))
            throw nn::NonFiniteError("train: non-finite test loss at epoch " + std::to_string(epoch));
        if (on_epoch)
            on_epoch(epoch, out.train_loss.back(), out.test_loss.back());
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

} // namespace kinoforge::ikd
