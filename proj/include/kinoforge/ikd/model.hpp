#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinoforge/geometry/bev.hpp"
#include "kinoforge/ikd/inputs.hpp"
#include "kinoforge/nn/network.hpp"
#include "kinoforge/nn/serialize.hpp"

namespace kinoforge::ikd {

using nn::Mat;
using nn::Vec;

enum class Variant { imu, vi };

inline const char *variant_name(Variant v) { return v == Variant::imu ? "imu" : "vi"; }
inline Variant parse_variant(const std::string &s)
{
    if (s == "imu")
        return Variant::imu;
    if (s == "vi")
        return Variant::vi;
    throw std::invalid_argument("unknown variant '" + s + "' (expected imu or vi)");
}

struct ModelConfig {
    int k = kDefaultK;
    int hidden = 64;
    int conv1 = 4;
    int conv2 = 8;
    std::uint64_t seed = 1;
};

/// Inputs for a batch of B samples.  Only samples with a patch go through the conv encoder;
/// patch_col[b] is the column of `patches` for sample b, or -1 for the zero embedding.
struct Batch {
    Mat imu;     // (6k + 2) x B, normalized
    Mat desired; // 2 x B, normalized
    Mat patches; // 3*64*64 x P
    std::vector<int> patch_col;

    Eigen::Index size() const { return imu.cols(); }
};

/// The IMU-IKD and VI-IKD networks: a 3-layer skip MLP over the inertial window, an
/// optional 2-layer conv encoder over the patch, and a 3-layer skip MLP head.
class IkdModel {
public:
    struct Cache {
        nn::Network::Cache imu, vis, head;
        Mat y; // tanh outputs, 2 x B
        std::vector<int> patch_col;
    };

    IkdModel() = default;

    IkdModel(Variant variant, const ModelConfig &cfg) : variant_(variant), cfg_(cfg)
    {
        const int h = cfg.hidden;
        const int in = kImuChannels * cfg.k + 2;
        imu_ = nn::Network({nn::LayerSpec::dense(in, h), nn::LayerSpec::dense(h, h, nn::Activation::leaky, true),
                            nn::LayerSpec::dense(h, h, nn::Activation::leaky, true)},
                           splitmix64(cfg.seed ^ 0x1));
        int head_in = h + 2;
        if (variant == Variant::vi) {
            const auto c1 = nn::LayerSpec::conv(3, cfg.conv1, geometry::kPatchSize, geometry::kPatchSize);
            const auto c2 = nn::LayerSpec::conv(cfg.conv1, cfg.conv2, c1.out_h(), c1.out_w());
            vis_ = nn::Network({c1, c2, nn::LayerSpec::flatten(c2.out_features())}, splitmix64(cfg.seed ^ 0x2));
            head_in += c2.out_features();
        }
        head_ = nn::Network({nn::LayerSpec::dense(head_in, h), nn::LayerSpec::dense(h, h, nn::Activation::leaky, true),
                             nn::LayerSpec::dense(h, 2, nn::Activation::linear)},
                            splitmix64(cfg.seed ^ 0x3));
    }

    Variant variant() const { return variant_; }
    const ModelConfig &config() const { return cfg_; }
    bool visual() const { return variant_ == Variant::vi; }
    int visual_dim() const { return visual() ? vis_.out_features() : 0; }
    int window_size() const { return kImuChannels * cfg_.k + 2; }

    nn::Network &imu_net() { return imu_; }
    nn::Network &vis_net() { return vis_; }
    nn::Network &head_net() { return head_; }
    const nn::Network &imu_net() const { return imu_; }
    const nn::Network &vis_net() const { return vis_; }
    const nn::Network &head_net() const { return head_; }
    Normalizer &normalizer() { return norm_; }
    const Normalizer &normalizer() const { return norm_; }

    std::size_t param_count() const { return imu_.param_count() + head_.param_count() + (visual() ? vis_.param_count() : 0); }

    /// Visual embeddings for the batch: zeros where no patch is attached.
    Mat visual_embedding(const Batch &b, nn::Network::Cache *cache) const
    {
        Mat emb = Mat::Zero(vis_.out_features(), b.size());
        if (b.patches.cols() == 0) {
            if (cache)
                *cache = nn::Network::Cache{};
            return emb;
        }
        const Mat e = vis_.forward(b.patches, cache);
        for (Eigen::Index i = 0; i < b.size(); ++i)
            if (b.patch_col[static_cast<std::size_t>(i)] >= 0)
                emb.col(i) = e.col(b.patch_col[static_cast<std::size_t>(i)]);
        return emb;
    }

    /// Normalized controls in [-1, 1]^2 (v row 0, w row 1).
    Mat forward(const Batch &b, Cache *cache = nullptr) const
    {
        return forward_with_embedding(b, visual() ? visual_embedding(b, cache ? &cache->vis : nullptr) : Mat(), cache);
    }

    /// Same as forward but with an explicit visual embedding (zero-patch equivalence hook).
    Mat forward_with_embedding(const Batch &b, const Mat &vis_emb, Cache *cache = nullptr) const
    {
        if (b.imu.rows() != window_size())
            throw std::invalid_argument("inertial window has " + std::to_string(b.imu.rows()) + " values, model expects "
                                        + std::to_string(window_size()));
        const Mat ie = imu_.forward(b.imu, cache ? &cache->imu : nullptr);
        Mat hin(head_.in_features(), b.size());
        hin.topRows(ie.rows()) = ie;
        hin.middleRows(ie.rows(), 2) = b.desired;
        if (visual())
            hin.bottomRows(vis_emb.rows()) = vis_emb;
        Mat y = head_.forward(hin, cache ? &cache->head : nullptr).array().tanh().matrix();
        if (cache) {
            cache->y = y;
            cache->patch_col = b.patch_col;
        }
        return y;
    }

    /// Gradients of a loss with dL/dy = dy (y = tanh outputs) into the three parameter vectors.
    void backward(const Cache &c, const Mat &dy, Vec &g_imu, Vec &g_vis, Vec &g_head) const
    {
        const Mat dout = dy.cwiseProduct((1.0 - c.y.array().square()).matrix());
        const Mat dhin = head_.backward(c.head, dout, g_head, true);
        const int h = imu_.out_features();
        imu_.backward(c.imu, dhin.topRows(h), g_imu, false);
        if (visual() && !c.vis.inputs.empty()) {
            const Eigen::Index np = c.vis.inputs.front().cols();
            Mat dvis = Mat::Zero(vis_.out_features(), np);
            for (std::size_t i = 0; i < c.patch_col.size(); ++i)
                if (c.patch_col[i] >= 0)
                    dvis.col(c.patch_col[i]) += dhin.col(static_cast<Eigen::Index>(i)).bottomRows(vis_.out_features());
            vis_.backward(c.vis, dvis, g_vis, false);
        }
    }

    // --- single-sample inference -------------------------------------------------------

    Batch make_batch(const DesiredTransition &d, const InertialWindow &w, const geometry::Patch *patch) const
    {
        if (w.k != cfg_.k || w.values.size() != w.expected_size())
            throw std::invalid_argument("inertial window length mismatch: model k=" + std::to_string(cfg_.k)
                                        + ", window k=" + std::to_string(w.k));
        Batch b;
        b.imu.resize(window_size(), 1);
        for (std::size_t i = 0; i < w.values.size(); ++i)
            b.imu(static_cast<Eigen::Index>(i), 0) = norm_.window_value(w.values, i, cfg_.k);
        b.desired.resize(2, 1);
        b.desired << norm_.desired_v(d.v_des), norm_.desired_w(d.omega_des);
        b.patch_col.assign(1, -1);
        if (patch && visual()) {
            b.patches.resize(3 * geometry::kPatchSize * geometry::kPatchSize, 1);
            patch_to_input(*patch, b.patches.data());
            b.patch_col[0] = 0;
        }
        return b;
    }

    sim::Control infer(const DesiredTransition &d, const InertialWindow &w, const geometry::Patch *patch = nullptr,
                       double issue_time = 0) const
    {
        const Mat y = forward(make_batch(d, w, patch));
        // tanh keeps both outputs strictly inside the Control ranges
        return sim::Control::clamped(denormalize_v(y(0, 0)), denormalize_w(y(1, 0)), issue_time);
    }

    // --- checkpoint ----------------------------------------------------------------------
    // magic "KFCKPT01"; variant string; i32 k, hidden, conv1, conv2; u64 seed;
    // f64[10] norm mean, f64[10] norm std; string metadata; networks imu, [vis], head.
    void save(const std::string &path, const std::string &metadata = "") const
    {
        BinaryWriter w(path);
        w.magic("KFCKPT01");
        w.put_string(variant_name(variant_));
        for (int v : {cfg_.k, cfg_.hidden, cfg_.conv1, cfg_.conv2})
            w.put<std::int32_t>(v);
        w.put<std::uint64_t>(cfg_.seed);
        w.put_array(norm_.mean.data(), norm_.mean.size());
        w.put_array(norm_.stddev.data(), norm_.stddev.size());
        w.put_string(metadata);
        nn::write_network(w, imu_);
        if (visual())
            nn::write_network(w, vis_);
        nn::write_network(w, head_);
        w.close();
    }

    static IkdModel load(const std::string &path, std::string *metadata = nullptr)
    {
        BinaryReader r(path);
        r.expect_magic("KFCKPT01");
        const Variant v = parse_variant(r.get_string());
        ModelConfig cfg;
        cfg.k = r.get<std::int32_t>();
        cfg.hidden = r.get<std::int32_t>();
        cfg.conv1 = r.get<std::int32_t>();
        cfg.conv2 = r.get<std::int32_t>();
        cfg.seed = r.get<std::uint64_t>();
        IkdModel m(v, cfg);
        r.get_array(m.norm_.mean.data(), m.norm_.mean.size());
        r.get_array(m.norm_.stddev.data(), m.norm_.stddev.size());
        const std::string meta = r.get_string();
        if (metadata)
            *metadata = meta;
        auto take = [&](nn::Network &dst) {
            nn::Network n = nn::read_network(r);
            if (n.specs() != dst.specs())
                throw FormatError("checkpoint network layout does not match its header");
            dst = std::move(n);
        };
        take(m.imu_);
        if (m.visual())
            take(m.vis_);
        take(m.head_);
        return m;
    }

private:
    Variant variant_ = Variant::imu;
    ModelConfig cfg_;
    nn::Network imu_, vis_, head_;
    Normalizer norm_;
};

} // namespace kinoforge::ikd
