#pragma once

#include <cstdint>
#include <string>

#include "kinoforge/common/binary_io.hpp"
#include "kinoforge/nn/network.hpp"

namespace kinoforge::nn {

// Network block:
//   u32 layer_count
//   per layer: u8 kind, u8 act, u8 skip, i32 in, i32 out, i32 in_h, i32 in_w, i32 kernel, i32 stride
//   u64 init_seed, u64 param_count, f64[param_count] theta
inline void write_network(BinaryWriter &w, const Network &net)
{
    w.put<std::uint32_t>(static_cast<std::uint32_t>(net.layer_count()));
    for (const auto &s : net.specs()) {
        w.put<std::uint8_t>(static_cast<std::uint8_t>(s.kind));
        w.put<std::uint8_t>(static_cast<std::uint8_t>(s.act));
        w.put<std::uint8_t>(s.skip ? 1 : 0);
        for (int v : {s.in, s.out, s.in_h, s.in_w, s.kernel, s.stride})
            w.put<std::int32_t>(v);
    }
    w.put<std::uint64_t>(net.seed());
    w.put<std::uint64_t>(net.param_count());
    w.put_array(net.params().data(), net.param_count());
}

inline Network read_network(BinaryReader &r)
{
    const auto n = r.get<std::uint32_t>();
    if (n == 0 || n > 1024)
        throw FormatError("implausible layer count in network block");
    std::vector<LayerSpec> specs(n);
    for (auto &s : specs) {
        const auto kind = r.get<std::uint8_t>();
        const auto act = r.get<std::uint8_t>();
        if (kind > 3 || act > 1)
            throw FormatError("unknown layer kind or activation");
        s.kind = static_cast<LayerKind>(kind);
        s.act = static_cast<Activation>(act);
        s.skip = r.get<std::uint8_t>() != 0;
        s.in = r.get<std::int32_t>();
        s.out = r.get<std::int32_t>();
        s.in_h = r.get<std::int32_t>();
        s.in_w = r.get<std::int32_t>();
        s.kernel = r.get<std::int32_t>();
        s.stride = r.get<std::int32_t>();
    }
    const auto seed = r.get<std::uint64_t>();
    Network net(std::move(specs), seed);
    const auto count = r.get<std::uint64_t>();
    if (count != net.param_count())
        throw FormatError("parameter count does not match the layer specs");
    Vec theta(static_cast<Eigen::Index>(count));
    r.get_array(theta.data(), count);
    net.set_params(theta);
    return net;
}

inline void save_network(const std::string &path, const Network &net)
{
    BinaryWriter w(path);
    w.magic("KFNET001");
    write_network(w, net);
    w.close();
}

inline Network load_network(const std::string &path)
{
    BinaryReader r(path);
    r.expect_magic("KFNET001");
    return read_network(r);
}

} // namespace kinoforge::nn
