#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ssusi/graph.hpp"
#include "ssusi/signal.hpp"

namespace ssusi {

using nnet::Graph;
using nnet::ModelParams;
using nnet::Tensor;

// Version tag for the separator input layout
// [features | mixture embedding | bias_1 | bias_2].
constexpr uint32_t kConcatOrderVersion = 1;

struct NetConfig {
    int feat_dim = kNumBins;  // 257
    int embed_dim = 32;       // E
    int hidden = 64;          // per direction
    int layers = 2;           // recurrent layers per module

    int separator_in() const { return feat_dim + 3 * embed_dim; }
};

namespace detail {

inline void add_bigru_layer(ModelParams& p, const std::string& prefix, int in_dim, int hidden,
                            Rng& rng) {
    for (const char* dir : {"fwd", "bwd"}) {
        auto mk = [&](const std::string& name, int r, int c, int fan_in) {
            Tensor t(r, c);
            if (fan_in > 0) nnet::init_uniform(t.value, fan_in, rng);
            p.tensors.emplace(prefix + "." + dir + "." + name, std::move(t));
        };
        mk("Wx", in_dim, 3 * hidden, in_dim);
        mk("Wh", hidden, 3 * hidden, hidden);
        mk("bx", 1, 3 * hidden, 0);
        mk("bh", 1, 3 * hidden, 0);
    }
}

inline void add_linear(ModelParams& p, const std::string& prefix, int in_dim, int out_dim,
                       Rng& rng) {
    Tensor w(in_dim, out_dim);
    nnet::init_uniform(w.value, in_dim, rng);
    p.tensors.emplace(prefix + ".W", std::move(w));
    p.tensors.emplace(prefix + ".b", Tensor(1, out_dim));
}

}  // namespace detail

// Three learnable modules: the selection-stage embedding net, the
// separation-stage embedding net, and the separator.
inline ModelParams make_model(const NetConfig& cfg, uint64_t init_seed) {
    ModelParams p;
    p.init_seed = init_seed;
    // One RNG stream per module so module sizes can change independently.
    const auto module_tag = [](const std::string& s) {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
        return h;
    };
    for (const char* mod : {"sel_emb", "sep_emb"}) {
        Rng rng(mix_seed(init_seed, module_tag(mod)));
        int in = cfg.feat_dim;
        for (int l = 0; l < cfg.layers; ++l) {
            detail::add_bigru_layer(p, std::string(mod) + ".l" + std::to_string(l), in, cfg.hidden,
                                    rng);
            in = 2 * cfg.hidden;
        }
        detail::add_linear(p, std::string(mod) + ".proj", in, cfg.embed_dim, rng);
    }
    {
        Rng rng(mix_seed(init_seed, module_tag("separator")));
        int in = cfg.separator_in();
        for (int l = 0; l < cfg.layers; ++l) {
            detail::add_bigru_layer(p, "separator.l" + std::to_string(l), in, cfg.hidden, rng);
            in = 2 * cfg.hidden;
        }
        detail::add_linear(p, "separator.out", in, 2 * cfg.feat_dim, rng);
    }
    return p;
}

inline Graph::NodeId bigru_forward(Graph& g, ModelParams& p, const std::string& prefix,
                                   Graph::NodeId x) {
    auto dir = [&](const char* d, bool rev) {
        const std::string q = prefix + "." + d + ".";
        return g.gru(x, g.param(p.at(q + "Wx")), g.param(p.at(q + "Wh")), g.param(p.at(q + "bx")),
                     g.param(p.at(q + "bh")), rev);
    };
    return g.concat_cols({dir("fwd", false), dir("bwd", true)});
}

// Embedding module: stacked BiGRU + linear projection to T x E.
inline Graph::NodeId embed_forward(Graph& g, ModelParams& p, const NetConfig& cfg,
                                   const std::string& mod, Graph::NodeId feat) {
    Graph::NodeId h = feat;
    for (int l = 0; l < cfg.layers; ++l) h = bigru_forward(g, p, mod + ".l" + std::to_string(l), h);
    h = g.matmul(h, g.param(p.at(mod + ".proj.W")));
    return g.bias_add(h, g.param(p.at(mod + ".proj.b")));
}

// Separator: concatenated input -> stacked BiGRU -> linear -> sigmoid -> 2 masks.
struct MaskNodes {
    Graph::NodeId m1;
    Graph::NodeId m2;
};

inline MaskNodes separator_forward(Graph& g, ModelParams& p, const NetConfig& cfg,
                                   Graph::NodeId feat, Graph::NodeId mix_emb, Graph::NodeId bias1,
                                   Graph::NodeId bias2) {
    Graph::NodeId h = g.concat_cols({feat, mix_emb, bias1, bias2});
    for (int l = 0; l < cfg.layers; ++l) h = bigru_forward(g, p, "separator.l" + std::to_string(l), h);
    h = g.matmul(h, g.param(p.at("separator.out.W")));
    h = g.bias_add(h, g.param(p.at("separator.out.b")));
    h = g.sigmoid(h);
    return {g.slice_cols(h, 0, cfg.feat_dim), g.slice_cols(h, cfg.feat_dim, 2 * cfg.feat_dim)};
}

// ---- checkpoint I/O -------------------------------------------------------
// Binary layout: magic "SSUSICKP", u32 version, u32 concat order version,
// u32 x4 net dims, u64 init seed, u32 tensor count, then per tensor:
// u32 name length, name bytes, u32 rows, u32 cols, rows*cols little-endian f64.

namespace detail {

inline void ck_put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<char*>(&v), 4); }
inline void ck_put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<char*>(&v), 8); }
inline uint32_t ck_get_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
inline uint64_t ck_get_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ModelParams& p, const NetConfig& cfg) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write("SSUSICKP", 8);
    detail::ck_put_u32(os, 1);
    detail::ck_put_u32(os, kConcatOrderVersion);
    detail::ck_put_u32(os, static_cast<uint32_t>(cfg.feat_dim));
    detail::ck_put_u32(os, static_cast<uint32_t>(cfg.embed_dim));
    detail::ck_put_u32(os, static_cast<uint32_t>(cfg.hidden));
    detail::ck_put_u32(os, static_cast<uint32_t>(cfg.layers));
    detail::ck_put_u64(os, p.init_seed);
    detail::ck_put_u32(os, static_cast<uint32_t>(p.tensors.size()));
    for (const auto& [name, t] : p.tensors) {
        detail::ck_put_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::ck_put_u32(os, static_cast<uint32_t>(t.value.rows));
        detail::ck_put_u32(os, static_cast<uint32_t>(t.value.cols));
        os.write(reinterpret_cast<const char*>(t.value.a.data()),
                 static_cast<std::streamsize>(t.value.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline ModelParams load_checkpoint(const std::string& path, NetConfig& cfg_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::memcmp(magic, "SSUSICKP", 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    const uint32_t version = detail::ck_get_u32(is);
    const uint32_t concat = detail::ck_get_u32(is);
    if (version != 1 || concat != kConcatOrderVersion)
        throw std::runtime_error("load_checkpoint: incompatible checkpoint version");
    cfg_out.feat_dim = static_cast<int>(detail::ck_get_u32(is));
    cfg_out.embed_dim = static_cast<int>(detail::ck_get_u32(is));
    cfg_out.hidden = static_cast<int>(detail::ck_get_u32(is));
    cfg_out.layers = static_cast<int>(detail::ck_get_u32(is));
    ModelParams p;
    p.init_seed = detail::ck_get_u64(is);
    const uint32_t n = detail::ck_get_u32(is);
    for (uint32_t i = 0; i < n; ++i) {
        const uint32_t len = detail::ck_get_u32(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        const int rows = static_cast<int>(detail::ck_get_u32(is));
        const int cols = static_cast<int>(detail::ck_get_u32(is));
        Tensor t(rows, cols);
        is.read(reinterpret_cast<char*>(t.value.a.data()),
                static_cast<std::streamsize>(t.value.size() * sizeof(double)));
        p.tensors.emplace(std::move(name), std::move(t));
    }
    if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);
    return p;
}

// Copy the separation-stage embedding weights into the selection slots;
// SSUSI-SEP shares one embedding module between both stages.
inline void tie_selection_embedding(ModelParams& p) {
    for (auto& [name, t] : p.tensors) {
        if (name.rfind("sep_emb.", 0) == 0) {
            const std::string sel = "sel_emb." + name.substr(8);
            p.at(sel).value = t.value;
        }
    }
}

}  // namespace ssusi
