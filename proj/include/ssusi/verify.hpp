#pragma once

#include <string>
#include <vector>

#include "ssusi/train.hpp"

namespace ssusi {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    double limit = 0.0;
    bool ok() const { return max_rel_err < limit; }
};

namespace detail {

inline Mat verify_rand(int r, int c, uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Mat m(r, c);
    for (auto& v : m.a) v = scale * rng.normal();
    return m;
}

inline Mat verify_pos(int r, int c, uint64_t seed, double lo, double hi) {
    Rng rng(seed);
    Mat m(r, c);
    for (auto& v : m.a) v = rng.uniform(lo, hi);
    return m;
}

// Hand-built low-dimensional sample so full training graphs stay inside the
// finite-difference budget.
inline TrainSample toy_sample(int feat_dim, int n_profiles, uint64_t seed) {
    const int T = 5, Tp = 4;
    TrainSample s;
    s.mix.mix_feat.values = verify_rand(T, feat_dim, mix_seed(seed, 1), 0.8);
    s.mix.mix_mag.values = verify_pos(T, feat_dim, mix_seed(seed, 2), 0.1, 1.5);
    s.mix.targets.first.values = verify_pos(T, feat_dim, mix_seed(seed, 3), 0.0, 1.0);
    s.mix.targets.second.values = verify_pos(T, feat_dim, mix_seed(seed, 4), 0.0, 1.0);
    s.mix.speaker_ids = {0, 1};
    for (int p = 0; p < n_profiles; ++p) {
        SpeakerProfile prof;
        prof.speaker_id = p;
        prof.features.values = verify_rand(Tp, feat_dim, mix_seed(seed, 10 + p), 0.8);
        s.inventory.profiles.push_back(std::move(prof));
    }
    s.inventory.relevant_ids = std::make_pair(0, 1);
    return s;
}

inline NormalizationStats toy_stats(int feat_dim) {
    NormalizationStats st;
    st.mean.assign(feat_dim, 0.1);
    st.stdev.assign(feat_dim, 1.2);
    return st;
}

}  // namespace detail

// Finite-difference verification of every layer kind in isolation plus the
// full loss graph of each training regime at toy size.
inline std::vector<GradCheckEntry> run_gradient_battery(uint64_t seed = 12345) {
    using nnet::gradcheck;
    std::vector<GradCheckEntry> out;

    auto isolated = [&](const std::string& name, auto builder) {
        ModelParams p;
        auto loss_fn = builder(p);
        out.push_back({name, gradcheck(p, loss_fn).max_rel_err, 1e-4});
    };

    isolated("linear_bias_sigmoid", [&](ModelParams& p) {
        p.tensors.emplace("W", Tensor(4, 3));
        p.tensors.emplace("b", Tensor(1, 3));
        p.at("W").value = detail::verify_rand(4, 3, mix_seed(seed, 1), 0.5);
        p.at("b").value = detail::verify_rand(1, 3, mix_seed(seed, 2), 0.5);
        const Mat x = detail::verify_rand(6, 4, mix_seed(seed, 3));
        const Mat tgt = detail::verify_rand(6, 3, mix_seed(seed, 4), 0.3);
        return [&p, x, tgt](bool with_grad) {
            Graph g;
            auto y = g.sigmoid(
                g.bias_add(g.matmul(g.constant(x), g.param(p.at("W"))), g.param(p.at("b"))));
            auto loss = g.sum_sq(g.sub(y, g.constant(tgt)));
            if (with_grad) g.backward(loss);
            return g.scalar(loss);
        };
    });

    isolated("tanh_mul_concat_slice", [&](ModelParams& p) {
        p.tensors.emplace("A", Tensor(3, 6));
        p.at("A").value = detail::verify_rand(3, 6, mix_seed(seed, 5), 0.7);
        const Mat tgt = detail::verify_rand(3, 6, mix_seed(seed, 6), 0.4);
        return [&p, tgt](bool with_grad) {
            Graph g;
            auto a = g.param(p.at("A"));
            auto y = g.concat_cols({g.tanh(g.slice_cols(a, 0, 3)),
                                    g.mul(g.slice_cols(a, 3, 6), g.slice_cols(a, 0, 3))});
            auto loss = g.sum_sq(g.sub(y, g.constant(tgt)));
            if (with_grad) g.backward(loss);
            return g.scalar(loss);
        };
    });

    isolated("softmax_attention", [&](ModelParams& p) {
        p.tensors.emplace("Q", Tensor(4, 3));
        p.tensors.emplace("K", Tensor(5, 3));
        p.at("Q").value = detail::verify_rand(4, 3, mix_seed(seed, 7), 0.8);
        p.at("K").value = detail::verify_rand(5, 3, mix_seed(seed, 8), 0.8);
        const Mat tgt = detail::verify_rand(4, 3, mix_seed(seed, 9), 0.3);
        return [&p, tgt](bool with_grad) {
            Graph g;
            auto q = g.param(p.at("Q"));
            auto k = g.param(p.at("K"));
            auto y = g.matmul(g.softmax_rows(g.matmul_nt(q, k)), k);
            auto loss = g.sum_sq(g.sub(y, g.constant(tgt)));
            if (with_grad) g.backward(loss);
            return g.scalar(loss);
        };
    });

    isolated("log_normalize", [&](ModelParams& p) {
        p.tensors.emplace("M", Tensor(4, 3));
        p.at("M").value = detail::verify_pos(4, 3, mix_seed(seed, 10), 0.1, 2.0);
        const Mat tgt = detail::verify_rand(4, 3, mix_seed(seed, 11), 0.4);
        return [&p, tgt](bool with_grad) {
            Graph g;
            auto y = g.normalize_cols(g.log_shift(g.param(p.at("M")), kLogFloor),
                                      {0.3, -0.2, 0.5}, {2.0, 0.7, 1.3});
            auto loss = g.sum_sq(g.sub(y, g.constant(tgt)));
            if (with_grad) g.backward(loss);
            return g.scalar(loss);
        };
    });

    isolated("recurrent_layer", [&](ModelParams& p) {
        const int in = 3, h = 4, T = 10;
        p.tensors.emplace("Wx", Tensor(in, 3 * h));
        p.tensors.emplace("Wh", Tensor(h, 3 * h));
        p.tensors.emplace("bx", Tensor(1, 3 * h));
        p.tensors.emplace("bh", Tensor(1, 3 * h));
        p.at("Wx").value = detail::verify_rand(in, 3 * h, mix_seed(seed, 12), 0.5);
        p.at("Wh").value = detail::verify_rand(h, 3 * h, mix_seed(seed, 13), 0.5);
        p.at("bx").value = detail::verify_rand(1, 3 * h, mix_seed(seed, 14), 0.3);
        p.at("bh").value = detail::verify_rand(1, 3 * h, mix_seed(seed, 15), 0.3);
        const Mat x = detail::verify_rand(T, in, mix_seed(seed, 16));
        const Mat tgt = detail::verify_rand(T, h, mix_seed(seed, 17), 0.5);
        return [&p, x, tgt](bool with_grad) {
            Graph g;
            auto y = g.gru(g.constant(x), g.param(p.at("Wx")), g.param(p.at("Wh")),
                           g.param(p.at("bx")), g.param(p.at("bh")), false);
            auto loss = g.sum_sq(g.sub(y, g.constant(tgt)));
            if (with_grad) g.backward(loss);
            return g.scalar(loss);
        };
    });

    // selection objective through the full correlation stack
    {
        ModelParams p;
        p.tensors.emplace("mix", Tensor(4, 3));
        p.tensors.emplace("p0", Tensor(3, 3));
        p.tensors.emplace("p1", Tensor(5, 3));
        p.tensors.emplace("p2", Tensor(2, 3));
        p.at("mix").value = detail::verify_rand(4, 3, mix_seed(seed, 20), 0.8);
        p.at("p0").value = detail::verify_rand(3, 3, mix_seed(seed, 21), 0.8);
        p.at("p1").value = detail::verify_rand(5, 3, mix_seed(seed, 22), 0.8);
        p.at("p2").value = detail::verify_rand(2, 3, mix_seed(seed, 23), 0.8);
        auto loss_fn = [&p](bool with_grad) {
            Graph g;
            const CorrelationResult corr = correlate(
                g, g.param(p.at("mix")),
                {g.param(p.at("p0")), g.param(p.at("p1")), g.param(p.at("p2"))}, {0, 1, 2});
            const Graph::NodeId loss = selection_loss(g, corr, 0, 2);
            if (with_grad) g.backward(loss);
            return g.scalar(loss);
        };
        out.push_back({"selection_objective", nnet::gradcheck(p, loss_fn).max_rel_err, 1e-6});
    }

    // permutation-invariant objective with respect to the masks
    {
        const int T = 3, F = 4;
        ModelParams p;
        p.tensors.emplace("pre1", Tensor(T, F));
        p.tensors.emplace("pre2", Tensor(T, F));
        p.at("pre1").value = detail::verify_rand(T, F, mix_seed(seed, 30), 0.7);
        p.at("pre2").value = detail::verify_rand(T, F, mix_seed(seed, 31), 0.7);
        const Mat xm = detail::verify_pos(T, F, mix_seed(seed, 32), 0.5, 2.0);
        const Mat y1 = detail::verify_pos(T, F, mix_seed(seed, 33), 0.0, 1.0);
        const Mat y2 = detail::verify_pos(T, F, mix_seed(seed, 34), 0.0, 1.0);
        auto loss_fn = [&](bool with_grad) {
            Graph g;
            MaskNodes masks{g.sigmoid(g.param(p.at("pre1"))), g.sigmoid(g.param(p.at("pre2")))};
            const PitOutcome pit =
                pit_loss(g, masks, g.constant(xm), g.constant(y1), g.constant(y2));
            if (with_grad) g.backward(pit.loss_node);
            return pit.loss;
        };
        out.push_back({"separation_objective", nnet::gradcheck(p, loss_fn).max_rel_err, 1e-6});
    }

    // full training graphs, one per regime, tiny feature dimension
    const int F = 6;
    NetConfig net;
    net.feat_dim = F;
    net.embed_dim = 3;
    net.hidden = 4;
    net.layers = 1;
    const NormalizationStats stats = detail::toy_stats(F);
    for (Regime r : {Regime::pit, Regime::ssusi_sep, Regime::ssusi_pse, Regime::ssusi_jt,
                     Regime::ssues_jt}) {
        TrainConfig cfg;
        cfg.regime = r;
        cfg.net = net;
        const int n_prof = (r == Regime::ssusi_sep || r == Regime::pit) ? 2 : 4;
        const TrainSample s = detail::toy_sample(F, n_prof, mix_seed(seed, 40));
        ModelParams p = make_model(net, mix_seed(seed, 41));
        // push the two mask heads apart; a fresh init leaves both masks near
        // 0.5 and the permutation argmin at a tie, which finite differences
        // would flip
        {
            Mat& b = p.at("separator.out.b").value;
            for (int c = 0; c < F; ++c) {
                b(0, c) += 1.0;
                b(0, F + c) -= 1.0;
            }
        }
        apply_regime_freezing(p, r);
        // undo the per-bin normalization of the logged value; the gradient is
        // taken on the raw Frobenius objective
        const double denom = r == Regime::ssusi_pse
                                 ? 1.0
                                 : static_cast<double>(s.mix.mix_feat.values.rows) * F;
        auto loss_fn = [&, denom](bool with_grad) {
            return denom * sample_loss_backward(p, cfg, s, stats, with_grad);
        };
        const double limit = r == Regime::ssusi_pse ? 1e-4 : 1e-3;
        out.push_back({std::string("graph_") + regime_name(r),
                       nnet::gradcheck(p, loss_fn).max_rel_err, limit});
    }

    return out;
}

// Structural check: with argmax-based selection, the selection embedding sits
// outside the differentiated path of the joint objective.
inline bool non_selected_gradients_are_zero(uint64_t seed = 54321) {
    const int F = 6;
    NetConfig net;
    net.feat_dim = F;
    net.embed_dim = 3;
    net.hidden = 4;
    net.layers = 1;
    TrainConfig cfg;
    cfg.regime = Regime::ssusi_jt;
    cfg.net = net;
    const TrainSample s = detail::toy_sample(F, 5, mix_seed(seed, 1));
    ModelParams p = make_model(net, mix_seed(seed, 2));
    sample_loss_backward(p, cfg, s, detail::toy_stats(F));
    for (const auto& [name, t] : p.tensors)
        if (name.rfind("sel_emb.", 0) == 0)
            for (double v : t.grad.a)
                if (v != 0.0) return false;
    return true;
}

}  // namespace ssusi
