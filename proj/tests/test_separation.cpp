#include <catch2/catch_amalgamated.hpp>

#include "ssusi/pipeline.hpp"
#include "ssusi/separation.hpp"

using namespace ssusi;
using nnet::gradcheck;

namespace {

Mat random_mat(int r, int c, uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Mat m(r, c);
    for (auto& v : m.a) v = scale * rng.normal();
    return m;
}

Mat random_pos(int r, int c, uint64_t seed, double lo = 0.0, double hi = 1.0) {
    Rng rng(seed);
    Mat m(r, c);
    for (auto& v : m.a) v = rng.uniform(lo, hi);
    return m;
}

}  // namespace

TEST_CASE("bias alignment matches a direct-loop recomputation") {
    const Mat mix = random_mat(5, 4, 1);
    const Mat prof = random_mat(7, 4, 2);
    Graph g;
    const Graph::NodeId bias = align_bias(g, g.constant(mix), g.constant(prof));
    const Mat& got = g.value(bias);

    for (int i = 0; i < mix.rows; ++i) {
        std::vector<double> score(prof.rows);
        double mx = -1e300;
        for (int j = 0; j < prof.rows; ++j) {
            double d = 0.0;
            for (int e = 0; e < 4; ++e) d += mix(i, e) * prof(j, e);
            score[j] = d;
            mx = std::max(mx, d);
        }
        double denom = 0.0;
        for (double s : score) denom += std::exp(s - mx);
        for (int e = 0; e < 4; ++e) {
            double v = 0.0;
            for (int j = 0; j < prof.rows; ++j)
                v += std::exp(score[j] - mx) / denom * prof(j, e);
            REQUIRE(got(i, e) == Catch::Approx(v).margin(1e-12));
        }
    }
}

TEST_CASE("alignment attention rows form a convex combination") {
    const Mat mix = random_mat(6, 3, 3, 2.0);
    const Mat prof = random_mat(4, 3, 4, 2.0);
    Graph g;
    const Graph::NodeId attn =
        g.softmax_rows(g.matmul_nt(g.constant(mix), g.constant(prof)));
    for (int i = 0; i < 6; ++i) {
        double s = 0.0;
        for (int j = 0; j < 4; ++j) {
            REQUIRE(g.value(attn)(i, j) >= 0.0);
            s += g.value(attn)(i, j);
        }
        REQUIRE(s == Catch::Approx(1.0).margin(1e-12));
    }

    // hence every bias coordinate stays inside the profile's coordinate range
    const Mat& bias = g.value(align_bias(g, g.constant(mix), g.constant(prof)));
    for (int e = 0; e < 3; ++e) {
        double lo = 1e300, hi = -1e300;
        for (int j = 0; j < 4; ++j) {
            lo = std::min(lo, prof(j, e));
            hi = std::max(hi, prof(j, e));
        }
        for (int i = 0; i < 6; ++i) {
            REQUIRE(bias(i, e) >= lo - 1e-12);
            REQUIRE(bias(i, e) <= hi + 1e-12);
        }
    }
}

TEST_CASE("single-frame profile alignment copies that frame everywhere") {
    const Mat prof = random_mat(1, 3, 5);
    Graph g;
    const Mat& bias = g.value(align_bias(g, g.constant(random_mat(4, 3, 6)), g.constant(prof)));
    for (int i = 0; i < 4; ++i)
        for (int e = 0; e < 3; ++e) REQUIRE(bias(i, e) == Catch::Approx(prof(0, e)).margin(1e-14));
}

TEST_CASE("pit loss matches a brute-force evaluation of both pairings") {
    const int T = 4, F = 5;
    const Mat xm = random_pos(T, F, 10, 0.1, 2.0);
    const Mat y1 = random_pos(T, F, 11, 0.0, 1.5);
    const Mat y2 = random_pos(T, F, 12, 0.0, 1.5);
    const Mat m1 = random_pos(T, F, 13);
    const Mat m2 = random_pos(T, F, 14);

    Graph g;
    MaskNodes masks{g.constant(m1), g.constant(m2)};
    const PitOutcome out =
        pit_loss(g, masks, g.constant(xm), g.constant(y1), g.constant(y2));

    auto pair_loss = [&](const Mat& m, const Mat& y) {
        double s = 0.0;
        for (size_t i = 0; i < m.size(); ++i) {
            const double d = m.a[i] * xm.a[i] - y.a[i];
            s += d * d;
        }
        return s;
    };
    const double a = pair_loss(m1, y1) + pair_loss(m2, y2);
    const double b = pair_loss(m1, y2) + pair_loss(m2, y1);
    REQUIRE(out.l11 == Catch::Approx(pair_loss(m1, y1)).margin(1e-12));
    REQUIRE(out.l12 == Catch::Approx(pair_loss(m1, y2)).margin(1e-12));
    REQUIRE(out.l21 == Catch::Approx(pair_loss(m2, y1)).margin(1e-12));
    REQUIRE(out.l22 == Catch::Approx(pair_loss(m2, y2)).margin(1e-12));
    REQUIRE(out.loss == Catch::Approx(std::min(a, b)).margin(1e-12));
    REQUIRE(out.loss == g.scalar(out.loss_node));
}

TEST_CASE("pit loss is symmetric under swapping the targets") {
    const int T = 3, F = 4;
    const Mat xm = random_pos(T, F, 20, 0.1, 2.0);
    const Mat y1 = random_pos(T, F, 21);
    const Mat y2 = random_pos(T, F, 22);
    const Mat m1 = random_pos(T, F, 23);
    const Mat m2 = random_pos(T, F, 24);

    Graph ga, gb;
    const PitOutcome a = pit_loss(ga, {ga.constant(m1), ga.constant(m2)}, ga.constant(xm),
                                  ga.constant(y1), ga.constant(y2));
    const PitOutcome b = pit_loss(gb, {gb.constant(m1), gb.constant(m2)}, gb.constant(xm),
                                  gb.constant(y2), gb.constant(y1));
    REQUIRE(a.loss == Catch::Approx(b.loss).margin(1e-12));
    REQUIRE((a.permutation == PitPermutation::identity) ==
            (b.permutation == PitPermutation::swapped));
}

TEST_CASE("pit loss scales quadratically with the signal scale") {
    const int T = 3, F = 4;
    const Mat xm = random_pos(T, F, 30, 0.1, 2.0);
    const Mat y1 = random_pos(T, F, 31);
    const Mat y2 = random_pos(T, F, 32);
    const Mat m1 = random_pos(T, F, 33);
    const Mat m2 = random_pos(T, F, 34);
    const double s = 3.7;

    Mat xs = xm, y1s = y1, y2s = y2;
    for (auto& v : xs.a) v *= s;
    for (auto& v : y1s.a) v *= s;
    for (auto& v : y2s.a) v *= s;

    Graph ga, gb;
    const PitOutcome a = pit_loss(ga, {ga.constant(m1), ga.constant(m2)}, ga.constant(xm),
                                  ga.constant(y1), ga.constant(y2));
    const PitOutcome b = pit_loss(gb, {gb.constant(m1), gb.constant(m2)}, gb.constant(xs),
                                  gb.constant(y1s), gb.constant(y2s));
    REQUIRE(b.loss == Catch::Approx(s * s * a.loss).epsilon(1e-10));
    REQUIRE(a.permutation == b.permutation);
}

TEST_CASE("pit tie breaks to the identity pairing") {
    // symmetric construction: both pairings cost the same
    Mat xm(1, 2), y1(1, 2), y2(1, 2), m1(1, 2), m2(1, 2);
    xm(0, 0) = xm(0, 1) = 1.0;
    y1(0, 0) = 0.2;
    y1(0, 1) = 0.8;
    y2(0, 0) = 0.8;
    y2(0, 1) = 0.2;
    m1(0, 0) = m1(0, 1) = 0.5;
    m2(0, 0) = m2(0, 1) = 0.5;
    Graph g;
    const PitOutcome out = pit_loss(g, {g.constant(m1), g.constant(m2)}, g.constant(xm),
                                    g.constant(y1), g.constant(y2));
    REQUIRE(out.l11 + out.l22 == Catch::Approx(out.l12 + out.l21).margin(1e-15));
    REQUIRE(out.permutation == PitPermutation::identity);
}

TEST_CASE("gradcheck: pit loss routes gradient only through the winner") {
    const int T = 3, F = 4;
    nnet::ModelParams p;
    p.tensors.emplace("pre1", Tensor(T, F));
    p.tensors.emplace("pre2", Tensor(T, F));
    p.at("pre1").value = random_mat(T, F, 40, 0.7);
    p.at("pre2").value = random_mat(T, F, 41, 0.7);
    const Mat xm = random_pos(T, F, 42, 0.5, 2.0);
    const Mat y1 = random_pos(T, F, 43);
    const Mat y2 = random_pos(T, F, 44);

    auto loss_fn = [&](bool with_grad) {
        Graph g;
        MaskNodes masks{g.sigmoid(g.param(p.at("pre1"))), g.sigmoid(g.param(p.at("pre2")))};
        const PitOutcome out =
            pit_loss(g, masks, g.constant(xm), g.constant(y1), g.constant(y2));
        if (with_grad) g.backward(out.loss_node);
        return out.loss;
    };
    REQUIRE(gradcheck(p, loss_fn).max_rel_err < 1e-6);
}

TEST_CASE("gradcheck: pit loss through bias alignment and elementwise masking") {
    const int T = 3, E = 2, F = 3;
    nnet::ModelParams p;
    p.tensors.emplace("mix_emb", Tensor(T, E));
    p.tensors.emplace("prof", Tensor(4, E));
    p.tensors.emplace("W", Tensor(E, 2 * F));
    p.at("mix_emb").value = random_mat(T, E, 50, 0.8);
    p.at("prof").value = random_mat(4, E, 51, 0.8);
    p.at("W").value = random_mat(E, 2 * F, 52, 0.8);
    const Mat xm = random_pos(T, F, 53, 0.5, 2.0);
    const Mat y1 = random_pos(T, F, 54);
    const Mat y2 = random_pos(T, F, 55);

    auto loss_fn = [&](bool with_grad) {
        Graph g;
        const Graph::NodeId bias =
            align_bias(g, g.param(p.at("mix_emb")), g.param(p.at("prof")));
        const Graph::NodeId h = g.sigmoid(g.matmul(bias, g.param(p.at("W"))));
        MaskNodes masks{g.slice_cols(h, 0, F), g.slice_cols(h, F, 2 * F)};
        const PitOutcome out =
            pit_loss(g, masks, g.constant(xm), g.constant(y1), g.constant(y2));
        if (with_grad) g.backward(out.loss_node);
        return out.loss;
    };
    REQUIRE(gradcheck(p, loss_fn).max_rel_err < 1e-6);
}

TEST_CASE("zero-bias separation equals explicit zero-bias separator input") {
    NetConfig cfg;
    cfg.feat_dim = 6;
    cfg.embed_dim = 3;
    cfg.hidden = 4;
    cfg.layers = 1;
    ModelParams p = make_model(cfg, 17);
    FeatureMatrix feat;
    feat.values = random_mat(5, 6, 60);

    Graph ga;
    const SsusiForward a = separate_with_profiles(ga, p, cfg, feat, nullptr, nullptr);
    Graph gb;
    Mat zero(5, cfg.embed_dim);
    const Graph::NodeId fn = gb.constant(feat.values);
    const Graph::NodeId mix_emb = embed_forward(gb, p, cfg, "sep_emb", fn);
    const MaskNodes b =
        separator_forward(gb, p, cfg, fn, mix_emb, gb.constant(zero), gb.constant(zero));
    REQUIRE(max_abs_diff(ga.value(a.masks.m1), gb.value(b.m1)) == 0.0);
    REQUIRE(max_abs_diff(ga.value(a.masks.m2), gb.value(b.m2)) == 0.0);
}

TEST_CASE("masks from the separator are valid ratios in (0, 1)") {
    NetConfig cfg;
    cfg.feat_dim = 6;
    cfg.embed_dim = 3;
    cfg.hidden = 4;
    cfg.layers = 1;
    ModelParams p = make_model(cfg, 18);
    FeatureMatrix feat;
    feat.values = random_mat(5, 6, 61);
    Graph g;
    const SsusiForward fw = separate_with_profiles(g, p, cfg, feat, nullptr, nullptr);
    for (const Graph::NodeId id : {fw.masks.m1, fw.masks.m2})
        for (double v : g.value(id).a) {
            REQUIRE(v > 0.0);
            REQUIRE(v < 1.0);
        }
}

TEST_CASE("profile bias actually changes the masks") {
    NetConfig cfg;
    cfg.feat_dim = 6;
    cfg.embed_dim = 3;
    cfg.hidden = 4;
    cfg.layers = 1;
    ModelParams p = make_model(cfg, 19);
    FeatureMatrix feat, prof;
    feat.values = random_mat(5, 6, 62);
    prof.values = random_mat(4, 6, 63);

    Graph g;
    const SsusiForward plain = separate_with_profiles(g, p, cfg, feat, nullptr, nullptr);
    const SsusiForward biased = separate_with_profiles(g, p, cfg, feat, &prof, &prof);
    REQUIRE(max_abs_diff(g.value(plain.masks.m1), g.value(biased.masks.m1)) > 0.0);
}
