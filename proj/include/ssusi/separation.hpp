#pragma once

#include "ssusi/model.hpp"

namespace ssusi {

// Soft alignment of a selected profile to the mixture time axis: per-frame
// softmax over the profile frames, then a convex combination of the profile
// embedding rows.
inline Graph::NodeId align_bias(Graph& g, Graph::NodeId mix_emb, Graph::NodeId profile_emb) {
    if (g.value(profile_emb).rows < 1) throw std::invalid_argument("align_bias: empty profile");
    const Graph::NodeId attn = g.softmax_rows(g.matmul_nt(mix_emb, profile_emb));
    return g.matmul(attn, profile_emb);
}

enum class PitPermutation { identity, swapped };

struct PitOutcome {
    double loss = 0.0;  // raw Frobenius form, min over the two pairings
    PitPermutation permutation = PitPermutation::identity;
    double l11 = 0.0, l12 = 0.0, l21 = 0.0, l22 = 0.0;
    Graph::NodeId loss_node = -1;
};

// Permutation-invariant loss in the linear magnitude domain:
// l_uv = || M_u (*) X^m - Y_v ||_F^2, loss = min over the two pairings.
// Gradient flows only through the winning pairing; ties take identity.
inline PitOutcome pit_loss(Graph& g, const MaskNodes& masks, Graph::NodeId mix_mag,
                           Graph::NodeId target1, Graph::NodeId target2) {
    const Graph::NodeId e1 = g.mul(masks.m1, mix_mag);
    const Graph::NodeId e2 = g.mul(masks.m2, mix_mag);
    const Graph::NodeId n11 = g.sum_sq(g.sub(e1, target1));
    const Graph::NodeId n12 = g.sum_sq(g.sub(e1, target2));
    const Graph::NodeId n21 = g.sum_sq(g.sub(e2, target1));
    const Graph::NodeId n22 = g.sum_sq(g.sub(e2, target2));

    PitOutcome out;
    out.l11 = g.scalar(n11);
    out.l12 = g.scalar(n12);
    out.l21 = g.scalar(n21);
    out.l22 = g.scalar(n22);
    const double identity_sum = out.l11 + out.l22;
    const double swapped_sum = out.l12 + out.l21;
    if (identity_sum <= swapped_sum) {
        out.permutation = PitPermutation::identity;
        out.loss = identity_sum;
        out.loss_node = g.add(n11, n22);
    } else {
        out.permutation = PitPermutation::swapped;
        out.loss = swapped_sum;
        out.loss_node = g.add(n12, n21);
    }
    return out;
}

// Per-frame-bin normalized loss value for logging across unequal lengths.
inline double pit_loss_per_bin(const PitOutcome& out, int frames, int bins) {
    return out.loss / (static_cast<double>(frames) * bins);
}

}  // namespace ssusi
