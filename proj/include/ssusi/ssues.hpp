#pragma once

#include <vector>

#include "ssusi/pipeline.hpp"

namespace ssusi {

// Masked magnitudes re-encoded as profile-style features: mask, logarithm,
// global mean-variance normalization.
inline std::pair<FeatureMatrix, FeatureMatrix> estimate_features(const MaskPair& masks,
                                                                 const FeatureMatrix& mix_mag,
                                                                 const NormalizationStats& stats) {
    auto one = [&](const Mask& m) {
        return normalize(log_compress(apply_mask(m, mix_mag)), stats);
    };
    return {one(masks.m1), one(masks.m2)};
}

// In-graph variant for training through an unrolled iteration.
inline std::pair<Graph::NodeId, Graph::NodeId> estimate_features_graph(
    Graph& g, const MaskNodes& masks, Graph::NodeId mix_mag, const NormalizationStats& stats) {
    std::vector<double> inv(stats.stdev.size());
    for (size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 / stats.stdev[i];
    auto one = [&](Graph::NodeId m) {
        return g.normalize_cols(g.log_shift(g.mul(m, mix_mag), kLogFloor), stats.mean, inv);
    };
    return {one(masks.m1), one(masks.m2)};
}

struct IterationStep {
    MaskPair masks;
    std::pair<FeatureMatrix, FeatureMatrix> estimates;  // features fed to the next pass
};

struct IterationTrace {
    // steps[0] is the first pass; steps[i>0] is refinement iteration i
    std::vector<IterationStep> steps;
};

// Iterative refinement. Each iteration converts the previous masks into
// estimated-speech features and re-runs the separation stage with them as the
// bias profiles. The selection stage and inventory are never touched here.
inline IterationTrace ssues_iterate(const MaskPair& first_pass, const MixtureSample& mix,
                                    ModelParams& params, const NetConfig& cfg,
                                    const NormalizationStats& stats, int n_iter) {
    if (n_iter < 1) throw std::invalid_argument("ssues_iterate: n_iter must be >= 1");
    IterationTrace trace;
    trace.steps.push_back({first_pass, estimate_features(first_pass, mix.mix_mag, stats)});
    for (int it = 1; it <= n_iter; ++it) {
        const IterationStep& prev = trace.steps.back();
        Graph g;
        SsusiForward fw = separate_with_profiles(g, params, cfg, mix.mix_feat,
                                                 &prev.estimates.first, &prev.estimates.second);
        IterationStep step;
        step.masks = extract_masks(g, fw.masks);
        // fixed point: identical masks reproduce themselves, skip the rest
        const bool fixed = max_abs_diff(step.masks.m1.values, prev.masks.m1.values) < 1e-12 &&
                           max_abs_diff(step.masks.m2.values, prev.masks.m2.values) < 1e-12;
        step.estimates = fixed ? prev.estimates : estimate_features(step.masks, mix.mix_mag, stats);
        trace.steps.push_back(std::move(step));
        if (fixed) {
            while (static_cast<int>(trace.steps.size()) <= n_iter)
                trace.steps.push_back(trace.steps.back());
            break;
        }
    }
    return trace;
}

// Per-iteration best output-to-target assignment, for metric reporting.
inline std::vector<PitPermutation> output_permutation_tracking(const IterationTrace& trace,
                                                               const FeatureMatrix& mix_mag,
                                                               const FeatureMatrix& target1,
                                                               const FeatureMatrix& target2) {
    std::vector<PitPermutation> perms;
    for (const auto& step : trace.steps) {
        const FeatureMatrix e1 = apply_mask(step.masks.m1, mix_mag);
        const FeatureMatrix e2 = apply_mask(step.masks.m2, mix_mag);
        auto dist = [](const FeatureMatrix& a, const FeatureMatrix& b) {
            double s = 0.0;
            for (size_t i = 0; i < a.values.size(); ++i) {
                const double d = a.values.a[i] - b.values.a[i];
                s += d * d;
            }
            return s;
        };
        const double identity = dist(e1, target1) + dist(e2, target2);
        const double swapped = dist(e1, target2) + dist(e2, target1);
        perms.push_back(identity <= swapped ? PitPermutation::identity : PitPermutation::swapped);
    }
    return perms;
}

}  // namespace ssusi
