#pragma once

#include <optional>
#include <vector>

#include "ssusi/selection.hpp"
#include "ssusi/separation.hpp"

namespace ssusi {

struct MaskPair {
    Mask m1, m2;
};

// How the two bias slots of the separator are filled.
enum class BiasMode {
    zeros,     // PIT baseline: no speaker information
    oracle,    // oracle relevant profiles (SSUSI-SEP training)
    selected,  // run the profile selection stage (SSUSI inference, JT training)
    profiles,  // explicit profile features, e.g. SSUES estimated speech
};

struct SsusiForward {
    MaskNodes masks{-1, -1};
    Graph::NodeId mix_emb_sep = -1;
    std::optional<CorrelationResult> corr;            // present when selection ran
    std::optional<std::pair<int, int>> selected_ids;  // speaker ids of bias profiles
    bool fell_back_to_pit = false;                    // inventory too small
};

inline Graph::NodeId embed_profile_feat(Graph& g, ModelParams& p, const NetConfig& cfg,
                                        const std::string& mod, const FeatureMatrix& f) {
    return embed_forward(g, p, cfg, mod, g.constant(f.values));
}

// One separation-stage pass with explicit bias-profile features.
inline SsusiForward separate_with_profiles(Graph& g, ModelParams& p, const NetConfig& cfg,
                                           const FeatureMatrix& mix_feat,
                                           const FeatureMatrix* prof1,
                                           const FeatureMatrix* prof2) {
    SsusiForward fw;
    const Graph::NodeId feat = g.constant(mix_feat.values);
    fw.mix_emb_sep = embed_forward(g, p, cfg, "sep_emb", feat);
    const int T = mix_feat.values.rows;
    auto bias_of = [&](const FeatureMatrix* prof) {
        if (!prof) return g.constant(Mat(T, cfg.embed_dim));
        const Graph::NodeId pe = embed_forward(g, p, cfg, "sep_emb", g.constant(prof->values));
        return align_bias(g, fw.mix_emb_sep, pe);
    };
    const Graph::NodeId b1 = bias_of(prof1);
    const Graph::NodeId b2 = bias_of(prof2);
    fw.masks = separator_forward(g, p, cfg, feat, fw.mix_emb_sep, b1, b2);
    return fw;
}

// Full SSUSI forward: selection stage (when requested) plus separation stage.
// Selected profiles are re-embedded by the separation-stage embedding module
// before alignment.
inline SsusiForward ssusi_forward(Graph& g, ModelParams& p, const NetConfig& cfg,
                                  const FeatureMatrix& mix_feat, const Inventory& inventory,
                                  BiasMode mode) {
    if (mode == BiasMode::zeros)
        return separate_with_profiles(g, p, cfg, mix_feat, nullptr, nullptr);

    if (mode == BiasMode::oracle) {
        if (!inventory.relevant_ids)
            throw std::invalid_argument("ssusi_forward: oracle mode needs relevant ids");
        const FeatureMatrix* prof1 = nullptr;
        const FeatureMatrix* prof2 = nullptr;
        for (const auto& prof : inventory.profiles) {
            if (prof.speaker_id == inventory.relevant_ids->first) prof1 = &prof.features;
            if (prof.speaker_id == inventory.relevant_ids->second) prof2 = &prof.features;
        }
        if (!prof1 || !prof2)
            throw std::invalid_argument("ssusi_forward: oracle profiles not in inventory");
        SsusiForward fw = separate_with_profiles(g, p, cfg, mix_feat, prof1, prof2);
        fw.selected_ids = *inventory.relevant_ids;
        return fw;
    }

    // selection stage
    if (inventory.profiles.size() < 2) {
        SsusiForward fw = separate_with_profiles(g, p, cfg, mix_feat, nullptr, nullptr);
        fw.fell_back_to_pit = true;
        return fw;
    }
    const Graph::NodeId feat = g.constant(mix_feat.values);
    const Graph::NodeId sel_mix_emb = embed_forward(g, p, cfg, "sel_emb", feat);
    std::vector<Graph::NodeId> prof_embs;
    std::vector<int> ids;
    for (const auto& prof : inventory.profiles) {
        prof_embs.push_back(embed_forward(g, p, cfg, "sel_emb", g.constant(prof.features.values)));
        ids.push_back(prof.speaker_id);
    }
    CorrelationResult corr = correlate(g, sel_mix_emb, prof_embs, ids);
    const auto top = select_top2(corr.weights, corr.profile_ids);
    corr.c1 = corr.profile_ids[top->first];
    corr.c2 = corr.profile_ids[top->second];

    SsusiForward fw = separate_with_profiles(g, p, cfg, mix_feat,
                                             &inventory.profiles[top->first].features,
                                             &inventory.profiles[top->second].features);
    fw.selected_ids = std::make_pair(corr.c1, corr.c2);
    fw.corr = std::move(corr);
    return fw;
}

inline MaskPair extract_masks(const Graph& g, const MaskNodes& nodes) {
    MaskPair mp;
    mp.m1.values = g.value(nodes.m1);
    mp.m2.values = g.value(nodes.m2);
    return mp;
}

}  // namespace ssusi
