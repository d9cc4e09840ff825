#pragma once

#include <map>
#include <optional>
#include <vector>

#include "ssusi/corpus.hpp"
#include "ssusi/model.hpp"

namespace ssusi {

struct CorrelationResult {
    std::vector<int> profile_ids;     // inventory order
    std::vector<double> weights;      // w^p per profile, same order
    int c1 = -1, c2 = -1;             // selected profile ids
    Graph::NodeId weights_node = -1;  // 1 x P row in the graph
    std::vector<Graph::NodeId> profile_emb_nodes;
};

// Inventory-wide correlation: per-frame dot products against every profile
// frame, one joint softmax across all (profile, frame) pairs, then a
// per-profile mean. Sum_p T_p * w^p = 1 by construction.
inline CorrelationResult correlate(Graph& g, Graph::NodeId mix_emb,
                                   const std::vector<Graph::NodeId>& profile_embs,
                                   const std::vector<int>& profile_ids) {
    if (profile_embs.empty()) throw std::invalid_argument("correlate: empty inventory");
    std::vector<Graph::NodeId> logits;
    std::vector<int> widths;
    for (Graph::NodeId pe : profile_embs) {
        logits.push_back(g.matmul_nt(mix_emb, pe));
        widths.push_back(g.value(pe).rows);
    }
    const Graph::NodeId joint = g.softmax_rows(g.concat_cols(logits));
    const Graph::NodeId w = g.profile_means(joint, widths);

    CorrelationResult res;
    res.profile_ids = profile_ids;
    res.profile_emb_nodes = profile_embs;
    res.weights_node = w;
    res.weights.assign(g.value(w).a.begin(), g.value(w).a.end());
    return res;
}

// Top-2 by weight; ties broken by ascending profile id. Returns indices into
// the inventory order, or nullopt when fewer than 2 profiles exist (callers
// fall back to plain PIT separation).
inline std::optional<std::pair<int, int>> select_top2(const std::vector<double>& weights,
                                                      const std::vector<int>& profile_ids) {
    if (weights.size() < 2) return std::nullopt;
    auto better = [&](int a, int b) {
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        return profile_ids[a] < profile_ids[b];
    };
    int first = 0;
    for (int i = 1; i < static_cast<int>(weights.size()); ++i)
        if (better(i, first)) first = i;
    int second = first == 0 ? 1 : 0;
    for (int i = 0; i < static_cast<int>(weights.size()); ++i)
        if (i != first && better(i, second)) second = i;
    return std::make_pair(first, second);
}

// Eq-style selection training loss on the correlation weights.
inline Graph::NodeId selection_loss(Graph& g, const CorrelationResult& corr, int oracle_id_1,
                                    int oracle_id_2) {
    int o1 = -1, o2 = -1;
    for (int i = 0; i < static_cast<int>(corr.profile_ids.size()); ++i) {
        if (corr.profile_ids[i] == oracle_id_1) o1 = i;
        if (corr.profile_ids[i] == oracle_id_2) o2 = i;
    }
    if (o1 < 0 || o2 < 0) throw std::invalid_argument("selection_loss: oracle id missing");
    return g.selection_loss(corr.weights_node, o1, o2);
}

struct SelectionFlags {
    bool at_least_one = false;
    bool both = false;
};

inline SelectionFlags selection_accuracy(int selected_id_1, int selected_id_2, int oracle_id_1,
                                         int oracle_id_2) {
    const bool hit1 = selected_id_1 == oracle_id_1 || selected_id_1 == oracle_id_2;
    const bool hit2 = selected_id_2 == oracle_id_1 || selected_id_2 == oracle_id_2;
    SelectionFlags f;
    f.at_least_one = hit1 || hit2;
    f.both = hit1 && hit2 && selected_id_1 != selected_id_2;
    return f;
}

}  // namespace ssusi
