#pragma once

#include <atomic>
#include <thread>

#include "ssusi/metrics.hpp"
#include "ssusi/ssues.hpp"

namespace ssusi {

struct EvalConfig {
    BiasMode bias = BiasMode::selected;
    int n_irrelevant = 2;
    MissingMode missing = MissingMode::standard;
    int ssues_iters = 0;
    int count = 16;
    uint64_t seed = 9;
    double mixture_dur_s = 3.0;
    double profile_dur_s = 2.0;
    double snr_lo_db = -5.0, snr_hi_db = 5.0;
    int jobs = 1;
};

struct EvalRecord {
    int index = 0;
    std::pair<int, int> speaker_ids{-1, -1};
    int sel1 = -1, sel2 = -1;  // selected speaker ids, -1 when no selection ran
    std::vector<int> profile_ids;
    std::vector<double> weights;
    bool at_least_one = false, both = false, fell_back = false;
    std::vector<SdrReport> per_iter;  // [0] = first pass, [i] = refinement i
};

struct EvalResult {
    std::vector<EvalRecord> records;
    std::vector<Summary> per_iter;  // aggregated per refinement depth
};

inline EvalRecord evaluate_one(ModelParams& params, const NetConfig& net, const EvalConfig& cfg,
                               const std::vector<SyntheticSpeaker>& speakers,
                               const std::vector<SyntheticSpeaker>& pool,
                               const NormalizationStats& stats, int index) {
    Rng rng(mix_seed(cfg.seed, index));
    const int ia = rng.uniform_int(static_cast<int>(speakers.size()));
    int ib = rng.uniform_int(static_cast<int>(speakers.size()) - 1);
    if (ib >= ia) ++ib;
    const double snr = rng.uniform(cfg.snr_lo_db, cfg.snr_hi_db);
    const MixtureSample mix = simulate_mixture(speakers[ia], speakers[ib], snr, rng.next_u64(),
                                               stats, cfg.mixture_dur_s);

    EvalRecord rec;
    rec.index = index;
    rec.speaker_ids = mix.speaker_ids;

    Inventory inv;
    if (cfg.bias != BiasMode::zeros)
        inv = build_inventory(speakers[ia], speakers[ib], cfg.n_irrelevant, pool,
                              cfg.profile_dur_s, rng.next_u64(), stats, cfg.missing);

    Graph g;
    const SsusiForward fw = ssusi_forward(g, params, net, mix.mix_feat, inv, cfg.bias);
    rec.fell_back = fw.fell_back_to_pit;
    if (fw.corr) {
        rec.profile_ids = fw.corr->profile_ids;
        rec.weights = fw.corr->weights;
    }
    if (fw.selected_ids) {
        rec.sel1 = fw.selected_ids->first;
        rec.sel2 = fw.selected_ids->second;
        const SelectionFlags f =
            selection_accuracy(rec.sel1, rec.sel2, mix.speaker_ids.first, mix.speaker_ids.second);
        rec.at_least_one = f.at_least_one;
        rec.both = f.both;
    }

    const MaskPair first = extract_masks(g, fw.masks);
    std::vector<MaskPair> steps = {first};
    if (cfg.ssues_iters > 0) {
        const IterationTrace trace =
            ssues_iterate(first, mix, params, net, stats, cfg.ssues_iters);
        steps.clear();
        for (const auto& s : trace.steps) steps.push_back(s.masks);
    }
    for (const MaskPair& mp : steps) {
        const Waveform e1 = resynthesize(mp.m1, mix.mix_spec);
        const Waveform e2 = resynthesize(mp.m2, mix.mix_spec);
        rec.per_iter.push_back(
            permute_score(e1, e2, mix.source_waves.first, mix.source_waves.second));
    }
    return rec;
}

// Deterministic regardless of the worker count: each sample depends only on
// (seed, index) and lands in its own slot.
inline EvalResult evaluate_model(ModelParams& params, const NetConfig& net, const EvalConfig& cfg,
                                 const std::vector<SyntheticSpeaker>& speakers,
                                 const std::vector<SyntheticSpeaker>& pool,
                                 const NormalizationStats& stats) {
    if (speakers.size() < 2) throw std::invalid_argument("evaluate_model: need 2+ speakers");
    if (cfg.count < 1) throw std::invalid_argument("evaluate_model: empty evaluation");
    EvalResult res;
    res.records.resize(cfg.count);

    const int jobs = std::max(1, std::min(cfg.jobs, cfg.count));
    if (jobs == 1) {
        for (int i = 0; i < cfg.count; ++i)
            res.records[i] = evaluate_one(params, net, cfg, speakers, pool, stats, i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> workers;
        std::vector<std::string> errors(jobs);
        for (int w = 0; w < jobs; ++w)
            workers.emplace_back([&, w] {
                // the forward pass never mutates params, so sharing is safe
                try {
                    for (int i = next.fetch_add(1); i < cfg.count; i = next.fetch_add(1))
                        res.records[i] = evaluate_one(params, net, cfg, speakers, pool, stats, i);
                } catch (const std::exception& e) {
                    errors[w] = e.what();
                }
            });
        for (auto& t : workers) t.join();
        for (const auto& e : errors)
            if (!e.empty()) throw std::runtime_error("evaluate_model: " + e);
    }

    const size_t depths = res.records.front().per_iter.size();
    for (size_t d = 0; d < depths; ++d) {
        std::vector<SdrReport> reports;
        std::vector<std::pair<bool, bool>> flags;
        for (const auto& r : res.records) {
            reports.push_back(r.per_iter[d]);
            if (r.sel1 >= 0) flags.emplace_back(r.at_least_one, r.both);
        }
        res.per_iter.push_back(aggregate(reports, flags));
    }
    return res;
}

}  // namespace ssusi
