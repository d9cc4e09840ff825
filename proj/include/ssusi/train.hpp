#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "ssusi/metrics.hpp"
#include "ssusi/ssues.hpp"

namespace ssusi {

enum class Regime { pit, ssusi_sep, ssusi_pse, ssusi_jt, ssues_jt };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::pit: return "pit";
        case Regime::ssusi_sep: return "ssusi-sep";
        case Regime::ssusi_pse: return "ssusi-pse";
        case Regime::ssusi_jt: return "ssusi-jt";
        case Regime::ssues_jt: return "ssues-jt";
    }
    return "?";
}

inline Regime regime_from_name(const std::string& s) {
    if (s == "pit") return Regime::pit;
    if (s == "ssusi-sep") return Regime::ssusi_sep;
    if (s == "ssusi-pse") return Regime::ssusi_pse;
    if (s == "ssusi-jt") return Regime::ssusi_jt;
    if (s == "ssues-jt") return Regime::ssues_jt;
    throw std::invalid_argument("unknown regime: " + s);
}

inline double default_lr(Regime r) {
    switch (r) {
        case Regime::pit: return 1e-4;
        case Regime::ssusi_sep: return 1e-4;
        case Regime::ssusi_pse: return 1e-6;
        case Regime::ssusi_jt: return 1e-5;
        case Regime::ssues_jt: return 1e-5;
    }
    return 1e-4;
}

struct TrainConfig {
    Regime regime = Regime::pit;
    double lr = 0.0;  // 0 -> regime default
    int epochs = 20;
    int samples_per_epoch = 512;
    int batch = 8;
    int n_irrelevant = 2;  // inventory size minus 2, for pse/jt
    double mixture_dur_s = 3.0;
    double profile_dur_s = 2.0;
    double snr_lo_db = -5.0, snr_hi_db = 5.0;
    uint64_t seed = 1;
    NetConfig net;

    double effective_lr() const { return lr > 0.0 ? lr : default_lr(regime); }
    bool needs_inventory() const { return regime != Regime::pit; }
};

struct TrainSample {
    MixtureSample mix;
    Inventory inventory;
};

// Online simulation: each (epoch, index) pair deterministically yields one
// fresh mixture plus its inventory.
inline TrainSample make_train_sample(const TrainConfig& cfg,
                                     const std::vector<SyntheticSpeaker>& speakers,
                                     const NormalizationStats& stats, uint64_t sample_seed) {
    Rng rng(sample_seed);
    const int ia = rng.uniform_int(static_cast<int>(speakers.size()));
    int ib = rng.uniform_int(static_cast<int>(speakers.size()) - 1);
    if (ib >= ia) ++ib;
    const double snr = rng.uniform(cfg.snr_lo_db, cfg.snr_hi_db);
    TrainSample s;
    s.mix = simulate_mixture(speakers[ia], speakers[ib], snr, rng.next_u64(), stats,
                             cfg.mixture_dur_s);
    if (cfg.needs_inventory()) {
        const int n_irr = cfg.regime == Regime::ssusi_sep ? 0 : cfg.n_irrelevant;
        s.inventory = build_inventory(speakers[ia], speakers[ib], n_irr, speakers,
                                      cfg.profile_dur_s, rng.next_u64(), stats);
    }
    return s;
}

// Builds the loss graph for one sample under the given regime and runs
// backward. Returns the per-bin normalized loss value for logging.
inline double sample_loss_backward(ModelParams& params, const TrainConfig& cfg,
                                   const TrainSample& s, const NormalizationStats& stats,
                                   bool with_grad = true) {
    Graph g;
    const int T = s.mix.mix_feat.values.rows;
    const int F = s.mix.mix_feat.values.cols;

    if (cfg.regime == Regime::ssusi_pse) {
        // selection stage only, Eq-style objective on the correlation weights
        const Graph::NodeId feat = g.constant(s.mix.mix_feat.values);
        const Graph::NodeId mix_emb = embed_forward(g, params, cfg.net, "sel_emb", feat);
        std::vector<Graph::NodeId> prof_embs;
        std::vector<int> ids;
        for (const auto& prof : s.inventory.profiles) {
            prof_embs.push_back(
                embed_forward(g, params, cfg.net, "sel_emb", g.constant(prof.features.values)));
            ids.push_back(prof.speaker_id);
        }
        const CorrelationResult corr = correlate(g, mix_emb, prof_embs, ids);
        const Graph::NodeId loss = selection_loss(g, corr, s.inventory.relevant_ids->first,
                                                  s.inventory.relevant_ids->second);
        if (with_grad) g.backward(loss);
        return g.scalar(loss);
    }

    const Graph::NodeId mix_mag = g.constant(s.mix.mix_mag.values);
    const Graph::NodeId y1 = g.constant(s.mix.targets.first.values);
    const Graph::NodeId y2 = g.constant(s.mix.targets.second.values);

    MaskNodes masks{-1, -1};
    switch (cfg.regime) {
        case Regime::pit:
            masks = ssusi_forward(g, params, cfg.net, s.mix.mix_feat, s.inventory, BiasMode::zeros)
                        .masks;
            break;
        case Regime::ssusi_sep:
            masks = ssusi_forward(g, params, cfg.net, s.mix.mix_feat, s.inventory, BiasMode::oracle)
                        .masks;
            break;
        case Regime::ssusi_jt:
            masks =
                ssusi_forward(g, params, cfg.net, s.mix.mix_feat, s.inventory, BiasMode::selected)
                    .masks;
            break;
        case Regime::ssues_jt: {
            // one unrolled refinement iteration inside the loss graph
            const SsusiForward first =
                ssusi_forward(g, params, cfg.net, s.mix.mix_feat, s.inventory, BiasMode::selected);
            const auto est = estimate_features_graph(g, first.masks, mix_mag, stats);
            const Graph::NodeId feat = g.constant(s.mix.mix_feat.values);
            const Graph::NodeId mix_emb = embed_forward(g, params, cfg.net, "sep_emb", feat);
            const Graph::NodeId pe1 = embed_forward(g, params, cfg.net, "sep_emb", est.first);
            const Graph::NodeId pe2 = embed_forward(g, params, cfg.net, "sep_emb", est.second);
            masks = separator_forward(g, params, cfg.net, feat, mix_emb,
                                      align_bias(g, mix_emb, pe1), align_bias(g, mix_emb, pe2));
            break;
        }
        default:
            throw std::logic_error("unreachable");
    }

    const PitOutcome pit = pit_loss(g, masks, mix_mag, y1, y2);
    if (with_grad) g.backward(pit.loss_node);
    return pit_loss_per_bin(pit, T, F);
}

// PSE trains only the selection embedding; everything else stays frozen.
inline void apply_regime_freezing(ModelParams& params, Regime regime) {
    if (regime != Regime::ssusi_pse) return;
    for (auto& [name, t] : params.tensors)
        t.requires_grad = name.rfind("sel_emb.", 0) == 0;
}

struct TrainResult {
    ModelParams best;        // checkpoint selected on training loss
    double best_epoch_loss = 0.0;
    int best_epoch = -1;
    std::vector<std::pair<long, double>> loss_log;  // (step, batch mean loss)
};

inline TrainResult train(const TrainConfig& cfg, const CorpusManifest& manifest,
                         const NormalizationStats& stats, ModelParams init,
                         std::ostream* loss_csv = nullptr) {
    ModelParams params = std::move(init);
    apply_regime_freezing(params, cfg.regime);
    nnet::AdamState adam;
    TrainResult result;
    if (loss_csv) *loss_csv << "step,epoch,loss\n";
    long step = 0;
    double best = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        int epoch_batches = 0;
        for (int base = 0; base < cfg.samples_per_epoch; base += cfg.batch) {
            const int bs = std::min(cfg.batch, cfg.samples_per_epoch - base);
            params.zero_grad();
            double batch_loss = 0.0;
            for (int i = 0; i < bs; ++i) {
                const uint64_t sseed = mix_seed(cfg.seed, epoch, base + i);
                const TrainSample s = make_train_sample(cfg, manifest.train, stats, sseed);
                batch_loss += sample_loss_backward(params, cfg, s, stats);
            }
            batch_loss /= bs;
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train: loss diverged (non-finite) at step " +
                                         std::to_string(step));
            params.scale_grad(1.0 / bs);
            nnet::adam_step(params, adam, cfg.effective_lr());
            ++step;
            epoch_loss += batch_loss;
            ++epoch_batches;
            if (loss_csv) *loss_csv << step << "," << epoch << "," << batch_loss << "\n";
            result.loss_log.emplace_back(step, batch_loss);
        }
        epoch_loss /= epoch_batches;
        if (result.best_epoch < 0 || epoch_loss < best) {
            best = epoch_loss;
            result.best_epoch = epoch;
            result.best = params;
            result.best_epoch_loss = epoch_loss;
        }
    }
    if (cfg.regime == Regime::ssusi_sep) tie_selection_embedding(result.best);
    return result;
}

struct OverfitResult {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int steps_run = 0;
    bool reached_target = false;
};

// Drives the loss on a frozen sample set; one step = one full-batch update.
// Stops as soon as the loss falls below target_frac of its initial value.
inline OverfitResult overfit(ModelParams& params, const TrainConfig& cfg,
                             const std::vector<TrainSample>& samples,
                             const NormalizationStats& stats, int max_steps, double lr,
                             double target_frac = 0.1) {
    apply_regime_freezing(params, cfg.regime);
    nnet::AdamState adam;
    OverfitResult res;
    for (int stepi = 0; stepi < max_steps; ++stepi) {
        params.zero_grad();
        double loss = 0.0;
        for (const auto& s : samples) loss += sample_loss_backward(params, cfg, s, stats);
        loss /= static_cast<double>(samples.size());
        if (!std::isfinite(loss)) throw std::runtime_error("overfit: loss diverged");
        if (stepi == 0) res.initial_loss = loss;
        res.final_loss = loss;
        res.steps_run = stepi + 1;
        if (loss < target_frac * res.initial_loss) {
            res.reached_target = true;
            return res;
        }
        params.scale_grad(1.0 / static_cast<double>(samples.size()));
        nnet::adam_step(params, adam, lr);
    }
    return res;
}

}  // namespace ssusi
