// ssusi: synthetic two-speaker separation workbench.
// Subcommands cover corpus generation, mixing, training, separation,
// evaluation, inventory sweeps, and gradient verification.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ssusi/evaluate.hpp"
#include "ssusi/train.hpp"
#include "ssusi/verify.hpp"
#include "ssusi/wav.hpp"

namespace fs = std::filesystem;
using namespace ssusi;
using nlohmann::json;

namespace {

struct CorpusDir {
    CorpusManifest manifest;
    NormalizationStats stats;
};

CorpusDir load_corpus(const std::string& dir) {
    CorpusDir c;
    c.manifest = load_manifest(dir + "/manifest.txt");
    c.stats = load_stats(dir + "/stats.txt");
    return c;
}

void refuse_overwrite(const std::string& path, bool force) {
    if (!force && fs::exists(path))
        throw std::runtime_error(path + " exists; pass --force to overwrite");
}

const std::vector<SyntheticSpeaker>& pick_split(const CorpusManifest& m, const std::string& split) {
    if (split == "train") return m.train;
    if (split == "test") return m.test;
    throw std::runtime_error("unknown split: " + split);
}

MissingMode missing_from_name(const std::string& s) {
    if (s == "standard") return MissingMode::standard;
    if (s == "m1") return MissingMode::m1;
    if (s == "m2") return MissingMode::m2;
    throw std::runtime_error("unknown missing mode: " + s);
}

BiasMode bias_from_name(const std::string& s) {
    if (s == "zeros") return BiasMode::zeros;
    if (s == "oracle") return BiasMode::oracle;
    if (s == "selected") return BiasMode::selected;
    throw std::runtime_error("unknown bias mode: " + s);
}

std::string sample_path(const std::string& dir, int index, const char* tag) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sample_%04d.%s.wav", index, tag);
    return dir + "/" + buf;
}

std::string weights_field(const EvalRecord& r) {
    std::string s;
    for (size_t i = 0; i < r.weights.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s%d:%.9g", i ? ";" : "", r.profile_ids[i], r.weights[i]);
        s += buf;
    }
    return s;
}

void write_eval_csv(std::ostream& os, const EvalResult& res) {
    os << "sample,iteration,spk_a,spk_b,sel_1,sel_2,at_least_one,both,fell_back,"
          "sdr_db_1,sdr_db_2,si_sdr_db_1,si_sdr_db_2,swapped,weights\n";
    os.precision(9);
    for (const auto& r : res.records)
        for (size_t d = 0; d < r.per_iter.size(); ++d) {
            const SdrReport& rep = r.per_iter[d];
            os << r.index << "," << d << "," << r.speaker_ids.first << ","
               << r.speaker_ids.second << "," << r.sel1 << "," << r.sel2 << ","
               << (r.at_least_one ? 1 : 0) << "," << (r.both ? 1 : 0) << ","
               << (r.fell_back ? 1 : 0) << "," << rep.sdr_db[0] << "," << rep.sdr_db[1] << ","
               << rep.si_sdr_db[0] << "," << rep.si_sdr_db[1] << "," << (rep.swapped ? 1 : 0)
               << "," << weights_field(r) << "\n";
        }
}

void print_eval_summary(const EvalResult& res) {
    for (size_t d = 0; d < res.per_iter.size(); ++d) {
        const Summary& s = res.per_iter[d];
        std::printf("iter %zu  mean_sdr %.3f dB  mean_si_sdr %.3f dB", d, s.mean_sdr,
                    s.mean_si_sdr);
        if (s.selection.n_samples > 0)
            std::printf("  sel>=1 %.3f  sel_both %.3f", s.selection.at_least_one,
                        s.selection.both);
        std::printf("\n");
    }
}

struct ConfigDump {
    bool enabled = false;
    std::vector<std::pair<std::string, std::string>> kv;
    template <typename T>
    void add(const std::string& k, const T& v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        kv.emplace_back(k, os.str());
    }
    void print() const {
        if (!enabled) return;
        for (const auto& [k, v] : kv) std::printf("config %s %s\n", k.c_str(), v.c_str());
    }
};

int run_synth_corpus(const std::string& out, uint64_t seed, int speakers, int stats_mixtures,
                     bool force, ConfigDump dump) {
    if (speakers < 10 || speakers % 5 != 0)
        throw std::runtime_error("--speakers must be a multiple of 5, at least 10");
    const int n_test = speakers / 5;
    const int n_train = speakers - n_test;
    dump.add("out", out);
    dump.add("seed", seed);
    dump.add("train_speakers", n_train);
    dump.add("test_speakers", n_test);
    dump.add("stats_mixtures", stats_mixtures);
    dump.print();

    fs::create_directories(out);
    refuse_overwrite(out + "/manifest.txt", force);
    refuse_overwrite(out + "/stats.txt", force);
    const CorpusManifest manifest = corpus_manifest(seed, n_train, n_test);

    NormalizationStats ident;
    ident.mean.assign(kNumBins, 0.0);
    ident.stdev.assign(kNumBins, 1.0);
    std::vector<FeatureMatrix> feats;
    for (int i = 0; i < stats_mixtures; ++i) {
        Rng rng(mix_seed(seed, 0x57A75, i));
        const int ia = rng.uniform_int(n_train);
        int ib = rng.uniform_int(n_train - 1);
        if (ib >= ia) ++ib;
        const MixtureSample ms = simulate_mixture(manifest.train[ia], manifest.train[ib],
                                                  rng.uniform(-5.0, 5.0), rng.next_u64(), ident);
        feats.push_back(log_compress(ms.mix_mag));
    }
    const NormalizationStats stats = fit_normalization(feats);

    save_manifest(out + "/manifest.txt", manifest);
    save_stats(out + "/stats.txt", stats);
    std::printf("wrote %s/manifest.txt (%d train + %d test speakers) and stats.txt\n",
                out.c_str(), n_train, n_test);
    return 0;
}

int run_mix(const std::string& corpus, const std::string& out, const std::string& split, int count,
            uint64_t seed, double snr_lo, double snr_hi, double duration, bool force,
            ConfigDump dump) {
    dump.add("corpus", corpus);
    dump.add("out", out);
    dump.add("split", split);
    dump.add("count", count);
    dump.add("seed", seed);
    dump.add("snr_lo_db", snr_lo);
    dump.add("snr_hi_db", snr_hi);
    dump.add("duration_s", duration);
    dump.print();

    const CorpusDir c = load_corpus(corpus);
    const auto& speakers = pick_split(c.manifest, split);
    fs::create_directories(out);
    refuse_overwrite(out + "/mixes.csv", force);

    std::ofstream csv(out + "/mixes.csv");
    csv << "sample,spk_a,spk_b,snr_db,n_samples\n";
    csv.precision(9);
    for (int i = 0; i < count; ++i) {
        Rng rng(mix_seed(seed, i));
        const int ia = rng.uniform_int(static_cast<int>(speakers.size()));
        int ib = rng.uniform_int(static_cast<int>(speakers.size()) - 1);
        if (ib >= ia) ++ib;
        const double snr = rng.uniform(snr_lo, snr_hi);
        const MixtureSample ms =
            simulate_mixture(speakers[ia], speakers[ib], snr, rng.next_u64(), c.stats, duration);
        write_wav(sample_path(out, i, "mix"), ms.mix_wave);
        write_wav(sample_path(out, i, "s1"), ms.source_waves.first);
        write_wav(sample_path(out, i, "s2"), ms.source_waves.second);
        csv << i << "," << ms.speaker_ids.first << "," << ms.speaker_ids.second << "," << snr
            << "," << ms.mix_wave.samples.size() << "\n";
    }
    std::printf("wrote %d mixture triples to %s\n", count, out.c_str());
    return 0;
}

int run_train(const std::string& corpus, const std::string& out, const std::string& regime,
              const std::string& init_path, TrainConfig cfg, const std::string& loss_csv_path,
              bool force, ConfigDump dump) {
    cfg.regime = regime_from_name(regime);
    refuse_overwrite(out, force);
    const CorpusDir c = load_corpus(corpus);

    ModelParams init;
    if (!init_path.empty())
        init = load_checkpoint(init_path, cfg.net);
    else
        init = make_model(cfg.net, cfg.seed);

    dump.add("corpus", corpus);
    dump.add("out", out);
    dump.add("regime", regime);
    dump.add("lr", cfg.effective_lr());
    dump.add("epochs", cfg.epochs);
    dump.add("samples_per_epoch", cfg.samples_per_epoch);
    dump.add("batch", cfg.batch);
    dump.add("n_irrelevant", cfg.n_irrelevant);
    dump.add("mixture_dur_s", cfg.mixture_dur_s);
    dump.add("profile_dur_s", cfg.profile_dur_s);
    dump.add("seed", cfg.seed);
    dump.add("embed_dim", cfg.net.embed_dim);
    dump.add("hidden", cfg.net.hidden);
    dump.add("layers", cfg.net.layers);
    dump.print();

    std::ofstream loss_csv;
    if (!loss_csv_path.empty()) {
        loss_csv.open(loss_csv_path);
        if (!loss_csv) throw std::runtime_error("cannot open " + loss_csv_path);
        loss_csv.precision(12);
    }
    const TrainResult res = train(cfg, c.manifest, c.stats, std::move(init),
                                  loss_csv_path.empty() ? nullptr : &loss_csv);
    save_checkpoint(out, res.best, cfg.net);
    std::printf("trained %s for %d epochs; best epoch %d loss %.6g; checkpoint %s\n",
                regime.c_str(), cfg.epochs, res.best_epoch, res.best_epoch_loss, out.c_str());
    return 0;
}

int run_separate(const std::string& ckpt, const std::string& mix_path, const std::string& corpus,
                 const std::string& out_prefix, const std::vector<int>& speaker_ids,
                 double profile_dur, uint64_t profile_seed, int ssues_iters, bool dump_iters,
                 const std::string& json_path, ConfigDump dump) {
    dump.add("checkpoint", ckpt);
    dump.add("mix", mix_path);
    dump.add("corpus", corpus);
    dump.add("out_prefix", out_prefix);
    dump.add("ssues_iters", ssues_iters);
    dump.add("profile_dur_s", profile_dur);
    dump.add("profile_seed", profile_seed);
    dump.print();

    NetConfig net;
    ModelParams params = load_checkpoint(ckpt, net);
    const CorpusDir c = load_corpus(corpus);

    MixtureSample ms;
    ms.mix_wave = read_wav(mix_path);
    ms.mix_spec = stft(ms.mix_wave);
    ms.mix_mag = linear_magnitude(ms.mix_spec);
    ms.mix_feat = normalize(log_compress(ms.mix_mag), c.stats);

    Inventory inv;
    auto find_speaker = [&](int id) -> const SyntheticSpeaker& {
        for (const auto& s : c.manifest.train)
            if (s.speaker_id == id) return s;
        for (const auto& s : c.manifest.test)
            if (s.speaker_id == id) return s;
        throw std::runtime_error("speaker id " + std::to_string(id) + " not in manifest");
    };
    for (int id : speaker_ids)
        inv.profiles.push_back(
            make_profile(find_speaker(id), profile_dur, mix_seed(profile_seed, id), c.stats));

    Graph g;
    const BiasMode mode = speaker_ids.empty() ? BiasMode::zeros : BiasMode::selected;
    const SsusiForward fw = ssusi_forward(g, params, net, ms.mix_feat, inv, mode);

    json rec;
    rec["mix"] = mix_path;
    rec["bias_mode"] = mode == BiasMode::zeros ? "zeros" : "selected";
    rec["fell_back_to_pit"] = fw.fell_back_to_pit;
    if (fw.selected_ids) rec["selected_ids"] = {fw.selected_ids->first, fw.selected_ids->second};
    if (fw.corr) {
        json w = json::object();
        for (size_t i = 0; i < fw.corr->weights.size(); ++i)
            w[std::to_string(fw.corr->profile_ids[i])] = fw.corr->weights[i];
        rec["selection_weights"] = w;
    }

    const MaskPair first = extract_masks(g, fw.masks);
    std::vector<MaskPair> steps = {first};
    if (ssues_iters > 0) {
        const IterationTrace trace = ssues_iterate(first, ms, params, net, c.stats, ssues_iters);
        steps.clear();
        for (const auto& s : trace.steps) steps.push_back(s.masks);
    }

    rec["iterations"] = json::array();
    for (size_t d = 0; d < steps.size(); ++d) {
        const Waveform e1 = resynthesize(steps[d].m1, ms.mix_spec);
        const Waveform e2 = resynthesize(steps[d].m2, ms.mix_spec);
        json it;
        it["iteration"] = d;
        const bool last = d + 1 == steps.size();
        if (last || dump_iters) {
            const std::string tag = last ? "" : ".iter" + std::to_string(d);
            const std::string p1 = out_prefix + tag + ".1.wav";
            const std::string p2 = out_prefix + tag + ".2.wav";
            write_wav(p1, e1);
            write_wav(p2, e2);
            it["wav"] = {p1, p2};
        }
        rec["iterations"].push_back(it);
    }

    if (!json_path.empty()) {
        std::ofstream os(json_path);
        if (!os) throw std::runtime_error("cannot open " + json_path);
        os << rec.dump(2) << "\n";
    }
    std::printf("wrote %s.1.wav and %s.2.wav\n", out_prefix.c_str(), out_prefix.c_str());
    return 0;
}

int run_evaluate(const std::string& ckpt, const std::string& corpus, const std::string& split,
                 const std::string& bias, const std::string& missing, EvalConfig cfg,
                 const std::string& csv_path, ConfigDump dump) {
    cfg.bias = bias_from_name(bias);
    cfg.missing = missing_from_name(missing);
    dump.add("checkpoint", ckpt);
    dump.add("corpus", corpus);
    dump.add("split", split);
    dump.add("bias", bias);
    dump.add("missing_mode", missing);
    dump.add("n_irrelevant", cfg.n_irrelevant);
    dump.add("ssues_iters", cfg.ssues_iters);
    dump.add("count", cfg.count);
    dump.add("seed", cfg.seed);
    dump.add("jobs", cfg.jobs);
    dump.print();

    NetConfig net;
    ModelParams params = load_checkpoint(ckpt, net);
    const CorpusDir c = load_corpus(corpus);
    const auto& speakers = pick_split(c.manifest, split);

    const EvalResult res = evaluate_model(params, net, cfg, speakers, speakers, c.stats);
    if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        if (!os) throw std::runtime_error("cannot open " + csv_path);
        write_eval_csv(os, res);
    }
    print_eval_summary(res);
    return 0;
}

int run_sweep(const std::string& ckpt, const std::string& corpus, const std::string& split,
              const std::string& bias, const std::vector<int>& n_irrelevant,
              const std::vector<std::string>& missing_modes, EvalConfig base,
              const std::string& csv_path, ConfigDump dump) {
    base.bias = bias_from_name(bias);
    dump.add("checkpoint", ckpt);
    dump.add("corpus", corpus);
    dump.add("split", split);
    dump.add("bias", bias);
    dump.add("count", base.count);
    dump.add("seed", base.seed);
    dump.add("ssues_iters", base.ssues_iters);
    dump.print();

    NetConfig net;
    ModelParams params = load_checkpoint(ckpt, net);
    const CorpusDir c = load_corpus(corpus);
    const auto& speakers = pick_split(c.manifest, split);

    std::ofstream os(csv_path);
    if (!os) throw std::runtime_error("cannot open " + csv_path);
    os << "n_irrelevant,missing_mode,iteration,mean_sdr_db,mean_si_sdr_db,"
          "rate_at_least_one,rate_both,count\n";
    os.precision(9);
    for (const std::string& mm : missing_modes)
        for (int n_irr : n_irrelevant) {
            EvalConfig cfg = base;
            cfg.n_irrelevant = n_irr;
            cfg.missing = missing_from_name(mm);
            const EvalResult res = evaluate_model(params, net, cfg, speakers, speakers, c.stats);
            for (size_t d = 0; d < res.per_iter.size(); ++d) {
                const Summary& s = res.per_iter[d];
                os << n_irr << "," << mm << "," << d << "," << s.mean_sdr << ","
                   << s.mean_si_sdr << "," << s.selection.at_least_one << ","
                   << s.selection.both << "," << cfg.count << "\n";
            }
            std::printf("n_irrelevant %d missing %s done\n", n_irr, mm.c_str());
        }
    std::printf("wrote %s\n", csv_path.c_str());
    return 0;
}

int run_gradcheck(uint64_t seed, ConfigDump dump) {
    dump.add("seed", seed);
    dump.print();
    bool ok = true;
    for (const auto& e : run_gradient_battery(seed)) {
        std::printf("%-24s max_rel_err %.3e  limit %.0e  %s\n", e.name.c_str(), e.max_rel_err,
                    e.limit, e.ok() ? "ok" : "FAIL");
        ok = ok && e.ok();
    }
    const bool zero_ok = non_selected_gradients_are_zero(seed);
    std::printf("%-24s %s\n", "non_selected_zero_grad", zero_ok ? "ok" : "FAIL");
    ok = ok && zero_ok;
    if (!ok) throw std::runtime_error("gradcheck: non-finite or out-of-tolerance gradients");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic two-speaker separation workbench"};
    app.require_subcommand(1);

    bool print_config = false;

    // synth-corpus
    auto* sc = app.add_subcommand("synth-corpus", "write a speaker manifest and feature stats");
    std::string sc_out;
    uint64_t sc_seed = 1;
    int sc_speakers = 80, sc_stats_mixtures = 32;
    bool sc_force = false;
    sc->add_option("--out", sc_out, "output directory")->required();
    sc->add_option("--seed", sc_seed, "corpus seed");
    sc->add_option("--speakers", sc_speakers, "total speakers; 1/5 held out as the test split");
    sc->add_option("--stats-mixtures", sc_stats_mixtures,
                   "training mixtures used to fit the feature normalization");
    sc->add_flag("--force", sc_force, "overwrite existing outputs");

    // mix
    auto* mx = app.add_subcommand("mix", "write mixture WAV triples and a metadata table");
    std::string mx_corpus, mx_out, mx_split = "test";
    int mx_count = 4;
    uint64_t mx_seed = 7;
    double mx_snr_lo = -5.0, mx_snr_hi = 5.0, mx_dur = 3.0;
    bool mx_force = false;
    mx->add_option("--corpus", mx_corpus, "corpus directory")->required();
    mx->add_option("--out", mx_out, "output directory")->required();
    mx->add_option("--split", mx_split, "train or test");
    mx->add_option("--count", mx_count, "number of mixtures");
    mx->add_option("--seed", mx_seed, "mixing seed");
    mx->add_option("--snr-lo", mx_snr_lo, "lower SNR bound in dB");
    mx->add_option("--snr-hi", mx_snr_hi, "upper SNR bound in dB");
    mx->add_option("--duration", mx_dur, "mixture duration in seconds");
    mx->add_flag("--force", mx_force, "overwrite existing outputs");

    // train
    auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
    std::string tr_corpus, tr_out, tr_regime = "pit", tr_init, tr_loss_csv;
    TrainConfig tr_cfg;
    bool tr_force = false;
    tr->add_option("--corpus", tr_corpus, "corpus directory")->required();
    tr->add_option("--out", tr_out, "checkpoint output path")->required();
    tr->add_option("--regime", tr_regime, "pit, ssusi-sep, ssusi-pse, ssusi-jt, or ssues-jt");
    tr->add_option("--init", tr_init, "checkpoint to initialize from");
    tr->add_option("--lr", tr_cfg.lr, "learning rate; 0 takes the regime default");
    tr->add_option("--epochs", tr_cfg.epochs, "training epochs");
    tr->add_option("--samples-per-epoch", tr_cfg.samples_per_epoch, "simulated samples per epoch");
    tr->add_option("--batch", tr_cfg.batch, "batch size");
    tr->add_option("--n-irrelevant", tr_cfg.n_irrelevant, "irrelevant profiles per inventory");
    tr->add_option("--duration", tr_cfg.mixture_dur_s, "mixture duration in seconds");
    tr->add_option("--profile-duration", tr_cfg.profile_dur_s, "profile duration in seconds");
    tr->add_option("--snr-lo", tr_cfg.snr_lo_db, "lower SNR bound in dB");
    tr->add_option("--snr-hi", tr_cfg.snr_hi_db, "upper SNR bound in dB");
    tr->add_option("--seed", tr_cfg.seed, "training seed");
    tr->add_option("--embed-dim", tr_cfg.net.embed_dim, "embedding width (fresh models)");
    tr->add_option("--hidden", tr_cfg.net.hidden, "recurrent width per direction (fresh models)");
    tr->add_option("--layers", tr_cfg.net.layers, "recurrent depth (fresh models)");
    tr->add_option("--loss-csv", tr_loss_csv, "write the per-step loss log here");
    tr->add_flag("--force", tr_force, "overwrite an existing checkpoint");

    // separate
    auto* sp = app.add_subcommand("separate", "separate one mixture WAV");
    std::string sp_ckpt, sp_mix, sp_corpus, sp_prefix, sp_json;
    std::vector<int> sp_speakers;
    double sp_prof_dur = 2.0;
    uint64_t sp_prof_seed = 11;
    int sp_iters = 0;
    bool sp_dump_iters = false;
    sp->add_option("--checkpoint", sp_ckpt, "model checkpoint")->required();
    sp->add_option("--mix", sp_mix, "input mixture WAV")->required();
    sp->add_option("--corpus", sp_corpus, "corpus directory (stats + profile speakers)")
        ->required();
    sp->add_option("--out-prefix", sp_prefix, "output prefix for the two estimate WAVs")
        ->required();
    sp->add_option("--speakers", sp_speakers,
                   "inventory speaker ids; empty runs the profile-free baseline");
    sp->add_option("--profile-duration", sp_prof_dur, "profile duration in seconds");
    sp->add_option("--profile-seed", sp_prof_seed, "profile synthesis seed");
    sp->add_option("--ssues-iters", sp_iters, "refinement iterations on estimated speech");
    sp->add_flag("--dump-iters", sp_dump_iters, "write WAVs for every refinement iteration");
    sp->add_option("--json", sp_json, "write a JSON record here");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "score a checkpoint on simulated mixtures");
    std::string ev_ckpt, ev_corpus, ev_split = "test", ev_bias = "selected",
                ev_missing = "standard", ev_csv;
    EvalConfig ev_cfg;
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
    ev->add_option("--corpus", ev_corpus, "corpus directory")->required();
    ev->add_option("--split", ev_split, "train or test");
    ev->add_option("--bias", ev_bias, "zeros, oracle, or selected");
    ev->add_option("--missing-mode", ev_missing, "standard, m1, or m2");
    ev->add_option("--n-irrelevant", ev_cfg.n_irrelevant, "irrelevant profiles per inventory");
    ev->add_option("--ssues-iters", ev_cfg.ssues_iters, "refinement iterations");
    ev->add_option("--count", ev_cfg.count, "number of evaluation mixtures");
    ev->add_option("--seed", ev_cfg.seed, "evaluation seed");
    ev->add_option("--duration", ev_cfg.mixture_dur_s, "mixture duration in seconds");
    ev->add_option("--profile-duration", ev_cfg.profile_dur_s, "profile duration in seconds");
    ev->add_option("--snr-lo", ev_cfg.snr_lo_db, "lower SNR bound in dB");
    ev->add_option("--snr-hi", ev_cfg.snr_hi_db, "upper SNR bound in dB");
    ev->add_option("--jobs", ev_cfg.jobs, "worker threads; results do not depend on this");
    ev->add_option("--csv", ev_csv, "write per-sample records here");

    // sweep
    auto* sw = app.add_subcommand("sweep", "evaluate over an inventory-condition grid");
    std::string sw_ckpt, sw_corpus, sw_split = "test", sw_bias = "selected", sw_csv;
    std::vector<int> sw_irr = {0, 1, 2, 4, 6};
    std::vector<std::string> sw_missing = {"standard"};
    EvalConfig sw_cfg;
    sw->add_option("--checkpoint", sw_ckpt, "model checkpoint")->required();
    sw->add_option("--corpus", sw_corpus, "corpus directory")->required();
    sw->add_option("--csv", sw_csv, "output CSV path")->required();
    sw->add_option("--split", sw_split, "train or test");
    sw->add_option("--bias", sw_bias, "zeros, oracle, or selected");
    sw->add_option("--n-irrelevant", sw_irr, "grid of irrelevant-profile counts");
    sw->add_option("--missing-modes", sw_missing, "grid of missing modes");
    sw->add_option("--ssues-iters", sw_cfg.ssues_iters, "refinement depth per condition");
    sw->add_option("--count", sw_cfg.count, "mixtures per condition");
    sw->add_option("--seed", sw_cfg.seed, "evaluation seed");
    sw->add_option("--duration", sw_cfg.mixture_dur_s, "mixture duration in seconds");
    sw->add_option("--profile-duration", sw_cfg.profile_dur_s, "profile duration in seconds");
    sw->add_option("--snr-lo", sw_cfg.snr_lo_db, "lower SNR bound in dB");
    sw->add_option("--snr-hi", sw_cfg.snr_hi_db, "upper SNR bound in dB");
    sw->add_option("--jobs", sw_cfg.jobs, "worker threads; results do not depend on this");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference verification of all gradients");
    uint64_t gc_seed = 12345;
    gc->add_option("--seed", gc_seed, "battery seed");

    for (CLI::App* s : {sc, mx, tr, sp, ev, sw, gc})
        s->add_flag("--print-config", print_config,
                    "dump the resolved configuration before running");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        ConfigDump dump;
        dump.enabled = print_config;
        if (sc->parsed())
            return run_synth_corpus(sc_out, sc_seed, sc_speakers, sc_stats_mixtures, sc_force,
                                    dump);
        if (mx->parsed())
            return run_mix(mx_corpus, mx_out, mx_split, mx_count, mx_seed, mx_snr_lo, mx_snr_hi,
                           mx_dur, mx_force, dump);
        if (tr->parsed())
            return run_train(tr_corpus, tr_out, tr_regime, tr_init, tr_cfg, tr_loss_csv, tr_force,
                             dump);
        if (sp->parsed())
            return run_separate(sp_ckpt, sp_mix, sp_corpus, sp_prefix, sp_speakers, sp_prof_dur,
                                sp_prof_seed, sp_iters, sp_dump_iters, sp_json, dump);
        if (ev->parsed())
            return run_evaluate(ev_ckpt, ev_corpus, ev_split, ev_bias, ev_missing, ev_cfg, ev_csv,
                                dump);
        if (sw->parsed())
            return run_sweep(sw_ckpt, sw_corpus, sw_split, sw_bias, sw_irr, sw_missing, sw_cfg,
                             sw_csv, dump);
        if (gc->parsed()) return run_gradcheck(gc_seed, dump);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        const std::string msg = e.what();
        const bool numeric = msg.find("non-finite") != std::string::npos ||
                             msg.find("diverged") != std::string::npos ||
                             msg.find("out-of-tolerance") != std::string::npos;
        return numeric ? 4 : 3;
    }
    return 2;
}
