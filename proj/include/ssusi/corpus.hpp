#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssusi/rng.hpp"
#include "ssusi/signal.hpp"

namespace ssusi {

// Seed-stream tags; profile utterances must never share an RNG stream with
// mixture utterances of the same speaker.
enum class UtteranceStream : uint64_t { mixture = 0x4d495855, profile = 0x50524f46 };

struct SyntheticSpeaker {
    int speaker_id = 0;
    std::vector<double> spectral_envelope;  // kNumBins, in [0, 1]
    double pitch_lo_hz = 0.0;
    double pitch_hi_hz = 0.0;
    uint64_t rng_seed = 0;
};

struct SpeakerProfile {
    int speaker_id = 0;
    FeatureMatrix features;  // normalized log magnitude, T_p x F
};

struct Inventory {
    std::vector<SpeakerProfile> profiles;
    std::optional<std::pair<int, int>> relevant_ids;  // evaluation-only ground truth
};

struct MixtureSample {
    Waveform mix_wave;
    Spectrogram mix_spec;
    FeatureMatrix mix_mag;   // linear magnitude
    FeatureMatrix mix_feat;  // normalized log magnitude
    std::pair<FeatureMatrix, FeatureMatrix> targets;  // clean linear magnitudes
    std::pair<Waveform, Waveform> source_waves;       // scaled sources, mix = a + b
    std::pair<int, int> speaker_ids;
};

enum class MissingMode { standard, m1, m2 };

struct CorpusManifest {
    uint64_t base_seed = 0;
    std::vector<SyntheticSpeaker> train;
    std::vector<SyntheticSpeaker> test;
};

// Speaker identity = a smooth multi-bump spectral envelope plus a pitch range,
// both derived from the speaker seed.
inline SyntheticSpeaker make_speaker(int speaker_id, uint64_t seed) {
    SyntheticSpeaker spk;
    spk.speaker_id = speaker_id;
    spk.rng_seed = seed;
    Rng rng(mix_seed(seed, 0x454e56));
    spk.spectral_envelope.assign(kNumBins, 0.06);
    const int n_bumps = 3 + rng.uniform_int(3);
    for (int b = 0; b < n_bumps; ++b) {
        const double center = rng.uniform(8.0, 200.0);
        const double width = rng.uniform(8.0, 40.0);
        const double gain = rng.uniform(0.35, 1.0);
        for (int k = 0; k < kNumBins; ++k) {
            const double d = (k - center) / width;
            spk.spectral_envelope[k] += gain * std::exp(-0.5 * d * d);
        }
    }
    double mx = 0.0;
    for (double v : spk.spectral_envelope) mx = std::max(mx, v);
    for (double& v : spk.spectral_envelope) v /= mx;
    spk.pitch_lo_hz = rng.uniform(90.0, 250.0);
    spk.pitch_hi_hz = spk.pitch_lo_hz * rng.uniform(1.15, 1.35);
    return spk;
}

inline double envelope_at_hz(const SyntheticSpeaker& spk, double hz) {
    const double bin = hz * kFrameLen / kSampleRate;
    if (bin <= 0.0) return spk.spectral_envelope.front();
    if (bin >= kNumBins - 1) return spk.spectral_envelope.back();
    const int k = static_cast<int>(bin);
    const double fr = bin - k;
    return spk.spectral_envelope[k] * (1.0 - fr) + spk.spectral_envelope[k + 1] * fr;
}

// Harmonic source with a slowly drifting pitch contour, plus envelope-shaped
// noise and a syllable-rate amplitude modulation. Pure function of
// (speaker, duration, seed, stream).
inline Waveform synth_utterance(const SyntheticSpeaker& spk, double duration_s, uint64_t seed,
                                UtteranceStream stream = UtteranceStream::mixture) {
    if (duration_s < 0.5 || duration_s > 10.0)
        throw std::invalid_argument("synth_utterance: duration out of range [0.5, 10]");
    Rng rng(mix_seed(spk.rng_seed, static_cast<uint64_t>(stream), seed));
    const int n = static_cast<int>(duration_s * kSampleRate);

    // pitch contour: two slow sinusoids spanning the speaker's range
    const double r1 = rng.uniform(0.25, 0.6), r2 = rng.uniform(0.9, 1.8);
    const double p1 = rng.uniform(0.0, 2.0 * M_PI), p2 = rng.uniform(0.0, 2.0 * M_PI);
    const double f_mid = 0.5 * (spk.pitch_lo_hz + spk.pitch_hi_hz);
    const double f_dev = 0.5 * (spk.pitch_hi_hz - spk.pitch_lo_hz);

    // amplitude modulation at syllable rate
    const double fm = rng.uniform(1.5, 4.5);
    const double pm = rng.uniform(0.0, 2.0 * M_PI);

    const int n_harm = std::max(1, static_cast<int>(7200.0 / spk.pitch_hi_hz));
    std::vector<double> phase(n_harm, 0.0);
    for (auto& p : phase) p = rng.uniform(0.0, 2.0 * M_PI);

    Waveform w;
    w.samples.assign(n, 0.0);
    double harm_energy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        const double f0 = f_mid + f_dev * (0.7 * std::sin(2.0 * M_PI * r1 * t + p1) +
                                           0.3 * std::sin(2.0 * M_PI * r2 * t + p2));
        double v = 0.0;
        for (int h = 0; h < n_harm; ++h) {
            const double fh = f0 * (h + 1);
            if (fh > 7600.0) break;
            phase[h] += 2.0 * M_PI * fh / kSampleRate;
            v += envelope_at_hz(spk, fh) * std::sin(phase[h]);
        }
        w.samples[i] = v;
        harm_energy += v * v;
    }

    // envelope-shaped noise: white noise filtered through the envelope via STFT
    Waveform noise;
    noise.samples.resize(n);
    for (auto& s : noise.samples) s = rng.normal();
    Spectrogram ns = stft(noise);
    for (int t = 0; t < ns.frames(); ++t)
        for (int k = 0; k < kNumBins; ++k) ns.bins[t][k] *= spk.spectral_envelope[k];
    Waveform shaped = istft(ns);
    double noise_energy = 0.0;
    for (double s : shaped.samples) noise_energy += s * s;
    const double gain =
        noise_energy > 0.0 ? 0.05 * std::sqrt(harm_energy / noise_energy) : 0.0;
    // syllable-like gating applied to source and noise together; the deep
    // troughs give the mixtures their time-frequency sparsity
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        const double s = std::sin(2.0 * M_PI * fm * t + pm);
        const double am = 0.015 + 0.985 * std::pow(std::max(0.0, s), 1.5);
        w.samples[i] = am * (w.samples[i] + gain * shaped.samples[i]);
    }

    double peak = 0.0;
    for (double s : w.samples) peak = std::max(peak, std::abs(s));
    if (peak > 0.0)
        for (double& s : w.samples) s *= 0.9 / peak;
    return w;
}

inline double energy(const Waveform& w) {
    double e = 0.0;
    for (double s : w.samples) e += s * s;
    return e;
}

// Fully overlapped two-speaker mixture at the requested SNR (speaker a vs b).
inline MixtureSample simulate_mixture(const SyntheticSpeaker& spk_a, const SyntheticSpeaker& spk_b,
                                      double snr_db, uint64_t seed, const NormalizationStats& stats,
                                      double duration_s = 3.0) {
    if (spk_a.speaker_id == spk_b.speaker_id)
        throw std::invalid_argument("simulate_mixture: identical speakers");
    Waveform a = synth_utterance(spk_a, duration_s, mix_seed(seed, 1));
    Waveform b = synth_utterance(spk_b, duration_s, mix_seed(seed, 2));
    const double ea = energy(a), eb = energy(b);
    const double scale_b = std::sqrt(ea / (eb * std::pow(10.0, snr_db / 10.0)));
    for (double& s : b.samples) s *= scale_b;

    Waveform mix;
    mix.samples.resize(a.samples.size());
    double peak = 0.0;
    for (size_t i = 0; i < mix.samples.size(); ++i) {
        mix.samples[i] = a.samples[i] + b.samples[i];
        peak = std::max(peak, std::abs(mix.samples[i]));
    }
    if (peak > 0.99) {  // rescale the sources, then rebuild the exact sum
        const double g = 0.99 / peak;
        for (double& s : a.samples) s *= g;
        for (double& s : b.samples) s *= g;
        for (size_t i = 0; i < mix.samples.size(); ++i)
            mix.samples[i] = a.samples[i] + b.samples[i];
    }

    MixtureSample ms;
    ms.mix_wave = mix;
    ms.mix_spec = stft(mix);
    ms.mix_mag = linear_magnitude(ms.mix_spec);
    ms.mix_feat = normalize(log_compress(ms.mix_mag), stats);
    ms.targets = {linear_magnitude(stft(a)), linear_magnitude(stft(b))};
    ms.source_waves = {a, b};
    ms.speaker_ids = {spk_a.speaker_id, spk_b.speaker_id};
    return ms;
}

inline SpeakerProfile make_profile(const SyntheticSpeaker& spk, double profile_dur_s,
                                   uint64_t seed, const NormalizationStats& stats) {
    Waveform w = synth_utterance(spk, profile_dur_s, seed, UtteranceStream::profile);
    SpeakerProfile p;
    p.speaker_id = spk.speaker_id;
    p.features = normalize(log_compress(linear_magnitude(stft(w))), stats);
    return p;
}

// Inventory of (2 - missing) relevant + n_irrelevant shuffled profiles.
inline Inventory build_inventory(const SyntheticSpeaker& rel_a, const SyntheticSpeaker& rel_b,
                                 int n_irrelevant, const std::vector<SyntheticSpeaker>& pool,
                                 double profile_dur_s, uint64_t shuffle_seed,
                                 const NormalizationStats& stats,
                                 MissingMode missing = MissingMode::standard) {
    Rng rng(mix_seed(shuffle_seed, 0x494e56));
    std::vector<const SyntheticSpeaker*> members;
    if (missing == MissingMode::standard) {
        members.push_back(&rel_a);
        members.push_back(&rel_b);
    } else if (missing == MissingMode::m1) {
        // one relevant profile missing; keep the other at random
        members.push_back(rng.uniform() < 0.5 ? &rel_a : &rel_b);
    }
    std::vector<const SyntheticSpeaker*> candidates;
    for (const auto& spk : pool)
        if (spk.speaker_id != rel_a.speaker_id && spk.speaker_id != rel_b.speaker_id)
            candidates.push_back(&spk);
    if (static_cast<int>(candidates.size()) < n_irrelevant)
        throw std::invalid_argument("build_inventory: pool exhausted");
    rng.shuffle(candidates);
    for (int i = 0; i < n_irrelevant; ++i) members.push_back(candidates[i]);
    rng.shuffle(members);

    Inventory inv;
    for (const auto* spk : members)
        inv.profiles.push_back(make_profile(*spk, profile_dur_s, mix_seed(shuffle_seed, spk->rng_seed), stats));
    inv.relevant_ids = std::make_pair(rel_a.speaker_id, rel_b.speaker_id);
    return inv;
}

inline CorpusManifest corpus_manifest(uint64_t base_seed, int n_train = 64, int n_test = 16) {
    CorpusManifest m;
    m.base_seed = base_seed;
    for (int i = 0; i < n_train; ++i) m.train.push_back(make_speaker(i, mix_seed(base_seed, i)));
    for (int i = 0; i < n_test; ++i) {
        const int id = n_train + i;
        m.test.push_back(make_speaker(id, mix_seed(base_seed, id)));
    }
    return m;
}

// Manifest persistence: one speaker per line. Envelopes are regenerated from
// the stored seeds, so only the scalar parameters are written.
inline void save_manifest(const std::string& path, const CorpusManifest& m) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_manifest: cannot open " + path);
    os.precision(17);
    os << "ssusi-manifest 1\n";
    os << "base_seed " << m.base_seed << "\n";
    os << "train " << m.train.size() << " test " << m.test.size() << "\n";
    auto dump = [&](const std::vector<SyntheticSpeaker>& v) {
        for (const auto& s : v)
            os << s.speaker_id << " " << s.rng_seed << " " << s.pitch_lo_hz << " "
               << s.pitch_hi_hz << "\n";
    };
    dump(m.train);
    dump(m.test);
}

inline CorpusManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_manifest: cannot open " + path);
    std::string magic, key;
    int version = 0;
    is >> magic >> version;
    if (magic != "ssusi-manifest" || version != 1)
        throw std::runtime_error("load_manifest: bad header in " + path);
    CorpusManifest m;
    size_t n_train = 0, n_test = 0;
    is >> key >> m.base_seed >> key >> n_train >> key >> n_test;
    auto read_one = [&]() {
        int id;
        uint64_t seed;
        double lo, hi;
        is >> id >> seed >> lo >> hi;
        return make_speaker(id, seed);
    };
    for (size_t i = 0; i < n_train; ++i) m.train.push_back(read_one());
    for (size_t i = 0; i < n_test; ++i) m.test.push_back(read_one());
    if (!is) throw std::runtime_error("load_manifest: truncated file " + path);
    return m;
}

}  // namespace ssusi
