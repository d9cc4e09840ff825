#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <random>

#include "ssusi/corpus.hpp"
#include "ssusi/metrics.hpp"
#include "ssusi/signal.hpp"
#include "ssusi/wav.hpp"

using namespace ssusi;

namespace {

Waveform random_waveform(int n, uint64_t seed) {
    Rng rng(seed);
    Waveform w;
    w.samples.resize(n);
    for (auto& s : w.samples) s = rng.uniform(-0.8, 0.8);
    return w;
}

// Independent oracle: direct summation DFT of one windowed frame.
std::complex<double> direct_dft_bin(const std::vector<double>& frame, int k) {
    std::complex<double> acc(0.0, 0.0);
    const int n = static_cast<int>(frame.size());
    for (int i = 0; i < n; ++i) {
        const double ang = -2.0 * M_PI * k * i / n;
        acc += frame[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    return acc;
}

}  // namespace

TEST_CASE("stft of zero signal is all-zero with the framing formula") {
    Waveform w;
    w.samples.assign(16000, 0.0);
    const Spectrogram s = stft(w);
    REQUIRE(s.frames() == 63);  // ceil(16000 / 256)
    REQUIRE(s.n_bins() == 257);
    for (int t = 0; t < s.frames(); ++t)
        for (int k = 0; k < s.n_bins(); ++k) REQUIRE(std::abs(s.bins[t][k]) == 0.0);
}

TEST_CASE("stft rejects empty input") {
    Waveform w;
    REQUIRE_THROWS_WITH(stft(w), Catch::Matchers::ContainsSubstring("empty input"));
}

TEST_CASE("stft matches a direct-summation oracle frame by frame") {
    const Waveform w = random_waveform(2048, 42);
    const Spectrogram s = stft(w);
    const auto win = make_analysis_window();
    // interior frame 2, a few bins
    const int t = 2;
    std::vector<double> frame(kFrameLen);
    for (int i = 0; i < kFrameLen; ++i) frame[i] = w.samples[t * kHop + i] * win[i];
    for (int k : {0, 1, 37, 128, 256}) {
        const auto oracle = direct_dft_bin(frame, k);
        REQUIRE(std::abs(s.bins[t][k] - oracle) < 1e-9);
    }
}

TEST_CASE("bin-centered sinusoid peaks at its bin in interior frames") {
    const int k = 40;  // frequency k * 16000 / 512
    const double f = k * static_cast<double>(kSampleRate) / kFrameLen;
    Waveform w;
    w.samples.resize(8192);
    for (size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = 0.7 * std::sin(2.0 * M_PI * f * static_cast<double>(i) / kSampleRate);
    const Spectrogram s = stft(w);
    for (int t = 2; t < s.frames() - 2; ++t) {
        int argmax = 0;
        for (int b = 1; b < s.n_bins(); ++b)
            if (std::abs(s.bins[t][b]) > std::abs(s.bins[t][argmax])) argmax = b;
        REQUIRE(argmax == k);
    }
}

TEST_CASE("istft(stft(x)) reconstructs x") {
    for (int len : {1024, 4000, 16000}) {
        const Waveform x = random_waveform(len, 100 + len);
        const Waveform y = istft(stft(x));
        REQUIRE(y.samples.size() == x.samples.size());
        double err = 0.0;
        for (size_t i = 0; i < x.samples.size(); ++i)
            err = std::max(err, std::abs(x.samples[i] - y.samples[i]));
        REQUIRE(err < 1e-6);
    }
}

TEST_CASE("istft linearity: doubled spectrogram doubles the waveform") {
    const Waveform x = random_waveform(3000, 7);
    Spectrogram s = stft(x);
    const Waveform y = istft(s);
    for (auto& frame : s.bins)
        for (auto& b : frame) b *= 2.0;
    const Waveform y2 = istft(s);
    for (size_t i = 0; i < y.samples.size(); ++i)
        REQUIRE(y2.samples[i] == Catch::Approx(2.0 * y.samples[i]).margin(1e-12));
}

TEST_CASE("stft linearity") {
    const Waveform x = random_waveform(3000, 8);
    const Waveform y = random_waveform(3000, 9);
    Waveform z;
    z.samples.resize(3000);
    for (int i = 0; i < 3000; ++i) z.samples[i] = 2.0 * x.samples[i] - 0.5 * y.samples[i];
    const Spectrogram sx = stft(x), sy = stft(y), sz = stft(z);
    for (int t = 0; t < sz.frames(); ++t)
        for (int k = 0; k < sz.n_bins(); ++k)
            REQUIRE(std::abs(sz.bins[t][k] - (2.0 * sx.bins[t][k] - 0.5 * sy.bins[t][k])) < 1e-9);
}

TEST_CASE("log magnitude of zero spectrogram is ln(eps)") {
    Waveform w;
    w.samples.assign(2048, 0.0);
    const FeatureMatrix f = log_magnitude(stft(w));
    for (double v : f.values.a) REQUIRE(v == Catch::Approx(std::log(kLogFloor)));
}

TEST_CASE("log magnitude matches an elementwise oracle") {
    const Spectrogram s = stft(random_waveform(2048, 11));
    const FeatureMatrix f = log_magnitude(s);
    for (int t = 0; t < s.frames(); ++t)
        for (int k = 0; k < s.n_bins(); ++k)
            REQUIRE(f.values(t, k) ==
                    Catch::Approx(std::log(std::abs(s.bins[t][k]) + kLogFloor)).margin(1e-12));
}

TEST_CASE("fit_normalization on constant corpus hits the std floor") {
    FeatureMatrix f;
    f.kind = FeatureKind::log_magnitude;
    f.values = Mat(5, 4, 3.25);
    const NormalizationStats st = fit_normalization({f});
    for (double m : st.mean) REQUIRE(m == Catch::Approx(3.25));
    for (double s : st.stdev) REQUIRE(s == kStdFloor);
}

TEST_CASE("fit_normalization on a balanced 0/2 corpus gives mean 1 std 1") {
    FeatureMatrix zeros, twos;
    zeros.kind = twos.kind = FeatureKind::log_magnitude;
    zeros.values = Mat(6, 3, 0.0);
    twos.values = Mat(6, 3, 2.0);
    const NormalizationStats st = fit_normalization({zeros, twos});
    for (double m : st.mean) REQUIRE(m == Catch::Approx(1.0));
    for (double s : st.stdev) REQUIRE(s == Catch::Approx(1.0));
}

TEST_CASE("fit_normalization matches a two-pass oracle") {
    Rng rng(55);
    std::vector<FeatureMatrix> corpus;
    for (int i = 0; i < 3; ++i) {
        FeatureMatrix f;
        f.kind = FeatureKind::log_magnitude;
        f.values = Mat(4 + i, 5);
        for (auto& v : f.values.a) v = rng.normal();
        corpus.push_back(f);
    }
    const NormalizationStats st = fit_normalization(corpus);
    for (int k = 0; k < 5; ++k) {
        double mean = 0.0;
        int n = 0;
        for (const auto& f : corpus)
            for (int t = 0; t < f.values.rows; ++t) {
                mean += f.values(t, k);
                ++n;
            }
        mean /= n;
        double var = 0.0;
        for (const auto& f : corpus)
            for (int t = 0; t < f.values.rows; ++t)
                var += (f.values(t, k) - mean) * (f.values(t, k) - mean);
        var /= n;
        REQUIRE(st.mean[k] == Catch::Approx(mean).margin(1e-10));
        REQUIRE(st.stdev[k] == Catch::Approx(std::sqrt(var)).margin(1e-10));
    }
}

TEST_CASE("fit_normalization rejects too few frames") {
    FeatureMatrix f;
    f.kind = FeatureKind::log_magnitude;
    f.values = Mat(1, 4, 1.0);
    REQUIRE_THROWS(fit_normalization({f}));
}

TEST_CASE("normalize and denormalize are mutual inverses") {
    Rng rng(12);
    FeatureMatrix f;
    f.kind = FeatureKind::log_magnitude;
    f.values = Mat(7, 6);
    for (auto& v : f.values.a) v = rng.uniform(-3.0, 3.0);
    NormalizationStats st;
    for (int k = 0; k < 6; ++k) {
        st.mean.push_back(rng.uniform(-1.0, 1.0));
        st.stdev.push_back(rng.uniform(0.5, 2.0));
    }
    const FeatureMatrix back = denormalize(normalize(f, st), st);
    REQUIRE(max_abs_diff(back.values, f.values) < 1e-10);

    NormalizationStats identity;
    identity.mean.assign(6, 0.0);
    identity.stdev.assign(6, 1.0);
    const FeatureMatrix same = normalize(f, identity);
    REQUIRE(max_abs_diff(same.values, f.values) == 0.0);
}

TEST_CASE("apply_mask edge cases and oracle") {
    FeatureMatrix x;
    x.kind = FeatureKind::linear_magnitude;
    x.values = Mat(3, 4);
    Rng rng(77);
    for (auto& v : x.values.a) v = rng.uniform(0.0, 2.0);

    Mask ones;
    ones.values = Mat(3, 4, 1.0);
    REQUIRE(max_abs_diff(apply_mask(ones, x).values, x.values) == 0.0);

    Mask zeros;
    zeros.values = Mat(3, 4, 0.0);
    REQUIRE(frob_sq(apply_mask(zeros, x).values) == 0.0);

    Mask m;
    m.values = Mat(3, 4);
    for (auto& v : m.values.a) v = rng.uniform(0.0, 1.0);
    const FeatureMatrix y = apply_mask(m, x);
    for (size_t i = 0; i < y.values.size(); ++i) {
        REQUIRE(y.values.a[i] == Catch::Approx(m.values.a[i] * x.values.a[i]));
        REQUIRE(y.values.a[i] <= x.values.a[i] + 1e-15);
    }

    Mask bad;
    bad.values = Mat(2, 4);
    REQUIRE_THROWS(apply_mask(bad, x));
}

TEST_CASE("smm_target clipping rules") {
    FeatureMatrix mix, clean;
    mix.kind = clean.kind = FeatureKind::linear_magnitude;
    mix.values = Mat(2, 3, 0.5);
    clean.values = Mat(2, 3, 0.5);
    for (double v : smm_target(clean, mix).values.a) REQUIRE(v == Catch::Approx(1.0).margin(1e-7));

    clean.values.fill(0.0);
    for (double v : smm_target(clean, mix).values.a) REQUIRE(v == 0.0);

    clean.values.fill(1.0);  // clean = 2 * mix -> clipped
    for (double v : smm_target(clean, mix).values.a) REQUIRE(v == 1.0);
}

TEST_CASE("resynthesize with all-ones mask reproduces the mixture") {
    const Waveform x = random_waveform(4000, 3);
    const Spectrogram s = stft(x);
    Mask ones;
    ones.values = Mat(s.frames(), s.n_bins(), 1.0);
    const Waveform y = resynthesize(ones, s);
    double err = 0.0;
    for (size_t i = 0; i < x.samples.size(); ++i)
        err = std::max(err, std::abs(x.samples[i] - y.samples[i]));
    REQUIRE(err < 1e-6);

    Mask zeros;
    zeros.values = Mat(s.frames(), s.n_bins(), 0.0);
    const Waveform silence = resynthesize(zeros, s);
    for (double v : silence.samples) REQUIRE(v == 0.0);
}

TEST_CASE("oracle SMM separation achieves SI-SDR >= 12 dB") {
    const CorpusManifest manifest = corpus_manifest(2024, 8, 4);
    NormalizationStats st;
    st.mean.assign(kNumBins, 0.0);
    st.stdev.assign(kNumBins, 1.0);
    double total = 0.0;
    const int n = 10;
    for (int i = 0; i < n; ++i) {
        const MixtureSample ms =
            simulate_mixture(manifest.train[i % 8], manifest.train[(i + 3) % 8], 0.0, 900 + i, st);
        const Mask m1 = smm_target(ms.targets.first, ms.mix_mag);
        const Mask m2 = smm_target(ms.targets.second, ms.mix_mag);
        const SdrReport rep = permute_score(resynthesize(m1, ms.mix_spec),
                                            resynthesize(m2, ms.mix_spec), ms.source_waves.first,
                                            ms.source_waves.second);
        total += rep.mean_si_sdr();
    }
    REQUIRE(total / n >= 12.0);
}

TEST_CASE("wav round trip at 16-bit quantization") {
    const Waveform x = random_waveform(5000, 21);
    const std::string path = "/tmp/ssusi_test_wav.wav";
    write_wav(path, x);
    const Waveform y = read_wav(path);
    REQUIRE(y.sample_rate == 16000);
    REQUIRE(y.samples.size() == x.samples.size());
    for (size_t i = 0; i < x.samples.size(); ++i)
        REQUIRE(std::abs(x.samples[i] - y.samples[i]) < 1.0 / 32000.0);
}

TEST_CASE("normalization stats file round trip") {
    NormalizationStats st;
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        st.mean.push_back(rng.normal());
        st.stdev.push_back(rng.uniform(0.1, 2.0));
    }
    const std::string path = "/tmp/ssusi_test_stats.txt";
    save_stats(path, st);
    const NormalizationStats back = load_stats(path);
    for (int i = 0; i < 10; ++i) {
        REQUIRE(back.mean[i] == Catch::Approx(st.mean[i]).epsilon(1e-14));
        REQUIRE(back.stdev[i] == Catch::Approx(st.stdev[i]).epsilon(1e-14));
    }
}
