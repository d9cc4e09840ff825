#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "ssusi/mat.hpp"

namespace ssusi {

constexpr int kSampleRate = 16000;
constexpr int kFrameLen = 512;
constexpr int kHop = 256;
constexpr int kNumBins = kFrameLen / 2 + 1;  // 257

constexpr double kLogFloor = 1e-7;   // ln(|X| + kLogFloor)
constexpr double kDivFloor = 1e-8;   // mask-target denominator floor
constexpr double kStdFloor = 1e-8;   // normalization std floor

struct Waveform {
    std::vector<double> samples;
    int sample_rate = kSampleRate;
};

struct Spectrogram {
    // frames x bins, Hermitian half-spectrum
    std::vector<std::vector<std::complex<double>>> bins;
    int frame_len = kFrameLen;
    int hop = kHop;
    int n_samples = 0;  // original waveform length, for resynthesis

    int frames() const { return static_cast<int>(bins.size()); }
    int n_bins() const { return bins.empty() ? 0 : static_cast<int>(bins[0].size()); }
};

enum class FeatureKind { linear_magnitude, log_magnitude, normalized_log_magnitude };

struct FeatureMatrix {
    Mat values;  // frames x bins
    FeatureKind kind = FeatureKind::linear_magnitude;
};

struct NormalizationStats {
    std::vector<double> mean;  // per frequency bin
    std::vector<double> stdev;
};

struct Mask {
    Mat values;  // frames x bins, entries in [0, 1]
};

namespace detail {

// In-place iterative radix-2 FFT, n must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& x, bool inverse) {
    const int n = static_cast<int>(x.size());
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / len;
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                const std::complex<double> u = x[i + k];
                const std::complex<double> v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        for (auto& v : x) v /= static_cast<double>(n);
    }
}

}  // namespace detail

// sqrt of a half-sample-shifted periodic Hann window. The shift keeps every
// coefficient strictly positive while w^2(n) + w^2(n + N/2) = 1 still holds
// exactly, so 50% overlap-add reconstruction is exact out to the edges.
inline std::vector<double> make_analysis_window(int frame_len = kFrameLen) {
    std::vector<double> w(frame_len);
    for (int n = 0; n < frame_len; ++n) {
        const double hann = 0.5 * (1.0 - std::cos(2.0 * M_PI * (n + 0.5) / frame_len));
        w[n] = std::sqrt(hann);
    }
    return w;
}

inline Spectrogram stft(const Waveform& w, int frame_len = kFrameLen, int hop = kHop) {
    if (w.samples.empty()) throw std::invalid_argument("stft: empty input");
    const auto win = make_analysis_window(frame_len);
    const int len = static_cast<int>(w.samples.size());
    const int frames = (len + hop - 1) / hop;  // tail zero-padded

    Spectrogram s;
    s.frame_len = frame_len;
    s.hop = hop;
    s.n_samples = len;
    s.bins.assign(frames, std::vector<std::complex<double>>(frame_len / 2 + 1));

    std::vector<std::complex<double>> buf(frame_len);
    for (int t = 0; t < frames; ++t) {
        const int off = t * hop;
        for (int n = 0; n < frame_len; ++n) {
            const int idx = off + n;
            const double v = idx < len ? w.samples[idx] : 0.0;
            buf[n] = v * win[n];
        }
        detail::fft_radix2(buf, false);
        for (int k = 0; k <= frame_len / 2; ++k) s.bins[t][k] = buf[k];
    }
    return s;
}

inline Waveform istft(const Spectrogram& s) {
    const int frame_len = s.frame_len;
    const int hop = s.hop;
    const int frames = s.frames();
    const auto win = make_analysis_window(frame_len);
    const int total = frames > 0 ? (frames - 1) * hop + frame_len : 0;
    const int out_len = s.n_samples > 0 ? s.n_samples : total;

    std::vector<double> acc(total, 0.0);
    std::vector<double> wsum(total, 0.0);
    std::vector<std::complex<double>> buf(frame_len);
    for (int t = 0; t < frames; ++t) {
        for (int k = 0; k <= frame_len / 2; ++k) buf[k] = s.bins[t][k];
        for (int k = frame_len / 2 + 1; k < frame_len; ++k) buf[k] = std::conj(s.bins[t][frame_len - k]);
        detail::fft_radix2(buf, true);
        const int off = t * hop;
        for (int n = 0; n < frame_len; ++n) {
            acc[off + n] += buf[n].real() * win[n];
            wsum[off + n] += win[n] * win[n];
        }
    }

    Waveform out;
    out.samples.resize(out_len);
    for (int i = 0; i < out_len; ++i) {
        if (wsum[i] < 1e-12) throw std::runtime_error("istft: non-COLA window");
        out.samples[i] = acc[i] / wsum[i];
    }
    return out;
}

inline FeatureMatrix linear_magnitude(const Spectrogram& s) {
    FeatureMatrix f;
    f.kind = FeatureKind::linear_magnitude;
    f.values = Mat(s.frames(), s.n_bins());
    for (int t = 0; t < s.frames(); ++t)
        for (int k = 0; k < s.n_bins(); ++k) f.values(t, k) = std::abs(s.bins[t][k]);
    return f;
}

inline FeatureMatrix log_magnitude(const Spectrogram& s) {
    FeatureMatrix f = linear_magnitude(s);
    for (auto& v : f.values.a) v = std::log(v + kLogFloor);
    f.kind = FeatureKind::log_magnitude;
    return f;
}

inline FeatureMatrix log_compress(const FeatureMatrix& lin) {
    if (lin.kind != FeatureKind::linear_magnitude)
        throw std::invalid_argument("log_compress: expected linear magnitude");
    FeatureMatrix f = lin;
    for (auto& v : f.values.a) v = std::log(v + kLogFloor);
    f.kind = FeatureKind::log_magnitude;
    return f;
}

inline NormalizationStats fit_normalization(const std::vector<FeatureMatrix>& corpus) {
    if (corpus.empty()) throw std::invalid_argument("fit_normalization: empty corpus");
    const int F = corpus[0].values.cols;
    long total = 0;
    std::vector<double> mean(F, 0.0), m2(F, 0.0);
    for (const auto& f : corpus) {
        if (f.kind != FeatureKind::log_magnitude)
            throw std::invalid_argument("fit_normalization: expected log magnitude features");
        if (f.values.cols != F) throw std::invalid_argument("fit_normalization: bin count mismatch");
        total += f.values.rows;
        for (int t = 0; t < f.values.rows; ++t)
            for (int k = 0; k < F; ++k) mean[k] += f.values(t, k);
    }
    if (total < 2) throw std::invalid_argument("fit_normalization: need at least 2 frames");
    for (int k = 0; k < F; ++k) mean[k] /= static_cast<double>(total);
    for (const auto& f : corpus)
        for (int t = 0; t < f.values.rows; ++t)
            for (int k = 0; k < F; ++k) {
                const double d = f.values(t, k) - mean[k];
                m2[k] += d * d;
            }
    NormalizationStats st;
    st.mean = mean;
    st.stdev.resize(F);
    for (int k = 0; k < F; ++k)
        st.stdev[k] = std::max(std::sqrt(m2[k] / static_cast<double>(total)), kStdFloor);
    return st;
}

inline FeatureMatrix normalize(const FeatureMatrix& f, const NormalizationStats& st) {
    if (f.kind != FeatureKind::log_magnitude)
        throw std::invalid_argument("normalize: expected log magnitude features");
    if (f.values.cols != static_cast<int>(st.mean.size()))
        throw std::invalid_argument("normalize: shape mismatch");
    FeatureMatrix out = f;
    for (int t = 0; t < out.values.rows; ++t)
        for (int k = 0; k < out.values.cols; ++k)
            out.values(t, k) = (out.values(t, k) - st.mean[k]) / st.stdev[k];
    out.kind = FeatureKind::normalized_log_magnitude;
    return out;
}

inline FeatureMatrix denormalize(const FeatureMatrix& f, const NormalizationStats& st) {
    if (f.kind != FeatureKind::normalized_log_magnitude)
        throw std::invalid_argument("denormalize: expected normalized features");
    if (f.values.cols != static_cast<int>(st.mean.size()))
        throw std::invalid_argument("denormalize: shape mismatch");
    FeatureMatrix out = f;
    for (int t = 0; t < out.values.rows; ++t)
        for (int k = 0; k < out.values.cols; ++k)
            out.values(t, k) = out.values(t, k) * st.stdev[k] + st.mean[k];
    out.kind = FeatureKind::log_magnitude;
    return out;
}

inline FeatureMatrix apply_mask(const Mask& m, const FeatureMatrix& x_mag) {
    if (x_mag.kind != FeatureKind::linear_magnitude)
        throw std::invalid_argument("apply_mask: expected linear magnitude");
    check_shape(m.values, x_mag.values, "apply_mask");
    FeatureMatrix out = x_mag;
    for (size_t i = 0; i < out.values.size(); ++i) out.values.a[i] *= m.values.a[i];
    return out;
}

// Spectral magnitude mask target, clipped to [0, 1].
inline Mask smm_target(const FeatureMatrix& clean_mag, const FeatureMatrix& mix_mag) {
    check_shape(clean_mag.values, mix_mag.values, "smm_target");
    Mask m;
    m.values = Mat(clean_mag.values.rows, clean_mag.values.cols);
    for (size_t i = 0; i < m.values.size(); ++i) {
        const double r = clean_mag.values.a[i] / (mix_mag.values.a[i] + kDivFloor);
        m.values.a[i] = std::clamp(r, 0.0, 1.0);
    }
    return m;
}

// Masked magnitude recombined with the mixture phase.
inline Waveform resynthesize(const Mask& m, const Spectrogram& mix) {
    if (m.values.rows != mix.frames() || m.values.cols != mix.n_bins())
        throw std::invalid_argument("resynthesize: shape mismatch");
    Spectrogram est = mix;
    for (int t = 0; t < est.frames(); ++t)
        for (int k = 0; k < est.n_bins(); ++k) est.bins[t][k] *= m.values(t, k);
    return istft(est);
}

}  // namespace ssusi
