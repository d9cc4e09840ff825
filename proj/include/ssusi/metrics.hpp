#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssusi/signal.hpp"

namespace ssusi {

constexpr double kSdrCapDb = 60.0;  // exact matches would otherwise be infinite

namespace detail {

inline double ratio_db(double num, double den) {
    if (den <= 0.0) return kSdrCapDb;
    if (num <= 0.0) return -kSdrCapDb;
    return std::clamp(10.0 * std::log10(num / den), -kSdrCapDb, kSdrCapDb);
}

}  // namespace detail

// Plain SDR: 10 log10(||ref||^2 / ||est - ref||^2), trimmed to the shorter
// signal, capped at +-60 dB.
inline double sdr(const Waveform& est, const Waveform& ref) {
    const size_t n = std::min(est.samples.size(), ref.samples.size());
    double ref_e = 0.0, err_e = 0.0;
    for (size_t i = 0; i < n; ++i) {
        ref_e += ref.samples[i] * ref.samples[i];
        const double d = est.samples[i] - ref.samples[i];
        err_e += d * d;
    }
    if (ref_e <= 0.0) throw std::invalid_argument("sdr: zero reference");
    return detail::ratio_db(ref_e, err_e);
}

// Scale-invariant SDR: project est onto ref first.
inline double si_sdr(const Waveform& est, const Waveform& ref) {
    const size_t n = std::min(est.samples.size(), ref.samples.size());
    double dot = 0.0, ref_e = 0.0;
    for (size_t i = 0; i < n; ++i) {
        dot += est.samples[i] * ref.samples[i];
        ref_e += ref.samples[i] * ref.samples[i];
    }
    if (ref_e <= 0.0) throw std::invalid_argument("si_sdr: zero reference");
    const double a = dot / ref_e;
    double tgt_e = 0.0, err_e = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double s = a * ref.samples[i];
        const double e = est.samples[i] - s;
        tgt_e += s * s;
        err_e += e * e;
    }
    return detail::ratio_db(tgt_e, err_e);
}

struct SdrReport {
    double sdr_db[2] = {0.0, 0.0};
    double si_sdr_db[2] = {0.0, 0.0};
    bool swapped = false;  // estimate order vs reference order
    double mean_si_sdr() const { return 0.5 * (si_sdr_db[0] + si_sdr_db[1]); }
    double mean_sdr() const { return 0.5 * (sdr_db[0] + sdr_db[1]); }
};

// Scores both output-to-reference assignments, keeps the one with the better
// mean SI-SDR.
inline SdrReport permute_score(const Waveform& est1, const Waveform& est2, const Waveform& ref1,
                               const Waveform& ref2) {
    SdrReport id_rep, sw_rep;
    id_rep.si_sdr_db[0] = si_sdr(est1, ref1);
    id_rep.si_sdr_db[1] = si_sdr(est2, ref2);
    sw_rep.si_sdr_db[0] = si_sdr(est2, ref1);
    sw_rep.si_sdr_db[1] = si_sdr(est1, ref2);
    if (id_rep.mean_si_sdr() >= sw_rep.mean_si_sdr()) {
        id_rep.sdr_db[0] = sdr(est1, ref1);
        id_rep.sdr_db[1] = sdr(est2, ref2);
        return id_rep;
    }
    sw_rep.swapped = true;
    sw_rep.sdr_db[0] = sdr(est2, ref1);
    sw_rep.sdr_db[1] = sdr(est1, ref2);
    return sw_rep;
}

struct SelectionRates {
    double at_least_one = 0.0;
    double both = 0.0;
    int n_samples = 0;
};

struct Summary {
    double mean_sdr = 0.0;
    double mean_si_sdr = 0.0;
    SelectionRates selection;
};

inline Summary aggregate(const std::vector<SdrReport>& reports,
                         const std::vector<std::pair<bool, bool>>& selection_flags = {}) {
    if (reports.empty() && selection_flags.empty())
        throw std::invalid_argument("aggregate: empty input");
    Summary s;
    for (const auto& r : reports) {
        s.mean_sdr += r.mean_sdr();
        s.mean_si_sdr += r.mean_si_sdr();
    }
    if (!reports.empty()) {
        s.mean_sdr /= static_cast<double>(reports.size());
        s.mean_si_sdr /= static_cast<double>(reports.size());
    }
    for (const auto& [one, both] : selection_flags) {
        s.selection.at_least_one += one ? 1.0 : 0.0;
        s.selection.both += both ? 1.0 : 0.0;
    }
    s.selection.n_samples = static_cast<int>(selection_flags.size());
    if (s.selection.n_samples > 0) {
        s.selection.at_least_one /= s.selection.n_samples;
        s.selection.both /= s.selection.n_samples;
    }
    return s;
}

}  // namespace ssusi
