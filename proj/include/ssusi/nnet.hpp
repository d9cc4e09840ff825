#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

#include "ssusi/mat.hpp"
#include "ssusi/rng.hpp"

namespace ssusi::nnet {

struct Tensor {
    Mat value;
    Mat grad;
    bool requires_grad = true;

    explicit Tensor(int r = 0, int c = 0) : value(r, c), grad(r, c) {}
};

// Named parameter set. std::map keeps iteration order stable so optimizer
// updates and checkpoints are deterministic.
struct ModelParams {
    std::map<std::string, Tensor> tensors;
    uint64_t init_seed = 0;

    Tensor& at(const std::string& name) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::out_of_range("no parameter named " + name);
        return it->second;
    }
    const Tensor& at(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::out_of_range("no parameter named " + name);
        return it->second;
    }

    void zero_grad() {
        for (auto& [name, t] : tensors) t.grad.fill(0.0);
    }

    void scale_grad(double s) {
        for (auto& [name, t] : tensors)
            for (auto& g : t.grad.a) g *= s;
    }

    size_t param_count() const {
        size_t n = 0;
        for (const auto& [name, t] : tensors) n += t.value.size();
        return n;
    }

    bool all_finite() const {
        for (const auto& [name, t] : tensors)
            if (!t.value.all_finite()) return false;
        return true;
    }
};

// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
inline void init_uniform(Mat& w, int fan_in, Rng& rng) {
    const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : w.a) v = rng.uniform(-b, b);
}

struct AdamState {
    std::map<std::string, std::pair<Mat, Mat>> moments;  // (m, v) per tensor
    long step = 0;
};

inline void adam_step(ModelParams& params, AdamState& state, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (auto& [name, t] : params.tensors) {
        if (!t.requires_grad) continue;
        if (!t.grad.all_finite())
            throw std::runtime_error("adam_step: non-finite gradient in " + name);
        auto it = state.moments.find(name);
        if (it == state.moments.end())
            it = state.moments
                     .emplace(name, std::make_pair(Mat(t.value.rows, t.value.cols),
                                                   Mat(t.value.rows, t.value.cols)))
                     .first;
        Mat& m = it->second.first;
        Mat& v = it->second.second;
        for (size_t i = 0; i < t.value.size(); ++i) {
            const double g = t.grad.a[i];
            m.a[i] = beta1 * m.a[i] + (1.0 - beta1) * g;
            v.a[i] = beta2 * v.a[i] + (1.0 - beta2) * g * g;
            const double mhat = m.a[i] / bc1;
            const double vhat = v.a[i] / bc2;
            t.value.a[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_name;
    int worst_index = -1;
};

// Central finite differences against the analytic gradient. loss_fn(true)
// must leave gradients in params.grad and return the loss; loss_fn(false)
// evaluates the loss only. Error is |a-b| / max(1, |a|, |b|).
inline GradCheckReport gradcheck(ModelParams& params, const std::function<double(bool)>& loss_fn,
                                 double h = 1e-5) {
    if (params.param_count() > 20000)
        throw std::invalid_argument("gradcheck: parameter count exceeds 20000");
    params.zero_grad();
    const double base = loss_fn(true);
    if (!std::isfinite(base)) throw std::runtime_error("gradcheck: non-finite loss");

    std::map<std::string, Mat> analytic;
    for (auto& [name, t] : params.tensors) analytic.emplace(name, t.grad);

    GradCheckReport rep;
    for (auto& [name, t] : params.tensors) {
        if (!t.requires_grad) continue;
        for (size_t i = 0; i < t.value.size(); ++i) {
            const double orig = t.value.a[i];
            t.value.a[i] = orig + h;
            const double lp = loss_fn(false);
            t.value.a[i] = orig - h;
            const double lm = loss_fn(false);
            t.value.a[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = analytic.at(name).a[i];
            const double err = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
            if (err > rep.max_rel_err) {
                rep.max_rel_err = err;
                rep.worst_name = name;
                rep.worst_index = static_cast<int>(i);
            }
        }
    }
    return rep;
}

}  // namespace ssusi::nnet
