#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ssusi {

// Dense row-major double matrix. Everything in this project is small enough
// that a flat vector plus hand-rolled matmul is sufficient.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

    double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return a.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v) { std::fill(a.begin(), a.end(), v); }

    bool all_finite() const {
        for (double v : a)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void check_shape(const Mat& x, const Mat& y, const char* where) {
    if (!x.same_shape(y)) throw std::invalid_argument(std::string(where) + ": shape mismatch");
}

// C = A * B, ikj order.
inline Mat matmul(const Mat& A, const Mat& B) {
    if (A.cols != B.rows) throw std::invalid_argument("matmul: inner dims disagree");
    Mat C(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i) {
        const double* ai = A.row(i);
        double* ci = C.row(i);
        for (int k = 0; k < A.cols; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = B.row(k);
            for (int j = 0; j < B.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return C;
}

// C = A * B^T
inline Mat matmul_nt(const Mat& A, const Mat& B) {
    if (A.cols != B.cols) throw std::invalid_argument("matmul_nt: inner dims disagree");
    Mat C(A.rows, B.rows);
    for (int i = 0; i < A.rows; ++i) {
        const double* ai = A.row(i);
        for (int j = 0; j < B.rows; ++j) {
            const double* bj = B.row(j);
            double s = 0.0;
            for (int k = 0; k < A.cols; ++k) s += ai[k] * bj[k];
            C(i, j) = s;
        }
    }
    return C;
}

// C = A^T * B
inline Mat matmul_tn(const Mat& A, const Mat& B) {
    if (A.rows != B.rows) throw std::invalid_argument("matmul_tn: inner dims disagree");
    Mat C(A.cols, B.cols);
    for (int k = 0; k < A.rows; ++k) {
        const double* ak = A.row(k);
        const double* bk = B.row(k);
        for (int i = 0; i < A.cols; ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            double* ci = C.row(i);
            for (int j = 0; j < B.cols; ++j) ci[j] += aki * bk[j];
        }
    }
    return C;
}

inline void add_inplace(Mat& x, const Mat& y) {
    check_shape(x, y, "add");
    for (size_t i = 0; i < x.size(); ++i) x.a[i] += y.a[i];
}

inline void axpy_inplace(Mat& x, double s, const Mat& y) {
    check_shape(x, y, "axpy");
    for (size_t i = 0; i < x.size(); ++i) x.a[i] += s * y.a[i];
}

inline double frob_sq(const Mat& x) {
    double s = 0.0;
    for (double v : x.a) s += v * v;
    return s;
}

inline double max_abs_diff(const Mat& x, const Mat& y) {
    check_shape(x, y, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x.a[i] - y.a[i]));
    return m;
}

}  // namespace ssusi
