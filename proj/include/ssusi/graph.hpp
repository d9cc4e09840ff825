#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ssusi/nnet.hpp"

namespace ssusi::nnet {

// Reverse-mode tape over matrix-valued nodes. Ops append a node holding the
// forward value plus a closure that scatters the node's gradient to its
// inputs. backward() walks the tape in reverse.
class Graph {
public:
    using NodeId = int;

    NodeId constant(Mat v) { return push(std::move(v), nullptr, {}); }

    NodeId param(Tensor& t) {
        const NodeId id = push(t.value, &t, {});
        return id;
    }

    const Mat& value(NodeId id) const { return nodes_[id].value; }
    Mat& grad(NodeId id) { return nodes_[id].grad; }
    double scalar(NodeId id) const {
        if (nodes_[id].value.rows != 1 || nodes_[id].value.cols != 1)
            throw std::invalid_argument("scalar: node is not 1x1");
        return nodes_[id].value(0, 0);
    }

    NodeId add(NodeId a, NodeId b) {
        check_shape(value(a), value(b), "graph add");
        Mat out = value(a);
        add_inplace(out, value(b));
        return push(std::move(out), nullptr, [this, a, b](NodeId id) {
            add_inplace(nodes_[a].grad, nodes_[id].grad);
            add_inplace(nodes_[b].grad, nodes_[id].grad);
        });
    }

    NodeId sub(NodeId a, NodeId b) {
        check_shape(value(a), value(b), "graph sub");
        Mat out = value(a);
        axpy_inplace(out, -1.0, value(b));
        return push(std::move(out), nullptr, [this, a, b](NodeId id) {
            add_inplace(nodes_[a].grad, nodes_[id].grad);
            axpy_inplace(nodes_[b].grad, -1.0, nodes_[id].grad);
        });
    }

    NodeId mul(NodeId a, NodeId b) {  // elementwise
        check_shape(value(a), value(b), "graph mul");
        Mat out = value(a);
        for (size_t i = 0; i < out.size(); ++i) out.a[i] *= value(b).a[i];
        return push(std::move(out), nullptr, [this, a, b](NodeId id) {
            const Mat& g = nodes_[id].grad;
            for (size_t i = 0; i < g.size(); ++i) {
                nodes_[a].grad.a[i] += g.a[i] * nodes_[b].value.a[i];
                nodes_[b].grad.a[i] += g.a[i] * nodes_[a].value.a[i];
            }
        });
    }

    NodeId scale(NodeId a, double s) {
        Mat out = value(a);
        for (auto& v : out.a) v *= s;
        return push(std::move(out), nullptr, [this, a, s](NodeId id) {
            axpy_inplace(nodes_[a].grad, s, nodes_[id].grad);
        });
    }

    NodeId matmul(NodeId a, NodeId b) {
        Mat out = ssusi::matmul(value(a), value(b));
        return push(std::move(out), nullptr, [this, a, b](NodeId id) {
            const Mat& g = nodes_[id].grad;
            add_inplace(nodes_[a].grad, ssusi::matmul_nt(g, nodes_[b].value));
            add_inplace(nodes_[b].grad, matmul_tn(nodes_[a].value, g));
        });
    }

    // A * B^T; used for frame-by-frame dot products between embeddings
    NodeId matmul_nt(NodeId a, NodeId b) {
        Mat out = ssusi::matmul_nt(value(a), value(b));
        return push(std::move(out), nullptr, [this, a, b](NodeId id) {
            const Mat& g = nodes_[id].grad;
            add_inplace(nodes_[a].grad, ssusi::matmul(g, nodes_[b].value));
            add_inplace(nodes_[b].grad, matmul_tn(g, nodes_[a].value));
        });
    }

    // a: T x C, bias: 1 x C broadcast over rows
    NodeId bias_add(NodeId a, NodeId bias) {
        if (value(bias).rows != 1 || value(bias).cols != value(a).cols)
            throw std::invalid_argument("bias_add: bias must be 1 x cols");
        Mat out = value(a);
        for (int t = 0; t < out.rows; ++t)
            for (int c = 0; c < out.cols; ++c) out(t, c) += value(bias)(0, c);
        return push(std::move(out), nullptr, [this, a, bias](NodeId id) {
            const Mat& g = nodes_[id].grad;
            add_inplace(nodes_[a].grad, g);
            for (int t = 0; t < g.rows; ++t)
                for (int c = 0; c < g.cols; ++c) nodes_[bias].grad(0, c) += g(t, c);
        });
    }

    NodeId sigmoid(NodeId a) {
        Mat out = value(a);
        for (auto& v : out.a) v = 1.0 / (1.0 + std::exp(-v));
        return push(std::move(out), nullptr, [this, a](NodeId id) {
            const Mat& y = nodes_[id].value;
            const Mat& g = nodes_[id].grad;
            for (size_t i = 0; i < g.size(); ++i)
                nodes_[a].grad.a[i] += g.a[i] * y.a[i] * (1.0 - y.a[i]);
        });
    }

    NodeId tanh(NodeId a) {
        Mat out = value(a);
        for (auto& v : out.a) v = std::tanh(v);
        return push(std::move(out), nullptr, [this, a](NodeId id) {
            const Mat& y = nodes_[id].value;
            const Mat& g = nodes_[id].grad;
            for (size_t i = 0; i < g.size(); ++i)
                nodes_[a].grad.a[i] += g.a[i] * (1.0 - y.a[i] * y.a[i]);
        });
    }

    // row-wise softmax, numerically shifted by the row max
    NodeId softmax_rows(NodeId a) {
        Mat out = value(a);
        for (int t = 0; t < out.rows; ++t) {
            double mx = out(t, 0);
            for (int c = 1; c < out.cols; ++c) mx = std::max(mx, out(t, c));
            double sum = 0.0;
            for (int c = 0; c < out.cols; ++c) {
                out(t, c) = std::exp(out(t, c) - mx);
                sum += out(t, c);
            }
            for (int c = 0; c < out.cols; ++c) out(t, c) /= sum;
        }
        return push(std::move(out), nullptr, [this, a](NodeId id) {
            const Mat& y = nodes_[id].value;
            const Mat& g = nodes_[id].grad;
            for (int t = 0; t < y.rows; ++t) {
                double dot = 0.0;
                for (int c = 0; c < y.cols; ++c) dot += g(t, c) * y(t, c);
                for (int c = 0; c < y.cols; ++c)
                    nodes_[a].grad(t, c) += y(t, c) * (g(t, c) - dot);
            }
        });
    }

    NodeId concat_cols(const std::vector<NodeId>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
        const int rows = value(parts[0]).rows;
        int cols = 0;
        for (NodeId p : parts) {
            if (value(p).rows != rows) throw std::invalid_argument("concat_cols: row mismatch");
            cols += value(p).cols;
        }
        Mat out(rows, cols);
        int off = 0;
        for (NodeId p : parts) {
            const Mat& v = value(p);
            for (int t = 0; t < rows; ++t)
                for (int c = 0; c < v.cols; ++c) out(t, off + c) = v(t, c);
            off += v.cols;
        }
        auto parts_copy = parts;
        return push(std::move(out), nullptr, [this, parts_copy](NodeId id) {
            const Mat& g = nodes_[id].grad;
            int off = 0;
            for (NodeId p : parts_copy) {
                Mat& pg = nodes_[p].grad;
                for (int t = 0; t < g.rows; ++t)
                    for (int c = 0; c < pg.cols; ++c) pg(t, c) += g(t, off + c);
                off += pg.cols;
            }
        });
    }

    NodeId slice_cols(NodeId a, int c0, int c1) {
        const Mat& v = value(a);
        if (c0 < 0 || c1 > v.cols || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
        Mat out(v.rows, c1 - c0);
        for (int t = 0; t < v.rows; ++t)
            for (int c = c0; c < c1; ++c) out(t, c - c0) = v(t, c);
        return push(std::move(out), nullptr, [this, a, c0](NodeId id) {
            const Mat& g = nodes_[id].grad;
            for (int t = 0; t < g.rows; ++t)
                for (int c = 0; c < g.cols; ++c) nodes_[a].grad(t, c0 + c) += g(t, c);
        });
    }

    NodeId log_shift(NodeId a, double eps) {  // ln(x + eps)
        Mat out = value(a);
        for (auto& v : out.a) v = std::log(v + eps);
        return push(std::move(out), nullptr, [this, a, eps](NodeId id) {
            const Mat& g = nodes_[id].grad;
            for (size_t i = 0; i < g.size(); ++i)
                nodes_[a].grad.a[i] += g.a[i] / (nodes_[a].value.a[i] + eps);
        });
    }

    // per-column affine y = (x - shift_c) * scale_c; used for feature normalization
    NodeId normalize_cols(NodeId a, const std::vector<double>& shift,
                          const std::vector<double>& inv_scale) {
        const Mat& v = value(a);
        if (static_cast<int>(shift.size()) != v.cols)
            throw std::invalid_argument("normalize_cols: shape mismatch");
        Mat out = v;
        for (int t = 0; t < out.rows; ++t)
            for (int c = 0; c < out.cols; ++c) out(t, c) = (out(t, c) - shift[c]) * inv_scale[c];
        return push(std::move(out), nullptr, [this, a, inv_scale](NodeId id) {
            const Mat& g = nodes_[id].grad;
            for (int t = 0; t < g.rows; ++t)
                for (int c = 0; c < g.cols; ++c) nodes_[a].grad(t, c) += g(t, c) * inv_scale[c];
        });
    }

    NodeId sum_sq(NodeId a) {  // 1x1, ||A||_F^2
        Mat out(1, 1);
        out(0, 0) = frob_sq(value(a));
        return push(std::move(out), nullptr, [this, a](NodeId id) {
            const double g = nodes_[id].grad(0, 0);
            for (size_t i = 0; i < nodes_[a].value.size(); ++i)
                nodes_[a].grad.a[i] += 2.0 * g * nodes_[a].value.a[i];
        });
    }

    NodeId add_scalars(NodeId a, NodeId b) { return add(a, b); }

    // Per-profile mean of a row-softmax matrix whose columns are the
    // concatenated profile frames: w^p = sum(block_p) / (T_m * T_p).
    NodeId profile_means(NodeId joint, const std::vector<int>& widths) {
        const Mat& v = value(joint);
        const int P = static_cast<int>(widths.size());
        Mat out(1, P);
        int off = 0;
        for (int p = 0; p < P; ++p) {
            double s = 0.0;
            for (int t = 0; t < v.rows; ++t)
                for (int c = 0; c < widths[p]; ++c) s += v(t, off + c);
            out(0, p) = s / (static_cast<double>(v.rows) * widths[p]);
            off += widths[p];
        }
        auto wcopy = widths;
        return push(std::move(out), nullptr, [this, joint, wcopy](NodeId id) {
            const Mat& g = nodes_[id].grad;
            Mat& jg = nodes_[joint].grad;
            int off = 0;
            for (size_t p = 0; p < wcopy.size(); ++p) {
                const double gp = g(0, static_cast<int>(p)) /
                                  (static_cast<double>(jg.rows) * wcopy[p]);
                for (int t = 0; t < jg.rows; ++t)
                    for (int c = 0; c < wcopy[p]; ++c) jg(t, off + c) += gp;
                off += wcopy[p];
            }
        });
    }

    // (1 - w_o1 - w_o2)^2 + sum over the rest of w_k^2
    NodeId selection_loss(NodeId weights, int o1, int o2) {
        const Mat& w = value(weights);
        if (w.rows != 1) throw std::invalid_argument("selection_loss: expected row vector");
        double relevant = w(0, o1) + w(0, o2);
        double loss = (1.0 - relevant) * (1.0 - relevant);
        for (int p = 0; p < w.cols; ++p)
            if (p != o1 && p != o2) loss += w(0, p) * w(0, p);
        Mat out(1, 1);
        out(0, 0) = loss;
        return push(std::move(out), nullptr, [this, weights, o1, o2](NodeId id) {
            const double g = nodes_[id].grad(0, 0);
            const Mat& w = nodes_[weights].value;
            const double relevant = w(0, o1) + w(0, o2);
            for (int p = 0; p < w.cols; ++p) {
                if (p == o1 || p == o2)
                    nodes_[weights].grad(0, p) += g * (-2.0) * (1.0 - relevant);
                else
                    nodes_[weights].grad(0, p) += g * 2.0 * w(0, p);
            }
        });
    }

    // Single-direction GRU with full BPTT. x: T x in; wx: in x 3h; wh: h x 3h;
    // bx, bh: 1 x 3h, gate order [z | r | n]. reverse runs time backwards.
    NodeId gru(NodeId x, NodeId wx, NodeId wh, NodeId bx, NodeId bh, bool reverse) {
        const Mat& X = value(x);
        const Mat& Wx = value(wx);
        const Mat& Wh = value(wh);
        const int T = X.rows;
        const int h = Wh.rows;
        if (Wx.cols != 3 * h || Wh.cols != 3 * h)
            throw std::invalid_argument("gru: weight shape mismatch");
        if (Wx.rows != X.cols) throw std::invalid_argument("gru: input dim mismatch");

        auto st = std::make_shared<GruState>();
        st->z = Mat(T, h);
        st->r = Mat(T, h);
        st->n = Mat(T, h);
        st->ah = Mat(T, h);
        st->hprev = Mat(T, h);  // state entering each step

        // all input projections at once
        Mat xp = ssusi::matmul(X, Wx);
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < 3 * h; ++c) xp(t, c) += value(bx)(0, c);

        Mat out(T, h);
        std::vector<double> hp(h, 0.0), hproj(3 * h);
        const Mat& Bh = value(bh);
        for (int step = 0; step < T; ++step) {
            const int t = reverse ? T - 1 - step : step;
            for (int c = 0; c < 3 * h; ++c) hproj[c] = Bh(0, c);
            for (int k = 0; k < h; ++k) {
                const double hk = hp[k];
                if (hk == 0.0) continue;
                const double* whk = Wh.row(k);
                for (int c = 0; c < 3 * h; ++c) hproj[c] += hk * whk[c];
            }
            for (int k = 0; k < h; ++k) {
                st->hprev(t, k) = hp[k];
                const double z = 1.0 / (1.0 + std::exp(-(xp(t, k) + hproj[k])));
                const double r = 1.0 / (1.0 + std::exp(-(xp(t, h + k) + hproj[h + k])));
                const double ah = hproj[2 * h + k];
                const double n = std::tanh(xp(t, 2 * h + k) + r * ah);
                st->z(t, k) = z;
                st->r(t, k) = r;
                st->ah(t, k) = ah;
                st->n(t, k) = n;
                hp[k] = (1.0 - z) * n + z * hp[k];
                out(t, k) = hp[k];
            }
        }

        return push(std::move(out), nullptr, [this, x, wx, wh, bx, bh, reverse, st](NodeId id) {
            gru_backward(id, x, wx, wh, bx, bh, reverse, *st);
        });
    }

    // Seeds d(loss)/d(loss) = 1 and runs the tape in reverse; parameter leaves
    // accumulate into their Tensor::grad buffers.
    void backward(NodeId loss) {
        if (nodes_[loss].value.rows != 1 || nodes_[loss].value.cols != 1)
            throw std::invalid_argument("backward: loss must be 1x1");
        nodes_[loss].grad(0, 0) = 1.0;
        for (int i = loss; i >= 0; --i) {
            if (nodes_[i].back) nodes_[i].back(i);
            if (nodes_[i].param && nodes_[i].param->requires_grad)
                add_inplace(nodes_[i].param->grad, nodes_[i].grad);
        }
    }

private:
    struct GruState {
        Mat z, r, n, ah, hprev;
    };

    struct Node {
        Mat value;
        Mat grad;
        std::function<void(NodeId)> back;
        Tensor* param = nullptr;
    };

    NodeId push(Mat value, Tensor* param, std::function<void(NodeId)> back) {
        Node n;
        n.grad = Mat(value.rows, value.cols);
        n.value = std::move(value);
        n.back = std::move(back);
        n.param = param;
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    void gru_backward(NodeId id, NodeId x, NodeId wx, NodeId wh, NodeId bx, NodeId bh,
                      bool reverse, const GruState& st) {
        const Mat& X = nodes_[x].value;
        const Mat& Wx = nodes_[wx].value;
        const Mat& Wh = nodes_[wh].value;
        const Mat& dOut = nodes_[id].grad;
        const int T = X.rows;
        const int h = Wh.rows;

        Mat dxp(T, 3 * h);  // grads of the input projections (z, r, an slots)
        std::vector<double> carry(h, 0.0);
        Mat& dWh = nodes_[wh].grad;
        Mat& dBh = nodes_[bh].grad;

        for (int step = T - 1; step >= 0; --step) {
            const int t = reverse ? T - 1 - step : step;
            for (int k = 0; k < h; ++k) {
                const double dh = dOut(t, k) + carry[k];
                const double z = st.z(t, k), r = st.r(t, k), n = st.n(t, k);
                const double ah = st.ah(t, k), hp = st.hprev(t, k);
                const double dz = dh * (hp - n) * z * (1.0 - z);
                const double dn = dh * (1.0 - z);
                const double dan = dn * (1.0 - n * n);
                const double dr = dan * ah * r * (1.0 - r);
                const double dah = dan * r;
                dxp(t, k) = dz;
                dxp(t, h + k) = dr;
                dxp(t, 2 * h + k) = dan;
                dBh(0, k) += dz;
                dBh(0, h + k) += dr;
                dBh(0, 2 * h + k) += dah;
                carry[k] = dh * z;  // direct path to h_{t-1}; matrix paths below
            }
            // dWh += hprev^T [dz|dr|dah]; carry += [dz|dr|dah] Wh^T
            for (int k = 0; k < h; ++k) {
                const double hp = st.hprev(t, k);
                double* dwhk = dWh.row(k);
                const double* whk = Wh.row(k);
                double acc = 0.0;
                for (int c = 0; c < h; ++c) {
                    const double dz = dxp(t, c);
                    const double dr = dxp(t, h + c);
                    const double z2 = st.z(t, c), r2 = st.r(t, c), n2 = st.n(t, c);
                    (void)z2; (void)r2; (void)n2;
                    const double dah = dxp(t, 2 * h + c) * st.r(t, c);
                    dwhk[c] += hp * dz;
                    dwhk[h + c] += hp * dr;
                    dwhk[2 * h + c] += hp * dah;
                    acc += dz * whk[c] + dr * whk[h + c] + dah * whk[2 * h + c];
                }
                carry[k] += acc;
            }
        }

        // dX = dxp' Wx^T with the n-slot carrying dan; dWx += X^T dxp'; dbx += colsum
        // dxp already stores [dz | dr | dan], which is exactly the gradient of
        // the x-side projections.
        add_inplace(nodes_[x].grad, ssusi::matmul_nt(dxp, Wx));
        add_inplace(nodes_[wx].grad, matmul_tn(X, dxp));
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < 3 * h; ++c) nodes_[bx].grad(0, c) += dxp(t, c);
    }

    std::vector<Node> nodes_;
};

}  // namespace ssusi::nnet
