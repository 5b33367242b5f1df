#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <unordered_map>
#include <vector>

#include "hmtl/error.hpp"
#include "hmtl/matrix.hpp"
#include "hmtl/random.hpp"

namespace hmtl {

/// Handle to a value recorded in a Graph.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

/// Shape of one padded batch of sequences, used by the fused attention op.
struct SequenceLayout {
    std::size_t batch = 0;
    std::size_t seq_len = 0;
    std::vector<std::size_t> lengths;  // real (unmasked) tokens per sequence; mask is a prefix
};

/// Reverse-mode automatic differentiation over matrices.
///
/// Parameters are referenced, not copied: `param(m)` records a leaf that reads
/// `m` directly and accumulates its gradient inside the graph, so models stay
/// const during a forward pass. A graph built with `record = false` skips the
/// backward closures and can only be used for inference.
class Graph {
public:
    explicit Graph(bool record = true) : record_(record) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool recording() const { return record_; }

    const Matrix& value(Var v) const {
        const Node& n = nodes_[v.id];
        return n.ref != nullptr ? *n.ref : n.value;
    }

    /// Gradient of the last backward() target with respect to `v`; allocated on first use.
    Matrix& grad(Var v) {
        Node& n = nodes_[v.id];
        if (n.grad.empty()) {
            const Matrix& val = value(v);
            n.grad = Matrix(val.rows, val.cols);
        }
        return n.grad;
    }

    /// Gradient accumulated for a parameter matrix, or nullptr if it never entered the graph.
    const Matrix* param_grad(const Matrix& param) const {
        auto it = params_.find(&param);
        if (it == params_.end()) return nullptr;
        const Node& n = nodes_[it->second];
        return n.grad.empty() ? nullptr : &n.grad;
    }

    double scalar(Var v) const { return value(v).data.at(0); }

    // ---- leaves -------------------------------------------------------------

    Var constant(Matrix m) { return push(std::move(m), false); }

    Var param(const Matrix& m) {
        auto [it, inserted] = params_.try_emplace(&m, nodes_.size());
        if (!inserted) return Var{it->second};
        Node n;
        n.ref = &m;
        n.needs_grad = record_;
        nodes_.push_back(std::move(n));
        return Var{it->second};
    }

    // ---- backward -----------------------------------------------------------

    void backward(Var loss) {
        if (!record_) throw Error("backward() on a graph built without recording");
        const Matrix& lv = value(loss);
        if (lv.size() != 1) throw Error("backward() needs a scalar loss");
        grad(loss).data[0] += 1.0;
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.backward && !n.grad.empty()) n.backward(*this);
        }
    }

    // ---- linear algebra -----------------------------------------------------

    Var matmul(Var a, Var b) {
        const Matrix& av = value(a);
        const Matrix& bv = value(b);
        if (av.cols != bv.rows) throw Error("matmul: inner dimensions differ");
        Matrix out(av.rows, bv.cols);
        view(out).noalias() = view(av) * view(bv);
        Var r = push(std::move(out), needs(a) || needs(b));
        on_backward(r, [a, b, r](Graph& g) {
            const Matrix& go = g.grad(r);
            if (g.needs(a)) view(g.grad(a)).noalias() += view(go) * view(g.value(b)).transpose();
            if (g.needs(b)) view(g.grad(b)).noalias() += view(g.value(a)).transpose() * view(go);
        });
        return r;
    }

    Var add(Var a, Var b) {
        const Matrix& av = value(a);
        const Matrix& bv = value(b);
        if (!av.same_shape(bv)) throw Error("add: shape mismatch");
        Matrix out = av;
        view(out) += view(bv);
        Var r = push(std::move(out), needs(a) || needs(b));
        on_backward(r, [a, b, r](Graph& g) {
            if (g.needs(a)) view(g.grad(a)) += view(g.grad(r));
            if (g.needs(b)) view(g.grad(b)) += view(g.grad(r));
        });
        return r;
    }

    /// a[rows x n] + bias[1 x n] broadcast over rows.
    Var add_bias(Var a, Var bias) {
        const Matrix& av = value(a);
        const Matrix& bv = value(bias);
        if (bv.rows != 1 || bv.cols != av.cols) throw Error("add_bias: bias must be 1 x cols");
        Matrix out = av;
        view(out).rowwise() += view(bv).row(0);
        Var r = push(std::move(out), needs(a) || needs(bias));
        on_backward(r, [a, bias, r](Graph& g) {
            const Matrix& go = g.grad(r);
            if (g.needs(a)) view(g.grad(a)) += view(go);
            if (g.needs(bias)) view(g.grad(bias)).row(0) += view(go).colwise().sum();
        });
        return r;
    }

    Var linear(Var x, Var weight, Var bias) { return add_bias(matmul(x, weight), bias); }

    Var scale(Var a, double s) {
        Matrix out = value(a);
        view(out) *= s;
        Var r = push(std::move(out), needs(a));
        on_backward(r, [a, r, s](Graph& g) {
            if (g.needs(a)) view(g.grad(a)) += s * view(g.grad(r));
        });
        return r;
    }

    Var mul(Var a, Var b) {
        const Matrix& av = value(a);
        const Matrix& bv = value(b);
        if (!av.same_shape(bv)) throw Error("mul: shape mismatch");
        Matrix out(av.rows, av.cols);
        view(out) = view(av).cwiseProduct(view(bv));
        Var r = push(std::move(out), needs(a) || needs(b));
        on_backward(r, [a, b, r](Graph& g) {
            const Matrix& go = g.grad(r);
            if (g.needs(a)) view(g.grad(a)) += view(go).cwiseProduct(view(g.value(b)));
            if (g.needs(b)) view(g.grad(b)) += view(go).cwiseProduct(view(g.value(a)));
        });
        return r;
    }

    /// Per-row blend: out[i] = keep[i] ? fresh[i] : stale[i]. `keep` is not differentiated.
    Var select_where(const std::vector<bool>& keep, Var fresh, Var stale) {
        const Matrix& fv = value(fresh);
        const Matrix& sv = value(stale);
        if (!fv.same_shape(sv) || keep.size() != fv.rows) throw Error("select_where: shape mismatch");
        Matrix out = sv;
        for (std::size_t i = 0; i < fv.rows; ++i) {
            if (keep[i]) std::copy(fv.row(i).begin(), fv.row(i).end(), out.row(i).begin());
        }
        Var r = push(std::move(out), needs(fresh) || needs(stale));
        on_backward(r, [fresh, stale, r, mask = keep](Graph& g) {
            const Matrix& go = g.grad(r);
            for (std::size_t i = 0; i < go.rows; ++i) {
                Var target = mask[i] ? fresh : stale;
                if (!g.needs(target)) continue;
                auto dst = g.grad(target).row(i);
                auto src = go.row(i);
                for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
            }
        });
        return r;
    }

    // ---- indexing -----------------------------------------------------------

    /// Rows of `table` picked by `ids` (embedding lookup or row selection).
    Var gather_rows(Var table, std::vector<std::size_t> ids) {
        const Matrix& tv = value(table);
        Matrix out(ids.size(), tv.cols);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] >= tv.rows) throw Error("gather_rows: index out of range");
            std::copy(tv.row(ids[i]).begin(), tv.row(ids[i]).end(), out.row(i).begin());
        }
        Var r = push(std::move(out), needs(table));
        on_backward(r, [table, r, ids = std::move(ids)](Graph& g) {
            if (!g.needs(table)) return;
            const Matrix& go = g.grad(r);
            Matrix& gt = g.grad(table);
            for (std::size_t i = 0; i < ids.size(); ++i) {
                auto dst = gt.row(ids[i]);
                auto src = go.row(i);
                for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
            }
        });
        return r;
    }

    Var slice_cols(Var a, std::size_t begin, std::size_t count) {
        const Matrix& av = value(a);
        if (begin + count > av.cols) throw Error("slice_cols: out of range");
        Matrix out(av.rows, count);
        view(out) = view(av).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
        Var r = push(std::move(out), needs(a));
        on_backward(r, [a, r, begin, count](Graph& g) {
            if (!g.needs(a)) return;
            view(g.grad(a)).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)) +=
                view(g.grad(r));
        });
        return r;
    }

    // ---- elementwise nonlinearities ------------------------------------------

    Var sigmoid(Var a) {
        Matrix out = value(a);
        for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
        Var r = push(std::move(out), needs(a));
        on_backward(r, [a, r](Graph& g) {
            if (!g.needs(a)) return;
            const Matrix& y = g.value(r);
            view(g.grad(a)) += view(g.grad(r)).cwiseProduct(view(y).cwiseProduct((1.0 - view(y).array()).matrix()));
        });
        return r;
    }

    Var tanh(Var a) {
        Matrix out = value(a);
        for (double& v : out.data) v = std::tanh(v);
        Var r = push(std::move(out), needs(a));
        on_backward(r, [a, r](Graph& g) {
            if (!g.needs(a)) return;
            const Matrix& y = g.value(r);
            view(g.grad(a)).array() += view(g.grad(r)).array() * (1.0 - view(y).array().square());
        });
        return r;
    }

    /// Tanh approximation of GELU, as used by BERT.
    Var gelu(Var a) {
        constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
        constexpr double k = 0.044715;
        Matrix out = value(a);
        for (double& v : out.data) v = 0.5 * v * (1.0 + std::tanh(c * (v + k * v * v * v)));
        Var r = push(std::move(out), needs(a));
        on_backward(r, [a, r](Graph& g) {
            if (!g.needs(a)) return;
            const Matrix& x = g.value(a);
            const Matrix& go = g.grad(r);
            Matrix& ga = g.grad(a);
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double v = x.data[i];
                const double t = std::tanh(c * (v + k * v * v * v));
                const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * k * v * v);
                ga.data[i] += go.data[i] * d;
            }
        });
        return r;
    }

    /// Inverted dropout. Identity when rate == 0 or rng == nullptr (evaluation mode).
    Var dropout(Var a, double rate, Rng* rng) {
        if (rng == nullptr || rate <= 0.0) return a;
        const Matrix& av = value(a);
        Matrix keep(av.rows, av.cols);
        const double s = 1.0 / (1.0 - rate);
        for (double& k : keep.data) k = rng->bernoulli(rate) ? 0.0 : s;
        Matrix out(av.rows, av.cols);
        view(out) = view(av).cwiseProduct(view(keep));
        Var r = push(std::move(out), needs(a));
        on_backward(r, [a, r, keep = std::move(keep)](Graph& g) {
            if (g.needs(a)) view(g.grad(a)) += view(g.grad(r)).cwiseProduct(view(keep));
        });
        return r;
    }

    // ---- normalization ------------------------------------------------------

    /// Row-wise layer normalization with learned gain [1 x n] and shift [1 x n].
    Var layer_norm(Var x, Var gain, Var shift, double eps = 1e-5) {
        const Matrix& xv = value(x);
        const Matrix& gv = value(gain);
        const Matrix& sv = value(shift);
        const std::size_t n = xv.cols;
        Matrix normed(xv.rows, n);
        std::vector<double> inv_std(xv.rows);
        Matrix out(xv.rows, n);
        for (std::size_t i = 0; i < xv.rows; ++i) {
            auto row = xv.row(i);
            double mean = 0.0;
            for (double v : row) mean += v;
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (double v : row) var += (v - mean) * (v - mean);
            var /= static_cast<double>(n);
            inv_std[i] = 1.0 / std::sqrt(var + eps);
            for (std::size_t j = 0; j < n; ++j) {
                normed(i, j) = (row[j] - mean) * inv_std[i];
                out(i, j) = normed(i, j) * gv.data[j] + sv.data[j];
            }
        }
        Var r = push(std::move(out), needs(x) || needs(gain) || needs(shift));
        on_backward(r, [x, gain, shift, r, normed = std::move(normed), inv_std = std::move(inv_std)](Graph& g) {
            const Matrix& go = g.grad(r);
            const Matrix& gv = g.value(gain);
            const std::size_t n = go.cols;
            if (g.needs(gain) || g.needs(shift)) {
                for (std::size_t i = 0; i < go.rows; ++i) {
                    for (std::size_t j = 0; j < n; ++j) {
                        if (g.needs(gain)) g.grad(gain).data[j] += go(i, j) * normed(i, j);
                        if (g.needs(shift)) g.grad(shift).data[j] += go(i, j);
                    }
                }
            }
            if (!g.needs(x)) return;
            Matrix& gx = g.grad(x);
            std::vector<double> dn(n);
            for (std::size_t i = 0; i < go.rows; ++i) {
                double mean_dn = 0.0;
                double mean_dn_x = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    dn[j] = go(i, j) * gv.data[j];
                    mean_dn += dn[j];
                    mean_dn_x += dn[j] * normed(i, j);
                }
                mean_dn /= static_cast<double>(n);
                mean_dn_x /= static_cast<double>(n);
                for (std::size_t j = 0; j < n; ++j) {
                    gx(i, j) += inv_std[i] * (dn[j] - mean_dn - normed(i, j) * mean_dn_x);
                }
            }
        });
        return r;
    }

    // ---- attention ----------------------------------------------------------

    /// Multi-head scaled dot-product self-attention over a padded batch.
    ///
    /// `q`, `k`, `v` are [batch * seq_len x d_model] with heads laid out as
    /// contiguous column blocks. Keys at positions >= lengths[b] receive zero
    /// weight; query rows at padded positions still attend to the real keys so
    /// their outputs are defined.
    Var attention(Var q, Var k, Var v, const SequenceLayout& layout, std::size_t heads) {
        const Matrix& qv = value(q);
        const Matrix& kv = value(k);
        const Matrix& vv = value(v);
        const std::size_t width = qv.cols;
        const std::size_t dh = width / heads;
        const std::size_t L = layout.seq_len;
        if (qv.rows != layout.batch * L || !qv.same_shape(kv) || !qv.same_shape(vv) || dh * heads != width) {
            throw Error("attention: shape mismatch");
        }
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

        // weights[b][h] is an L x len matrix of attention probabilities
        std::vector<Matrix> weights(layout.batch * heads);
        Matrix out(qv.rows, width);
        for (std::size_t b = 0; b < layout.batch; ++b) {
            const std::size_t len = layout.lengths[b];
            for (std::size_t h = 0; h < heads; ++h) {
                Matrix p(L, len);
                const std::size_t c0 = h * dh;
                for (std::size_t i = 0; i < L; ++i) {
                    const std::size_t qi = b * L + i;
                    double mx = -std::numeric_limits<double>::infinity();
                    for (std::size_t j = 0; j < len; ++j) {
                        const std::size_t kj = b * L + j;
                        double s = 0.0;
                        for (std::size_t c = 0; c < dh; ++c) s += qv(qi, c0 + c) * kv(kj, c0 + c);
                        p(i, j) = s * inv_sqrt;
                        mx = std::max(mx, p(i, j));
                    }
                    double z = 0.0;
                    for (std::size_t j = 0; j < len; ++j) {
                        p(i, j) = std::exp(p(i, j) - mx);
                        z += p(i, j);
                    }
                    for (std::size_t j = 0; j < len; ++j) {
                        p(i, j) /= z;
                        const std::size_t vj = b * L + j;
                        for (std::size_t c = 0; c < dh; ++c) out(qi, c0 + c) += p(i, j) * vv(vj, c0 + c);
                    }
                }
                weights[b * heads + h] = std::move(p);
            }
        }
        Var r = push(std::move(out), needs(q) || needs(k) || needs(v));
        on_backward(r, [q, k, v, r, layout, heads, dh, inv_sqrt, weights = std::move(weights)](Graph& g) {
            const Matrix& go = g.grad(r);
            const Matrix& qv = g.value(q);
            const Matrix& kv = g.value(k);
            const Matrix& vv = g.value(v);
            Matrix* gq = g.needs(q) ? &g.grad(q) : nullptr;
            Matrix* gk = g.needs(k) ? &g.grad(k) : nullptr;
            Matrix* gv = g.needs(v) ? &g.grad(v) : nullptr;
            const std::size_t L = layout.seq_len;
            std::vector<double> dp;
            for (std::size_t b = 0; b < layout.batch; ++b) {
                const std::size_t len = layout.lengths[b];
                dp.resize(len);
                for (std::size_t h = 0; h < heads; ++h) {
                    const Matrix& p = weights[b * heads + h];
                    const std::size_t c0 = h * dh;
                    for (std::size_t i = 0; i < L; ++i) {
                        const std::size_t qi = b * L + i;
                        double dot = 0.0;
                        for (std::size_t j = 0; j < len; ++j) {
                            const std::size_t vj = b * L + j;
                            double s = 0.0;
                            for (std::size_t c = 0; c < dh; ++c) {
                                s += go(qi, c0 + c) * vv(vj, c0 + c);
                                if (gv != nullptr) (*gv)(vj, c0 + c) += p(i, j) * go(qi, c0 + c);
                            }
                            dp[j] = s;
                            dot += p(i, j) * s;
                        }
                        for (std::size_t j = 0; j < len; ++j) {
                            const double ds = p(i, j) * (dp[j] - dot) * inv_sqrt;
                            const std::size_t kj = b * L + j;
                            for (std::size_t c = 0; c < dh; ++c) {
                                if (gq != nullptr) (*gq)(qi, c0 + c) += ds * kv(kj, c0 + c);
                                if (gk != nullptr) (*gk)(kj, c0 + c) += ds * qv(qi, c0 + c);
                            }
                        }
                    }
                }
            }
        });
        return r;
    }

    // ---- losses -------------------------------------------------------------

    /// Weighted mean softmax cross-entropy. Rows with weight 0 do not
    /// contribute; the result is sum(w_i * ce_i) / sum(w_i), or 0 when no row
    /// contributes.
    Var softmax_cross_entropy(Var logits, std::vector<std::size_t> targets, std::vector<double> weights) {
        const Matrix& lv = value(logits);
        if (targets.size() != lv.rows || weights.size() != lv.rows) throw Error("cross entropy: size mismatch");
        double total_weight = 0.0;
        for (double w : weights) total_weight += w;
        Matrix probs(lv.rows, lv.cols);
        double loss = 0.0;
        for (std::size_t i = 0; i < lv.rows; ++i) {
            if (targets[i] >= lv.cols) throw Error("cross entropy: target out of range");
            auto row = lv.row(i);
            const double mx = *std::max_element(row.begin(), row.end());
            double z = 0.0;
            for (std::size_t j = 0; j < lv.cols; ++j) z += std::exp(row[j] - mx);
            const double log_z = mx + std::log(z);
            for (std::size_t j = 0; j < lv.cols; ++j) probs(i, j) = std::exp(row[j] - log_z);
            if (weights[i] != 0.0) loss += weights[i] * (log_z - row[targets[i]]);
        }
        const double norm = total_weight > 0.0 ? 1.0 / total_weight : 0.0;
        Var r = push(Matrix(1, 1, loss * norm), needs(logits));
        on_backward(r, [logits, r, norm, probs = std::move(probs), targets = std::move(targets),
                        weights = std::move(weights)](Graph& g) {
            if (!g.needs(logits)) return;
            const double go = g.grad(r).data[0];
            Matrix& gl = g.grad(logits);
            for (std::size_t i = 0; i < probs.rows; ++i) {
                if (weights[i] == 0.0) continue;
                const double f = go * weights[i] * norm;
                for (std::size_t j = 0; j < probs.cols; ++j) {
                    gl(i, j) += f * (probs(i, j) - (j == targets[i] ? 1.0 : 0.0));
                }
            }
        });
        return r;
    }

    /// Mean squared error between a [n x 1] prediction column and targets.
    Var mean_squared_error(Var pred, std::vector<double> targets) {
        const Matrix& pv = value(pred);
        if (pv.cols != 1 || pv.rows != targets.size() || targets.empty()) throw Error("mse: size mismatch");
        double loss = 0.0;
        for (std::size_t i = 0; i < pv.rows; ++i) loss += (pv.data[i] - targets[i]) * (pv.data[i] - targets[i]);
        const double n = static_cast<double>(pv.rows);
        Var r = push(Matrix(1, 1, loss / n), needs(pred));
        on_backward(r, [pred, r, n, targets = std::move(targets)](Graph& g) {
            if (!g.needs(pred)) return;
            const double go = g.grad(r).data[0];
            const Matrix& pv = g.value(pred);
            Matrix& gp = g.grad(pred);
            for (std::size_t i = 0; i < pv.rows; ++i) gp.data[i] += go * 2.0 * (pv.data[i] - targets[i]) / n;
        });
        return r;
    }

    /// sum_i coefficients[i] * terms[i] over 1x1 values.
    Var weighted_sum(std::span<const Var> terms, std::span<const double> coefficients) {
        if (terms.size() != coefficients.size()) throw Error("weighted_sum: size mismatch");
        double total = 0.0;
        bool any = false;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            total += coefficients[i] * scalar(terms[i]);
            any = any || needs(terms[i]);
        }
        Var r = push(Matrix(1, 1, total), any);
        on_backward(r, [r, ts = std::vector<Var>(terms.begin(), terms.end()),
                        cs = std::vector<double>(coefficients.begin(), coefficients.end())](Graph& g) {
            const double go = g.grad(r).data[0];
            for (std::size_t i = 0; i < ts.size(); ++i) {
                if (g.needs(ts[i]) && cs[i] != 0.0) g.grad(ts[i]).data[0] += go * cs[i];
            }
        });
        return r;
    }

    bool needs(Var v) const { return nodes_[v.id].needs_grad; }

private:
    struct Node {
        Matrix value;
        const Matrix* ref = nullptr;
        Matrix grad;
        bool needs_grad = false;
        std::function<void(Graph&)> backward;
    };

    Var push(Matrix value, bool needs_grad) {
        Node n;
        n.value = std::move(value);
        n.needs_grad = record_ && needs_grad;
        nodes_.push_back(std::move(n));
        return Var{nodes_.size() - 1};
    }

    template <class F>
    void on_backward(Var r, F&& f) {
        if (nodes_[r.id].needs_grad) nodes_[r.id].backward = std::forward<F>(f);
    }

    bool record_;
    std::deque<Node> nodes_;  // stable references while the graph grows
    std::unordered_map<const Matrix*, std::size_t> params_;
};

}  // namespace hmtl
