#ifndef CAUSALNL_GRAPH_HPP
#define CAUSALNL_GRAPH_HPP

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "causalnl/matrix.hpp"

namespace causalnl {

/// A learnable tensor. Gradients accumulate across backward passes until the
/// optimizer (or caller) zeroes them.
struct Parameter {
    Mat value;
    Mat grad;

    Parameter() = default;
    explicit Parameter(Mat v) : value(std::move(v)), grad(value.rows, value.cols) {}

    void zero_grad() { std::fill(grad.d.begin(), grad.d.end(), 0.0); }
};

namespace ad {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over matrix-valued nodes. Built once per training step,
/// then discarded. Supports repeated backward() calls on the same graph
/// (node gradients reset per call; parameter gradients accumulate).
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Non-differentiable input (data batches, noise draws, fixed matrices).
    Var constant(Mat v) {
        nodes_.push_back(Node{});
        nodes_.back().val = std::move(v);
        nodes_.back().is_const = true;
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    Var leaf(Parameter& p) {
        nodes_.push_back(Node{});
        nodes_.back().ext = &p.value;
        nodes_.back().par = &p;
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    const Mat& val(Var v) const {
        const Node& n = nodes_[v.id];
        return n.ext ? *n.ext : n.val;
    }

    double scalar(Var v) const {
        const Mat& m = val(v);
        assert(m.rows == 1 && m.cols == 1);
        return m.d[0];
    }

    /// Runs reverse-mode accumulation from a 1x1 root. Parameter gradients
    /// are added to Parameter::grad; node gradients are scoped to this call.
    void backward(Var root) {
        const Mat& rv = val(root);
        if (rv.rows != 1 || rv.cols != 1)
            throw std::invalid_argument("backward: root must be a 1x1 scalar");
        for (Node& n : nodes_) n.grad.d.clear();
        grad(root.id) = Mat(1, 1, {1.0});
        for (int id = root.id; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.grad.d.empty()) continue;
            if (n.back) n.back();
            if (n.par) emap(n.par->grad) += emap(n.grad);
        }
    }

    std::size_t size() const { return nodes_.size(); }

    // --- element-wise and linear-algebra ops -------------------------------

    Var matmul(Var a, Var b) {
        const Mat &A = val(a), &B = val(b);
        if (A.cols != B.rows) throw std::invalid_argument("matmul: inner dimension mismatch");
        Mat out(A.rows, B.cols);
        emap(out).noalias() = emap(A) * emap(B);
        return make(std::move(out), [this, a, b](Var self) {
            const Mat& G = grad_c(self.id);
            if (tracked(a)) emap(grad(a.id)).noalias() += emap(G) * emap(val(b)).transpose();
            if (tracked(b)) emap(grad(b.id)).noalias() += emap(val(a)).transpose() * emap(G);
        });
    }

    /// A * B with B a constant matrix (no node).
    Var matmul_const(Var a, Mat b) {
        const Mat& A = val(a);
        if (A.cols != b.rows) throw std::invalid_argument("matmul_const: inner dimension mismatch");
        Mat out(A.rows, b.cols);
        emap(out).noalias() = emap(A) * emap(b);
        auto bk = std::make_shared<Mat>(std::move(b));
        return make(std::move(out), [this, a, bk](Var self) {
            if (tracked(a)) emap(grad(a.id)).noalias() += emap(grad_c(self.id)) * emap(*bk).transpose();
        });
    }

    Var add(Var a, Var b) {
        const Mat &A = val(a), &B = val(b);
        if (!A.same_shape(B)) throw std::invalid_argument("add: shape mismatch");
        Mat out = A;
        emap(out) += emap(B);
        return make(std::move(out), [this, a, b](Var self) {
            const Mat& G = grad_c(self.id);
            if (tracked(a)) emap(grad(a.id)) += emap(G);
            if (tracked(b)) emap(grad(b.id)) += emap(G);
        });
    }

    Var sub(Var a, Var b) {
        const Mat &A = val(a), &B = val(b);
        if (!A.same_shape(B)) throw std::invalid_argument("sub: shape mismatch");
        Mat out = A;
        emap(out) -= emap(B);
        return make(std::move(out), [this, a, b](Var self) {
            const Mat& G = grad_c(self.id);
            if (tracked(a)) emap(grad(a.id)) += emap(G);
            if (tracked(b)) emap(grad(b.id)) -= emap(G);
        });
    }

    Var hadamard(Var a, Var b) {
        const Mat &A = val(a), &B = val(b);
        if (!A.same_shape(B)) throw std::invalid_argument("hadamard: shape mismatch");
        Mat out = A;
        emap(out).array() *= emap(B).array();
        return make(std::move(out), [this, a, b](Var self) {
            const Mat& G = grad_c(self.id);
            if (tracked(a)) emap(grad(a.id)).array() += emap(G).array() * emap(val(b)).array();
            if (tracked(b)) emap(grad(b.id)).array() += emap(G).array() * emap(val(a)).array();
        });
    }

    /// Element-wise product with a constant matrix of identical shape.
    Var hadamard_const(Var a, Mat m) {
        const Mat& A = val(a);
        if (!A.same_shape(m)) throw std::invalid_argument("hadamard_const: shape mismatch");
        Mat out = A;
        emap(out).array() *= emap(m).array();
        auto mk = std::make_shared<Mat>(std::move(m));
        return make(std::move(out), [this, a, mk](Var self) {
            if (tracked(a)) emap(grad(a.id)).array() += emap(grad_c(self.id)).array() * emap(*mk).array();
        });
    }

    /// Broadcast-add a 1xC row vector to every row of A.
    Var add_rowvec(Var a, Var b) {
        const Mat &A = val(a), &B = val(b);
        if (B.rows != 1 || B.cols != A.cols) throw std::invalid_argument("add_rowvec: shape mismatch");
        Mat out = A;
        emap(out).rowwise() += emap(B).row(0);
        return make(std::move(out), [this, a, b](Var self) {
            const Mat& G = grad_c(self.id);
            if (tracked(a)) emap(grad(a.id)) += emap(G);
            if (tracked(b)) emap(grad(b.id)).row(0) += emap(G).colwise().sum();
        });
    }

    /// alpha * A + beta, element-wise.
    Var affine(Var a, double alpha, double beta) {
        Mat out = val(a);
        emap(out).array() = alpha * emap(out).array() + beta;
        return make(std::move(out), [this, a, alpha](Var self) {
            if (tracked(a)) emap(grad(a.id)) += alpha * emap(grad_c(self.id));
        });
    }

    Var relu(Var a) {
        Mat out = val(a);
        for (double& v : out.d) v = v > 0.0 ? v : 0.0;
        return make(std::move(out), [this, a](Var self) {
            if (!tracked(a)) return;
            const Mat& G = grad_c(self.id);
            const Mat& A = val(a);
            Mat& gA = grad(a.id);
            for (std::size_t i = 0; i < A.d.size(); ++i)
                if (A.d[i] > 0.0) gA.d[i] += G.d[i];
        });
    }

    Var sigmoid(Var a) {
        Mat out = val(a);
        for (double& v : out.d) v = 1.0 / (1.0 + std::exp(-v));
        return make(std::move(out), [this, a](Var self) {
            if (!tracked(a)) return;
            const Mat& G = grad_c(self.id);
            const Mat& S = val_of(self.id);
            Mat& gA = grad(a.id);
            for (std::size_t i = 0; i < S.d.size(); ++i)
                gA.d[i] += G.d[i] * S.d[i] * (1.0 - S.d[i]);
        });
    }

    Var exp_(Var a) {
        Mat out = val(a);
        for (double& v : out.d) v = std::exp(v);
        return make(std::move(out), [this, a](Var self) {
            if (!tracked(a)) return;
            const Mat& G = grad_c(self.id);
            const Mat& E = val_of(self.id);
            Mat& gA = grad(a.id);
            for (std::size_t i = 0; i < E.d.size(); ++i) gA.d[i] += G.d[i] * E.d[i];
        });
    }

    Var log_(Var a) {
        Mat out = val(a);
        for (double& v : out.d) v = std::log(v);
        return make(std::move(out), [this, a](Var self) {
            if (!tracked(a)) return;
            const Mat& G = grad_c(self.id);
            const Mat& A = val(a);
            Mat& gA = grad(a.id);
            for (std::size_t i = 0; i < A.d.size(); ++i) gA.d[i] += G.d[i] / A.d[i];
        });
    }

    /// |A| element-wise; subgradient 0 at 0.
    Var abs_(Var a) {
        Mat out = val(a);
        for (double& v : out.d) v = std::fabs(v);
        return make(std::move(out), [this, a](Var self) {
            if (!tracked(a)) return;
            const Mat& G = grad_c(self.id);
            const Mat& A = val(a);
            Mat& gA = grad(a.id);
            for (std::size_t i = 0; i < A.d.size(); ++i) {
                if (A.d[i] > 0.0) gA.d[i] += G.d[i];
                else if (A.d[i] < 0.0) gA.d[i] -= G.d[i];
            }
        });
    }

    Var concat_cols(Var a, Var b) {
        const Mat &A = val(a), &B = val(b);
        if (A.rows != B.rows) throw std::invalid_argument("concat_cols: row count mismatch");
        Mat out(A.rows, A.cols + B.cols);
        for (int r = 0; r < A.rows; ++r) {
            std::copy(A.row_ptr(r), A.row_ptr(r) + A.cols, out.row_ptr(r));
            std::copy(B.row_ptr(r), B.row_ptr(r) + B.cols, out.row_ptr(r) + A.cols);
        }
        const int ac = A.cols, bc = B.cols;
        return make(std::move(out), [this, a, b, ac, bc](Var self) {
            const Mat& G = grad_c(self.id);
            if (tracked(a)) {
                Mat& gA = grad(a.id);
                for (int r = 0; r < gA.rows; ++r)
                    for (int c = 0; c < ac; ++c) gA(r, c) += G(r, c);
            }
            if (tracked(b)) {
                Mat& gB = grad(b.id);
                for (int r = 0; r < gB.rows; ++r)
                    for (int c = 0; c < bc; ++c) gB(r, c) += G(r, ac + c);
            }
        });
    }

    /// Columns [c0, c1) of A.
    Var slice_cols(Var a, int c0, int c1) {
        const Mat& A = val(a);
        if (c0 < 0 || c1 > A.cols || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
        Mat out(A.rows, c1 - c0);
        for (int r = 0; r < A.rows; ++r)
            std::copy(A.row_ptr(r) + c0, A.row_ptr(r) + c1, out.row_ptr(r));
        return make(std::move(out), [this, a, c0, c1](Var self) {
            if (!tracked(a)) return;
            const Mat& G = grad_c(self.id);
            Mat& gA = grad(a.id);
            for (int r = 0; r < G.rows; ++r)
                for (int c = 0; c < c1 - c0; ++c) gA(r, c0 + c) += G(r, c);
        });
    }

    Var row_log_softmax(Var a) {
        const Mat& A = val(a);
        Mat out(A.rows, A.cols);
        for (int r = 0; r < A.rows; ++r) {
            const double* in = A.row_ptr(r);
            double* o = out.row_ptr(r);
            double mx = in[0];
            for (int c = 1; c < A.cols; ++c) mx = std::max(mx, in[c]);
            double s = 0.0;
            for (int c = 0; c < A.cols; ++c) s += std::exp(in[c] - mx);
            const double lse = mx + std::log(s);
            for (int c = 0; c < A.cols; ++c) o[c] = in[c] - lse;
        }
        return make(std::move(out), [this, a](Var self) {
            if (!tracked(a)) return;
            const Mat& G = grad_c(self.id);
            const Mat& L = val_of(self.id);
            Mat& gA = grad(a.id);
            for (int r = 0; r < G.rows; ++r) {
                double gs = 0.0;
                for (int c = 0; c < G.cols; ++c) gs += G(r, c);
                for (int c = 0; c < G.cols; ++c) gA(r, c) += G(r, c) - std::exp(L(r, c)) * gs;
            }
        });
    }

    Var row_softmax(Var a) {
        const Mat& A = val(a);
        Mat out(A.rows, A.cols);
        for (int r = 0; r < A.rows; ++r) {
            const double* in = A.row_ptr(r);
            double* o = out.row_ptr(r);
            double mx = in[0];
            for (int c = 1; c < A.cols; ++c) mx = std::max(mx, in[c]);
            double s = 0.0;
            for (int c = 0; c < A.cols; ++c) {
                o[c] = std::exp(in[c] - mx);
                s += o[c];
            }
            for (int c = 0; c < A.cols; ++c) o[c] /= s;
        }
        return make(std::move(out), [this, a](Var self) {
            if (!tracked(a)) return;
            const Mat& G = grad_c(self.id);
            const Mat& P = val_of(self.id);
            Mat& gA = grad(a.id);
            for (int r = 0; r < G.rows; ++r) {
                double dot = 0.0;
                for (int c = 0; c < G.cols; ++c) dot += G(r, c) * P(r, c);
                for (int c = 0; c < G.cols; ++c) gA(r, c) += P(r, c) * (G(r, c) - dot);
            }
        });
    }

    /// out(i, 0) = A(i, idx[i]).
    Var pick(Var a, std::vector<int> idx) {
        const Mat& A = val(a);
        if (static_cast<int>(idx.size()) != A.rows) throw std::invalid_argument("pick: index count mismatch");
        Mat out(A.rows, 1);
        for (int r = 0; r < A.rows; ++r) {
            if (idx[r] < 0 || idx[r] >= A.cols) throw std::invalid_argument("pick: index out of range");
            out(r, 0) = A(r, idx[r]);
        }
        auto ik = std::make_shared<std::vector<int>>(std::move(idx));
        return make(std::move(out), [this, a, ik](Var self) {
            if (!tracked(a)) return;
            const Mat& G = grad_c(self.id);
            Mat& gA = grad(a.id);
            for (int r = 0; r < G.rows; ++r) gA(r, (*ik)[r]) += G(r, 0);
        });
    }

    /// Row subset A[rows, :].
    Var select_rows(Var a, std::vector<int> rows) {
        const Mat& A = val(a);
        Mat out(static_cast<int>(rows.size()), A.cols);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i] < 0 || rows[i] >= A.rows) throw std::invalid_argument("select_rows: index out of range");
            std::copy(A.row_ptr(rows[i]), A.row_ptr(rows[i]) + A.cols, out.row_ptr(static_cast<int>(i)));
        }
        auto rk = std::make_shared<std::vector<int>>(std::move(rows));
        return make(std::move(out), [this, a, rk](Var self) {
            if (!tracked(a)) return;
            const Mat& G = grad_c(self.id);
            Mat& gA = grad(a.id);
            for (int i = 0; i < G.rows; ++i)
                for (int c = 0; c < G.cols; ++c) gA((*rk)[i], c) += G(i, c);
        });
    }

    Var row_sum(Var a) {
        const Mat& A = val(a);
        Mat out(A.rows, 1);
        for (int r = 0; r < A.rows; ++r) {
            double s = 0.0;
            for (int c = 0; c < A.cols; ++c) s += A(r, c);
            out(r, 0) = s;
        }
        return make(std::move(out), [this, a](Var self) {
            if (!tracked(a)) return;
            const Mat& G = grad_c(self.id);
            Mat& gA = grad(a.id);
            for (int r = 0; r < gA.rows; ++r)
                for (int c = 0; c < gA.cols; ++c) gA(r, c) += G(r, 0);
        });
    }

    Var mean_all(Var a) {
        const Mat& A = val(a);
        double s = 0.0;
        for (double v : A.d) s += v;
        const double n = static_cast<double>(A.d.size());
        Mat out(1, 1);
        out.d[0] = s / n;
        return make(std::move(out), [this, a, n](Var self) {
            if (!tracked(a)) return;
            const double g = grad_c(self.id).d[0] / n;
            Mat& gA = grad(a.id);
            for (double& v : gA.d) v += g;
        });
    }

    Var sum_all(Var a) {
        const Mat& A = val(a);
        double s = 0.0;
        for (double v : A.d) s += v;
        Mat out(1, 1);
        out.d[0] = s;
        return make(std::move(out), [this, a](Var self) {
            if (!tracked(a)) return;
            const double g = grad_c(self.id).d[0];
            Mat& gA = grad(a.id);
            for (double& v : gA.d) v += g;
        });
    }

    // --- generic extension point -------------------------------------------

    /// Registers a computed node with a custom backward closure. The closure
    /// receives the node's own Var and must accumulate into parent grads via
    /// grad()/grad_c(). Used by the convolution ops.
    Var make(Mat value, std::function<void(Var)> back) {
        nodes_.push_back(Node{});
        Node& n = nodes_.back();
        n.val = std::move(value);
        Var self{static_cast<int>(nodes_.size()) - 1};
        if (back) {
            n.back = [back = std::move(back), self]() { back(self); };
        }
        return self;
    }

    /// Gradient buffer of a node, allocated (zeroed) on first touch.
    Mat& grad(int id) {
        Node& n = nodes_[id];
        if (n.grad.d.empty()) {
            const Mat& v = n.ext ? *n.ext : n.val;
            n.grad = Mat(v.rows, v.cols);
        }
        return n.grad;
    }

    const Mat& grad_c(int id) const { return nodes_[id].grad; }

    /// False for constants, so backward closures skip them cheaply.
    bool tracked(Var v) const { return !nodes_[v.id].is_const; }

private:
    struct Node {
        Mat val;
        const Mat* ext = nullptr;
        Parameter* par = nullptr;
        Mat grad;
        bool is_const = false;
        std::function<void()> back;
    };

    const Mat& val_of(int id) const {
        const Node& n = nodes_[id];
        return n.ext ? *n.ext : n.val;
    }

    std::vector<Node> nodes_;
};

} // namespace ad
} // namespace causalnl

#endif
