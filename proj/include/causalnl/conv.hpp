#ifndef CAUSALNL_CONV_HPP
#define CAUSALNL_CONV_HPP

#include <memory>
#include <stdexcept>

#include "causalnl/graph.hpp"

namespace causalnl {
namespace ad {

/// Geometry shared by im2col/col2im: `c` input channels of `ih x iw`, patches
/// of size `k x k` taken at `oh2 x ow2` positions with the given stride/pad.
struct ImGeom {
    int c, ih, iw, oh2, ow2, k, stride, pad;
    int patch() const { return c * k * k; }
};

/// src: (N x c*ih*iw) -> (N*oh2*ow2 x c*k*k), zero outside bounds.
inline Mat im2col(const Mat& src, const ImGeom& g) {
    const int N = src.rows;
    Mat cols(N * g.oh2 * g.ow2, g.patch());
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
        const double* im = src.row_ptr(n);
        for (int oy = 0; oy < g.oh2; ++oy) {
            for (int ox = 0; ox < g.ow2; ++ox) {
                double* out = cols.row_ptr((n * g.oh2 + oy) * g.ow2 + ox);
                for (int c = 0; c < g.c; ++c) {
                    const double* plane = im + static_cast<std::size_t>(c) * g.ih * g.iw;
                    for (int ki = 0; ki < g.k; ++ki) {
                        const int iy = oy * g.stride - g.pad + ki;
                        for (int kj = 0; kj < g.k; ++kj) {
                            const int ix = ox * g.stride - g.pad + kj;
                            const double v = (iy >= 0 && iy < g.ih && ix >= 0 && ix < g.iw)
                                                 ? plane[iy * g.iw + ix]
                                                 : 0.0;
                            out[(c * g.k + ki) * g.k + kj] = v;
                        }
                    }
                }
            }
        }
    }
    return cols;
}

/// Exact adjoint of im2col: accumulates cols back into dst (N x c*ih*iw).
inline void col2im_add(const Mat& cols, const ImGeom& g, Mat& dst) {
    const int N = dst.rows;
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
        double* im = dst.row_ptr(n);
        for (int oy = 0; oy < g.oh2; ++oy) {
            for (int ox = 0; ox < g.ow2; ++ox) {
                const double* in = cols.row_ptr((n * g.oh2 + oy) * g.ow2 + ox);
                for (int c = 0; c < g.c; ++c) {
                    double* plane = im + static_cast<std::size_t>(c) * g.ih * g.iw;
                    for (int ki = 0; ki < g.k; ++ki) {
                        const int iy = oy * g.stride - g.pad + ki;
                        if (iy < 0 || iy >= g.ih) continue;
                        for (int kj = 0; kj < g.k; ++kj) {
                            const int ix = ox * g.stride - g.pad + kj;
                            if (ix < 0 || ix >= g.iw) continue;
                            plane[iy * g.iw + ix] += in[(c * g.k + ki) * g.k + kj];
                        }
                    }
                }
            }
        }
    }
}

// (N*P x C) -> (N x C*P)
inline Mat fold_channels(const Mat& a, int N, int P, int C) {
    Mat out(N, C * P);
    for (int n = 0; n < N; ++n)
        for (int p = 0; p < P; ++p) {
            const double* in = a.row_ptr(n * P + p);
            double* o = out.row_ptr(n);
            for (int c = 0; c < C; ++c) o[c * P + p] = in[c];
        }
    return out;
}

// (N x C*P) -> (N*P x C)
inline Mat unfold_channels(const Mat& a, int N, int P, int C) {
    Mat out(N * P, C);
    for (int n = 0; n < N; ++n) {
        const double* in = a.row_ptr(n);
        for (int p = 0; p < P; ++p) {
            double* o = out.row_ptr(n * P + p);
            for (int c = 0; c < C; ++c) o[c] = in[c * P + p];
        }
    }
    return out;
}

struct Conv2dSpec {
    int cin, h, w, cout, k, stride, pad;
    int oh() const { return (h + 2 * pad - k) / stride + 1; }
    int ow() const { return (w + 2 * pad - k) / stride + 1; }
    int in_dim() const { return cin * h * w; }
    int out_dim() const { return cout * oh() * ow(); }
};

/// x: (N x cin*h*w), weight: (cout x cin*k*k), bias: (1 x cout).
inline Var conv2d(Tape& t, Var x, Var w, Var b, const Conv2dSpec& s) {
    const Mat& X = t.val(x);
    if (X.cols != s.in_dim()) throw std::invalid_argument("conv2d: input dimension mismatch");
    const int N = X.rows, OH = s.oh(), OW = s.ow(), P = OH * OW;
    const ImGeom g{s.cin, s.h, s.w, OH, OW, s.k, s.stride, s.pad};

    auto cols = std::make_shared<Mat>(im2col(X, g));
    Mat pre(N * P, s.cout);
    emap(pre).noalias() = emap(*cols) * emap(t.val(w)).transpose();
    emap(pre).rowwise() += emap(t.val(b)).row(0);
    Mat out = fold_channels(pre, N, P, s.cout);

    return t.make(std::move(out), [&t, x, w, b, s, cols, N, P, g](Var self) {
        const Mat gp = unfold_channels(t.grad_c(self.id), N, P, s.cout);
        if (t.tracked(w)) emap(t.grad(w.id)).noalias() += emap(gp).transpose() * emap(*cols);
        if (t.tracked(b)) emap(t.grad(b.id)).row(0) += emap(gp).colwise().sum();
        if (t.tracked(x)) {
            Mat gcols(N * P, g.patch());
            emap(gcols).noalias() = emap(gp) * emap(t.val(w));
            col2im_add(gcols, g, t.grad(x.id));
        }
    });
}

struct ConvTranspose2dSpec {
    int cin, h, w, cout, k, stride, pad, out_pad;
    int oh() const { return (h - 1) * stride - 2 * pad + k + out_pad; }
    int ow() const { return (w - 1) * stride - 2 * pad + k + out_pad; }
    int in_dim() const { return cin * h * w; }
    int out_dim() const { return cout * oh() * ow(); }
};

/// Transposed convolution, the adjoint of conv2d over the same geometry.
/// x: (N x cin*h*w), weight: (cin x cout*k*k), bias: (1 x cout).
inline Var conv_transpose2d(Tape& t, Var x, Var w, Var b, const ConvTranspose2dSpec& s) {
    const Mat& X = t.val(x);
    if (X.cols != s.in_dim()) throw std::invalid_argument("conv_transpose2d: input dimension mismatch");
    const int N = X.rows, OH = s.oh(), OW = s.ow(), P = s.h * s.w;
    // Positions of the equivalent forward conv that maps (OH,OW) -> (h,w).
    const ImGeom g{s.cout, OH, OW, s.h, s.w, s.k, s.stride, s.pad};

    auto xp = std::make_shared<Mat>(unfold_channels(X, N, P, s.cin));
    Mat cols(N * P, s.cout * s.k * s.k);
    emap(cols).noalias() = emap(*xp) * emap(t.val(w));
    Mat out(N, s.out_dim());
    col2im_add(cols, g, out);
    const Mat& B = t.val(b);
    for (int n = 0; n < N; ++n) {
        double* o = out.row_ptr(n);
        for (int c = 0; c < s.cout; ++c)
            for (int p = 0; p < OH * OW; ++p) o[c * OH * OW + p] += B.d[c];
    }

    return t.make(std::move(out), [&t, x, w, b, s, xp, N, P, g, OH, OW](Var self) {
        const Mat& G = t.grad_c(self.id);
        const Mat gcols = im2col(G, g);
        if (t.tracked(w)) emap(t.grad(w.id)).noalias() += emap(*xp).transpose() * emap(gcols);
        if (t.tracked(b)) {
            Mat& gb = t.grad(b.id);
            for (int n = 0; n < N; ++n) {
                const double* gr = G.row_ptr(n);
                for (int c = 0; c < s.cout; ++c) {
                    double acc = 0.0;
                    for (int p = 0; p < OH * OW; ++p) acc += gr[c * OH * OW + p];
                    gb.d[c] += acc;
                }
            }
        }
        if (t.tracked(x)) {
            Mat gxp(N * P, s.cin);
            emap(gxp).noalias() = emap(gcols) * emap(t.val(w)).transpose();
            const Mat gx = fold_channels(gxp, N, P, s.cin);
            emap(t.grad(x.id)) += emap(gx);
        }
    });
}

} // namespace ad
} // namespace causalnl

#endif
