#ifndef CAUSALNL_NN_HPP
#define CAUSALNL_NN_HPP

#include <cmath>
#include <vector>

#include "causalnl/common.hpp"
#include "causalnl/conv.hpp"
#include "causalnl/graph.hpp"

namespace causalnl {

/// Fan-in-scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), applied to
/// weights and biases alike.
inline Mat init_weight(int rows, int cols, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat w(rows, cols);
    for (double& v : w.d) v = dist(rng);
    return w;
}

struct Linear {
    Parameter w; // (in x out)
    Parameter b; // (1 x out)
    int in = 0, out = 0;

    Linear() = default;
    Linear(int in_dim, int out_dim, Rng& rng)
        : w(init_weight(in_dim, out_dim, in_dim, rng)),
          b(init_weight(1, out_dim, in_dim, rng)),
          in(in_dim),
          out(out_dim) {}

    ad::Var forward(ad::Tape& t, ad::Var x) { return t.add_rowvec(t.matmul(x, t.leaf(w)), t.leaf(b)); }

    void collect(std::vector<Parameter*>& ps) {
        ps.push_back(&w);
        ps.push_back(&b);
    }
};

struct Conv2dLayer {
    Parameter w; // (cout x cin*k*k)
    Parameter b; // (1 x cout)
    ad::Conv2dSpec spec{};

    Conv2dLayer() = default;
    Conv2dLayer(ad::Conv2dSpec s, Rng& rng)
        : w(init_weight(s.cout, s.cin * s.k * s.k, s.cin * s.k * s.k, rng)),
          b(init_weight(1, s.cout, s.cin * s.k * s.k, rng)),
          spec(s) {}

    ad::Var forward(ad::Tape& t, ad::Var x) { return ad::conv2d(t, x, t.leaf(w), t.leaf(b), spec); }

    void collect(std::vector<Parameter*>& ps) {
        ps.push_back(&w);
        ps.push_back(&b);
    }
};

struct ConvTranspose2dLayer {
    Parameter w; // (cin x cout*k*k)
    Parameter b; // (1 x cout)
    ad::ConvTranspose2dSpec spec{};

    ConvTranspose2dLayer() = default;
    ConvTranspose2dLayer(ad::ConvTranspose2dSpec s, Rng& rng)
        : w(init_weight(s.cin, s.cout * s.k * s.k, s.cin * s.k * s.k, rng)),
          b(init_weight(1, s.cout, s.cin * s.k * s.k, rng)),
          spec(s) {}

    ad::Var forward(ad::Tape& t, ad::Var x) {
        return ad::conv_transpose2d(t, x, t.leaf(w), t.leaf(b), spec);
    }

    void collect(std::vector<Parameter*>& ps) {
        ps.push_back(&w);
        ps.push_back(&b);
    }
};

/// Fully connected net: ReLU after every hidden layer, linear head.
struct Mlp {
    std::vector<Linear> layers;
    int in = 0, out = 0;

    Mlp() = default;
    Mlp(int in_dim, const std::vector<int>& hidden, int out_dim, Rng& rng) : in(in_dim), out(out_dim) {
        int d = in_dim;
        for (int h : hidden) {
            layers.emplace_back(d, h, rng);
            d = h;
        }
        layers.emplace_back(d, out_dim, rng);
    }

    ad::Var forward(ad::Tape& t, ad::Var x) {
        ad::Var h = x;
        for (std::size_t i = 0; i + 1 < layers.size(); ++i) h = t.relu(layers[i].forward(t, h));
        return layers.back().forward(t, h);
    }

    void collect(std::vector<Parameter*>& ps) {
        for (auto& l : layers) l.collect(ps);
    }
};

/// Strided conv stack (ReLU after every layer) ending in flattened features.
struct ConvTower {
    std::vector<Conv2dLayer> layers;
    int in_dim = 0, out_dim = 0;

    ConvTower() = default;
    /// maps: output channel count per layer; 3x3 kernels, stride 2, pad 1.
    ConvTower(int cin, int h, int w, const std::vector<int>& maps, Rng& rng) {
        in_dim = cin * h * w;
        int c = cin, ih = h, iw = w;
        for (int cout : maps) {
            ad::Conv2dSpec s{c, ih, iw, cout, 3, 2, 1};
            layers.emplace_back(s, rng);
            c = cout;
            ih = s.oh();
            iw = s.ow();
        }
        out_dim = c * ih * iw;
    }

    ad::Var forward(ad::Tape& t, ad::Var x) {
        ad::Var h = x;
        for (auto& l : layers) h = t.relu(l.forward(t, h));
        return h;
    }

    void collect(std::vector<Parameter*>& ps) {
        for (auto& l : layers) l.collect(ps);
    }
};

/// Transposed-conv stack upsampling back to an image; ReLU between layers,
/// sigmoid on the final image so outputs live in the pixel range.
struct DeconvTower {
    std::vector<ConvTranspose2dLayer> layers;
    int in_dim = 0, out_dim = 0;

    DeconvTower() = default;
    /// maps: output channel count per layer (last entry = image channels);
    /// out_pads: per-layer output padding to hit the target sizes.
    DeconvTower(int cin, int h, int w, const std::vector<int>& maps, const std::vector<int>& out_pads,
                Rng& rng) {
        in_dim = cin * h * w;
        int c = cin, ih = h, iw = w;
        for (std::size_t i = 0; i < maps.size(); ++i) {
            ad::ConvTranspose2dSpec s{c, ih, iw, maps[i], 3, 2, 1, out_pads[i]};
            layers.emplace_back(s, rng);
            c = maps[i];
            ih = s.oh();
            iw = s.ow();
        }
        out_dim = c * ih * iw;
    }

    ad::Var forward(ad::Tape& t, ad::Var x) {
        ad::Var h = x;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            h = layers[i].forward(t, h);
            h = (i + 1 < layers.size()) ? t.relu(h) : t.sigmoid(h);
        }
        return h;
    }

    void collect(std::vector<Parameter*>& ps) {
        for (auto& l : layers) l.collect(ps);
    }
};

} // namespace causalnl

#endif
