#ifndef CAUSALNL_MODEL_HPP
#define CAUSALNL_MODEL_HPP

#include <string>
#include <utility>
#include <vector>

#include "causalnl/common.hpp"
#include "causalnl/datasets.hpp"
#include "causalnl/nn.hpp"

namespace causalnl {

/// Diagonal Gaussian over a J-dimensional latent, parameterized by mean and
/// log variance (the latent-encoder outputs).
struct GaussianParams {
    std::vector<double> mean;
    std::vector<double> log_variance;

    int dim() const { return static_cast<int>(mean.size()); }
};

/// z = mu + exp(0.5 * log_var) .* eps
inline std::vector<double> reparameterize(const GaussianParams& g, const std::vector<double>& epsilon) {
    if (g.mean.size() != g.log_variance.size() || g.mean.size() != epsilon.size())
        throw std::invalid_argument("reparameterize: dimension mismatch");
    std::vector<double> z(g.mean.size());
    for (std::size_t j = 0; j < z.size(); ++j)
        z[j] = g.mean[j] + std::exp(0.5 * g.log_variance[j]) * epsilon[j];
    return z;
}

namespace ad {
/// Tape version of the reparameterization, differentiable in mu and log_var.
inline Var reparameterize(Tape& t, Var mu, Var log_var, Mat epsilon) {
    return t.add(mu, t.hadamard_const(t.exp_(t.affine(log_var, 0.5, 0.0)), std::move(epsilon)));
}
} // namespace ad

enum class Preset { Mlp2d, ConvSmall };

inline std::string to_string(Preset p) { return p == Preset::Mlp2d ? "mlp-2d" : "conv-small"; }

inline Preset preset_from_string(const std::string& s) {
    if (s == "mlp-2d") return Preset::Mlp2d;
    if (s == "conv-small") return Preset::ConvSmall;
    throw std::invalid_argument("unknown architecture preset: " + s);
}

struct BranchConfig {
    Preset preset = Preset::Mlp2d;
    int feature_dim = 2;
    int num_classes = 2;
    int latent_dim = 1;
    std::vector<int> hidden{64, 64}; // mlp preset
    ImageShape image{};              // conv preset

    bool operator==(const BranchConfig& o) const {
        return preset == o.preset && feature_dim == o.feature_dim && num_classes == o.num_classes &&
               latent_dim == o.latent_dim && hidden == o.hidden && image.channels == o.image.channels &&
               image.height == o.image.height && image.width == o.image.width;
    }
};

/// One sample's outputs from a branch forward pass.
struct BranchOutput {
    std::vector<double> soft_label;
    GaussianParams gaussian;
    std::vector<double> latent;
    std::vector<double> reconstruction;
    std::vector<double> noisy_logits;
};

/// Batched branch forward results.
struct BranchOutputBatch {
    Mat soft_label;     // N x C
    Mat mu, log_var;    // N x J
    Mat latent;         // N x J
    Mat reconstruction; // N x m
    Mat noisy_logits;   // N x C

    int size() const { return soft_label.rows; }

    BranchOutput sample(int i) const {
        auto rowvec = [](const Mat& m, int r) {
            return std::vector<double>(m.row_ptr(r), m.row_ptr(r) + m.cols);
        };
        BranchOutput o;
        o.soft_label = rowvec(soft_label, i);
        o.gaussian = GaussianParams{rowvec(mu, i), rowvec(log_var, i)};
        o.latent = rowvec(latent, i);
        o.reconstruction = rowvec(reconstruction, i);
        o.noisy_logits = rowvec(noisy_logits, i);
        return o;
    }
};

/// The four learnable networks of one model branch: a label encoder
/// q(Y|X), a latent encoder q(Z|Y,X), an instance decoder p(X|Y,Z) and a
/// noise decoder p(noisy Y | Y, X). The label is fed to the conditioned
/// networks as the softmax probability vector during training; the noise
/// decoder consumes the reconstruction, not the observed instance.
struct Branch {
    BranchConfig cfg;

    // mlp-2d preset
    Mlp label_mlp, latent_mlp, decoder_mlp, noise_mlp;

    // conv-small preset
    ConvTower label_tower;
    Linear label_fc1, label_fc2;
    ConvTower latent_tower;
    Linear latent_head;
    Linear decoder_fc;
    DeconvTower decoder_tower;
    ConvTower noise_tower;
    Linear noise_head;

    std::vector<Parameter*> parameters() {
        std::vector<Parameter*> ps;
        if (cfg.preset == Preset::Mlp2d) {
            label_mlp.collect(ps);
            latent_mlp.collect(ps);
            decoder_mlp.collect(ps);
            noise_mlp.collect(ps);
        } else {
            label_tower.collect(ps);
            label_fc1.collect(ps);
            label_fc2.collect(ps);
            latent_tower.collect(ps);
            latent_head.collect(ps);
            decoder_fc.collect(ps);
            decoder_tower.collect(ps);
            noise_tower.collect(ps);
            noise_head.collect(ps);
        }
        return ps;
    }

    std::vector<Parameter*> label_encoder_parameters() {
        std::vector<Parameter*> ps;
        if (cfg.preset == Preset::Mlp2d) {
            label_mlp.collect(ps);
        } else {
            label_tower.collect(ps);
            label_fc1.collect(ps);
            label_fc2.collect(ps);
        }
        return ps;
    }

    ad::Var label_logits(ad::Tape& t, ad::Var x) {
        if (cfg.preset == Preset::Mlp2d) return label_mlp.forward(t, x);
        ad::Var h = label_tower.forward(t, x);
        h = t.relu(label_fc1.forward(t, h));
        return label_fc2.forward(t, h);
    }

    std::pair<ad::Var, ad::Var> gaussian(ad::Tape& t, ad::Var x, ad::Var y) {
        ad::Var raw;
        if (cfg.preset == Preset::Mlp2d) {
            raw = latent_mlp.forward(t, t.concat_cols(x, y));
        } else {
            ad::Var h = latent_tower.forward(t, x);
            raw = latent_head.forward(t, t.concat_cols(h, y));
        }
        const int j = cfg.latent_dim;
        return {t.slice_cols(raw, 0, j), t.slice_cols(raw, j, 2 * j)};
    }

    ad::Var reconstruct(ad::Tape& t, ad::Var y, ad::Var z) {
        if (cfg.preset == Preset::Mlp2d) return decoder_mlp.forward(t, t.concat_cols(y, z));
        ad::Var h = t.relu(decoder_fc.forward(t, t.concat_cols(y, z)));
        return decoder_tower.forward(t, h);
    }

    ad::Var noise_logits(ad::Tape& t, ad::Var xhat, ad::Var y) {
        if (cfg.preset == Preset::Mlp2d) return noise_mlp.forward(t, t.concat_cols(xhat, y));
        ad::Var h = noise_tower.forward(t, xhat);
        return noise_head.forward(t, t.concat_cols(h, y));
    }

    struct Forward {
        ad::Var label_logits, soft_label, mu, log_var, latent, reconstruction, noisy_logits;
    };

    /// Full pass per Algorithm 1: infer soft label, encode the latent,
    /// sample z with external noise, reconstruct, predict the noisy label
    /// from the reconstruction.
    Forward forward(ad::Tape& t, ad::Var x, Mat epsilon) {
        Forward f;
        f.label_logits = label_logits(t, x);
        f.soft_label = t.row_softmax(f.label_logits);
        auto [mu, lv] = gaussian(t, x, f.soft_label);
        f.mu = mu;
        f.log_var = lv;
        f.latent = ad::reparameterize(t, mu, lv, std::move(epsilon));
        f.reconstruction = reconstruct(t, f.soft_label, f.latent);
        f.noisy_logits = noise_logits(t, f.reconstruction, f.soft_label);
        return f;
    }
};

inline Branch make_branch(const BranchConfig& cfg, std::uint64_t seed) {
    if (cfg.latent_dim < 1) throw std::invalid_argument("branch: latent dimension must be >= 1");
    if (cfg.num_classes < 2) throw std::invalid_argument("branch: need at least two classes");
    Branch b;
    b.cfg = cfg;
    Rng rng = make_rng(seed);
    const int c = cfg.num_classes, j = cfg.latent_dim, m = cfg.feature_dim;
    if (cfg.preset == Preset::Mlp2d) {
        b.label_mlp = Mlp(m, cfg.hidden, c, rng);
        b.latent_mlp = Mlp(m + c, cfg.hidden, 2 * j, rng);
        b.decoder_mlp = Mlp(c + j, cfg.hidden, m, rng);
        b.noise_mlp = Mlp(m + c, cfg.hidden, c, rng);
    } else {
        const ImageShape& im = cfg.image;
        if (im.dim() != m) throw std::invalid_argument("branch: image shape does not match feature_dim");
        if (im.height != 28 || im.width != 28 || im.channels != 1)
            throw std::invalid_argument("branch: conv-small preset expects 1x28x28 images");
        b.label_tower = ConvTower(im.channels, im.height, im.width, {16, 32}, rng);
        b.label_fc1 = Linear(b.label_tower.out_dim, 128, rng);
        b.label_fc2 = Linear(128, c, rng);
        b.latent_tower = ConvTower(im.channels, im.height, im.width, {32, 64, 128, 256}, rng);
        b.latent_head = Linear(b.latent_tower.out_dim + c, 2 * j, rng);
        b.decoder_fc = Linear(c + j, 256 * 2 * 2, rng);
        b.decoder_tower = DeconvTower(256, 2, 2, {128, 64, 32, im.channels}, {1, 0, 1, 1}, rng);
        b.noise_tower = ConvTower(im.channels, im.height, im.width, {32, 64, 128, 256}, rng);
        b.noise_head = Linear(b.noise_tower.out_dim + c, c, rng);
    }
    return b;
}

/// Convenience non-training forward: runs the tape internally with noise
/// drawn from the given seed. Deterministic given (parameters, x, seed).
inline BranchOutputBatch forward_branch(Branch& b, const Mat& x, std::uint64_t epsilon_seed) {
    if (x.cols != b.cfg.feature_dim) throw std::invalid_argument("forward_branch: feature dim mismatch");
    Mat eps(x.rows, b.cfg.latent_dim);
    Rng rng = make_rng(epsilon_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : eps.d) v = gauss(rng);

    ad::Tape t;
    ad::Var xc = t.constant(x);
    Branch::Forward f = b.forward(t, xc, eps);
    BranchOutputBatch out;
    out.soft_label = t.val(f.soft_label);
    out.mu = t.val(f.mu);
    out.log_var = t.val(f.log_var);
    out.latent = t.val(f.latent);
    out.reconstruction = t.val(f.reconstruction);
    out.noisy_logits = t.val(f.noisy_logits);
    return out;
}

/// Row-wise argmax with ties broken by the smallest class index.
inline std::vector<int> argmax_rows(const Mat& logits) {
    std::vector<int> out(logits.rows);
    for (int r = 0; r < logits.rows; ++r) {
        int best = 0;
        for (int c = 1; c < logits.cols; ++c)
            if (logits(r, c) > logits(r, best)) best = c;
        out[r] = best;
    }
    return out;
}

/// Hard labels from the label encoder alone.
inline std::vector<int> predict(Branch& b, const Mat& x) {
    ad::Tape t;
    ad::Var logits = b.label_logits(t, t.constant(x));
    return argmax_rows(t.val(logits));
}

/// Stand-alone classifier with the same architecture as a branch's label
/// encoder; the baselines train this.
struct Classifier {
    BranchConfig cfg;

    Mlp mlp; // mlp-2d preset

    ConvTower tower; // conv-small preset
    Linear fc1, fc2;

    ad::Var logits(ad::Tape& t, ad::Var x) {
        if (cfg.preset == Preset::Mlp2d) return mlp.forward(t, x);
        ad::Var h = tower.forward(t, x);
        h = t.relu(fc1.forward(t, h));
        return fc2.forward(t, h);
    }

    std::vector<Parameter*> parameters() {
        std::vector<Parameter*> ps;
        if (cfg.preset == Preset::Mlp2d) {
            mlp.collect(ps);
        } else {
            tower.collect(ps);
            fc1.collect(ps);
            fc2.collect(ps);
        }
        return ps;
    }
};

inline Classifier make_classifier(const BranchConfig& cfg, std::uint64_t seed) {
    Classifier c;
    c.cfg = cfg;
    Rng rng = make_rng(seed);
    if (cfg.preset == Preset::Mlp2d) {
        c.mlp = Mlp(cfg.feature_dim, cfg.hidden, cfg.num_classes, rng);
    } else {
        const ImageShape& im = cfg.image;
        if (im.dim() != cfg.feature_dim)
            throw std::invalid_argument("classifier: image shape does not match feature_dim");
        c.tower = ConvTower(im.channels, im.height, im.width, {16, 32}, rng);
        c.fc1 = Linear(c.tower.out_dim, 128, rng);
        c.fc2 = Linear(128, cfg.num_classes, rng);
    }
    return c;
}

inline std::vector<int> predict(Classifier& c, const Mat& x) {
    ad::Tape t;
    ad::Var logits = c.logits(t, t.constant(x));
    return argmax_rows(t.val(logits));
}

} // namespace causalnl

#endif
