#ifndef CAUSALNL_LOSSES_HPP
#define CAUSALNL_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "causalnl/model.hpp"

namespace causalnl {

/// Weights of the four empirical negative-ELBO terms.
struct ElboWeights {
    double beta0 = 0.1;  // l1 reconstruction
    double beta1 = 0.1;  // noisy-label cross-entropy
    double beta2 = 1e-5; // negative entropy of the soft label
    double beta3 = 0.01; // Gaussian KL to the standard-normal prior
};

struct ElboBreakdown {
    double recon = 0.0;
    double noisy_ce = 0.0;
    double neg_entropy = 0.0;
    double kl_gauss = 0.0;
    double total = 0.0;
};

/// (1/m) * sum_k |x_k - xhat_k|
inline double recon_l1(const std::vector<double>& x, const std::vector<double>& xhat) {
    if (x.size() != xhat.size() || x.empty()) throw std::invalid_argument("recon_l1: dimension mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += std::fabs(x[k] - xhat[k]);
    return s / static_cast<double>(x.size());
}

inline double log_softmax_at(const std::vector<double>& logits, int index) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double s = 0.0;
    for (double v : logits) s += std::exp(v - mx);
    return logits[index] - mx - std::log(s);
}

/// -log softmax(logits)[label]
inline double noisy_ce(const std::vector<double>& noisy_logits, int noisy_label) {
    if (noisy_label < 0 || noisy_label >= static_cast<int>(noisy_logits.size()))
        throw std::invalid_argument("noisy_ce: label out of range");
    return -log_softmax_at(noisy_logits, noisy_label);
}

/// sum_y q_y log q_y with 0 log 0 := 0. Equals KL(q || uniform) - log C.
inline double neg_entropy(const std::vector<double>& q) {
    if (q.empty()) throw std::invalid_argument("neg_entropy: empty vector");
    double s = 0.0, total = 0.0;
    for (double v : q) {
        if (v < 0.0) throw std::invalid_argument("neg_entropy: negative entry");
        total += v;
        if (v > 0.0) s += v * std::log(v);
    }
    if (std::fabs(total - 1.0) > 1e-6) throw std::invalid_argument("neg_entropy: not a probability vector");
    return s;
}

/// Closed-form KL(N(mu, diag sigma^2) || N(0, I)):
/// -0.5 * sum_j (1 + log sigma_j^2 - mu_j^2 - sigma_j^2). Always >= 0.
inline double kl_gauss(const GaussianParams& g) {
    if (g.mean.size() != g.log_variance.size() || g.mean.empty())
        throw std::invalid_argument("kl_gauss: dimension mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < g.mean.size(); ++j) {
        const double lv = g.log_variance[j];
        s += 1.0 + lv - g.mean[j] * g.mean[j] - std::exp(lv);
    }
    return -0.5 * s;
}

/// Per-sample weighted negative ELBO assembled from a branch output.
inline ElboBreakdown negative_elbo(const std::vector<double>& x, const BranchOutput& out,
                                   int noisy_label, const ElboWeights& w) {
    ElboBreakdown b;
    b.recon = recon_l1(x, out.reconstruction);
    b.noisy_ce = noisy_ce(out.noisy_logits, noisy_label);
    b.neg_entropy = neg_entropy(out.soft_label);
    b.kl_gauss = kl_gauss(out.gaussian);
    b.total = w.beta0 * b.recon + w.beta1 * b.noisy_ce + w.beta2 * b.neg_entropy + w.beta3 * b.kl_gauss;
    return b;
}

// --- co-teaching machinery ---------------------------------------------------

struct KeepRateSchedule {
    double rho = 0.0;      // estimated noise rate
    int warmup_epochs = 10; // Tk

    void validate() const {
        if (rho < 0.0 || rho >= 1.0) throw std::invalid_argument("keep schedule: rho must be in [0, 1)");
        if (warmup_epochs < 1) throw std::invalid_argument("keep schedule: warmup must be >= 1");
    }
};

/// 1 - rho * min(epoch / Tk, 1): decays linearly from 1 to 1 - rho.
inline double keep_rate(int epoch, const KeepRateSchedule& sched) {
    if (epoch < 0) throw std::invalid_argument("keep_rate: epoch must be >= 0");
    sched.validate();
    const double frac = std::min(static_cast<double>(epoch) / sched.warmup_epochs, 1.0);
    return 1.0 - sched.rho * frac;
}

/// Indices of the ceil(keep_fraction * n) smallest losses, ties broken by the
/// smaller index; returned in ascending index order.
inline std::vector<int> small_loss_select(const std::vector<double>& per_sample_losses,
                                          double keep_fraction) {
    if (per_sample_losses.empty()) throw std::invalid_argument("small_loss_select: empty loss list");
    if (keep_fraction <= 0.0 || keep_fraction > 1.0)
        throw std::invalid_argument("small_loss_select: keep fraction must be in (0, 1]");
    const int n = static_cast<int>(per_sample_losses.size());
    const int k = std::min(n, static_cast<int>(std::ceil(keep_fraction * n)));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return per_sample_losses[a] < per_sample_losses[b];
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

// --- tape-side loss graphs ----------------------------------------------------

namespace ad {

struct ElboVars {
    Var recon, noisy_ce, neg_entropy, kl_gauss, total;
};

/// Batch-mean weighted negative ELBO for one branch forward pass. `x` is the
/// reconstruction target (a constant node over the batch).
inline ElboVars elbo_graph(Tape& t, Var x, const Branch::Forward& f, const std::vector<int>& noisy_labels,
                           const ElboWeights& w) {
    ElboVars e;
    const int m = t.val(x).cols;
    e.recon = t.mean_all(t.affine(t.row_sum(t.abs_(t.sub(f.reconstruction, x))), 1.0 / m, 0.0));
    e.noisy_ce = t.affine(t.mean_all(t.pick(t.row_log_softmax(f.noisy_logits), noisy_labels)), -1.0, 0.0);
    e.neg_entropy =
        t.mean_all(t.row_sum(t.hadamard(f.soft_label, t.row_log_softmax(f.label_logits))));
    Var inner = t.sub(t.sub(t.affine(f.log_var, 1.0, 1.0), t.hadamard(f.mu, f.mu)), t.exp_(f.log_var));
    e.kl_gauss = t.mean_all(t.affine(t.row_sum(inner), -0.5, 0.0));
    e.total = t.add(t.add(t.affine(e.recon, w.beta0, 0.0), t.affine(e.noisy_ce, w.beta1, 0.0)),
                    t.add(t.affine(e.neg_entropy, w.beta2, 0.0), t.affine(e.kl_gauss, w.beta3, 0.0)));
    return e;
}

/// Per-sample cross-entropy column (n x 1) of logits against labels.
inline Var per_sample_ce(Tape& t, Var logits, const std::vector<int>& labels) {
    return t.affine(t.pick(t.row_log_softmax(logits), labels), -1.0, 0.0);
}

} // namespace ad
} // namespace causalnl

#endif
