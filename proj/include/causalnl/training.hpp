#ifndef CAUSALNL_TRAINING_HPP
#define CAUSALNL_TRAINING_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "causalnl/adam.hpp"
#include "causalnl/datasets.hpp"
#include "causalnl/losses.hpp"
#include "causalnl/model.hpp"
#include "causalnl/noise.hpp"

namespace causalnl {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 128;
    double learning_rate = 1e-3;
    ElboWeights weights{};
    KeepRateSchedule schedule{};
    int latent_dim = 1;
    std::uint64_t seed = 0;
    Preset preset = Preset::Mlp2d;
    bool augment = false;

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
        if (learning_rate <= 0.0) throw std::invalid_argument("train config: learning_rate must be > 0");
        if (latent_dim < 1) throw std::invalid_argument("train config: latent_dim must be >= 1");
    }
};

struct EpochMetrics {
    int epoch = 0;
    double keep_fraction = 1.0;
    double acc1 = 0.0;
    double acc2 = std::numeric_limits<double>::quiet_NaN();
    ElboBreakdown elbo1{}, elbo2{}; // zero for the discriminative baselines
    double ce1 = 0.0;
    double ce2 = std::numeric_limits<double>::quiet_NaN();
};

/// Optional per-step sink for ELBO term rows (branch is 1 or 2).
using StepLogger = std::function<void(int epoch, int step, int branch, const ElboBreakdown&)>;

/// Optional per-step sink for the co-teaching exchange: the per-sample label
/// losses of both branches and the indices each branch then trained on.
using CoteachLogger =
    std::function<void(int epoch, int step, const std::vector<double>& losses1,
                       const std::vector<double>& losses2, const std::vector<int>& trained_on_1,
                       const std::vector<int>& trained_on_2)>;

namespace detail {

inline BranchConfig branch_config(const TrainConfig& cfg, const NoisyDataset& ds) {
    BranchConfig bc;
    bc.preset = cfg.preset;
    bc.feature_dim = ds.feature_dim();
    bc.num_classes = ds.num_classes;
    bc.latent_dim = cfg.latent_dim;
    if (cfg.preset == Preset::ConvSmall) {
        if (!ds.image) throw std::invalid_argument("conv-small preset needs an image dataset");
        bc.image = *ds.image;
    }
    return bc;
}

inline double fraction_correct(const std::vector<int>& pred, const std::vector<int>& truth) {
    int hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

inline std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<int>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
    return out;
}

inline Mat draw_normal(int rows, int cols, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat m(rows, cols);
    for (double& v : m.d) v = gauss(rng);
    return m;
}

inline std::vector<double> column(const Mat& m) {
    return std::vector<double>(m.d.begin(), m.d.end());
}

inline std::vector<Mat> copy_grads(const std::vector<Parameter*>& ps) {
    std::vector<Mat> out;
    out.reserve(ps.size());
    for (Parameter* p : ps) out.push_back(p->grad);
    return out;
}

inline void set_grads(const std::vector<Parameter*>& ps, const std::vector<Mat>& grads) {
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->grad = grads[i];
}

inline void zero_grads(const std::vector<Parameter*>& ps) {
    for (Parameter* p : ps) p->zero_grad();
}

/// Watches loss terms for non-finite values; throws after three consecutive
/// bad steps, naming the first offending term.
class DivergenceGuard {
public:
    /// Returns true when the step is usable for updates.
    bool check(const ElboBreakdown& b) {
        const char* bad = nullptr;
        if (!std::isfinite(b.recon)) bad = "recon";
        else if (!std::isfinite(b.noisy_ce)) bad = "noisy_ce";
        else if (!std::isfinite(b.neg_entropy)) bad = "neg_entropy";
        else if (!std::isfinite(b.kl_gauss)) bad = "kl_gauss";
        else if (!std::isfinite(b.total)) bad = "total";
        return note(bad);
    }

    bool check_scalar(double v, const char* term) { return note(std::isfinite(v) ? nullptr : term); }

private:
    bool note(const char* bad) {
        if (!bad) {
            streak_ = 0;
            return true;
        }
        if (streak_ == 0) first_term_ = bad;
        if (++streak_ >= 3)
            throw DivergedError(std::string("training diverged: loss term '") + first_term_ +
                                "' non-finite for 3 consecutive steps");
        return false;
    }

    int streak_ = 0;
    std::string first_term_;
};

inline Mat maybe_augment(const Mat& xb, const NoisyDataset& ds, const TrainConfig& cfg, int epoch,
                         int step) {
    if (!cfg.augment || !ds.image) return xb;
    Mat a = augment(xb, ds.image, AugmentMode::RandomCrop,
                    derive_seed(cfg.seed, 0xA000000ULL + std::uint64_t(epoch) * 100000 + step));
    return augment(a, ds.image, AugmentMode::HorizontalFlip,
                   derive_seed(cfg.seed, 0xB000000ULL + std::uint64_t(epoch) * 100000 + step));
}

} // namespace detail

// --- CausalNL ------------------------------------------------------------------

struct CausalnlResult {
    Branch branch1, branch2;
    std::vector<EpochMetrics> metrics;
};

/// Dual-branch training: per batch, one forward through both branches, then a
/// co-teaching cross-entropy update of each label encoder on the small-loss
/// subset selected by its peer, then a full weighted-negative-ELBO update of
/// all four networks per branch. Both gradients are taken at the batch's
/// forward-pass parameters.
inline CausalnlResult train_causalnl(const NoisyDataset& train, const LabeledDataset& test,
                                     const TrainConfig& cfg, const StepLogger& step_logger = {},
                                     const CoteachLogger& coteach_logger = {}) {
    cfg.validate();
    cfg.schedule.validate();
    if (train.num_classes != test.num_classes)
        throw std::invalid_argument("train_causalnl: class count mismatch between splits");
    if (train.feature_dim() != test.feature_dim())
        throw std::invalid_argument("train_causalnl: feature dim mismatch between splits");

    const BranchConfig bc = detail::branch_config(cfg, train);
    CausalnlResult res;
    res.branch1 = make_branch(bc, derive_seed(cfg.seed, 1));
    res.branch2 = make_branch(bc, derive_seed(cfg.seed, 2));
    Branch& b1 = res.branch1;
    Branch& b2 = res.branch2;

    const auto params1 = b1.parameters();
    const auto params2 = b2.parameters();
    const auto label1 = b1.label_encoder_parameters();
    const auto label2 = b2.label_encoder_parameters();
    Adam adam1(params1, cfg.learning_rate), adam2(params2, cfg.learning_rate);
    Adam adam_ct1(label1, cfg.learning_rate), adam_ct2(label2, cfg.learning_rate);

    Rng eps_rng = make_rng(derive_seed(cfg.seed, 3));
    detail::DivergenceGuard guard;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double keep = keep_rate(epoch, cfg.schedule);
        ElboBreakdown mean1{}, mean2{};
        double ct_mean1 = 0.0, ct_mean2 = 0.0;
        int steps = 0;

        for (const auto& idx : batches(train.size(), cfg.batch_size, cfg.seed, epoch)) {
            const int n = static_cast<int>(idx.size());
            Mat xb = detail::maybe_augment(gather_rows(train.instances, idx), train, cfg, epoch, steps);
            const std::vector<int> yb = detail::gather_labels(train.noisy_labels, idx);
            Mat eps1 = detail::draw_normal(n, cfg.latent_dim, eps_rng);
            Mat eps2 = detail::draw_normal(n, cfg.latent_dim, eps_rng);

            ad::Tape t;
            ad::Var xc = t.constant(xb);
            Branch::Forward f1 = b1.forward(t, xc, std::move(eps1));
            Branch::Forward f2 = b2.forward(t, xc, std::move(eps2));
            ad::Var ce1 = ad::per_sample_ce(t, f1.label_logits, yb);
            ad::Var ce2 = ad::per_sample_ce(t, f2.label_logits, yb);
            ad::ElboVars e1 = ad::elbo_graph(t, xc, f1, yb, cfg.weights);
            ad::ElboVars e2 = ad::elbo_graph(t, xc, f2, yb, cfg.weights);

            const ElboBreakdown v1{t.scalar(e1.recon), t.scalar(e1.noisy_ce), t.scalar(e1.neg_entropy),
                                   t.scalar(e1.kl_gauss), t.scalar(e1.total)};
            const ElboBreakdown v2{t.scalar(e2.recon), t.scalar(e2.noisy_ce), t.scalar(e2.neg_entropy),
                                   t.scalar(e2.kl_gauss), t.scalar(e2.total)};
            const bool ok = guard.check(v1) && guard.check(v2);
            if (!ok) continue;

            // Each branch trains its label encoder on the peer's selection.
            const std::vector<int> sel_by_1 = small_loss_select(detail::column(t.val(ce1)), keep);
            const std::vector<int> sel_by_2 = small_loss_select(detail::column(t.val(ce2)), keep);
            ad::Var ct1 = t.mean_all(t.select_rows(ce1, sel_by_2));
            ad::Var ct2 = t.mean_all(t.select_rows(ce2, sel_by_1));
            if (coteach_logger)
                coteach_logger(epoch, steps, detail::column(t.val(ce1)), detail::column(t.val(ce2)),
                               sel_by_2, sel_by_1);

            detail::zero_grads(params1);
            t.backward(ct1);
            const std::vector<Mat> ct_grads1 = detail::copy_grads(label1);
            detail::zero_grads(params1);
            t.backward(e1.total);
            const std::vector<Mat> elbo_label_grads1 = detail::copy_grads(label1);
            detail::set_grads(label1, ct_grads1);
            adam_ct1.step();
            detail::set_grads(label1, elbo_label_grads1);
            adam1.step();

            detail::zero_grads(params2);
            t.backward(ct2);
            const std::vector<Mat> ct_grads2 = detail::copy_grads(label2);
            detail::zero_grads(params2);
            t.backward(e2.total);
            const std::vector<Mat> elbo_label_grads2 = detail::copy_grads(label2);
            detail::set_grads(label2, ct_grads2);
            adam_ct2.step();
            detail::set_grads(label2, elbo_label_grads2);
            adam2.step();

            if (step_logger) {
                step_logger(epoch, steps, 1, v1);
                step_logger(epoch, steps, 2, v2);
            }
            mean1.recon += v1.recon;
            mean1.noisy_ce += v1.noisy_ce;
            mean1.neg_entropy += v1.neg_entropy;
            mean1.kl_gauss += v1.kl_gauss;
            mean1.total += v1.total;
            mean2.recon += v2.recon;
            mean2.noisy_ce += v2.noisy_ce;
            mean2.neg_entropy += v2.neg_entropy;
            mean2.kl_gauss += v2.kl_gauss;
            mean2.total += v2.total;
            ct_mean1 += t.scalar(ct1);
            ct_mean2 += t.scalar(ct2);
            ++steps;
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.keep_fraction = keep;
        if (steps > 0) {
            const double inv = 1.0 / steps;
            for (double* v : {&mean1.recon, &mean1.noisy_ce, &mean1.neg_entropy, &mean1.kl_gauss,
                              &mean1.total, &mean2.recon, &mean2.noisy_ce, &mean2.neg_entropy,
                              &mean2.kl_gauss, &mean2.total})
                *v *= inv;
            ct_mean1 *= inv;
            ct_mean2 *= inv;
        }
        em.elbo1 = mean1;
        em.elbo2 = mean2;
        em.ce1 = ct_mean1;
        em.ce2 = ct_mean2;
        em.acc1 = detail::fraction_correct(predict(b1, test.instances), test.clean_labels);
        em.acc2 = detail::fraction_correct(predict(b2, test.instances), test.clean_labels);
        res.metrics.push_back(em);
    }
    return res;
}

// --- baselines -------------------------------------------------------------------

struct ClassifierResult {
    Classifier classifier;
    std::vector<EpochMetrics> metrics;
};

struct CoteachingResult {
    Classifier classifier1, classifier2;
    std::vector<EpochMetrics> metrics;
};

/// Plain cross-entropy on the noisy labels; shares the data pipeline and the
/// label-encoder architecture with CausalNL.
inline ClassifierResult train_ce(const NoisyDataset& train, const LabeledDataset& test,
                                 const TrainConfig& cfg) {
    cfg.validate();
    const BranchConfig bc = detail::branch_config(cfg, train);
    ClassifierResult res;
    res.classifier = make_classifier(bc, derive_seed(cfg.seed, 1));
    Classifier& cls = res.classifier;
    Adam adam(cls.parameters(), cfg.learning_rate);
    detail::DivergenceGuard guard;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double ce_sum = 0.0;
        int steps = 0;
        for (const auto& idx : batches(train.size(), cfg.batch_size, cfg.seed, epoch)) {
            Mat xb = detail::maybe_augment(gather_rows(train.instances, idx), train, cfg, epoch, steps);
            const std::vector<int> yb = detail::gather_labels(train.noisy_labels, idx);
            ad::Tape t;
            ad::Var loss = t.mean_all(ad::per_sample_ce(t, cls.logits(t, t.constant(xb)), yb));
            if (!guard.check_scalar(t.scalar(loss), "noisy_ce")) continue;
            adam.zero_grad();
            t.backward(loss);
            adam.step();
            ce_sum += t.scalar(loss);
            ++steps;
        }
        EpochMetrics em;
        em.epoch = epoch;
        em.ce1 = steps > 0 ? ce_sum / steps : 0.0;
        em.acc1 = detail::fraction_correct(predict(cls, test.instances), test.clean_labels);
        res.metrics.push_back(em);
    }
    return res;
}

/// Two peer classifiers exchanging small-loss subsets on the keep-rate
/// schedule; no generative components.
inline CoteachingResult train_coteaching(const NoisyDataset& train, const LabeledDataset& test,
                                         const TrainConfig& cfg) {
    cfg.validate();
    cfg.schedule.validate();
    const BranchConfig bc = detail::branch_config(cfg, train);
    CoteachingResult res;
    res.classifier1 = make_classifier(bc, derive_seed(cfg.seed, 1));
    res.classifier2 = make_classifier(bc, derive_seed(cfg.seed, 2));
    Classifier& c1 = res.classifier1;
    Classifier& c2 = res.classifier2;
    Adam adam1(c1.parameters(), cfg.learning_rate), adam2(c2.parameters(), cfg.learning_rate);
    detail::DivergenceGuard guard;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double keep = keep_rate(epoch, cfg.schedule);
        double ce_sum1 = 0.0, ce_sum2 = 0.0;
        int steps = 0;
        for (const auto& idx : batches(train.size(), cfg.batch_size, cfg.seed, epoch)) {
            Mat xb = detail::maybe_augment(gather_rows(train.instances, idx), train, cfg, epoch, steps);
            const std::vector<int> yb = detail::gather_labels(train.noisy_labels, idx);
            ad::Tape t;
            ad::Var ce1 = ad::per_sample_ce(t, c1.logits(t, t.constant(xb)), yb);
            ad::Var ce2 = ad::per_sample_ce(t, c2.logits(t, t.constant(xb)), yb);
            const std::vector<int> sel_by_1 = small_loss_select(detail::column(t.val(ce1)), keep);
            const std::vector<int> sel_by_2 = small_loss_select(detail::column(t.val(ce2)), keep);
            ad::Var loss1 = t.mean_all(t.select_rows(ce1, sel_by_2));
            ad::Var loss2 = t.mean_all(t.select_rows(ce2, sel_by_1));
            const bool ok = guard.check_scalar(t.scalar(loss1), "noisy_ce") &&
                            guard.check_scalar(t.scalar(loss2), "noisy_ce");
            if (!ok) continue;
            adam1.zero_grad();
            t.backward(loss1);
            adam1.step();
            adam2.zero_grad();
            t.backward(loss2);
            adam2.step();
            ce_sum1 += t.scalar(loss1);
            ce_sum2 += t.scalar(loss2);
            ++steps;
        }
        EpochMetrics em;
        em.epoch = epoch;
        em.keep_fraction = keep;
        em.ce1 = steps > 0 ? ce_sum1 / steps : 0.0;
        em.ce2 = steps > 0 ? ce_sum2 / steps : 0.0;
        em.acc1 = detail::fraction_correct(predict(c1, test.instances), test.clean_labels);
        em.acc2 = detail::fraction_correct(predict(c2, test.instances), test.clean_labels);
        res.metrics.push_back(em);
    }
    return res;
}

/// Forward correction: the classifier's clean posterior is pushed through the
/// (known, class-average) transition matrix and trained against noisy labels.
inline ClassifierResult train_forward(const NoisyDataset& train, const LabeledDataset& test,
                                      const TrainConfig& cfg, const TransitionMatrix& transition) {
    cfg.validate();
    transition.validate();
    if (transition.classes() != train.num_classes)
        throw std::invalid_argument("train_forward: transition matrix class count mismatch");
    const BranchConfig bc = detail::branch_config(cfg, train);
    ClassifierResult res;
    res.classifier = make_classifier(bc, derive_seed(cfg.seed, 1));
    Classifier& cls = res.classifier;
    Adam adam(cls.parameters(), cfg.learning_rate);
    detail::DivergenceGuard guard;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double ce_sum = 0.0;
        int steps = 0;
        for (const auto& idx : batches(train.size(), cfg.batch_size, cfg.seed, epoch)) {
            Mat xb = detail::maybe_augment(gather_rows(train.instances, idx), train, cfg, epoch, steps);
            const std::vector<int> yb = detail::gather_labels(train.noisy_labels, idx);
            ad::Tape t;
            ad::Var clean_posterior = t.row_softmax(cls.logits(t, t.constant(xb)));
            ad::Var noisy_posterior = t.matmul_const(clean_posterior, transition.entries);
            ad::Var loss =
                t.affine(t.mean_all(t.pick(t.log_(noisy_posterior), yb)), -1.0, 0.0);
            if (!guard.check_scalar(t.scalar(loss), "noisy_ce")) continue;
            adam.zero_grad();
            t.backward(loss);
            adam.step();
            ce_sum += t.scalar(loss);
            ++steps;
        }
        EpochMetrics em;
        em.epoch = epoch;
        em.ce1 = steps > 0 ? ce_sum / steps : 0.0;
        em.acc1 = detail::fraction_correct(predict(cls, test.instances), test.clean_labels);
        res.metrics.push_back(em);
    }
    return res;
}

// --- metric traces -------------------------------------------------------------

enum class MethodKind { CausalNl, Ce, Coteaching, Forward };

inline std::string to_string(MethodKind m) {
    switch (m) {
        case MethodKind::CausalNl: return "causalnl";
        case MethodKind::Ce: return "ce";
        case MethodKind::Coteaching: return "coteaching";
        case MethodKind::Forward: return "forward";
    }
    return "?";
}

inline MethodKind method_from_string(const std::string& s) {
    if (s == "causalnl") return MethodKind::CausalNl;
    if (s == "ce") return MethodKind::Ce;
    if (s == "coteaching") return MethodKind::Coteaching;
    if (s == "forward") return MethodKind::Forward;
    throw std::invalid_argument("unknown method: " + s);
}

inline std::string epoch_metrics_csv(const std::vector<EpochMetrics>& ms, MethodKind kind) {
    std::string out;
    char buf[512];
    auto num = [](double v) {
        char b[48];
        std::snprintf(b, sizeof(b), "%.17g", v);
        return std::string(b);
    };
    switch (kind) {
        case MethodKind::CausalNl:
            out = "epoch,keep_rate,acc1,acc2,recon1,noisy_ce1,neg_entropy1,kl_gauss1,total1,ct_ce1,"
                  "recon2,noisy_ce2,neg_entropy2,kl_gauss2,total2,ct_ce2\n";
            for (const auto& m : ms) {
                std::snprintf(buf, sizeof(buf), "%d,", m.epoch);
                out += buf;
                out += num(m.keep_fraction) + ',' + num(m.acc1) + ',' + num(m.acc2) + ',' +
                       num(m.elbo1.recon) + ',' + num(m.elbo1.noisy_ce) + ',' + num(m.elbo1.neg_entropy) +
                       ',' + num(m.elbo1.kl_gauss) + ',' + num(m.elbo1.total) + ',' + num(m.ce1) + ',' +
                       num(m.elbo2.recon) + ',' + num(m.elbo2.noisy_ce) + ',' + num(m.elbo2.neg_entropy) +
                       ',' + num(m.elbo2.kl_gauss) + ',' + num(m.elbo2.total) + ',' + num(m.ce2) + '\n';
            }
            break;
        case MethodKind::Coteaching:
            out = "epoch,keep_rate,acc1,acc2,ce1,ce2\n";
            for (const auto& m : ms) {
                std::snprintf(buf, sizeof(buf), "%d,", m.epoch);
                out += buf;
                out += num(m.keep_fraction) + ',' + num(m.acc1) + ',' + num(m.acc2) + ',' + num(m.ce1) +
                       ',' + num(m.ce2) + '\n';
            }
            break;
        default:
            out = "epoch,acc,ce\n";
            for (const auto& m : ms) {
                std::snprintf(buf, sizeof(buf), "%d,", m.epoch);
                out += buf;
                out += num(m.acc1) + ',' + num(m.ce1) + '\n';
            }
            break;
    }
    return out;
}

inline void write_epoch_metrics_csv(const std::vector<EpochMetrics>& ms, MethodKind kind,
                                    const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("metrics csv: cannot write " + path);
    out << epoch_metrics_csv(ms, kind);
}

} // namespace causalnl

#endif
