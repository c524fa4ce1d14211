#ifndef CAUSALNL_NOISE_HPP
#define CAUSALNL_NOISE_HPP

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "causalnl/common.hpp"
#include "causalnl/datasets.hpp"
#include "causalnl/matrix.hpp"

namespace causalnl {

/// Row-stochastic C x C matrix; entry (i, j) is P(noisy = j | clean = i).
struct TransitionMatrix {
    Mat entries;

    int classes() const { return entries.rows; }

    void validate() const {
        if (entries.rows < 2 || entries.rows != entries.cols)
            throw std::invalid_argument("transition matrix: must be square, C >= 2");
        for (int i = 0; i < entries.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < entries.cols; ++j) {
                if (entries(i, j) < 0.0) throw std::invalid_argument("transition matrix: negative entry");
                s += entries(i, j);
            }
            if (std::fabs(s - 1.0) > 1e-8)
                throw std::invalid_argument("transition matrix: row does not sum to 1");
        }
    }

    static TransitionMatrix identity(int c) {
        TransitionMatrix t;
        t.entries = Mat(c, c);
        for (int i = 0; i < c; ++i) t.entries(i, i) = 1.0;
        return t;
    }

    /// Diagonal 1-rho, off-diagonal rho/(C-1).
    static TransitionMatrix symmetric(int c, double rho) {
        TransitionMatrix t;
        t.entries = Mat(c, c);
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < c; ++j) t.entries(i, j) = i == j ? 1.0 - rho : rho / (c - 1);
        return t;
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"classes", classes()}, {"entries", entries.d}};
    }

    static TransitionMatrix from_json(const nlohmann::json& j) {
        TransitionMatrix t;
        const int c = j.at("classes").get<int>();
        t.entries = Mat(c, c);
        const auto v = j.at("entries").get<std::vector<double>>();
        if (v.size() != t.entries.d.size()) throw FormatError("transition matrix: wrong entry count");
        t.entries.d.assign(v.begin(), v.end());
        t.validate();
        return t;
    }
};

enum class NoiseKind { InstanceDependent, Symmetric, PairFlip };

inline std::string to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::InstanceDependent: return "instance";
        case NoiseKind::Symmetric: return "symmetric";
        case NoiseKind::PairFlip: return "pairflip";
    }
    return "?";
}

inline NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "instance" || s == "instance-dependent") return NoiseKind::InstanceDependent;
    if (s == "symmetric") return NoiseKind::Symmetric;
    if (s == "pairflip") return NoiseKind::PairFlip;
    throw std::invalid_argument("unknown noise kind: " + s);
}

struct NoiseSpec {
    NoiseKind kind = NoiseKind::InstanceDependent;
    double rate = 0.0;
    std::uint64_t seed = 0;
    double flip_std = 0.1; // instance-dependent only

    void validate() const {
        if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("noise: rate must be in [0, 1)");
        if (flip_std < 0.0) throw std::invalid_argument("noise: flip_std must be >= 0");
    }
};

struct InstanceNoiseResult {
    NoisyDataset dataset;
    Mat flip_distributions; // N x C, row i is the sampling distribution for instance i
};

/// Instance-dependent corruption: per-instance flip mass from a truncated
/// normal around the target rate, distributed over wrong classes by a random
/// linear projection of the instance through a softmax.
inline InstanceNoiseResult synthesize_instance_noise(const LabeledDataset& ds, const NoiseSpec& spec) {
    if (spec.kind != NoiseKind::InstanceDependent)
        throw std::invalid_argument("synthesize_instance_noise: spec.kind must be instance-dependent");
    spec.validate();
    ds.validate();
    const int n = ds.size(), m = ds.feature_dim(), c = ds.num_classes;

    InstanceNoiseResult res;
    res.flip_distributions = Mat(n, c);
    if (spec.rate == 0.0) {
        // The truncated normal at mean 0 still has mass above 0; rate 0 is
        // defined as exactly clean instead.
        for (int i = 0; i < n; ++i) res.flip_distributions(i, ds.clean_labels[i]) = 1.0;
        res.dataset = NoisyDataset(ds, ds.clean_labels, true);
        return res;
    }

    Rng rng = make_rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat proj(m, c);
    for (double& v : proj.d) v = gauss(rng);

    std::normal_distribution<double> qdist(spec.rate, spec.flip_std);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<int> noisy(n);
    std::vector<double> scores(c);
    for (int i = 0; i < n; ++i) {
        double q = spec.rate;
        if (spec.flip_std > 0.0) {
            do {
                q = qdist(rng);
            } while (q < 0.0 || q > 1.0);
        }
        const int clean = ds.clean_labels[i];
        const double* x = ds.instances.row_ptr(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < c; ++j) {
            double s = 0.0;
            for (int k = 0; k < m; ++k) s += x[k] * proj(k, j);
            scores[j] = s;
            if (j != clean) mx = std::max(mx, s);
        }
        double z = 0.0;
        for (int j = 0; j < c; ++j) {
            if (j == clean) {
                scores[j] = 0.0;
                continue;
            }
            scores[j] = std::exp(scores[j] - mx);
            z += scores[j];
        }
        double* dist = res.flip_distributions.row_ptr(i);
        for (int j = 0; j < c; ++j) dist[j] = j == clean ? 1.0 - q : q * scores[j] / z;

        double r = u(rng), acc = 0.0;
        int pick = c - 1;
        for (int j = 0; j < c; ++j) {
            acc += dist[j];
            if (r < acc) {
                pick = j;
                break;
            }
        }
        noisy[i] = pick;
    }
    res.dataset = NoisyDataset(ds, std::move(noisy), true);
    return res;
}

/// Class-dependent corruption: flip with probability rate to a uniformly
/// random other class.
inline NoisyDataset synthesize_symmetric_noise(const LabeledDataset& ds, const NoiseSpec& spec) {
    if (spec.kind != NoiseKind::Symmetric)
        throw std::invalid_argument("synthesize_symmetric_noise: spec.kind must be symmetric");
    spec.validate();
    ds.validate();
    Rng rng = make_rng(spec.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> other(0, ds.num_classes - 2);
    std::vector<int> noisy = ds.clean_labels;
    for (int i = 0; i < ds.size(); ++i) {
        if (u(rng) < spec.rate) {
            int j = other(rng);
            if (j >= noisy[i]) ++j;
            noisy[i] = j;
        }
    }
    return NoisyDataset(ds, std::move(noisy), true);
}

/// Flip with probability rate to the next class (mod C).
inline NoisyDataset synthesize_pairflip_noise(const LabeledDataset& ds, const NoiseSpec& spec) {
    if (spec.kind != NoiseKind::PairFlip)
        throw std::invalid_argument("synthesize_pairflip_noise: spec.kind must be pairflip");
    spec.validate();
    ds.validate();
    Rng rng = make_rng(spec.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<int> noisy = ds.clean_labels;
    for (int i = 0; i < ds.size(); ++i)
        if (u(rng) < spec.rate) noisy[i] = (noisy[i] + 1) % ds.num_classes;
    return NoisyDataset(ds, std::move(noisy), true);
}

inline NoisyDataset synthesize_noise(const LabeledDataset& ds, const NoiseSpec& spec) {
    switch (spec.kind) {
        case NoiseKind::InstanceDependent: return synthesize_instance_noise(ds, spec).dataset;
        case NoiseKind::Symmetric: return synthesize_symmetric_noise(ds, spec);
        case NoiseKind::PairFlip: return synthesize_pairflip_noise(ds, spec);
    }
    throw std::invalid_argument("synthesize_noise: unknown kind");
}

/// Row i = empirical distribution of noisy labels among samples whose clean
/// label is i; rows with no support fall back to uniform.
inline TransitionMatrix empirical_transition(const std::vector<int>& clean_labels,
                                             const std::vector<int>& noisy_labels, int num_classes) {
    if (clean_labels.size() != noisy_labels.size())
        throw std::invalid_argument("empirical_transition: label arrays differ in length");
    if (num_classes < 2) throw std::invalid_argument("empirical_transition: need C >= 2");
    TransitionMatrix t;
    t.entries = Mat(num_classes, num_classes);
    std::vector<double> support(num_classes, 0.0);
    for (std::size_t i = 0; i < clean_labels.size(); ++i) {
        const int a = clean_labels[i], b = noisy_labels[i];
        if (a < 0 || a >= num_classes || b < 0 || b >= num_classes)
            throw std::invalid_argument("empirical_transition: label out of range");
        t.entries(a, b) += 1.0;
        support[a] += 1.0;
    }
    for (int i = 0; i < num_classes; ++i) {
        if (support[i] == 0.0) {
            for (int j = 0; j < num_classes; ++j) t.entries(i, j) = 1.0 / num_classes;
        } else {
            for (int j = 0; j < num_classes; ++j) t.entries(i, j) /= support[i];
        }
    }
    return t;
}

/// Noisy posterior from a clean posterior: out_j = sum_i T_ij * p_i.
inline std::vector<double> apply_transition(const TransitionMatrix& t, const std::vector<double>& p) {
    if (static_cast<int>(p.size()) != t.classes())
        throw std::invalid_argument("apply_transition: dimension mismatch");
    double s = 0.0;
    for (double v : p) s += v;
    if (std::fabs(s - 1.0) > 1e-8)
        throw std::invalid_argument("apply_transition: posterior does not sum to 1");
    std::vector<double> out(p.size(), 0.0);
    for (int i = 0; i < t.classes(); ++i)
        for (int j = 0; j < t.classes(); ++j) out[j] += t.entries(i, j) * p[i];
    return out;
}

// --- frozen noise realizations ----------------------------------------------

inline void write_noise_csv(const NoisyDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("noise csv: cannot write " + path);
    out << "index,clean,noisy\n";
    const auto& clean = ds.clean_labels();
    for (int i = 0; i < ds.size(); ++i)
        out << i << ',' << clean[i] << ',' << ds.noisy_labels[i] << '\n';
}

/// Re-applies a frozen noise realization to its source dataset. The clean
/// column must match the dataset, otherwise the file belongs to other data.
inline NoisyDataset read_noise_csv(const LabeledDataset& ds, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("noise csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "index,clean,noisy")
        throw FormatError("noise csv: bad header in " + path);
    std::vector<int> noisy(ds.size(), -1);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        int idx, clean, nz;
        char comma;
        if (!(ss >> idx >> comma >> clean >> comma >> nz))
            throw FormatError("noise csv: bad row in " + path);
        if (idx < 0 || idx >= ds.size()) throw ConsistencyError("noise csv: index out of range");
        if (clean != ds.clean_labels[idx])
            throw ConsistencyError("noise csv: clean label mismatch at index " + std::to_string(idx));
        noisy[idx] = nz;
    }
    for (int v : noisy)
        if (v < 0) throw ConsistencyError("noise csv: missing rows for dataset");
    return NoisyDataset(ds, std::move(noisy), true);
}

} // namespace causalnl

#endif
