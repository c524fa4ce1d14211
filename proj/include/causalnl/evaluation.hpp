#ifndef CAUSALNL_EVALUATION_HPP
#define CAUSALNL_EVALUATION_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "causalnl/checkpoint.hpp"
#include "causalnl/datasets.hpp"
#include "causalnl/noise.hpp"
#include "causalnl/training.hpp"

namespace causalnl {

inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& truth) {
    if (predictions.empty() || predictions.size() != truth.size())
        throw std::invalid_argument("accuracy: label lists must be nonempty and equal length");
    int hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

/// Mean of the final min(k, length) values.
inline double last_k_mean(const std::vector<double>& series, int k) {
    if (series.empty()) throw std::invalid_argument("last_k_mean: empty series");
    if (k <= 0) throw std::invalid_argument("last_k_mean: k must be positive");
    const int n = static_cast<int>(series.size());
    const int take = std::min(k, n);
    double s = 0.0;
    for (int i = n - take; i < n; ++i) s += series[i];
    return s / take;
}

inline double sample_std(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); }))
        return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

/// One (method, repeat) training run, as persisted by the experiment driver.
struct RunResult {
    std::string method;
    std::string dataset;
    NoiseKind noise_kind = NoiseKind::InstanceDependent;
    double rate = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> epoch_acc; // branch-1 / classifier test accuracy per epoch
    double final_acc = 0.0;
    double last10_acc = 0.0;
    double last10_std = 0.0; // across the last-10 epoch window
    double last10_acc_branch2 = std::numeric_limits<double>::quiet_NaN();
    double wall_time_s = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j{{"method", method},       {"dataset", dataset},
                         {"noise_kind", to_string(noise_kind)}, {"rate", rate},
                         {"seed", seed},           {"final_acc", final_acc},
                         {"last10_acc", last10_acc}, {"last10_std", last10_std},
                         {"wall_time_s", wall_time_s}, {"epoch_acc", epoch_acc}};
        if (std::isfinite(last10_acc_branch2)) j["last10_acc_branch2"] = last10_acc_branch2;
        return j;
    }

    static RunResult from_json(const nlohmann::json& j) {
        RunResult r;
        r.method = j.at("method").get<std::string>();
        r.dataset = j.at("dataset").get<std::string>();
        r.noise_kind = noise_kind_from_string(j.at("noise_kind").get<std::string>());
        r.rate = j.at("rate").get<double>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.final_acc = j.at("final_acc").get<double>();
        r.last10_acc = j.at("last10_acc").get<double>();
        r.last10_std = j.value("last10_std", 0.0);
        r.wall_time_s = j.value("wall_time_s", 0.0);
        r.epoch_acc = j.at("epoch_acc").get<std::vector<double>>();
        if (j.contains("last10_acc_branch2")) r.last10_acc_branch2 = j["last10_acc_branch2"].get<double>();
        return r;
    }
};

struct GroupStat {
    std::string method;
    double rate = 0.0;
    int repeats = 0;
    double mean = 0.0;
    double std = 0.0;
};

/// Mean and sample standard deviation of last-10 accuracy per (method, rate).
inline std::vector<GroupStat> aggregate(const std::vector<RunResult>& results) {
    if (results.empty()) throw std::invalid_argument("aggregate: no results");
    std::map<std::pair<std::string, double>, std::vector<double>> groups;
    for (const auto& r : results) groups[{r.method, r.rate}].push_back(r.last10_acc);
    std::vector<GroupStat> out;
    for (const auto& [key, vals] : groups) {
        GroupStat g;
        g.method = key.first;
        g.rate = key.second;
        g.repeats = static_cast<int>(vals.size());
        for (double v : vals) g.mean += v;
        g.mean /= static_cast<double>(vals.size());
        g.std = sample_std(vals);
        out.push_back(g);
    }
    return out;
}

inline std::string aggregate_csv(const std::vector<GroupStat>& stats) {
    std::string out = "method,rate,repeats,mean_last10,std_last10\n";
    char buf[160];
    for (const auto& g : stats) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%d,%.17g,%.17g\n", g.method.c_str(), g.rate, g.repeats,
                      g.mean, g.std);
        out += buf;
    }
    return out;
}

// --- experiment driver ---------------------------------------------------------

struct DatasetSpec {
    std::string kind = "moon"; // "moon" or "idx"
    // moon
    int train_n = 3000;
    int test_n = 1000;
    double noise_std = 0.1;
    std::uint64_t seed = 7;
    // idx
    std::string train_images, train_labels, test_images, test_labels;
    int limit = 0; // 0 = all

    static DatasetSpec from_json(const nlohmann::json& j) {
        DatasetSpec d;
        d.kind = j.at("kind").get<std::string>();
        if (d.kind == "moon") {
            d.train_n = j.value("train_n", 3000);
            d.test_n = j.value("test_n", 1000);
            d.noise_std = j.value("noise_std", 0.1);
            d.seed = j.value("seed", std::uint64_t(7));
        } else if (d.kind == "idx") {
            d.train_images = j.at("train_images").get<std::string>();
            d.train_labels = j.at("train_labels").get<std::string>();
            d.test_images = j.at("test_images").get<std::string>();
            d.test_labels = j.at("test_labels").get<std::string>();
            d.limit = j.value("limit", 0);
        } else {
            throw std::invalid_argument("dataset spec: unknown kind " + d.kind);
        }
        return d;
    }
};

struct SplitData {
    LabeledDataset train, test;
};

inline SplitData load_split(const DatasetSpec& spec) {
    SplitData s;
    if (spec.kind == "moon") {
        s.train = generate_moon(spec.train_n, spec.noise_std, spec.seed);
        s.test = generate_moon(spec.test_n, spec.noise_std, derive_seed(spec.seed, 0x7e57));
    } else {
        s.train = load_idx(spec.train_images, spec.train_labels);
        s.test = load_idx(spec.test_images, spec.test_labels);
        if (spec.limit > 0 && spec.limit < s.train.size()) s.train = take_prefix(s.train, spec.limit);
        const int c = std::max(s.train.num_classes, s.test.num_classes);
        s.train.num_classes = c;
        s.test.num_classes = c;
    }
    return s;
}

struct ExperimentConfig {
    DatasetSpec dataset;
    NoiseSpec noise;
    std::vector<std::string> methods{"causalnl", "ce"};
    int repeats = 5;
    std::uint64_t base_seed = 1;
    TrainConfig train;
    std::string out_dir;

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        c.dataset = DatasetSpec::from_json(j.at("dataset"));
        const auto& jn = j.at("noise");
        c.noise.kind = noise_kind_from_string(jn.at("kind").get<std::string>());
        c.noise.rate = jn.at("rate").get<double>();
        c.noise.flip_std = jn.value("flip_std", 0.1);
        c.methods = j.at("methods").get<std::vector<std::string>>();
        c.repeats = j.value("repeats", 5);
        c.base_seed = j.value("base_seed", std::uint64_t(1));
        if (j.contains("train")) {
            const auto& jt = j["train"];
            c.train.epochs = jt.value("epochs", c.train.epochs);
            c.train.batch_size = jt.value("batch_size", c.train.batch_size);
            c.train.learning_rate = jt.value("learning_rate", c.train.learning_rate);
            c.train.latent_dim = jt.value("latent_dim", c.train.latent_dim);
            if (jt.contains("preset")) c.train.preset = preset_from_string(jt["preset"].get<std::string>());
            c.train.augment = jt.value("augment", false);
            if (jt.contains("betas")) {
                const auto b = jt["betas"].get<std::vector<double>>();
                if (b.size() != 4) throw std::invalid_argument("train config: betas must have 4 entries");
                c.train.weights = ElboWeights{b[0], b[1], b[2], b[3]};
            }
            c.train.schedule.warmup_epochs = jt.value("warmup_epochs", c.train.schedule.warmup_epochs);
        }
        c.out_dir = j.at("out_dir").get<std::string>();
        return c;
    }

    void validate() const {
        if (repeats < 1) throw std::invalid_argument("experiment: repeats must be >= 1");
        if (methods.empty()) throw std::invalid_argument("experiment: no methods listed");
        for (const auto& m : methods) method_from_string(m);
        if (out_dir.empty()) throw std::invalid_argument("experiment: out_dir required");
    }
};

/// Output root override: relative paths are resolved under $CAUSALNL_OUT_ROOT
/// when the variable is set.
inline std::filesystem::path resolve_out_path(const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("CAUSALNL_OUT_ROOT")) return std::filesystem::path(root) / p;
    return p;
}

/// Runs one (method, repeat) training and summarizes it.
inline RunResult run_single(const std::string& method, const NoisyDataset& sealed_train,
                            const LabeledDataset& test, const TrainConfig& cfg,
                            const TransitionMatrix& transition, const std::string& dataset_name,
                            const NoiseSpec& noise, std::vector<EpochMetrics>* metrics_out = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<EpochMetrics> metrics;
    double last10_b2 = std::numeric_limits<double>::quiet_NaN();
    const MethodKind kind = method_from_string(method);
    switch (kind) {
        case MethodKind::CausalNl: {
            auto r = train_causalnl(sealed_train, test, cfg);
            metrics = std::move(r.metrics);
            std::vector<double> acc2;
            for (const auto& m : metrics) acc2.push_back(m.acc2);
            last10_b2 = last_k_mean(acc2, 10);
            break;
        }
        case MethodKind::Ce: {
            auto r = train_ce(sealed_train, test, cfg);
            metrics = std::move(r.metrics);
            break;
        }
        case MethodKind::Coteaching: {
            auto r = train_coteaching(sealed_train, test, cfg);
            metrics = std::move(r.metrics);
            std::vector<double> acc2;
            for (const auto& m : metrics) acc2.push_back(m.acc2);
            last10_b2 = last_k_mean(acc2, 10);
            break;
        }
        case MethodKind::Forward: {
            auto r = train_forward(sealed_train, test, cfg, transition);
            metrics = std::move(r.metrics);
            break;
        }
    }
    const auto t1 = std::chrono::steady_clock::now();

    RunResult res;
    res.method = method;
    res.dataset = dataset_name;
    res.noise_kind = noise.kind;
    res.rate = noise.rate;
    res.seed = cfg.seed;
    for (const auto& m : metrics) res.epoch_acc.push_back(m.acc1);
    res.final_acc = res.epoch_acc.back();
    res.last10_acc = last_k_mean(res.epoch_acc, 10);
    {
        const int n = static_cast<int>(res.epoch_acc.size());
        const int take = std::min(10, n);
        std::vector<double> window(res.epoch_acc.end() - take, res.epoch_acc.end());
        res.last10_std = sample_std(window);
    }
    res.last10_acc_branch2 = last10_b2;
    res.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
    if (metrics_out) *metrics_out = std::move(metrics);
    return res;
}

/// The full protocol: per repeat, freeze one noise realization and train
/// every method on it; persist per-run results and aggregate tables.
inline std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, bool force = false) {
    cfg.validate();
    const std::filesystem::path out = resolve_out_path(cfg.out_dir);
    if (std::filesystem::exists(out) && !std::filesystem::is_empty(out) && !force)
        throw std::runtime_error("experiment: output directory " + out.string() +
                                 " already has content (use force to overwrite)");
    std::filesystem::create_directories(out);

    const SplitData split = load_split(cfg.dataset);
    split.train.validate();
    split.test.validate();

    std::vector<RunResult> results;
    for (int rep = 0; rep < cfg.repeats; ++rep) {
        const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(rep);
        NoiseSpec noise = cfg.noise;
        noise.seed = seed;
        const NoisyDataset frozen = synthesize_noise(split.train, noise);
        write_noise_csv(frozen, (out / ("noise_r" + std::to_string(rep) + ".csv")).string());
        const TransitionMatrix transition =
            empirical_transition(frozen.clean_labels(), frozen.noisy_labels, frozen.num_classes);
        // Seal clean labels before anything touches a trainer.
        const NoisyDataset sealed(split.train, frozen.noisy_labels, false);

        for (const auto& method : cfg.methods) {
            TrainConfig tc = cfg.train;
            tc.seed = seed;
            tc.schedule.rho = cfg.noise.rate;
            std::vector<EpochMetrics> metrics;
            RunResult r = run_single(method, sealed, split.test, tc, transition, split.train.name,
                                     noise, &metrics);
            results.push_back(r);
            const std::string stem = method + "_r" + std::to_string(rep);
            std::ofstream js(out / ("result_" + stem + ".json"));
            js << r.to_json().dump(2) << '\n';
            write_epoch_metrics_csv(metrics, method_from_string(method),
                                    (out / ("metrics_" + stem + ".csv")).string());
        }
    }

    const auto stats = aggregate(results);
    std::ofstream csv(out / "aggregate.csv");
    csv << aggregate_csv(stats);
    nlohmann::json jagg = nlohmann::json::array();
    for (const auto& g : stats)
        jagg.push_back({{"method", g.method},
                        {"rate", g.rate},
                        {"repeats", g.repeats},
                        {"mean_last10", g.mean},
                        {"std_last10", g.std}});
    std::ofstream js(out / "aggregate.json");
    js << jagg.dump(2) << '\n';
    return results;
}

} // namespace causalnl

#endif
