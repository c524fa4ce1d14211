// Command-line front end: data prep, noise freezing, training, the full
// benchmark protocol, decision-boundary plots, and result aggregation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "causalnl/causalnl.hpp"

namespace fs = std::filesystem;
using namespace causalnl;

namespace {

struct DatasetArgs {
    std::string kind = "moon";
    int train_n = 3000;
    int test_n = 1000;
    double noise_std = 0.1;
    std::uint64_t seed = 7;
    std::string train_images, train_labels, test_images, test_labels;
    int limit = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--dataset", kind, "Dataset kind: moon or idx")->capture_default_str();
        cmd->add_option("--train-n", train_n, "Moon: training points")->capture_default_str();
        cmd->add_option("--test-n", test_n, "Moon: test points")->capture_default_str();
        cmd->add_option("--moon-std", noise_std, "Moon: jitter std")->capture_default_str();
        cmd->add_option("--data-seed", seed, "Moon: generator seed")->capture_default_str();
        cmd->add_option("--train-images", train_images, "IDX: training image file");
        cmd->add_option("--train-labels", train_labels, "IDX: training label file");
        cmd->add_option("--test-images", test_images, "IDX: test image file");
        cmd->add_option("--test-labels", test_labels, "IDX: test label file");
        cmd->add_option("--limit", limit, "IDX: cap on training samples (0 = all)");
    }

    DatasetSpec spec() const {
        DatasetSpec d;
        d.kind = kind;
        d.train_n = train_n;
        d.test_n = test_n;
        d.noise_std = noise_std;
        d.seed = seed;
        d.train_images = train_images;
        d.train_labels = train_labels;
        d.test_images = test_images;
        d.test_labels = test_labels;
        d.limit = limit;
        return d;
    }
};

void cmd_gen_data(const DatasetArgs& data, const std::string& out, const std::string& out_images,
                  const std::string& out_labels) {
    if (data.kind == "moon") {
        const LabeledDataset ds = generate_moon(data.train_n, data.noise_std, data.seed);
        const fs::path path = resolve_out_path(out.empty() ? "moon.csv" : out);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_moon_csv(NoisyDataset(ds, ds.clean_labels, true), path.string());
        std::cout << "wrote " << path.string() << " (" << ds.size() << " points)\n";
    } else if (data.kind == "idx") {
        LabeledDataset ds = load_idx(data.train_images, data.train_labels);
        if (data.limit > 0 && data.limit < ds.size()) ds = take_prefix(ds, data.limit);
        const fs::path ip = resolve_out_path(out_images), lp = resolve_out_path(out_labels);
        if (ip.has_parent_path()) fs::create_directories(ip.parent_path());
        if (lp.has_parent_path()) fs::create_directories(lp.parent_path());
        save_idx(ds, ip.string(), lp.string());
        std::cout << "wrote " << ip.string() << " and " << lp.string() << " (" << ds.size()
                  << " images)\n";
    } else {
        throw CLI::ValidationError("--dataset must be moon or idx");
    }
}

NoisyDataset synthesize_for_cli(const LabeledDataset& ds, NoiseKind kind, double rate,
                                std::uint64_t seed, double flip_std) {
    NoiseSpec spec;
    spec.kind = kind;
    spec.rate = rate;
    spec.seed = seed;
    spec.flip_std = flip_std;
    return synthesize_noise(ds, spec);
}

void cmd_gen_noise(const std::string& dataset_csv, const DatasetArgs& data, const std::string& kind,
                   double rate, std::uint64_t seed, double flip_std, const std::string& out,
                   const std::string& transition_out) {
    LabeledDataset ds;
    if (!dataset_csv.empty()) {
        const NoisyDataset base = read_moon_csv(dataset_csv);
        ds.instances = base.instances;
        ds.clean_labels = base.clean_labels();
        ds.num_classes = base.num_classes;
        ds.name = base.name;
    } else {
        ds = load_split(data.spec()).train;
    }
    const NoisyDataset noisy = synthesize_for_cli(ds, noise_kind_from_string(kind), rate, seed, flip_std);
    const fs::path path = resolve_out_path(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_noise_csv(noisy, path.string());
    std::cout << "wrote " << path.string() << '\n';
    if (!transition_out.empty()) {
        const TransitionMatrix t =
            empirical_transition(noisy.clean_labels(), noisy.noisy_labels, noisy.num_classes);
        const fs::path tp = resolve_out_path(transition_out);
        std::ofstream(tp) << t.to_json().dump(2) << '\n';
        std::cout << "wrote " << tp.string() << '\n';
    }
}

void cmd_train(const std::string& method, const DatasetArgs& data, const std::string& noise_kind,
               double rate, double flip_std, std::uint64_t seed, int epochs, int latent_dim,
               const std::string& preset, int batch_size, double lr, int warmup, bool augmented,
               const std::string& out, bool step_log) {
    const SplitData split = load_split(data.spec());
    const NoisyDataset frozen =
        synthesize_for_cli(split.train, noise_kind_from_string(noise_kind), rate, seed, flip_std);
    const TransitionMatrix transition =
        empirical_transition(frozen.clean_labels(), frozen.noisy_labels, frozen.num_classes);
    const NoisyDataset sealed(split.train, frozen.noisy_labels, false);

    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.learning_rate = lr;
    cfg.latent_dim = latent_dim;
    cfg.seed = seed;
    cfg.preset = preset_from_string(preset);
    cfg.schedule.rho = rate;
    cfg.schedule.warmup_epochs = warmup;
    cfg.augment = augmented;

    const fs::path dir = resolve_out_path(out);
    fs::create_directories(dir);
    write_noise_csv(frozen, (dir / "noise.csv").string());

    std::ofstream steps;
    StepLogger logger;
    if (step_log) {
        steps.open(dir / "steps.csv");
        steps << "epoch,step,branch,recon,noisy_ce,neg_entropy,kl_gauss,total\n";
        logger = [&steps](int epoch, int step, int branch, const ElboBreakdown& b) {
            char buf[256];
            std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", epoch, step,
                          branch, b.recon, b.noisy_ce, b.neg_entropy, b.kl_gauss, b.total);
            steps << buf;
        };
    }

    const MethodKind kind = method_from_string(method);
    std::vector<EpochMetrics> metrics;
    RunResult result;
    if (kind == MethodKind::CausalNl) {
        CausalnlResult r = train_causalnl(sealed, split.test, cfg, logger);
        metrics = r.metrics;
        save_checkpoint(r.branch1, (dir / "branch1.ckpt").string());
        save_checkpoint(r.branch2, (dir / "branch2.ckpt").string());
    } else if (kind == MethodKind::Ce) {
        ClassifierResult r = train_ce(sealed, split.test, cfg);
        metrics = r.metrics;
        save_checkpoint(r.classifier, (dir / "classifier.ckpt").string());
    } else if (kind == MethodKind::Coteaching) {
        CoteachingResult r = train_coteaching(sealed, split.test, cfg);
        metrics = r.metrics;
        save_checkpoint(r.classifier1, (dir / "classifier1.ckpt").string());
        save_checkpoint(r.classifier2, (dir / "classifier2.ckpt").string());
    } else {
        ClassifierResult r = train_forward(sealed, split.test, cfg, transition);
        metrics = r.metrics;
        save_checkpoint(r.classifier, (dir / "classifier.ckpt").string());
        std::ofstream(dir / "transition.json") << transition.to_json().dump(2) << '\n';
    }
    write_epoch_metrics_csv(metrics, kind, (dir / "metrics.csv").string());

    std::vector<double> acc;
    for (const auto& m : metrics) acc.push_back(m.acc1);
    NoiseSpec spec;
    spec.kind = noise_kind_from_string(noise_kind);
    spec.rate = rate;
    nlohmann::json summary{{"method", method},
                           {"dataset", split.train.name},
                           {"noise_kind", noise_kind},
                           {"rate", rate},
                           {"seed", seed},
                           {"final_acc", acc.back()},
                           {"last10_acc", last_k_mean(acc, 10)}};
    std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
    std::cout << "method " << method << ": final_acc " << acc.back() << ", last10 "
              << last_k_mean(acc, 10) << '\n'
              << "results in " << dir.string() << '\n';
}

void cmd_bench(const std::string& config_path, bool force) {
    std::ifstream in(config_path);
    if (!in) throw FormatError("bench: cannot open config " + config_path);
    const ExperimentConfig cfg = ExperimentConfig::from_json(nlohmann::json::parse(in));
    const auto results = run_experiment(cfg, force);
    for (const auto& g : aggregate(results)) {
        std::cout << g.method << " @ rate " << g.rate << ": " << g.mean * 100.0 << " +- "
                  << g.std * 100.0 << " (" << g.repeats << " repeats)\n";
    }
    std::cout << "results in " << resolve_out_path(cfg.out_dir).string() << '\n';
}

void cmd_plot(const std::string& checkpoint, const std::string& dataset_csv, const DatasetArgs& data,
              int grid, const std::string& out) {
    LabeledDataset ds;
    if (!dataset_csv.empty()) {
        const NoisyDataset base = read_moon_csv(dataset_csv);
        ds.instances = base.instances;
        ds.clean_labels = base.clean_labels();
        ds.num_classes = base.num_classes;
        ds.name = base.name;
    } else {
        ds = generate_moon(data.test_n, data.noise_std, data.seed);
    }
    const fs::path path = resolve_out_path(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto model = load_any_checkpoint(checkpoint);
    std::visit([&](auto& m) { plot_decision_boundary(m, ds, grid, path.string()); }, model);
    std::cout << "wrote " << path.string() << '\n';
}

void cmd_report(const std::string& dir, const std::string& out_csv) {
    const fs::path root = resolve_out_path(dir);
    std::vector<RunResult> results;
    for (const auto& entry : fs::directory_iterator(root)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("result_", 0) == 0 && entry.path().extension() == ".json") {
            std::ifstream in(entry.path());
            results.push_back(RunResult::from_json(nlohmann::json::parse(in)));
        }
    }
    if (results.empty()) throw std::runtime_error("report: no result_*.json files in " + root.string());
    std::sort(results.begin(), results.end(), [](const RunResult& a, const RunResult& b) {
        return std::tie(a.method, a.seed) < std::tie(b.method, b.seed);
    });
    const auto stats = aggregate(results);
    std::cout << "method,rate,repeats,mean_last10,std_last10\n";
    for (const auto& g : stats)
        std::cout << g.method << ',' << g.rate << ',' << g.repeats << ',' << g.mean << ',' << g.std
                  << '\n';
    if (!out_csv.empty()) {
        const fs::path path = resolve_out_path(out_csv);
        std::ofstream(path) << aggregate_csv(stats);
        std::cout << "wrote " << path.string() << '\n';
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Instance-dependent label-noise learning with a dual-branch causal VAE"};
    app.require_subcommand(1);

    // gen-data
    auto* gen_data = app.add_subcommand("gen-data", "Generate or subset datasets");
    DatasetArgs gd_data;
    std::string gd_out, gd_out_images, gd_out_labels;
    gd_data.attach(gen_data);
    gen_data->add_option("--out", gd_out, "Moon: output CSV path");
    gen_data->add_option("--out-images", gd_out_images, "IDX: output image file");
    gen_data->add_option("--out-labels", gd_out_labels, "IDX: output label file");

    // gen-noise
    auto* gen_noise = app.add_subcommand("gen-noise", "Freeze a noise realization to CSV");
    DatasetArgs gn_data;
    std::string gn_csv, gn_kind = "instance", gn_out = "noise.csv", gn_tout;
    double gn_rate = 0.45, gn_flip_std = 0.1;
    std::uint64_t gn_seed = 1;
    gn_data.attach(gen_noise);
    gen_noise->add_option("--dataset-csv", gn_csv, "Apply to a moon CSV instead of --dataset");
    gen_noise->add_option("--kind", gn_kind, "instance | symmetric | pairflip")->capture_default_str();
    gen_noise->add_option("--rate", gn_rate, "Target noise rate")->capture_default_str();
    gen_noise->add_option("--flip-std", gn_flip_std, "Instance noise flip-mass std")
        ->capture_default_str();
    gen_noise->add_option("--seed", gn_seed, "Noise seed")->capture_default_str();
    gen_noise->add_option("--out", gn_out, "Output CSV")->capture_default_str();
    gen_noise->add_option("--transition-out", gn_tout, "Also write the class-average matrix (JSON)");

    // train
    auto* train = app.add_subcommand("train", "Train one method on one noise realization");
    DatasetArgs tr_data;
    std::string tr_method = "causalnl", tr_kind = "instance", tr_preset = "mlp-2d", tr_out = "run";
    double tr_rate = 0.45, tr_flip_std = 0.1, tr_lr = 1e-3;
    std::uint64_t tr_seed = 1;
    int tr_epochs = 100, tr_latent = 1, tr_batch = 128, tr_warmup = 10;
    bool tr_augment = false, tr_steplog = false;
    tr_data.attach(train);
    train->add_option("--method", tr_method, "causalnl | ce | coteaching | forward")
        ->capture_default_str();
    train->add_option("--noise-kind", tr_kind, "instance | symmetric | pairflip")
        ->capture_default_str();
    train->add_option("--noise-rate", tr_rate, "Target noise rate")->capture_default_str();
    train->add_option("--flip-std", tr_flip_std, "Instance noise flip-mass std")->capture_default_str();
    train->add_option("--seed", tr_seed, "Training + noise seed")->capture_default_str();
    train->add_option("--epochs", tr_epochs, "Epochs")->capture_default_str();
    train->add_option("--latent-dim", tr_latent, "Latent dimension J")->capture_default_str();
    train->add_option("--preset", tr_preset, "mlp-2d | conv-small")->capture_default_str();
    train->add_option("--batch-size", tr_batch, "Batch size")->capture_default_str();
    train->add_option("--learning-rate", tr_lr, "Adam learning rate")->capture_default_str();
    train->add_option("--warmup-epochs", tr_warmup, "Keep-rate warmup Tk")->capture_default_str();
    train->add_flag("--augment", tr_augment, "Random-crop + horizontal-flip augmentation");
    train->add_flag("--step-log", tr_steplog, "Write per-step ELBO terms to steps.csv");
    train->add_option("--out", tr_out, "Output directory")->capture_default_str();

    // bench
    auto* bench = app.add_subcommand("bench", "Run a full experiment from a JSON config");
    std::string bench_config;
    bool bench_force = false;
    bench->add_option("--config", bench_config, "Experiment config JSON")->required();
    bench->add_flag("--force", bench_force, "Overwrite an existing output directory");

    // plot
    auto* plot = app.add_subcommand("plot", "Decision-boundary plot from a checkpoint");
    DatasetArgs pl_data;
    std::string pl_ckpt, pl_csv, pl_out = "boundary.png";
    int pl_grid = 200;
    pl_data.attach(plot);
    plot->add_option("--checkpoint", pl_ckpt, "Model checkpoint")->required();
    plot->add_option("--dataset-csv", pl_csv, "2D dataset CSV to scatter");
    plot->add_option("--grid", pl_grid, "Lattice resolution")->capture_default_str();
    plot->add_option("--out", pl_out, "Output PNG")->capture_default_str();

    // report
    auto* report = app.add_subcommand("report", "Aggregate persisted run results");
    std::string rp_dir, rp_out;
    report->add_option("--dir", rp_dir, "Directory with result_*.json files")->required();
    report->add_option("--out", rp_out, "Also write aggregate CSV here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_data->parsed()) cmd_gen_data(gd_data, gd_out, gd_out_images, gd_out_labels);
        if (gen_noise->parsed())
            cmd_gen_noise(gn_csv, gn_data, gn_kind, gn_rate, gn_seed, gn_flip_std, gn_out, gn_tout);
        if (train->parsed())
            cmd_train(tr_method, tr_data, tr_kind, tr_rate, tr_flip_std, tr_seed, tr_epochs,
                      tr_latent, tr_preset, tr_batch, tr_lr, tr_warmup, tr_augment, tr_out,
                      tr_steplog);
        if (bench->parsed()) cmd_bench(bench_config, bench_force);
        if (plot->parsed()) cmd_plot(pl_ckpt, pl_csv, pl_data, pl_grid, pl_out);
        if (report->parsed()) cmd_report(rp_dir, rp_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
