#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "causalnl/datasets.hpp"
#include "causalnl/noise.hpp"

using namespace causalnl;

namespace {

double flip_fraction(const NoisyDataset& ds, const std::vector<int>& clean) {
    int flips = 0;
    for (int i = 0; i < ds.size(); ++i) flips += ds.noisy_labels[i] != clean[i];
    return static_cast<double>(flips) / ds.size();
}

} // namespace

TEST_CASE("instance noise at rate zero returns the clean labels") {
    const LabeledDataset ds = generate_moon(100, 0.1, 1);
    NoiseSpec spec;
    spec.kind = NoiseKind::InstanceDependent;
    spec.rate = 0.0;
    spec.seed = 4;
    const auto res = synthesize_instance_noise(ds, spec);
    REQUIRE(res.dataset.noisy_labels == ds.clean_labels);
    for (int i = 0; i < ds.size(); ++i)
        REQUIRE(res.flip_distributions(i, ds.clean_labels[i]) == 1.0);
}

TEST_CASE("instance noise hits the target rate and emits valid distributions") {
    const LabeledDataset ds = generate_moon(10000, 0.1, 2);
    NoiseSpec spec;
    spec.kind = NoiseKind::InstanceDependent;
    spec.rate = 0.45;
    spec.seed = 11;
    const auto res = synthesize_instance_noise(ds, spec);

    const double frac = flip_fraction(res.dataset, ds.clean_labels);
    REQUIRE(frac >= 0.42);
    REQUIRE(frac <= 0.48);

    double clean_mass = 0.0;
    for (int i = 0; i < ds.size(); ++i) {
        double sum = 0.0;
        for (int j = 0; j < ds.num_classes; ++j) {
            REQUIRE(res.flip_distributions(i, j) >= 0.0);
            sum += res.flip_distributions(i, j);
        }
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
        clean_mass += res.flip_distributions(i, ds.clean_labels[i]);
    }
    // The clean class holds 1 - q_i, so its average is about 1 - rate.
    REQUIRE(clean_mass / ds.size() == Catch::Approx(0.55).margin(0.01));

    const auto again = synthesize_instance_noise(ds, spec);
    REQUIRE(again.dataset.noisy_labels == res.dataset.noisy_labels);
}

TEST_CASE("instance noise spreads flips over wrong classes by the projection") {
    // 4-class synthetic data: every per-instance distribution puts zero mass
    // only where the softmax does, and never on out-of-range entries.
    LabeledDataset ds;
    ds.instances = Mat(400, 3);
    Rng rng = make_rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double& v : ds.instances.d) v = g(rng);
    ds.clean_labels.resize(400);
    for (int i = 0; i < 400; ++i) ds.clean_labels[i] = i % 4;
    ds.num_classes = 4;
    ds.name = "blob";

    NoiseSpec spec;
    spec.kind = NoiseKind::InstanceDependent;
    spec.rate = 0.3;
    spec.seed = 6;
    const auto res = synthesize_instance_noise(ds, spec);
    for (int i = 0; i < ds.size(); ++i) {
        double wrong = 0.0;
        for (int j = 0; j < 4; ++j)
            if (j != ds.clean_labels[i]) wrong += res.flip_distributions(i, j);
        REQUIRE(wrong == Catch::Approx(1.0 - res.flip_distributions(i, ds.clean_labels[i])).margin(1e-12));
    }
}

TEST_CASE("noise spec validation") {
    const LabeledDataset ds = generate_moon(10, 0.0, 0);
    NoiseSpec spec;
    spec.kind = NoiseKind::InstanceDependent;
    spec.rate = 1.0;
    REQUIRE_THROWS_AS(synthesize_instance_noise(ds, spec), std::invalid_argument);
    spec.rate = -0.1;
    REQUIRE_THROWS_AS(synthesize_instance_noise(ds, spec), std::invalid_argument);
    spec.rate = 0.2;
    spec.kind = NoiseKind::Symmetric;
    REQUIRE_THROWS_AS(synthesize_instance_noise(ds, spec), std::invalid_argument);
}

TEST_CASE("symmetric noise realizes the symmetric transition matrix") {
    NoiseSpec spec;
    spec.kind = NoiseKind::Symmetric;
    spec.seed = 3;

    { // rate 0: unchanged
        const LabeledDataset ds = generate_moon(50, 0.0, 1);
        spec.rate = 0.0;
        REQUIRE(synthesize_symmetric_noise(ds, spec).noisy_labels == ds.clean_labels);
    }
    { // C=10: empirical diagonal near 0.7
        LabeledDataset ds;
        ds.instances = Mat(100000, 1);
        ds.clean_labels.resize(100000);
        for (int i = 0; i < 100000; ++i) ds.clean_labels[i] = i % 10;
        ds.num_classes = 10;
        ds.name = "uniform10";
        spec.rate = 0.3;
        const NoisyDataset noisy = synthesize_symmetric_noise(ds, spec);
        const TransitionMatrix t =
            empirical_transition(ds.clean_labels, noisy.noisy_labels, ds.num_classes);
        for (int i = 0; i < 10; ++i) {
            REQUIRE(t.entries(i, i) >= 0.69);
            REQUIRE(t.entries(i, i) <= 0.71);
        }
    }
    { // C=2: off-diagonal rate about 0.3
        const LabeledDataset ds = generate_moon(100000, 0.0, 2);
        spec.rate = 0.3;
        const NoisyDataset noisy = synthesize_symmetric_noise(ds, spec);
        REQUIRE(flip_fraction(noisy, ds.clean_labels) == Catch::Approx(0.3).margin(0.01));
    }
}

TEST_CASE("pairflip noise moves labels to the next class only") {
    LabeledDataset ds;
    ds.instances = Mat(1000, 1);
    ds.clean_labels.resize(1000);
    for (int i = 0; i < 1000; ++i) ds.clean_labels[i] = i % 5;
    ds.num_classes = 5;
    ds.name = "cycle";
    NoiseSpec spec;
    spec.kind = NoiseKind::PairFlip;
    spec.rate = 0.4;
    spec.seed = 7;
    const NoisyDataset noisy = synthesize_pairflip_noise(ds, spec);
    int flips = 0;
    for (int i = 0; i < 1000; ++i) {
        if (noisy.noisy_labels[i] != ds.clean_labels[i]) {
            REQUIRE(noisy.noisy_labels[i] == (ds.clean_labels[i] + 1) % 5);
            ++flips;
        }
    }
    REQUIRE(flips > 300);
    REQUIRE(flips < 500);
}

TEST_CASE("empirical_transition counts rows and falls back to uniform") {
    const TransitionMatrix t = empirical_transition({0, 0, 1, 1}, {0, 1, 1, 1}, 2);
    REQUIRE(t.entries(0, 0) == Catch::Approx(0.5));
    REQUIRE(t.entries(0, 1) == Catch::Approx(0.5));
    REQUIRE(t.entries(1, 0) == Catch::Approx(0.0));
    REQUIRE(t.entries(1, 1) == Catch::Approx(1.0));

    const TransitionMatrix id = empirical_transition({0, 1, 0, 1}, {0, 1, 0, 1}, 2);
    REQUIRE(id.entries(0, 0) == 1.0);
    REQUIRE(id.entries(1, 1) == 1.0);

    const TransitionMatrix fb = empirical_transition({0, 1}, {0, 1}, 3);
    for (int j = 0; j < 3; ++j) REQUIRE(fb.entries(2, j) == Catch::Approx(1.0 / 3));

    REQUIRE_THROWS_AS(empirical_transition({0, 5}, {0, 1}, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(empirical_transition({0}, {0, 1}, 2), std::invalid_argument);
}

TEST_CASE("empirical_transition recovers a known symmetric matrix at 10k per class") {
    const int c = 4, per_class = 10000;
    LabeledDataset ds;
    ds.instances = Mat(c * per_class, 1);
    ds.clean_labels.resize(c * per_class);
    for (int i = 0; i < c * per_class; ++i) ds.clean_labels[i] = i % c;
    ds.num_classes = c;
    ds.name = "grid";
    NoiseSpec spec;
    spec.kind = NoiseKind::Symmetric;
    spec.rate = 0.25;
    spec.seed = 12;
    const NoisyDataset noisy = synthesize_symmetric_noise(ds, spec);
    const TransitionMatrix est = empirical_transition(ds.clean_labels, noisy.noisy_labels, c);
    const TransitionMatrix truth = TransitionMatrix::symmetric(c, 0.25);
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j)
            REQUIRE(est.entries(i, j) == Catch::Approx(truth.entries(i, j)).margin(0.02));
}

TEST_CASE("apply_transition contracts the posterior correctly") {
    TransitionMatrix t;
    t.entries = Mat(2, 2, {0.9, 0.1, 0.2, 0.8});

    const auto idp = apply_transition(TransitionMatrix::identity(3), {0.2, 0.3, 0.5});
    REQUIRE(idp[0] == Catch::Approx(0.2).margin(1e-15));
    REQUIRE(idp[2] == Catch::Approx(0.5).margin(1e-15));

    const auto row0 = apply_transition(t, {1.0, 0.0});
    REQUIRE(row0[0] == Catch::Approx(0.9).margin(1e-15));
    REQUIRE(row0[1] == Catch::Approx(0.1).margin(1e-15));

    const auto mixed = apply_transition(t, {0.5, 0.5});
    REQUIRE(mixed[0] == Catch::Approx(0.55).margin(1e-15));
    REQUIRE(mixed[1] == Catch::Approx(0.45).margin(1e-15));

    REQUIRE_THROWS_AS(apply_transition(t, {0.2, 0.3, 0.5}), std::invalid_argument);
    REQUIRE_THROWS_AS(apply_transition(t, {0.8, 0.1}), std::invalid_argument);
}

TEST_CASE("apply_transition equals brute-force enumeration on random small cases") {
    Rng rng = make_rng(21);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::uniform_int_distribution<int> cdist(2, 5);
    for (int trial = 0; trial < 200; ++trial) {
        const int c = cdist(rng);
        TransitionMatrix t;
        t.entries = Mat(c, c);
        for (int i = 0; i < c; ++i) {
            double s = 0.0;
            for (int j = 0; j < c; ++j) {
                t.entries(i, j) = u(rng);
                s += t.entries(i, j);
            }
            for (int j = 0; j < c; ++j) t.entries(i, j) /= s;
        }
        std::vector<double> p(c);
        double s = 0.0;
        for (double& v : p) {
            v = u(rng);
            s += v;
        }
        for (double& v : p) v /= s;

        const auto got = apply_transition(t, p);
        double total = 0.0;
        for (int j = 0; j < c; ++j) {
            double expect = 0.0;
            for (int i = 0; i < c; ++i) expect += t.entries(i, j) * p[i];
            REQUIRE(std::fabs(got[j] - expect) < 1e-12);
            total += got[j];
        }
        REQUIRE(total == Catch::Approx(1.0).margin(1e-8));
    }
}

TEST_CASE("transition matrix json round-trip and validation") {
    const TransitionMatrix t = TransitionMatrix::symmetric(3, 0.2);
    const TransitionMatrix back = TransitionMatrix::from_json(t.to_json());
    REQUIRE(back.entries.d == t.entries.d);

    TransitionMatrix bad;
    bad.entries = Mat(2, 2, {0.9, 0.2, 0.2, 0.8});
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("noise csv freezes a realization and validates its source") {
    const LabeledDataset ds = generate_moon(60, 0.1, 9);
    NoiseSpec spec;
    spec.kind = NoiseKind::InstanceDependent;
    spec.rate = 0.3;
    spec.seed = 2;
    const NoisyDataset noisy = synthesize_instance_noise(ds, spec).dataset;
    const std::string path =
        (std::filesystem::temp_directory_path() / "noise_freeze.csv").string();
    write_noise_csv(noisy, path);
    const NoisyDataset back = read_noise_csv(ds, path);
    REQUIRE(back.noisy_labels == noisy.noisy_labels);

    LabeledDataset other = ds;
    other.clean_labels[17] = 1 - other.clean_labels[17];
    REQUIRE_THROWS_AS(read_noise_csv(other, path), ConsistencyError);
}
