#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "causalnl/losses.hpp"

using namespace causalnl;

namespace {

/// Simpson-rule KL(N(mu, sigma^2) || N(0,1)) for 1-D parameters; accurate to
/// well below 1e-8 over the chosen range.
double kl_quadrature(double mu, double log_var) {
    const double sigma = std::exp(0.5 * log_var);
    const double lo = std::min(mu - 20.0 * sigma, -20.0);
    const double hi = std::max(mu + 20.0 * sigma, 20.0);
    const int n = 200000; // even
    const double h = (hi - lo) / n;
    auto integrand = [&](double x) {
        const double d = (x - mu) / sigma;
        const double logq = -0.5 * d * d - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
        const double logp = -0.5 * x * x - 0.5 * std::log(2.0 * M_PI);
        return std::exp(logq) * (logq - logp);
    };
    double s = integrand(lo) + integrand(hi);
    for (int i = 1; i < n; ++i) s += integrand(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return s * h / 3.0;
}

} // namespace

TEST_CASE("recon_l1 averages absolute error over the feature dimension") {
    REQUIRE(recon_l1({0.3, 0.7}, {0.3, 0.7}) == 0.0);
    REQUIRE(recon_l1({1, 1}, {0, 0}) == Catch::Approx(1.0));
    REQUIRE(recon_l1({0.5}, {0.25}) == Catch::Approx(0.25));
    REQUIRE_THROWS_AS(recon_l1({1, 2}, {1}), std::invalid_argument);
}

TEST_CASE("noisy_ce matches analytic cross-entropy values") {
    REQUIRE(noisy_ce({80.0, -80.0}, 0) == Catch::Approx(0.0).margin(1e-12));
    std::vector<double> uniform(10, 0.0);
    REQUIRE(noisy_ce(uniform, 7) == Catch::Approx(std::log(10.0)).margin(1e-12));
    REQUIRE(noisy_ce({1.0, 1.0}, 0) == Catch::Approx(std::log(2.0)).margin(1e-12));
    REQUIRE_THROWS_AS(noisy_ce({1.0, 2.0}, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(noisy_ce({1.0, 2.0}, -1), std::invalid_argument);
}

TEST_CASE("neg_entropy follows the 0 log 0 convention and analytic values") {
    REQUIRE(neg_entropy({1.0, 0.0, 0.0}) == 0.0);
    std::vector<double> uniform(10, 0.1);
    REQUIRE(neg_entropy(uniform) == Catch::Approx(-std::log(10.0)).margin(1e-12));
    REQUIRE(neg_entropy({0.5, 0.5}) == Catch::Approx(-std::log(2.0)).margin(1e-12));
    REQUIRE_THROWS_AS(neg_entropy({-0.1, 1.1}), std::invalid_argument);
    REQUIRE_THROWS_AS(neg_entropy({0.4, 0.4}), std::invalid_argument);
}

TEST_CASE("neg_entropy plus log C is nonnegative, zero only at uniform") {
    Rng rng = make_rng(17);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int c = 2 + trial % 6;
        std::vector<double> q(c);
        double s = 0.0;
        for (double& v : q) {
            v = u(rng);
            s += v;
        }
        for (double& v : q) v /= s;
        REQUIRE(neg_entropy(q) + std::log(c) >= -1e-12);
    }
    std::vector<double> uniform(5, 0.2);
    REQUIRE(neg_entropy(uniform) + std::log(5.0) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("kl_gauss closed form matches hand values and stays nonnegative") {
    REQUIRE(kl_gauss({{0.0}, {0.0}}) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(kl_gauss({{1.0}, {0.0}}) == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(kl_gauss({{0.0}, {1.0}}) == Catch::Approx((std::exp(1.0) - 2.0) / 2.0).margin(1e-12));
    REQUIRE(kl_gauss({{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}}) == 0.0);

    Rng rng = make_rng(23);
    std::uniform_real_distribution<double> mu(-3.0, 3.0), lv(-2.0, 2.0);
    for (int trial = 0; trial < 500; ++trial) {
        const GaussianParams g{{mu(rng), mu(rng)}, {lv(rng), lv(rng)}};
        REQUIRE(kl_gauss(g) >= -1e-12);
    }
    REQUIRE_THROWS_AS(kl_gauss({{1.0}, {}}), std::invalid_argument);
}

TEST_CASE("kl_gauss matches numerical quadrature on random 1-D parameters") {
    Rng rng = make_rng(29);
    std::uniform_real_distribution<double> mu(-3.0, 3.0), lv(-2.0, 2.0);
    for (int trial = 0; trial < 30; ++trial) {
        const double m = mu(rng), v = lv(rng);
        REQUIRE(kl_gauss({{m}, {v}}) == Catch::Approx(kl_quadrature(m, v)).margin(1e-6));
    }
}

TEST_CASE("negative_elbo assembles the weighted total from its terms") {
    // Construct a branch output realizing the documented term values.
    BranchOutput out;
    out.reconstruction = {0.0, 0.0};           // recon vs x=[1,1] -> 1.0
    std::vector<double> x{1.0, 1.0};
    out.noisy_logits = std::vector<double>(10, 0.0); // ce -> ln 10
    out.soft_label = std::vector<double>(10, 0.1);   // neg entropy -> -ln 10
    out.gaussian = GaussianParams{{1.0}, {0.0}};     // kl -> 0.5
    out.latent = {0.0};

    const ElboWeights w{};
    const ElboBreakdown b = negative_elbo(x, out, 3, w);
    REQUIRE(b.recon == Catch::Approx(1.0));
    REQUIRE(b.noisy_ce == Catch::Approx(std::log(10.0)).margin(1e-12));
    REQUIRE(b.neg_entropy == Catch::Approx(-std::log(10.0)).margin(1e-12));
    REQUIRE(b.kl_gauss == Catch::Approx(0.5).margin(1e-12));
    const double expect =
        0.1 * 1.0 + 0.1 * std::log(10.0) + 1e-5 * -std::log(10.0) + 0.01 * 0.5;
    REQUIRE(b.total == Catch::Approx(expect).margin(1e-10));
    REQUIRE(expect == Catch::Approx(0.335236).margin(1e-6));

    // All-perfect outputs give a zero total.
    BranchOutput perfect;
    perfect.reconstruction = {0.2, 0.4};
    perfect.noisy_logits = {200.0, -200.0};
    perfect.soft_label = {1.0, 0.0};
    perfect.gaussian = GaussianParams{{0.0}, {0.0}};
    const ElboBreakdown z = negative_elbo({0.2, 0.4}, perfect, 0, w);
    REQUIRE(z.total == Catch::Approx(0.0).margin(1e-12));

    // Doubling beta3 adds exactly beta3 * kl_gauss.
    ElboWeights w2 = w;
    w2.beta3 = 2.0 * w.beta3;
    const ElboBreakdown b2 = negative_elbo(x, out, 3, w2);
    REQUIRE(b2.total - b.total == Catch::Approx(w.beta3 * b.kl_gauss).margin(1e-12));
}

TEST_CASE("keep_rate decays linearly to its floor and clamps") {
    KeepRateSchedule sched;
    sched.rho = 0.45;
    sched.warmup_epochs = 10;
    REQUIRE(keep_rate(0, sched) == 1.0);
    REQUIRE(keep_rate(10, sched) == Catch::Approx(0.55).margin(1e-15));
    REQUIRE(keep_rate(30, sched) == Catch::Approx(0.55).margin(1e-15));
    double prev = 2.0;
    for (int e = 0; e < 40; ++e) {
        const double k = keep_rate(e, sched);
        REQUIRE(k <= prev);
        REQUIRE(k >= 0.55 - 1e-15);
        REQUIRE(k <= 1.0);
        prev = k;
    }
    REQUIRE_THROWS_AS(keep_rate(-1, sched), std::invalid_argument);
}

TEST_CASE("small_loss_select keeps the smallest losses with stable ties") {
    REQUIRE(small_loss_select({0.1, 5.0, 0.2, 3.0}, 0.5) == std::vector<int>{0, 2});
    REQUIRE(small_loss_select({3.0, 1.0, 2.0}, 1.0) == std::vector<int>{0, 1, 2});
    REQUIRE(small_loss_select({1.0, 1.0, 2.0}, 1.0 / 3.0) == std::vector<int>{0});
    REQUIRE_THROWS_AS(small_loss_select({}, 0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(small_loss_select({1.0}, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(small_loss_select({1.0}, 1.5), std::invalid_argument);
}

TEST_CASE("small_loss_select matches a brute-force argsort oracle") {
    Rng rng = make_rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> ndist(1, 40);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = ndist(rng);
        std::vector<double> losses(n);
        for (double& v : losses) v = std::round(u(rng) * 8.0) / 8.0; // force ties
        const double keep = u(rng) * 0.999 + 0.001;

        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return losses[a] < losses[b]; });
        order.resize(static_cast<std::size_t>(std::min<double>(n, std::ceil(keep * n))));
        std::sort(order.begin(), order.end());
        REQUIRE(small_loss_select(losses, keep) == order);
    }
}
