#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mrfseg/core.hpp"
#include "mrfseg/potts.hpp"
#include "mrfseg/synth.hpp"

using namespace mrfseg;

namespace {

LabelMap checkerboard(int h, int w) {
    LabelMap m(h, w, 2);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) m.set(r, c, (r + c) % 2);
    return m;
}

LabelMap random_labels(int h, int w, int L, std::uint64_t seed) {
    LabelMap m(h, w, L);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double u = counter_uniform(seed, static_cast<std::uint64_t>(r) * w + c);
            int l = static_cast<int>(u * L);
            m.set(r, c, l >= L ? L - 1 : l);
        }
    return m;
}

// Offset tables owned by the test so library counting is checked against an
// independent enumeration.
const std::vector<std::pair<int, int>> kFirst{{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
const std::vector<std::pair<int, int>> kSecond{{-1, 0}, {1, 0},  {0, -1}, {0, 1},
                                               {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};

int oracle_count(const LabelMap& m, int r, int c, int cand, bool second) {
    const auto& offs = second ? kSecond : kFirst;
    int n = 0;
    for (auto [dr, dc] : offs) {
        int rr = r + dr, cc = c + dc;
        if (rr < 0 || cc < 0 || rr >= m.height() || cc >= m.width()) continue;
        if (m.at(rr, cc) == cand) ++n;
    }
    return n;
}

double oracle_residual(double beta, const LabelMap& m, bool second) {
    double total = 0.0;
    for (int r = 0; r < m.height(); ++r)
        for (int c = 0; c < m.width(); ++c) {
            double num = 0.0, den = 0.0;
            for (int l = 0; l < m.label_count(); ++l) {
                double u = oracle_count(m, r, c, l, second);
                double w = std::exp(beta * u);
                num += u * w;
                den += w;
            }
            total += oracle_count(m, r, c, m.at(r, c), second) - num / den;
        }
    return total;
}

double oracle_energy(const LabelMap& m, const MultiSpectralImage& img, const ClassParams& p,
                     double beta, bool second) {
    double e = 0.0;
    for (int r = 0; r < m.height(); ++r)
        for (int c = 0; c < m.width(); ++c) {
            int l = m.at(r, c);
            double x = img.value(r, c);
            double mu = p.cls(l).mean(0), var = p.cls(l).cov(0, 0);
            e += 0.5 * std::log(2.0 * M_PI * var) + (x - mu) * (x - mu) / (2.0 * var);
        }
    std::vector<std::pair<int, int>> forward{{0, 1}, {1, 0}};
    if (second) {
        forward.push_back({1, 1});
        forward.push_back({1, -1});
    }
    std::int64_t agree = 0;
    for (int r = 0; r < m.height(); ++r)
        for (int c = 0; c < m.width(); ++c)
            for (auto [dr, dc] : forward) {
                int rr = r + dr, cc = c + dc;
                if (rr < 0 || cc < 0 || rr >= m.height() || cc >= m.width()) continue;
                if (m.at(r, c) == m.at(rr, cc)) ++agree;
            }
    return e - beta * agree;
}

ClassParams two_gaussians_1d(double m0, double s0, double m1, double s1) {
    GaussianClass a, b;
    a.mean = Eigen::VectorXd::Constant(1, m0);
    a.cov = Eigen::MatrixXd::Constant(1, 1, s0 * s0);
    a.freq = 0.5;
    b.mean = Eigen::VectorXd::Constant(1, m1);
    b.cov = Eigen::MatrixXd::Constant(1, 1, s1 * s1);
    b.freq = 0.5;
    return ClassParams({a, b});
}

}  // namespace

TEST_CASE("agreement counts on hand patterns") {
    LabelMap uni(5, 5, 2, 0);
    CHECK(agreement_count(uni, {2, 2}, 0, Neighborhood::SecondOrderIsotropic) == 8);
    CHECK(agreement_count(uni, {2, 2}, 0, Neighborhood::FirstOrderIsotropic) == 4);
    CHECK(agreement_count(uni, {2, 2}, 1, Neighborhood::SecondOrderIsotropic) == 0);
    CHECK(agreement_count(uni, {0, 0}, 0, Neighborhood::FirstOrderIsotropic) == 2);
    CHECK(agreement_count(uni, {0, 0}, 0, Neighborhood::SecondOrderIsotropic) == 3);

    auto cb = checkerboard(5, 5);
    CHECK(agreement_count(cb, {2, 2}, cb.at(2, 2), Neighborhood::SecondOrderIsotropic) == 4);
    CHECK(agreement_count(cb, {2, 2}, cb.at(2, 2), Neighborhood::FirstOrderIsotropic) == 0);
    CHECK(agreement_count(cb, {2, 2}, 1 - cb.at(2, 2), Neighborhood::FirstOrderIsotropic) == 4);
}

TEST_CASE("agreement_counts matches per-label counting on random maps") {
    auto m = random_labels(7, 9, 3, 11);
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 9; ++c) {
            auto v = agreement_counts(m, {r, c}, Neighborhood::SecondOrderIsotropic);
            REQUIRE(v.size() == 3);
            for (int l = 0; l < 3; ++l) {
                CHECK(v[l] == agreement_count(m, {r, c}, l, Neighborhood::SecondOrderIsotropic));
                CHECK(v[l] == oracle_count(m, r, c, l, true));
            }
        }
}

TEST_CASE("global agreement counts unordered pairs once") {
    LabelMap uni3(3, 3, 2, 0);
    CHECK(global_agreement(uni3, Neighborhood::SecondOrderIsotropic) == 20);
    CHECK(global_agreement(uni3, Neighborhood::FirstOrderIsotropic) == 12);
    LabelMap uni2(2, 2, 2, 0);
    CHECK(global_agreement(uni2, Neighborhood::FirstOrderIsotropic) == 4);
    auto cb = checkerboard(3, 3);
    CHECK(global_agreement(cb, Neighborhood::FirstOrderIsotropic) == 0);
    CHECK(global_agreement(cb, Neighborhood::SecondOrderIsotropic) == 8);
}

TEST_CASE("conditional distribution is a softmax of scaled counts") {
    LabelMap uni(5, 5, 2, 0);
    PottsModel model(0.5, Neighborhood::SecondOrderIsotropic);
    auto p = conditional_distribution(uni, {2, 2}, model);
    REQUIRE(p.size() == 2);
    double want0 = std::exp(0.5 * 8.0) / (std::exp(0.5 * 8.0) + std::exp(0.0));
    CHECK(p[0] == doctest::Approx(want0).epsilon(1e-12));
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));

    PottsModel flat(0.0, Neighborhood::SecondOrderIsotropic);
    auto q = conditional_distribution(uni, {1, 3}, flat);
    CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pseudo-likelihood residual matches a plain-loop oracle") {
    auto m = random_labels(8, 8, 3, 5);
    for (double beta : {-2.0, -0.5, 0.0, 0.7, 2.5}) {
        CHECK(pseudolikelihood_residual(beta, m, Neighborhood::SecondOrderIsotropic) ==
              doctest::Approx(oracle_residual(beta, m, true)).epsilon(1e-9));
        CHECK(pseudolikelihood_residual(beta, m, Neighborhood::FirstOrderIsotropic) ==
              doctest::Approx(oracle_residual(beta, m, false)).epsilon(1e-9));
    }
}

TEST_CASE("residual is strictly decreasing in beta on a random map") {
    auto m = random_labels(16, 16, 2, 3);
    double prev = pseudolikelihood_residual(-2.0, m, Neighborhood::SecondOrderIsotropic);
    for (double beta = -1.5; beta <= 2.01; beta += 0.5) {
        double cur = pseudolikelihood_residual(beta, m, Neighborhood::SecondOrderIsotropic);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("posterior energy matches the oracle on every 3x3 labeling") {
    MultiSpectralImage img(3, 3, 1);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            img.set_value(r, c, 0, 10.0 * counter_normal(77, r * 3 + c) + 5.0);
    auto params = two_gaussians_1d(0.0, 8.0, 10.0, 8.0);

    for (bool second : {false, true}) {
        PottsModel model(0.7, second ? Neighborhood::SecondOrderIsotropic
                                     : Neighborhood::FirstOrderIsotropic);
        for (int code = 0; code < 512; ++code) {
            LabelMap m(3, 3, 2);
            for (int i = 0; i < 9; ++i) m.set(i / 3, i % 3, (code >> i) & 1);
            CHECK(posterior_energy(m, img, params, model) ==
                  doctest::Approx(oracle_energy(m, img, params, 0.7, second)).epsilon(1e-10));
        }
    }
}

TEST_CASE("posterior energy at beta zero is the pure data term") {
    auto m = random_labels(4, 4, 2, 9);
    MultiSpectralImage img(4, 4, 1);
    for (int i = 0; i < 16; ++i) img.set_value(i / 4, i % 4, 0, counter_normal(8, i));
    auto params = two_gaussians_1d(-1.0, 1.0, 1.0, 1.0);
    PottsModel zero(0.0, Neighborhood::SecondOrderIsotropic);
    double want = 0.0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) want -= params.log_density(m.at(r, c), img.pixel(r, c));
    CHECK(posterior_energy(m, img, params, zero) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("brent finds classic roots") {
    int iters = 0;
    double r = brent_root([](double x) { return x * x - 2.0; }, 0.0, 2.0, 1e-12, 200, &iters);
    CHECK(r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
    CHECK(iters > 0);

    double fix = brent_root([](double x) { return std::cos(x) - x; }, 0.0, 1.0, 1e-12, 200);
    CHECK(fix == doctest::Approx(0.7390851332151607).epsilon(1e-9));

    // x^3 is flat at its root, so the solver stops on the residual criterion
    // long before the abscissa reaches the interval tolerance.
    double cube = brent_root([](double x) { return x * x * x; }, -1.0, 2.0, 1e-12, 200);
    CHECK(std::abs(cube * cube * cube) <= 1e-12);
    CHECK(std::abs(cube) < 1e-3);
}

TEST_CASE("brent endpoint hits and bracket failures") {
    double lo = brent_root([](double x) { return x; }, 0.0, 1.0, 1e-12, 100);
    CHECK(lo == 0.0);
    CHECK_THROWS_AS(brent_root([](double x) { return x * x + 1.0; }, -1.0, 1.0, 1e-12, 100),
                    std::invalid_argument);
}

TEST_CASE("iid labels estimate a smoothness near zero") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        auto m = random_labels(128, 128, 2, seed);
        auto est = estimate_beta(m, Neighborhood::SecondOrderIsotropic);
        CHECK(est.status == BetaEstimate::Status::Root);
        CHECK(std::abs(est.beta) < 0.05);
        // The residual sums over 16k pixels, so a 1e-8 step in beta still
        // moves it by ~1e-3.
        CHECK(std::abs(est.residual_at_solution) < 1e-2);
    }
}

TEST_CASE("gibbs samples recover their smoothness") {
    for (std::uint64_t seed : {10ULL, 20ULL}) {
        auto m = potts_gibbs(128, 128, 2, 0.8, 300, seed);
        auto est = estimate_beta(m, Neighborhood::SecondOrderIsotropic);
        CHECK(est.beta > 0.65);
        CHECK(est.beta < 0.95);
    }
}

TEST_CASE("first-order checkerboard clamps at the bracket bottom") {
    auto cb = checkerboard(16, 16);
    auto est = estimate_beta(cb, Neighborhood::FirstOrderIsotropic);
    CHECK(est.status == BetaEstimate::Status::ClampedLo);
    CHECK(est.beta == -10.0);
}

TEST_CASE("anti-aligned stripes estimate a negative smoothness") {
    auto cb = checkerboard(32, 32);
    auto est = estimate_beta(cb, Neighborhood::SecondOrderIsotropic, -10.0, 10.0);
    CHECK(est.beta < 0.0);
}

TEST_CASE("single-label maps are degenerate for estimation") {
    LabelMap uni(8, 8, 2, 1);
    CHECK_THROWS_AS(estimate_beta(uni, Neighborhood::SecondOrderIsotropic), std::domain_error);
}

TEST_CASE("smooth patterns estimate a positive smoothness") {
    auto s = stripes(32, 32, 8);
    auto est = estimate_beta(s, Neighborhood::SecondOrderIsotropic);
    CHECK(est.beta > 0.3);
}
