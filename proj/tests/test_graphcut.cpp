#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "mrfseg/core.hpp"
#include "mrfseg/emission.hpp"
#include "mrfseg/graphcut.hpp"
#include "mrfseg/potts.hpp"
#include "mrfseg/synth.hpp"

using namespace mrfseg;

namespace {

ClassParams gaussians_1d(const std::vector<double>& means, double s) {
    std::vector<GaussianClass> g(means.size());
    for (std::size_t i = 0; i < means.size(); ++i) {
        g[i].mean = Eigen::VectorXd::Constant(1, means[i]);
        g[i].cov = Eigen::MatrixXd::Constant(1, 1, s * s);
        g[i].freq = 1.0 / static_cast<double>(means.size());
    }
    return ClassParams(g);
}

MultiSpectralImage random_image(int h, int w, std::uint64_t seed, double scale, double shift) {
    MultiSpectralImage img(h, w, 1);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            img.set_value(r, c, 0,
                          shift + scale * counter_normal(seed, static_cast<std::uint64_t>(r) * w + c));
    return img;
}

// Exhaustive minimum of the first-order posterior energy over all labelings.
double brute_force_min_energy(const MultiSpectralImage& img, const ClassParams& params,
                              double beta, LabelMap* best_out = nullptr) {
    const int h = img.height(), w = img.width(), L = params.class_count();
    const int n = h * w;
    PottsModel model(beta, Neighborhood::FirstOrderIsotropic);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> digits(n, 0);
    while (true) {
        LabelMap m(h, w, L);
        for (int i = 0; i < n; ++i) m.set(i / w, i % w, digits[i]);
        double e = posterior_energy(m, img, params, model);
        if (e < best) {
            best = e;
            if (best_out) *best_out = m;
        }
        int pos = 0;
        while (pos < n && ++digits[pos] == L) digits[pos++] = 0;
        if (pos == n) break;
    }
    return best;
}

}  // namespace

TEST_CASE("flow through a single arc and parallel paths") {
    FlowNetwork single(2, 0, 1);
    single.add_arc(0, 1, 5.0);
    auto cut = single.max_flow();
    CHECK(cut.flow_value == doctest::Approx(5.0));
    CHECK(cut.source_side[0] == 1);
    CHECK(cut.source_side[1] == 0);

    FlowNetwork two(4, 0, 3);
    two.add_arc(0, 1, 3.0);
    two.add_arc(1, 3, 3.0);
    two.add_arc(0, 2, 4.0);
    two.add_arc(2, 3, 4.0);
    CHECK(two.max_flow().flow_value == doctest::Approx(7.0));

    FlowNetwork bottleneck(3, 0, 2);
    bottleneck.add_arc(0, 1, 10.0);
    bottleneck.add_arc(1, 2, 2.5);
    CHECK(bottleneck.max_flow().flow_value == doctest::Approx(2.5));
}

TEST_CASE("network input validation") {
    CHECK_THROWS_AS(FlowNetwork(2, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(FlowNetwork(1, 0, 1), std::invalid_argument);
    FlowNetwork net(3, 0, 2);
    CHECK_THROWS_AS(net.add_arc(0, 1, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(net.add_arc(0, 1, std::numeric_limits<double>::infinity()),
                    std::invalid_argument);
    CHECK_THROWS_AS(net.add_arc(0, 5, 1.0), std::invalid_argument);
}

TEST_CASE("random small networks match brute-force minimum cuts") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> node_count(3, 8);
    std::uniform_real_distribution<double> urand(0.0, 1.0);
    std::uniform_int_distribution<int> cap(0, 10);

    for (int trial = 0; trial < 100; ++trial) {
        const int n = node_count(rng);
        const int s = 0, t = 1;
        std::vector<std::vector<double>> capacity(n, std::vector<double>(n, 0.0));
        FlowNetwork net(n, s, t);
        for (int u = 0; u < n; ++u)
            for (int v = 0; v < n; ++v) {
                if (u == v || v == s || u == t) continue;
                if (urand(rng) < 0.45) {
                    double c = static_cast<double>(cap(rng));
                    capacity[u][v] += c;
                    net.add_arc(u, v, c);
                }
            }

        double best = std::numeric_limits<double>::infinity();
        const int free_nodes = n - 2;
        for (int mask = 0; mask < (1 << free_nodes); ++mask) {
            std::vector<char> in_s(n, 0);
            in_s[s] = 1;
            for (int i = 0; i < free_nodes; ++i) in_s[i + 2] = (mask >> i) & 1;
            double cutval = 0.0;
            for (int u = 0; u < n; ++u)
                for (int v = 0; v < n; ++v)
                    if (in_s[u] && !in_s[v]) cutval += capacity[u][v];
            best = std::min(best, cutval);
        }

        auto cut = net.max_flow();
        CHECK(cut.flow_value == doctest::Approx(best).epsilon(1e-9));

        double witness = 0.0;
        for (int u = 0; u < n; ++u)
            for (int v = 0; v < n; ++v)
                if (cut.source_side[u] && !cut.source_side[v]) witness += capacity[u][v];
        CHECK(witness == doctest::Approx(cut.flow_value).epsilon(1e-9));
    }
}

TEST_CASE("binary cut with zero smoothness is the pointwise classifier") {
    auto params = gaussians_1d({0.0, 3.0}, 1.0);
    auto img = random_image(9, 11, 21, 2.0, 1.5);
    CHECK(binary_mapcut(img, params, 0.0) == ml_classify(img, params));
}

TEST_CASE("binary cut is exact on exhaustively solvable lattices") {
    auto params = gaussians_1d({0.0, 2.0}, 1.5);
    for (double beta : {0.5, 1.0, 2.0}) {
        for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
            auto img = random_image(3, 3, seed, 2.0, 1.0);
            double best = brute_force_min_energy(img, params, beta);
            auto labels = binary_mapcut(img, params, beta);
            PottsModel model(beta, Neighborhood::FirstOrderIsotropic);
            CHECK(posterior_energy(labels, img, params, model) ==
                  doctest::Approx(best).epsilon(1e-9));
        }
    }
}

TEST_CASE("binary cut beats random labelings on a larger lattice") {
    auto params = gaussians_1d({0.0, 2.0}, 2.0);
    auto img = random_image(8, 8, 5, 2.0, 1.0);
    const double beta = 0.8;
    PottsModel model(beta, Neighborhood::FirstOrderIsotropic);
    auto labels = binary_mapcut(img, params, beta);
    double e = posterior_energy(labels, img, params, model);

    CHECK(e <= posterior_energy(ml_classify(img, params), img, params, model) + 1e-9);
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> bit(0, 1);
    for (int trial = 0; trial < 2000; ++trial) {
        LabelMap m(8, 8, 2);
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) m.set(r, c, bit(rng));
        CHECK(e <= posterior_energy(m, img, params, model) + 1e-9);
    }
}

TEST_CASE("huge smoothness collapses the cut to one label") {
    auto params = gaussians_1d({0.0, 2.0}, 1.5);
    auto img = random_image(6, 6, 8, 2.0, 1.0);
    auto labels = binary_mapcut(img, params, 1000.0);
    CHECK(labels.distinct_labels() == 1);

    double d0 = 0.0, d1 = 0.0;
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) {
            d0 -= params.log_density(0, img.pixel(r, c));
            d1 -= params.log_density(1, img.pixel(r, c));
        }
    int want = d0 <= d1 ? 0 : 1;
    CHECK(labels.at(0, 0) == want);
}

TEST_CASE("binary cut input validation") {
    auto three = gaussians_1d({0.0, 1.0, 2.0}, 1.0);
    auto img = random_image(3, 3, 2, 1.0, 0.0);
    CHECK_THROWS_AS(binary_mapcut(img, three, 1.0), std::invalid_argument);
    auto params = gaussians_1d({0.0, 1.0}, 1.0);
    CHECK_THROWS_AS(binary_mapcut(img, params, -0.5), std::domain_error);
}

TEST_CASE("two-class expansion matches the exact binary cut energy") {
    auto params = gaussians_1d({0.0, 2.0}, 1.5);
    PottsModel model(0.9, Neighborhood::FirstOrderIsotropic);
    for (std::uint64_t seed : {4ULL, 5ULL}) {
        auto img = random_image(7, 7, seed, 2.0, 1.0);
        auto exact = binary_mapcut(img, params, 0.9);
        LabelMap init(7, 7, 2, 0);
        auto report = alpha_expansion(img, init, params, 0.9);
        CHECK(report.final_energy ==
              doctest::Approx(posterior_energy(exact, img, params, model)).epsilon(1e-9));
    }
}

TEST_CASE("expansion with zero smoothness recovers the pointwise classifier") {
    auto params = gaussians_1d({0.0, 2.0, 4.0}, 1.0);
    auto img = random_image(6, 6, 31, 2.0, 2.0);
    LabelMap init(6, 6, 3, 0);
    auto report = alpha_expansion(img, init, params, 0.0);
    CHECK(report.labels == ml_classify(img, params));
}

TEST_CASE("expansion nearly always finds the three-class global optimum") {
    auto params = gaussians_1d({-2.0, 0.0, 2.0}, 1.5);
    int hits = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto img = random_image(3, 3, 1000 + trial, 2.0, 0.0);
        double best = brute_force_min_energy(img, params, 0.7);
        LabelMap init(3, 3, 3, 0);
        auto report = alpha_expansion(img, init, params, 0.7);
        CHECK(report.final_energy >= best - 1e-9);
        if (report.final_energy <= best + 1e-9) ++hits;
    }
    // Expansion only guarantees a strong local optimum; empirically it lands
    // on the global one in the high eighties out of these 100 instances.
    CHECK(hits >= 85);
}

TEST_CASE("expansion report invariants") {
    auto params = gaussians_1d({-2.0, 0.0, 2.0}, 2.0);
    auto img = random_image(10, 10, 55, 2.5, 0.0);
    LabelMap init(10, 10, 3, 1);
    auto report = alpha_expansion(img, init, params, 0.6);
    CHECK(report.converged);
    CHECK(report.beta_used == 0.6);
    for (std::size_t i = 1; i < report.energy_trace.size(); ++i)
        CHECK(report.energy_trace[i] < report.energy_trace[i - 1]);
    if (!report.energy_trace.empty())
        CHECK(report.final_energy == doctest::Approx(report.energy_trace.back()));

    auto again = alpha_expansion(img, report.labels, params, 0.6);
    CHECK(again.labels == report.labels);
    CHECK(again.energy_trace.empty());
    CHECK(again.cycles == 1);
    CHECK(again.converged);
}

TEST_CASE("full pipeline estimates, clamps and improves") {
    auto truth = stripes(48, 48, 8);
    NoiseSpec spec;
    spec.classes = {{60.0, 15.0}, {40.0, 15.0}};
    spec.seed = 3;
    auto img = render_noise(truth, spec);
    auto params = gaussians_1d({60.0, 40.0}, 15.0);
    auto init = ml_classify(img, params);
    auto report = gc_segment(img, init, params);
    CHECK(report.beta_used > 0.0);

    PottsModel model(report.beta_used, Neighborhood::FirstOrderIsotropic);
    CHECK(posterior_energy(report.labels, img, params, model) <=
          posterior_energy(init, img, params, model) + 1e-9);

    int agree_truth = 0;
    int agree_init = 0;
    for (int r = 0; r < 48; ++r)
        for (int c = 0; c < 48; ++c) {
            agree_truth += report.labels.at(r, c) == truth.at(r, c);
            agree_init += init.at(r, c) == truth.at(r, c);
        }
    CHECK(agree_truth > agree_init);
}

TEST_CASE("pipeline clamps an anti-aligned estimate to zero smoothing") {
    auto params = gaussians_1d({0.0, 3.0}, 1.0);
    auto img = random_image(16, 16, 70, 2.0, 1.5);
    LabelMap cb(16, 16, 2);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) cb.set(r, c, (r + c) % 2);
    auto report = gc_segment(img, cb, params);
    CHECK(report.beta_used == 0.0);
    CHECK(report.labels == ml_classify(img, params));
}

TEST_CASE("pipeline treats a single-label start as maximal smoothing") {
    auto params = gaussians_1d({0.0, 3.0}, 1.0);
    auto img = random_image(8, 8, 71, 1.0, 1.5);
    LabelMap uniform(8, 8, 2, 0);
    auto report = gc_segment(img, uniform, params);
    CHECK(report.beta_used == 10.0);
    CHECK(report.labels.distinct_labels() == 1);
}
