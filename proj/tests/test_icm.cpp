#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mrfseg/core.hpp"
#include "mrfseg/emission.hpp"
#include "mrfseg/icm.hpp"
#include "mrfseg/metrics.hpp"
#include "mrfseg/potts.hpp"
#include "mrfseg/synth.hpp"

using namespace mrfseg;

namespace {

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

ClassParams three_gaussians_1d(double m0, double m1, double m2, double s) {
    std::vector<GaussianClass> g(3);
    double means[] = {m0, m1, m2};
    for (int i = 0; i < 3; ++i) {
        g[i].mean = Eigen::VectorXd::Constant(1, means[i]);
        g[i].cov = Eigen::MatrixXd::Constant(1, 1, s * s);
        g[i].freq = 1.0 / 3.0;
    }
    return ClassParams(g);
}

MultiSpectralImage random_image(int h, int w, std::uint64_t seed, double scale = 1.0,
                                double shift = 0.0) {
    MultiSpectralImage img(h, w, 1);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            img.set_value(r, c, 0,
                          shift + scale * counter_normal(seed, static_cast<std::uint64_t>(r) * w + c));
    return img;
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

}  // namespace

TEST_CASE("local score is the data term plus scaled agreement") {
    auto params = two_gaussians_1d(0.0, 1.0, 4.0, 1.0);
    LabelMap uni(5, 5, 2, 0);
    MultiSpectralImage img = random_image(5, 5, 3);
    PixelPos center{2, 2};
    auto px = img.pixel(2, 2);

    CHECK(icm_local_score(center, 0, img, params, uni, 0.0) ==
          doctest::Approx(params.log_density(0, px)).epsilon(1e-12));
    CHECK(icm_local_score(center, 0, img, params, uni, 0.5) ==
          doctest::Approx(params.log_density(0, px) + 0.5 * 8.0).epsilon(1e-12));
    CHECK(icm_local_score(center, 1, img, params, uni, 0.5) ==
          doctest::Approx(params.log_density(1, px)).epsilon(1e-12));
    PixelPos corner{0, 0};
    CHECK(icm_local_score(corner, 0, img, params, uni, 1.0) ==
          doctest::Approx(params.log_density(0, img.pixel(0, 0)) + 3.0).epsilon(1e-12));
}

TEST_CASE("single flips change the energy by the local score difference") {
    auto params = three_gaussians_1d(-2.0, 0.0, 2.0, 1.5);
    auto img = random_image(6, 7, 9, 2.0);
    auto labels = random_labels(6, 7, 3, 10);
    const double beta = 0.6;
    PottsModel model(beta, Neighborhood::SecondOrderIsotropic);

    for (int trial = 0; trial < 20; ++trial) {
        int r = static_cast<int>(counter_uniform(50, 2 * trial) * 6);
        int c = static_cast<int>(counter_uniform(50, 2 * trial + 1) * 7);
        r = std::min(r, 5);
        c = std::min(c, 6);
        int old_label = labels.at(r, c);
        int new_label = (old_label + 1 + trial % 2) % 3;

        double e_before = posterior_energy(labels, img, params, model);
        double g_old = icm_local_score({r, c}, old_label, img, params, labels, beta);
        double g_new = icm_local_score({r, c}, new_label, img, params, labels, beta);
        labels.set(r, c, new_label);
        double e_after = posterior_energy(labels, img, params, model);

        CHECK(e_after - e_before == doctest::Approx(-(g_new - g_old)).epsilon(1e-9));
    }
}

TEST_CASE("zero smoothness makes ICM reproduce the pointwise classifier") {
    auto params = two_gaussians_1d(0.0, 1.0, 3.0, 1.0);
    auto img = random_image(12, 12, 4, 2.0, 1.5);
    auto init = ml_classify(img, params);
    IcmOptions opt;
    opt.beta_override = 0.0;
    auto report = icm_segment(img, init, params, opt);
    CHECK(report.labels == init);
    CHECK(report.converged);
    CHECK(report.iterations == 1);
    CHECK(report.changed_per_iteration.back() == 0);
    CHECK(report.beta_trace.front() == 0.0);
}

TEST_CASE("strong smoothness freezes a uniform start when data gaps are bounded") {
    auto params = two_gaussians_1d(0.0, 1.0, 4.0, 1.0);
    MultiSpectralImage img(8, 8, 1);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            img.set_value(r, c, 0, counter_uniform(6, static_cast<std::uint64_t>(r) * 8 + c) - 0.5);
    LabelMap uniform(8, 8, 2, 0);
    IcmOptions opt;
    opt.beta_override = 5.0;
    auto report = icm_segment(img, uniform, params, opt);
    CHECK(report.labels == uniform);
    CHECK(report.converged);
}

TEST_CASE("converged maps admit no improving single flip") {
    auto params = three_gaussians_1d(-3.0, 0.0, 3.0, 2.0);
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        auto img = random_image(8, 8, seed, 3.0);
        auto init = random_labels(8, 8, 3, seed + 100);
        IcmOptions opt;
        opt.beta_override = 0.7;
        auto report = icm_segment(img, init, params, opt);
        REQUIRE(report.converged);
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) {
                int cur = report.labels.at(r, c);
                double g_cur = icm_local_score({r, c}, cur, img, params, report.labels, 0.7);
                for (int l = 0; l < 3; ++l)
                    CHECK(icm_local_score({r, c}, l, img, params, report.labels, 0.7) <=
                          g_cur + 1e-12);
            }
    }
}

TEST_CASE("fixed smoothness never raises the posterior energy") {
    auto params = two_gaussians_1d(0.0, 2.0, 2.0, 2.0);
    auto img = random_image(16, 16, 12, 2.0, 1.0);
    auto init = random_labels(16, 16, 2, 13);
    IcmOptions opt;
    opt.beta_override = 0.8;
    auto report = icm_segment(img, init, params, opt);
    PottsModel model(0.8, Neighborhood::SecondOrderIsotropic);
    CHECK(posterior_energy(report.labels, img, params, model) <=
          posterior_energy(init, img, params, model) + 1e-9);
}

TEST_CASE("frozen estimation keeps one smoothness for all sweeps") {
    auto truth = stripes(24, 24, 6);
    NoiseSpec spec;
    spec.classes = {{0.0, 1.2}, {3.0, 1.2}};
    spec.seed = 5;
    auto img = render_noise(truth, spec);
    auto params = two_gaussians_1d(0.0, 1.2, 3.0, 1.2);
    auto init = ml_classify(img, params);

    IcmOptions frozen;
    frozen.reestimate_beta = false;
    auto report = icm_segment(img, init, params, frozen);
    REQUIRE(report.beta_trace.size() >= 1);
    for (double b : report.beta_trace) CHECK(b == report.beta_trace.front());

    IcmOptions tracking;
    auto report2 = icm_segment(img, init, params, tracking);
    CHECK(report2.beta_trace.size() == static_cast<std::size_t>(report2.iterations));
}

TEST_CASE("smoothing improves a noisy stripe segmentation") {
    auto truth = stripes(64, 64, 8);
    NoiseSpec spec;
    spec.classes = {{60.0, 15.0}, {40.0, 15.0}};
    spec.seed = 77;
    auto img = render_noise(truth, spec);
    auto params = two_gaussians_1d(60.0, 15.0, 40.0, 15.0);
    auto init = ml_classify(img, params);
    auto report = icm_segment(img, init, params);

    double oa_ml = overall_accuracy(confusion(truth, init));
    double oa_icm = overall_accuracy(confusion(truth, report.labels));
    CHECK(oa_icm > oa_ml);
    CHECK(oa_icm > 0.9);
}

TEST_CASE("input validation") {
    auto params = two_gaussians_1d(0.0, 1.0, 1.0, 1.0);
    auto img = random_image(4, 4, 1);
    LabelMap wrong(4, 4, 3);
    CHECK_THROWS_AS(icm_segment(img, wrong, params), std::invalid_argument);
    LabelMap init(4, 4, 2);
    IcmOptions opt;
    opt.max_iter = 0;
    CHECK_THROWS_AS(icm_segment(img, init, params, opt), std::invalid_argument);
}
