#include "mrfseg/emission.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "mrfseg/parallel.hpp"

namespace mrfseg {

namespace {

Eigen::MatrixXd floor_eigenvalues(const Eigen::MatrixXd& cov, double rel_floor,
                                  double abs_floor) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    Eigen::VectorXd ev = es.eigenvalues();
    const double floor_val = std::max(rel_floor * ev.maxCoeff(), abs_floor);
    bool changed = false;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < floor_val) {
            ev[i] = floor_val;
            changed = true;
        }
    }
    if (!changed) return cov;
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd pixel_vector(const MultiSpectralImage& image, std::int64_t flat) {
    const int q = image.bands();
    const int r = static_cast<int>(flat / image.width());
    const int c = static_cast<int>(flat % image.width());
    Eigen::VectorXd x(q);
    auto px = image.pixel(r, c);
    for (int b = 0; b < q; ++b) x[b] = px[b];
    return x;
}

double logsumexp(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace

double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov) {
    const Eigen::Index q = mean.size();
    if (x.size() != q || cov.rows() != q || cov.cols() != q)
        throw std::invalid_argument("gaussian_log_density: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::domain_error("gaussian_log_density: covariance not positive definite");
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
    Eigen::VectorXd y = llt.matrixL().solve(x - mean);
    return -0.5 * q * std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * y.squaredNorm();
}

LabelMap ml_classify(const MultiSpectralImage& image, const ClassParams& params) {
    if (params.class_count() < 2)
        throw std::invalid_argument("ml_classify: need at least two classes");
    if (params.bands() != image.bands())
        throw std::invalid_argument("ml_classify: band count mismatch");
    const int L = params.class_count();
    std::vector<int> out(image.pixel_count(), 0);
    parallel_for(0, image.pixel_count(), [&](std::int64_t i) {
        const int r = static_cast<int>(i / image.width());
        const int c = static_cast<int>(i % image.width());
        auto px = image.pixel(r, c);
        int best = 0;
        double best_ll = params.log_density(0, px);
        for (int l = 1; l < L; ++l) {
            double ll = params.log_density(l, px);
            if (ll > best_ll) {
                best_ll = ll;
                best = l;
            }
        }
        out[i] = best;
    });
    return LabelMap(image.height(), image.width(), L, std::move(out));
}

std::vector<double> log_likelihood_map(const MultiSpectralImage& image,
                                       const ClassParams& params) {
    if (params.bands() != image.bands())
        throw std::invalid_argument("log_likelihood_map: band count mismatch");
    const int L = params.class_count();
    std::vector<double> out(static_cast<std::size_t>(image.pixel_count()) * L);
    parallel_for(0, image.pixel_count(), [&](std::int64_t i) {
        const int r = static_cast<int>(i / image.width());
        const int c = static_cast<int>(i % image.width());
        auto px = image.pixel(r, c);
        for (int l = 0; l < L; ++l) out[i * L + l] = params.log_density(l, px);
    });
    return out;
}

ClassParams estimate_class_params(const MultiSpectralImage& image, const LabelMap& labels) {
    check_same_dims(labels, image);
    const int L = labels.label_count();
    const int q = image.bands();
    const std::int64_t n = image.pixel_count();

    std::vector<std::int64_t> counts = labels.label_counts();
    for (int l = 0; l < L; ++l)
        if (counts[l] == 0)
            throw std::domain_error("estimate_class_params: class " + std::to_string(l) +
                                    " has no pixels");

    std::vector<Eigen::VectorXd> means(L, Eigen::VectorXd::Zero(q));
    for (std::int64_t i = 0; i < n; ++i) {
        const int l = labels.raw()[i];
        means[l] += pixel_vector(image, i);
    }
    for (int l = 0; l < L; ++l) means[l] /= static_cast<double>(counts[l]);

    std::vector<Eigen::MatrixXd> covs(L, Eigen::MatrixXd::Zero(q, q));
    for (std::int64_t i = 0; i < n; ++i) {
        const int l = labels.raw()[i];
        Eigen::VectorXd d = pixel_vector(image, i) - means[l];
        covs[l].noalias() += d * d.transpose();
    }

    std::vector<GaussianClass> classes(L);
    for (int l = 0; l < L; ++l) {
        covs[l] /= static_cast<double>(counts[l]);
        if (covs[l].trace() <= 0.0)
            covs[l] += 1e-12 * Eigen::MatrixXd::Identity(q, q);
        classes[l] = {means[l], covs[l], static_cast<double>(counts[l]) / n};
    }
    return ClassParams(std::move(classes));
}

std::vector<std::vector<double>> histogram_modes(const MultiSpectralImage& image, int bins) {
    if (bins < 4) throw std::invalid_argument("histogram_modes: too few bins");
    const int q = image.bands();
    const std::int64_t n = image.pixel_count();
    std::vector<std::vector<double>> modes(q);
    for (int b = 0; b < q; ++b) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::int64_t i = 0; i < n; ++i) {
            const double v = image.raw()[i * q + b];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(hi > lo)) {
            modes[b] = {lo};
            continue;
        }
        std::vector<double> hist(bins, 0.0);
        const double scale = bins / (hi - lo);
        for (std::int64_t i = 0; i < n; ++i) {
            int bin = static_cast<int>((image.raw()[i * q + b] - lo) * scale);
            hist[std::clamp(bin, 0, bins - 1)] += 1.0;
        }
        // 3-bin moving average guards against single-bin sampling noise.
        std::vector<double> smooth(bins);
        for (int i = 0; i < bins; ++i) {
            double s = hist[i];
            int cnt = 1;
            if (i > 0) {
                s += hist[i - 1];
                ++cnt;
            }
            if (i + 1 < bins) {
                s += hist[i + 1];
                ++cnt;
            }
            smooth[i] = s / cnt;
        }
        // Greedy picking from the tallest bin down. A candidate must sit at
        // least two bins from every accepted peak and be separated from each
        // taller accepted peak by a valley at most 0.9 of its own height.
        std::vector<int> order(bins);
        for (int i = 0; i < bins; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b2) { return smooth[a] > smooth[b2]; });
        std::vector<int> peaks;
        const double floor_height = 0.02 * smooth[order[0]];
        for (int idx : order) {
            if (smooth[idx] <= floor_height) break;
            bool ok = true;
            for (int p : peaks) {
                if (std::abs(p - idx) < 2) {
                    ok = false;
                    break;
                }
                double valley = smooth[idx];
                for (int i = std::min(p, idx); i <= std::max(p, idx); ++i)
                    valley = std::min(valley, smooth[i]);
                if (valley > 0.9 * smooth[idx]) {
                    ok = false;
                    break;
                }
            }
            if (ok) peaks.push_back(idx);
        }
        std::sort(peaks.begin(), peaks.end());
        for (int p : peaks) modes[b].push_back(lo + (p + 0.5) / scale);
    }
    return modes;
}

namespace {

struct MixtureState {
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    std::vector<double> weights;
};

MixtureState seed_random(const MultiSpectralImage& image, int L, std::uint64_t seed) {
    const int q = image.bands();
    const std::int64_t n = image.pixel_count();
    Eigen::VectorXd global_mean = Eigen::VectorXd::Zero(q);
    for (std::int64_t i = 0; i < n; ++i) global_mean += pixel_vector(image, i);
    global_mean /= static_cast<double>(n);
    Eigen::MatrixXd global_cov = Eigen::MatrixXd::Zero(q, q);
    for (std::int64_t i = 0; i < n; ++i) {
        Eigen::VectorXd d = pixel_vector(image, i) - global_mean;
        global_cov.noalias() += d * d.transpose();
    }
    global_cov /= static_cast<double>(n);
    global_cov = floor_eigenvalues(global_cov, 1e-6, 1e-12);

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int64_t> pick(0, n - 1);
    MixtureState st;
    std::vector<std::int64_t> chosen;
    while (static_cast<int>(st.means.size()) < L) {
        std::int64_t i = pick(rng);
        if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
        chosen.push_back(i);
        st.means.push_back(pixel_vector(image, i));
    }
    st.covs.assign(L, global_cov);
    st.weights.assign(L, 1.0 / L);
    return st;
}

}  // namespace

EmFitReport em_fit(const MultiSpectralImage& image, int label_count, const EmInit& init,
                   int max_iter, double tol) {
    if (label_count < 1) throw std::invalid_argument("em_fit: label_count must be positive");
    if (max_iter < 1) throw std::invalid_argument("em_fit: max_iter must be positive");
    if (tol <= 0.0) throw std::invalid_argument("em_fit: tol must be positive");
    const int L = label_count;
    const int q = image.bands();
    const std::int64_t n = image.pixel_count();
    if (n < static_cast<std::int64_t>(L) * (q + 1))
        throw std::invalid_argument("em_fit: not enough pixels for the class count");

    MixtureState st;
    if (const ClassParams* given = std::get_if<ClassParams>(&init)) {
        if (given->class_count() != L)
            throw std::invalid_argument("em_fit: init class count mismatch");
        for (const GaussianClass& c : given->classes()) {
            st.means.push_back(c.mean);
            st.covs.push_back(c.cov);
            st.weights.push_back(c.freq);
        }
    } else if (std::holds_alternative<HistogramModeSeed>(init)) {
        auto modes = histogram_modes(image);
        bool enough = true;
        for (const auto& m : modes) enough = enough && static_cast<int>(m.size()) >= L;
        if (enough) {
            st = seed_random(image, L, 0);  // covariance and weight defaults
            for (int l = 0; l < L; ++l) {
                Eigen::VectorXd mu(q);
                for (int b = 0; b < q; ++b) mu[b] = modes[b][l];
                st.means[l] = mu;
            }
        } else {
            st = seed_random(image, L, 0);
        }
    } else {
        st = seed_random(image, L, std::get<RandomSeed>(init).seed);
    }

    EmFitReport report;
    std::vector<double> log_resp(static_cast<std::size_t>(n) * L);
    std::vector<Eigen::LLT<Eigen::MatrixXd>> llts(L);
    std::vector<double> log_norms(L), log_weights(L);
    bool reseeded = false;

    const auto refresh_factorizations = [&]() {
        for (int l = 0; l < L; ++l) {
            st.covs[l] = floor_eigenvalues(st.covs[l], 1e-6, 1e-300);
            llts[l].compute(st.covs[l]);
            if (llts[l].info() != Eigen::Success) {
                st.covs[l] = floor_eigenvalues(st.covs[l], 1e-6, 1e-12);
                llts[l].compute(st.covs[l]);
                if (llts[l].info() != Eigen::Success)
                    throw std::domain_error("em_fit: covariance not factorizable");
            }
            double log_det = 0.0;
            for (int i = 0; i < q; ++i) log_det += 2.0 * std::log(llts[l].matrixL()(i, i));
            log_norms[l] = -0.5 * q * std::log(2.0 * std::numbers::pi) - 0.5 * log_det;
            log_weights[l] = st.weights[l] > 0.0 ? std::log(st.weights[l]) : -1e300;
        }
    };

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= max_iter; ++iter) {
        refresh_factorizations();

        // E-step: per-pixel posterior responsibilities, log domain.
        std::vector<double> row_ll(n, 0.0);
        parallel_for(0, n, [&](std::int64_t i) {
            Eigen::VectorXd x = pixel_vector(image, i);
            double m = -std::numeric_limits<double>::infinity();
            for (int l = 0; l < L; ++l) {
                Eigen::VectorXd y = llts[l].matrixL().solve(x - st.means[l]);
                double v = log_weights[l] + log_norms[l] - 0.5 * y.squaredNorm();
                log_resp[i * L + l] = v;
                m = std::max(m, v);
            }
            double z = 0.0;
            for (int l = 0; l < L; ++l) z += std::exp(log_resp[i * L + l] - m);
            const double lz = m + std::log(z);
            for (int l = 0; l < L; ++l)
                log_resp[i * L + l] = std::exp(log_resp[i * L + l] - lz);
            row_ll[i] = lz;
        });
        double ll = 0.0;
        for (std::int64_t i = 0; i < n; ++i) ll += row_ll[i];
        report.log_likelihood_trace.push_back(ll);
        report.iterations = iter;
        report.final_log_likelihood = ll;
        if (std::isfinite(prev_ll) && ll - prev_ll < tol) {
            report.converged = true;
            break;
        }
        prev_ll = ll;

        // Collapse guard before the M-step.
        std::vector<double> mass(L, 0.0);
        for (std::int64_t i = 0; i < n; ++i)
            for (int l = 0; l < L; ++l) mass[l] += log_resp[i * L + l];
        int collapsed = -1;
        for (int l = 0; l < L; ++l)
            if (mass[l] < q + 1) collapsed = l;
        if (collapsed >= 0) {
            if (reseeded)
                throw std::domain_error("em_fit: mixture collapsed twice; fit failed");
            reseeded = true;
            // Move the dead class onto the pixel the mixture explains worst.
            std::int64_t worst = 0;
            double worst_ll = std::numeric_limits<double>::infinity();
            for (std::int64_t i = 0; i < n; ++i) {
                if (row_ll[i] < worst_ll) {
                    worst_ll = row_ll[i];
                    worst = i;
                }
            }
            st.means[collapsed] = pixel_vector(image, worst);
            Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(q, q);
            for (int l = 0; l < L; ++l) avg += st.covs[l];
            st.covs[collapsed] = avg / L;
            double rest = 0.0;
            for (int l = 0; l < L; ++l)
                if (l != collapsed) rest += st.weights[l];
            for (int l = 0; l < L; ++l)
                st.weights[l] = (l == collapsed) ? 1.0 / n : st.weights[l] * (1.0 - 1.0 / n) / rest;
            prev_ll = -std::numeric_limits<double>::infinity();
            continue;
        }

        // M-step: responsibility-weighted moments, fresh means inside the
        // covariance update.
        for (int l = 0; l < L; ++l) {
            Eigen::VectorXd mu = Eigen::VectorXd::Zero(q);
            for (std::int64_t i = 0; i < n; ++i)
                mu += log_resp[i * L + l] * pixel_vector(image, i);
            mu /= mass[l];
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(q, q);
            for (std::int64_t i = 0; i < n; ++i) {
                Eigen::VectorXd d = pixel_vector(image, i) - mu;
                cov.noalias() += log_resp[i * L + l] * (d * d.transpose());
            }
            cov /= mass[l];
            st.means[l] = mu;
            st.covs[l] = cov;
            st.weights[l] = mass[l] / static_cast<double>(n);
        }
    }

    std::vector<GaussianClass> classes(L);
    double wsum = 0.0;
    for (int l = 0; l < L; ++l) wsum += st.weights[l];
    for (int l = 0; l < L; ++l)
        classes[l] = {st.means[l], floor_eigenvalues(st.covs[l], 1e-6, 1e-12),
                      st.weights[l] / wsum};
    report.params = ClassParams(std::move(classes));
    return report;
}

}  // namespace mrfseg
