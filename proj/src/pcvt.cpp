#include "mrfseg/pcvt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mrfseg/emission.hpp"
#include "mrfseg/parallel.hpp"

namespace mrfseg {

namespace {

constexpr double kLogFloor = -1e9;  // stands in for log 0; keeps scores ordered

double floor_log(double p) { return p > 0.0 ? std::log(p) : kLogFloor; }

int diagonal_first_row(int d, int width) { return std::max(0, d - width + 1); }

}  // namespace

std::vector<PixelPos> diagonal_pixels(int d, int height, int width) {
    std::vector<PixelPos> out;
    const int lo = diagonal_first_row(d, width);
    const int hi = std::min(height - 1, d);
    out.reserve(std::max(0, hi - lo + 1));
    for (int i = lo; i <= hi; ++i) out.push_back({i, d - i});
    return out;
}

int diagonal_count(int height, int width) { return height + width - 1; }

TransitionTensor estimate_transitions(const LabelMap& labels) {
    if (labels.height() < 2 || labels.width() < 2)
        throw std::invalid_argument("estimate_transitions: lattice must be at least 2x2");
    const int L = labels.label_count();
    TransitionTensor t;
    t.label_count = L;
    t.a.assign(static_cast<std::size_t>(L) * L * L, 0.0);
    for (int i = 1; i < labels.height(); ++i)
        for (int j = 1; j < labels.width(); ++j) {
            const int up = labels.at(i - 1, j);
            const int left = labels.at(i, j - 1);
            const int cur = labels.at(i, j);
            t.a[(static_cast<std::size_t>(up) * L + left) * L + cur] += 1.0;
        }
    for (int up = 0; up < L; ++up)
        for (int left = 0; left < L; ++left) {
            double* row = &t.a[(static_cast<std::size_t>(up) * L + left) * L];
            const double total = std::accumulate(row, row + L, 0.0);
            if (total > 0.0)
                for (int c = 0; c < L; ++c) row[c] /= total;
            else
                for (int c = 0; c < L; ++c) row[c] = 1.0 / L;
        }
    std::vector<std::int64_t> counts = labels.label_counts();
    t.pi.resize(L);
    for (int l = 0; l < L; ++l)
        t.pi[l] = static_cast<double>(counts[l]) / labels.pixel_count();
    return t;
}

namespace {

/// Per-pixel log densities and selection scores, pixel-major then label.
struct EmissionTables {
    int label_count;
    std::vector<double> density;    // log p(I_p | l)
    std::vector<double> selection;  // log p(I_p | l) + log pi_l, floored
};

EmissionTables build_emission_tables(const MultiSpectralImage& image,
                                     const ClassParams& params) {
    const int L = params.class_count();
    EmissionTables t;
    t.label_count = L;
    t.density.resize(static_cast<std::size_t>(image.pixel_count()) * L);
    t.selection.resize(t.density.size());
    std::vector<double> log_freq(L);
    for (int l = 0; l < L; ++l) log_freq[l] = floor_log(params.cls(l).freq);
    parallel_for(0, image.pixel_count(), [&](std::int64_t i) {
        const int r = static_cast<int>(i / image.width());
        const int c = static_cast<int>(i % image.width());
        auto px = image.pixel(r, c);
        for (int l = 0; l < L; ++l) {
            const double ll = params.log_density(l, px);
            t.density[i * L + l] = ll;
            t.selection[i * L + l] = ll + log_freq[l];
        }
    });
    return t;
}

void select_paths_impl(const EmissionTables& tables, int width, int d,
                       const std::vector<PixelPos>& pixels, int n,
                       std::vector<std::vector<int>>& sequences,
                       std::vector<double>& scores) {
    const int L = tables.label_count;
    const int len = static_cast<int>(pixels.size());
    sequences.clear();
    scores.clear();

    std::vector<int> best(len);
    double base = 0.0;
    for (int t = 0; t < len; ++t) {
        const std::int64_t p = static_cast<std::int64_t>(pixels[t].row) * width + pixels[t].col;
        int arg = 0;
        double val = tables.selection[p * L];
        for (int l = 1; l < L; ++l) {
            const double v = tables.selection[p * L + l];
            if (v > val) {
                val = v;
                arg = l;
            }
        }
        best[t] = arg;
        base += val;
    }
    sequences.push_back(best);
    scores.push_back(base);
    if (n == 1 || L == 1) return;

    struct Perturbation {
        double score;
        int position;
        int label;
    };
    std::vector<Perturbation> perturbations;
    perturbations.reserve(static_cast<std::size_t>(len) * (L - 1));
    for (int t = 0; t < len; ++t) {
        const std::int64_t p = static_cast<std::int64_t>(pixels[t].row) * width + pixels[t].col;
        const double drop = tables.selection[p * L + best[t]];
        for (int l = 0; l < L; ++l) {
            if (l == best[t]) continue;
            perturbations.push_back({base - drop + tables.selection[p * L + l], t, l});
        }
    }
    std::stable_sort(perturbations.begin(), perturbations.end(),
                     [](const Perturbation& a, const Perturbation& b) {
                         return a.score > b.score;
                     });
    const int take = std::min<std::int64_t>(n - 1, perturbations.size());
    for (int k = 0; k < take; ++k) {
        std::vector<int> seq = best;
        seq[perturbations[k].position] = perturbations[k].label;
        sequences.push_back(std::move(seq));
        scores.push_back(perturbations[k].score);
    }
    (void)d;
}

/// Floored log transition tables, including the single-parent marginals used
/// on the top row and left column.
struct TransitionTables {
    int label_count;
    std::vector<double> full;     // [up][left][cur]
    std::vector<double> no_up;    // [left][cur]: sum_up pi * a
    std::vector<double> no_left;  // [up][cur]:  sum_left pi * a
    std::vector<double> log_pi;

    double at(int up, int left, int cur) const {
        return full[(static_cast<std::size_t>(up) * label_count + left) * label_count + cur];
    }
};

TransitionTables build_transition_tables(const TransitionTensor& tensor) {
    const int L = tensor.label_count;
    TransitionTables t;
    t.label_count = L;
    t.full.resize(static_cast<std::size_t>(L) * L * L);
    t.no_up.assign(static_cast<std::size_t>(L) * L, 0.0);
    t.no_left.assign(static_cast<std::size_t>(L) * L, 0.0);
    t.log_pi.resize(L);
    for (int l = 0; l < L; ++l) t.log_pi[l] = floor_log(tensor.pi[l]);
    for (int up = 0; up < L; ++up)
        for (int left = 0; left < L; ++left)
            for (int cur = 0; cur < L; ++cur) {
                const double p = tensor.at(up, left, cur);
                t.full[(static_cast<std::size_t>(up) * L + left) * L + cur] = floor_log(p);
                t.no_up[static_cast<std::size_t>(left) * L + cur] += tensor.pi[up] * p;
                t.no_left[static_cast<std::size_t>(up) * L + cur] += tensor.pi[left] * p;
            }
    for (double& v : t.no_up) v = floor_log(v);
    for (double& v : t.no_left) v = floor_log(v);
    return t;
}

double transition_logprob_impl(const TransitionTables& tables, int prev_d,
                               const std::vector<int>& prev_seq,
                               const std::vector<int>& next_seq, int height, int width) {
    const int L = tables.label_count;
    const int d = prev_d + 1;
    const int prev_lo = diagonal_first_row(prev_d, width);
    const int lo = diagonal_first_row(d, width);
    const int hi = std::min(height - 1, d);
    double total = 0.0;
    for (int i = lo; i <= hi; ++i) {
        const int j = d - i;
        const int cur = next_seq[i - lo];
        if (i == 0) {
            const int left = prev_seq[0 - prev_lo];
            total += tables.no_up[static_cast<std::size_t>(left) * L + cur];
        } else if (j == 0) {
            const int up = prev_seq[(i - 1) - prev_lo];
            total += tables.no_left[static_cast<std::size_t>(up) * L + cur];
        } else {
            const int up = prev_seq[(i - 1) - prev_lo];
            const int left = prev_seq[i - prev_lo];
            total += tables.at(up, left, cur);
        }
    }
    return total;
}

ViterbiResult viterbi_impl(const MultiSpectralImage& image, const EmissionTables& em,
                           const TransitionTables& tables,
                           const DiagonalCandidates& candidates) {
    const int h = image.height();
    const int w = image.width();
    const int L = em.label_count;
    const int D = diagonal_count(h, w);
    if (static_cast<int>(candidates.sequences.size()) != D)
        throw std::invalid_argument("viterbi_decode: candidate list does not cover the lattice");

    // Emission score of candidate k on diagonal d.
    std::vector<std::vector<double>> b(D);
    std::vector<std::vector<PixelPos>> pixels(D);
    for (int d = 0; d < D; ++d) {
        pixels[d] = diagonal_pixels(d, h, w);
        const auto& seqs = candidates.sequences[d];
        if (seqs.empty())
            throw std::invalid_argument("viterbi_decode: empty candidate list on diagonal " +
                                        std::to_string(d));
        b[d].resize(seqs.size());
        for (std::size_t k = 0; k < seqs.size(); ++k) {
            if (seqs[k].size() != pixels[d].size())
                throw std::invalid_argument("viterbi_decode: candidate length mismatch");
            double s = 0.0;
            for (std::size_t t = 0; t < pixels[d].size(); ++t) {
                const std::int64_t p =
                    static_cast<std::int64_t>(pixels[d][t].row) * w + pixels[d][t].col;
                s += em.density[p * L + seqs[k][t]];
            }
            b[d][k] = s;
        }
    }

    std::vector<std::vector<double>> delta(D);
    std::vector<std::vector<int>> phi(D);
    delta[0].resize(candidates.sequences[0].size());
    for (std::size_t k = 0; k < delta[0].size(); ++k)
        delta[0][k] = tables.log_pi[candidates.sequences[0][k][0]] + b[0][k];

    for (int d = 0; d + 1 < D; ++d) {
        const auto& prev_seqs = candidates.sequences[d];
        const auto& next_seqs = candidates.sequences[d + 1];
        delta[d + 1].resize(next_seqs.size());
        phi[d + 1].resize(next_seqs.size());
        for (std::size_t l = 0; l < next_seqs.size(); ++l) {
            int best_k = 0;
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < prev_seqs.size(); ++k) {
                const double v =
                    delta[d][k] +
                    transition_logprob_impl(tables, d, prev_seqs[k], next_seqs[l], h, w);
                if (v > best) {
                    best = v;
                    best_k = static_cast<int>(k);
                }
            }
            delta[d + 1][l] = best + b[d + 1][l];
            phi[d + 1][l] = best_k;
        }
    }

    int pick = 0;
    for (std::size_t l = 1; l < delta[D - 1].size(); ++l)
        if (delta[D - 1][l] > delta[D - 1][pick]) pick = static_cast<int>(l);
    const double log_prob = delta[D - 1][pick];

    std::vector<int> chosen(D);
    chosen[D - 1] = pick;
    for (int d = D - 1; d > 0; --d) chosen[d - 1] = phi[d][chosen[d]];

    LabelMap labels(h, w, L, 0);
    for (int d = 0; d < D; ++d) {
        const auto& seq = candidates.sequences[d][chosen[d]];
        for (std::size_t t = 0; t < pixels[d].size(); ++t)
            labels.set(pixels[d][t].row, pixels[d][t].col, seq[t]);
    }
    return {std::move(labels), log_prob};
}

}  // namespace

void select_paths(const MultiSpectralImage& image, const ClassParams& params, int d, int n,
                  std::vector<std::vector<int>>& sequences_out,
                  std::vector<double>& scores_out) {
    if (n < 1) throw std::domain_error("select_paths: need at least one candidate");
    if (d < 0 || d >= diagonal_count(image.height(), image.width()))
        throw std::invalid_argument("select_paths: diagonal out of range");
    const EmissionTables tables = build_emission_tables(image, params);
    const auto pixels = diagonal_pixels(d, image.height(), image.width());
    select_paths_impl(tables, image.width(), d, pixels, n, sequences_out, scores_out);
}

DiagonalCandidates select_all_paths(const MultiSpectralImage& image, const ClassParams& params,
                                    int n) {
    if (n < 1) throw std::domain_error("select_all_paths: need at least one candidate");
    const EmissionTables tables = build_emission_tables(image, params);
    const int D = diagonal_count(image.height(), image.width());
    DiagonalCandidates out;
    out.sequences.resize(D);
    out.scores.resize(D);
    parallel_for(0, D, [&](std::int64_t d) {
        const auto pixels =
            diagonal_pixels(static_cast<int>(d), image.height(), image.width());
        select_paths_impl(tables, image.width(), static_cast<int>(d), pixels, n,
                          out.sequences[d], out.scores[d]);
    });
    return out;
}

double diagonal_transition_logprob(const TransitionTensor& tensor, int prev_diagonal,
                                   const std::vector<int>& prev_seq,
                                   const std::vector<int>& next_seq, int height, int width) {
    const auto prev_pixels = diagonal_pixels(prev_diagonal, height, width);
    const auto next_pixels = diagonal_pixels(prev_diagonal + 1, height, width);
    if (prev_seq.size() != prev_pixels.size() || next_seq.size() != next_pixels.size())
        throw std::invalid_argument("diagonal_transition_logprob: sequence length mismatch");
    const TransitionTables tables = build_transition_tables(tensor);
    return transition_logprob_impl(tables, prev_diagonal, prev_seq, next_seq, height, width);
}

ViterbiResult viterbi_decode(const MultiSpectralImage& image, const ClassParams& params,
                             const TransitionTensor& tensor,
                             const DiagonalCandidates& candidates) {
    const EmissionTables em = build_emission_tables(image, params);
    const TransitionTables tables = build_transition_tables(tensor);
    return viterbi_impl(image, em, tables, candidates);
}

namespace {

/// Gaussian moments from the labeling. Means are fresh; covariances reuse the
/// previous iteration's means when available. Classes thinner than two pixels
/// keep their previous parameters; only frequencies always refresh.
ClassParams moments_from_labeling(const MultiSpectralImage& image, const LabelMap& labels,
                                  std::vector<Eigen::VectorXd>& prev_means,
                                  std::vector<Eigen::MatrixXd>& prev_covs) {
    const int L = labels.label_count();
    const int q = image.bands();
    const std::int64_t n = image.pixel_count();
    const std::vector<std::int64_t> counts = labels.label_counts();

    std::vector<Eigen::VectorXd> means(L, Eigen::VectorXd::Zero(q));
    for (std::int64_t i = 0; i < n; ++i) {
        const int l = labels.raw()[i];
        auto px = image.pixel(static_cast<int>(i / image.width()),
                              static_cast<int>(i % image.width()));
        for (int bnd = 0; bnd < q; ++bnd) means[l][bnd] += px[bnd];
    }
    for (int l = 0; l < L; ++l)
        if (counts[l] > 0) means[l] /= static_cast<double>(counts[l]);

    const bool have_prev = !prev_means.empty();
    std::vector<Eigen::VectorXd> center(L);
    for (int l = 0; l < L; ++l) center[l] = have_prev ? prev_means[l] : means[l];

    std::vector<Eigen::MatrixXd> covs(L, Eigen::MatrixXd::Zero(q, q));
    for (std::int64_t i = 0; i < n; ++i) {
        const int l = labels.raw()[i];
        auto px = image.pixel(static_cast<int>(i / image.width()),
                              static_cast<int>(i % image.width()));
        Eigen::VectorXd d(q);
        for (int bnd = 0; bnd < q; ++bnd) d[bnd] = px[bnd] - center[l][bnd];
        covs[l].noalias() += d * d.transpose();
    }

    std::vector<GaussianClass> classes(L);
    for (int l = 0; l < L; ++l) {
        Eigen::VectorXd mu;
        Eigen::MatrixXd cov;
        if (counts[l] >= 2) {
            mu = means[l];
            cov = covs[l] / static_cast<double>(counts[l]);
            if (cov.trace() <= 0.0) cov += 1e-12 * Eigen::MatrixXd::Identity(q, q);
        } else if (have_prev) {
            mu = prev_means[l];
            cov = prev_covs[l];
        } else if (counts[l] == 1) {
            mu = means[l];
            cov = 1e-12 * Eigen::MatrixXd::Identity(q, q);
        } else {
            throw std::domain_error("pcvt_segment: class " + std::to_string(l) +
                                    " absent from the initial labeling");
        }
        classes[l] = {mu, cov, static_cast<double>(counts[l]) / n};
    }

    ClassParams params(std::move(classes));
    prev_means.resize(L);
    prev_covs.resize(L);
    for (int l = 0; l < L; ++l) {
        prev_means[l] = params.cls(l).mean;
        prev_covs[l] = params.cls(l).cov;
    }
    return params;
}

}  // namespace

PcvtReport pcvt_segment(const MultiSpectralImage& image, const LabelMap& init, int n,
                        int max_iter) {
    check_same_dims(init, image);
    if (n < 1) throw std::domain_error("pcvt_segment: need at least one candidate path");
    if (max_iter < 1) throw std::invalid_argument("pcvt_segment: max_iter must be >= 1");

    PcvtReport report{init, 0, {}, false, n};
    LabelMap current = init;
    std::vector<Eigen::VectorXd> prev_means;
    std::vector<Eigen::MatrixXd> prev_covs;

    for (int iter = 1; iter <= max_iter; ++iter) {
        const ClassParams params = moments_from_labeling(image, current, prev_means, prev_covs);
        const TransitionTensor tensor = estimate_transitions(current);
        const EmissionTables em = build_emission_tables(image, params);
        const TransitionTables tables = build_transition_tables(tensor);

        const int D = diagonal_count(image.height(), image.width());
        DiagonalCandidates candidates;
        candidates.sequences.resize(D);
        candidates.scores.resize(D);
        parallel_for(0, D, [&](std::int64_t d) {
            const auto pixels =
                diagonal_pixels(static_cast<int>(d), image.height(), image.width());
            select_paths_impl(em, image.width(), static_cast<int>(d), pixels, n,
                              candidates.sequences[d], candidates.scores[d]);
        });

        ViterbiResult decoded = viterbi_impl(image, em, tables, candidates);
        report.iterations = iter;
        report.decoded_log_prob_trace.push_back(decoded.log_prob);
        if (decoded.labels == current) {
            report.labels = std::move(decoded.labels);
            report.converged = true;
            return report;
        }
        current = std::move(decoded.labels);
        report.labels = current;
    }
    return report;
}

}  // namespace mrfseg
