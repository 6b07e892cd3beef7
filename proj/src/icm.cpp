#include "mrfseg/icm.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "mrfseg/parallel.hpp"
#include "mrfseg/potts.hpp"

namespace mrfseg {

double icm_local_score(PixelPos pos, int candidate, const MultiSpectralImage& image,
                       const ClassParams& params, const LabelMap& labels, double beta) {
    const int u = agreement_count(labels, pos, candidate, Neighborhood::SecondOrderIsotropic);
    return params.log_density(candidate, image.pixel(pos.row, pos.col)) + beta * u;
}

namespace {

double sweep_beta(const LabelMap& labels, const IcmOptions& options, bool first_sweep,
                  double previous) {
    if (options.beta_override) return *options.beta_override;
    if (!options.reestimate_beta && !first_sweep) return previous;
    try {
        return estimate_beta(labels, Neighborhood::SecondOrderIsotropic).beta;
    } catch (const std::domain_error&) {
        return 10.0;  // degenerate single-label map: strongest bracket smoothing
    }
}

}  // namespace

IcmReport icm_segment(const MultiSpectralImage& image, const LabelMap& init,
                      const ClassParams& params, const IcmOptions& options) {
    check_same_dims(init, image);
    if (init.label_count() != params.class_count())
        throw std::invalid_argument("icm_segment: label count mismatch with parameters");
    if (options.max_iter < 1) throw std::invalid_argument("icm_segment: max_iter must be >= 1");

    const int h = image.height();
    const int w = image.width();
    const int L = params.class_count();

    IcmReport report{init, 0, {}, {}, false};
    LabelMap& labels = report.labels;
    double beta = 0.0;

    for (int sweep = 1; sweep <= options.max_iter; ++sweep) {
        beta = sweep_beta(labels, options, sweep == 1, beta);
        report.beta_trace.push_back(beta);

        std::atomic<int> changed{0};
        for (int cycle_row = 0; cycle_row < 3; ++cycle_row) {
            for (int cycle_col = 0; cycle_col < 3; ++cycle_col) {
                const int rows = (h - cycle_row + 2) / 3;
                parallel_for(0, rows, [&](std::int64_t k) {
                    const int r = cycle_row + 3 * static_cast<int>(k);
                    int local_changed = 0;
                    for (int c = cycle_col; c < w; c += 3) {
                        const PixelPos pos{r, c};
                        auto px = image.pixel(r, c);
                        std::vector<int> u =
                            agreement_counts(labels, pos, Neighborhood::SecondOrderIsotropic);
                        const int current = labels.at(r, c);
                        int best = current;
                        double best_g = params.log_density(current, px) + beta * u[current];
                        for (int l = 0; l < L; ++l) {
                            if (l == current) continue;
                            const double g = params.log_density(l, px) + beta * u[l];
                            if (g > best_g) {
                                best_g = g;
                                best = l;
                            }
                        }
                        if (best != current) {
                            labels.set(r, c, best);
                            ++local_changed;
                        }
                    }
                    if (local_changed) changed += local_changed;
                });
            }
        }

        report.iterations = sweep;
        report.changed_per_iteration.push_back(changed.load());
        if (changed.load() == 0) {
            report.converged = true;
            break;
        }
    }
    return report;
}

}  // namespace mrfseg
