#ifndef MRFSEG_METRICS_HPP
#define MRFSEG_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mrfseg/core.hpp"

// Agreement statistics between a reference labeling and a prediction:
// confusion proportions, overall accuracy, the kappa coefficient with its
// asymptotic (Fleiss-Cohen-Everitt) variance and normal confidence interval,
// and relative improvement over a baseline. Overall accuracy and relative
// improvement exist in both proportion and percent flavors under distinct
// names; mixing the two conventions silently is a classic 100x bug.

namespace mrfseg {

/// Entry (i, j) is the proportion of pixels of reference class j that the
/// prediction assigned to class i.
struct ConfusionMatrix {
    int label_count = 0;
    std::int64_t n = 0;
    std::vector<double> p;  // row-major [predicted][reference]

    double at(int predicted, int reference) const {
        return p[static_cast<std::size_t>(predicted) * label_count + reference];
    }
    /// p_i+: proportion predicted as class i.
    double row_marginal(int i) const;
    /// p_+j: proportion of reference class j.
    double col_marginal(int j) const;
};

ConfusionMatrix confusion(const LabelMap& reference, const LabelMap& predicted);

/// Builds the matrix directly from proportions (must sum to 1 within 1e-9).
ConfusionMatrix confusion_from_proportions(int label_count, std::vector<double> proportions,
                                           std::int64_t n);

/// Trace of the confusion proportions, in [0, 1].
double overall_accuracy(const ConfusionMatrix& cm);
double overall_accuracy_percent(const ConfusionMatrix& cm);

/// (observed - expected) / (1 - expected) agreement. Throws std::domain_error
/// when the expected agreement is 1 (both maps constant).
double kappa(const ConfusionMatrix& cm);

struct KappaResult {
    double kappa = 0.0;
    double variance = 0.0;
    double sigma = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double alpha = 0.05;
};

/// Kappa with its asymptotic variance and the normal 100(1-alpha)% interval
/// kappa +- z_{alpha/2} * sigma.
KappaResult kappa_interval(const ConfusionMatrix& cm, double alpha = 0.05);

/// Inverse standard normal CDF by rational approximation, absolute error
/// below 1e-8 on (0, 1).
double normal_quantile(double prob);

/// (oa_method - oa_ml) / (100 - oa_ml) * 100, both arguments in percent.
/// Throws std::domain_error when oa_ml is 100.
double relative_improvement_percent(double oa_method_percent, double oa_ml_percent);
/// Same ratio with both accuracies as proportions; returns a proportion.
double relative_improvement_proportion(double oa_method, double oa_ml);

/// One CSV row of the evaluation report.
struct MethodScore {
    std::string method;
    double oa = 0.0;  // proportion
    KappaResult kappa;
    double ri_percent = 0.0;
};

/// Serializes rows under the fixed header
/// "method,OA,kappa,sigma,ci_low,ci_high,RI".
std::string method_scores_csv(const std::vector<MethodScore>& rows);

}  // namespace mrfseg

#endif
