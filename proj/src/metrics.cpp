#include "mrfseg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mrfseg {

double ConfusionMatrix::row_marginal(int i) const {
    double s = 0.0;
    for (int j = 0; j < label_count; ++j) s += at(i, j);
    return s;
}

double ConfusionMatrix::col_marginal(int j) const {
    double s = 0.0;
    for (int i = 0; i < label_count; ++i) s += at(i, j);
    return s;
}

ConfusionMatrix confusion(const LabelMap& reference, const LabelMap& predicted) {
    check_same_dims(reference, predicted);
    if (reference.label_count() != predicted.label_count())
        throw std::domain_error("confusion: label count mismatch");
    const int L = reference.label_count();
    ConfusionMatrix cm;
    cm.label_count = L;
    cm.n = reference.pixel_count();
    cm.p.assign(static_cast<std::size_t>(L) * L, 0.0);
    const auto ref = reference.raw();
    const auto pred = predicted.raw();
    for (std::size_t i = 0; i < ref.size(); ++i)
        cm.p[static_cast<std::size_t>(pred[i]) * L + ref[i]] += 1.0;
    for (double& v : cm.p) v /= static_cast<double>(cm.n);
    return cm;
}

ConfusionMatrix confusion_from_proportions(int label_count, std::vector<double> proportions,
                                           std::int64_t n) {
    if (label_count < 1 || n < 1)
        throw std::invalid_argument("confusion_from_proportions: bad shape");
    if (proportions.size() != static_cast<std::size_t>(label_count) * label_count)
        throw std::invalid_argument("confusion_from_proportions: size mismatch");
    double total = 0.0;
    for (double v : proportions) {
        if (v < 0.0) throw std::invalid_argument("confusion_from_proportions: negative entry");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("confusion_from_proportions: proportions must sum to 1");
    return {label_count, n, std::move(proportions)};
}

double overall_accuracy(const ConfusionMatrix& cm) {
    double s = 0.0;
    for (int i = 0; i < cm.label_count; ++i) s += cm.at(i, i);
    return s;
}

double overall_accuracy_percent(const ConfusionMatrix& cm) {
    return 100.0 * overall_accuracy(cm);
}

namespace {

double expected_agreement(const ConfusionMatrix& cm) {
    double pe = 0.0;
    for (int i = 0; i < cm.label_count; ++i) pe += cm.row_marginal(i) * cm.col_marginal(i);
    return pe;
}

}  // namespace

double kappa(const ConfusionMatrix& cm) {
    const double pe = expected_agreement(cm);
    if (pe >= 1.0 - 1e-12)
        throw std::domain_error("kappa: expected agreement is 1; kappa undefined");
    return (overall_accuracy(cm) - pe) / (1.0 - pe);
}

KappaResult kappa_interval(const ConfusionMatrix& cm, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("kappa_interval: alpha must lie in (0, 1)");
    if (cm.n < 2) throw std::invalid_argument("kappa_interval: need n >= 2");
    const int L = cm.label_count;
    const double k = kappa(cm);
    const double pe = expected_agreement(cm);

    double term_diag = 0.0;
    for (int i = 0; i < L; ++i) {
        const double bracket = 1.0 - (cm.col_marginal(i) + cm.row_marginal(i)) * (1.0 - k);
        term_diag += cm.at(i, i) * bracket * bracket;
    }
    double term_off = 0.0;
    for (int j = 0; j < L; ++j)
        for (int kk = 0; kk < L; ++kk) {
            if (j == kk) continue;
            const double m = cm.col_marginal(j) + cm.row_marginal(kk);
            term_off += cm.at(j, kk) * m * m;
        }
    const double term_center = k - pe * (1.0 - k);
    const double numerator =
        term_diag + (1.0 - k) * (1.0 - k) * term_off - term_center * term_center;
    const double variance = numerator / (static_cast<double>(cm.n) * (1.0 - pe) * (1.0 - pe));

    KappaResult out;
    out.kappa = k;
    out.variance = variance;
    out.sigma = variance > 0.0 ? std::sqrt(variance) : 0.0;
    out.alpha = alpha;
    const double z = normal_quantile(1.0 - alpha / 2.0);
    out.ci_low = k - z * out.sigma;
    out.ci_high = k + z * out.sigma;
    return out;
}

double normal_quantile(double prob) {
    if (!(prob > 0.0 && prob < 1.0))
        throw std::domain_error("normal_quantile: probability must lie in (0, 1)");
    // Rational approximation in three regions (central, two tails).
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (prob < p_low) {
        const double q = std::sqrt(-2.0 * std::log(prob));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (prob <= 1.0 - p_low) {
        const double q = prob - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - prob));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley step against the exact CDF tightens the approximation from
    // about 1e-9 to near machine precision.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - prob;
    const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

double relative_improvement_percent(double oa_method_percent, double oa_ml_percent) {
    if (oa_ml_percent >= 100.0)
        throw std::domain_error("relative_improvement: baseline accuracy of 100 leaves no room");
    return (oa_method_percent - oa_ml_percent) / (100.0 - oa_ml_percent) * 100.0;
}

double relative_improvement_proportion(double oa_method, double oa_ml) {
    if (oa_ml >= 1.0)
        throw std::domain_error("relative_improvement: baseline accuracy of 1 leaves no room");
    return (oa_method - oa_ml) / (1.0 - oa_ml);
}

std::string method_scores_csv(const std::vector<MethodScore>& rows) {
    std::string out = "method,OA,kappa,sigma,ci_low,ci_high,RI\n";
    char line[256];
    for (const MethodScore& r : rows) {
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6g,%.6f,%.6f,%.4f\n",
                      r.method.c_str(), r.oa, r.kappa.kappa, r.kappa.sigma, r.kappa.ci_low,
                      r.kappa.ci_high, r.ri_percent);
        out += line;
    }
    return out;
}

}  // namespace mrfseg
