#ifndef MRFSEG_EMISSION_HPP
#define MRFSEG_EMISSION_HPP

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "mrfseg/core.hpp"

// Class-conditional multivariate Gaussian emissions: pointwise log densities,
// maximum-likelihood pixel classification, supervised moment estimation, and
// unsupervised mixture fitting by expectation maximization. Everything runs in
// log domain; per-pixel products over large windows would underflow doubles.

namespace mrfseg {

/// log N(x; mean, cov). Throws std::domain_error when cov is not symmetric
/// positive definite.
double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov);

/// Per-pixel argmax of the class-conditional log density; ties go to the
/// smallest label index. Class frequencies are ignored.
LabelMap ml_classify(const MultiSpectralImage& image, const ClassParams& params);

/// H x W x L array of log densities, pixel-major then label.
std::vector<double> log_likelihood_map(const MultiSpectralImage& image,
                                       const ClassParams& params);

/// Per-class empirical mean, biased covariance (count in the denominator) and
/// marginal frequency count/total. An absent class raises std::domain_error
/// naming the class; an all-constant class gets a near-zero diagonal ridge so
/// the covariance stays factorizable.
ClassParams estimate_class_params(const MultiSpectralImage& image, const LabelMap& labels);

/// Seeding policies for em_fit when no explicit parameters are given.
struct HistogramModeSeed {};
struct RandomSeed {
    std::uint64_t seed = 0;
};
using EmInit = std::variant<ClassParams, HistogramModeSeed, RandomSeed>;

struct EmFitReport {
    int iterations = 0;
    double final_log_likelihood = 0.0;
    bool converged = false;
    std::vector<double> log_likelihood_trace;
    std::optional<ClassParams> params;
};

/// Gaussian mixture fit: E-step responsibilities, M-step weighted moments,
/// stop when the log-likelihood gain drops below tol or max_iter is reached.
/// Mode seeding finds per-band histogram peaks (64 bins, greedy picking, two
/// bins minimum separation, a 10 percent prominence dip, peaks under 2 percent
/// of the tallest bin ignored) and falls back to random seeding when any band
/// has fewer than L peaks. A class whose
/// responsibility mass falls below q+1 is reseeded once from the worst-fit
/// pixel; a second collapse raises std::domain_error. Covariance eigenvalues
/// are floored at 1e-6 times the largest per class.
EmFitReport em_fit(const MultiSpectralImage& image, int label_count, const EmInit& init,
                   int max_iter = 100, double tol = 1e-6);

/// Band-wise histogram mode centers used by the seeding policy; exposed for
/// direct inspection. Returns one vector of mode positions per band, sorted
/// ascending.
std::vector<std::vector<double>> histogram_modes(const MultiSpectralImage& image, int bins = 64);

}  // namespace mrfseg

#endif
