#ifndef MRFSEG_POTTS_HPP
#define MRFSEG_POTTS_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "mrfseg/core.hpp"

// Isotropic Potts smoothness prior on a pixel lattice. The joint density is
// proportional to exp(beta * U_s) where U_s counts label-agreeing neighbor
// pairs once; the full conditional at one site is proportional to
// exp(beta * U_ij(l)) with U_ij(l) the number of neighbors carrying label l.
// Boundary sites simply have fewer neighbors. The estimated beta refers to the
// per-pixel conditional convention; both scales coincide in every score used
// here because pairwise terms enter differences only through local counts.

namespace mrfseg {

/// U_ij(candidate): how many in-bounds neighbors of pos carry `candidate`.
int agreement_count(const LabelMap& labels, PixelPos pos, int candidate, Neighborhood system);

/// All U_ij(l) for l in [0, L) in one neighborhood visit.
std::vector<int> agreement_counts(const LabelMap& labels, PixelPos pos, Neighborhood system);

/// U_s: number of unordered neighbor pairs with equal labels.
std::int64_t global_agreement(const LabelMap& labels, Neighborhood system);

/// p(s_ij = l | neighbors) for all l: softmax of beta * U_ij(l).
std::vector<double> conditional_distribution(const LabelMap& labels, PixelPos pos,
                                             const PottsModel& model);

/// Pseudo-likelihood score equation in beta,
///   sum_ij [ U_ij(s_ij) - sum_l U_ij(l) exp(beta U_ij(l)) / sum_l exp(beta U_ij(l)) ],
/// evaluated with per-pixel max subtraction. Its root is the maximum
/// pseudo-likelihood estimate of beta.
double pseudolikelihood_residual(double beta, const LabelMap& labels, Neighborhood system);

/// Negative log posterior up to an additive constant:
///   sum_ij -log p(I_ij | s_ij) - beta * U_s.  Lower is better.
double posterior_energy(const LabelMap& labels, const MultiSpectralImage& image,
                        const ClassParams& params, const PottsModel& model);

/// Brent root finder (bisection + secant + inverse quadratic steps). Returns x
/// with |f(x)| <= tol or bracket width <= tol. Throws std::invalid_argument
/// when f(lo) and f(hi) have the same nonzero sign. iterations_out, when
/// non-null, receives the number of accepted steps.
double brent_root(const std::function<double(double)>& f, double lo, double hi, double tol,
                  int max_iter, int* iterations_out = nullptr);

struct BetaEstimate {
    enum class Status { Root, ClampedLo, ClampedHi };
    double beta = 0.0;
    double residual_at_solution = 0.0;
    double bracket_lo = -10.0;
    double bracket_hi = 10.0;
    int iterations = 0;
    Status status = Status::Root;
};

/// Maximum pseudo-likelihood beta: root of the residual over the bracket via
/// brent_root. Without a sign change the endpoint with smaller |residual| is
/// returned with a Clamped status. A single-label map is degenerate and throws
/// std::domain_error; smoothing callers treat that case as beta = bracket hi.
BetaEstimate estimate_beta(const LabelMap& labels, Neighborhood system,
                           double bracket_lo = -10.0, double bracket_hi = 10.0,
                           double tol = 1e-8, int max_iter = 200);

}  // namespace mrfseg

#endif
