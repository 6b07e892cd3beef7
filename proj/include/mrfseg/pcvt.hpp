#ifndef MRFSEG_PCVT_HPP
#define MRFSEG_PCVT_HPP

#include <cstdint>
#include <vector>

#include "mrfseg/core.hpp"

// Path-constrained Viterbi training on the causal Markov mesh whose parents
// are the up and left pixels. Anti-diagonals of the lattice form a Markov
// chain, so decoding runs diagonal by diagonal; each diagonal is restricted to
// its N best candidate label sequences, which keeps the chain state space
// tractable. Training alternates decoding with empirical re-estimation of the
// transition tensor and the Gaussian emissions.

namespace mrfseg {

/// Pixels of anti-diagonal d (row + col == d) in ascending row order.
std::vector<PixelPos> diagonal_pixels(int d, int height, int width);
int diagonal_count(int height, int width);

/// Mesh transition law a[up][left][current] plus the label distribution pi.
/// Rows with observed support are probability vectors; unsupported parent
/// pairs carry the uniform vector. pi is the marginal label frequency, not the
/// top-left pixel's distribution, which a single image cannot estimate.
struct TransitionTensor {
    int label_count = 0;
    std::vector<double> a;    // [up * L * L + left * L + current]
    std::vector<double> pi;   // length L

    double at(int up, int left, int current) const {
        return a[(static_cast<std::size_t>(up) * label_count + left) * label_count + current];
    }
};

/// Empirical transition counts over all pixels with both parents in bounds.
TransitionTensor estimate_transitions(const LabelMap& labels);

/// Candidate label sequences for the diagonals. Entry one per diagonal is the
/// pixelwise argmax of emission times marginal frequency; the rest are its
/// single-position substitutions ranked by whole-sequence score.
struct DiagonalCandidates {
    // candidates[d] holds up to N sequences, each of length |diagonal d|.
    std::vector<std::vector<std::vector<int>>> sequences;
    std::vector<std::vector<double>> scores;  // same shape, non-increasing per diagonal
};

/// Candidates for one diagonal. Throws std::domain_error when n < 1.
void select_paths(const MultiSpectralImage& image, const ClassParams& params, int d, int n,
                  std::vector<std::vector<int>>& sequences_out,
                  std::vector<double>& scores_out);

/// Candidates for every diagonal.
DiagonalCandidates select_all_paths(const MultiSpectralImage& image, const ClassParams& params,
                                    int n);

/// log p(next diagonal sequence | previous diagonal sequence) under the mesh:
/// the product over next-diagonal pixels of a[up][left][current]. A pixel on
/// the top row or left column lacks one parent; the missing parent is
/// marginalized against pi. Zero-probability factors contribute a -1e9 floor
/// instead of -inf so scores stay totally ordered.
double diagonal_transition_logprob(const TransitionTensor& tensor, int prev_diagonal,
                                   const std::vector<int>& prev_seq,
                                   const std::vector<int>& next_seq, int height, int width);

struct ViterbiResult {
    LabelMap labels;
    double log_prob = 0.0;
};

/// Constrained Viterbi over the diagonal chain: delta starts from pi and the
/// first pixel's emission, recurses in log domain over candidate indices, and
/// backtracks from the best final candidate. Argmax ties take the smallest
/// candidate index.
ViterbiResult viterbi_decode(const MultiSpectralImage& image, const ClassParams& params,
                             const TransitionTensor& tensor,
                             const DiagonalCandidates& candidates);

struct PcvtReport {
    LabelMap labels;
    int iterations = 0;
    std::vector<double> decoded_log_prob_trace;
    bool converged = false;
    int n_used = 0;
};

/// Full training loop: re-estimate transitions, marginals and Gaussian
/// moments from the current labeling, rebuild candidates, decode, repeat until
/// the labeling reproduces its predecessor exactly or max_iter is reached.
/// The covariance update reuses the previous iteration's means where they
/// exist; a class that vanishes from the labeling keeps its last valid mean
/// and covariance and only its frequency is updated.
PcvtReport pcvt_segment(const MultiSpectralImage& image, const LabelMap& init, int n = 20,
                        int max_iter = 100);

}  // namespace mrfseg

#endif
