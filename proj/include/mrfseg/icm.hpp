#ifndef MRFSEG_ICM_HPP
#define MRFSEG_ICM_HPP

#include <optional>
#include <vector>

#include "mrfseg/core.hpp"

// Iterated conditional modes on the second-order isotropic Potts posterior.
// A sweep visits the lattice in 9 cycles at stride 3: cycle (a, b) updates
// every pixel with row % 3 == a and col % 3 == b. Such pixels are mutually
// non-adjacent under the 8-neighborhood, so a simultaneous cycle update is
// exact coordinate ascent and parallelizes without locks. Emission parameters
// stay fixed throughout; only the smoothness weight is refreshed per sweep.

namespace mrfseg {

/// Local posterior score g(l) = log p(I_ij | l) + beta * U_ij(l), with the
/// agreement count taken over the current map around pos (the pixel itself is
/// never its own neighbor).
double icm_local_score(PixelPos pos, int candidate, const MultiSpectralImage& image,
                       const ClassParams& params, const LabelMap& labels, double beta);

struct IcmOptions {
    int max_iter = 100;
    bool reestimate_beta = true;
    std::optional<double> beta_override;
};

struct IcmReport {
    LabelMap labels;
    int iterations = 0;
    std::vector<int> changed_per_iteration;
    std::vector<double> beta_trace;
    bool converged = false;
};

/// Runs sweeps until one changes no pixel or max_iter is hit. Before each
/// sweep the smoothness weight is re-estimated from the current map unless an
/// override is given (or re-estimation is disabled, which freezes the first
/// estimate). A map that degenerates to a single label estimates as the
/// bracket top. Ties in the per-pixel argmax keep the incumbent label.
IcmReport icm_segment(const MultiSpectralImage& image, const LabelMap& init,
                      const ClassParams& params, const IcmOptions& options = {});

}  // namespace mrfseg

#endif
