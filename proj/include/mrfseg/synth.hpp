#ifndef MRFSEG_SYNTH_HPP
#define MRFSEG_SYNTH_HPP

#include <cstdint>
#include <vector>

#include "mrfseg/core.hpp"

// Synthetic experiment material: a deterministic two-disk phantom, Gaussian
// class noise, a mean filter and a Potts Gibbs sampler. All randomness comes
// from one documented counter-based scheme (splitmix64 finalizer over
// seed + position) so outputs are identical across platforms, runs and thread
// counts: draw k of a stream is mix64(seed + (k+1) * 0x9E3779B97F4A7C15).

namespace mrfseg {

/// k-th output of the splitmix64 stream started at `seed` (k from 0).
std::uint64_t counter_rng(std::uint64_t seed, std::uint64_t k);
/// Uniform double in (0, 1] from one counter draw.
double counter_uniform(std::uint64_t seed, std::uint64_t k);
/// Standard normal via Box-Muller from draws 2k and 2k+1.
double counter_normal(std::uint64_t seed, std::uint64_t k);

/// Background of label 0 with two disjoint disks of label 1 centered at
/// (0.33 height, 0.33 width) and (0.67 height, 0.67 width), radius
/// 0.18 * min(height, width).
LabelMap two_circles(int height = 241, int width = 241);

/// Vertical stripes of alternating labels, `stripe_width` columns each;
/// an exactly balanced two-class pattern when width is a multiple of
/// 2 * stripe_width.
LabelMap stripes(int height, int width, int stripe_width);

struct NoiseSpec {
    struct ClassNoise {
        double mean = 0.0;
        double stddev = 1.0;
    };
    std::vector<ClassNoise> classes;
    std::uint64_t seed = 0;
};

/// Single-band image with pixel (r, c) ~ N(mean, stddev^2) of its class,
/// drawn independently from the counter stream at position r*width + c.
/// Throws std::domain_error when a present label has no spec entry.
MultiSpectralImage render_noise(const LabelMap& labels, const NoiseSpec& spec);

/// 5x5 uniform mean filter with border replication; single band only.
MultiSpectralImage smooth(const MultiSpectralImage& image);

/// Rounds every value to the nearest integer and clamps into [lo, hi];
/// emulates storage at integer gray levels.
MultiSpectralImage quantize(const MultiSpectralImage& image, double lo = 0.0,
                            double hi = 255.0);

/// Raster-scan single-site Gibbs sampler for the second-order Potts law with
/// the given smoothness. Labels start i.i.d. uniform (stream positions
/// 0..n-1); sweep t updates site i with the uniform draw at (t+1)*n + i. The
/// stream seed is the given seed xor 0xD1B54A32D192ED03 so noise and sampler
/// streams never overlap.
LabelMap potts_gibbs(int height, int width, int label_count, double beta, int sweeps,
                     std::uint64_t seed);

}  // namespace mrfseg

#endif
