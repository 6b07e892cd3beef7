#include "mrfseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mrfseg/parallel.hpp"
#include "mrfseg/potts.hpp"

namespace mrfseg {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kGibbsSalt = 0xD1B54A32D192ED03ULL;
}  // namespace

std::uint64_t counter_rng(std::uint64_t seed, std::uint64_t k) {
    std::uint64_t z = seed + (k + 1) * kGamma;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double counter_uniform(std::uint64_t seed, std::uint64_t k) {
    return ((counter_rng(seed, k) >> 11) + 1.0) * 0x1.0p-53;
}

double counter_normal(std::uint64_t seed, std::uint64_t k) {
    const double u1 = counter_uniform(seed, 2 * k);
    const double u2 = counter_uniform(seed, 2 * k + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

LabelMap two_circles(int height, int width) {
    if (height < 32 || width < 32)
        throw std::invalid_argument("two_circles: lattice must be at least 32x32");
    LabelMap out(height, width, 2, 0);
    const double r = 0.18 * std::min(height, width);
    const double r2 = r * r;
    const double cy[2] = {0.33 * height, 0.67 * height};
    const double cx[2] = {0.33 * width, 0.67 * width};
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j)
            for (int k = 0; k < 2; ++k) {
                const double dy = i - cy[k];
                const double dx = j - cx[k];
                if (dy * dy + dx * dx <= r2) out.set(i, j, 1);
            }
    return out;
}

LabelMap stripes(int height, int width, int stripe_width) {
    if (stripe_width < 1) throw std::invalid_argument("stripes: stripe width must be positive");
    LabelMap out(height, width, 2, 0);
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j) out.set(i, j, (j / stripe_width) % 2);
    return out;
}

MultiSpectralImage render_noise(const LabelMap& labels, const NoiseSpec& spec) {
    const auto counts = labels.label_counts();
    for (int l = 0; l < labels.label_count(); ++l) {
        if (counts[l] == 0) continue;
        if (l >= static_cast<int>(spec.classes.size()))
            throw std::domain_error("render_noise: no noise spec for class " +
                                    std::to_string(l));
        if (!(spec.classes[l].stddev > 0.0))
            throw std::domain_error("render_noise: class " + std::to_string(l) +
                                    " needs a positive standard deviation");
    }
    MultiSpectralImage out(labels.height(), labels.width(), 1);
    const int w = labels.width();
    parallel_for(0, labels.pixel_count(), [&](std::int64_t i) {
        const int r = static_cast<int>(i / w);
        const int c = static_cast<int>(i % w);
        const NoiseSpec::ClassNoise& cn = spec.classes[labels.at(r, c)];
        out.set_value(r, c, 0, cn.mean + cn.stddev * counter_normal(spec.seed, i));
    });
    return out;
}

MultiSpectralImage smooth(const MultiSpectralImage& image) {
    if (image.bands() != 1) throw std::invalid_argument("smooth: single-band images only");
    const int h = image.height();
    const int w = image.width();
    MultiSpectralImage out(h, w, 1);
    parallel_for(0, static_cast<std::int64_t>(h), [&](std::int64_t row) {
        const int r = static_cast<int>(row);
        for (int c = 0; c < w; ++c) {
            double s = 0.0;
            for (int dr = -2; dr <= 2; ++dr)
                for (int dc = -2; dc <= 2; ++dc) {
                    const int rr = std::clamp(r + dr, 0, h - 1);
                    const int cc = std::clamp(c + dc, 0, w - 1);
                    s += image.value(rr, cc);
                }
            out.set_value(r, c, 0, s / 25.0);
        }
    });
    return out;
}

MultiSpectralImage quantize(const MultiSpectralImage& image, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("quantize: empty range");
    MultiSpectralImage out(image.height(), image.width(), image.bands());
    for (int r = 0; r < image.height(); ++r)
        for (int c = 0; c < image.width(); ++c)
            for (int b = 0; b < image.bands(); ++b) {
                const double v = std::nearbyint(image.value(r, c, b));
                out.set_value(r, c, b, std::clamp(v, lo, hi));
            }
    return out;
}

LabelMap potts_gibbs(int height, int width, int label_count, double beta, int sweeps,
                     std::uint64_t seed) {
    if (label_count < 2) throw std::invalid_argument("potts_gibbs: need at least two labels");
    if (sweeps < 1) throw std::invalid_argument("potts_gibbs: need at least one sweep");
    const std::uint64_t s = seed ^ kGibbsSalt;
    const std::int64_t n = static_cast<std::int64_t>(height) * width;

    std::vector<int> init(n);
    for (std::int64_t i = 0; i < n; ++i)
        init[i] = std::min<int>(label_count - 1,
                                static_cast<int>(counter_uniform(s, i) * label_count));
    LabelMap labels(height, width, label_count, std::move(init));

    const PottsModel model(beta, Neighborhood::SecondOrderIsotropic);
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        for (std::int64_t i = 0; i < n; ++i) {
            const int r = static_cast<int>(i / width);
            const int c = static_cast<int>(i % width);
            const std::vector<double> p = conditional_distribution(labels, {r, c}, model);
            const double u = counter_uniform(s, static_cast<std::uint64_t>(sweep + 1) * n + i);
            double acc = 0.0;
            int pick = label_count - 1;
            for (int l = 0; l < label_count; ++l) {
                acc += p[l];
                if (u <= acc) {
                    pick = l;
                    break;
                }
            }
            labels.set(r, c, pick);
        }
    }
    return labels;
}

}  // namespace mrfseg
