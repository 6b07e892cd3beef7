#ifndef MRFSEG_CORE_HPP
#define MRFSEG_CORE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

// Shared value types for images, labelings, neighborhoods and class-conditional
// Gaussian parameters. All types are immutable after construction and safe to
// share across threads.

namespace mrfseg {

struct PixelPos {
    int row = 0;
    int col = 0;
    bool operator==(const PixelPos&) const = default;
};

/// Observed intensity field: height x width pixels, q real values per pixel.
class MultiSpectralImage {
public:
    MultiSpectralImage(int height, int width, int bands);
    MultiSpectralImage(int height, int width, int bands, std::vector<double> values);

    int height() const { return height_; }
    int width() const { return width_; }
    int bands() const { return bands_; }
    std::int64_t pixel_count() const { return static_cast<std::int64_t>(height_) * width_; }

    double value(int row, int col, int band = 0) const {
        return values_[(static_cast<std::size_t>(row) * width_ + col) * bands_ + band];
    }
    void set_value(int row, int col, int band, double v) {
        values_[(static_cast<std::size_t>(row) * width_ + col) * bands_ + band] = v;
    }
    /// All q values of one pixel, contiguous.
    std::span<const double> pixel(int row, int col) const {
        return {values_.data() + (static_cast<std::size_t>(row) * width_ + col) * bands_,
                static_cast<std::size_t>(bands_)};
    }
    std::span<const double> raw() const { return values_; }

    /// Throws std::domain_error if any stored value is non-finite.
    void validate_finite() const;

private:
    int height_;
    int width_;
    int bands_;
    std::vector<double> values_;
};

/// A labeling: one label in [0, L) per pixel. Labels are 0-based contiguous
/// integers; any external alphabet is remapped at IO time.
class LabelMap {
public:
    LabelMap(int height, int width, int label_count, int fill = 0);
    LabelMap(int height, int width, int label_count, std::vector<int> labels);

    int height() const { return height_; }
    int width() const { return width_; }
    int label_count() const { return label_count_; }
    std::int64_t pixel_count() const { return static_cast<std::int64_t>(height_) * width_; }

    int at(int row, int col) const {
        return labels_[static_cast<std::size_t>(row) * width_ + col];
    }
    void set(int row, int col, int label) {
        labels_[static_cast<std::size_t>(row) * width_ + col] = label;
    }
    std::span<const int> raw() const { return labels_; }

    /// Number of distinct labels actually present.
    int distinct_labels() const;
    /// Per-label pixel counts, length label_count().
    std::vector<std::int64_t> label_counts() const;

    bool operator==(const LabelMap&) const = default;

private:
    int height_;
    int width_;
    int label_count_;
    std::vector<int> labels_;
};

enum class Neighborhood {
    FirstOrderIsotropic,   // 4 neighbors
    SecondOrderIsotropic,  // 8 neighbors
    CausalDiagonal,        // 6 neighbors: the Markov-mesh induced field
};

struct Offset {
    int dr = 0;
    int dc = 0;
};

/// Offsets of a neighborhood kind in row-major scan order.
///
/// CausalDiagonal is the neighborhood induced by the causal mesh whose parents
/// are the up and left pixels: the two parents, the two mirrored children, and
/// the two anti-diagonal completions that share a factor with the center
/// ((-1,+1) from the right child's factor and (+1,-1) from the down child's).
std::span<const Offset> neighbor_offsets(Neighborhood kind);

/// In-bounds neighbors of pos, clipped at the lattice boundary, in the fixed
/// row-major offset order. Throws std::domain_error when pos is out of bounds.
std::vector<PixelPos> neighbors(PixelPos pos, Neighborhood kind, int height, int width);

/// One class-conditional Gaussian plus its marginal frequency.
struct GaussianClass {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    double freq = 0.0;
};

/// Validated per-class Gaussian parameters. Construction factorizes every
/// covariance; a non-SPD covariance gets a single ridge of 1e-8*trace/q, and a
/// second factorization failure is fatal. Frequencies must sum to 1 (1e-9).
class ClassParams {
public:
    explicit ClassParams(std::vector<GaussianClass> classes);

    int class_count() const { return static_cast<int>(classes_.size()); }
    int bands() const { return static_cast<int>(classes_[0].mean.size()); }
    const GaussianClass& cls(int label) const { return classes_[label]; }
    const std::vector<GaussianClass>& classes() const { return classes_; }

    /// log N(x; mu_l, Sigma_l) using the cached factorization.
    double log_density(int label, std::span<const double> x) const;

    /// Same parameters with replaced frequencies (must sum to 1).
    ClassParams with_frequencies(const std::vector<double>& freqs) const;

private:
    std::vector<GaussianClass> classes_;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> cholesky_;
    std::vector<double> log_norm_;  // -q/2 log(2pi) - 1/2 log|Sigma|
};

/// Isotropic Potts prior: smoothness beta over a first- or second-order system.
struct PottsModel {
    double beta = 0.0;
    Neighborhood neighborhood = Neighborhood::SecondOrderIsotropic;

    PottsModel(double beta_, Neighborhood kind);
};

/// Throws std::invalid_argument unless the labeling and image dimensions agree.
void check_same_dims(const LabelMap& labels, const MultiSpectralImage& image);
void check_same_dims(const LabelMap& a, const LabelMap& b);

}  // namespace mrfseg

#endif
