#include "mrfseg/core.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mrfseg {

MultiSpectralImage::MultiSpectralImage(int height, int width, int bands)
    : height_(height), width_(width), bands_(bands) {
    if (height <= 0 || width <= 0 || bands <= 0)
        throw std::invalid_argument("MultiSpectralImage: dimensions must be positive");
    values_.assign(static_cast<std::size_t>(height) * width * bands, 0.0);
}

MultiSpectralImage::MultiSpectralImage(int height, int width, int bands,
                                       std::vector<double> values)
    : height_(height), width_(width), bands_(bands), values_(std::move(values)) {
    if (height <= 0 || width <= 0 || bands <= 0)
        throw std::invalid_argument("MultiSpectralImage: dimensions must be positive");
    if (values_.size() != static_cast<std::size_t>(height) * width * bands)
        throw std::invalid_argument("MultiSpectralImage: value buffer size mismatch");
}

void MultiSpectralImage::validate_finite() const {
    for (double v : values_)
        if (!std::isfinite(v))
            throw std::domain_error("MultiSpectralImage: non-finite pixel value");
}

LabelMap::LabelMap(int height, int width, int label_count, int fill)
    : height_(height), width_(width), label_count_(label_count) {
    if (height <= 0 || width <= 0 || label_count <= 0)
        throw std::invalid_argument("LabelMap: dimensions must be positive");
    if (fill < 0 || fill >= label_count)
        throw std::invalid_argument("LabelMap: fill label out of range");
    labels_.assign(static_cast<std::size_t>(height) * width, fill);
}

LabelMap::LabelMap(int height, int width, int label_count, std::vector<int> labels)
    : height_(height), width_(width), label_count_(label_count), labels_(std::move(labels)) {
    if (height <= 0 || width <= 0 || label_count <= 0)
        throw std::invalid_argument("LabelMap: dimensions must be positive");
    if (labels_.size() != static_cast<std::size_t>(height) * width)
        throw std::invalid_argument("LabelMap: label buffer size mismatch");
    for (int l : labels_)
        if (l < 0 || l >= label_count_)
            throw std::invalid_argument("LabelMap: label out of range");
}

int LabelMap::distinct_labels() const {
    std::vector<char> seen(label_count_, 0);
    for (int l : labels_) seen[l] = 1;
    int n = 0;
    for (char s : seen) n += s;
    return n;
}

std::vector<std::int64_t> LabelMap::label_counts() const {
    std::vector<std::int64_t> counts(label_count_, 0);
    for (int l : labels_) ++counts[l];
    return counts;
}

namespace {

constexpr std::array<Offset, 4> kFirstOrder = {{{-1, 0}, {0, -1}, {0, 1}, {1, 0}}};
constexpr std::array<Offset, 8> kSecondOrder = {
    {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};
constexpr std::array<Offset, 6> kCausalDiagonal = {
    {{-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}}};

}  // namespace

std::span<const Offset> neighbor_offsets(Neighborhood kind) {
    switch (kind) {
        case Neighborhood::FirstOrderIsotropic: return kFirstOrder;
        case Neighborhood::SecondOrderIsotropic: return kSecondOrder;
        case Neighborhood::CausalDiagonal: return kCausalDiagonal;
    }
    throw std::invalid_argument("neighbor_offsets: unknown neighborhood");
}

std::vector<PixelPos> neighbors(PixelPos pos, Neighborhood kind, int height, int width) {
    if (pos.row < 0 || pos.row >= height || pos.col < 0 || pos.col >= width)
        throw std::domain_error("neighbors: position out of bounds");
    std::vector<PixelPos> out;
    auto offsets = neighbor_offsets(kind);
    out.reserve(offsets.size());
    for (const Offset& o : offsets) {
        int r = pos.row + o.dr;
        int c = pos.col + o.dc;
        if (r >= 0 && r < height && c >= 0 && c < width) out.push_back({r, c});
    }
    return out;
}

ClassParams::ClassParams(std::vector<GaussianClass> classes) : classes_(std::move(classes)) {
    if (classes_.empty()) throw std::invalid_argument("ClassParams: empty class list");
    const int q = static_cast<int>(classes_[0].mean.size());
    if (q <= 0) throw std::invalid_argument("ClassParams: empty mean vector");

    double freq_sum = 0.0;
    for (const GaussianClass& c : classes_) {
        if (c.mean.size() != q)
            throw std::invalid_argument("ClassParams: inconsistent mean dimension");
        if (c.cov.rows() != q || c.cov.cols() != q)
            throw std::invalid_argument("ClassParams: covariance dimension mismatch");
        if (c.freq < 0.0) throw std::invalid_argument("ClassParams: negative frequency");
        freq_sum += c.freq;
    }
    if (std::abs(freq_sum - 1.0) > 1e-9)
        throw std::invalid_argument("ClassParams: frequencies must sum to 1");

    cholesky_.reserve(classes_.size());
    log_norm_.reserve(classes_.size());
    for (GaussianClass& c : classes_) {
        Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
        if (llt.info() != Eigen::Success) {
            const double ridge = 1e-8 * c.cov.trace() / q;
            c.cov += ridge * Eigen::MatrixXd::Identity(q, q);
            llt.compute(c.cov);
            if (llt.info() != Eigen::Success)
                throw std::domain_error("ClassParams: covariance not positive definite");
        }
        double log_det = 0.0;
        for (int i = 0; i < q; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
        cholesky_.push_back(std::move(llt));
        log_norm_.push_back(-0.5 * q * std::log(2.0 * std::numbers::pi) - 0.5 * log_det);
    }
}

double ClassParams::log_density(int label, std::span<const double> x) const {
    const GaussianClass& c = classes_[label];
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::VectorXd d = xv - c.mean;
    // Solve L y = d; then d' Sigma^-1 d = |y|^2.
    Eigen::VectorXd y = cholesky_[label].matrixL().solve(d);
    return log_norm_[label] - 0.5 * y.squaredNorm();
}

ClassParams ClassParams::with_frequencies(const std::vector<double>& freqs) const {
    if (static_cast<int>(freqs.size()) != class_count())
        throw std::invalid_argument("with_frequencies: size mismatch");
    std::vector<GaussianClass> out = classes_;
    for (std::size_t i = 0; i < out.size(); ++i) out[i].freq = freqs[i];
    return ClassParams(std::move(out));
}

PottsModel::PottsModel(double beta_, Neighborhood kind) : beta(beta_), neighborhood(kind) {
    if (!std::isfinite(beta_)) throw std::invalid_argument("PottsModel: beta must be finite");
    if (kind == Neighborhood::CausalDiagonal)
        throw std::invalid_argument("PottsModel: requires an isotropic neighborhood");
}

void check_same_dims(const LabelMap& labels, const MultiSpectralImage& image) {
    if (labels.height() != image.height() || labels.width() != image.width())
        throw std::invalid_argument("dimension mismatch between labeling and image");
}

void check_same_dims(const LabelMap& a, const LabelMap& b) {
    if (a.height() != b.height() || a.width() != b.width())
        throw std::invalid_argument("dimension mismatch between labelings");
}

}  // namespace mrfseg
