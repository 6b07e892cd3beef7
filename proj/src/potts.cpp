#include "mrfseg/potts.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mrfseg/parallel.hpp"

namespace mrfseg {

int agreement_count(const LabelMap& labels, PixelPos pos, int candidate, Neighborhood system) {
    int count = 0;
    for (const Offset& o : neighbor_offsets(system)) {
        int r = pos.row + o.dr;
        int c = pos.col + o.dc;
        if (r >= 0 && r < labels.height() && c >= 0 && c < labels.width() &&
            labels.at(r, c) == candidate)
            ++count;
    }
    return count;
}

std::vector<int> agreement_counts(const LabelMap& labels, PixelPos pos, Neighborhood system) {
    std::vector<int> counts(labels.label_count(), 0);
    for (const Offset& o : neighbor_offsets(system)) {
        int r = pos.row + o.dr;
        int c = pos.col + o.dc;
        if (r >= 0 && r < labels.height() && c >= 0 && c < labels.width())
            ++counts[labels.at(r, c)];
    }
    return counts;
}

std::int64_t global_agreement(const LabelMap& labels, Neighborhood system) {
    // Each unordered pair is visited once through its forward offset
    // (dr > 0, or dr == 0 and dc > 0).
    std::int64_t total = 0;
    for (int r = 0; r < labels.height(); ++r) {
        for (int c = 0; c < labels.width(); ++c) {
            const int l = labels.at(r, c);
            for (const Offset& o : neighbor_offsets(system)) {
                if (o.dr < 0 || (o.dr == 0 && o.dc < 0)) continue;
                int rr = r + o.dr;
                int cc = c + o.dc;
                if (rr < labels.height() && cc >= 0 && cc < labels.width() &&
                    labels.at(rr, cc) == l)
                    ++total;
            }
        }
    }
    return total;
}

std::vector<double> conditional_distribution(const LabelMap& labels, PixelPos pos,
                                             const PottsModel& model) {
    std::vector<int> u = agreement_counts(labels, pos, model.neighborhood);
    std::vector<double> p(u.size());
    double zmax = -1e300;
    for (std::size_t l = 0; l < u.size(); ++l) {
        p[l] = model.beta * u[l];
        zmax = std::max(zmax, p[l]);
    }
    double z = 0.0;
    for (double& v : p) {
        v = std::exp(v - zmax);
        z += v;
    }
    for (double& v : p) v /= z;
    return p;
}

double pseudolikelihood_residual(double beta, const LabelMap& labels, Neighborhood system) {
    const int h = labels.height();
    const int w = labels.width();
    std::vector<double> row_sums(h, 0.0);
    parallel_for(0, h, [&](std::int64_t row) {
        const int r = static_cast<int>(row);
        double acc = 0.0;
        for (int c = 0; c < w; ++c) {
            std::vector<int> u = agreement_counts(labels, {r, c}, system);
            double zmax = -1e300;
            for (int ul : u) zmax = std::max(zmax, beta * ul);
            double z = 0.0;
            double uz = 0.0;
            for (int ul : u) {
                double e = std::exp(beta * ul - zmax);
                z += e;
                uz += ul * e;
            }
            acc += u[labels.at(r, c)] - uz / z;
        }
        row_sums[row] = acc;
    });
    return std::accumulate(row_sums.begin(), row_sums.end(), 0.0);
}

double posterior_energy(const LabelMap& labels, const MultiSpectralImage& image,
                        const ClassParams& params, const PottsModel& model) {
    check_same_dims(labels, image);
    const int h = labels.height();
    const int w = labels.width();
    std::vector<double> row_sums(h, 0.0);
    parallel_for(0, h, [&](std::int64_t row) {
        const int r = static_cast<int>(row);
        double acc = 0.0;
        for (int c = 0; c < w; ++c) acc -= params.log_density(labels.at(r, c), image.pixel(r, c));
        row_sums[row] = acc;
    });
    const double data_term = std::accumulate(row_sums.begin(), row_sums.end(), 0.0);
    return data_term -
           model.beta * static_cast<double>(global_agreement(labels, model.neighborhood));
}

double brent_root(const std::function<double(double)>& f, double lo, double hi, double tol,
                  int max_iter, int* iterations_out) {
    if (tol <= 0.0) throw std::invalid_argument("brent_root: tol must be positive");
    double a = lo, b = hi;
    double fa = f(a), fb = f(b);
    if (iterations_out) *iterations_out = 0;
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0) throw std::invalid_argument("brent_root: endpoints do not bracket a root");
    if (std::abs(fa) < std::abs(fb)) {
        std::swap(a, b);
        std::swap(fa, fb);
    }
    double c = a, fc = fa;  // bracket counterpart of b
    double d = b - a;       // last step
    double e = d;           // step before last
    for (int iter = 0; iter < max_iter; ++iter) {
        if (iterations_out) *iterations_out = iter + 1;
        if (fb * fc > 0.0) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol1 = 2.0 * 2.220446049250313e-16 * std::abs(b) + 0.5 * tol;
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || std::abs(fb) <= tol) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            // Secant with two points, inverse quadratic with three.
            const double s = fb / fa;
            double p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc;
                const double rr = fb / fc;
                p = s * (2.0 * xm * qq * (qq - rr) - (b - a) * (rr - 1.0));
                q = (qq - 1.0) * (rr - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if (std::abs(d) > tol1)
            b += d;
        else
            b += (xm > 0.0 ? tol1 : -tol1);
        fb = f(b);
    }
    return b;
}

BetaEstimate estimate_beta(const LabelMap& labels, Neighborhood system, double bracket_lo,
                           double bracket_hi, double tol, int max_iter) {
    if (labels.distinct_labels() < 2)
        throw std::domain_error("estimate_beta: single-label map is degenerate");
    BetaEstimate est;
    est.bracket_lo = bracket_lo;
    est.bracket_hi = bracket_hi;
    const auto f = [&](double beta) {
        return pseudolikelihood_residual(beta, labels, system);
    };
    const double flo = f(bracket_lo);
    const double fhi = f(bracket_hi);
    if (flo * fhi > 0.0) {
        if (std::abs(flo) <= std::abs(fhi)) {
            est.beta = bracket_lo;
            est.residual_at_solution = flo;
            est.status = BetaEstimate::Status::ClampedLo;
        } else {
            est.beta = bracket_hi;
            est.residual_at_solution = fhi;
            est.status = BetaEstimate::Status::ClampedHi;
        }
        return est;
    }
    est.beta = brent_root(f, bracket_lo, bracket_hi, tol, max_iter, &est.iterations);
    est.residual_at_solution = f(est.beta);
    est.status = BetaEstimate::Status::Root;
    return est;
}

}  // namespace mrfseg
