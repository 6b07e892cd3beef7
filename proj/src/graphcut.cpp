#include "mrfseg/graphcut.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "mrfseg/potts.hpp"

namespace mrfseg {

namespace {
constexpr double kEps = 1e-11;  // residual below this counts as saturated
}

FlowNetwork::FlowNetwork(int node_count, int source, int sink)
    : adjacency_(node_count), level_(node_count, -1), next_arc_(node_count, 0),
      source_(source), sink_(sink) {
    if (node_count < 2 || source < 0 || source >= node_count || sink < 0 ||
        sink >= node_count || source == sink)
        throw std::invalid_argument("FlowNetwork: bad terminals");
}

void FlowNetwork::add_arc(int u, int v, double capacity) {
    if (u < 0 || u >= node_count() || v < 0 || v >= node_count() || u == v)
        throw std::invalid_argument("FlowNetwork: bad arc endpoints");
    if (!(capacity >= 0.0) || !std::isfinite(capacity))
        throw std::invalid_argument("FlowNetwork: capacity must be finite and non-negative");
    const int id = static_cast<int>(arcs_.size());
    arcs_.push_back({v, id + 1, capacity});
    arcs_.push_back({u, id, 0.0});
    adjacency_[u].push_back(id);
    adjacency_[v].push_back(id + 1);
}

void FlowNetwork::add_edge(int u, int v, double capacity) {
    if (u < 0 || u >= node_count() || v < 0 || v >= node_count() || u == v)
        throw std::invalid_argument("FlowNetwork: bad arc endpoints");
    if (!(capacity >= 0.0) || !std::isfinite(capacity))
        throw std::invalid_argument("FlowNetwork: capacity must be finite and non-negative");
    const int id = static_cast<int>(arcs_.size());
    arcs_.push_back({v, id + 1, capacity});
    arcs_.push_back({u, id, capacity});
    adjacency_[u].push_back(id);
    adjacency_[v].push_back(id + 1);
}

bool FlowNetwork::build_levels() {
    std::fill(level_.begin(), level_.end(), -1);
    std::deque<int> queue;
    level_[source_] = 0;
    queue.push_back(source_);
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        for (int id : adjacency_[u]) {
            const Arc& a = arcs_[id];
            if (a.cap > kEps && level_[a.to] < 0) {
                level_[a.to] = level_[u] + 1;
                queue.push_back(a.to);
            }
        }
    }
    return level_[sink_] >= 0;
}

FlowNetwork::CutResult FlowNetwork::max_flow() {
    CutResult result;
    std::vector<int> path;  // arc ids from the source to the walk head
    while (build_levels()) {
        std::fill(next_arc_.begin(), next_arc_.end(), 0);
        path.clear();
        int u = source_;
        while (true) {
            if (u == sink_) {
                double bottleneck = std::numeric_limits<double>::max();
                for (int id : path) bottleneck = std::min(bottleneck, arcs_[id].cap);
                for (int id : path) {
                    arcs_[id].cap -= bottleneck;
                    arcs_[arcs_[id].twin].cap += bottleneck;
                }
                result.flow_value += bottleneck;
                // Retreat to just before the first saturated arc.
                std::size_t keep = 0;
                while (keep < path.size() && arcs_[path[keep]].cap > kEps) ++keep;
                path.resize(keep);
                u = path.empty() ? source_ : arcs_[path.back()].to;
                continue;
            }
            bool advanced = false;
            for (int& i = next_arc_[u]; i < static_cast<int>(adjacency_[u].size()); ++i) {
                const int id = adjacency_[u][i];
                const Arc& a = arcs_[id];
                if (a.cap > kEps && level_[a.to] == level_[u] + 1) {
                    path.push_back(id);
                    u = a.to;
                    advanced = true;
                    break;
                }
            }
            if (advanced) continue;
            if (u == source_) break;
            level_[u] = -1;  // dead end for this phase
            const int last = path.back();
            path.pop_back();
            u = arcs_[arcs_[last].twin].to;
        }
    }
    result.source_side.assign(node_count(), 0);
    for (int u = 0; u < node_count(); ++u)
        if (level_[u] >= 0) result.source_side[u] = 1;
    return result;
}

namespace {

std::vector<double> unary_costs(const MultiSpectralImage& image, const ClassParams& params) {
    const int L = params.class_count();
    std::vector<double> d(static_cast<std::size_t>(image.pixel_count()) * L);
    for (int r = 0; r < image.height(); ++r)
        for (int c = 0; c < image.width(); ++c) {
            const std::int64_t i = static_cast<std::int64_t>(r) * image.width() + c;
            for (int l = 0; l < L; ++l) d[i * L + l] = -params.log_density(l, image.pixel(r, c));
        }
    return d;
}

}  // namespace

LabelMap binary_mapcut(const MultiSpectralImage& image, const ClassParams& params, double beta) {
    if (params.class_count() != 2)
        throw std::invalid_argument("binary_mapcut: exactly two classes required");
    if (beta < 0.0)
        throw std::domain_error("binary_mapcut: negative smoothness is non-submodular");

    const int h = image.height();
    const int w = image.width();
    const std::int64_t n = image.pixel_count();
    const std::vector<double> d = unary_costs(image, params);

    // Node ids: 0 = source, 1 = sink, pixel (r, c) = 2 + r*w + c.
    FlowNetwork net(static_cast<int>(n) + 2, 0, 1);
    const auto pix = [w](int r, int c) { return 2 + r * w + c; };
    for (std::int64_t i = 0; i < n; ++i) {
        // Shift both terminal arcs so capacities stay non-negative; constant
        // offsets never change the argmin.
        const double shift = std::min(d[i * 2], d[i * 2 + 1]);
        const int p = static_cast<int>(2 + i);
        net.add_arc(0, p, d[i * 2 + 1] - shift);  // cut when p joins the sink: label 1
        net.add_arc(p, 1, d[i * 2] - shift);      // cut when p stays with the source: label 0
    }
    if (beta > 0.0) {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                if (c + 1 < w) net.add_edge(pix(r, c), pix(r, c + 1), beta);
                if (r + 1 < h) net.add_edge(pix(r, c), pix(r + 1, c), beta);
            }
    }

    FlowNetwork::CutResult cut = net.max_flow();
    std::vector<int> labels(n, 0);
    for (std::int64_t i = 0; i < n; ++i)
        labels[i] = cut.source_side[static_cast<int>(2 + i)] ? 0 : 1;
    return LabelMap(h, w, 2, std::move(labels));
}

namespace {

/// One expansion move: returns the labeling where every pixel either keeps its
/// label or switches to `alpha`, minimizing the first-order Potts energy.
LabelMap expansion_move(const LabelMap& current, const std::vector<double>& d, int L,
                        double beta, int alpha, int h, int w) {
    const std::int64_t n = static_cast<std::int64_t>(h) * w;
    // Count auxiliary nodes first: one per first-order pair whose endpoints
    // currently carry two different labels, neither equal to alpha.
    int aux = 0;
    const auto needs_aux = [&](int fa, int fb) { return fa != fb && fa != alpha && fb != alpha; };
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (c + 1 < w && needs_aux(current.at(r, c), current.at(r, c + 1))) ++aux;
            if (r + 1 < h && needs_aux(current.at(r, c), current.at(r + 1, c))) ++aux;
        }

    FlowNetwork net(static_cast<int>(n) + 2 + aux, 0, 1);
    const auto pix = [w](int r, int c) { return 2 + r * w + c; };
    std::vector<double> to_sink(n, 0.0);  // extra keep-side cost per pixel

    int next_aux = static_cast<int>(n) + 2;
    const auto add_pair = [&](int r1, int c1, int r2, int c2) {
        const int fa = current.at(r1, c1);
        const int fb = current.at(r2, c2);
        if (fa == alpha && fb == alpha) return;
        const int p = pix(r1, c1);
        const int q = pix(r2, c2);
        if (fa == fb) {
            net.add_edge(p, q, beta);
        } else if (fb == alpha) {
            to_sink[static_cast<std::int64_t>(r1) * w + c1] += beta;
        } else if (fa == alpha) {
            to_sink[static_cast<std::int64_t>(r2) * w + c2] += beta;
        } else {
            const int a = next_aux++;
            net.add_edge(p, a, beta);
            net.add_edge(a, q, beta);
            net.add_arc(a, 1, beta);
        }
    };
    if (beta > 0.0) {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                if (c + 1 < w) add_pair(r, c, r, c + 1);
                if (r + 1 < h) add_pair(r, c, r + 1, c);
            }
    }

    for (std::int64_t i = 0; i < n; ++i) {
        const int f = current.raw()[static_cast<std::size_t>(i)];
        const double take = d[i * L + alpha];
        const double keep = d[i * L + f] + to_sink[i];
        const double shift = std::min(take, keep);
        const int p = static_cast<int>(2 + i);
        net.add_arc(0, p, take - shift);  // severed when p takes alpha (sink side)
        net.add_arc(p, 1, keep - shift);  // severed when p keeps (source side)
    }

    FlowNetwork::CutResult cut = net.max_flow();
    LabelMap moved = current;
    for (std::int64_t i = 0; i < n; ++i)
        if (!cut.source_side[static_cast<int>(2 + i)])
            moved.set(static_cast<int>(i / w), static_cast<int>(i % w), alpha);
    return moved;
}

}  // namespace

ExpansionReport alpha_expansion(const MultiSpectralImage& image, const LabelMap& init,
                                const ClassParams& params, double beta, int max_cycles) {
    check_same_dims(init, image);
    if (params.class_count() < 2)
        throw std::invalid_argument("alpha_expansion: need at least two classes");
    if (init.label_count() != params.class_count())
        throw std::invalid_argument("alpha_expansion: label count mismatch with parameters");
    if (beta < 0.0)
        throw std::domain_error("alpha_expansion: negative smoothness is non-submodular");
    if (max_cycles < 1) throw std::invalid_argument("alpha_expansion: max_cycles must be >= 1");

    const int h = image.height();
    const int w = image.width();
    const int L = params.class_count();
    const std::vector<double> d = unary_costs(image, params);
    const PottsModel model(beta, Neighborhood::FirstOrderIsotropic);

    ExpansionReport report{init, {}, 0, false, beta, 0.0};
    double energy = posterior_energy(report.labels, image, params, model);

    for (int cycle = 1; cycle <= max_cycles; ++cycle) {
        report.cycles = cycle;
        bool accepted_any = false;
        for (int alpha = 0; alpha < L; ++alpha) {
            LabelMap moved = expansion_move(report.labels, d, L, beta, alpha, h, w);
            if (moved == report.labels) continue;
            const double moved_energy = posterior_energy(moved, image, params, model);
            if (moved_energy < energy) {
                report.labels = std::move(moved);
                energy = moved_energy;
                report.energy_trace.push_back(energy);
                accepted_any = true;
            }
        }
        if (!accepted_any) {
            report.converged = true;
            break;
        }
    }
    report.final_energy = energy;
    return report;
}

ExpansionReport gc_segment(const MultiSpectralImage& image, const LabelMap& init,
                           const ClassParams& params, int max_cycles) {
    double beta;
    try {
        // The pseudo-likelihood estimate lives in the per-site convention,
        // where every pair is visited from both ends; the cut energy charges
        // each pair once, so the weight doubles on the way in.
        beta = 2.0 * estimate_beta(init, Neighborhood::FirstOrderIsotropic).beta;
    } catch (const std::domain_error&) {
        beta = 10.0;  // degenerate single-label init: strongest bracket smoothing
    }
    beta = std::max(beta, 0.0);
    return alpha_expansion(image, init, params, beta, max_cycles);
}

}  // namespace mrfseg
