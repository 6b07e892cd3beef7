#ifndef MRFSEG_GRAPHCUT_HPP
#define MRFSEG_GRAPHCUT_HPP

#include <cstdint>
#include <vector>

#include "mrfseg/core.hpp"

// Min-cut machinery for the first-order Potts posterior: a max-flow network
// with residual arc twins, an exact binary s/t segmentation, and multi-label
// alpha-expansion. Source-side pixels keep their current label; pixels cut off
// from the source take the move's label.

namespace mrfseg {

/// Directed flow network over dense node ids. Arcs carry non-negative finite
/// capacities and are stored with their residual twins.
class FlowNetwork {
public:
    FlowNetwork(int node_count, int source, int sink);

    int node_count() const { return static_cast<int>(level_.size()); }
    int source() const { return source_; }
    int sink() const { return sink_; }

    /// Adds u -> v with the given capacity (and the residual twin at 0).
    /// Throws std::invalid_argument on negative or non-finite capacity.
    void add_arc(int u, int v, double capacity);
    /// Symmetric pair: u -> v and v -> u, both at `capacity`.
    void add_edge(int u, int v, double capacity);

    struct CutResult {
        double flow_value = 0.0;
        std::vector<char> source_side;  // node id -> 1 when reachable from source
    };

    /// Dinic max-flow. Consumes the residual capacities; the source side of
    /// the minimum cut is the residual component of the source.
    CutResult max_flow();

private:
    struct Arc {
        int to;
        int twin;
        double cap;
    };

    bool build_levels();

    std::vector<Arc> arcs_;
    std::vector<std::vector<int>> adjacency_;
    std::vector<int> level_;
    std::vector<int> next_arc_;
    int source_;
    int sink_;
};

/// Exact minimizer of sum_p D_p(s_p) + beta * #{first-order pairs with
/// different labels}, D_p(l) = -log p(I_p | l), for two classes via one cut.
/// Throws std::domain_error for beta < 0 (the construction needs submodular
/// pair terms).
LabelMap binary_mapcut(const MultiSpectralImage& image, const ClassParams& params, double beta);

struct ExpansionReport {
    LabelMap labels;
    std::vector<double> energy_trace;  // energy after each accepted move
    int cycles = 0;
    bool converged = false;
    double beta_used = 0.0;
    double final_energy = 0.0;
};

/// Alpha-expansion over labels in ascending order. One move solves a binary
/// keep-vs-take cut; pairs of distinct non-move labels get the standard
/// auxiliary node. A move is accepted only when the posterior energy strictly
/// decreases. Stops when a full cycle accepts nothing or max_cycles is hit.
ExpansionReport alpha_expansion(const MultiSpectralImage& image, const LabelMap& init,
                                const ClassParams& params, double beta, int max_cycles = 10);

/// Full pipeline: estimate the smoothness weight once from init over the
/// first-order system, rescale it from the per-site estimation convention to
/// the pairs-once energy convention (factor 2), clamp negatives to zero, then
/// expand. A degenerate single-label init takes the bracket top directly.
ExpansionReport gc_segment(const MultiSpectralImage& image, const LabelMap& init,
                           const ClassParams& params, int max_cycles = 10);

}  // namespace mrfseg

#endif
