#pragma once

#include "spectemp/tensor.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace spectemp::wl {

struct Snapshot {
    std::vector<std::pair<int, int>> edges; // canonical u < v, sorted, unique
    Matrix features;                        // N x D (D may be 0)
};

// Discrete-time dynamic graph over a fixed node set.
class Dtdg {
public:
    Dtdg() = default;
    Dtdg(int nodes, int dims);

    // Canonicalizes and validates edges; features must be N x D.
    void add_snapshot(std::vector<std::pair<int, int>> edges, Matrix features);

    int nodes() const { return nodes_; }
    int dims() const { return dims_; }
    int steps() const { return static_cast<int>(snapshots_.size()); }
    const Snapshot& snapshot(int t) const { return snapshots_.at(t); }
    const std::vector<std::vector<int>>& neighbors(int t) const { return neighbors_.at(t); }
    bool topology_fixed() const;

    // Relabels node v as perm[v] in every snapshot (features move with nodes).
    Dtdg permuted(const std::vector<int>& perm) const;

private:
    int nodes_ = 0;
    int dims_ = 0;
    std::vector<Snapshot> snapshots_;
    std::vector<std::vector<std::vector<int>>> neighbors_;
};

// Text format: header "N T [D]"; then per snapshot zero or more "u v" edge
// lines, a "#" line, and N rows of D numbers when D > 0. Blank lines are
// ignored. Throws ParseError with the offending line.
Dtdg parse_dtdg(std::istream& is);
Dtdg load_dtdg(const std::string& path);
void write_dtdg(std::ostream& os, const Dtdg& g);

// Canonical form -> dense color id.
class Palette {
public:
    int id(const std::vector<long long>& key);
    int size() const { return static_cast<int>(ids_.size()); }

private:
    std::map<std::vector<long long>, int> ids_;
};

struct ColoringState {
    std::vector<std::vector<int>> colors; // [t][v]
    int step = 0;

    int color(int v, int t) const { return colors[t][v]; }
    int distinct() const;
};

// Features are rounded to a 1e-9 grid before hashing.
inline constexpr double kFeatureQuantum = 1e-9;

ColoringState init_colors(const Dtdg& g, Palette& palette);
ColoringState init_colors(const Dtdg& g);
// One refinement step over (own color, previous-time color or -1 at t = 0,
// sorted neighbour colors). The palette should be fresh for each step.
ColoringState refine(const Dtdg& g, const ColoringState& state, Palette& palette);
ColoringState refine(const Dtdg& g, const ColoringState& state);

// Refines until the number of distinct colors stops changing or `max_steps`
// (default N * T) is reached. Returns every state including the initial one.
std::vector<ColoringState> refine_until_stable(const Dtdg& g, int max_steps = -1);

enum class Verdict { NonIsomorphic, Inconclusive };
std::string to_string(Verdict v);

struct WlResult {
    Verdict verdict = Verdict::Inconclusive;
    int separating_step = -1; // earliest step whose end-time multisets differ
    int steps_run = 0;
};

// Joint refinement with one palette per step shared by both graphs. `steps`
// < 0 means the N * T cap.
WlResult wl_test(const Dtdg& g1, const Dtdg& g2, int steps = -1);

// True iff (u, t) and (v, t) carry different colors after `steps` refinements
// (steps < 0: until stable).
bool distinguishable(const Dtdg& g, int u, int v, int t, int steps = -1);

struct MissingComponent {
    int t = 0;
    int index = 0;
    double eigenvalue = 0.0;
};

struct SpectralReport {
    bool repeated_eigenvalues = false;
    std::vector<double> eigenvalues;
    std::vector<MissingComponent> missing;
};

// Uses the first snapshot's topology (topology must be fixed). A featureless
// graph is checked against the all-ones signal.
SpectralReport check_spectral_conditions(const Dtdg& g, double tol = 1e-8);

// CSV "step,t,node,color".
void write_color_table(std::ostream& os, const std::vector<ColoringState>& history);

} // namespace spectemp::wl
