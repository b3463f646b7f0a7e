#pragma once

#include <map>
#include <vector>

#include "grepool/graph.hpp"

namespace grepool {

// Color refinement history: rounds[r][v] is node v's canonical color after r
// refinement rounds (round 0 = colors hashed from the feature rows).
struct WLColoring {
    std::vector<std::vector<int>> rounds;
    int stable_round = 0;
};

// 1-WL refinement: each round recolors a node by the exact (dictionary
// encoded, collision-free) hash of its own color and the sorted multiset of
// its neighbors' colors, stopping at the fixpoint. max_rounds < 0 means n
// rounds (always enough to stabilize).
WLColoring wl_refine(const Graph& g, int max_rounds = -1);

// True iff the color histograms of the two graphs match round by round up
// to the joint fixpoint (refinement run on the disjoint union so colors are
// comparable).
bool wl_equivalent(const Graph& a, const Graph& b);

std::map<int, int> color_histogram(const std::vector<int>& colors);

}  // namespace grepool
