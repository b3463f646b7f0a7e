#include "grepool/wl.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>

namespace grepool {

namespace {

// Exact canonical coloring: every distinct key string gets the next integer.
struct ColorDictionary {
    std::map<std::string, int> ids;
    int intern(const std::string& key) {
        auto [it, inserted] = ids.emplace(key, static_cast<int>(ids.size()));
        return it->second;
    }
};

std::string feature_key(const Graph& g, int v) {
    std::string key;
    char buf[32];
    for (int j = 0; j < g.feat_dim; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g,", g.features[static_cast<size_t>(v) * g.feat_dim + j]);
        key += buf;
    }
    return key;
}

std::vector<int> initial_colors(const Graph& g, ColorDictionary& dict) {
    std::vector<int> colors(g.n);
    for (int v = 0; v < g.n; ++v) colors[v] = dict.intern(feature_key(g, v));
    return colors;
}

std::vector<int> refine_once(const Graph& g, const std::vector<int>& colors, ColorDictionary& dict) {
    std::vector<int> next(g.n);
    for (int v = 0; v < g.n; ++v) {
        std::vector<int> neighborhood;
        for (int u = 0; u < g.n; ++u)
            if (g.edge(v, u)) neighborhood.push_back(colors[u]);
        std::sort(neighborhood.begin(), neighborhood.end());
        std::string key = std::to_string(colors[v]) + "|";
        for (int c : neighborhood) key += std::to_string(c) + ",";
        next[v] = dict.intern(key);
    }
    return next;
}

int count_colors(const std::vector<int>& colors) {
    return static_cast<int>(color_histogram(colors).size());
}

WLColoring refine(const Graph& g, int max_rounds, ColorDictionary& dict) {
    WLColoring out;
    out.rounds.push_back(initial_colors(g, dict));
    const int limit = max_rounds < 0 ? std::max(g.n, 1) : max_rounds;
    for (int r = 0; r < limit; ++r) {
        std::vector<int> next = refine_once(g, out.rounds.back(), dict);
        const bool refined = count_colors(next) > count_colors(out.rounds.back());
        out.rounds.push_back(std::move(next));
        if (!refined) break;  // partition stopped splitting: fixpoint
    }
    out.stable_round = static_cast<int>(out.rounds.size()) - 1;
    return out;
}

}  // namespace

std::map<int, int> color_histogram(const std::vector<int>& colors) {
    std::map<int, int> h;
    for (int c : colors) ++h[c];
    return h;
}

WLColoring wl_refine(const Graph& g, int max_rounds) {
    ColorDictionary dict;
    return refine(g, max_rounds, dict);
}

bool wl_equivalent(const Graph& a, const Graph& b) {
    if (a.n != b.n || a.feat_dim != b.feat_dim) return false;
    // Shared dictionary so colors of the two graphs are comparable.
    ColorDictionary dict;
    std::vector<int> ca = initial_colors(a, dict);
    std::vector<int> cb = initial_colors(b, dict);
    const int limit = a.n + b.n;
    for (int r = 0; r <= limit; ++r) {
        if (color_histogram(ca) != color_histogram(cb)) return false;
        std::vector<int> na = refine_once(a, ca, dict);
        std::vector<int> nb = refine_once(b, cb, dict);
        const bool stable = count_colors(na) == count_colors(ca) && count_colors(nb) == count_colors(cb);
        ca = std::move(na);
        cb = std::move(nb);
        if (stable) break;
    }
    return color_histogram(ca) == color_histogram(cb);
}

}  // namespace grepool
