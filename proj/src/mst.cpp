#include "mtl/mst.hpp"

#include <cmath>
#include <limits>

namespace mtl::tasks {

namespace {

constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();

// w[u][v] = weight of edge u -> v over nodes 0..m (0 = root). Returns the
// best incoming head for each of 1..m.
std::vector<int> cle(const std::vector<std::vector<Real>>& w) {
    int m = static_cast<int>(w.size()) - 1;
    std::vector<int> best(static_cast<std::size_t>(m) + 1, -1);
    for (int v = 1; v <= m; ++v) {
        int arg = -1;
        Real bw = kNegInf;
        for (int u = 0; u <= m; ++u) {
            if (u == v) continue;
            if (w[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] > bw) {
                bw = w[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)];
                arg = u;
            }
        }
        best[static_cast<std::size_t>(v)] = arg;
    }

    // find a cycle among the greedy picks
    std::vector<int> color(static_cast<std::size_t>(m) + 1, 0);  // 0 unseen, 1 active, 2 done
    color[0] = 2;
    std::vector<int> cycle;
    for (int s = 1; s <= m && cycle.empty(); ++s) {
        if (color[static_cast<std::size_t>(s)] != 0) continue;
        int v = s;
        while (color[static_cast<std::size_t>(v)] == 0) {
            color[static_cast<std::size_t>(v)] = 1;
            v = best[static_cast<std::size_t>(v)];
        }
        if (color[static_cast<std::size_t>(v)] == 1) {
            int u = v;
            do {
                cycle.push_back(u);
                u = best[static_cast<std::size_t>(u)];
            } while (u != v);
        }
        int u = s;
        while (color[static_cast<std::size_t>(u)] == 1) {
            color[static_cast<std::size_t>(u)] = 2;
            u = best[static_cast<std::size_t>(u)];
        }
    }
    if (cycle.empty()) return best;

    std::vector<bool> in_cycle(static_cast<std::size_t>(m) + 1, false);
    for (int v : cycle) in_cycle[static_cast<std::size_t>(v)] = true;

    // contracted ids: root 0, outside nodes 1..k, cycle node k+1
    std::vector<int> to_new(static_cast<std::size_t>(m) + 1, -1);
    std::vector<int> to_old = {0};
    to_new[0] = 0;
    for (int v = 1; v <= m; ++v)
        if (!in_cycle[static_cast<std::size_t>(v)]) {
            to_new[static_cast<std::size_t>(v)] = static_cast<int>(to_old.size());
            to_old.push_back(v);
        }
    int c = static_cast<int>(to_old.size());
    int m2 = c;  // contracted graph has nodes 0..m2, cycle node is m2

    std::vector<std::vector<Real>> w2(static_cast<std::size_t>(m2) + 1,
                                      std::vector<Real>(static_cast<std::size_t>(m2) + 1, kNegInf));
    std::vector<int> enter_choice(static_cast<std::size_t>(m2) + 1, -1);  // per external source
    std::vector<int> leave_choice(static_cast<std::size_t>(m2) + 1, -1);  // per external target

    for (int u = 0; u <= m; ++u) {
        if (u > 0 && in_cycle[static_cast<std::size_t>(u)]) continue;
        int nu = to_new[static_cast<std::size_t>(u)];
        // into the contracted node: gain of swapping v's cycle edge for u->v
        for (int v : cycle) {
            if (u == v) continue;
            Real gain = w[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] -
                        w[static_cast<std::size_t>(best[static_cast<std::size_t>(v)])]
                         [static_cast<std::size_t>(v)];
            if (gain > w2[static_cast<std::size_t>(nu)][static_cast<std::size_t>(c)]) {
                w2[static_cast<std::size_t>(nu)][static_cast<std::size_t>(c)] = gain;
                enter_choice[static_cast<std::size_t>(nu)] = v;
            }
        }
        // unchanged edges between outside nodes
        for (int v = 1; v <= m; ++v) {
            if (in_cycle[static_cast<std::size_t>(v)] || u == v) continue;
            w2[static_cast<std::size_t>(nu)][static_cast<std::size_t>(to_new[static_cast<std::size_t>(v)])] =
                w[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)];
        }
    }
    // out of the contracted node
    for (int v = 1; v <= m; ++v) {
        if (in_cycle[static_cast<std::size_t>(v)]) continue;
        int nv = to_new[static_cast<std::size_t>(v)];
        for (int u : cycle) {
            if (u == v) continue;
            if (w[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] >
                w2[static_cast<std::size_t>(c)][static_cast<std::size_t>(nv)]) {
                w2[static_cast<std::size_t>(c)][static_cast<std::size_t>(nv)] =
                    w[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)];
                leave_choice[static_cast<std::size_t>(nv)] = u;
            }
        }
    }

    std::vector<int> par2 = cle(w2);

    std::vector<int> par(static_cast<std::size_t>(m) + 1, -1);
    for (int v = 1; v <= m; ++v) {
        if (in_cycle[static_cast<std::size_t>(v)]) continue;
        int p2 = par2[static_cast<std::size_t>(to_new[static_cast<std::size_t>(v)])];
        par[static_cast<std::size_t>(v)] =
            p2 == c ? leave_choice[static_cast<std::size_t>(to_new[static_cast<std::size_t>(v)])]
                    : to_old[static_cast<std::size_t>(p2)];
    }
    int entry_src = par2[static_cast<std::size_t>(c)];
    int entry_dst = enter_choice[static_cast<std::size_t>(entry_src)];
    for (int v : cycle)
        par[static_cast<std::size_t>(v)] =
            v == entry_dst ? to_old[static_cast<std::size_t>(entry_src)]
                           : best[static_cast<std::size_t>(v)];
    return par;
}

std::vector<std::vector<Real>> edge_weights(const std::vector<std::vector<Real>>& scores) {
    int n = static_cast<int>(scores.size());
    std::vector<std::vector<Real>> w(static_cast<std::size_t>(n) + 1,
                                     std::vector<Real>(static_cast<std::size_t>(n) + 1, kNegInf));
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(scores[static_cast<std::size_t>(i)].size()) != n + 1)
            throw ShapeError("mst_decode: score row " + std::to_string(i) + " has " +
                             std::to_string(scores[static_cast<std::size_t>(i)].size()) +
                             " entries, expected " + std::to_string(n + 1));
        for (int j = 0; j <= n; ++j) {
            Real s = scores[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (!std::isfinite(s)) throw NumericError("mst_decode: non-finite score");
            if (j != i + 1) w[static_cast<std::size_t>(j)][static_cast<std::size_t>(i) + 1] = s;
        }
    }
    return w;
}

std::vector<int> heads_from_parents(const std::vector<int>& par) {
    std::vector<int> heads(par.size() - 1);
    for (std::size_t v = 1; v < par.size(); ++v) heads[v - 1] = par[v];
    return heads;
}

}  // namespace

std::vector<int> mst_decode(const std::vector<std::vector<Real>>& scores, RootPolicy policy) {
    int n = static_cast<int>(scores.size());
    if (n < 1) throw ShapeError("mst_decode: need at least one token");
    auto w = edge_weights(scores);
    if (n == 1) return {0};
    std::vector<int> heads = heads_from_parents(cle(w));
    if (policy == RootPolicy::Any) return heads;

    int roots = 0;
    for (int h : heads)
        if (h == 0) ++roots;
    if (roots == 1) return heads;

    // exact single-root: force each candidate in turn, keep the best tree
    std::vector<int> best_heads;
    Real best_w = kNegInf;
    for (int r = 1; r <= n; ++r) {
        auto wr = w;
        for (int v = 1; v <= n; ++v)
            if (v != r) wr[0][static_cast<std::size_t>(v)] = kNegInf;
        std::vector<int> cand = heads_from_parents(cle(wr));
        Real tw = tree_weight(scores, cand);
        if (tw > best_w) {
            best_w = tw;
            best_heads = cand;
        }
    }
    return best_heads;
}

bool is_arborescence(const std::vector<int>& heads) {
    int n = static_cast<int>(heads.size());
    for (int i = 1; i <= n; ++i) {
        int cur = i, steps = 0;
        while (cur != 0) {
            if (cur < 0 || cur > n) return false;
            cur = heads[static_cast<std::size_t>(cur - 1)];
            if (++steps > n) return false;
        }
    }
    return true;
}

Real tree_weight(const std::vector<std::vector<Real>>& scores, const std::vector<int>& heads) {
    Real w = 0.0;
    for (std::size_t i = 0; i < heads.size(); ++i)
        w += scores[i][static_cast<std::size_t>(heads[i])];
    return w;
}

}  // namespace mtl::tasks
