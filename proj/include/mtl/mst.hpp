#pragma once

#include <vector>

#include "mtl/tensor.hpp"

namespace mtl::tasks {

struct DependencyTree {
    std::vector<int> heads;   // heads[i] = head of token i+1; 0 is ROOT
    std::vector<int> labels;  // dependency relation ids, aligned with heads
};

enum class RootPolicy {
    Any,     // maximum arborescence, root may have several children
    Single,  // exactly one child of ROOT; optimal among such trees
};

// Maximum spanning arborescence over the complete directed graph given by
// scores[i][j] = weight of attaching token i+1 to head j (j = 0 is ROOT).
// Chu-Liu/Edmonds with cycle contraction; ties break toward lower indices.
// Under RootPolicy::Single the decoder re-runs once per candidate root child
// and keeps the best total weight, so the result is exact for that
// constraint too.
std::vector<int> mst_decode(const std::vector<std::vector<Real>>& scores,
                            RootPolicy policy = RootPolicy::Single);

// True when every token reaches ROOT by following heads (no cycles).
bool is_arborescence(const std::vector<int>& heads);

Real tree_weight(const std::vector<std::vector<Real>>& scores, const std::vector<int>& heads);

}  // namespace mtl::tasks
