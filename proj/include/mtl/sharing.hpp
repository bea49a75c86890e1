#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mtl/nn.hpp"

namespace mtl::share {

using ad::NodeRef;
using ad::Tape;

enum class TopologyKind { FSN, PSN, LWS };
enum class TaskSide { Main, Aux };

TopologyKind topology_from_string(const std::string& s);
std::string to_string(TopologyKind k);

enum class LayerKind { Dense, BiLstm };

// Split of a layer's output into a shared subspace (first columns) and a
// private subspace (remaining columns).
struct Split {
    int shared_dim = 0;
    int private_dim = 0;
};

// One hidden layer applied over a sequence of [1 x d] positions. Dense
// layers are position-wise sigmoid-activated affine maps; BiLstm layers run
// the recurrence and emit [h_fwd ; h_bwd].
class SeqLayer {
public:
    SeqLayer() = default;
    static SeqLayer dense(nn::ParamStore& store, const std::string& prefix, int in_dim, int out_dim,
                          Rng& rng);
    static SeqLayer bilstm(nn::ParamStore& store, const std::string& prefix, int in_dim, int out_dim,
                           Rng& rng);
    static SeqLayer make(nn::ParamStore& store, const std::string& prefix, LayerKind kind, int in_dim,
                         int out_dim, Rng& rng);

    std::vector<NodeRef> forward(Tape& t, const std::vector<NodeRef>& seq, const nn::DropCfg& drop,
                                 bool training, Rng& rng) const;

    int out_dim() const { return out_dim_; }
    std::vector<nn::Parameter*> params() const;

private:
    LayerKind kind_ = LayerKind::Dense;
    nn::Dense dense_;
    nn::BiLstm bilstm_;
    int out_dim_ = 0;
};

// The gating unit between the two tasks' shared subspaces. Both outputs are
// computed from the pre-gate values, so the update is simultaneous; applying
// the op twice is not idempotent.
//   h_main_gated = h_main_shared (.) sigmoid(h_aux_shared  * W_a2m)
//   h_aux_gated  = h_aux_shared  (.) sigmoid(h_main_shared * W_m2a)
std::pair<NodeRef, NodeRef> lws_gate(Tape& t, const NodeRef& h_main_shared,
                                     const NodeRef& h_aux_shared, const NodeRef& w_a2m,
                                     const NodeRef& w_m2a);

// One depth of the LWS wiring: a layer per task, each output split into
// shared/private subspaces, with gating applied between the shared parts.
// Gate matrices start at zero, which makes the initial gates 0.5 everywhere.
class GatedLayerPair {
public:
    GatedLayerPair() = default;
    GatedLayerPair(nn::ParamStore& store, const std::string& prefix, LayerKind kind, int in_main,
                   int in_aux, int out_main, int out_aux, Split split_main, Split split_aux,
                   Rng& rng);

    std::pair<std::vector<NodeRef>, std::vector<NodeRef>> forward(
        Tape& t, const std::vector<NodeRef>& main_in, const std::vector<NodeRef>& aux_in,
        const nn::DropCfg& drop, bool training, Rng& rng) const;

    int out_dim(TaskSide side) const;
    const SeqLayer& layer(TaskSide side) const;
    nn::Parameter* w_a2m() const { return w_a2m_; }
    nn::Parameter* w_m2a() const { return w_m2a_; }
    std::vector<nn::Parameter*> task_params(TaskSide side) const;
    std::vector<nn::Parameter*> gate_params() const { return {w_a2m_, w_m2a_}; }

private:
    SeqLayer main_, aux_;
    Split split_main_, split_aux_;
    nn::Parameter* w_a2m_ = nullptr;  // [aux_shared x main_shared]
    nn::Parameter* w_m2a_ = nullptr;  // [main_shared x aux_shared]
};

// Parameter counts by bucket, plus head counts filled in by the task model.
struct ParamReport {
    long shared = 0;
    long private_main = 0;
    long private_aux = 0;
    long gates = 0;
    long heads = 0;

    long total() const { return shared + private_main + private_aux + gates + heads; }
    std::string text() const;
    // machine-readable `key=value` lines
    std::string kv() const;
};

struct TopologySpec {
    TopologyKind kind = TopologyKind::FSN;
    LayerKind layer_kind = LayerKind::BiLstm;
    int input_dim = 0;
    // FSN: the whole stack. PSN: the shared prefix.
    std::vector<int> shared_dims;
    // PSN: at least one private layer per task.
    std::vector<int> private_dims_main;
    std::vector<int> private_dims_aux;
    // LWS: per-task stacks, paired depth-wise; every depth is split and gated.
    std::vector<int> lws_dims_main;
    std::vector<int> lws_dims_aux;
    std::vector<Split> lws_split_main;
    std::vector<Split> lws_split_aux;
};

class SharingTopology {
public:
    static SharingTopology build(nn::ParamStore& store, const TopologySpec& spec, Rng& rng);

    // FSN and PSN. For FSN the same layer stack (same parameter objects)
    // serves both sides.
    std::vector<NodeRef> forward(Tape& t, const std::vector<NodeRef>& x, TaskSide side,
                                 const nn::DropCfg& drop, bool training, Rng& rng) const;

    // LWS: both task paths over the same input, gated at every depth.
    std::pair<std::vector<NodeRef>, std::vector<NodeRef>> forward_both(Tape& t,
                                                                       const std::vector<NodeRef>& x,
                                                                       const nn::DropCfg& drop,
                                                                       bool training, Rng& rng) const;

    TopologyKind kind() const { return spec_.kind; }
    int out_dim(TaskSide side) const;
    ParamReport report() const;
    std::vector<nn::Parameter*> task_exclusive_params(TaskSide side) const;

private:
    TopologySpec spec_;
    std::vector<SeqLayer> shared_;
    std::vector<SeqLayer> private_main_, private_aux_;
    std::vector<GatedLayerPair> lws_;
};

}  // namespace mtl::share
