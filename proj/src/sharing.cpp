#include "mtl/sharing.hpp"

#include <sstream>

namespace mtl::share {

TopologyKind topology_from_string(const std::string& s) {
    if (s == "fsn") return TopologyKind::FSN;
    if (s == "psn") return TopologyKind::PSN;
    if (s == "lws") return TopologyKind::LWS;
    throw ConfigError("unknown topology '" + s + "' (expected fsn, psn, or lws)");
}

std::string to_string(TopologyKind k) {
    switch (k) {
        case TopologyKind::FSN: return "fsn";
        case TopologyKind::PSN: return "psn";
        case TopologyKind::LWS: return "lws";
    }
    return "?";
}

SeqLayer SeqLayer::dense(nn::ParamStore& store, const std::string& prefix, int in_dim, int out_dim,
                         Rng& rng) {
    SeqLayer l;
    l.kind_ = LayerKind::Dense;
    l.dense_ = nn::Dense(store, prefix, in_dim, out_dim, rng);
    l.out_dim_ = out_dim;
    return l;
}

SeqLayer SeqLayer::bilstm(nn::ParamStore& store, const std::string& prefix, int in_dim, int out_dim,
                          Rng& rng) {
    if (out_dim % 2 != 0)
        throw ConfigError("bilstm layer output dim must be even, got " + std::to_string(out_dim));
    SeqLayer l;
    l.kind_ = LayerKind::BiLstm;
    l.bilstm_ = nn::BiLstm(store, prefix, in_dim, out_dim / 2, rng);
    l.out_dim_ = out_dim;
    return l;
}

SeqLayer SeqLayer::make(nn::ParamStore& store, const std::string& prefix, LayerKind kind, int in_dim,
                        int out_dim, Rng& rng) {
    return kind == LayerKind::Dense ? dense(store, prefix, in_dim, out_dim, rng)
                                    : bilstm(store, prefix, in_dim, out_dim, rng);
}

std::vector<NodeRef> SeqLayer::forward(Tape& t, const std::vector<NodeRef>& seq,
                                       const nn::DropCfg& drop, bool training, Rng& rng) const {
    if (seq.empty()) throw ShapeError("layer forward: empty sequence");
    if (kind_ == LayerKind::BiLstm) return bilstm_.forward(t, seq, drop, training, rng);
    std::vector<NodeRef> out;
    out.reserve(seq.size());
    for (const auto& x : seq) {
        auto h = nn::dropout(t, x, drop.input, training, rng);
        out.push_back(ad::sigmoid(t, dense_.apply(t, h)));
    }
    return out;
}

std::vector<nn::Parameter*> SeqLayer::params() const {
    return kind_ == LayerKind::Dense ? dense_.params() : bilstm_.params();
}

std::pair<NodeRef, NodeRef> lws_gate(Tape& t, const NodeRef& h_main_shared,
                                     const NodeRef& h_aux_shared, const NodeRef& w_a2m,
                                     const NodeRef& w_m2a) {
    auto gate_into_main = ad::sigmoid(t, ad::matmul(t, h_aux_shared, w_a2m));
    auto gate_into_aux = ad::sigmoid(t, ad::matmul(t, h_main_shared, w_m2a));
    auto main_gated = ad::mul(t, h_main_shared, gate_into_main);
    auto aux_gated = ad::mul(t, h_aux_shared, gate_into_aux);
    return {main_gated, aux_gated};
}

GatedLayerPair::GatedLayerPair(nn::ParamStore& store, const std::string& prefix, LayerKind kind,
                               int in_main, int in_aux, int out_main, int out_aux, Split split_main,
                               Split split_aux, Rng& rng)
    : split_main_(split_main), split_aux_(split_aux) {
    if (split_main.shared_dim + split_main.private_dim != out_main)
        throw ConfigError("subspace split " + std::to_string(split_main.shared_dim) + "+" +
                          std::to_string(split_main.private_dim) + " does not cover main layer dim " +
                          std::to_string(out_main));
    if (split_aux.shared_dim + split_aux.private_dim != out_aux)
        throw ConfigError("subspace split " + std::to_string(split_aux.shared_dim) + "+" +
                          std::to_string(split_aux.private_dim) + " does not cover aux layer dim " +
                          std::to_string(out_aux));
    if (split_main.shared_dim <= 0 || split_aux.shared_dim <= 0)
        throw ConfigError("gated layer requires a non-empty shared subspace on both sides");
    main_ = SeqLayer::make(store, prefix + ".main", kind, in_main, out_main, rng);
    aux_ = SeqLayer::make(store, prefix + ".aux", kind, in_aux, out_aux, rng);
    // zero gate weights: initial gates are 0.5 everywhere (neutral transfer)
    w_a2m_ = store.add(prefix + ".w_a2m", Tensor({split_aux.shared_dim, split_main.shared_dim}));
    w_m2a_ = store.add(prefix + ".w_m2a", Tensor({split_main.shared_dim, split_aux.shared_dim}));
}

std::pair<std::vector<NodeRef>, std::vector<NodeRef>> GatedLayerPair::forward(
    Tape& t, const std::vector<NodeRef>& main_in, const std::vector<NodeRef>& aux_in,
    const nn::DropCfg& drop, bool training, Rng& rng) const {
    auto main_out = main_.forward(t, main_in, drop, training, rng);
    auto aux_out = aux_.forward(t, aux_in, drop, training, rng);
    if (main_out.size() != aux_out.size())
        throw ShapeError("gated layer: task paths emitted different lengths");
    std::vector<NodeRef> main_final, aux_final;
    main_final.reserve(main_out.size());
    aux_final.reserve(aux_out.size());
    for (std::size_t i = 0; i < main_out.size(); ++i) {
        auto m_shared = ad::slice_cols(t, main_out[i], 0, split_main_.shared_dim);
        auto a_shared = ad::slice_cols(t, aux_out[i], 0, split_aux_.shared_dim);
        auto [m_gated, a_gated] = lws_gate(t, m_shared, a_shared, w_a2m_->node, w_m2a_->node);
        if (split_main_.private_dim > 0) {
            auto m_priv = ad::slice_cols(t, main_out[i], split_main_.shared_dim,
                                         split_main_.shared_dim + split_main_.private_dim);
            main_final.push_back(ad::concat(t, {m_gated, m_priv}, 1));
        } else {
            main_final.push_back(m_gated);
        }
        if (split_aux_.private_dim > 0) {
            auto a_priv = ad::slice_cols(t, aux_out[i], split_aux_.shared_dim,
                                         split_aux_.shared_dim + split_aux_.private_dim);
            aux_final.push_back(ad::concat(t, {a_gated, a_priv}, 1));
        } else {
            aux_final.push_back(a_gated);
        }
    }
    return {main_final, aux_final};
}

int GatedLayerPair::out_dim(TaskSide side) const {
    return side == TaskSide::Main ? main_.out_dim() : aux_.out_dim();
}

const SeqLayer& GatedLayerPair::layer(TaskSide side) const {
    return side == TaskSide::Main ? main_ : aux_;
}

std::vector<nn::Parameter*> GatedLayerPair::task_params(TaskSide side) const {
    return side == TaskSide::Main ? main_.params() : aux_.params();
}

std::string ParamReport::text() const {
    std::ostringstream os;
    os << "parameters by bucket:\n"
       << "  shared        " << shared << "\n"
       << "  private-main  " << private_main << "\n"
       << "  private-aux   " << private_aux << "\n"
       << "  gates         " << gates << "\n"
       << "  heads         " << heads << "\n"
       << "  total         " << total() << "\n";
    return os.str();
}

std::string ParamReport::kv() const {
    std::ostringstream os;
    os << "params.shared=" << shared << "\n"
       << "params.private_main=" << private_main << "\n"
       << "params.private_aux=" << private_aux << "\n"
       << "params.gates=" << gates << "\n"
       << "params.heads=" << heads << "\n"
       << "params.total=" << total() << "\n";
    return os.str();
}

SharingTopology SharingTopology::build(nn::ParamStore& store, const TopologySpec& spec, Rng& rng) {
    SharingTopology topo;
    topo.spec_ = spec;
    switch (spec.kind) {
        case TopologyKind::FSN: {
            if (!spec.private_dims_main.empty() || !spec.private_dims_aux.empty())
                throw ConfigError("fsn topology cannot have private hidden layers");
            if (spec.shared_dims.empty()) throw ConfigError("fsn topology needs at least one layer");
            int in = spec.input_dim;
            for (std::size_t i = 0; i < spec.shared_dims.size(); ++i) {
                topo.shared_.push_back(SeqLayer::make(store, "shared" + std::to_string(i),
                                                      spec.layer_kind, in, spec.shared_dims[i], rng));
                in = spec.shared_dims[i];
            }
            break;
        }
        case TopologyKind::PSN: {
            if (spec.shared_dims.empty()) throw ConfigError("psn topology needs a shared stack");
            if (spec.private_dims_main.empty() || spec.private_dims_aux.empty())
                throw ConfigError("psn topology needs at least one private layer per task");
            int in = spec.input_dim;
            for (std::size_t i = 0; i < spec.shared_dims.size(); ++i) {
                topo.shared_.push_back(SeqLayer::make(store, "shared" + std::to_string(i),
                                                      spec.layer_kind, in, spec.shared_dims[i], rng));
                in = spec.shared_dims[i];
            }
            int in_m = in;
            for (std::size_t i = 0; i < spec.private_dims_main.size(); ++i) {
                topo.private_main_.push_back(SeqLayer::make(store, "private_main" + std::to_string(i),
                                                            spec.layer_kind, in_m,
                                                            spec.private_dims_main[i], rng));
                in_m = spec.private_dims_main[i];
            }
            int in_a = in;
            for (std::size_t i = 0; i < spec.private_dims_aux.size(); ++i) {
                topo.private_aux_.push_back(SeqLayer::make(store, "private_aux" + std::to_string(i),
                                                           spec.layer_kind, in_a,
                                                           spec.private_dims_aux[i], rng));
                in_a = spec.private_dims_aux[i];
            }
            break;
        }
        case TopologyKind::LWS: {
            if (spec.lws_dims_main.empty() || spec.lws_dims_main.size() != spec.lws_dims_aux.size())
                throw ConfigError("lws topology needs equally deep main and aux stacks");
            if (spec.lws_split_main.size() != spec.lws_dims_main.size() ||
                spec.lws_split_aux.size() != spec.lws_dims_aux.size())
                throw ConfigError("lws topology needs one subspace split per layer");
            int in_m = spec.input_dim, in_a = spec.input_dim;
            for (std::size_t i = 0; i < spec.lws_dims_main.size(); ++i) {
                topo.lws_.emplace_back(store, "lws" + std::to_string(i), spec.layer_kind, in_m, in_a,
                                       spec.lws_dims_main[i], spec.lws_dims_aux[i],
                                       spec.lws_split_main[i], spec.lws_split_aux[i], rng);
                in_m = spec.lws_dims_main[i];
                in_a = spec.lws_dims_aux[i];
            }
            break;
        }
    }
    return topo;
}

std::vector<NodeRef> SharingTopology::forward(Tape& t, const std::vector<NodeRef>& x, TaskSide side,
                                              const nn::DropCfg& drop, bool training,
                                              Rng& rng) const {
    switch (spec_.kind) {
        case TopologyKind::FSN: {
            auto h = x;
            for (const auto& layer : shared_) h = layer.forward(t, h, drop, training, rng);
            return h;
        }
        case TopologyKind::PSN: {
            auto h = x;
            for (const auto& layer : shared_) h = layer.forward(t, h, drop, training, rng);
            const auto& priv = side == TaskSide::Main ? private_main_ : private_aux_;
            for (const auto& layer : priv) h = layer.forward(t, h, drop, training, rng);
            return h;
        }
        case TopologyKind::LWS: {
            auto both = forward_both(t, x, drop, training, rng);
            return side == TaskSide::Main ? both.first : both.second;
        }
    }
    throw ConfigError("unreachable topology kind");
}

std::pair<std::vector<NodeRef>, std::vector<NodeRef>> SharingTopology::forward_both(
    Tape& t, const std::vector<NodeRef>& x, const nn::DropCfg& drop, bool training, Rng& rng) const {
    if (spec_.kind != TopologyKind::LWS)
        throw ConfigError("forward_both is only defined for the lws topology, called on " +
                          to_string(spec_.kind));
    std::vector<NodeRef> hm = x, ha = x;
    for (const auto& pair : lws_) {
        auto [m, a] = pair.forward(t, hm, ha, drop, training, rng);
        hm = std::move(m);
        ha = std::move(a);
    }
    return {hm, ha};
}

int SharingTopology::out_dim(TaskSide side) const {
    switch (spec_.kind) {
        case TopologyKind::FSN: return shared_.back().out_dim();
        case TopologyKind::PSN:
            return side == TaskSide::Main ? private_main_.back().out_dim()
                                          : private_aux_.back().out_dim();
        case TopologyKind::LWS: return lws_.back().out_dim(side);
    }
    return 0;
}

ParamReport SharingTopology::report() const {
    ParamReport r;
    for (const auto& l : shared_) r.shared += nn::param_count(l.params());
    for (const auto& l : private_main_) r.private_main += nn::param_count(l.params());
    for (const auto& l : private_aux_) r.private_aux += nn::param_count(l.params());
    for (const auto& p : lws_) {
        r.private_main += nn::param_count(p.task_params(TaskSide::Main));
        r.private_aux += nn::param_count(p.task_params(TaskSide::Aux));
        r.gates += nn::param_count(p.gate_params());
    }
    return r;
}

std::vector<nn::Parameter*> SharingTopology::task_exclusive_params(TaskSide side) const {
    std::vector<nn::Parameter*> out;
    const auto& priv = side == TaskSide::Main ? private_main_ : private_aux_;
    for (const auto& l : priv) {
        auto ps = l.params();
        out.insert(out.end(), ps.begin(), ps.end());
    }
    // In LWS the task stacks feed each other through the gates, so neither
    // stack is exclusive; only the gate matrix INTO each task is exclusive to
    // that task's output.
    for (const auto& p : lws_)
        out.push_back(side == TaskSide::Main ? p.w_a2m() : p.w_m2a());
    return out;
}

}  // namespace mtl::share
