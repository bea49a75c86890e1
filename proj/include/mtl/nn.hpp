#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mtl/autodiff.hpp"
#include "mtl/rng.hpp"
#include "mtl/tensor.hpp"

namespace mtl::nn {

using ad::NodeRef;
using ad::Tape;

// Named long-lived leaf. Gradients persist across tapes until zeroed.
struct Parameter {
    std::string name;
    NodeRef node;
    std::vector<int> frozen_rows;  // rows whose gradient is discarded (embedding PAD)

    Tensor& value() { return node->value; }
    const Tensor& value() const { return node->value; }
    Tensor& grad() { return node->grad; }
    bool has_grad() const { return node->has_grad(); }
    void zero_grad() { node->zero_grad(); }
};

// Deterministic registry; iteration order is creation order, which fixes
// checkpoint layout and optimizer behavior.
class ParamStore {
public:
    Parameter* add(const std::string& name, Tensor init);
    Parameter* find(const std::string& name);
    std::vector<Parameter*> all();
    std::size_t scalar_count() const;

private:
    std::vector<std::unique_ptr<Parameter>> items_;
};

long param_count(const std::vector<Parameter*>& ps);

// ---- initialization --------------------------------------------------------

Tensor glorot_uniform(int rows, int cols, Rng& rng);
Tensor normal_init(std::vector<int> shape, Real mean, Real sd, Rng& rng);

// ---- layers ----------------------------------------------------------------

// Inverted dropout: zeros with probability rate and scales survivors by
// 1/(1-rate) during training; exact identity at inference.
NodeRef dropout(Tape& t, const NodeRef& x, Real rate, bool training, Rng& rng);

// Variational mask shared across timesteps of one sequence.
NodeRef dropout_mask(Tape& t, const std::vector<int>& shape, Real rate, Rng& rng);
NodeRef apply_mask(Tape& t, const NodeRef& x, const NodeRef& mask);

struct DropCfg {
    Real input = 0.0;      // per-position dropout on layer input
    Real recurrent = 0.0;  // variational dropout on h_prev
};

class EmbeddingTable {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    EmbeddingTable() = default;
    EmbeddingTable(ParamStore& store, const std::string& name, int vocab_size, int dim, Rng& rng);

    NodeRef lookup(Tape& t, int token_id) const;
    std::vector<NodeRef> lookup_all(Tape& t, const std::vector<int>& ids) const;

    int vocab_size() const { return vocab_size_; }
    int dim() const { return dim_; }
    Parameter* table() const { return table_; }

private:
    Parameter* table_ = nullptr;
    int vocab_size_ = 0;
    int dim_ = 0;
};

// Fused-gate LSTM cell; weight columns are laid out [input | forget | output
// | candidate]. Forget-gate bias starts at 1.
class LstmCell {
public:
    LstmCell() = default;
    LstmCell(ParamStore& store, const std::string& prefix, int input_dim, int hidden_dim, Rng& rng);

    // h_mask, when non-null, is a variational dropout mask applied to h_prev.
    std::pair<NodeRef, NodeRef> step(Tape& t, const NodeRef& x, const NodeRef& h_prev,
                                     const NodeRef& c_prev, const NodeRef& h_mask = nullptr) const;

    int input_dim() const { return input_dim_; }
    int hidden_dim() const { return hidden_dim_; }
    std::vector<Parameter*> params() const { return {w_x_, w_h_, b_}; }

private:
    Parameter* w_x_ = nullptr;  // [input_dim x 4H]
    Parameter* w_h_ = nullptr;  // [H x 4H]
    Parameter* b_ = nullptr;    // [1 x 4H]
    int input_dim_ = 0;
    int hidden_dim_ = 0;
};

// Bidirectional wrapper; output at each position is [h_fwd ; h_bwd].
class BiLstm {
public:
    BiLstm() = default;
    BiLstm(ParamStore& store, const std::string& prefix, int input_dim, int hidden_dim, Rng& rng);

    std::vector<NodeRef> forward(Tape& t, const std::vector<NodeRef>& seq, const DropCfg& drop,
                                 bool training, Rng& rng) const;

    int output_dim() const { return 2 * fwd_.hidden_dim(); }
    int input_dim() const { return fwd_.input_dim(); }
    std::vector<Parameter*> params() const;

private:
    LstmCell fwd_, bwd_;
};

std::vector<NodeRef> run_lstm(Tape& t, const LstmCell& cell, const std::vector<NodeRef>& seq,
                              bool reversed, const NodeRef& h_mask);

// Affine map y = xW + b applied to [r x in] (bias broadcast over rows).
class Dense {
public:
    Dense() = default;
    Dense(ParamStore& store, const std::string& prefix, int in_dim, int out_dim, Rng& rng);

    NodeRef apply(Tape& t, const NodeRef& x) const;
    int out_dim() const { return out_dim_; }
    std::vector<Parameter*> params() const { return {w_, b_}; }

private:
    Parameter* w_ = nullptr;
    Parameter* b_ = nullptr;
    int out_dim_ = 0;
};

// ---- optimizer --------------------------------------------------------------

struct AdamConfig {
    Real lr = 1e-3;
    Real beta1 = 0.9;
    Real beta2 = 0.999;
    Real eps = 1e-8;
};

class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig cfg);

    // Parameters whose gradient is absent or identically zero are left
    // untouched this step; their moments still decay.
    void step();
    void zero_grad();
    Real global_grad_norm() const;
    void clip_global_norm(Real max_norm);
    long long step_count() const { return t_; }

private:
    std::vector<Parameter*> params_;
    std::vector<Tensor> m_, v_;
    AdamConfig cfg_;
    long long t_ = 0;
};

// ---- checkpoint --------------------------------------------------------------

// Flat little-endian fp32 blob at `path` plus a JSON index at `path.json`
// mapping name -> shape and byte offset.
void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params);
void load_checkpoint(const std::string& path, const std::vector<Parameter*>& params);

}  // namespace mtl::nn
