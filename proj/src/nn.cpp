#include "mtl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace mtl::nn {

Parameter* ParamStore::add(const std::string& name, Tensor init) {
    for (const auto& p : items_)
        if (p->name == name) throw ConfigError("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->node = ad::make_param(std::move(init), "param");
    items_.push_back(std::move(p));
    return items_.back().get();
}

Parameter* ParamStore::find(const std::string& name) {
    for (const auto& p : items_)
        if (p->name == name) return p.get();
    return nullptr;
}

std::vector<Parameter*> ParamStore::all() {
    std::vector<Parameter*> out;
    out.reserve(items_.size());
    for (const auto& p : items_) out.push_back(p.get());
    return out;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : items_) n += p->node->value.numel();
    return n;
}

long param_count(const std::vector<Parameter*>& ps) {
    long n = 0;
    for (const auto* p : ps) n += static_cast<long>(p->value().numel());
    return n;
}

Tensor glorot_uniform(int rows, int cols, Rng& rng) {
    Real limit = std::sqrt(6.0 / (rows + cols));
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-limit, limit);
    return t;
}

Tensor normal_init(std::vector<int> shape, Real mean, Real sd, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(mean, sd);
    return t;
}

NodeRef dropout(Tape& t, const NodeRef& x, Real rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
    if (!training || rate == 0.0) return x;
    auto mask = dropout_mask(t, x->value.shape(), rate, rng);
    return apply_mask(t, x, mask);
}

NodeRef dropout_mask(Tape& t, const std::vector<int>& shape, Real rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
    Tensor m(shape);
    Real keep = 1.0 - rate;
    for (std::size_t i = 0; i < m.numel(); ++i) m[i] = rng.uniform() < rate ? 0.0 : 1.0 / keep;
    return t.leaf(std::move(m), false, "dropout_mask");
}

NodeRef apply_mask(Tape& t, const NodeRef& x, const NodeRef& mask) {
    return ad::mul(t, x, mask);
}

EmbeddingTable::EmbeddingTable(ParamStore& store, const std::string& name, int vocab_size, int dim,
                               Rng& rng)
    : vocab_size_(vocab_size), dim_(dim) {
    table_ = store.add(name, normal_init({vocab_size, dim}, 0.0, 0.1, rng));
    table_->frozen_rows = {kPad};
}

NodeRef EmbeddingTable::lookup(Tape& t, int token_id) const {
    if (token_id < 0 || token_id >= vocab_size_)
        throw ShapeError("embedding lookup index " + std::to_string(token_id) +
                         " out of vocab of size " + std::to_string(vocab_size_));
    return ad::row(t, table_->node, token_id);
}

std::vector<NodeRef> EmbeddingTable::lookup_all(Tape& t, const std::vector<int>& ids) const {
    std::vector<NodeRef> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(lookup(t, id));
    return out;
}

LstmCell::LstmCell(ParamStore& store, const std::string& prefix, int input_dim, int hidden_dim,
                   Rng& rng)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
    w_x_ = store.add(prefix + ".w_x", glorot_uniform(input_dim, 4 * hidden_dim, rng));
    w_h_ = store.add(prefix + ".w_h", glorot_uniform(hidden_dim, 4 * hidden_dim, rng));
    Tensor bias({1, 4 * hidden_dim});
    for (int j = hidden_dim; j < 2 * hidden_dim; ++j) bias[static_cast<std::size_t>(j)] = 1.0;
    b_ = store.add(prefix + ".b", std::move(bias));
}

std::pair<NodeRef, NodeRef> LstmCell::step(Tape& t, const NodeRef& x, const NodeRef& h_prev,
                                           const NodeRef& c_prev, const NodeRef& h_mask) const {
    if (x->value.rank() != 2 || x->value.dim(1) != input_dim_)
        throw ShapeError("lstm step: input " + x->value.shape_str() + " does not match cell input dim " +
                         std::to_string(input_dim_));
    if (h_prev->value.dim(1) != hidden_dim_ || c_prev->value.dim(1) != hidden_dim_)
        throw ShapeError("lstm step: state dims do not match hidden dim " +
                         std::to_string(hidden_dim_));
    NodeRef h_in = h_mask ? ad::mul(t, h_prev, h_mask) : h_prev;
    auto pre = ad::add(t, ad::add(t, ad::matmul(t, x, w_x_->node), ad::matmul(t, h_in, w_h_->node)),
                       b_->node);
    int H = hidden_dim_;
    auto gi = ad::sigmoid(t, ad::slice_cols(t, pre, 0, H));
    auto gf = ad::sigmoid(t, ad::slice_cols(t, pre, H, 2 * H));
    auto go = ad::sigmoid(t, ad::slice_cols(t, pre, 2 * H, 3 * H));
    auto gg = ad::tanh_(t, ad::slice_cols(t, pre, 3 * H, 4 * H));
    auto c = ad::add(t, ad::mul(t, gf, c_prev), ad::mul(t, gi, gg));
    auto h = ad::mul(t, go, ad::tanh_(t, c));
    return {h, c};
}

BiLstm::BiLstm(ParamStore& store, const std::string& prefix, int input_dim, int hidden_dim, Rng& rng)
    : fwd_(store, prefix + ".fwd", input_dim, hidden_dim, rng),
      bwd_(store, prefix + ".bwd", input_dim, hidden_dim, rng) {}

std::vector<Parameter*> BiLstm::params() const {
    auto out = fwd_.params();
    auto b = bwd_.params();
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

std::vector<NodeRef> run_lstm(Tape& t, const LstmCell& cell, const std::vector<NodeRef>& seq,
                              bool reversed, const NodeRef& h_mask) {
    int n = static_cast<int>(seq.size());
    NodeRef h = t.leaf(Tensor({1, cell.hidden_dim()}), false, "h0");
    NodeRef c = t.leaf(Tensor({1, cell.hidden_dim()}), false, "c0");
    std::vector<NodeRef> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        int i = reversed ? n - 1 - k : k;
        auto [h2, c2] = cell.step(t, seq[static_cast<std::size_t>(i)], h, c, h_mask);
        h = h2;
        c = c2;
        out[static_cast<std::size_t>(i)] = h;
    }
    return out;
}

std::vector<NodeRef> BiLstm::forward(Tape& t, const std::vector<NodeRef>& seq, const DropCfg& drop,
                                     bool training, Rng& rng) const {
    if (seq.empty()) throw ShapeError("bilstm: empty sequence");
    std::vector<NodeRef> in = seq;
    if (training && drop.input > 0.0)
        for (auto& x : in) x = dropout(t, x, drop.input, true, rng);
    NodeRef mask_f, mask_b;
    if (training && drop.recurrent > 0.0) {
        mask_f = dropout_mask(t, {1, fwd_.hidden_dim()}, drop.recurrent, rng);
        mask_b = dropout_mask(t, {1, bwd_.hidden_dim()}, drop.recurrent, rng);
    }
    auto hf = run_lstm(t, fwd_, in, false, mask_f);
    auto hb = run_lstm(t, bwd_, in, true, mask_b);
    std::vector<NodeRef> out;
    out.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out.push_back(ad::concat(t, {hf[i], hb[i]}, 1));
    return out;
}

Dense::Dense(ParamStore& store, const std::string& prefix, int in_dim, int out_dim, Rng& rng)
    : out_dim_(out_dim) {
    w_ = store.add(prefix + ".w", glorot_uniform(in_dim, out_dim, rng));
    b_ = store.add(prefix + ".b", Tensor({1, out_dim}));
}

NodeRef Dense::apply(Tape& t, const NodeRef& x) const {
    return ad::add_rowvec(t, ad::matmul(t, x, w_->node), b_->node);
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto* p : params_) {
        m_.emplace_back(p->value().shape());
        v_.emplace_back(p->value().shape());
    }
}

void Adam::step() {
    ++t_;
    Real bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<Real>(t_));
    Real bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<Real>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Parameter* p = params_[pi];
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
        bool live = false;
        if (p->has_grad()) {
            Tensor& g = p->grad();
            if (!p->frozen_rows.empty() && p->value().rank() == 2) {
                int cols = p->value().dim(1);
                for (int r : p->frozen_rows)
                    for (int j = 0; j < cols; ++j) g.at(r, j) = 0.0;
            }
            for (std::size_t i = 0; i < g.numel(); ++i)
                if (g[i] != 0.0) {
                    live = true;
                    break;
                }
        }
        if (!live) {
            // moments decay, parameter untouched
            for (std::size_t i = 0; i < m.numel(); ++i) {
                m[i] *= cfg_.beta1;
                v[i] *= cfg_.beta2;
            }
            continue;
        }
        Tensor& g = p->grad();
        Tensor& x = p->value();
        for (std::size_t i = 0; i < x.numel(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            Real mhat = m[i] / bc1;
            Real vhat = v[i] / bc2;
            x[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

Real Adam::global_grad_norm() const {
    Real ss = 0.0;
    for (const auto* p : params_) {
        if (!p->node->has_grad()) continue;
        const Tensor& g = p->node->grad;
        for (std::size_t i = 0; i < g.numel(); ++i) ss += g[i] * g[i];
    }
    return std::sqrt(ss);
}

void Adam::clip_global_norm(Real max_norm) {
    if (max_norm <= 0.0) return;
    Real norm = global_grad_norm();
    if (norm <= max_norm) return;
    Real s = max_norm / norm;
    for (auto* p : params_) {
        if (!p->has_grad()) continue;
        Tensor& g = p->grad();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= s;
    }
}

// ---- checkpoint --------------------------------------------------------------

void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
    std::ofstream blob(path, std::ios::binary | std::ios::trunc);
    if (!blob) throw IoError("cannot open checkpoint for writing: " + path);
    nlohmann::json index;
    index["format"] = "mtl-ckpt-v1";
    index["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto* p : params) {
        const Tensor& v = p->value();
        nlohmann::json entry;
        entry["name"] = p->name;
        entry["shape"] = v.shape();
        entry["offset"] = offset;
        entry["count"] = v.numel();
        index["tensors"].push_back(entry);
        for (std::size_t i = 0; i < v.numel(); ++i) {
            float f = static_cast<float>(v[i]);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            unsigned char bytes[4] = {static_cast<unsigned char>(bits & 0xff),
                                      static_cast<unsigned char>((bits >> 8) & 0xff),
                                      static_cast<unsigned char>((bits >> 16) & 0xff),
                                      static_cast<unsigned char>((bits >> 24) & 0xff)};
            blob.write(reinterpret_cast<const char*>(bytes), 4);
        }
        offset += v.numel() * 4;
    }
    blob.close();
    if (!blob) throw IoError("failed writing checkpoint blob: " + path);
    std::ofstream idx(path + ".json", std::ios::trunc);
    if (!idx) throw IoError("cannot open checkpoint index for writing: " + path + ".json");
    idx << index.dump(2) << '\n';
}

void load_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
    std::ifstream idx(path + ".json");
    if (!idx) throw IoError("cannot open checkpoint index: " + path + ".json");
    nlohmann::json index = nlohmann::json::parse(idx, nullptr, true);
    std::ifstream blob(path, std::ios::binary);
    if (!blob) throw IoError("cannot open checkpoint blob: " + path);

    for (auto* p : params) {
        const nlohmann::json* found = nullptr;
        for (const auto& e : index["tensors"])
            if (e["name"] == p->name) {
                found = &e;
                break;
            }
        if (!found) throw IoError("checkpoint " + path + " is missing tensor '" + p->name + "'");
        std::vector<int> shape = (*found)["shape"].get<std::vector<int>>();
        if (shape != p->value().shape())
            throw ShapeError("checkpoint tensor '" + p->name + "' has shape " +
                             Tensor::shape_str(shape) + ", expected " + p->value().shape_str());
        std::uint64_t offset = (*found)["offset"].get<std::uint64_t>();
        blob.seekg(static_cast<std::streamoff>(offset));
        Tensor& v = p->value();
        for (std::size_t i = 0; i < v.numel(); ++i) {
            unsigned char bytes[4];
            blob.read(reinterpret_cast<char*>(bytes), 4);
            if (!blob) throw IoError("checkpoint blob truncated: " + path);
            std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                                 (static_cast<std::uint32_t>(bytes[1]) << 8) |
                                 (static_cast<std::uint32_t>(bytes[2]) << 16) |
                                 (static_cast<std::uint32_t>(bytes[3]) << 24);
            float f;
            std::memcpy(&f, &bits, 4);
            v[i] = static_cast<Real>(f);
        }
    }
}

}  // namespace mtl::nn
