#include "mtl/nli.hpp"

#include <algorithm>

namespace mtl::tasks {

namespace {

int argmax_row(const Tensor& m, int row) {
    int best = 0;
    for (int j = 1; j < m.dim(1); ++j)
        if (m.at(row, j) > m.at(row, best)) best = j;
    return best;
}

int label_index(const std::string& label) {
    for (std::size_t i = 0; i < data::kNliLabels.size(); ++i)
        if (data::kNliLabels[i] == label) return static_cast<int>(i);
    throw ConfigError("unknown nli label '" + label + "'");
}

}  // namespace

NliModel::NliModel(NliConfig cfg, NliData data) : cfg_(std::move(cfg)), data_(std::move(data)) {
    if (data_.train.empty()) throw ConfigError("nli model needs a non-empty training split");
    has_aux_head_ = is_mtl(cfg_.wiring);

    auto index_sentence = [&](const data::Sentence& s) {
        s.validate();
        for (const auto& tok : s.tokens) vocab_.add(tok);
        if (has_aux_head_)
            for (const auto& st : s.semtags) semtag_tags_.add(st);
    };
    for (const auto& inst : data_.train) {
        index_sentence(inst.premise);
        index_sentence(inst.hypothesis);
    }
    for (const auto& s : data_.pretrain) index_sentence(s);
    vocab_.freeze();
    semtag_tags_.freeze();
    if (has_aux_head_ && semtag_tags_.size() == 0)
        throw ConfigError("mtl nli model needs semtags: provide a pretrain corpus or projected "
                          "pair tags");

    Rng rng(cfg_.seed);
    emb_ = nn::EmbeddingTable(store_, "emb", vocab_.size(), cfg_.embed_dim, rng);

    int H = cfg_.hidden_dim;
    int H2 = 2 * H;
    switch (cfg_.wiring) {
        case Wiring::ST:
        case Wiring::FSN:
            encoder_ = share::SeqLayer::bilstm(store_, "encoder", cfg_.embed_dim, H2, rng);
            break;
        case Wiring::PSN:
            aux_encoder_ = share::SeqLayer::bilstm(store_, "aux_encoder", cfg_.embed_dim, H2, rng);
            encoder_ = share::SeqLayer::bilstm(store_, "encoder", H2, H2, rng);
            break;
        case Wiring::LWS: {
            share::Split split{cfg_.subspace_shared, cfg_.subspace_private};
            gated_ = share::GatedLayerPair(store_, "gated_enc", share::LayerKind::BiLstm,
                                           cfg_.embed_dim, cfg_.embed_dim, H2, H2, split, split, rng);
            break;
        }
    }
    if (has_aux_head_) semtag_head_ = nn::Dense(store_, "head.semtag", H2, semtag_tags_.size(), rng);

    enhance_proj_ = nn::Dense(store_, "enhance_proj", 4 * H2, H, rng);
    composer_ = share::SeqLayer::bilstm(store_, "composer", H, H2, rng);
    mlp_hidden_ = nn::Dense(store_, "mlp.hidden", 4 * H2, H, rng);
    mlp_out_ = nn::Dense(store_, "mlp.out", H, 3, rng);
}

NliModel::EncodedSeq NliModel::encode(ad::Tape& t, const data::Sentence& s, bool training,
                                      Rng& rng) {
    if (s.tokens.empty()) throw ShapeError("nli encode: empty sentence");
    nn::DropCfg drop{cfg_.dropout, cfg_.recurrent_dropout};
    std::vector<ad::NodeRef> embs;
    embs.reserve(s.tokens.size());
    for (const auto& tok : s.tokens) embs.push_back(emb_.lookup(t, vocab_.id(tok)));

    EncodedSeq out;
    switch (cfg_.wiring) {
        case Wiring::ST:
            out.enc = encoder_.forward(t, embs, drop, training, rng);
            break;
        case Wiring::FSN:
            out.enc = encoder_.forward(t, embs, drop, training, rng);
            out.semtag = out.enc;
            break;
        case Wiring::PSN: {
            auto lower = aux_encoder_.forward(t, embs, drop, training, rng);
            out.semtag = lower;
            out.enc = encoder_.forward(t, lower, drop, training, rng);
            break;
        }
        case Wiring::LWS: {
            auto [m, a] = gated_.forward(t, embs, embs, drop, training, rng);
            out.enc = std::move(m);
            out.semtag = std::move(a);
            break;
        }
    }
    return out;
}

ad::NodeRef NliModel::semtag_logits_for(ad::Tape& t, const EncodedSeq& enc) {
    std::vector<ad::NodeRef> rows;
    for (const auto& h : enc.semtag) rows.push_back(semtag_head_.apply(t, h));
    return ad::concat(t, rows, 0);
}

NliModel::Forward NliModel::forward(ad::Tape& t, const data::Sentence& premise,
                                    const data::Sentence& hypothesis, bool training, Rng& rng) {
    auto enc_a = encode(t, premise, training, rng);
    auto enc_b = encode(t, hypothesis, training, rng);

    Forward out;
    if (has_aux_head_) {
        out.semtag_premise = semtag_logits_for(t, enc_a);
        out.semtag_hypothesis = semtag_logits_for(t, enc_b);
    }

    auto A = ad::concat(t, enc_a.enc, 0);  // [n x 2H]
    auto B = ad::concat(t, enc_b.enc, 0);  // [m x 2H]
    auto E = ad::matmul(t, A, ad::transpose(t, B));  // e_ij = a_i . b_j
    out.attention = E;

    auto A_tilde = ad::matmul(t, ad::softmax(t, E, 1), B);                    // aligned to premise
    auto B_tilde = ad::matmul(t, ad::transpose(t, ad::softmax(t, E, 0)), A);  // aligned to hyp

    auto enhance = [&](const ad::NodeRef& X, const ad::NodeRef& X_tilde) {
        return ad::concat(
            t, {X, X_tilde, ad::sub(t, X, X_tilde), ad::mul(t, X, X_tilde)}, 1);  // [n x 8H]
    };
    auto Ma = enhance(A, A_tilde);
    auto Mb = enhance(B, B_tilde);

    nn::DropCfg drop{cfg_.dropout, cfg_.recurrent_dropout};
    auto compose = [&](const ad::NodeRef& M, int rows) {
        std::vector<ad::NodeRef> seq;
        seq.reserve(static_cast<std::size_t>(rows));
        for (int i = 0; i < rows; ++i) {
            auto r = ad::row(t, M, i);
            r = nn::dropout(t, r, cfg_.dropout, training, rng);
            seq.push_back(ad::relu(t, enhance_proj_.apply(t, r)));
        }
        auto composed = composer_.forward(t, seq, drop, training, rng);
        auto V = ad::concat(t, composed, 0);
        return ad::concat(t, {ad::mean_axis(t, V, 0), ad::max_axis(t, V, 0)}, 1);  // [1 x 4H]
    };
    auto va = compose(Ma, premise.size());
    auto vb = compose(Mb, hypothesis.size());
    auto pooled = ad::concat(t, {va, vb}, 1);  // [1 x 8H]

    auto hidden = ad::tanh_(t, mlp_hidden_.apply(t, pooled));
    hidden = nn::dropout(t, hidden, cfg_.dropout, training, rng);
    out.entail_logits = mlp_out_.apply(t, hidden);
    return out;
}

ad::NodeRef NliModel::semtag_loss_for(ad::Tape& t, const data::Sentence& s,
                                      const ad::NodeRef& logits) {
    int n = s.size();
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::vector<bool> mask(static_cast<std::size_t>(n));
    bool any = false;
    for (int i = 0; i < n; ++i) {
        int g = semtag_tags_.id(s.semtags[static_cast<std::size_t>(i)]);
        ids[static_cast<std::size_t>(i)] = std::max(g, 0);
        mask[static_cast<std::size_t>(i)] = g >= 0;
        any = any || g >= 0;
    }
    if (!any) return nullptr;
    return ad::softmax_xent(t, logits, ids, mask);
}

LossPair NliModel::batch_loss(ad::Tape& t, Corpus corpus, const std::vector<int>& indices,
                              bool training, Rng& rng) {
    if (corpus == Corpus::Aux)
        throw ConfigError("the nli model trains in the overlapped regime; there is no aux corpus");
    ad::NodeRef main_sum, aux_sum;
    int main_n = 0, aux_n = 0;
    for (int idx : indices) {
        const auto& inst = data_.train[static_cast<std::size_t>(idx)];
        auto fwd = forward(t, inst.premise, inst.hypothesis, training, rng);
        auto main = ad::softmax_xent(t, fwd.entail_logits, {label_index(inst.label)});
        main_sum = main_sum ? ad::add(t, main_sum, main) : main;
        ++main_n;

        if (has_aux_head_) {
            ad::NodeRef aux;
            if (inst.premise.has_semtags()) aux = semtag_loss_for(t, inst.premise, fwd.semtag_premise);
            if (inst.hypothesis.has_semtags()) {
                auto h = semtag_loss_for(t, inst.hypothesis, fwd.semtag_hypothesis);
                if (h) aux = aux ? ad::scale(t, ad::add(t, aux, h), 0.5) : h;
            }
            if (aux) {
                aux_sum = aux_sum ? ad::add(t, aux_sum, aux) : aux;
                ++aux_n;
            }
        }
    }
    LossPair out;
    if (main_sum) out.main = ad::scale(t, main_sum, 1.0 / main_n);
    if (aux_sum) out.aux = ad::scale(t, aux_sum, 1.0 / aux_n);
    return out;
}

int NliModel::train_size(Corpus corpus) const {
    return corpus == Corpus::Main ? static_cast<int>(data_.train.size()) : 0;
}

int NliModel::predict(const data::NliInstance& inst) {
    ad::Tape t(true, false);
    Rng rng(0);
    auto fwd = forward(t, inst.premise, inst.hypothesis, false, rng);
    return argmax_row(fwd.entail_logits->value, 0);
}

std::vector<std::string> NliModel::predict_semtags(const data::Sentence& s) {
    if (!has_aux_head_) throw ConfigError("single-task nli model has no semtag head");
    ad::Tape t(true, false);
    Rng rng(0);
    auto enc = encode(t, s, false, rng);
    auto logits = semtag_logits_for(t, enc);
    std::vector<std::string> tags;
    for (int i = 0; i < s.size(); ++i) tags.push_back(semtag_tags_.tag(argmax_row(logits->value, i)));
    return tags;
}

Real NliModel::semtag_corpus_loss() {
    if (!has_aux_head_) throw ConfigError("single-task nli model has no semtag head");
    if (data_.pretrain.empty()) throw ConfigError("pretraining corpus is missing or empty");
    Real sum = 0.0;
    int n = 0;
    Rng rng(0);
    for (const auto& s : data_.pretrain) {
        ad::Tape t(true, false);
        auto enc = encode(t, s, false, rng);
        auto loss = semtag_loss_for(t, s, semtag_logits_for(t, enc));
        if (!loss) continue;
        sum += loss->value[0];
        ++n;
    }
    return n ? sum / n : 0.0;
}

Real NliModel::pretrain_aux_encoder(int epochs, Real lr, int batch_size, Rng& rng) {
    if (!has_aux_head_)
        throw ConfigError("pretraining needs an mtl wiring with a semtag head");
    if (data_.pretrain.empty()) throw ConfigError("pretraining corpus is missing or empty");
    nn::AdamConfig acfg;
    acfg.lr = lr;
    nn::Adam opt(store_.all(), acfg);
    Real last_epoch_loss = 0.0;
    for (int e = 0; e < epochs; ++e) {
        std::vector<int> order(data_.pretrain.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        rng.shuffle(order);
        Real epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
            ad::Tape t;
            ad::NodeRef sum;
            int n = 0;
            for (std::size_t k = start;
                 k < std::min(order.size(), start + static_cast<std::size_t>(batch_size)); ++k) {
                const auto& s = data_.pretrain[static_cast<std::size_t>(order[k])];
                auto enc = encode(t, s, true, rng);
                auto loss = semtag_loss_for(t, s, semtag_logits_for(t, enc));
                if (!loss) continue;
                sum = sum ? ad::add(t, sum, loss) : loss;
                ++n;
            }
            if (!sum) continue;
            auto mean = ad::scale(t, sum, 1.0 / n);
            opt.zero_grad();
            t.backward(mean);
            opt.clip_global_norm(5.0);
            opt.step();
            epoch_loss += mean->value[0];
            ++batches;
        }
        last_epoch_loss = batches ? epoch_loss / batches : 0.0;
    }
    return last_epoch_loss;
}

std::map<std::string, Real> NliModel::evaluate(const std::string& split) {
    const std::vector<data::NliInstance>* insts;
    if (split == "train")
        insts = &data_.train;
    else if (split == "dev")
        insts = &data_.dev;
    else if (split == "test")
        insts = &data_.test;
    else
        throw ConfigError("unknown split '" + split + "'");

    std::map<std::string, Real> metrics;
    long right = 0, total = 0;
    long sem_right = 0, sem_total = 0;
    for (const auto& inst : *insts) {
        ++total;
        if (predict(inst) == label_index(inst.label)) ++right;
        if (has_aux_head_) {
            for (const auto* s : {&inst.premise, &inst.hypothesis}) {
                if (!s->has_semtags()) continue;
                auto pred = predict_semtags(*s);
                for (std::size_t i = 0; i < pred.size(); ++i) {
                    ++sem_total;
                    if (pred[i] == s->semtags[i]) ++sem_right;
                }
            }
        }
    }
    if (total > 0) metrics["accuracy"] = static_cast<Real>(right) / total;
    if (sem_total > 0) metrics["aux_accuracy"] = static_cast<Real>(sem_right) / sem_total;
    return metrics;
}

std::vector<nn::Parameter*> NliModel::aux_exclusive_params() {
    std::vector<nn::Parameter*> out;
    if (!has_aux_head_) return out;
    auto hp = semtag_head_.params();
    out.insert(out.end(), hp.begin(), hp.end());
    if (cfg_.wiring == Wiring::LWS) out.push_back(gated_.w_m2a());
    return out;
}

share::ParamReport NliModel::report() const {
    share::ParamReport r;
    r.shared += static_cast<long>(emb_.table()->value().numel());
    switch (cfg_.wiring) {
        case Wiring::ST:
            r.private_main += nn::param_count(encoder_.params());
            break;
        case Wiring::FSN:
            r.shared += nn::param_count(encoder_.params());
            break;
        case Wiring::PSN:
            r.shared += nn::param_count(aux_encoder_.params());
            r.private_main += nn::param_count(encoder_.params());
            break;
        case Wiring::LWS:
            r.private_main += nn::param_count(gated_.task_params(share::TaskSide::Main));
            r.private_aux += nn::param_count(gated_.task_params(share::TaskSide::Aux));
            r.gates += nn::param_count(gated_.gate_params());
            break;
    }
    for (const auto* d : {&enhance_proj_, &mlp_hidden_, &mlp_out_}) r.heads += nn::param_count(d->params());
    r.private_main += nn::param_count(composer_.params());
    if (has_aux_head_) r.heads += nn::param_count(semtag_head_.params());
    return r;
}

}  // namespace mtl::tasks
