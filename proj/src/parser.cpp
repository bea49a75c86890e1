#include "mtl/parser.hpp"

#include <algorithm>

namespace mtl::tasks {

namespace {

int argmax_row(const Tensor& m, int row) {
    int best = 0;
    for (int j = 1; j < m.dim(1); ++j)
        if (m.at(row, j) > m.at(row, best)) best = j;
    return best;
}

}  // namespace

ad::NodeRef biaffine_arc_scores(ad::Tape& t, const ad::NodeRef& h_dep, const ad::NodeRef& h_head,
                                const ad::NodeRef& u_mat, const ad::NodeRef& u_vec) {
    auto head_t = ad::transpose(t, h_head);                                  // [d x (n+1)]
    auto bilinear = ad::matmul(t, ad::matmul(t, h_dep, u_mat), head_t);      // [n x (n+1)]
    auto bias_row = ad::matmul(t, u_vec, head_t);                            // [1 x (n+1)]
    return ad::add_rowvec(t, bilinear, bias_row);
}

Parser::Parser(ParserConfig cfg, ParserData data) : cfg_(std::move(cfg)), data_(std::move(data)) {
    if (data_.train.empty()) throw ConfigError("parser needs a non-empty training split");
    has_aux_head_ = is_mtl(cfg_.wiring);
    for (const auto& s : data_.train) {
        s.validate();
        if (!s.has_heads() || !s.has_deprels() || !s.has_upos())
            throw ConfigError("parser training sentence '" + s.id +
                              "' needs UPOS, HEAD, and DEPREL layers");
        for (const auto& tok : s.tokens) vocab_.add(tok);
        for (const auto& u : s.upos) upos_tags_.add(u);
        for (const auto& d : s.deprels) deprel_tags_.add(d);
        if (has_aux_head_)
            for (const auto& st : s.semtags) semtag_tags_.add(st);
    }
    vocab_.freeze();
    upos_tags_.freeze();
    deprel_tags_.freeze();
    semtag_tags_.freeze();
    if (has_aux_head_ && semtag_tags_.size() == 0)
        throw ConfigError("mtl parser needs semtags on the training data; project tags first");

    Rng rng(cfg_.seed);
    emb_ = nn::EmbeddingTable(store_, "emb", vocab_.size(), cfg_.embed_dim, rng);

    int H2 = 2 * cfg_.hidden_dim;
    int ku = 0;  // filled after upos head exists; layer-2 input depends on it
    ku = upos_tags_.size();
    int l2_in = cfg_.embed_dim + H2 + ku;

    if (cfg_.wiring == Wiring::LWS) {
        share::Split split{cfg_.subspace_shared, cfg_.subspace_private};
        gated1_ = share::GatedLayerPair(store_, "gated1", share::LayerKind::BiLstm, cfg_.embed_dim,
                                        cfg_.embed_dim, H2, H2, split, split, rng);
        gated2_ = share::GatedLayerPair(store_, "gated2", share::LayerKind::BiLstm, l2_in, H2, H2,
                                        H2, split, split, rng);
    } else {
        layer1_ = share::SeqLayer::bilstm(store_, "layer1", cfg_.embed_dim, H2, rng);
        layer2_ = share::SeqLayer::bilstm(store_, "layer2", l2_in, H2, rng);
    }
    layer3_ = share::SeqLayer::bilstm(store_, "layer3", H2, H2, rng);
    layer4_ = share::SeqLayer::bilstm(store_, "layer4", H2, H2, rng);

    upos_head_ = nn::Dense(store_, "head.upos", H2, upos_tags_.size(), rng);
    if (has_aux_head_) semtag_head_ = nn::Dense(store_, "head.semtag", H2, semtag_tags_.size(), rng);

    proj_arc_dep_ = nn::Dense(store_, "proj.arc_dep", H2, cfg_.arc_dim, rng);
    proj_arc_head_ = nn::Dense(store_, "proj.arc_head", H2, cfg_.arc_dim, rng);
    proj_lbl_dep_ = nn::Dense(store_, "proj.lbl_dep", H2, cfg_.label_dim, rng);
    proj_lbl_head_ = nn::Dense(store_, "proj.lbl_head", H2, cfg_.label_dim, rng);

    root_repr_ = store_.add("root_repr", nn::normal_init({1, H2}, 0.0, 0.1, rng));
    arc_u_ = store_.add("arc.u", nn::glorot_uniform(cfg_.arc_dim, cfg_.arc_dim, rng));
    arc_bias_ = store_.add("arc.bias", Tensor({1, cfg_.arc_dim}));
    for (int l = 0; l < deprel_tags_.size(); ++l)
        label_u_.push_back(store_.add("label.u" + std::to_string(l),
                                      nn::glorot_uniform(cfg_.label_dim, cfg_.label_dim, rng)));
    label_affine_ = nn::Dense(store_, "label.affine", 2 * cfg_.label_dim, deprel_tags_.size(), rng);
}

Parser::Encoded Parser::encode(ad::Tape& t, const data::Sentence& s, bool training, Rng& rng) {
    if (s.tokens.empty()) throw ShapeError("parser forward: empty sentence");
    nn::DropCfg drop{cfg_.dropout, cfg_.recurrent_dropout};
    std::vector<ad::NodeRef> embs;
    embs.reserve(s.tokens.size());
    for (const auto& tok : s.tokens) embs.push_back(emb_.lookup(t, vocab_.id(tok)));

    Encoded enc;
    std::vector<ad::NodeRef> h1_main, h1_aux, h2_main, h2_aux;
    if (cfg_.wiring == Wiring::LWS) {
        auto [m1, a1] = gated1_.forward(t, embs, embs, drop, training, rng);
        h1_main = std::move(m1);
        h1_aux = std::move(a1);
    } else {
        h1_main = layer1_.forward(t, embs, drop, training, rng);
    }

    // UPOS from layer 1; the prediction distribution feeds layer 2
    std::vector<ad::NodeRef> upos_rows;
    for (const auto& h : h1_main) upos_rows.push_back(upos_head_.apply(t, h));
    enc.upos_logits = ad::concat(t, upos_rows, 0);
    auto upos_probs = ad::softmax(t, enc.upos_logits, 1);

    std::vector<ad::NodeRef> l2_in;
    for (std::size_t i = 0; i < embs.size(); ++i)
        l2_in.push_back(ad::concat(t, {embs[i], h1_main[i], ad::row(t, upos_probs, static_cast<int>(i))}, 1));

    if (cfg_.wiring == Wiring::LWS) {
        auto [m2, a2] = gated2_.forward(t, l2_in, h1_aux, drop, training, rng);
        h2_main = std::move(m2);
        h2_aux = std::move(a2);
        enc.semtag = h2_aux;
    } else {
        h2_main = layer2_.forward(t, l2_in, drop, training, rng);
        if (cfg_.wiring == Wiring::PSN) enc.semtag = h2_main;
    }

    auto h3 = layer3_.forward(t, h2_main, drop, training, rng);
    enc.top = layer4_.forward(t, h3, drop, training, rng);
    if (cfg_.wiring == Wiring::FSN) enc.semtag = enc.top;
    return enc;
}

Parser::Forward Parser::forward(ad::Tape& t, const data::Sentence& s, bool training, Rng& rng) {
    auto enc = encode(t, s, training, rng);
    int n = s.size();

    Forward out;
    out.upos_logits = enc.upos_logits;
    if (has_aux_head_) {
        std::vector<ad::NodeRef> rows;
        for (const auto& h : enc.semtag) rows.push_back(semtag_head_.apply(t, h));
        out.semtag_logits = ad::concat(t, rows, 0);
    }

    // head side includes ROOT at index 0
    std::vector<ad::NodeRef> dep_rows, head_rows, ldep_rows, lhead_rows;
    head_rows.push_back(ad::relu(t, proj_arc_head_.apply(t, root_repr_->node)));
    lhead_rows.push_back(ad::relu(t, proj_lbl_head_.apply(t, root_repr_->node)));
    for (const auto& h : enc.top) {
        dep_rows.push_back(ad::relu(t, proj_arc_dep_.apply(t, h)));
        head_rows.push_back(ad::relu(t, proj_arc_head_.apply(t, h)));
        ldep_rows.push_back(ad::relu(t, proj_lbl_dep_.apply(t, h)));
        lhead_rows.push_back(ad::relu(t, proj_lbl_head_.apply(t, h)));
    }
    auto H_dep = ad::concat(t, dep_rows, 0);    // [n x d]
    auto H_head = ad::concat(t, head_rows, 0);  // [(n+1) x d]
    out.arc_scores = biaffine_arc_scores(t, H_dep, H_head, arc_u_->node, arc_bias_->node);

    out.label_logits = [this, &t, ldep_rows, lhead_rows, n](int dep, int head) -> ad::NodeRef {
        if (dep < 0 || dep >= n || head < 0 || head > n)
            throw ShapeError("label_logits: dep/head out of range");
        auto di = ldep_rows[static_cast<std::size_t>(dep)];
        auto hj = lhead_rows[static_cast<std::size_t>(head)];
        std::vector<ad::NodeRef> scores;
        auto hj_t = ad::transpose(t, hj);
        for (auto* u : label_u_)
            scores.push_back(ad::matmul(t, ad::matmul(t, di, u->node), hj_t));  // [1x1]
        auto bilin = ad::concat(t, scores, 1);                                  // [1 x L]
        auto affine = label_affine_.apply(t, ad::concat(t, {di, hj}, 1));
        return ad::add(t, bilin, affine);
    };
    return out;
}

LossPair Parser::batch_loss(ad::Tape& t, Corpus corpus, const std::vector<int>& indices,
                            bool training, Rng& rng) {
    if (corpus == Corpus::Aux)
        throw ConfigError("the parser trains in the overlapped regime; there is no aux corpus");
    ad::NodeRef main_sum, aux_sum;
    int main_n = 0, aux_n = 0;
    for (int idx : indices) {
        const auto& s = data_.train[static_cast<std::size_t>(idx)];
        auto fwd = forward(t, s, training, rng);
        int n = s.size();

        // arc loss: each dependent picks its head among 0..n
        auto arc_loss = ad::softmax_xent(t, fwd.arc_scores, s.heads);

        // label loss conditioned on gold heads
        std::vector<ad::NodeRef> lbl_rows;
        std::vector<int> lbl_gold;
        for (int i = 0; i < n; ++i) {
            int g = deprel_tags_.id(s.deprels[static_cast<std::size_t>(i)]);
            if (g < 0) continue;
            lbl_rows.push_back(fwd.label_logits(i, s.heads[static_cast<std::size_t>(i)]));
            lbl_gold.push_back(g);
        }
        ad::NodeRef sent_loss = arc_loss;
        if (!lbl_rows.empty()) {
            auto lbl_loss = ad::softmax_xent(t, ad::concat(t, lbl_rows, 0), lbl_gold);
            sent_loss = ad::add(t, sent_loss, lbl_loss);
        }

        // joint UPOS objective
        std::vector<int> upos_ids(static_cast<std::size_t>(n));
        std::vector<bool> upos_mask(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            int g = upos_tags_.id(s.upos[static_cast<std::size_t>(i)]);
            upos_ids[static_cast<std::size_t>(i)] = std::max(g, 0);
            upos_mask[static_cast<std::size_t>(i)] = g >= 0;
        }
        sent_loss = ad::add(t, sent_loss, ad::softmax_xent(t, fwd.upos_logits, upos_ids, upos_mask));

        main_sum = main_sum ? ad::add(t, main_sum, sent_loss) : sent_loss;
        ++main_n;

        if (has_aux_head_ && s.has_semtags()) {
            std::vector<int> ids(static_cast<std::size_t>(n));
            std::vector<bool> mask(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                int g = semtag_tags_.id(s.semtags[static_cast<std::size_t>(i)]);
                ids[static_cast<std::size_t>(i)] = std::max(g, 0);
                mask[static_cast<std::size_t>(i)] = g >= 0;
            }
            auto aux = ad::softmax_xent(t, fwd.semtag_logits, ids, mask);
            aux_sum = aux_sum ? ad::add(t, aux_sum, aux) : aux;
            ++aux_n;
        }
    }
    LossPair out;
    if (main_sum) out.main = ad::scale(t, main_sum, 1.0 / main_n);
    if (aux_sum) out.aux = ad::scale(t, aux_sum, 1.0 / aux_n);
    return out;
}

int Parser::train_size(Corpus corpus) const {
    return corpus == Corpus::Main ? static_cast<int>(data_.train.size()) : 0;
}

DependencyTree Parser::parse(const data::Sentence& s) {
    ad::Tape t(true, false);
    Rng rng(0);
    auto fwd = forward(t, s, false, rng);
    int n = s.size();

    std::vector<std::vector<Real>> scores(static_cast<std::size_t>(n),
                                          std::vector<Real>(static_cast<std::size_t>(n) + 1));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= n; ++j)
            scores[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                fwd.arc_scores->value.at(i, j);

    DependencyTree tree;
    tree.heads = mst_decode(scores, RootPolicy::Single);
    tree.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto logits = fwd.label_logits(i, tree.heads[static_cast<std::size_t>(i)]);
        tree.labels[static_cast<std::size_t>(i)] = argmax_row(logits->value, 0);
    }
    return tree;
}

std::vector<std::string> Parser::predict_upos(const data::Sentence& s) {
    ad::Tape t(true, false);
    Rng rng(0);
    auto fwd = forward(t, s, false, rng);
    std::vector<std::string> out;
    for (int i = 0; i < s.size(); ++i) out.push_back(upos_tags_.tag(argmax_row(fwd.upos_logits->value, i)));
    return out;
}

std::map<std::string, Real> Parser::evaluate(const std::string& split) {
    const std::vector<data::Sentence>* sents;
    if (split == "train")
        sents = &data_.train;
    else if (split == "dev")
        sents = &data_.dev;
    else if (split == "test")
        sents = &data_.test;
    else
        throw ConfigError("unknown split '" + split + "'");

    long heads_right = 0, both_right = 0, tokens = 0;
    long upos_right = 0;
    long sem_right = 0, sem_total = 0;
    for (const auto& s : *sents) {
        if (!s.has_heads()) continue;
        auto tree = parse(s);
        auto upos = predict_upos(s);
        for (int i = 0; i < s.size(); ++i) {
            ++tokens;
            bool head_ok = tree.heads[static_cast<std::size_t>(i)] == s.heads[static_cast<std::size_t>(i)];
            if (head_ok) ++heads_right;
            int gold_l = deprel_tags_.id(s.deprels[static_cast<std::size_t>(i)]);
            if (head_ok && gold_l >= 0 && tree.labels[static_cast<std::size_t>(i)] == gold_l)
                ++both_right;
            if (s.has_upos() && upos[static_cast<std::size_t>(i)] == s.upos[static_cast<std::size_t>(i)])
                ++upos_right;
        }
        if (has_aux_head_ && s.has_semtags()) {
            ad::Tape t(true, false);
            Rng rng(0);
            auto fwd = forward(t, s, false, rng);
            for (int i = 0; i < s.size(); ++i) {
                ++sem_total;
                if (semtag_tags_.tag(argmax_row(fwd.semtag_logits->value, i)) ==
                    s.semtags[static_cast<std::size_t>(i)])
                    ++sem_right;
            }
        }
    }
    std::map<std::string, Real> metrics;
    if (tokens > 0) {
        metrics["uas"] = static_cast<Real>(heads_right) / tokens;
        metrics["las"] = static_cast<Real>(both_right) / tokens;
        metrics["upos_accuracy"] = static_cast<Real>(upos_right) / tokens;
    }
    if (sem_total > 0) metrics["aux_accuracy"] = static_cast<Real>(sem_right) / sem_total;
    return metrics;
}

std::vector<nn::Parameter*> Parser::aux_exclusive_params() {
    std::vector<nn::Parameter*> out;
    if (!has_aux_head_) return out;
    auto hp = semtag_head_.params();
    out.insert(out.end(), hp.begin(), hp.end());
    if (cfg_.wiring == Wiring::LWS) {
        out.push_back(gated1_.w_m2a());
        out.push_back(gated2_.w_m2a());
    }
    return out;
}

share::ParamReport Parser::report() const {
    share::ParamReport r;
    auto add_params = [](long& bucket, const std::vector<nn::Parameter*>& ps) {
        bucket += nn::param_count(ps);
    };
    r.shared += static_cast<long>(emb_.table()->value().numel());
    if (cfg_.wiring == Wiring::LWS) {
        for (const auto* g : {&gated1_, &gated2_}) {
            add_params(r.private_main, g->task_params(share::TaskSide::Main));
            add_params(r.private_aux, g->task_params(share::TaskSide::Aux));
            add_params(r.gates, g->gate_params());
        }
        add_params(r.private_main, layer3_.params());
        add_params(r.private_main, layer4_.params());
    } else if (cfg_.wiring == Wiring::PSN) {
        add_params(r.shared, layer1_.params());
        add_params(r.shared, layer2_.params());
        add_params(r.private_main, layer3_.params());
        add_params(r.private_main, layer4_.params());
    } else {
        // ST and FSN: the whole stack serves every attached head
        for (const auto* l : {&layer1_, &layer2_, &layer3_, &layer4_}) add_params(r.shared, l->params());
    }
    add_params(r.heads, upos_head_.params());
    if (has_aux_head_) add_params(r.heads, semtag_head_.params());
    for (const auto* d : {&proj_arc_dep_, &proj_arc_head_, &proj_lbl_dep_, &proj_lbl_head_})
        add_params(r.heads, d->params());
    r.heads += static_cast<long>(root_repr_->value().numel());
    r.heads += static_cast<long>(arc_u_->value().numel());
    r.heads += static_cast<long>(arc_bias_->value().numel());
    for (const auto* u : label_u_) r.heads += static_cast<long>(u->value().numel());
    add_params(r.heads, label_affine_.params());
    return r;
}

}  // namespace mtl::tasks
