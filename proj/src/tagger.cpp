#include "mtl/tagger.hpp"

#include <algorithm>

namespace mtl::tasks {

Wiring wiring_from_string(const std::string& s) {
    if (s == "st") return Wiring::ST;
    if (s == "fsn") return Wiring::FSN;
    if (s == "psn") return Wiring::PSN;
    if (s == "lws") return Wiring::LWS;
    throw ConfigError("unknown wiring '" + s + "' (expected st, fsn, psn, or lws)");
}

std::string to_string(Wiring w) {
    switch (w) {
        case Wiring::ST: return "st";
        case Wiring::FSN: return "fsn";
        case Wiring::PSN: return "psn";
        case Wiring::LWS: return "lws";
    }
    return "?";
}

namespace {

std::vector<int> label_ids(const data::TagVocab& vocab, const std::vector<std::string>& labels) {
    std::vector<int> ids;
    ids.reserve(labels.size());
    for (const auto& l : labels) ids.push_back(vocab.id(l));
    return ids;
}

// rows whose gold id is unknown (-1) are masked out of the loss
std::pair<std::vector<int>, std::vector<bool>> ids_and_mask(const data::TagVocab& vocab,
                                                            const std::vector<std::string>& labels) {
    std::vector<int> ids = label_ids(vocab, labels);
    std::vector<bool> mask(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        mask[i] = ids[i] >= 0;
        if (ids[i] < 0) ids[i] = 0;
    }
    return {std::move(ids), std::move(mask)};
}

int argmax_row(const Tensor& m, int row) {
    int best = 0;
    for (int j = 1; j < m.dim(1); ++j)
        if (m.at(row, j) > m.at(row, best)) best = j;
    return best;
}

}  // namespace

const std::vector<std::string>& Tagger::main_labels_of(const data::Sentence& s) const {
    return cfg_.main_layer == "semtag" ? s.semtags : s.upos;
}

Tagger::Tagger(TaggerConfig cfg, TaggerData data) : cfg_(std::move(cfg)), data_(std::move(data)) {
    if (cfg_.main_layer != "upos" && cfg_.main_layer != "semtag")
        throw ConfigError("tagger main_layer must be 'upos' or 'semtag', got " + cfg_.main_layer);
    if (data_.main_train.empty()) throw ConfigError("tagger needs a non-empty main training split");

    for (const auto& s : data_.main_train) {
        s.validate();
        for (const auto& tok : s.tokens) vocab_.add(tok);
        const auto& labels = main_labels_of(s);
        if (labels.empty())
            throw ConfigError("training sentence '" + s.id + "' lacks the main layer '" +
                              cfg_.main_layer + "'");
        for (const auto& l : labels) main_tags_.add(l);
        if (data_.overlapped)
            for (const auto& st : s.semtags) aux_tags_.add(st);
    }
    for (const auto& s : data_.aux_train) {
        s.validate();
        for (const auto& tok : s.tokens) vocab_.add(tok);
        for (const auto& st : s.semtags) aux_tags_.add(st);
    }
    vocab_.freeze();
    main_tags_.freeze();
    aux_tags_.freeze();

    has_aux_head_ = is_mtl(cfg_.wiring);
    if (has_aux_head_ && aux_tags_.size() == 0)
        throw ConfigError("mtl tagger has no auxiliary tags: provide an aux corpus or overlapped "
                          "semtags");

    Rng rng(cfg_.seed);
    emb_ = nn::EmbeddingTable(store_, "emb", vocab_.size(), cfg_.embed_dim, rng);

    share::TopologySpec spec;
    spec.layer_kind = share::LayerKind::BiLstm;
    spec.input_dim = cfg_.embed_dim;
    int out = 2 * cfg_.hidden_dim;
    switch (cfg_.wiring) {
        case Wiring::ST:
        case Wiring::FSN:
            spec.kind = share::TopologyKind::FSN;
            spec.shared_dims = {out};
            break;
        case Wiring::PSN:
            spec.kind = share::TopologyKind::PSN;
            spec.shared_dims = {out};
            spec.private_dims_main = {out};
            spec.private_dims_aux = {out};
            break;
        case Wiring::LWS:
            spec.kind = share::TopologyKind::LWS;
            spec.lws_dims_main = {out};
            spec.lws_dims_aux = {out};
            spec.lws_split_main = {share::Split{cfg_.subspace_shared, cfg_.subspace_private}};
            spec.lws_split_aux = {share::Split{cfg_.subspace_shared, cfg_.subspace_private}};
            break;
    }
    topo_ = share::SharingTopology::build(store_, spec, rng);

    main_head_ = nn::Dense(store_, "head.main", topo_.out_dim(share::TaskSide::Main),
                           main_tags_.size(), rng);
    if (has_aux_head_)
        aux_head_ = nn::Dense(store_, "head.aux", topo_.out_dim(share::TaskSide::Aux),
                              aux_tags_.size(), rng);
}

Tagger::Logits Tagger::forward(ad::Tape& t, const data::Sentence& s, bool training, Rng& rng) {
    if (s.tokens.empty()) throw ShapeError("tagger forward: empty sentence");
    std::vector<ad::NodeRef> seq;
    seq.reserve(s.tokens.size());
    for (const auto& tok : s.tokens) seq.push_back(emb_.lookup(t, vocab_.id(tok)));

    nn::DropCfg drop{cfg_.dropout, cfg_.recurrent_dropout};
    std::vector<ad::NodeRef> main_states, aux_states;
    if (cfg_.wiring == Wiring::LWS) {
        auto [m, a] = topo_.forward_both(t, seq, drop, training, rng);
        main_states = std::move(m);
        aux_states = std::move(a);
    } else {
        main_states = topo_.forward(t, seq, share::TaskSide::Main, drop, training, rng);
        if (has_aux_head_)
            aux_states = cfg_.wiring == Wiring::FSN
                             ? main_states
                             : topo_.forward(t, seq, share::TaskSide::Aux, drop, training, rng);
    }

    Logits out;
    std::vector<ad::NodeRef> main_rows, aux_rows;
    for (const auto& h : main_states) main_rows.push_back(main_head_.apply(t, h));
    out.main = ad::concat(t, main_rows, 0);
    if (has_aux_head_) {
        for (const auto& h : aux_states) aux_rows.push_back(aux_head_.apply(t, h));
        out.aux = ad::concat(t, aux_rows, 0);
    }
    return out;
}

LossPair Tagger::sentence_loss(ad::Tape& t, const data::Sentence& s, Corpus corpus, bool training,
                               Rng& rng) {
    auto logits = forward(t, s, training, rng);
    LossPair loss;
    if (corpus == Corpus::Main) {
        auto [ids, mask] = ids_and_mask(main_tags_, main_labels_of(s));
        loss.main = ad::softmax_xent(t, logits.main, ids, mask);
        if (data_.overlapped && has_aux_head_ && s.has_semtags()) {
            auto [aids, amask] = ids_and_mask(aux_tags_, s.semtags);
            loss.aux = ad::softmax_xent(t, logits.aux, aids, amask);
        }
    } else {
        if (!has_aux_head_) throw ConfigError("aux batch on a single-task tagger");
        auto [aids, amask] = ids_and_mask(aux_tags_, s.semtags);
        loss.aux = ad::softmax_xent(t, logits.aux, aids, amask);
    }
    return loss;
}

LossPair Tagger::batch_loss(ad::Tape& t, Corpus corpus, const std::vector<int>& indices,
                            bool training, Rng& rng) {
    const auto& split = corpus == Corpus::Main ? data_.main_train : data_.aux_train;
    ad::NodeRef main_sum, aux_sum;
    int main_n = 0, aux_n = 0;
    for (int idx : indices) {
        auto one = sentence_loss(t, split[static_cast<std::size_t>(idx)], corpus, training, rng);
        if (one.main) {
            main_sum = main_sum ? ad::add(t, main_sum, one.main) : one.main;
            ++main_n;
        }
        if (one.aux) {
            aux_sum = aux_sum ? ad::add(t, aux_sum, one.aux) : one.aux;
            ++aux_n;
        }
    }
    LossPair out;
    if (main_sum) out.main = ad::scale(t, main_sum, 1.0 / main_n);
    if (aux_sum) out.aux = ad::scale(t, aux_sum, 1.0 / aux_n);
    return out;
}

int Tagger::train_size(Corpus corpus) const {
    return corpus == Corpus::Main ? static_cast<int>(data_.main_train.size())
                                  : static_cast<int>(data_.aux_train.size());
}

std::vector<std::string> Tagger::predict_main(const data::Sentence& s) {
    ad::Tape t(true, false);
    Rng rng(0);
    auto logits = forward(t, s, false, rng);
    std::vector<std::string> tags;
    for (int i = 0; i < s.size(); ++i) tags.push_back(main_tags_.tag(argmax_row(logits.main->value, i)));
    return tags;
}

std::vector<std::string> Tagger::predict_aux(const data::Sentence& s) {
    if (!has_aux_head_) throw ConfigError("single-task tagger has no aux head");
    ad::Tape t(true, false);
    Rng rng(0);
    auto logits = forward(t, s, false, rng);
    std::vector<std::string> tags;
    for (int i = 0; i < s.size(); ++i) tags.push_back(aux_tags_.tag(argmax_row(logits.aux->value, i)));
    return tags;
}

std::map<std::string, Real> Tagger::evaluate(const std::string& split) {
    const std::vector<data::Sentence>* main_split;
    const std::vector<data::Sentence>* aux_split;
    if (split == "train") {
        main_split = &data_.main_train;
        aux_split = &data_.aux_train;
    } else if (split == "dev") {
        main_split = &data_.main_dev;
        aux_split = &data_.aux_dev;
    } else if (split == "test") {
        main_split = &data_.main_test;
        aux_split = &data_.aux_test;
    } else {
        throw ConfigError("unknown split '" + split + "'");
    }

    std::map<std::string, Real> metrics;
    long correct = 0, total = 0;
    for (const auto& s : *main_split) {
        const auto& gold = main_labels_of(s);
        if (gold.empty()) continue;
        auto pred = predict_main(s);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            ++total;
            if (pred[i] == gold[i]) ++correct;
        }
    }
    if (total > 0) metrics["accuracy"] = static_cast<Real>(correct) / total;

    if (has_aux_head_) {
        long acorrect = 0, atotal = 0;
        auto score = [&](const data::Sentence& s) {
            if (!s.has_semtags()) return;
            auto pred = predict_aux(s);
            for (std::size_t i = 0; i < pred.size(); ++i) {
                ++atotal;
                if (pred[i] == s.semtags[i]) ++acorrect;
            }
        };
        if (data_.overlapped)
            for (const auto& s : *main_split) score(s);
        else
            for (const auto& s : *aux_split) score(s);
        if (atotal > 0) metrics["aux_accuracy"] = static_cast<Real>(acorrect) / atotal;
    }
    return metrics;
}

std::vector<nn::Parameter*> Tagger::aux_exclusive_params() {
    std::vector<nn::Parameter*> out = topo_.task_exclusive_params(share::TaskSide::Aux);
    if (has_aux_head_) {
        auto hp = aux_head_.params();
        out.insert(out.end(), hp.begin(), hp.end());
    }
    return out;
}

share::ParamReport Tagger::report() const {
    auto r = topo_.report();
    r.heads += nn::param_count(main_head_.params());
    if (has_aux_head_) r.heads += nn::param_count(aux_head_.params());
    r.shared += static_cast<long>(emb_.table()->value().numel());  // embeddings serve both tasks
    return r;
}

std::vector<data::Sentence> project_tags(Tagger& tagger, const std::vector<data::Sentence>& corpus) {
    if (tagger.config().main_layer != "semtag")
        throw ConfigError("tag projection needs a tagger whose main task is semantic tagging");
    std::vector<data::Sentence> out;
    out.reserve(corpus.size());
    for (const auto& s : corpus) {
        data::Sentence copy = s;
        copy.semtags = tagger.predict_main(s);
        copy.validate();
        out.push_back(std::move(copy));
    }
    return out;
}

}  // namespace mtl::tasks
