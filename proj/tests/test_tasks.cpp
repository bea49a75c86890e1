#include <doctest.h>

#include <cmath>

#include "mtl/nli.hpp"
#include "mtl/parser.hpp"
#include "mtl/tagger.hpp"
#include "mtl/toygen.hpp"
#include "oracles.hpp"

using namespace mtl;
using tasks::Corpus;
using tasks::NliModel;
using tasks::Parser;
using tasks::Tagger;
using tasks::Wiring;

namespace {

std::vector<int> all_indices(int n) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    return idx;
}

// plain full-batch training loop on the joint loss
void fit(tasks::TrainableModel& model, Real lambda, Real lr, int epochs, std::uint64_t seed) {
    nn::AdamConfig cfg;
    cfg.lr = lr;
    nn::Adam opt(model.params(), cfg);
    Rng rng(seed);
    auto idx = all_indices(model.train_size(Corpus::Main));
    for (int e = 0; e < epochs; ++e) {
        ad::Tape t;
        auto loss = model.batch_loss(t, Corpus::Main, idx, true, rng);
        ad::NodeRef total = loss.main;
        if (loss.aux) {
            auto weighted = ad::scale(t, loss.aux, lambda);
            total = total ? ad::add(t, total, weighted) : weighted;
        }
        opt.zero_grad();
        t.backward(total);
        opt.clip_global_norm(5.0);
        opt.step();
    }
}

tasks::TaggerData split_tagger_data(std::vector<data::Sentence> corpus, bool overlapped) {
    tasks::TaggerData d;
    d.overlapped = overlapped;
    d.main_train = corpus;
    d.main_dev = corpus;
    d.main_test = corpus;
    return d;
}

}  // namespace

TEST_CASE("tagger emits one logit row per token for both heads across wirings") {
    auto corpus = toygen::correlated_corpus(20, 11);
    for (Wiring w : {Wiring::ST, Wiring::FSN, Wiring::PSN, Wiring::LWS}) {
        tasks::TaggerConfig cfg;
        cfg.wiring = w;
        cfg.embed_dim = 8;
        cfg.hidden_dim = 8;
        cfg.subspace_shared = 8;
        cfg.subspace_private = 8;
        Tagger tagger(cfg, split_tagger_data(corpus, true));
        Rng rng(1);
        ad::Tape t;
        auto logits = tagger.forward(t, corpus[0], false, rng);
        CHECK(logits.main->value.dim(0) == corpus[0].size());
        CHECK(logits.main->value.dim(1) == tagger.main_tags().size());
        if (w == Wiring::ST) {
            CHECK(logits.aux == nullptr);
        } else {
            CHECK(logits.aux->value.dim(0) == corpus[0].size());
            CHECK(logits.aux->value.dim(1) == tagger.aux_tags().size());
        }
        CHECK_THROWS_AS(tagger.forward(t, data::Sentence{}, false, rng), ShapeError);
    }
}

TEST_CASE("single-task tagger overfits a 5-sentence corpus to 100% train accuracy") {
    auto corpus = toygen::correlated_corpus(5, 21);
    tasks::TaggerConfig cfg;
    cfg.wiring = Wiring::ST;
    cfg.main_layer = "semtag";
    cfg.embed_dim = 16;
    cfg.hidden_dim = 16;
    cfg.seed = 3;
    Tagger tagger(cfg, split_tagger_data(corpus, false));
    fit(tagger, 0.0, 0.02, 120, 5);
    CHECK(tagger.evaluate("train")["accuracy"] == doctest::Approx(1.0));
}

TEST_CASE("tag projection fills semtags deterministically and reproduces a memorized corpus") {
    auto corpus = toygen::correlated_corpus(5, 31);
    tasks::TaggerConfig cfg;
    cfg.wiring = Wiring::ST;
    cfg.main_layer = "semtag";
    cfg.embed_dim = 16;
    cfg.hidden_dim = 16;
    Tagger tagger(cfg, split_tagger_data(corpus, false));
    fit(tagger, 0.0, 0.02, 120, 7);

    auto bare = toygen::correlated_corpus(5, 31);
    for (auto& s : bare) s.semtags.clear();
    auto projected = tasks::project_tags(tagger, bare);
    REQUIRE(projected.size() == corpus.size());
    for (std::size_t i = 0; i < projected.size(); ++i) {
        CHECK(projected[i].semtags.size() == projected[i].tokens.size());
        CHECK(projected[i].semtags == corpus[i].semtags);  // memorized gold
        CHECK(projected[i].upos == bare[i].upos);          // untouched layers
    }
    auto again = tasks::project_tags(tagger, bare);
    CHECK(again == projected);

    tasks::TaggerConfig upos_cfg;
    upos_cfg.wiring = Wiring::ST;
    upos_cfg.main_layer = "upos";
    Tagger upos_tagger(upos_cfg, split_tagger_data(corpus, false));
    CHECK_THROWS_AS(tasks::project_tags(upos_tagger, bare), ConfigError);
}

TEST_CASE("biaffine arc scorer against the direct-formula oracle") {
    Rng rng(41);
    int n = 3, d = 4;
    Tensor hd({n, d}), hh({n + 1, d}), U({d, d}), u({1, d});
    for (std::size_t i = 0; i < hd.numel(); ++i) hd[i] = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < hh.numel(); ++i) hh[i] = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < U.numel(); ++i) U[i] = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < u.numel(); ++i) u[i] = rng.uniform(-1, 1);

    SUBCASE("zero parameters give zero scores") {
        ad::Tape t;
        auto s = tasks::biaffine_arc_scores(t, t.leaf(hd), t.leaf(hh), t.leaf(Tensor({d, d})),
                                            t.leaf(Tensor({1, d})));
        for (std::size_t i = 0; i < s->value.numel(); ++i) CHECK(s->value[i] == 0.0);
    }

    SUBCASE("identity bilinear reduces to dot products") {
        Tensor eye({d, d});
        for (int i = 0; i < d; ++i) eye.at(i, i) = 1.0;
        ad::Tape t;
        auto s = tasks::biaffine_arc_scores(t, t.leaf(hd), t.leaf(hh), t.leaf(eye),
                                            t.leaf(Tensor({1, d})));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= n; ++j) {
                Real dot = 0;
                for (int k = 0; k < d; ++k) dot += hd.at(i, k) * hh.at(j, k);
                CHECK(s->value.at(i, j) == doctest::Approx(dot).epsilon(1e-12));
            }
    }

    SUBCASE("random instance matches a double loop; gradients pass finite differences") {
        ad::Tape t;
        auto hdn = t.leaf(hd, true);
        auto un = t.leaf(U, true);
        auto s = tasks::biaffine_arc_scores(t, hdn, t.leaf(hh), un, t.leaf(u));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= n; ++j) {
                Real expect = 0;
                for (int p = 0; p < d; ++p) {
                    for (int q = 0; q < d; ++q) expect += hd.at(i, p) * U.at(p, q) * hh.at(j, q);
                    expect += u[static_cast<std::size_t>(p)] * hh.at(j, p);
                }
                CHECK(s->value.at(i, j) == doctest::Approx(expect).epsilon(1e-9));
            }
        auto loss = ad::mean_all(t, s);
        t.backward(loss);
        auto f = [&](const Tensor& uv) {
            ad::Tape tt;
            auto ss = tasks::biaffine_arc_scores(tt, tt.leaf(hd), tt.leaf(hh), tt.leaf(uv),
                                                 tt.leaf(u));
            Real m = 0;
            for (std::size_t i = 0; i < ss->value.numel(); ++i) m += ss->value[i];
            return m / static_cast<Real>(ss->value.numel());
        };
        CHECK(ad::max_rel_error(un->grad, ad::finite_difference_grad(f, U, 1e-5)) < 1e-4);
    }
}

TEST_CASE("parser forward shapes and a valid single-root parse") {
    auto corpus = toygen::parse_corpus(6, 51);
    for (Wiring w : {Wiring::ST, Wiring::FSN, Wiring::PSN, Wiring::LWS}) {
        tasks::ParserConfig cfg;
        cfg.wiring = w;
        cfg.embed_dim = 8;
        cfg.hidden_dim = 8;
        cfg.arc_dim = 8;
        cfg.label_dim = 8;
        cfg.subspace_shared = 8;
        cfg.subspace_private = 8;
        Parser parser(cfg, {corpus, corpus, corpus});
        Rng rng(1);
        ad::Tape t;
        const auto& s = corpus[0];
        auto fwd = parser.forward(t, s, false, rng);
        CHECK(fwd.arc_scores->value.dim(0) == s.size());
        CHECK(fwd.arc_scores->value.dim(1) == s.size() + 1);
        CHECK(fwd.upos_logits->value.dim(0) == s.size());
        auto lbl = fwd.label_logits(0, s.heads[0]);
        CHECK(lbl->value.dim(1) == parser.deprels().size());

        auto tree = parser.parse(s);
        CHECK(tasks::is_arborescence(tree.heads));
        int roots = 0;
        for (int h : tree.heads)
            if (h == 0) ++roots;
        CHECK(roots == 1);
    }
}

TEST_CASE("gradients flow from the arc loss back into the upos head") {
    auto corpus = toygen::parse_corpus(4, 61);
    tasks::ParserConfig cfg;
    cfg.wiring = Wiring::ST;
    cfg.embed_dim = 8;
    cfg.hidden_dim = 8;
    cfg.arc_dim = 8;
    cfg.label_dim = 8;
    Parser parser(cfg, {corpus, corpus, corpus});
    Rng rng(2);
    ad::Tape t;
    const auto& s = corpus[0];
    auto fwd = parser.forward(t, s, false, rng);
    auto arc_loss = ad::softmax_xent(t, fwd.arc_scores, s.heads);
    t.backward(arc_loss);
    auto* upos_w = parser.param_store().find("head.upos.w");
    REQUIRE(upos_w != nullptr);
    REQUIRE(upos_w->has_grad());
    Real norm = 0;
    for (std::size_t i = 0; i < upos_w->grad().numel(); ++i)
        norm += upos_w->grad()[i] * upos_w->grad()[i];
    CHECK(norm > 0.0);
}

TEST_CASE("parser joint loss gradient matches finite differences on sampled parameters") {
    auto corpus = toygen::parse_corpus(2, 71);
    tasks::ParserConfig cfg;
    cfg.wiring = Wiring::LWS;
    cfg.embed_dim = 6;
    cfg.hidden_dim = 6;
    cfg.arc_dim = 6;
    cfg.label_dim = 6;
    cfg.subspace_shared = 6;
    cfg.subspace_private = 6;
    Parser parser(cfg, {corpus, corpus, corpus});
    Rng rng(3);
    // non-trivial gate weights so the gate path carries gradient
    for (auto* name : {"gated1.w_a2m", "gated1.w_m2a", "gated2.w_a2m", "gated2.w_m2a"}) {
        auto* p = parser.param_store().find(name);
        for (std::size_t i = 0; i < p->value().numel(); ++i) p->value()[i] = rng.uniform(-0.5, 0.5);
    }

    auto loss_value = [&]() {
        ad::Tape t;
        Rng r2(9);
        auto loss = parser.batch_loss(t, Corpus::Main, {0, 1}, false, r2);
        auto total = ad::add(t, loss.main, ad::scale(t, loss.aux, 0.5));
        return total->value[0];
    };
    ad::Tape t;
    Rng r2(9);
    auto loss = parser.batch_loss(t, Corpus::Main, {0, 1}, false, r2);
    auto total = ad::add(t, loss.main, ad::scale(t, loss.aux, 0.5));
    t.backward(total);

    Rng pick(13);
    for (auto* name : {"emb", "gated1.main.fwd.w_x", "gated2.aux.bwd.w_h", "layer4.fwd.w_x",
                       "arc.u", "label.u0", "head.semtag.w", "head.upos.w", "root_repr"}) {
        auto* p = parser.param_store().find(name);
        REQUIRE(p != nullptr);
        Tensor ad_grad = p->has_grad() ? p->grad() : Tensor(p->value().shape());
        for (int probe = 0; probe < 3; ++probe) {
            std::size_t i = static_cast<std::size_t>(pick.below(p->value().numel()));
            Real orig = p->value()[i];
            // near-zero gradients drown in the fp64 noise of fd at small
            // epsilon, so accept the best agreement across an epsilon ladder
            Real best = 1e9;
            for (Real eps : {1e-5, 1e-4, 1e-3}) {
                p->value()[i] = orig + eps;
                Real up = loss_value();
                p->value()[i] = orig - eps;
                Real down = loss_value();
                p->value()[i] = orig;
                Real fd = (up - down) / (2 * eps);
                Real denom = std::max({std::fabs(fd), std::fabs(ad_grad[i]), 1e-8});
                best = std::min(best, std::fabs(fd - ad_grad[i]) / denom);
            }
            CHECK(best < 1e-4);
        }
    }
}

TEST_CASE("nli forward: symmetric attention, normalized alignment, 3-way logits") {
    auto pairs = toygen::nli_pairs();
    tasks::NliConfig cfg;
    cfg.wiring = Wiring::FSN;
    cfg.embed_dim = 8;
    cfg.hidden_dim = 8;
    NliModel model(cfg, {pairs, pairs, pairs, toygen::semtag_only(toygen::correlated_corpus(4, 3))});
    Rng rng(1);

    ad::Tape t;
    auto fwd = model.forward(t, pairs[0].premise, pairs[0].premise, false, rng);
    const Tensor& e = fwd.attention->value;
    REQUIRE(e.dim(0) == e.dim(1));
    for (int i = 0; i < e.dim(0); ++i)
        for (int j = 0; j < e.dim(1); ++j)
            CHECK(e.at(i, j) == doctest::Approx(e.at(j, i)).epsilon(1e-12));

    auto sm = ad::softmax(t, fwd.attention, 1);
    for (int i = 0; i < sm->value.dim(0); ++i) {
        Real row_sum = 0;
        for (int j = 0; j < sm->value.dim(1); ++j) row_sum += sm->value.at(i, j);
        CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-6));
    }

    CHECK(fwd.entail_logits->value.shape() == std::vector<int>{1, 3});
    CHECK(fwd.semtag_premise->value.dim(0) == pairs[0].premise.size());
    CHECK_THROWS_AS(model.forward(t, data::Sentence{}, pairs[0].hypothesis, false, rng),
                    ShapeError);
}

TEST_CASE("nli pretraining reduces the semtag loss and honors the skip flag") {
    auto pairs = toygen::nli_pairs();
    auto pretrain = toygen::semtag_only(toygen::correlated_corpus(20, 77));
    tasks::NliConfig cfg;
    cfg.wiring = Wiring::PSN;
    cfg.embed_dim = 12;
    cfg.hidden_dim = 12;
    cfg.seed = 5;

    NliModel model(cfg, {pairs, pairs, pairs, pretrain});
    Rng rng(1);
    Real initial = model.semtag_corpus_loss();
    model.pretrain_aux_encoder(25, 0.01, 8, rng);
    Real after = model.semtag_corpus_loss();
    CHECK(after < initial);

    // the same wiring without a pretrain corpus refuses to pretrain
    NliModel no_corpus(cfg, {pairs, pairs, pairs, {}});
    Rng rng2(1);
    CHECK_THROWS_AS(no_corpus.pretrain_aux_encoder(1, 0.01, 8, rng2), ConfigError);

    tasks::NliConfig st_cfg = cfg;
    st_cfg.wiring = Wiring::ST;
    NliModel st_model(st_cfg, {pairs, pairs, pairs, pretrain});
    CHECK_THROWS_AS(st_model.pretrain_aux_encoder(1, 0.01, 8, rng2), ConfigError);
}

TEST_CASE("nli batch loss carries both losses per wiring") {
    auto pairs = toygen::nli_pairs();
    auto pretrain = toygen::semtag_only(toygen::correlated_corpus(4, 3));
    for (Wiring w : {Wiring::ST, Wiring::FSN, Wiring::PSN, Wiring::LWS}) {
        tasks::NliConfig cfg;
        cfg.wiring = w;
        cfg.embed_dim = 8;
        cfg.hidden_dim = 8;
        cfg.subspace_shared = 8;
        cfg.subspace_private = 8;
        NliModel model(cfg, {pairs, pairs, pairs, pretrain});
        Rng rng(1);
        ad::Tape t;
        auto loss = model.batch_loss(t, Corpus::Main, {0, 1, 2}, true, rng);
        CHECK(loss.main != nullptr);
        if (w == Wiring::ST)
            CHECK(loss.aux == nullptr);
        else
            CHECK(loss.aux != nullptr);
    }
}
