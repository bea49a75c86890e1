#pragma once

#include "mtl/data.hpp"
#include "mtl/mst.hpp"
#include "mtl/task.hpp"

namespace mtl::tasks {

struct ParserConfig {
    Wiring wiring = Wiring::ST;
    int embed_dim = 32;
    int hidden_dim = 32;      // per bi-LSTM layer; outputs are 2*hidden
    int arc_dim = 32;         // arc projection width
    int label_dim = 32;       // label projection width
    int subspace_shared = 32;  // LWS split of layers 1-2
    int subspace_private = 32;
    Real dropout = 0.0;
    Real recurrent_dropout = 0.0;
    std::uint64_t seed = 1;
};

struct ParserData {
    // overlapped regime: sentences carry heads/deprels/upos, plus semtags for
    // the MTL wirings (via tag projection)
    std::vector<data::Sentence> train, dev, test;
};

// score(i, j) = H_dep[i]^T U H_head[j] + u^T H_head[j]
// H_dep: [n x d], H_head: [(n+1) x d] with ROOT first, U: [d x d], u: [1 x d]
ad::NodeRef biaffine_arc_scores(ad::Tape& t, const ad::NodeRef& h_dep, const ad::NodeRef& h_head,
                                const ad::NodeRef& u_mat, const ad::NodeRef& u_vec);

// Biaffine arc/label parser over a 4-layer stacked bi-LSTM that jointly
// predicts UPOS after layer 1 and feeds the prediction back into layer 2.
// The semtag head placement follows the sharing setting: FSN reads layer 4,
// PSN reads layer 2, LWS splits layers 1-2 with gating.
class Parser : public TrainableModel {
public:
    Parser(ParserConfig cfg, ParserData data);

    std::vector<nn::Parameter*> params() override { return store_.all(); }
    std::vector<nn::Parameter*> aux_exclusive_params() override;
    LossPair batch_loss(ad::Tape& t, Corpus corpus, const std::vector<int>& indices, bool training,
                        Rng& rng) override;
    int train_size(Corpus corpus) const override;
    std::map<std::string, Real> evaluate(const std::string& split) override;
    share::ParamReport report() const override;

    struct Forward {
        ad::NodeRef upos_logits;    // [n x K_upos]
        ad::NodeRef semtag_logits;  // [n x K_sem], null for ST
        ad::NodeRef arc_scores;     // [n x (n+1)], column 0 is ROOT
        // label logits for dependent i attached to head j (0 = ROOT)
        std::function<ad::NodeRef(int dep, int head)> label_logits;
    };
    Forward forward(ad::Tape& t, const data::Sentence& s, bool training, Rng& rng);

    // single-root MST decode + conditioned label argmax
    DependencyTree parse(const data::Sentence& s);
    std::vector<std::string> predict_upos(const data::Sentence& s);

    const data::TagVocab& deprels() const { return deprel_tags_; }
    const data::TagVocab& upos_tags() const { return upos_tags_; }
    const ParserConfig& config() const { return cfg_; }
    nn::ParamStore& param_store() { return store_; }
    const ParserData& data() const { return data_; }

private:
    struct Encoded {
        std::vector<ad::NodeRef> top;     // layer-4 states
        std::vector<ad::NodeRef> semtag;  // states under the semtag head
        ad::NodeRef upos_logits;
    };
    Encoded encode(ad::Tape& t, const data::Sentence& s, bool training, Rng& rng);

    ParserConfig cfg_;
    ParserData data_;
    data::Vocabulary vocab_;
    data::TagVocab upos_tags_, deprel_tags_, semtag_tags_;
    nn::ParamStore store_;
    nn::EmbeddingTable emb_;

    // ST/FSN/PSN: four plain layers; LWS: layers 1-2 are gated pairs
    share::SeqLayer layer1_, layer2_, layer3_, layer4_;
    share::GatedLayerPair gated1_, gated2_;

    nn::Dense upos_head_, semtag_head_;
    nn::Dense proj_arc_dep_, proj_arc_head_, proj_lbl_dep_, proj_lbl_head_;
    nn::Parameter* root_repr_ = nullptr;  // layer-4-level ROOT representation
    nn::Parameter* arc_u_ = nullptr;      // [arc_dim x arc_dim]
    nn::Parameter* arc_bias_ = nullptr;   // [1 x arc_dim]
    std::vector<nn::Parameter*> label_u_;  // one [label_dim x label_dim] per relation
    nn::Dense label_affine_;               // [2*label_dim -> L]
    bool has_aux_head_ = false;
};

}  // namespace mtl::tasks
