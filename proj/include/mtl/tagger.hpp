#pragma once

#include "mtl/data.hpp"
#include "mtl/task.hpp"

namespace mtl::tasks {

struct TaggerConfig {
    Wiring wiring = Wiring::ST;
    // which Sentence layer carries the main task's labels
    std::string main_layer = "upos";  // "upos" | "semtag"
    int embed_dim = 32;
    int hidden_dim = 32;
    int subspace_shared = 32;   // LWS split of the 2*hidden layer output
    int subspace_private = 32;
    Real dropout = 0.0;
    Real recurrent_dropout = 0.0;
    std::uint64_t seed = 1;
};

struct TaggerData {
    std::vector<data::Sentence> main_train, main_dev, main_test;
    // disjoint regime only: the aux (semtag) corpus
    std::vector<data::Sentence> aux_train, aux_dev, aux_test;
    bool overlapped = false;  // true: main sentences also carry semtags
};

// One bi-LSTM token classifier with an optional semtag auxiliary head,
// wired per the sharing setting.
class Tagger : public TrainableModel {
public:
    Tagger(TaggerConfig cfg, TaggerData data);

    std::vector<nn::Parameter*> params() override { return store_.all(); }
    std::vector<nn::Parameter*> aux_exclusive_params() override;
    LossPair batch_loss(ad::Tape& t, Corpus corpus, const std::vector<int>& indices, bool training,
                        Rng& rng) override;
    int train_size(Corpus corpus) const override;
    std::map<std::string, Real> evaluate(const std::string& split) override;
    share::ParamReport report() const override;

    struct Logits {
        ad::NodeRef main;  // [n x K_main]
        ad::NodeRef aux;   // [n x K_aux], null for ST
    };
    Logits forward(ad::Tape& t, const data::Sentence& s, bool training, Rng& rng);

    std::vector<std::string> predict_main(const data::Sentence& s);
    std::vector<std::string> predict_aux(const data::Sentence& s);

    const data::Vocabulary& vocab() const { return vocab_; }
    const data::TagVocab& main_tags() const { return main_tags_; }
    const data::TagVocab& aux_tags() const { return aux_tags_; }
    const TaggerConfig& config() const { return cfg_; }
    nn::ParamStore& param_store() { return store_; }
    const TaggerData& data() const { return data_; }

private:
    const std::vector<std::string>& main_labels_of(const data::Sentence& s) const;
    LossPair sentence_loss(ad::Tape& t, const data::Sentence& s, Corpus corpus, bool training,
                           Rng& rng);

    TaggerConfig cfg_;
    TaggerData data_;
    data::Vocabulary vocab_;
    data::TagVocab main_tags_, aux_tags_;
    nn::ParamStore store_;
    nn::EmbeddingTable emb_;
    share::SharingTopology topo_;
    nn::Dense main_head_, aux_head_;
    bool has_aux_head_ = false;
};

// Fills the semtags layer of every sentence from the tagger's argmax
// predictions; all other layers are untouched. The tagger's main task must
// be semantic tagging.
std::vector<data::Sentence> project_tags(Tagger& tagger, const std::vector<data::Sentence>& corpus);

}  // namespace mtl::tasks
