#pragma once

#include "mtl/data.hpp"
#include "mtl/task.hpp"

namespace mtl::tasks {

struct NliConfig {
    Wiring wiring = Wiring::ST;
    int embed_dim = 32;
    int hidden_dim = 32;
    int subspace_shared = 32;   // LWS split of the encoding layer
    int subspace_private = 32;
    Real dropout = 0.0;
    Real recurrent_dropout = 0.0;
    std::uint64_t seed = 1;
};

struct NliData {
    std::vector<data::NliInstance> train, dev, test;
    // sem-PMB-style corpus for pretraining the semtag path
    std::vector<data::Sentence> pretrain;
};

// Enhanced sequential inference: encode both sentences, soft-align with
// dot-product attention, enhance with differences and products, compose
// with a second bi-LSTM, pool, classify 3 ways. The semtag head placement
// follows the sharing setting: FSN reads the encoder states, PSN inserts an
// earlier bi-LSTM that feeds the encoder, LWS splits the encoding layer.
class NliModel : public TrainableModel {
public:
    NliModel(NliConfig cfg, NliData data);

    std::vector<nn::Parameter*> params() override { return store_.all(); }
    std::vector<nn::Parameter*> aux_exclusive_params() override;
    LossPair batch_loss(ad::Tape& t, Corpus corpus, const std::vector<int>& indices, bool training,
                        Rng& rng) override;
    int train_size(Corpus corpus) const override;
    std::map<std::string, Real> evaluate(const std::string& split) override;
    share::ParamReport report() const override;

    struct Forward {
        ad::NodeRef entail_logits;      // [1 x 3]
        ad::NodeRef semtag_premise;     // [n x K], null for ST
        ad::NodeRef semtag_hypothesis;  // [m x K], null for ST
        ad::NodeRef attention;          // [n x m] premise-to-hypothesis scores
    };
    Forward forward(ad::Tape& t, const data::Sentence& premise, const data::Sentence& hypothesis,
                    bool training, Rng& rng);

    int predict(const data::NliInstance& inst);  // index into data::kNliLabels
    std::vector<std::string> predict_semtags(const data::Sentence& s);

    // Trains the semtag path on the pretrain corpus and returns the final
    // epoch's mean loss; parameters are updated in place.
    Real pretrain_aux_encoder(int epochs, Real lr, int batch_size, Rng& rng);

    // Mean semtag loss over the pretrain corpus with the current parameters.
    Real semtag_corpus_loss();

    const NliConfig& config() const { return cfg_; }
    nn::ParamStore& param_store() { return store_; }
    const NliData& data() const { return data_; }
    const data::TagVocab& semtag_tags() const { return semtag_tags_; }

private:
    // encoder states for one sentence: the ESIM encoding sequence plus the
    // sequence the semtag head reads
    struct EncodedSeq {
        std::vector<ad::NodeRef> enc;
        std::vector<ad::NodeRef> semtag;
    };
    EncodedSeq encode(ad::Tape& t, const data::Sentence& s, bool training, Rng& rng);
    ad::NodeRef semtag_loss_for(ad::Tape& t, const data::Sentence& s, const ad::NodeRef& logits);
    ad::NodeRef semtag_logits_for(ad::Tape& t, const EncodedSeq& enc);

    NliConfig cfg_;
    NliData data_;
    data::Vocabulary vocab_;
    data::TagVocab semtag_tags_;
    nn::ParamStore store_;
    nn::EmbeddingTable emb_;

    share::SeqLayer encoder_;         // ST/FSN/PSN encoding layer
    share::SeqLayer aux_encoder_;     // PSN's earlier semtag bi-LSTM
    share::GatedLayerPair gated_;     // LWS encoding layer pair
    nn::Dense semtag_head_;
    nn::Dense enhance_proj_;          // [8H -> H], relu
    share::SeqLayer composer_;        // composition bi-LSTM
    nn::Dense mlp_hidden_, mlp_out_;  // pooled [8H] -> tanh[H] -> 3
    bool has_aux_head_ = false;
};

}  // namespace mtl::tasks
