#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtl/nn.hpp"
#include "mtl/sharing.hpp"

namespace mtl::tasks {

// Single-task plus the three sharing settings.
enum class Wiring { ST, FSN, PSN, LWS };

Wiring wiring_from_string(const std::string& s);
std::string to_string(Wiring w);

inline bool is_mtl(Wiring w) { return w != Wiring::ST; }

// Which training corpus a batch was drawn from. In the overlapped regime
// everything is Main and each batch carries both losses.
enum class Corpus { Main, Aux };

struct LossPair {
    ad::NodeRef main;  // null when the batch carries no main supervision
    ad::NodeRef aux;   // null without an aux head or aux labels
};

// What the trainer drives. Models own their data splits and vocabularies.
class TrainableModel {
public:
    virtual ~TrainableModel() = default;

    virtual std::vector<nn::Parameter*> params() = 0;
    // Parameters that only the auxiliary task's output can reach.
    virtual std::vector<nn::Parameter*> aux_exclusive_params() = 0;

    // One-time setup before epoch 1 (e.g. aux-encoder pretraining).
    virtual void prepare(Rng& rng) { (void)rng; }

    // Mean loss over the given train-split instances of `corpus`.
    virtual LossPair batch_loss(ad::Tape& t, Corpus corpus, const std::vector<int>& indices,
                                bool training, Rng& rng) = 0;

    virtual int train_size(Corpus corpus) const = 0;

    // split: "train" | "dev" | "test"
    virtual std::map<std::string, Real> evaluate(const std::string& split) = 0;

    virtual share::ParamReport report() const = 0;
};

}  // namespace mtl::tasks
