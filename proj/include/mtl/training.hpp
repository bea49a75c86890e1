#pragma once

#include <functional>
#include <iosfwd>
#include <memory>

#include "mtl/task.hpp"

namespace mtl::train {

struct RunConfig {
    std::string task = "upos";     // upos | dep | nli
    std::string topology = "st";   // st | fsn | psn | lws
    std::string data_regime = "disjoint";  // disjoint | overlapped

    Real lambda = 0.1;
    Real lr = 1e-4;
    int batch_size = 128;
    int epochs = 20;
    Real dropout = 0.3;
    Real recurrent_dropout = 0.3;
    Real grad_clip = 5.0;  // 0 disables clipping
    std::uint64_t seed = 1;
    int runs = 5;

    int embed_dim = 64;
    int hidden_dim = 64;
    int arc_dim = 64;
    int label_dim = 64;
    int subspace_shared = 64;
    int subspace_private = 64;

    Real adam_beta1 = 0.9;
    Real adam_beta2 = 0.999;
    Real adam_eps = 1e-8;

    bool pretrain = true;  // nli only
    int pretrain_epochs = 5;
    Real pretrain_lr = 1e-3;

    std::string main_train, main_dev, main_test;
    std::string aux_train, aux_dev, aux_test;
    std::string tagset;

    void validate() const;
};

// Appendix-style defaults shipped as named presets: upos, dep, snli, sicke.
RunConfig preset_defaults(const std::string& name);

struct RunResult {
    std::vector<Real> train_loss;                       // one entry per epoch
    std::vector<std::map<std::string, Real>> dev;       // per-epoch dev metrics
    std::map<std::string, Real> test;
    long long steps = 0;
    Real wall_seconds = 0.0;
    std::uint64_t seed = 0;
};

// main + lambda * aux; either side may be null (masked batches).
ad::NodeRef joint_loss(ad::Tape& t, const ad::NodeRef& main, const ad::NodeRef& aux, Real lambda);

class Trainer {
public:
    explicit Trainer(RunConfig cfg);

    // Per-epoch CSV rows `epoch,split,metric,value` go to `metrics_csv` when
    // given. Aborts with a diagnostic naming the step and op if the loss
    // goes non-finite.
    RunResult train(tasks::TrainableModel& model, std::ostream* metrics_csv = nullptr);

private:
    RunConfig cfg_;
};

using ModelFactory =
    std::function<std::unique_ptr<tasks::TrainableModel>(const RunConfig& cfg)>;

// Same architecture, lambda forced to zero.
RunConfig ablated(RunConfig cfg);
RunResult ablate_aux(const RunConfig& cfg, const ModelFactory& factory,
                     std::ostream* metrics_csv = nullptr);

struct Aggregate {
    std::vector<RunResult> runs;
    std::map<std::string, Real> mean;
    std::map<std::string, Real> stdev;
};

// Runs with seeds base_seed + 0 .. n-1 and aggregates final test metrics.
Aggregate multi_run(const RunConfig& cfg, const ModelFactory& factory, int n_runs);

// Loads the data named in the config and builds the task model.
std::unique_ptr<tasks::TrainableModel> build_model(const RunConfig& cfg);

}  // namespace mtl::train
