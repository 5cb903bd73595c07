#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ae/neuralnet.hpp"

namespace ae::nn {

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 16;
    int epochs = 30;
    int patience = 5;             // epochs without validation improvement
    double val_fraction = 0.2;    // share of utterances held out for validation
    std::uint64_t seed = 0;

    void validate() const;
};

class Adam {
public:
    Adam(const TrainConfig& config, const ModelWeights& weights);
    void step(ModelWeights& weights, const ParamMap& grads);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    ParamMap m_, v_;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    ModelWeights weights;  // best validation loss
    std::vector<EpochStats> history;
    int best_epoch = 0;
};

// Windows every utterance and encodes the sequences for the network.
std::vector<LabeledInput> encode_utterances(std::span<const Utterance> utterances, const ModelConfig& config);

struct UtteranceSplit {
    std::vector<Utterance> train;
    std::vector<Utterance> validation;
};
// Deterministic utterance-level split; keeps at least one training utterance.
UtteranceSplit split_utterances(std::span<const Utterance> utterances, double val_fraction, std::uint64_t seed);

// Mini-batch Adam on mean NLL. Deterministic given the seed: weights are
// initialized from the seed and each epoch shuffles with its own sub-seed.
// An empty validation set falls back to selecting on training loss.
TrainResult train(std::span<const LabeledInput> train_set, std::span<const LabeledInput> val_set,
                  const ModelConfig& model_config, const TrainConfig& train_config);

struct SetMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
};
SetMetrics evaluate_set(const Network& net, std::span<const LabeledInput> data);

}  // namespace ae::nn
