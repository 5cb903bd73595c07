#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ae/core.hpp"
#include "ae/neuralnet.hpp"
#include "ae/train.hpp"

namespace ae::eval {

enum class Granularity { Sequence, Utterance, FirstSequence };
inline constexpr std::array<Granularity, 3> kAllGranularities = {
    Granularity::Sequence, Granularity::Utterance, Granularity::FirstSequence};
std::string_view granularity_name(Granularity g);

// How sequence estimates of one utterance are combined.
//   Mean: equal-weight mean of probability vectors.
//   ConfidenceWeighted: each vector weighted by its own max probability.
enum class Aggregation { Mean, ConfidenceWeighted };
std::string_view aggregation_name(Aggregation a);
Aggregation aggregation_from_name(std::string_view name);

using ConfusionMatrix = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>;  // [true][predicted]
using LabelPair = std::pair<AddresseeClass, AddresseeClass>;                             // (true, predicted)

// Permutation-invariant: vectors are summed in a canonical order. The emitted
// time is the latest input's.
Estimate aggregate_utterance(std::span<const Estimate> estimates, Aggregation mode = Aggregation::Mean);

ConfusionMatrix confusion_matrix(std::span<const LabelPair> pairs);

struct F1Scores {
    ClassVector per_class{};
    double macro = 0.0;
    double weighted = 0.0;
};

// Precision/recall with an empty column/row count as 0; F1 is 0 when
// P + R == 0. Throws InvalidInput on an all-zero matrix.
F1Scores f1_scores(const ConfusionMatrix& m);

struct EvalReport {
    Granularity granularity = Granularity::Sequence;
    Aggregation aggregation = Aggregation::Mean;
    ConfusionMatrix confusion{};
    std::array<std::int64_t, kNumClasses> support{};
    std::int64_t total = 0;
    ClassVector per_class_f1{};
    double weighted_f1 = 0.0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
};

EvalReport make_report(Granularity g, Aggregation a, std::span<const LabelPair> pairs);

struct SequenceRecord {
    std::string utterance_id;
    int index = 0;
    bool padded = false;
    AddresseeClass label = AddresseeClass::Robot;
    Estimate estimate;
};

struct UtteranceRecord {
    std::string utterance_id;
    AddresseeClass label = AddresseeClass::Robot;
    Estimate aggregate;
    int n_sequences = 0;
};

struct Evaluation {
    std::array<EvalReport, 3> reports;  // indexed by Granularity
    std::vector<SequenceRecord> sequences;
    std::vector<UtteranceRecord> utterances;

    const EvalReport& report(Granularity g) const { return reports[static_cast<std::size_t>(g)]; }
};

// Classifies every sequence once and derives all three reports from the same
// forward passes.
Evaluation evaluate(const nn::Network& net, std::span<const Utterance> utterances,
                    Aggregation mode = Aggregation::Mean);

struct FoldSplit {
    int fold = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};

// Utterance-level k-fold partition. Fold sizes differ by at most one.
std::vector<FoldSplit> kfold(std::span<const Utterance> utterances, int k, std::uint64_t seed);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;  // sample SD (n - 1); 0 for a single value
};
MeanSd mean_sd(std::span<const double> values);

struct MetricSummary {
    MeanSd weighted_f1;
    MeanSd macro_f1;
    MeanSd accuracy;
    std::array<MeanSd, kNumClasses> per_class_f1;
};

struct FoldResult {
    FoldSplit split;
    std::array<EvalReport, 3> reports;
    int best_epoch = 0;
};

struct CrossValResult {
    int k = 0;
    std::vector<FoldResult> folds;
    std::array<MetricSummary, 3> summary;  // indexed by Granularity
};

MetricSummary summarize(std::span<const FoldResult> folds, Granularity g);

// For each fold: train on the other folds (with an internal validation split)
// and evaluate on the held-out fold.
CrossValResult crossval(std::span<const Utterance> utterances, int k, std::uint64_t seed,
                        const nn::ModelConfig& model_config, const nn::TrainConfig& train_config,
                        Aggregation mode = Aggregation::Mean);

}  // namespace ae::eval
