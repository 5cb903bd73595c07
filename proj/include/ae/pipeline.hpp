#pragma once

// Staged streaming deployment of the classifier:
//   Source -> SpeakerGate -> Sequencer -> Classifier -> Aggregator -> Sink
// An operator (or a replayed script) marks utterance boundaries with control
// events; the gate admits frames only inside an open utterance.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ae/bounded_queue.hpp"
#include "ae/core.hpp"
#include "ae/eval.hpp"
#include "ae/neuralnet.hpp"
#include "json.hpp"

namespace ae::pipeline {

struct ControlEvent {
    enum class Kind { UtteranceStart, UtteranceEnd };
    Kind kind = Kind::UtteranceStart;
    std::string utterance_id;
    std::string speaker_id;                    // start only
    std::optional<AddresseeClass> true_label;  // start only, when known
    std::int64_t t_ms = 0;
};

// One scheduled source emission, `t_ms` after run start.
struct SourceItem {
    std::int64_t t_ms = 0;
    std::variant<ControlEvent, Frame> payload;
};

// START, then frame i at START + 80*(i+1) (the moment it has been captured),
// then END together with the last frame. Utterances follow each other in
// dataset order separated by `gap_ms`.
std::vector<SourceItem> replay_source(std::span<const Utterance> utterances, std::int64_t gap_ms = 0);

enum class Mode { Realtime, AsFastAsPossible };
enum class Execution { Threaded, SingleThreaded };

std::string_view mode_name(Mode m);

struct PipelineConfig {
    Mode mode = Mode::AsFastAsPossible;
    int frame_period_ms = kFramePeriodMs;
    std::size_t queue_capacity = 32;
    DropPolicy drop_policy = DropPolicy::Block;
    Execution execution = Execution::Threaded;
    eval::Aggregation aggregation = eval::Aggregation::Mean;

    // Drop-oldest under backpressure for live runs.
    static PipelineConfig realtime();
    void validate() const;
};

struct TimedEstimate {
    Estimate estimate;
    std::string utterance_id;
    int sequence_index = 0;
    bool padded = false;
    std::int64_t latency_ms = 0;  // emission - utterance START
};

struct AggregatedEstimate {
    std::string utterance_id;
    std::optional<AddresseeClass> true_label;
    Estimate estimate;
    int n_sequences = 0;
    std::int64_t latency_ms = 0;
};

struct LatencyStats {
    std::size_t count = 0;
    double min = 0.0;
    double p50 = 0.0;
    double p95 = 0.0;
    double max = 0.0;
    double mean = 0.0;
};
// Nearest-rank percentiles.
LatencyStats latency_stats(std::vector<double> samples);

struct RunSummary {
    Mode mode = Mode::AsFastAsPossible;
    std::size_t source_frames = 0;
    std::size_t admitted_frames = 0;  // reached the sequencer
    std::size_t gated_frames = 0;     // outside any selected utterance
    std::size_t dropped_frames = 0;   // evicted under backpressure
    std::size_t utterances = 0;
    std::size_t estimates = 0;
    std::size_t aggregates = 0;
    std::size_t queue_capacity = 0;
    std::size_t max_queue_depth = 0;
    LatencyStats first_estimate_latency_ms;
    LatencyStats estimate_latency_ms;
    double wall_ms = 0.0;
};

nlohmann::json summary_json(const RunSummary& s);

struct RunResult {
    std::vector<TimedEstimate> estimates;
    std::vector<AggregatedEstimate> aggregates;
    std::vector<std::string> event_log;  // JSON lines, non-decreasing t_ms
    RunSummary summary;
};

// Errors: Protocol for control violations; classifier failures are rethrown
// with the utterance id in the message.
RunResult run_pipeline(std::span<const SourceItem> source, const nn::Network& net, const PipelineConfig& config);

struct PredictionDiff {
    std::string utterance_id;
    int sequence_index = -1;  // -1 for the aggregate
    std::optional<ClassVector> batch_logp;
    std::optional<ClassVector> stream_logp;
};

struct EquivalenceReport {
    std::size_t sequences_compared = 0;
    std::size_t utterances_compared = 0;
    std::vector<PredictionDiff> diffs;

    bool equivalent() const { return diffs.empty(); }
    nlohmann::json to_json() const;
};

// Runs batch evaluation and the as-fast-as-possible pipeline over the same
// utterances and compares every sequence and aggregate bit for bit.
EquivalenceReport equivalence_check(std::span<const Utterance> utterances, const nn::Network& net,
                                    Execution execution = Execution::Threaded,
                                    eval::Aggregation aggregation = eval::Aggregation::Mean);

}  // namespace ae::pipeline
