#include "ae/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include "ae/sequencer.hpp"

namespace ae::pipeline {

using nlohmann::json;

namespace {

struct FrameMsg {
    Frame frame;
    std::int64_t t_ms = 0;
};

struct SequenceMsg {
    Sequence seq;
    std::int64_t t_ms = 0;  // when the window completed
};

struct Shutdown {};

using Message = std::variant<ControlEvent, FrameMsg, SequenceMsg, TimedEstimate, AggregatedEstimate, Shutdown>;
using Queue = BoundedQueue<Message>;

bool is_frame(const Message& m) { return std::holds_alternative<FrameMsg>(m); }

class RunClock {
public:
    explicit RunClock(Mode mode) : mode_(mode), start_(std::chrono::steady_clock::now()) {}

    bool realtime() const { return mode_ == Mode::Realtime; }

    std::int64_t now_ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
    }
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }
    void sleep_until(std::int64_t t_ms) const {
        std::this_thread::sleep_until(start_ + std::chrono::milliseconds(t_ms));
    }
    // Simulated runs stamp events with their scheduled time.
    std::int64_t stamp(std::int64_t simulated) const { return realtime() ? now_ms() : simulated; }

private:
    Mode mode_;
    std::chrono::steady_clock::time_point start_;
};

struct Counters {
    std::atomic<std::size_t> source_frames{0};
    std::atomic<std::size_t> admitted{0};
    std::atomic<std::size_t> gated{0};
    std::atomic<std::size_t> dropped{0};
};

// Output side of a stage.
class Outlet {
public:
    Outlet(Queue& queue, DropPolicy policy, Counters& counters)
        : queue_(queue), policy_(policy), counters_(counters) {}

    // Single-threaded runs have no consumer thread, so a full queue is
    // drained synchronously instead of blocking.
    void set_relief(std::function<void()> relieve) { relieve_ = std::move(relieve); }

    void emit(Message m) {
        if (relieve_ && queue_.full()) relieve_();
        counters_.dropped += queue_.push(std::move(m), policy_, is_frame);
    }

private:
    Queue& queue_;
    std::function<void()> relieve_;
    DropPolicy policy_;
    Counters& counters_;
};

[[noreturn]] void unexpected(const char* stage) {
    fail(ErrorKind::Protocol, std::string("unexpected message kind reaching ") + stage);
}

class SpeakerGate {
public:
    SpeakerGate(Outlet& out, Counters& counters) : out_(out), counters_(counters) {}

    void handle(Message m) {
        if (auto* ev = std::get_if<ControlEvent>(&m)) {
            if (ev->kind == ControlEvent::Kind::UtteranceStart) {
                if (open_) {
                    fail(ErrorKind::Protocol, "START for '" + ev->utterance_id + "' while '" + *open_ + "' is open");
                }
                open_ = ev->utterance_id;
            } else {
                if (!open_) fail(ErrorKind::Protocol, "END for '" + ev->utterance_id + "' without START");
                if (*open_ != ev->utterance_id) {
                    fail(ErrorKind::Protocol, "END for '" + ev->utterance_id + "' but '" + *open_ + "' is open");
                }
                open_.reset();
            }
            out_.emit(std::move(m));
        } else if (auto* f = std::get_if<FrameMsg>(&m)) {
            if (open_ && f->frame.utterance_id == *open_) {
                out_.emit(std::move(m));
            } else {
                ++counters_.gated;
            }
        } else {
            unexpected("speaker gate");
        }
    }

private:
    Outlet& out_;
    Counters& counters_;
    std::optional<std::string> open_;
};

class SequencerStage {
public:
    SequencerStage(Outlet& out, Counters& counters) : out_(out), counters_(counters) {}

    void handle(Message m) {
        if (auto* ev = std::get_if<ControlEvent>(&m)) {
            if (ev->kind == ControlEvent::Kind::UtteranceStart) {
                sequencer_.begin(ev->utterance_id);
            } else if (auto seq = sequencer_.flush()) {
                out_.emit(SequenceMsg{std::move(*seq), ev->t_ms});
            }
            out_.emit(std::move(m));
        } else if (auto* f = std::get_if<FrameMsg>(&m)) {
            ++counters_.admitted;
            if (auto seq = sequencer_.push_frame(f->frame)) out_.emit(SequenceMsg{std::move(*seq), f->t_ms});
        } else {
            unexpected("sequencer");
        }
    }

private:
    Outlet& out_;
    Counters& counters_;
    StreamSequencer sequencer_;
};

class ClassifierStage {
public:
    ClassifierStage(Outlet& out, const nn::Network& net, const RunClock& clock) : out_(out), net_(net), clock_(clock) {}

    void handle(Message m) {
        if (auto* ev = std::get_if<ControlEvent>(&m)) {
            if (ev->kind == ControlEvent::Kind::UtteranceStart) start_ms_ = ev->t_ms;
            out_.emit(std::move(m));
        } else if (auto* s = std::get_if<SequenceMsg>(&m)) {
            ClassVector logp;
            try {
                logp = nn::forward_sequence(net_, s->seq);
            } catch (const Error& e) {
                fail(e.kind(), "utterance " + s->seq.utterance_id + ": " + e.what());
            }
            const std::int64_t t = clock_.stamp(s->t_ms);
            out_.emit(TimedEstimate{make_estimate(logp, t), s->seq.utterance_id, s->seq.index, s->seq.padded,
                                    t - start_ms_});
        } else {
            unexpected("classifier");
        }
    }

private:
    Outlet& out_;
    const nn::Network& net_;
    const RunClock& clock_;
    std::int64_t start_ms_ = 0;
};

class AggregatorStage {
public:
    AggregatorStage(Outlet& out, const RunClock& clock, eval::Aggregation mode)
        : out_(out), clock_(clock), mode_(mode) {}

    void handle(Message m) {
        if (auto* ev = std::get_if<ControlEvent>(&m)) {
            if (ev->kind == ControlEvent::Kind::UtteranceStart) {
                pending_.clear();
                label_ = ev->true_label;
                start_ms_ = ev->t_ms;
            } else if (!pending_.empty()) {
                Estimate agg = eval::aggregate_utterance(pending_, mode_);
                agg.t_emit_ms = clock_.stamp(ev->t_ms);
                out_.emit(AggregatedEstimate{ev->utterance_id, label_, agg, static_cast<int>(pending_.size()),
                                             agg.t_emit_ms - start_ms_});
                pending_.clear();
            }
            out_.emit(std::move(m));
        } else if (auto* e = std::get_if<TimedEstimate>(&m)) {
            pending_.push_back(e->estimate);
            out_.emit(std::move(m));
        } else {
            unexpected("aggregator");
        }
    }

private:
    Outlet& out_;
    const RunClock& clock_;
    eval::Aggregation mode_;
    std::vector<Estimate> pending_;
    std::optional<AddresseeClass> label_;
    std::int64_t start_ms_ = 0;
};

json logp_json(const Estimate& e) {
    return json::array({e.logp[0], e.logp[1], e.logp[2]});
}

class Sink {
public:
    Sink(RunResult& result, const RunClock& clock) : result_(result), clock_(clock) {}

    void handle(Message m) {
        json rec;
        std::int64_t t = 0;
        if (auto* ev = std::get_if<ControlEvent>(&m)) {
            t = ev->t_ms;
            if (ev->kind == ControlEvent::Kind::UtteranceStart) {
                ++result_.summary.utterances;
                rec = {{"event", "utterance_start"}, {"utterance_id", ev->utterance_id}, {"speaker_id", ev->speaker_id}};
                if (ev->true_label) rec["true_label"] = class_name(*ev->true_label);
            } else {
                rec = {{"event", "utterance_end"}, {"utterance_id", ev->utterance_id}};
            }
        } else if (auto* e = std::get_if<TimedEstimate>(&m)) {
            t = e->estimate.t_emit_ms;
            rec = {{"event", "estimate"},
                   {"utterance_id", e->utterance_id},
                   {"sequence_index", e->sequence_index},
                   {"padded", e->padded},
                   {"logp", logp_json(e->estimate)},
                   {"predicted", class_name(e->estimate.predicted)},
                   {"confidence", e->estimate.confidence},
                   {"latency_ms", e->latency_ms}};
            result_.estimates.push_back(std::move(*e));
        } else if (auto* a = std::get_if<AggregatedEstimate>(&m)) {
            t = a->estimate.t_emit_ms;
            rec = {{"event", "aggregate"},
                   {"utterance_id", a->utterance_id},
                   {"n_sequences", a->n_sequences},
                   {"logp", logp_json(a->estimate)},
                   {"predicted", class_name(a->estimate.predicted)},
                   {"confidence", a->estimate.confidence},
                   {"latency_ms", a->latency_ms}};
            if (a->true_label) rec["true_label"] = class_name(*a->true_label);
            result_.aggregates.push_back(std::move(*a));
        } else {
            unexpected("sink");
        }
        // Live runs log when the sink sees the event; that is monotonic even
        // when an upstream stamp (e.g. a scheduled END) is slightly older.
        if (clock_.realtime()) t = std::max(clock_.now_ms(), last_t_);
        last_t_ = t;
        rec["t_ms"] = t;
        result_.event_log.push_back(rec.dump());
    }

private:
    RunResult& result_;
    const RunClock& clock_;
    std::int64_t last_t_ = 0;
};

std::string diff_key(const std::string& id, int index) { return id + "#" + std::to_string(index); }

bool same_bits(const ClassVector& a, const ClassVector& b) { return std::memcmp(a.data(), b.data(), sizeof(double) * kNumClasses) == 0; }

}  // namespace

std::string_view mode_name(Mode m) { return m == Mode::Realtime ? "realtime" : "as_fast_as_possible"; }

PipelineConfig PipelineConfig::realtime() {
    PipelineConfig c;
    c.mode = Mode::Realtime;
    c.drop_policy = DropPolicy::DropOldest;
    return c;
}

void PipelineConfig::validate() const {
    if (frame_period_ms != kFramePeriodMs) fail(ErrorKind::Config, "pipeline frame period is fixed at 80 ms");
    if (queue_capacity == 0) fail(ErrorKind::Config, "queue capacity must be positive");
}

std::vector<SourceItem> replay_source(std::span<const Utterance> utterances, std::int64_t gap_ms) {
    std::vector<SourceItem> out;
    std::int64_t t = 0;
    for (const auto& u : utterances) {
        ControlEvent start{ControlEvent::Kind::UtteranceStart, u.id(), u.speaker_id(), u.label(), t};
        out.push_back({t, start});
        std::int64_t last = t;
        for (std::size_t i = 0; i < u.frames().size(); ++i) {
            last = t + static_cast<std::int64_t>(i + 1) * kFramePeriodMs;
            out.push_back({last, u.frames()[i]});
        }
        out.push_back({last, ControlEvent{ControlEvent::Kind::UtteranceEnd, u.id(), {}, std::nullopt, last}});
        t = last + gap_ms;
    }
    return out;
}

LatencyStats latency_stats(std::vector<double> samples) {
    LatencyStats s;
    if (samples.empty()) return s;
    std::sort(samples.begin(), samples.end());
    auto rank = [&](double p) {
        const auto r = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(samples.size())));
        return samples[std::clamp<std::size_t>(r, 1, samples.size()) - 1];
    };
    s.count = samples.size();
    s.min = samples.front();
    s.max = samples.back();
    s.p50 = rank(50);
    s.p95 = rank(95);
    double sum = 0.0;
    for (double v : samples) sum += v;
    s.mean = sum / static_cast<double>(samples.size());
    return s;
}

json summary_json(const RunSummary& s) {
    auto lat = [](const LatencyStats& l) {
        return json{{"count", l.count}, {"min", l.min}, {"p50", l.p50}, {"p95", l.p95}, {"max", l.max}, {"mean", l.mean}};
    };
    return {{"mode", mode_name(s.mode)},
            {"source_frames", s.source_frames},
            {"admitted_frames", s.admitted_frames},
            {"gated_frames", s.gated_frames},
            {"dropped_frames", s.dropped_frames},
            {"utterances", s.utterances},
            {"estimates", s.estimates},
            {"aggregates", s.aggregates},
            {"queue_capacity", s.queue_capacity},
            {"max_queue_depth", s.max_queue_depth},
            {"first_estimate_latency_ms", lat(s.first_estimate_latency_ms)},
            {"estimate_latency_ms", lat(s.estimate_latency_ms)},
            {"wall_ms", s.wall_ms}};
}

RunResult run_pipeline(std::span<const SourceItem> source, const nn::Network& net, const PipelineConfig& config) {
    config.validate();
    const RunClock clock(config.mode);
    Counters counters;
    RunResult result;

    // q[0] source->gate ... q[4] aggregator->sink. Only frame queues may drop.
    std::vector<std::unique_ptr<Queue>> q;
    for (int i = 0; i < 5; ++i) q.push_back(std::make_unique<Queue>(config.queue_capacity));
    const DropPolicy frame_policy = config.drop_policy;

    std::array<Outlet, 5> outlets{Outlet(*q[0], frame_policy, counters), Outlet(*q[1], frame_policy, counters),
                                  Outlet(*q[2], DropPolicy::Block, counters), Outlet(*q[3], DropPolicy::Block, counters),
                                  Outlet(*q[4], DropPolicy::Block, counters)};
    SpeakerGate gate(outlets[1], counters);
    SequencerStage sequencer(outlets[2], counters);
    ClassifierStage classifier(outlets[3], net, clock);
    AggregatorStage aggregator(outlets[4], clock, config.aggregation);
    Sink sink(result, clock);
    Outlet& source_out = outlets[0];

    auto dispatch = [&](int stage, Message m) {
        switch (stage) {
            case 0: gate.handle(std::move(m)); break;
            case 1: sequencer.handle(std::move(m)); break;
            case 2: classifier.handle(std::move(m)); break;
            case 3: aggregator.handle(std::move(m)); break;
            default: sink.handle(std::move(m)); break;
        }
    };

    auto emit_source = [&](const SourceItem& item, auto&& push) {
        if (clock.realtime()) clock.sleep_until(item.t_ms);
        if (const auto* ev = std::get_if<ControlEvent>(&item.payload)) {
            // Control events keep their scheduled (trigger) time.
            push(Message(*ev));
        } else {
            ++counters.source_frames;
            push(Message(FrameMsg{std::get<Frame>(item.payload), clock.stamp(item.t_ms)}));
        }
    };

    if (config.execution == Execution::SingleThreaded) {
        std::function<void(int)> drain = [&](int stage) {
            while (auto m = q[static_cast<std::size_t>(stage)]->try_pop()) dispatch(stage, std::move(*m));
        };
        for (int i = 0; i < 5; ++i) outlets[static_cast<std::size_t>(i)].set_relief([&drain, i] { drain(i); });
        // Round-robin: after each source item every stage drains its inbox.
        for (const auto& item : source) {
            emit_source(item, [&](Message m) { source_out.emit(std::move(m)); });
            for (int stage = 0; stage < 5; ++stage) drain(stage);
        }
    } else {
        std::mutex error_mutex;
        std::exception_ptr error;
        auto abort_all = [&] {
            {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
            for (auto& queue : q) queue->close();
        };

        std::vector<std::thread> workers;
        for (int stage = 0; stage < 5; ++stage) {
            workers.emplace_back([&, stage] {
                try {
                    Queue& in = *q[static_cast<std::size_t>(stage)];
                    while (auto m = in.pop()) {
                        if (std::holds_alternative<Shutdown>(*m)) {
                            if (stage < 4) q[static_cast<std::size_t>(stage) + 1]->push(Shutdown{});
                            return;
                        }
                        dispatch(stage, std::move(*m));
                    }
                } catch (...) {
                    abort_all();
                }
            });
        }
        try {
            for (const auto& item : source) {
                emit_source(item, [&](Message m) { source_out.emit(std::move(m)); });
                std::lock_guard lock(error_mutex);
                if (error) break;
            }
            q[0]->push(Shutdown{});
        } catch (...) {
            abort_all();
        }
        for (auto& w : workers) w.join();
        if (error) std::rethrow_exception(error);
    }

    auto& s = result.summary;
    s.mode = config.mode;
    s.source_frames = counters.source_frames;
    s.admitted_frames = counters.admitted;
    s.gated_frames = counters.gated;
    s.dropped_frames = counters.dropped;
    s.estimates = result.estimates.size();
    s.aggregates = result.aggregates.size();
    s.queue_capacity = config.queue_capacity;
    for (const auto& queue : q) s.max_queue_depth = std::max(s.max_queue_depth, queue->max_depth());
    std::vector<double> first, all;
    for (const auto& e : result.estimates) {
        all.push_back(static_cast<double>(e.latency_ms));
        if (e.sequence_index == 0) first.push_back(static_cast<double>(e.latency_ms));
    }
    s.first_estimate_latency_ms = latency_stats(first);
    s.estimate_latency_ms = latency_stats(all);
    s.wall_ms = clock.elapsed_ms();
    return result;
}

json EquivalenceReport::to_json() const {
    json diffs_json = json::array();
    for (const auto& d : diffs) {
        json j = {{"utterance_id", d.utterance_id}, {"sequence_index", d.sequence_index}};
        j["batch_logp"] = d.batch_logp ? json(*d.batch_logp) : json(nullptr);
        j["stream_logp"] = d.stream_logp ? json(*d.stream_logp) : json(nullptr);
        diffs_json.push_back(j);
    }
    return {{"sequences_compared", sequences_compared},
            {"utterances_compared", utterances_compared},
            {"n_diffs", diffs.size()},
            {"equivalent", equivalent()},
            {"diffs", diffs_json}};
}

EquivalenceReport equivalence_check(std::span<const Utterance> utterances, const nn::Network& net,
                                    Execution execution, eval::Aggregation aggregation) {
    const eval::Evaluation batch = eval::evaluate(net, utterances, aggregation);
    PipelineConfig cfg;
    cfg.execution = execution;
    cfg.aggregation = aggregation;
    const auto source = replay_source(utterances);
    const RunResult stream = run_pipeline(source, net, cfg);

    EquivalenceReport report;
    std::map<std::string, ClassVector> streamed;
    for (const auto& e : stream.estimates) streamed.emplace(diff_key(e.utterance_id, e.sequence_index), e.estimate.logp);
    for (const auto& rec : batch.sequences) {
        ++report.sequences_compared;
        const auto key = diff_key(rec.utterance_id, rec.index);
        auto it = streamed.find(key);
        if (it == streamed.end()) {
            report.diffs.push_back({rec.utterance_id, rec.index, rec.estimate.logp, std::nullopt});
            continue;
        }
        if (!same_bits(it->second, rec.estimate.logp)) {
            report.diffs.push_back({rec.utterance_id, rec.index, rec.estimate.logp, it->second});
        }
        streamed.erase(it);
    }
    for (const auto& [key, logp] : streamed) {
        const auto hash = key.rfind('#');
        report.diffs.push_back({key.substr(0, hash), std::stoi(key.substr(hash + 1)), std::nullopt, logp});
    }

    std::map<std::string, ClassVector> stream_agg;
    for (const auto& a : stream.aggregates) stream_agg.emplace(a.utterance_id, a.estimate.logp);
    for (const auto& rec : batch.utterances) {
        ++report.utterances_compared;
        auto it = stream_agg.find(rec.utterance_id);
        if (it == stream_agg.end()) {
            report.diffs.push_back({rec.utterance_id, -1, rec.aggregate.logp, std::nullopt});
        } else if (!same_bits(it->second, rec.aggregate.logp)) {
            report.diffs.push_back({rec.utterance_id, -1, rec.aggregate.logp, it->second});
        }
    }
    if (stream.aggregates.size() > batch.utterances.size()) {
        for (const auto& a : stream.aggregates) {
            const bool known = std::any_of(batch.utterances.begin(), batch.utterances.end(),
                                           [&](const auto& r) { return r.utterance_id == a.utterance_id; });
            if (!known) report.diffs.push_back({a.utterance_id, -1, std::nullopt, a.estimate.logp});
        }
    }
    return report;
}

}  // namespace ae::pipeline
