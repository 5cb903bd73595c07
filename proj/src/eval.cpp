#include "ae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ae/rng.hpp"
#include "ae/sequencer.hpp"

namespace ae::eval {

std::string_view granularity_name(Granularity g) {
    switch (g) {
        case Granularity::Sequence: return "sequence";
        case Granularity::Utterance: return "utterance";
        case Granularity::FirstSequence: return "first_sequence";
    }
    return "?";
}

std::string_view aggregation_name(Aggregation a) {
    return a == Aggregation::Mean ? "mean" : "confidence_weighted";
}

Aggregation aggregation_from_name(std::string_view name) {
    if (name == "mean") return Aggregation::Mean;
    if (name == "confidence_weighted") return Aggregation::ConfidenceWeighted;
    fail(ErrorKind::Config, "unknown aggregation '" + std::string(name) + "'");
}

Estimate aggregate_utterance(std::span<const Estimate> estimates, Aggregation mode) {
    if (estimates.empty()) fail(ErrorKind::InvalidInput, "cannot aggregate an empty list of estimates");
    std::vector<ClassVector> probs;
    probs.reserve(estimates.size());
    std::int64_t t_emit = estimates.front().t_emit_ms;
    for (const auto& e : estimates) {
        probs.push_back(probs_from_log(e.logp));
        t_emit = std::max(t_emit, e.t_emit_ms);
    }
    std::sort(probs.begin(), probs.end());

    ClassVector mean{};
    double total_weight = 0.0;
    for (const auto& p : probs) {
        const double w = mode == Aggregation::Mean ? 1.0 : *std::max_element(p.begin(), p.end());
        for (int c = 0; c < kNumClasses; ++c) mean[c] += w * p[c];
        total_weight += w;
    }
    double sum = 0.0;
    for (double& v : mean) {
        v /= total_weight;
        sum += v;
    }
    ClassVector logp{};
    for (int c = 0; c < kNumClasses; ++c) {
        // Clamp exact zeros so the log stays finite.
        logp[c] = std::log(std::max(mean[c] / sum, 1e-300));
    }
    return make_estimate(logp, t_emit);
}

ConfusionMatrix confusion_matrix(std::span<const LabelPair> pairs) {
    ConfusionMatrix m{};
    for (const auto& [truth, pred] : pairs) m[class_index(truth)][class_index(pred)] += 1;
    return m;
}

F1Scores f1_scores(const ConfusionMatrix& m) {
    std::array<std::int64_t, kNumClasses> row{}, col{};
    std::int64_t total = 0;
    for (int t = 0; t < kNumClasses; ++t) {
        for (int p = 0; p < kNumClasses; ++p) {
            row[t] += m[t][p];
            col[p] += m[t][p];
            total += m[t][p];
        }
    }
    if (total <= 0) fail(ErrorKind::InvalidInput, "cannot score an empty confusion matrix");

    F1Scores out;
    for (int c = 0; c < kNumClasses; ++c) {
        const double tp = static_cast<double>(m[c][c]);
        const double precision = col[c] > 0 ? tp / static_cast<double>(col[c]) : 0.0;
        const double recall = row[c] > 0 ? tp / static_cast<double>(row[c]) : 0.0;
        out.per_class[c] = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        out.weighted += static_cast<double>(row[c]) / static_cast<double>(total) * out.per_class[c];
    }
    out.macro = (out.per_class[0] + out.per_class[1] + out.per_class[2]) / kNumClasses;
    return out;
}

EvalReport make_report(Granularity g, Aggregation a, std::span<const LabelPair> pairs) {
    EvalReport r;
    r.granularity = g;
    r.aggregation = a;
    r.confusion = confusion_matrix(pairs);
    r.total = static_cast<std::int64_t>(pairs.size());
    std::int64_t correct = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        for (int p = 0; p < kNumClasses; ++p) r.support[c] += r.confusion[c][p];
        correct += r.confusion[c][c];
    }
    if (r.total > 0) {
        const F1Scores f = f1_scores(r.confusion);
        r.per_class_f1 = f.per_class;
        r.weighted_f1 = f.weighted;
        r.macro_f1 = f.macro;
        r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
    }
    return r;
}

Evaluation evaluate(const nn::Network& net, std::span<const Utterance> utterances, Aggregation mode) {
    Evaluation out;
    std::vector<LabelPair> seq_pairs, utt_pairs, first_pairs;
    for (const auto& u : utterances) {
        std::vector<Estimate> estimates;
        for (const auto& seq : window_utterance(u)) {
            const std::int64_t t_emit = seq.frames.back().t_ms + kFramePeriodMs;
            Estimate e = make_estimate(nn::forward_sequence(net, seq), t_emit);
            seq_pairs.emplace_back(u.label(), e.predicted);
            if (seq.index == 0) first_pairs.emplace_back(u.label(), e.predicted);
            out.sequences.push_back({u.id(), seq.index, seq.padded, u.label(), e});
            estimates.push_back(e);
        }
        Estimate agg = aggregate_utterance(estimates, mode);
        utt_pairs.emplace_back(u.label(), agg.predicted);
        out.utterances.push_back({u.id(), u.label(), agg, static_cast<int>(estimates.size())});
    }
    out.reports[0] = make_report(Granularity::Sequence, mode, seq_pairs);
    out.reports[1] = make_report(Granularity::Utterance, mode, utt_pairs);
    out.reports[2] = make_report(Granularity::FirstSequence, mode, first_pairs);
    return out;
}

std::vector<FoldSplit> kfold(std::span<const Utterance> utterances, int k, std::uint64_t seed) {
    if (k < 2) fail(ErrorKind::Config, "k-fold needs k >= 2");
    if (utterances.size() < static_cast<std::size_t>(k)) {
        fail(ErrorKind::Config, "k-fold needs at least k=" + std::to_string(k) + " utterances, got " +
                                    std::to_string(utterances.size()));
    }
    std::vector<std::size_t> order(utterances.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, 0xF01D));
    rng.shuffle(order);
    std::vector<int> fold_of(utterances.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) fold_of[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));

    std::vector<FoldSplit> out(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) out[static_cast<std::size_t>(f)].fold = f;
    for (std::size_t i = 0; i < utterances.size(); ++i) {
        for (int f = 0; f < k; ++f) {
            auto& split = out[static_cast<std::size_t>(f)];
            (fold_of[i] == f ? split.test_ids : split.train_ids).push_back(utterances[i].id());
        }
    }
    return out;
}

MeanSd mean_sd(std::span<const double> values) {
    MeanSd r;
    if (values.empty()) return r;
    r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - r.mean) * (v - r.mean);
        r.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return r;
}

MetricSummary summarize(std::span<const FoldResult> folds, Granularity g) {
    auto collect = [&](auto get) {
        std::vector<double> v;
        for (const auto& f : folds) v.push_back(get(f.reports[static_cast<std::size_t>(g)]));
        return mean_sd(v);
    };
    MetricSummary s;
    s.weighted_f1 = collect([](const EvalReport& r) { return r.weighted_f1; });
    s.macro_f1 = collect([](const EvalReport& r) { return r.macro_f1; });
    s.accuracy = collect([](const EvalReport& r) { return r.accuracy; });
    for (int c = 0; c < kNumClasses; ++c) {
        s.per_class_f1[c] = collect([c](const EvalReport& r) { return r.per_class_f1[c]; });
    }
    return s;
}

CrossValResult crossval(std::span<const Utterance> utterances, int k, std::uint64_t seed,
                        const nn::ModelConfig& model_config, const nn::TrainConfig& train_config,
                        Aggregation mode) {
    CrossValResult out;
    out.k = k;
    std::map<std::string, const Utterance*> by_id;
    for (const auto& u : utterances) by_id.emplace(u.id(), &u);

    for (FoldSplit& split : kfold(utterances, k, seed)) {
        std::vector<Utterance> train_utts, test_utts;
        for (const auto& id : split.train_ids) train_utts.push_back(*by_id.at(id));
        for (const auto& id : split.test_ids) test_utts.push_back(*by_id.at(id));

        nn::TrainConfig fold_cfg = train_config;
        fold_cfg.seed = mix_seed(train_config.seed, static_cast<std::uint64_t>(split.fold));
        const auto parts = nn::split_utterances(train_utts, fold_cfg.val_fraction, fold_cfg.seed);
        const auto train_set = nn::encode_utterances(parts.train, model_config);
        const auto val_set = nn::encode_utterances(parts.validation, model_config);
        nn::TrainResult trained = nn::train(train_set, val_set, model_config, fold_cfg);

        nn::Network net(model_config, trained.weights);
        Evaluation ev = evaluate(net, test_utts, mode);
        out.folds.push_back({std::move(split), ev.reports, trained.best_epoch});
    }
    for (auto g : kAllGranularities) out.summary[static_cast<std::size_t>(g)] = summarize(out.folds, g);
    return out;
}

}  // namespace ae::eval
