// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "ae/config_io.hpp"
#include "ae/dataset_io.hpp"
#include "ae/eval.hpp"
#include "ae/pipeline.hpp"
#include "ae/report.hpp"
#include "ae/sequencer.hpp"
#include "ae/synthgen.hpp"
#include "ae/train.hpp"
#include "ae/weights_io.hpp"
#include "json.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace ae;
using nlohmann::json;

namespace {

const fs::path kOut = fs::path(AE_ACCEPTANCE_DIR);

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

int cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(AE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

synth::ScenarioConfig easy_scenario(std::uint64_t seed) {
    synth::ScenarioConfig c;
    c.n_utterances = 600;
    c.yaw_noise_deg = 5.0;
    c.keypoint_dropout = 0.05;
    c.seed = seed;
    return c;
}

synth::ScenarioConfig hard_scenario(std::uint64_t seed) {
    synth::ScenarioConfig c;
    c.n_utterances = 600;
    c.yaw_noise_deg = 15.0;
    c.keypoint_dropout = 0.2;
    c.object_glance_prob = 0.5;
    c.seed = seed;
    return c;
}

// Held-out protocol: 20% of utterances are kept for testing; training uses
// the rest with its own validation split for early stopping.
struct HeldOut {
    std::array<eval::EvalReport, 3> reports;
    int epochs_run = 0;
    int best_epoch = 0;
    double seconds = 0.0;
};

HeldOut held_out_run(const synth::ScenarioConfig& scenario, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto utts = synth::generate(scenario);
    const auto outer = nn::split_utterances(utts, 0.2, mix_seed(seed, 77));
    nn::TrainConfig tc;
    tc.epochs = 30;
    tc.seed = seed;
    const nn::ModelConfig mc;
    const auto inner = nn::split_utterances(outer.train, tc.val_fraction, tc.seed);
    const auto train_set = nn::encode_utterances(inner.train, mc);
    const auto val_set = nn::encode_utterances(inner.validation, mc);
    const auto result = nn::train(train_set, val_set, mc, tc);
    const nn::Network net(mc, result.weights);
    HeldOut h;
    h.reports = eval::evaluate(net, outer.validation).reports;
    h.epochs_run = static_cast<int>(result.history.size());
    h.best_epoch = result.best_epoch;
    h.seconds = seconds_since(t0);
    return h;
}

// ---------------------------------------------------------------------------

Outcome criterion_gradient() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const auto c = testing::micro_config();
    Rng rng(2024);
    double worst = 0.0;
    std::string worst_name;
    std::size_t params = 0;
    for (int trial = 0; trial < 3; ++trial) {
        auto w = testing::random_weights(c, rng, 0.5);
        std::vector<nn::LabeledInput> batch;
        for (int i = 0; i < 3; ++i) batch.push_back({testing::random_input(c, rng), class_from_index(i)});
        const auto r = testing::gradient_check(w, c, batch, 1e-5);
        params = r.checked;
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_name = r.worst;
        }
    }
    const double secs = seconds_since(t0);
    o.detail << "max relative error " << worst << " (" << worst_name << ") over " << params << " parameters x 3 draws, "
             << secs << " s";
    o.require(worst < 1e-4, "relative error < 1e-4");
    o.require(secs < 30.0, "runtime < 30 s");
    return o;
}

Outcome criterion_normalization() {
    Outcome o;
    const auto c = testing::micro_config();
    const nn::ModelConfig d;
    Rng rng(99);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto& cfg = (i % 10 == 0) ? d : c;
        const auto w = testing::random_weights(cfg, rng, rng.uniform(0.05, 2.0));
        const nn::Network net(cfg, w);
        const auto logp = net.forward(testing::random_input(cfg, rng, -2.0, 2.0));
        double s = 0.0;
        for (double v : logp) s += std::exp(v);
        worst = std::max(worst, std::abs(s - 1.0));
    }
    o.detail << "1000 draws, max |sum exp(logp) - 1| = " << worst;
    o.require(worst < 1e-6, "normalization within 1e-6");
    return o;
}

Outcome criterion_learnability() {
    Outcome o;
    const auto easy = held_out_run(easy_scenario(42), 42);
    const auto hard = held_out_run(hard_scenario(42), 42);
    const double easy_f1 = easy.reports[0].weighted_f1;
    const double hard_f1 = hard.reports[0].weighted_f1;
    o.detail << "easy: sequence weighted F1 " << easy_f1 << " (" << easy.epochs_run << " epochs, " << easy.seconds
             << " s); hard: " << hard_f1 << " (" << hard.epochs_run << " epochs, " << hard.seconds << " s)";
    o.require(easy_f1 >= 0.90, "easy weighted F1 >= 0.90");
    o.require(easy.epochs_run <= 30, "within 30 epochs");
    o.require(easy.seconds < 300.0, "easy runtime < 5 min");
    o.require(hard_f1 >= 0.60, "hard weighted F1 >= 0.60");

    const auto dir = kOut / "learnability";
    for (const auto& [name, run] : {std::pair{"easy", &easy}, std::pair{"hard", &hard}}) {
        const std::string table = report::granularity_table(run->reports);
        std::cout << "  " << name << " scenario, held-out utterances:\n" << table;
        write(dir / (std::string(name) + "_table.txt"), table);
        write(dir / (std::string(name) + "_granularity.svg"),
              report::render_svg(report::granularity_chart(run->reports, std::string(name) + " scenario: F1-score")));
        for (const auto& r : run->reports) {
            o.require(r.total > 0, std::string(name) + " " + std::string(eval::granularity_name(r.granularity)) +
                                       " report populated");
        }
    }
    return o;
}

Outcome criterion_aggregation() {
    Outcome o;
    std::vector<double> seq_acc, utt_acc;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto run = held_out_run(hard_scenario(seed), seed);
        seq_acc.push_back(run.reports[0].accuracy);
        utt_acc.push_back(run.reports[1].accuracy);
        std::cout << "  seed " << seed << ": sequence acc " << run.reports[0].accuracy << ", utterance acc "
                  << run.reports[1].accuracy << "\n";
    }
    const auto s = eval::mean_sd(seq_acc);
    const auto u = eval::mean_sd(utt_acc);
    o.detail << "hard scenario, 5 seeds: mean utterance acc " << u.mean << " vs mean sequence acc " << s.mean;
    o.require(u.mean >= s.mean, "utterance accuracy >= sequence accuracy");

    // Exhaustive unanimity: every 0.05-grid distribution, all multisets of up
    // to three estimates sharing an argmax, both aggregation modes.
    std::array<std::vector<Estimate>, 3> by_class;
    for (int a = 0; a <= 20; ++a) {
        for (int b = 0; a + b <= 20; ++b) {
            const ClassVector p{a / 20.0, b / 20.0, (20 - a - b) / 20.0};
            ClassVector logp;
            for (int k = 0; k < 3; ++k) logp[k] = std::log(std::max(p[k], 1e-300));
            const auto e = make_estimate(logp);
            by_class[class_index(e.predicted)].push_back(e);
        }
    }
    std::size_t cases = 0, violations = 0;
    for (int k = 0; k < 3; ++k) {
        const auto& g = by_class[static_cast<std::size_t>(k)];
        const std::size_t n = g.size();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i; j <= n; ++j) {
                for (std::size_t l = j; l <= n; ++l) {
                    if (j == n && l != n) continue;
                    std::vector<Estimate> v{g[i]};
                    if (j < n) v.push_back(g[j]);
                    if (l < n) v.push_back(g[l]);
                    for (auto mode : {eval::Aggregation::Mean, eval::Aggregation::ConfidenceWeighted}) {
                        ++cases;
                        violations += eval::aggregate_utterance(v, mode).predicted != class_from_index(k);
                    }
                }
            }
        }
    }
    o.detail << "; unanimity: " << violations << " violations in " << cases << " constructed cases";
    o.require(violations == 0, "unanimity invariant");
    return o;
}

Outcome criterion_metrics() {
    Outcome o;
    Rng rng(4242);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(80);
        const std::uint64_t tc = 1 + rng.uniform_index(3), pc = 1 + rng.uniform_index(3);
        std::vector<eval::LabelPair> pairs;
        for (std::size_t i = 0; i < n; ++i) {
            pairs.emplace_back(class_from_index(static_cast<int>(rng.uniform_index(tc))),
                               class_from_index(static_cast<int>(2 - rng.uniform_index(pc))));
        }
        const auto ref = testing::oracle_scores(pairs);
        const auto m = eval::confusion_matrix(pairs);
        const auto f = eval::f1_scores(m);
        bool same = m == ref.counts && f.weighted == ref.weighted && f.macro == ref.macro;
        for (int c = 0; c < 3; ++c) same = same && f.per_class[c] == ref.f1[c];
        mismatches += !same;
    }
    const auto worked = eval::f1_scores(eval::ConfusionMatrix{{{5, 5, 0}, {0, 10, 0}, {0, 0, 10}}});
    o.detail << mismatches << " oracle mismatches in 1000 sets; worked matrix weighted F1 " << worked.weighted;
    o.require(mismatches == 0, "exact oracle agreement");
    o.require(std::abs(worked.weighted - 0.8222) <= 1e-4, "worked matrix 0.8222");
    return o;
}

Outcome criterion_windowing() {
    Outcome o;
    const nn::ModelConfig mc = testing::small_config();
    std::size_t bad_count = 0, bad_bytes = 0;
    for (int n = 1; n <= 200; ++n) {
        const auto u = testing::random_utterance("u", AddresseeClass::Robot, n, 8, static_cast<std::uint64_t>(n));
        const auto batch = window_utterance(u);
        bad_count += batch.size() != std::max<std::size_t>(1, static_cast<std::size_t>(n) / 10);
        StreamSequencer s;
        s.begin(u.id());
        std::vector<Sequence> streamed;
        for (const auto& f : u.frames()) {
            if (auto seq = s.push_frame(f)) streamed.push_back(*seq);
        }
        if (auto seq = s.flush()) streamed.push_back(*seq);
        bool same = streamed.size() == batch.size();
        for (std::size_t i = 0; same && i < batch.size(); ++i) {
            same = streamed[i] == batch[i];
            const auto a = nn::encode_sequence(batch[i], mc);
            const auto b = nn::encode_sequence(streamed[i], mc);
            same = same && std::memcmp(a.face.data(), b.face.data(), a.face.size() * sizeof(double)) == 0 &&
                   std::memcmp(a.pose.data(), b.pose.data(), a.pose.size() * sizeof(double)) == 0;
        }
        bad_bytes += !same;
    }
    o.detail << "n = 1..200: " << bad_count << " count mismatches, " << bad_bytes << " batch/stream byte mismatches";
    o.require(bad_count == 0, "sequence count");
    o.require(bad_bytes == 0, "byte-identical sequences");
    return o;
}

Outcome criterion_equivalence() {
    Outcome o;
    const auto dir = kOut / "equivalence";
    fs::create_directories(dir);
    synth::ScenarioConfig sc;
    sc.n_utterances = 100;
    sc.utterance_len_ms = {400.0, 4000.0};  // includes padded utterances
    sc.seed = 11;
    write(dir / "scenario.json", config::scenario_json(sc).dump(2));
    nn::save_weights(nn::init_weights(nn::ModelConfig{}, 5), dir / "weights.aew");
    const int g = cli("gen --config " + q(dir / "scenario.json") + " --out " + q(dir / "data"), dir / "gen.log");
    const int s = cli("stream --check --data " + q(dir / "data") + " --weights " + q(dir / "weights.aew") + " --out " +
                          q(dir / "stream"),
                      dir / "stream.log");
    const auto log = slurp(dir / "stream.log");
    const auto summary = json::parse(slurp(dir / "stream" / "summary.json"), nullptr, false);
    const bool has = summary.is_object() && summary.contains("equivalence");
    const std::size_t diffs = has ? summary["equivalence"]["diffs"].size() : 999;
    o.detail << "100 utterances: stream --check exit " << s << ", " << diffs << " diffs";
    if (has) o.detail << " over " << summary["equivalence"]["sequences_compared"] << " sequences";
    o.require(g == 0, "gen exit 0");
    o.require(s == 0, "stream --check exit 0");
    o.require(log.find("0 diffs") != std::string::npos, "'0 diffs' printed");
    o.require(diffs == 0, "zero diffs in summary");
    return o;
}

Outcome criterion_latency() {
    Outcome o;
    const auto dir = kOut / "latency";
    fs::create_directories(dir);
    synth::ScenarioConfig sc;
    sc.n_utterances = 10;
    sc.utterance_len_ms = {1000.0, 3000.0};
    sc.seed = 8;
    write(dir / "scenario.json", config::scenario_json(sc).dump(2));
    nn::save_weights(nn::init_weights(nn::ModelConfig{}, 6), dir / "weights.aew");
    const int g = cli("gen --config " + q(dir / "scenario.json") + " --out " + q(dir / "data"), dir / "gen.log");
    const int s = cli("stream --realtime --data " + q(dir / "data") + " --weights " + q(dir / "weights.aew") +
                          " --out " + q(dir / "stream"),
                      dir / "stream.log");
    const auto summary = json::parse(slurp(dir / "stream" / "summary.json"), nullptr, false);
    o.require(g == 0 && s == 0, "gen/stream exit 0");
    if (!summary.is_object()) {
        o.require(false, "summary.json readable");
        return o;
    }
    const auto& lat = summary["first_estimate_latency_ms"];
    const double mn = lat["min"].get<double>(), p50 = lat["p50"].get<double>(), p95 = lat["p95"].get<double>();
    const auto dropped = summary["dropped_frames"].get<std::size_t>();
    const auto depth = summary["max_queue_depth"].get<std::size_t>();
    const auto capacity = summary["queue_capacity"].get<std::size_t>();

    // A single 40-frame utterance, timed end to end.
    const nn::ModelConfig mc;
    const auto w = nn::init_weights(mc, 6);
    const nn::Network net(mc, w);
    std::vector<Frame> frames;
    Rng rng(3);
    synth::ScenarioConfig quiet;
    for (int i = 0; i < 40; ++i) {
        auto r = synth::render_frame(0.0, quiet, rng);
        frames.push_back({"long", i * kFramePeriodMs, r.face, r.pose});
    }
    const std::vector<Utterance> one{Utterance("long", AddresseeClass::Robot, "s0", frames)};
    const auto run = pipeline::run_pipeline(pipeline::replay_source(one), net, pipeline::PipelineConfig::realtime());
    const double span = run.summary.wall_ms;

    o.detail << "first-estimate latency min " << mn << " / p50 " << p50 << " / p95 " << p95 << " ms, dropped "
             << dropped << ", max queue depth " << depth << "/" << capacity << "; 40-frame replay " << span << " ms";
    o.require(mn >= 800.0, "min >= 800 ms");
    o.require(p95 <= 1000.0, "p95 <= 1000 ms");
    o.require(p50 >= 800.0 && p50 <= 1000.0, "p50 in [800, 1000] ms");
    o.require(dropped == 0, "no drops at default capacity");
    o.require(depth < capacity, "queues never fill");
    o.require(std::abs(span - 3200.0) <= 0.05 * 3200.0, "40-frame replay 3200 ms +- 5%");
    return o;
}

Outcome criterion_determinism() {
    Outcome o;
    const auto dir = kOut / "determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    synth::ScenarioConfig sc;
    sc.n_utterances = 40;
    sc.seed = 17;
    write(dir / "scenario.json", config::scenario_json(sc).dump(2));
    write(dir / "train.json", R"({"epochs": 2, "seed": 23})");
    bool exits_ok = true;
    for (const char* run : {"a", "b"}) {
        const auto r = dir / run;
        exits_ok &= cli("gen --config " + q(dir / "scenario.json") + " --out " + q(r / "data"), r.string() + ".gen.log") == 0;
        exits_ok &= cli("train --data " + q(r / "data") + " --train-config " + q(dir / "train.json") + " --out " +
                            q(r / "weights.aew"),
                        r.string() + ".train.log") == 0;
        exits_ok &= cli("eval --data " + q(r / "data") + " --weights " + q(r / "weights.aew") + " --out " + q(r / "eval"),
                        r.string() + ".eval.log") == 0;
    }
    o.require(exits_ok, "all commands exit 0");
    std::vector<fs::path> files{"data/dataset.jsonl", "weights.aew", "weights.aew.history.csv"};
    for (const char* g : {"sequence", "utterance", "first_sequence"}) {
        files.push_back(fs::path("eval") / (std::string("report_") + g + ".json"));
        files.push_back(fs::path("eval") / (std::string("confusion_") + g + ".csv"));
    }
    files.push_back("eval/chart_granularity.svg");
    files.push_back("eval/chart_per_class.svg");
    std::size_t identical = 0;
    for (const auto& f : files) {
        const auto a = slurp(dir / "a" / f);
        const bool same = !a.empty() && a == slurp(dir / "b" / f);
        identical += same;
        o.require(same, f.string() + " identical");
    }

    const nn::ModelConfig mc;
    const auto w = nn::load_weights(dir / "a" / "weights.aew", mc);
    const auto bytes = nn::encode_weights(w);
    const bool roundtrip = bytes == nn::encode_weights(nn::decode_weights(bytes)) &&
                           slurp(dir / "a" / "weights.aew") == std::string(bytes.begin(), bytes.end());
    o.require(roundtrip, "bit-exact weights round-trip");

    auto other = mc;
    other.lstm_hidden = 16;
    bool refused = false;
    try {
        nn::load_weights(dir / "a" / "weights.aew", other);
    } catch (const Error& e) {
        refused = e.kind() == ErrorKind::ConfigMismatch;
    }
    o.require(refused, "hash mismatch refused");
    o.detail << identical << "/" << files.size() << " rerun artifacts byte-identical; round-trip "
             << (roundtrip ? "exact" : "differs") << "; mismatched config " << (refused ? "refused" : "accepted");
    return o;
}

Outcome criterion_crossval() {
    Outcome o;
    const auto dir = kOut / "crossval";
    fs::remove_all(dir);
    fs::create_directories(dir);
    synth::ScenarioConfig sc;
    sc.n_utterances = 100;
    sc.yaw_noise_deg = 15.0;
    sc.keypoint_dropout = 0.2;
    sc.object_glance_prob = 0.5;
    sc.seed = 31;
    write(dir / "scenario.json", config::scenario_json(sc).dump(2));
    write(dir / "train.json", R"({"epochs": 15})");
    const int g = cli("gen --config " + q(dir / "scenario.json") + " --out " + q(dir / "data"), dir / "gen.log");
    const int c = cli("crossval --data " + q(dir / "data") + " --k 10 --seed 7 --train-config " + q(dir / "train.json") +
                          " --out " + q(dir / "out"),
                      dir / "crossval.log");
    o.require(g == 0 && c == 0, "gen/crossval exit 0");

    const auto utts = io::read_dataset(dir / "data");
    std::map<std::string, int> seen;
    std::set<int> folds;
    std::istringstream folds_csv(slurp(dir / "out" / "folds.csv"));
    std::string line;
    std::getline(folds_csv, line);
    while (std::getline(folds_csv, line)) {
        const auto comma = line.find(',');
        folds.insert(std::stoi(line.substr(0, comma)));
        ++seen[line.substr(comma + 1)];
    }
    bool partition = seen.size() == utts.size() && folds.size() == 10;
    for (const auto& u : utts) partition = partition && seen.count(u.id()) && seen[u.id()] == 1;
    o.require(partition, "test folds partition the utterances");

    const auto cv = json::parse(slurp(dir / "out" / "crossval.json"), nullptr, false);
    bool summary_ok = cv.is_object() && cv.contains("summary");
    if (summary_ok) {
        for (const char* gname : {"sequence", "utterance", "first_sequence"}) {
            const auto& s = cv["summary"][gname];
            for (const char* metric : {"weighted_f1", "macro_f1", "accuracy"}) {
                summary_ok = summary_ok && s.contains(metric) && s[metric].contains("mean") && s[metric].contains("sd");
            }
        }
    }
    o.require(summary_ok, "mean and SD for every metric");
    const auto svg = slurp(dir / "out" / "chart_granularity.svg");
    o.require(svg.find("error-bar") != std::string::npos, "bar chart carries SD error bars");
    std::cout << slurp(dir / "crossval.log");
    o.detail << utts.size() << " utterances over " << folds.size() << " folds, each tested once: "
             << (partition ? "yes" : "no");
    if (summary_ok) {
        o.detail << "; sequence weighted F1 " << cv["summary"]["sequence"]["weighted_f1"]["mean"].get<double>() << " +- "
                 << cv["summary"]["sequence"]["weighted_f1"]["sd"].get<double>();
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    fs::create_directories(kOut);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness", criterion_gradient},
        {"normalization invariant", criterion_normalization},
        {"learnability on easy and hard scenarios", criterion_learnability},
        {"aggregation benefit and unanimity", criterion_aggregation},
        {"metric oracle equivalence", criterion_metrics},
        {"windowing contract", criterion_windowing},
        {"deployment equivalence", criterion_equivalence},
        {"latency contract", criterion_latency},
        {"determinism and persistence", criterion_determinism},
        {"10-fold protocol", criterion_crossval},
    };
    // Optional: run a subset, e.g. `ae_acceptance 1 5 6`.
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    std::vector<std::string> lines;
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        std::cout << "-- criterion " << id << ": " << criteria[i].first << std::endl;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        std::ostringstream line;
        line << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail.str();
        std::cout << line.str() << std::endl;
        lines.push_back(line.str());
        failed += !o.pass;
    }
    std::cout << "\n==== acceptance summary ====\n";
    for (const auto& l : lines) std::cout << l << "\n";
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed;
}
