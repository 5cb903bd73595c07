// Command-line driver: dataset generation, training, evaluation,
// cross-validation and streaming runs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ae/config_io.hpp"
#include "ae/dataset_io.hpp"
#include "ae/eval.hpp"
#include "ae/pipeline.hpp"
#include "ae/report.hpp"
#include "ae/synthgen.hpp"
#include "ae/train.hpp"
#include "ae/weights_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

enum ExitCode { kOk = 0, kValidation = 2, kIo = 3, kTraining = 4, kRuntime = 5 };

int exit_code_for(ae::ErrorKind kind) {
    switch (kind) {
        case ae::ErrorKind::Config:
        case ae::ErrorKind::ConfigMismatch:
        case ae::ErrorKind::InvalidInput:
        case ae::ErrorKind::Parse: return kValidation;
        case ae::ErrorKind::Io:
        case ae::ErrorKind::Format: return kIo;
        case ae::ErrorKind::Training: return kTraining;
        case ae::ErrorKind::Numeric:
        case ae::ErrorKind::Sequencing:
        case ae::ErrorKind::Protocol: return kRuntime;
    }
    return kRuntime;
}

std::uint64_t fnv1a_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) ae::fail(ae::ErrorKind::Io, "cannot write " + path.string());
    out << text;
    if (!out) ae::fail(ae::ErrorKind::Io, "failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) ae::fail(ae::ErrorKind::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

// One manifest per command, written next to the outputs.
class Manifest {
public:
    Manifest(std::string command, int argc, char** argv) : start_(std::chrono::steady_clock::now()) {
        j_["command"] = std::move(command);
        j_["tool_version"] = kToolVersion;
        std::vector<std::string> args(argv, argv + argc);
        j_["argv"] = args;
        j_["config"] = json::object();
        j_["seeds"] = json::object();
        j_["inputs"] = json::object();
        j_["outputs"] = json::object();
    }

    json& config() { return j_["config"]; }
    json& seeds() { return j_["seeds"]; }
    void input(const std::string& role, const fs::path& p) { j_["inputs"][role] = p.string(); }
    void output(const fs::path& p) { outputs_.push_back(p); }

    void write(const fs::path& path) {
        for (const auto& p : outputs_) {
            char hex[17];
            std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a_file(p)));
            j_["outputs"][p.string()] = {{"fnv1a64", hex}};
        }
        j_["wall_clock_ms"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
        write_text(path, j_.dump(2) + "\n");
    }

private:
    json j_;
    std::vector<fs::path> outputs_;
    std::chrono::steady_clock::time_point start_;
};

ae::nn::ModelConfig load_model_config(const std::string& path) {
    if (path.empty()) return ae::nn::ModelConfig{};
    return ae::config::model_from_json(ae::config::read_json_file(path));
}

ae::nn::TrainConfig load_train_config(const std::string& path) {
    if (path.empty()) return ae::nn::TrainConfig{};
    return ae::config::train_from_json(ae::config::read_json_file(path));
}

std::vector<ae::Utterance> load_dataset(const std::string& data) {
    auto utts = ae::io::read_dataset(fs::path(data));
    if (utts.empty()) ae::fail(ae::ErrorKind::InvalidInput, "dataset " + data + " contains no utterances");
    return utts;
}

std::string with_suffix(const fs::path& p, const std::string& suffix) { return p.string() + suffix; }

// ---------------------------------------------------------------------------

struct GenArgs {
    std::string config;
    std::string out;
};

int run_gen(const GenArgs& a, Manifest& m) {
    const auto cfg = ae::config::scenario_from_json(ae::config::read_json_file(a.config));
    const auto utts = ae::synth::generate(cfg);
    const fs::path out(a.out);
    ensure_dir(out);
    const fs::path data = out / ae::io::kDatasetFileName;
    ae::io::write_dataset(data, utts);

    m.input("config", a.config);
    m.config()["scenario"] = ae::config::scenario_json(cfg);
    m.seeds()["scenario"] = cfg.seed;
    m.output(data);
    m.write(out / "manifest.json");
    std::size_t frames = 0;
    for (const auto& u : utts) frames += u.size();
    std::cout << "wrote " << utts.size() << " utterances (" << frames << " frames) to " << data.string() << "\n";
    return kOk;
}

struct TrainArgs {
    std::string data;
    std::string model_config;
    std::string train_config;
    std::string out;
};

int run_train(const TrainArgs& a, Manifest& m) {
    const auto model_cfg = load_model_config(a.model_config);
    const auto train_cfg = load_train_config(a.train_config);
    const auto utts = load_dataset(a.data);

    const auto split = ae::nn::split_utterances(utts, train_cfg.val_fraction, train_cfg.seed);
    const auto train_set = ae::nn::encode_utterances(split.train, model_cfg);
    const auto val_set = ae::nn::encode_utterances(split.validation, model_cfg);
    std::cout << "training on " << train_set.size() << " sequences (" << split.train.size() << " utterances), validating on "
              << val_set.size() << " sequences (" << split.validation.size() << " utterances)\n";
    const auto result = ae::nn::train(train_set, val_set, model_cfg, train_cfg);

    const fs::path out(a.out);
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    ae::nn::save_weights(result.weights, out);
    std::ostringstream csv;
    csv << "epoch,train_loss,val_loss,val_accuracy\n";
    char line[160];
    for (const auto& e : result.history) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss, e.val_accuracy);
        csv << line;
        std::printf("epoch %3d  train_loss %.4f  val_loss %.4f  val_acc %.4f\n", e.epoch, e.train_loss, e.val_loss,
                    e.val_accuracy);
    }
    const fs::path history = with_suffix(out, ".history.csv");
    write_text(history, csv.str());

    m.input("data", ae::io::resolve_dataset_path(a.data));
    if (!a.model_config.empty()) m.input("model_config", a.model_config);
    if (!a.train_config.empty()) m.input("train_config", a.train_config);
    m.config()["model"] = ae::config::model_json(model_cfg);
    m.config()["train"] = ae::config::train_json(train_cfg);
    m.seeds()["train"] = train_cfg.seed;
    m.output(out);
    m.output(history);
    m.write(with_suffix(out, ".manifest.json"));
    std::cout << "best epoch " << result.best_epoch << ", weights written to " << out.string() << "\n";
    return kOk;
}

struct EvalArgs {
    std::string data;
    std::string weights;
    std::string model_config;
    std::string out;
    std::string aggregation = "mean";
};

void write_reports(const fs::path& out, const std::array<ae::eval::EvalReport, 3>& reports, Manifest& m) {
    for (const auto& r : reports) {
        const std::string g(ae::eval::granularity_name(r.granularity));
        const fs::path json_path = out / ("report_" + g + ".json");
        const fs::path csv_path = out / ("confusion_" + g + ".csv");
        const fs::path svg_path = out / ("confusion_" + g + ".svg");
        write_text(json_path, ae::report::report_json(r).dump(2) + "\n");
        write_text(csv_path, ae::report::confusion_csv(r.confusion));
        write_text(svg_path, ae::report::render_confusion_svg(r.confusion, "Confusion matrix (" + g + ")"));
        m.output(json_path);
        m.output(csv_path);
        m.output(svg_path);
    }
}

int run_eval(const EvalArgs& a, Manifest& m) {
    const auto model_cfg = load_model_config(a.model_config);
    const auto mode = ae::eval::aggregation_from_name(a.aggregation);
    const auto weights = ae::nn::load_weights(a.weights, model_cfg);
    const auto utts = load_dataset(a.data);
    const ae::nn::Network net(model_cfg, weights);
    const auto ev = ae::eval::evaluate(net, utts, mode);

    const fs::path out(a.out);
    ensure_dir(out);
    write_reports(out, ev.reports, m);
    const fs::path bars = out / "chart_granularity.svg";
    const fs::path per_class = out / "chart_per_class.svg";
    write_text(bars, ae::report::render_svg(ae::report::granularity_chart(ev.reports, "F1-score by granularity")));
    write_text(per_class, ae::report::render_svg(ae::report::per_class_chart(ev.reports, "Per-class F1-score")));
    m.output(bars);
    m.output(per_class);

    m.input("data", ae::io::resolve_dataset_path(a.data));
    m.input("weights", a.weights);
    m.config()["model"] = ae::config::model_json(model_cfg);
    m.config()["aggregation"] = a.aggregation;
    m.write(out / "manifest.json");
    std::cout << ae::report::granularity_table(ev.reports);
    return kOk;
}

struct CrossvalArgs {
    std::string data;
    int k = 10;
    std::uint64_t seed = 0;
    std::string model_config;
    std::string train_config;
    std::string out;
    std::string aggregation = "mean";
};

int run_crossval(const CrossvalArgs& a, Manifest& m) {
    const auto model_cfg = load_model_config(a.model_config);
    auto train_cfg = load_train_config(a.train_config);
    const auto mode = ae::eval::aggregation_from_name(a.aggregation);
    const auto utts = load_dataset(a.data);
    train_cfg.seed = a.seed;
    const auto cv = ae::eval::crossval(utts, a.k, a.seed, model_cfg, train_cfg, mode);

    const fs::path out(a.out);
    ensure_dir(out);
    const fs::path cv_json = out / "crossval.json";
    const fs::path folds_csv = out / "folds.csv";
    const fs::path metrics_csv = out / "fold_metrics.csv";
    const fs::path bars = out / "chart_granularity.svg";
    const fs::path per_class = out / "chart_per_class.svg";
    write_text(cv_json, ae::report::crossval_json(cv).dump(2) + "\n");

    std::ostringstream folds, metrics;
    folds << "fold,utterance_id\n";
    metrics << "fold,granularity,n_items,weighted_f1,macro_f1,accuracy,f1_robot,f1_left,f1_right\n";
    for (const auto& f : cv.folds) {
        for (const auto& id : f.split.test_ids) folds << f.split.fold << ',' << id << '\n';
        for (const auto& r : f.reports) {
            char line[256];
            std::snprintf(line, sizeof line, "%d,%s,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", f.split.fold,
                          std::string(ae::eval::granularity_name(r.granularity)).c_str(),
                          static_cast<long long>(r.total), r.weighted_f1, r.macro_f1, r.accuracy, r.per_class_f1[0],
                          r.per_class_f1[1], r.per_class_f1[2]);
            metrics << line;
        }
    }
    write_text(folds_csv, folds.str());
    write_text(metrics_csv, metrics.str());
    write_text(bars, ae::report::render_svg(ae::report::granularity_chart(
                         cv, std::to_string(a.k) + "-fold cross-validation F1-score")));
    write_text(per_class, ae::report::render_svg(ae::report::per_class_chart(cv, "Per-class F1-score (cross-validation)")));
    for (const auto& p : {cv_json, folds_csv, metrics_csv, bars, per_class}) m.output(p);

    m.input("data", ae::io::resolve_dataset_path(a.data));
    m.config()["model"] = ae::config::model_json(model_cfg);
    m.config()["train"] = ae::config::train_json(train_cfg);
    m.config()["k"] = a.k;
    m.config()["aggregation"] = a.aggregation;
    m.seeds()["crossval"] = a.seed;
    m.write(out / "manifest.json");
    std::cout << ae::report::granularity_table(cv);
    return kOk;
}

struct StreamArgs {
    std::string data;
    std::string weights;
    std::string model_config;
    std::string out;
    std::string aggregation = "mean";
    bool realtime = false;
    bool check = false;
    bool single_threaded = false;
    std::size_t queue_capacity = 32;
    std::int64_t gap_ms = 0;
};

int run_stream(const StreamArgs& a, Manifest& m) {
    const auto model_cfg = load_model_config(a.model_config);
    const auto mode = ae::eval::aggregation_from_name(a.aggregation);
    const auto weights = ae::nn::load_weights(a.weights, model_cfg);
    const auto utts = load_dataset(a.data);
    const ae::nn::Network net(model_cfg, weights);

    auto cfg = a.realtime ? ae::pipeline::PipelineConfig::realtime() : ae::pipeline::PipelineConfig{};
    cfg.queue_capacity = a.queue_capacity;
    cfg.aggregation = mode;
    cfg.execution = a.single_threaded ? ae::pipeline::Execution::SingleThreaded : ae::pipeline::Execution::Threaded;
    const auto source = ae::pipeline::replay_source(utts, a.gap_ms);
    const auto run = ae::pipeline::run_pipeline(source, net, cfg);

    const fs::path out(a.out);
    ensure_dir(out);
    const fs::path events = out / "events.jsonl";
    const fs::path summary_path = out / "summary.json";
    std::ostringstream log;
    for (const auto& line : run.event_log) log << line << '\n';
    write_text(events, log.str());

    json summary = ae::pipeline::summary_json(run.summary);
    int code = kOk;
    if (a.check) {
        const auto eq = ae::pipeline::equivalence_check(utts, net, cfg.execution, mode);
        summary["equivalence"] = eq.to_json();
        std::cout << eq.diffs.size() << " diffs (" << eq.sequences_compared << " sequences, " << eq.utterances_compared
                  << " utterances compared)\n";
        for (const auto& d : eq.diffs) {
            std::cout << "  diff: utterance " << d.utterance_id << " sequence " << d.sequence_index << "\n";
        }
        if (!eq.equivalent()) code = kRuntime;
    }
    write_text(summary_path, summary.dump(2) + "\n");
    m.output(events);
    m.output(summary_path);
    m.input("data", ae::io::resolve_dataset_path(a.data));
    m.input("weights", a.weights);
    m.config()["model"] = ae::config::model_json(model_cfg);
    m.config()["pipeline"] = {{"mode", ae::pipeline::mode_name(cfg.mode)},
                              {"frame_period_ms", cfg.frame_period_ms},
                              {"queue_capacity", cfg.queue_capacity},
                              {"drop_policy", cfg.drop_policy == ae::pipeline::DropPolicy::Block ? "block" : "drop_oldest"},
                              {"execution", a.single_threaded ? "single_threaded" : "threaded"},
                              {"aggregation", a.aggregation},
                              {"gap_ms", a.gap_ms}};
    m.write(out / "manifest.json");

    const auto& s = run.summary;
    std::printf("%zu utterances, %zu estimates, %zu aggregates; frames: %zu source, %zu admitted, %zu dropped\n",
                s.utterances, s.estimates, s.aggregates, s.source_frames, s.admitted_frames, s.dropped_frames);
    std::printf("first-estimate latency ms: min %.0f  p50 %.0f  p95 %.0f  max %.0f\n", s.first_estimate_latency_ms.min,
                s.first_estimate_latency_ms.p50, s.first_estimate_latency_ms.p95, s.first_estimate_latency_ms.max);
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Addressee estimation: synthetic data, training, evaluation and streaming"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset");
    gen_cmd->add_option("--config", gen.config, "Scenario config (JSON)")->required();
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train the classifier");
    train_cmd->add_option("--data", tr.data, "Dataset directory or file")->required();
    train_cmd->add_option("--model-config", tr.model_config, "Model config (JSON); defaults if omitted");
    train_cmd->add_option("--train-config", tr.train_config, "Training config (JSON); defaults if omitted");
    train_cmd->add_option("--out", tr.out, "Output weights file")->required();

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate weights at sequence, utterance and first-sequence level");
    eval_cmd->add_option("--data", ev.data, "Dataset directory or file")->required();
    eval_cmd->add_option("--weights", ev.weights, "Weights file")->required();
    eval_cmd->add_option("--model-config", ev.model_config, "Model config the weights were trained with");
    eval_cmd->add_option("--aggregation", ev.aggregation, "mean | confidence_weighted");
    eval_cmd->add_option("--out", ev.out, "Output directory")->required();

    CrossvalArgs cv;
    auto* cv_cmd = app.add_subcommand("crossval", "k-fold cross-validation over utterances");
    cv_cmd->add_option("--data", cv.data, "Dataset directory or file")->required();
    cv_cmd->add_option("--k", cv.k, "Number of folds");
    cv_cmd->add_option("--seed", cv.seed, "Fold assignment and training seed");
    cv_cmd->add_option("--model-config", cv.model_config, "Model config (JSON)");
    cv_cmd->add_option("--train-config", cv.train_config, "Training config (JSON); its seed is replaced by --seed");
    cv_cmd->add_option("--aggregation", cv.aggregation, "mean | confidence_weighted");
    cv_cmd->add_option("--out", cv.out, "Output directory")->required();

    StreamArgs st;
    auto* stream_cmd = app.add_subcommand("stream", "Replay a dataset through the streaming pipeline");
    stream_cmd->add_option("--data", st.data, "Dataset directory or file")->required();
    stream_cmd->add_option("--weights", st.weights, "Weights file")->required();
    stream_cmd->add_option("--model-config", st.model_config, "Model config the weights were trained with");
    stream_cmd->add_flag("--realtime", st.realtime, "Replay on the 80 ms wall clock with drop-oldest queues");
    stream_cmd->add_flag("--check", st.check, "Compare streamed predictions with batch evaluation");
    stream_cmd->add_flag("--single-threaded", st.single_threaded, "Run stages round-robin on one thread");
    stream_cmd->add_option("--queue-capacity", st.queue_capacity, "Per-stage queue capacity");
    stream_cmd->add_option("--gap-ms", st.gap_ms, "Idle time between utterances");
    stream_cmd->add_option("--aggregation", st.aggregation, "mean | confidence_weighted");
    stream_cmd->add_option("--out", st.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kValidation;
    }

    try {
        if (*gen_cmd) {
            Manifest m("gen", argc, argv);
            return run_gen(gen, m);
        }
        if (*train_cmd) {
            Manifest m("train", argc, argv);
            return run_train(tr, m);
        }
        if (*eval_cmd) {
            Manifest m("eval", argc, argv);
            return run_eval(ev, m);
        }
        if (*cv_cmd) {
            Manifest m("crossval", argc, argv);
            return run_crossval(cv, m);
        }
        if (*stream_cmd) {
            Manifest m("stream", argc, argv);
            return run_stream(st, m);
        }
    } catch (const ae::Error& e) {
        std::cerr << "error (" << ae::error_kind_name(e.kind()) << "): " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kValidation;
}
