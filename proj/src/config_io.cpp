#include "ae/config_io.hpp"

#include <fstream>
#include <set>

namespace ae::config {

using nlohmann::json;

namespace {

class Fields {
public:
    Fields(const json& j, std::string context) : j_(j), context_(std::move(context)) {
        if (!j_.is_object()) fail(ErrorKind::Config, context_ + ": expected a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            fail(ErrorKind::Config, context_ + ": field '" + key + "' has the wrong type");
        }
    }

    void range(const char* key, synth::Range& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const auto& v = j_.at(key);
        try {
            if (v.is_array() && v.size() == 2) {
                out = {v[0].get<double>(), v[1].get<double>()};
            } else if (v.is_object()) {
                out = {v.at("min").get<double>(), v.at("max").get<double>()};
            } else {
                fail(ErrorKind::Config, context_ + ": field '" + key + "' must be [min, max] or {min, max}");
            }
        } catch (const json::exception&) {
            fail(ErrorKind::Config, context_ + ": field '" + key + "' must be [min, max] or {min, max}");
        }
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) fail(ErrorKind::Config, context_ + ": unknown field '" + key + "'");
        }
    }

private:
    const json& j_;
    std::string context_;
    std::set<std::string> seen_;
};

json range_json(const synth::Range& r) { return {{"min", r.lo}, {"max", r.hi}}; }

}  // namespace

synth::ScenarioConfig scenario_from_json(const json& j) {
    synth::ScenarioConfig c;
    Fields f(j, "scenario config");
    f.get("n_utterances", c.n_utterances);
    std::vector<double> mix(c.class_mix.begin(), c.class_mix.end());
    f.get("class_mix", mix);
    if (mix.size() != kNumClasses) fail(ErrorKind::Config, "scenario config: class_mix needs 3 proportions");
    std::copy(mix.begin(), mix.end(), c.class_mix.begin());
    f.range("utterance_len_ms", c.utterance_len_ms);
    f.get("yaw_noise_deg", c.yaw_noise_deg);
    f.get("object_glance_prob", c.object_glance_prob);
    f.range("glance_len_ms", c.glance_len_ms);
    f.get("keypoint_dropout", c.keypoint_dropout);
    f.range("speaker_depth_m", c.speaker_depth_m);
    f.get("seed", c.seed);
    f.get("face_size", c.face_size);
    f.get("pixel_noise", c.pixel_noise);
    f.get("keypoint_noise", c.keypoint_noise);
    f.get("n_speakers", c.n_speakers);
    f.get("bystander_lateral_m", c.bystander_lateral_m);
    f.get("bystander_depth_m", c.bystander_depth_m);
    f.finish();
    c.validate();
    return c;
}

json scenario_json(const synth::ScenarioConfig& c) {
    return {{"n_utterances", c.n_utterances},
            {"class_mix", c.class_mix},
            {"utterance_len_ms", range_json(c.utterance_len_ms)},
            {"yaw_noise_deg", c.yaw_noise_deg},
            {"object_glance_prob", c.object_glance_prob},
            {"glance_len_ms", range_json(c.glance_len_ms)},
            {"keypoint_dropout", c.keypoint_dropout},
            {"speaker_depth_m", range_json(c.speaker_depth_m)},
            {"seed", c.seed},
            {"face_size", c.face_size},
            {"pixel_noise", c.pixel_noise},
            {"keypoint_noise", c.keypoint_noise},
            {"n_speakers", c.n_speakers},
            {"bystander_lateral_m", c.bystander_lateral_m},
            {"bystander_depth_m", c.bystander_depth_m}};
}

nn::ModelConfig model_from_json(const json& j) {
    nn::ModelConfig c;
    Fields f(j, "model config");
    f.get("face_height", c.face_height);
    f.get("face_width", c.face_width);
    f.get("conv_filters", c.conv_filters);
    f.get("kernel", c.kernel);
    f.get("face_dense", c.face_dense);
    f.get("pose_inputs", c.pose_inputs);
    f.get("pose_hidden", c.pose_hidden);
    f.get("fusion_units", c.fusion_units);
    f.get("lstm_hidden", c.lstm_hidden);
    f.get("sequence_length", c.sequence_length);
    std::uint64_t echoed_hash = 0;
    f.get("config_hash", echoed_hash);
    f.finish();
    c.validate();
    if (j.contains("config_hash") && echoed_hash != c.hash()) {
        fail(ErrorKind::Config, "model config: config_hash does not match the listed layer sizes");
    }
    return c;
}

json model_json(const nn::ModelConfig& c) {
    return {{"face_height", c.face_height},   {"face_width", c.face_width},     {"conv_filters", c.conv_filters},
            {"kernel", c.kernel},             {"face_dense", c.face_dense},     {"pose_inputs", c.pose_inputs},
            {"pose_hidden", c.pose_hidden},   {"fusion_units", c.fusion_units}, {"lstm_hidden", c.lstm_hidden},
            {"sequence_length", c.sequence_length}, {"config_hash", c.hash()}};
}

nn::TrainConfig train_from_json(const json& j) {
    nn::TrainConfig c;
    Fields f(j, "train config");
    std::string optimizer = "adam";
    f.get("optimizer", optimizer);
    if (optimizer != "adam") fail(ErrorKind::Config, "train config: only the 'adam' optimizer is supported");
    f.get("learning_rate", c.learning_rate);
    f.get("beta1", c.beta1);
    f.get("beta2", c.beta2);
    f.get("epsilon", c.epsilon);
    f.get("batch_size", c.batch_size);
    f.get("epochs", c.epochs);
    f.get("patience", c.patience);
    f.get("val_fraction", c.val_fraction);
    f.get("seed", c.seed);
    f.finish();
    c.validate();
    return c;
}

json train_json(const nn::TrainConfig& c) {
    return {{"optimizer", "adam"},       {"learning_rate", c.learning_rate}, {"beta1", c.beta1},
            {"beta2", c.beta2},          {"epsilon", c.epsilon},             {"batch_size", c.batch_size},
            {"epochs", c.epochs},        {"patience", c.patience},           {"val_fraction", c.val_fraction},
            {"seed", c.seed}};
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, path.string() + ": invalid JSON: " + e.what());
    }
}

}  // namespace ae::config
