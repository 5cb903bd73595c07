#pragma once

#include <algorithm>
#include <cmath>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ae/core.hpp"
#include "ae/neuralnet.hpp"
#include "ae/rng.hpp"

namespace ae::testing {

// Frames with random pixels/keypoints; enough to exercise plumbing without
// running the scene renderer.
inline Frame random_frame(const std::string& id, std::int64_t t_ms, int face_size, Rng& rng) {
    std::vector<double> px(static_cast<std::size_t>(face_size * face_size));
    for (auto& v : px) v = rng.uniform();
    std::vector<double> pose(kPoseValues);
    for (int k = 0; k < kNumKeypoints; ++k) {
        const bool present = rng.uniform() > 0.1;
        pose[3 * k] = present ? rng.uniform() : 0.0;
        pose[3 * k + 1] = present ? rng.uniform() : 0.0;
        pose[3 * k + 2] = present ? rng.uniform(0.5, 1.0) : 0.0;
    }
    return Frame{id, t_ms, FaceCrop(face_size, face_size, std::move(px)), PoseKeypoints::from_flat(pose)};
}

inline Utterance random_utterance(const std::string& id, AddresseeClass label, int n_frames, int face_size,
                                  std::uint64_t seed, std::int64_t t0 = 0) {
    Rng rng(seed);
    std::vector<Frame> frames;
    for (int i = 0; i < n_frames; ++i) frames.push_back(random_frame(id, t0 + i * kFramePeriodMs, face_size, rng));
    return Utterance(id, label, "s0", std::move(frames));
}

// Small model that runs quickly on 8x8 faces.
inline nn::ModelConfig small_config() {
    nn::ModelConfig c;
    c.face_height = 8;
    c.face_width = 8;
    c.conv_filters = {2};
    c.face_dense = 4;
    c.pose_hidden = {6};
    c.fusion_units = 5;
    c.lstm_hidden = 4;
    return c;
}

// Gradient-check network: 4x4 face, 2 keypoints, one conv filter, LSTM hidden 4.
inline nn::ModelConfig micro_config() {
    nn::ModelConfig c;
    c.face_height = 4;
    c.face_width = 4;
    c.conv_filters = {1};
    c.face_dense = 3;
    c.pose_inputs = 6;
    c.pose_hidden = {3};
    c.fusion_units = 4;
    c.lstm_hidden = 4;
    return c;
}

inline nn::SequenceInput random_input(const nn::ModelConfig& c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    nn::SequenceInput in;
    in.steps = c.sequence_length;
    in.face.resize(static_cast<std::size_t>(in.steps * c.face_height * c.face_width));
    in.pose.resize(static_cast<std::size_t>(in.steps * c.pose_inputs));
    for (auto& v : in.face) v = rng.uniform(lo, hi);
    for (auto& v : in.pose) v = rng.uniform(lo, hi);
    return in;
}

// Uniform(-scale, scale) in every tensor.
inline nn::ModelWeights random_weights(const nn::ModelConfig& c, Rng& rng, double scale) {
    auto w = nn::zero_weights(c);
    for (auto& [name, t] : w.tensors) {
        for (auto& v : t.values()) v = rng.uniform(-scale, scale);
    }
    return w;
}

}  // namespace ae::testing

namespace ae::testing {

struct GradCheck {
    double max_rel_error = 0.0;
    std::string worst;
    std::size_t checked = 0;
};

// Central finite differences of the mean NLL against backward(), for every
// scalar parameter. Relative error is |a - n| / max(|a|, |n|, floor); the
// floor keeps exact zeros (dead ReLU units) from dividing by rounding noise.
inline GradCheck gradient_check(nn::ModelWeights& weights, const nn::ModelConfig& config,
                                const std::vector<nn::LabeledInput>& batch, double eps = 1e-5,
                                double floor = 1e-6) {
    const nn::Network net(config, weights);
    const auto analytic = nn::backward(net, std::span<const nn::LabeledInput>(batch));
    auto loss = [&] {
        double s = 0.0;
        for (const auto& s_in : batch) s += nn::nll_loss(net.forward(s_in.input), s_in.label);
        return s / static_cast<double>(batch.size());
    };
    GradCheck out;
    for (auto& [name, tensor] : weights.tensors) {
        const auto& g = analytic.grads.at(name);
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            const double saved = tensor[i];
            tensor[i] = saved + eps;
            const double up = loss();
            tensor[i] = saved - eps;
            const double down = loss();
            tensor[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = g[i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
            ++out.checked;
            if (rel > out.max_rel_error) {
                out.max_rel_error = rel;
                out.worst = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return out;
}

}  // namespace ae::testing

namespace ae::testing {

struct OracleScores {
    std::array<std::array<std::int64_t, 3>, 3> counts{};
    std::array<double, 3> f1{};
    double weighted = 0.0;
    double macro = 0.0;
};

// Direct per-pair tally, independent of confusion_matrix/f1_scores.
inline OracleScores oracle_scores(const std::vector<std::pair<AddresseeClass, AddresseeClass>>& pairs) {
    OracleScores o;
    for (const auto& [t, p] : pairs) o.counts[static_cast<int>(t)][static_cast<int>(p)]++;
    const double n = static_cast<double>(pairs.size());
    for (int c = 0; c < 3; ++c) {
        std::int64_t tp = 0, predicted = 0, actual = 0;
        for (const auto& [t, p] : pairs) {
            const bool is_t = static_cast<int>(t) == c;
            const bool is_p = static_cast<int>(p) == c;
            tp += is_t && is_p;
            predicted += is_p;
            actual += is_t;
        }
        const double precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
        const double recall = actual == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(actual);
        o.f1[c] = (precision + recall) == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
        o.weighted += static_cast<double>(actual) / n * o.f1[c];
    }
    o.macro = (o.f1[0] + o.f1[1] + o.f1[2]) / 3;
    return o;
}

}  // namespace ae::testing
