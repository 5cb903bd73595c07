#pragma once

// Addressee classifier: a convolutional face branch and a dense pose branch
// run per frame, their outputs are concatenated and fused, an LSTM carries
// state across the frames of a sequence, and a dense LogSoftMax head reads the
// final hidden state.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ae/core.hpp"
#include "ae/sequencer.hpp"
#include "ae/tensor.hpp"

namespace ae::nn {

struct ModelConfig {
    int face_height = kDefaultFaceSize;
    int face_width = kDefaultFaceSize;
    std::vector<int> conv_filters{8, 16};  // each: 3x3 valid conv, ReLU, 2x2 max-pool
    int kernel = 3;
    int face_dense = 32;
    int pose_inputs = kPoseValues;
    std::vector<int> pose_hidden{32, 32};
    int fusion_units = 32;
    int lstm_hidden = 32;
    int sequence_length = kSequenceLength;

    // Throws Config if any layer would be empty.
    void validate() const;
    std::string canonical() const;
    // FNV-1a over canonical().
    std::uint64_t hash() const;

    struct ConvShape {
        int in_channels, out_channels;
        int in_h, in_w;
        int conv_h, conv_w;
        int pool_h, pool_w;
    };
    std::vector<ConvShape> conv_shapes() const;
    int face_features() const;  // flattened size after the last pool

    bool operator==(const ModelConfig&) const = default;
};

using ParamMap = std::map<std::string, Tensor>;

inline constexpr std::uint32_t kWeightsFormatVersion = 1;

struct ModelWeights {
    ParamMap tensors;
    std::uint64_t config_hash = 0;
    std::uint32_t format_version = kWeightsFormatVersion;

    const Tensor& at(const std::string& name) const;
    std::size_t parameter_count() const;
    bool operator==(const ModelWeights&) const = default;
};

// Canonical tensor names and shapes for a config.
std::vector<std::pair<std::string, std::vector<std::size_t>>> parameter_layout(const ModelConfig& config);

ModelWeights zero_weights(const ModelConfig& config);
// Uniform in +-1/sqrt(fan_in) for every tensor of a layer, biases included.
ModelWeights init_weights(const ModelConfig& config, std::uint64_t seed);
ParamMap zero_like(const ModelWeights& weights);

// Pose normalization: when the neck and both shoulders are present, present
// keypoints are centered on the neck and scaled by the shoulder distance;
// otherwise raw coordinates are used. Missing keypoints stay (0,0,0).
std::array<double, kPoseValues> pose_features(const PoseKeypoints& pose);

// Model-ready input: per step, face pixels then pose features.
struct SequenceInput {
    int steps = 0;
    std::vector<double> face;  // steps * face_height * face_width
    std::vector<double> pose;  // steps * pose_inputs
};

SequenceInput encode_frames(std::span<const Frame> frames, const ModelConfig& config);
SequenceInput encode_sequence(const Sequence& seq, const ModelConfig& config);

struct LabeledInput {
    SequenceInput input;
    AddresseeClass label;
};

// Binds weights to a config after checking every tensor name and shape.
class Network {
public:
    Network(ModelConfig config, const ModelWeights& weights);
    // The network keeps a pointer to the weights.
    Network(ModelConfig config, ModelWeights&& weights) = delete;

    const ModelConfig& config() const { return config_; }
    const ModelWeights& weights() const { return *weights_; }

    ClassVector forward(const SequenceInput& input) const;

    // Adds d(nll)/d(param) for one sample into `grads` (which must be shaped
    // like the weights) and returns the loss.
    double accumulate_gradient(const SequenceInput& input, AddresseeClass label, ParamMap& grads) const;

private:
    struct Cache;
    ClassVector run(const SequenceInput& input, Cache* cache) const;

    ModelConfig config_;
    const ModelWeights* weights_;
    std::vector<ModelConfig::ConvShape> conv_;
    std::vector<const Tensor*> conv_w_, conv_b_, pose_w_, pose_b_;
    const Tensor *face_w_, *face_b_, *fusion_w_, *fusion_b_, *lstm_wx_, *lstm_wh_, *lstm_b_, *out_w_, *out_b_;
};

// Requires exactly sequence_length frames.
ClassVector forward_sequence(const Network& net, const Sequence& seq);

double nll_loss(const ClassVector& logp, AddresseeClass label);

// Gradient of the mean NLL over the batch. Per-sample gradients are reduced
// in batch order, so the result does not depend on how work is scheduled.
struct BatchGradient {
    ParamMap grads;
    double mean_loss = 0.0;
};
BatchGradient backward(const Network& net, std::span<const LabeledInput* const> batch);
BatchGradient backward(const Network& net, std::span<const LabeledInput> batch);

}  // namespace ae::nn
