#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ae/error.hpp"

namespace ae {

inline constexpr int kNumClasses = 3;
inline constexpr int kFramePeriodMs = 80;  // 12.5 Hz
inline constexpr int kSequenceLength = 10;
inline constexpr int kNumKeypoints = 18;
inline constexpr int kPoseValues = kNumKeypoints * 3;
inline constexpr int kDefaultFaceSize = 24;

// Integer codes are part of the dataset and report formats.
enum class AddresseeClass : std::uint8_t { Robot = 0, Left = 1, Right = 2 };

inline constexpr std::array<AddresseeClass, kNumClasses> kAllClasses = {
    AddresseeClass::Robot, AddresseeClass::Left, AddresseeClass::Right};

inline int class_index(AddresseeClass c) { return static_cast<int>(c); }
AddresseeClass class_from_index(int code);
std::string_view class_name(AddresseeClass c);
AddresseeClass class_from_name(std::string_view name);

using ClassVector = std::array<double, kNumClasses>;

// OpenPose COCO-18 ordering.
enum class Keypoint : int {
    Nose = 0, Neck, RShoulder, RElbow, RWrist, LShoulder, LElbow, LWrist,
    RHip, RKnee, RAnkle, LHip, LKnee, LAnkle, REye, LEye, REar, LEar,
};

struct KeypointSample {
    double x = 0.0;
    double y = 0.0;
    double c = 0.0;

    bool present() const { return c > 0.0; }
    bool operator==(const KeypointSample&) const = default;
};

// 18 keypoints in normalized image coordinates; a missing joint is (0,0,0).
class PoseKeypoints {
public:
    PoseKeypoints() = default;
    explicit PoseKeypoints(const std::array<KeypointSample, kNumKeypoints>& points);

    // Expects 54 values laid out as x,y,c per keypoint.
    static PoseKeypoints from_flat(const std::vector<double>& values);
    std::array<double, kPoseValues> flat() const;

    const KeypointSample& operator[](Keypoint k) const { return points_[static_cast<int>(k)]; }
    const KeypointSample& at(int i) const { return points_.at(static_cast<std::size_t>(i)); }
    const std::array<KeypointSample, kNumKeypoints>& points() const { return points_; }

    bool operator==(const PoseKeypoints&) const = default;

private:
    std::array<KeypointSample, kNumKeypoints> points_{};
};

// Square-or-rectangular grayscale face crop, row-major, values in [0,1].
class FaceCrop {
public:
    FaceCrop() = default;
    FaceCrop(int height, int width, std::vector<double> pixels);

    int height() const { return height_; }
    int width() const { return width_; }
    const std::vector<double>& pixels() const { return pixels_; }
    double at(int row, int col) const { return pixels_[static_cast<std::size_t>(row * width_ + col)]; }

    bool operator==(const FaceCrop&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> pixels_;
};

struct Frame {
    std::string utterance_id;
    std::int64_t t_ms = 0;
    FaceCrop face;
    PoseKeypoints pose;

    bool operator==(const Frame&) const = default;
};

// Labeled span of frames from one speaker. The constructor enforces the
// stream invariants: at least one frame, a shared utterance id, and t_ms
// increasing in exact 80 ms steps.
class Utterance {
public:
    Utterance(std::string id, AddresseeClass label, std::string speaker_id,
              std::vector<Frame> frames);

    const std::string& id() const { return id_; }
    AddresseeClass label() const { return label_; }
    const std::string& speaker_id() const { return speaker_id_; }
    const std::vector<Frame>& frames() const { return frames_; }
    std::size_t size() const { return frames_.size(); }

    bool operator==(const Utterance&) const = default;

private:
    std::string id_;
    AddresseeClass label_;
    std::string speaker_id_;
    std::vector<Frame> frames_;
};

struct Estimate {
    ClassVector logp{};
    AddresseeClass predicted = AddresseeClass::Robot;
    double confidence = 0.0;
    std::int64_t t_emit_ms = 0;
};

// Throws InvalidInput on non-finite values. Normalizes after exponentiation so
// the result always sums to one.
ClassVector probs_from_log(const ClassVector& logp);

// Ties resolve to the lowest class code.
AddresseeClass argmax_class(const ClassVector& probs);

// Builds a consistent Estimate from log-probabilities.
Estimate make_estimate(const ClassVector& logp, std::int64_t t_emit_ms = 0);

}  // namespace ae
