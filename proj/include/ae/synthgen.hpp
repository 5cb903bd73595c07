#pragma once

// Synthetic multi-party scenario generator. A speaker stands in front of the
// robot; two bystanders flank the robot and a few objects sit between them.
// Each utterance is addressed to the robot or one bystander, and the speaker's
// head and torso yaw follow the addressee, with optional glances at objects.

#include <cstdint>
#include <utility>
#include <vector>

#include "ae/core.hpp"
#include "ae/rng.hpp"

namespace ae::synth {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct ScenarioConfig {
    int n_utterances = 100;
    ClassVector class_mix{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    Range utterance_len_ms{1000.0, 6000.0};
    double yaw_noise_deg = 5.0;
    double object_glance_prob = 0.3;
    Range glance_len_ms{200.0, 500.0};
    double keypoint_dropout = 0.05;
    Range speaker_depth_m{1.5, 2.5};
    std::uint64_t seed = 0;

    // Rendering knobs beyond the scenario semantics.
    int face_size = kDefaultFaceSize;
    double pixel_noise = 0.05;
    double keypoint_noise = 0.004;
    int n_speakers = 4;
    double bystander_lateral_m = 1.5;
    double bystander_depth_m = 0.25;

    // Throws Config on any violated invariant.
    void validate() const;
};

struct Point2 {
    double lateral = 0.0;  // meters; negative is the robot's left
    double depth = 0.0;    // meters in front of the robot
};

// Robot at the origin looking along +depth.
struct SceneGeometry {
    Point2 speaker;
    Point2 left_bystander;
    Point2 right_bystander;
    std::vector<Point2> objects;
};

SceneGeometry default_geometry(const ScenarioConfig& config, double speaker_depth_m);

// Yaw (degrees) the speaker's head needs to face `target`, in the camera frame:
// 0 means looking at the robot, positive means turned toward the robot's left.
double azimuth_deg(const Point2& speaker, const Point2& target);

const Point2& addressee_position(const SceneGeometry& geometry, AddresseeClass label);

struct YawTrajectory {
    std::vector<double> head_deg;
    std::vector<double> torso_deg;
};

// Per-frame yaw: addressee azimuth + Gaussian noise for the head, half of that
// for the torso. Object glances replace the head yaw for a contiguous segment
// but leave the torso alone.
YawTrajectory head_yaw_trajectory(AddresseeClass label, const SceneGeometry& geometry,
                                  const ScenarioConfig& config, int n_frames, Rng& rng);

struct Placement {
    double lateral_m = 0.0;
    double depth_m = 2.0;
};

struct RenderedFrame {
    FaceCrop face;
    PoseKeypoints pose;
};

// Parametric face pattern and stick-figure pose. Noise and dropout come from
// `config`; with zero noise the output is a pure function of the yaws.
RenderedFrame render_frame(double head_yaw_deg, double torso_yaw_deg, const Placement& placement,
                           const ScenarioConfig& config, Rng& rng);

inline RenderedFrame render_frame(double yaw_deg, const ScenarioConfig& config, Rng& rng) {
    return render_frame(yaw_deg, 0.5 * yaw_deg, Placement{}, config, rng);
}

// Largest-remainder rounding of n * mix.
std::array<int, kNumClasses> class_counts(int n, const ClassVector& mix);

std::vector<Utterance> generate(const ScenarioConfig& config);

}  // namespace ae::synth
