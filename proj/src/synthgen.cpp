#include "ae/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace ae::synth {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kMaxYawDeg = 90.0;
constexpr double kFocal = 0.6;            // normalized focal length
constexpr double kShoulderHalfWidth = 0.2; // meters
constexpr double kShoulderTilt = 0.3;      // vertical parallax of the far shoulder
constexpr double kVisibleConfidence = 0.9;
constexpr double kEarOcclusionDeg = 45.0;

// Divides by the level count so the result is the double nearest to k/levels.
double quantize(double v, double levels) { return std::round(v * levels) / levels; }

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::string padded_id(const char* prefix, int i) {
    std::string digits = std::to_string(i);
    if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
    return prefix + digits;
}

bool valid_range(const Range& r) { return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi; }

bool valid_prob(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

double face_intensity(double col, double row, int size, double yaw_rad) {
    const double c = 0.5 * (size - 1);
    const double s = size / 24.0;
    const double dx = col - c;
    const double dy = row - c;

    // Soft elliptical head.
    const double a = 9.0 * s;
    const double b = 11.0 * s;
    const double r = std::sqrt((dx / a) * (dx / a) + (dy / b) * (dy / b));
    double v = 0.6 / (1.0 + std::exp(-8.0 * (1.0 - r)));

    const double shift = -5.0 * s * std::sin(yaw_rad);
    const double eye_sep = 3.5 * s * std::cos(yaw_rad);
    auto blob = [&](double bx, double by, double sigma) {
        const double ex = col - bx;
        const double ey = row - by;
        return std::exp(-(ex * ex + ey * ey) / (2.0 * sigma * sigma));
    };
    const double eye_row = c - 2.5 * s;
    v -= 0.45 * blob(c + shift - eye_sep, eye_row, 1.2 * s);
    v -= 0.45 * blob(c + shift + eye_sep, eye_row, 1.2 * s);
    v += 0.35 * blob(c + 1.3 * shift, c + 1.5 * s, 1.4 * s);
    v -= 0.25 * blob(c + shift, c + 5.5 * s, 1.3 * s);
    return v;
}

}  // namespace

void ScenarioConfig::validate() const {
    auto bad = [](const std::string& what) { fail(ErrorKind::Config, "scenario config: " + what); };
    if (n_utterances <= 0) bad("n_utterances must be positive");
    double sum = 0.0;
    for (double m : class_mix) {
        if (!std::isfinite(m) || m < 0.0) bad("class_mix entries must be non-negative");
        sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-9) bad("class_mix must sum to 1");
    if (!valid_range(utterance_len_ms) || utterance_len_ms.lo < kFramePeriodMs) {
        bad("utterance_len_ms must be a non-empty range starting at >= 80 ms");
    }
    if (!valid_range(glance_len_ms) || glance_len_ms.lo < 0.0) bad("glance_len_ms must be a non-empty range");
    if (!valid_range(speaker_depth_m) || speaker_depth_m.lo <= bystander_depth_m) {
        bad("speaker_depth_m must be a non-empty range in front of the bystanders");
    }
    if (!std::isfinite(yaw_noise_deg) || yaw_noise_deg < 0.0) bad("yaw_noise_deg must be >= 0");
    if (!valid_prob(object_glance_prob)) bad("object_glance_prob must be in [0,1]");
    if (!valid_prob(keypoint_dropout)) bad("keypoint_dropout must be in [0,1]");
    if (face_size < 4) bad("face_size must be >= 4");
    if (!std::isfinite(pixel_noise) || pixel_noise < 0.0) bad("pixel_noise must be >= 0");
    if (!std::isfinite(keypoint_noise) || keypoint_noise < 0.0) bad("keypoint_noise must be >= 0");
    if (n_speakers <= 0) bad("n_speakers must be positive");
    if (!std::isfinite(bystander_lateral_m) || bystander_lateral_m <= 0.0) bad("bystander_lateral_m must be positive");
}

SceneGeometry default_geometry(const ScenarioConfig& config, double speaker_depth_m) {
    SceneGeometry g;
    g.speaker = {0.0, speaker_depth_m};
    g.left_bystander = {-config.bystander_lateral_m, config.bystander_depth_m};
    g.right_bystander = {config.bystander_lateral_m, config.bystander_depth_m};
    g.objects = {{-0.75, 0.75}, {0.75, 0.75}, {-0.4, 1.1}, {0.4, 1.1}};
    return g;
}

double azimuth_deg(const Point2& speaker, const Point2& target) {
    // The speaker faces the robot (toward -depth); a target toward negative
    // lateral (robot's left) yields positive yaw.
    const double lateral = target.lateral - speaker.lateral;
    const double toward_robot = speaker.depth - target.depth;
    return std::atan2(-lateral, toward_robot) / kDegToRad;
}

const Point2& addressee_position(const SceneGeometry& geometry, AddresseeClass label) {
    static const Point2 robot{0.0, 0.0};
    switch (label) {
        case AddresseeClass::Left: return geometry.left_bystander;
        case AddresseeClass::Right: return geometry.right_bystander;
        case AddresseeClass::Robot: break;
    }
    return robot;
}

YawTrajectory head_yaw_trajectory(AddresseeClass label, const SceneGeometry& geometry,
                                  const ScenarioConfig& config, int n_frames, Rng& rng) {
    const double base = azimuth_deg(geometry.speaker, addressee_position(geometry, label));
    YawTrajectory traj;
    traj.head_deg.resize(static_cast<std::size_t>(n_frames));
    traj.torso_deg.resize(static_cast<std::size_t>(n_frames));
    for (int i = 0; i < n_frames; ++i) {
        const double yaw = config.yaw_noise_deg > 0.0 ? rng.normal(base, config.yaw_noise_deg) : base;
        traj.head_deg[i] = std::clamp(yaw, -kMaxYawDeg, kMaxYawDeg);
        traj.torso_deg[i] = 0.5 * traj.head_deg[i];
    }

    if (!geometry.objects.empty() && config.object_glance_prob > 0.0 && rng.bernoulli(config.object_glance_prob)) {
        const auto& object = geometry.objects[rng.uniform_index(geometry.objects.size())];
        const double object_yaw = azimuth_deg(geometry.speaker, object);
        const double len_ms = rng.uniform(config.glance_len_ms.lo, config.glance_len_ms.hi);
        const int len = std::clamp(static_cast<int>(std::lround(len_ms / kFramePeriodMs)), 1, n_frames);
        const int start = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_frames - len + 1)));
        for (int i = start; i < start + len; ++i) {
            const double yaw = config.yaw_noise_deg > 0.0 ? rng.normal(object_yaw, config.yaw_noise_deg) : object_yaw;
            traj.head_deg[i] = std::clamp(yaw, -kMaxYawDeg, kMaxYawDeg);
        }
    }
    return traj;
}

RenderedFrame render_frame(double head_yaw_deg, double torso_yaw_deg, const Placement& placement,
                           const ScenarioConfig& config, Rng& rng) {
    if (std::abs(head_yaw_deg) > kMaxYawDeg || std::abs(torso_yaw_deg) > kMaxYawDeg) {
        fail(ErrorKind::InvalidInput, "yaw outside [-90, 90] degrees");
    }
    const double head = head_yaw_deg * kDegToRad;
    const double torso = torso_yaw_deg * kDegToRad;

    const int n = config.face_size;
    std::vector<double> pixels(static_cast<std::size_t>(n) * n);
    for (int row = 0; row < n; ++row) {
        for (int col = 0; col < n; ++col) {
            double v = face_intensity(col, row, n, head);
            if (config.pixel_noise > 0.0) v += rng.normal(0.0, config.pixel_noise);
            pixels[static_cast<std::size_t>(row * n + col)] = clamp01(v);
        }
    }

    // Stick figure. The person's right side appears on the image left.
    const double scale = kFocal / placement.depth_m;
    const double neck_x = 0.5 + scale * placement.lateral_m;
    const double neck_y = 0.4;
    const double sh = scale * kShoulderHalfWidth;
    const double sx = sh * std::cos(torso);
    const double sy = kShoulderTilt * sh * std::sin(torso);
    const double arm = 1.3 * sh;
    const double hip = 0.6 * sh;
    const double torso_len = 2.6 * sh;
    const double leg = 2.2 * sh;
    const double head_r = 0.55 * sh;
    const double head_up = 1.1 * sh;
    const double hs = std::sin(head);
    const double hc = std::cos(head);

    std::array<KeypointSample, kNumKeypoints> pts{};
    auto set = [&](Keypoint k, double x, double y) {
        pts[static_cast<std::size_t>(k)] = {x, y, kVisibleConfidence};
    };
    set(Keypoint::Neck, neck_x, neck_y);
    set(Keypoint::Nose, neck_x - head_r * hs, neck_y - head_up);
    set(Keypoint::REye, neck_x - head_r * hs - 0.35 * head_r * hc, neck_y - head_up - 0.3 * head_r);
    set(Keypoint::LEye, neck_x - head_r * hs + 0.35 * head_r * hc, neck_y - head_up - 0.3 * head_r);
    set(Keypoint::REar, neck_x - 0.8 * head_r * hc + 0.3 * head_r * hs, neck_y - head_up);
    set(Keypoint::LEar, neck_x + 0.8 * head_r * hc + 0.3 * head_r * hs, neck_y - head_up);
    set(Keypoint::RShoulder, neck_x - sx, neck_y - sy);
    set(Keypoint::LShoulder, neck_x + sx, neck_y + sy);
    set(Keypoint::RElbow, neck_x - 1.1 * sx, neck_y - sy + arm);
    set(Keypoint::LElbow, neck_x + 1.1 * sx, neck_y + sy + arm);
    set(Keypoint::RWrist, neck_x - 1.0 * sx, neck_y - sy + 2.0 * arm);
    set(Keypoint::LWrist, neck_x + 1.0 * sx, neck_y + sy + 2.0 * arm);
    const double hx = hip * std::cos(torso);
    const double hy = kShoulderTilt * hip * std::sin(torso);
    set(Keypoint::RHip, neck_x - hx, neck_y + torso_len - hy);
    set(Keypoint::LHip, neck_x + hx, neck_y + torso_len + hy);
    set(Keypoint::RKnee, neck_x - hx, neck_y + torso_len + leg - hy);
    set(Keypoint::LKnee, neck_x + hx, neck_y + torso_len + leg + hy);
    set(Keypoint::RAnkle, neck_x - hx, neck_y + torso_len + 2.0 * leg - hy);
    set(Keypoint::LAnkle, neck_x + hx, neck_y + torso_len + 2.0 * leg + hy);

    // Turning toward the image left hides the right ear, and vice versa.
    if (head_yaw_deg > kEarOcclusionDeg) pts[static_cast<int>(Keypoint::REar)] = {};
    if (head_yaw_deg < -kEarOcclusionDeg) pts[static_cast<int>(Keypoint::LEar)] = {};

    for (auto& p : pts) {
        if (!p.present()) continue;
        if (config.keypoint_noise > 0.0) {
            p.x += rng.normal(0.0, config.keypoint_noise);
            p.y += rng.normal(0.0, config.keypoint_noise);
        }
        if (p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0) p = {};  // out of view
    }
    for (auto& p : pts) {
        if (config.keypoint_dropout > 0.0 && rng.bernoulli(config.keypoint_dropout)) p = {};
    }
    return {FaceCrop(n, n, std::move(pixels)), PoseKeypoints(pts)};
}

std::array<int, kNumClasses> class_counts(int n, const ClassVector& mix) {
    std::array<int, kNumClasses> counts{};
    std::array<double, kNumClasses> remainder{};
    int assigned = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        const double exact = n * mix[c];
        counts[c] = static_cast<int>(std::floor(exact));
        remainder[c] = exact - counts[c];
        assigned += counts[c];
    }
    std::array<int, kNumClasses> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b]; });
    for (int i = 0; assigned < n; i = (i + 1) % kNumClasses) {
        counts[order[i]] += 1;
        ++assigned;
    }
    return counts;
}

std::vector<Utterance> generate(const ScenarioConfig& config) {
    config.validate();

    Rng label_rng(mix_seed(config.seed, 0));
    const auto counts = class_counts(config.n_utterances, config.class_mix);
    std::vector<AddresseeClass> labels;
    labels.reserve(static_cast<std::size_t>(config.n_utterances));
    for (int c = 0; c < kNumClasses; ++c) {
        labels.insert(labels.end(), static_cast<std::size_t>(counts[c]), class_from_index(c));
    }
    label_rng.shuffle(labels);

    std::vector<Utterance> out;
    out.reserve(labels.size());
    for (int u = 0; u < config.n_utterances; ++u) {
        // Every utterance draws from its own stream so utterances can be
        // generated independently.
        Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(u) + 1));
        const std::string id = padded_id("u", u);
        const AddresseeClass label = labels[static_cast<std::size_t>(u)];
        const double len_ms = rng.uniform(config.utterance_len_ms.lo, config.utterance_len_ms.hi);
        const int n_frames = std::max(1, static_cast<int>(std::floor(len_ms / kFramePeriodMs)));
        const double depth = rng.uniform(config.speaker_depth_m.lo, config.speaker_depth_m.hi);
        const SceneGeometry geometry = default_geometry(config, depth);
        const YawTrajectory traj = head_yaw_trajectory(label, geometry, config, n_frames, rng);
        const Placement placement{geometry.speaker.lateral, geometry.speaker.depth};

        std::vector<Frame> frames;
        frames.reserve(static_cast<std::size_t>(n_frames));
        for (int i = 0; i < n_frames; ++i) {
            RenderedFrame r = render_frame(traj.head_deg[i], traj.torso_deg[i], placement, config, rng);
            // Stored precision: 1e-3 for pixels, 1e-4 for keypoints. The
            // quantized values survive a JSON round trip unchanged.
            std::vector<double> px = r.face.pixels();
            for (double& v : px) v = quantize(v, 1000.0);
            auto flat = r.pose.flat();
            std::vector<double> pose(flat.begin(), flat.end());
            for (double& v : pose) v = quantize(v, 10000.0);
            frames.push_back(Frame{id, static_cast<std::int64_t>(i) * kFramePeriodMs,
                                   FaceCrop(r.face.height(), r.face.width(), std::move(px)),
                                   PoseKeypoints::from_flat(pose)});
        }
        out.emplace_back(id, label, padded_id("s", u % config.n_speakers), std::move(frames));
    }
    return out;
}

}  // namespace ae::synth
