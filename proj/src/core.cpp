#include "ae/core.hpp"

#include <cmath>
#include <sstream>

namespace ae {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid input";
        case ErrorKind::Config: return "config error";
        case ErrorKind::ConfigMismatch: return "config mismatch";
        case ErrorKind::Numeric: return "numeric error";
        case ErrorKind::Format: return "format error";
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::Sequencing: return "sequencing error";
        case ErrorKind::Protocol: return "protocol error";
        case ErrorKind::Training: return "training error";
        case ErrorKind::Io: return "io error";
    }
    return "error";
}

AddresseeClass class_from_index(int code) {
    if (code < 0 || code >= kNumClasses) {
        fail(ErrorKind::InvalidInput, "addressee class code out of range: " + std::to_string(code));
    }
    return static_cast<AddresseeClass>(code);
}

std::string_view class_name(AddresseeClass c) {
    switch (c) {
        case AddresseeClass::Robot: return "ROBOT";
        case AddresseeClass::Left: return "LEFT";
        case AddresseeClass::Right: return "RIGHT";
    }
    return "?";
}

AddresseeClass class_from_name(std::string_view name) {
    for (auto c : kAllClasses) {
        if (class_name(c) == name) return c;
    }
    fail(ErrorKind::InvalidInput, "unknown addressee class '" + std::string(name) + "'");
}

PoseKeypoints::PoseKeypoints(const std::array<KeypointSample, kNumKeypoints>& points)
    : points_(points) {
    for (int i = 0; i < kNumKeypoints; ++i) {
        const auto& p = points_[static_cast<std::size_t>(i)];
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.c) || p.c < 0.0 || p.c > 1.0) {
            fail(ErrorKind::InvalidInput, "keypoint " + std::to_string(i) + " out of range");
        }
        if (p.c > 0.0 && (p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0)) {
            fail(ErrorKind::InvalidInput, "keypoint " + std::to_string(i) + " outside the image");
        }
    }
}

PoseKeypoints PoseKeypoints::from_flat(const std::vector<double>& values) {
    if (values.size() != kPoseValues) {
        fail(ErrorKind::InvalidInput, "pose must have 54 values, got " + std::to_string(values.size()));
    }
    std::array<KeypointSample, kNumKeypoints> pts{};
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        pts[i] = {values[3 * i], values[3 * i + 1], values[3 * i + 2]};
    }
    return PoseKeypoints(pts);
}

std::array<double, kPoseValues> PoseKeypoints::flat() const {
    std::array<double, kPoseValues> out{};
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        out[3 * i] = points_[i].x;
        out[3 * i + 1] = points_[i].y;
        out[3 * i + 2] = points_[i].c;
    }
    return out;
}

FaceCrop::FaceCrop(int height, int width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
    if (height <= 0 || width <= 0 || pixels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
        fail(ErrorKind::InvalidInput, "face crop shape does not match pixel count");
    }
    for (double v : pixels_) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            fail(ErrorKind::InvalidInput, "face pixel outside [0,1]");
        }
    }
}

Utterance::Utterance(std::string id, AddresseeClass label, std::string speaker_id,
                     std::vector<Frame> frames)
    : id_(std::move(id)), label_(label), speaker_id_(std::move(speaker_id)), frames_(std::move(frames)) {
    if (frames_.empty()) {
        fail(ErrorKind::InvalidInput, "utterance " + id_ + " has no frames");
    }
    for (std::size_t i = 0; i < frames_.size(); ++i) {
        const auto& f = frames_[i];
        if (f.utterance_id != id_) {
            fail(ErrorKind::InvalidInput, "frame " + std::to_string(i) + " belongs to '" + f.utterance_id +
                                              "', not utterance '" + id_ + "'");
        }
        if (i > 0 && f.t_ms != frames_[i - 1].t_ms + kFramePeriodMs) {
            std::ostringstream msg;
            msg << "utterance " << id_ << ": frame " << i << " at t_ms=" << f.t_ms
                << " does not follow " << frames_[i - 1].t_ms << " by " << kFramePeriodMs << " ms";
            fail(ErrorKind::InvalidInput, msg.str());
        }
    }
}

ClassVector probs_from_log(const ClassVector& logp) {
    double hi = logp[0];
    for (double v : logp) {
        if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "non-finite log-probability");
        hi = std::max(hi, v);
    }
    ClassVector p{};
    double sum = 0.0;
    for (int i = 0; i < kNumClasses; ++i) {
        p[i] = std::exp(logp[i] - hi);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

AddresseeClass argmax_class(const ClassVector& probs) {
    int best = 0;
    for (int i = 1; i < kNumClasses; ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return static_cast<AddresseeClass>(best);
}

Estimate make_estimate(const ClassVector& logp, std::int64_t t_emit_ms) {
    const ClassVector p = probs_from_log(logp);
    Estimate e;
    e.logp = logp;
    e.predicted = argmax_class(p);
    e.confidence = p[class_index(e.predicted)];
    e.t_emit_ms = t_emit_ms;
    return e;
}

}  // namespace ae
