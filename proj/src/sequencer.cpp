#include "ae/sequencer.hpp"

namespace ae {
namespace {

Sequence pad_sequence(const std::string& id, std::vector<Frame> frames) {
    const Frame last = frames.back();
    for (std::int64_t k = 1; frames.size() < kSequenceLength; ++k) {
        Frame f = last;
        f.t_ms = last.t_ms + k * kFramePeriodMs;
        frames.push_back(std::move(f));
    }
    return Sequence{id, 0, std::move(frames), true};
}

}  // namespace

std::size_t sequence_count(std::size_t n_frames) {
    return std::max<std::size_t>(1, n_frames / kSequenceLength);
}

std::vector<Sequence> window_utterance(const Utterance& utterance) {
    const auto& frames = utterance.frames();
    if (frames.empty()) fail(ErrorKind::InvalidInput, "cannot window an empty utterance");
    if (frames.size() < kSequenceLength) {
        return {pad_sequence(utterance.id(), frames)};
    }
    std::vector<Sequence> out;
    const std::size_t n = frames.size() / kSequenceLength;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        auto first = frames.begin() + static_cast<std::ptrdiff_t>(s * kSequenceLength);
        out.push_back(Sequence{utterance.id(), static_cast<int>(s),
                               std::vector<Frame>(first, first + kSequenceLength), false});
    }
    return out;
}

void StreamSequencer::begin(const std::string& utterance_id) {
    if (utterance_id_ && *utterance_id_ != utterance_id) {
        fail(ErrorKind::Sequencing, "utterance '" + utterance_id + "' opened while '" + *utterance_id_ +
                                        "' is still active");
    }
    utterance_id_ = utterance_id;
}

std::optional<Sequence> StreamSequencer::push_frame(const Frame& frame) {
    if (!utterance_id_) {
        utterance_id_ = frame.utterance_id;
    } else if (frame.utterance_id != *utterance_id_) {
        fail(ErrorKind::Sequencing, "frame from utterance '" + frame.utterance_id + "' pushed while '" +
                                        *utterance_id_ + "' is active");
    }
    buffer_.push_back(frame);
    if (buffer_.size() < kSequenceLength) return std::nullopt;

    Sequence seq{*utterance_id_, emitted_, std::move(buffer_), false};
    buffer_.clear();
    ++emitted_;
    return seq;
}

std::optional<Sequence> StreamSequencer::flush() {
    std::optional<Sequence> out;
    if (!buffer_.empty() && emitted_ == 0) {
        out = pad_sequence(*utterance_id_, std::move(buffer_));
    }
    buffer_.clear();
    utterance_id_.reset();
    emitted_ = 0;
    return out;
}

}  // namespace ae
