#pragma once

// Cuts frame streams into the model's fixed 10-frame inputs. Windows are
// non-overlapping; a trailing partial window is dropped unless it is the only
// one, in which case it is padded by repeating the last frame.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ae/core.hpp"

namespace ae {

struct Sequence {
    std::string utterance_id;
    int index = 0;
    std::vector<Frame> frames;
    bool padded = false;

    bool operator==(const Sequence&) const = default;
};

// max(1, floor(n / 10))
std::size_t sequence_count(std::size_t n_frames);

std::vector<Sequence> window_utterance(const Utterance& utterance);

// Streaming counterpart of window_utterance for one tracked speaker. Emits
// byte-identical sequences when fed the same frames followed by flush().
class StreamSequencer {
public:
    // Opens `utterance_id` explicitly. Frames pushed without an open utterance
    // adopt their own id.
    void begin(const std::string& utterance_id);

    // Emits a sequence exactly when the 10th buffered frame arrives.
    std::optional<Sequence> push_frame(const Frame& frame);

    // End of utterance: pads and emits the buffer only if nothing was emitted
    // yet, otherwise drops it. Always resets.
    std::optional<Sequence> flush();

    const std::optional<std::string>& current_utterance() const { return utterance_id_; }
    std::size_t buffered() const { return buffer_.size(); }
    int emitted() const { return emitted_; }

private:
    std::optional<std::string> utterance_id_;
    std::vector<Frame> buffer_;
    int emitted_ = 0;
};

}  // namespace ae
