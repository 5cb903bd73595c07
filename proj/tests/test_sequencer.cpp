#include "ae/sequencer.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ae;

TEST_CASE("sequence count") {
    CHECK(sequence_count(1) == 1);
    CHECK(sequence_count(9) == 1);
    CHECK(sequence_count(10) == 1);
    CHECK(sequence_count(19) == 1);
    CHECK(sequence_count(20) == 2);
    CHECK(sequence_count(35) == 3);
    for (std::size_t n = 1; n <= 200; ++n) CHECK(sequence_count(n) == std::max<std::size_t>(1, n / 10));
}

TEST_CASE("windows are non-overlapping with the remainder dropped") {
    const auto u = testing::random_utterance("u", AddresseeClass::Left, 35, 4, 1);
    const auto seqs = window_utterance(u);
    REQUIRE(seqs.size() == 3);
    for (std::size_t s = 0; s < 3; ++s) {
        CHECK(seqs[s].index == static_cast<int>(s));
        CHECK_FALSE(seqs[s].padded);
        REQUIRE(seqs[s].frames.size() == 10);
        for (std::size_t i = 0; i < 10; ++i) CHECK(seqs[s].frames[i] == u.frames()[s * 10 + i]);
    }
}

TEST_CASE("short utterances are padded with the last frame") {
    const auto u = testing::random_utterance("u", AddresseeClass::Robot, 7, 4, 2);
    const auto seqs = window_utterance(u);
    REQUIRE(seqs.size() == 1);
    CHECK(seqs[0].padded);
    REQUIRE(seqs[0].frames.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        const auto& f = seqs[0].frames[i];
        CHECK(f.t_ms == static_cast<std::int64_t>(i) * kFramePeriodMs);
        CHECK(f.face == u.frames()[std::min<std::size_t>(i, 6)].face);
        CHECK(f.pose == u.frames()[std::min<std::size_t>(i, 6)].pose);
    }
}

TEST_CASE("batch and stream sequencers agree for every length up to 200") {
    for (int n = 1; n <= 200; ++n) {
        const auto u = testing::random_utterance("u" + std::to_string(n), AddresseeClass::Right, n, 2, n, 1000);
        const auto batch = window_utterance(u);
        CHECK(batch.size() == sequence_count(static_cast<std::size_t>(n)));
        StreamSequencer s;
        s.begin(u.id());
        std::vector<Sequence> streamed;
        for (const auto& f : u.frames()) {
            if (auto seq = s.push_frame(f)) streamed.push_back(std::move(*seq));
        }
        if (auto seq = s.flush()) streamed.push_back(std::move(*seq));
        CHECK(streamed == batch);
        CHECK(s.buffered() == 0);
    }
}

TEST_CASE("stream sequencer emits on the tenth frame and resets on flush") {
    const auto u = testing::random_utterance("u", AddresseeClass::Left, 25, 2, 3);
    StreamSequencer s;
    s.begin("u");
    int emitted = 0;
    for (int i = 0; i < 25; ++i) {
        const bool out = s.push_frame(u.frames()[static_cast<std::size_t>(i)]).has_value();
        CHECK(out == ((i + 1) % 10 == 0));
        emitted += out;
    }
    CHECK(emitted == 2);
    CHECK(s.buffered() == 5);
    CHECK_FALSE(s.flush().has_value());
    CHECK_FALSE(s.current_utterance().has_value());
    CHECK(s.emitted() == 0);
}

TEST_CASE("frames from another utterance are rejected") {
    const auto a = testing::random_utterance("a", AddresseeClass::Left, 3, 2, 3);
    const auto b = testing::random_utterance("b", AddresseeClass::Left, 3, 2, 4);
    StreamSequencer s;
    s.begin("a");
    s.push_frame(a.frames()[0]);
    try {
        s.push_frame(b.frames()[0]);
        FAIL("expected a sequencing error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Sequencing);
    }
}
