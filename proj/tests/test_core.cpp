#include <cmath>
#include <limits>

#include "ae/core.hpp"
#include "ae/rng.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ae;

TEST_CASE("class codes and names are stable") {
    CHECK(class_index(AddresseeClass::Robot) == 0);
    CHECK(class_index(AddresseeClass::Left) == 1);
    CHECK(class_index(AddresseeClass::Right) == 2);
    for (auto c : kAllClasses) {
        CHECK(class_from_index(class_index(c)) == c);
        CHECK(class_from_name(class_name(c)) == c);
    }
    CHECK(class_name(AddresseeClass::Left) == "LEFT");
    CHECK_THROWS_AS(class_from_index(3), Error);
    CHECK_THROWS_AS(class_from_name("UP"), Error);
}

TEST_CASE("probs_from_log examples") {
    const double third = std::log(1.0 / 3.0);
    const auto u = probs_from_log({third, third, third});
    for (double p : u) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    const auto sat = probs_from_log({0.0, -50.0, -50.0});
    CHECK(sat[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(sat[1] == doctest::Approx(std::exp(-50.0)).epsilon(1e-9));
    CHECK(sat[1] > 0.0);

    const auto p = probs_from_log({std::log(0.7), std::log(0.2), std::log(0.1)});
    CHECK(p[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(0.1).epsilon(1e-12));

    CHECK_THROWS_AS(probs_from_log({std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0}), Error);
    CHECK_THROWS_AS(probs_from_log({-std::numeric_limits<double>::infinity(), 0.0, 0.0}), Error);
}

TEST_CASE("probs_from_log inverts log on random distributions") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        ClassVector q{rng.uniform(1e-6, 1.0), rng.uniform(1e-6, 1.0), rng.uniform(1e-6, 1.0)};
        const double s = q[0] + q[1] + q[2];
        for (auto& v : q) v /= s;
        const auto back = probs_from_log({std::log(q[0]), std::log(q[1]), std::log(q[2])});
        double sum = 0.0;
        for (int k = 0; k < 3; ++k) {
            CHECK(std::abs(back[k] - q[k]) < 1e-9);
            sum += back[k];
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("argmax_class tie-break and scale invariance") {
    CHECK(argmax_class({0.5, 0.3, 0.2}) == AddresseeClass::Robot);
    CHECK(argmax_class({0.4, 0.4, 0.2}) == AddresseeClass::Robot);
    CHECK(argmax_class({1.0 / 3, 1.0 / 3, 1.0 / 3}) == AddresseeClass::Robot);
    CHECK(argmax_class({0.2, 0.4, 0.4}) == AddresseeClass::Left);
    CHECK(argmax_class({0.1, 0.2, 0.7}) == AddresseeClass::Right);

    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        ClassVector p{rng.uniform(), rng.uniform(), rng.uniform()};
        if (i % 3 == 0) p[2] = p[1];  // exercise ties
        const double scale = std::ldexp(1.0, static_cast<int>(rng.uniform_index(40)) - 20);
        CHECK(argmax_class(p) == argmax_class({p[0] * scale, p[1] * scale, p[2] * scale}));
    }
}

TEST_CASE("make_estimate is consistent") {
    const auto e = make_estimate({std::log(0.2), std::log(0.5), std::log(0.3)}, 880);
    CHECK(e.predicted == AddresseeClass::Left);
    CHECK(e.confidence == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(e.t_emit_ms == 880);
}

TEST_CASE("pose keypoints validate ranges and round-trip the flat layout") {
    std::vector<double> flat(kPoseValues, 0.0);
    flat[3] = 0.25;
    flat[4] = 0.75;
    flat[5] = 0.9;
    const auto p = PoseKeypoints::from_flat(flat);
    CHECK(p[Keypoint::Neck].x == 0.25);
    CHECK(p[Keypoint::Neck].present());
    CHECK_FALSE(p[Keypoint::Nose].present());
    const auto back = p.flat();
    CHECK(std::vector<double>(back.begin(), back.end()) == flat);

    flat[3] = 1.5;
    CHECK_THROWS_AS(PoseKeypoints::from_flat(flat), Error);
    CHECK_THROWS_AS(PoseKeypoints::from_flat(std::vector<double>(53, 0.0)), Error);
}

TEST_CASE("face crops reject out-of-range pixels and bad shapes") {
    CHECK_NOTHROW(FaceCrop(2, 2, {0.0, 0.5, 1.0, 0.25}));
    CHECK_THROWS_AS(FaceCrop(2, 2, {0.0, 0.5, 1.1, 0.25}), Error);
    CHECK_THROWS_AS(FaceCrop(2, 2, {0.0, 0.5, std::nan(""), 0.25}), Error);
    CHECK_THROWS_AS(FaceCrop(2, 2, {0.0, 0.5, 1.0}), Error);
}

TEST_CASE("utterances enforce frame stream invariants") {
    Rng rng(1);
    auto f = [&](const std::string& id, std::int64_t t) { return testing::random_frame(id, t, 4, rng); };
    CHECK_NOTHROW(Utterance("u", AddresseeClass::Robot, "s", {f("u", 0), f("u", 80), f("u", 160)}));
    CHECK_THROWS_AS(Utterance("u", AddresseeClass::Robot, "s", {}), Error);
    CHECK_THROWS_AS(Utterance("u", AddresseeClass::Robot, "s", {f("u", 0), f("u", 0)}), Error);
    CHECK_THROWS_AS(Utterance("u", AddresseeClass::Robot, "s", {f("u", 80), f("u", 0)}), Error);
    CHECK_THROWS_AS(Utterance("u", AddresseeClass::Robot, "s", {f("u", 0), f("u", 120)}), Error);
    CHECK_THROWS_AS(Utterance("u", AddresseeClass::Robot, "s", {f("u", 0), f("v", 80)}), Error);
    try {
        Utterance("u", AddresseeClass::Robot, "s", {});
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidInput);
    }
}

TEST_CASE("rng is reproducible and sub-seeds differ") {
    Rng a(99), b(99);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(mix_seed(1, 0) != mix_seed(1, 1));
    CHECK(mix_seed(1, 0) != mix_seed(2, 0));
    Rng r(3);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(r.uniform_index(7) < 7);
    }
}
