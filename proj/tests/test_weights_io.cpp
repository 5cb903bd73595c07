#include <cstring>
#include <filesystem>
#include <fstream>

#include "ae/weights_io.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ae;
using namespace ae::nn;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("ae_test_" + name);
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::Io;
}

}  // namespace

TEST_CASE("weights round-trip bit-exactly") {
    const auto c = testing::small_config();
    Rng rng(1);
    auto w = testing::random_weights(c, rng, 1.0);
    w.config_hash = c.hash();
    // Values that text formats tend to mangle.
    w.tensors.at("output.bias")[0] = 0.1;
    w.tensors.at("output.bias")[1] = -0.0;
    w.tensors.at("output.bias")[2] = 5e-324;
    const auto bytes = encode_weights(w);
    const auto back = decode_weights(bytes);
    CHECK(back.config_hash == w.config_hash);
    CHECK(back.format_version == kWeightsFormatVersion);
    REQUIRE(back.tensors.size() == w.tensors.size());
    for (const auto& [name, t] : w.tensors) {
        const auto& u = back.at(name);
        CHECK(u.shape() == t.shape());
        CHECK(std::memcmp(u.data(), t.data(), t.size() * sizeof(double)) == 0);
    }
    CHECK(encode_weights(back) == bytes);

    const auto path = temp_path("roundtrip.aew");
    save_weights(w, path);
    const auto loaded = load_weights(path, c);
    CHECK(encode_weights(loaded) == bytes);
    std::filesystem::remove(path);
}

TEST_CASE("header layout is little-endian AEW1") {
    const auto c = testing::micro_config();
    const auto w = init_weights(c, 3);
    const auto b = encode_weights(w);
    REQUIRE(b.size() > 20);
    CHECK(std::string(b.begin(), b.begin() + 4) == "AEW1");
    CHECK(b[4] == 1);
    CHECK(b[5] == 0);
    std::uint64_t h = 0;
    for (int i = 0; i < 8; ++i) h |= static_cast<std::uint64_t>(b[8 + i]) << (8 * i);
    CHECK(h == c.hash());
    std::uint32_t count = 0;
    for (int i = 0; i < 4; ++i) count |= static_cast<std::uint32_t>(b[16 + i]) << (8 * i);
    CHECK(count == w.tensors.size());
    std::size_t expected = 20;
    for (const auto& [name, t] : w.tensors) expected += 4 + name.size() + 4 + 8 * t.rank() + 8 * t.size();
    CHECK(b.size() == expected);
}

TEST_CASE("corrupt files are format errors") {
    const auto c = testing::micro_config();
    const auto bytes = encode_weights(init_weights(c, 3));
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, std::size_t{25}, bytes.size() - 1}) {
        std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        CHECK(kind_of([&] { decode_weights(t); }) == ErrorKind::Format);
    }
    auto magic = bytes;
    magic[0] = 'X';
    CHECK(kind_of([&] { decode_weights(magic); }) == ErrorKind::Format);
    auto version = bytes;
    version[4] = 2;
    CHECK(kind_of([&] { decode_weights(version); }) == ErrorKind::Format);
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK(kind_of([&] { decode_weights(trailing); }) == ErrorKind::Format);
}

TEST_CASE("loading refuses a different config") {
    const auto c = testing::small_config();
    auto other = c;
    other.fusion_units = 7;
    const auto path = temp_path("mismatch.aew");
    save_weights(init_weights(c, 1), path);
    CHECK(kind_of([&] { load_weights(path, other); }) == ErrorKind::ConfigMismatch);
    std::filesystem::remove(path);
    CHECK(kind_of([&] { load_weights(temp_path("does_not_exist.aew"), c); }) == ErrorKind::Io);
}
