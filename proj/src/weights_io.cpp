#include "ae/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace ae::nn {
namespace {

constexpr char kMagic[4] = {'A', 'E', 'W', '1'};

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename U>
    void uint(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) fail(ErrorKind::Format, "weights file is truncated");
    }
    template <typename U>
    U uint() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(in_[pos_ + i]) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == in_.size(); }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_weights(const ModelWeights& weights) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.uint<std::uint32_t>(weights.format_version);
    w.uint<std::uint64_t>(weights.config_hash);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(weights.tensors.size()));
    for (const auto& [name, t] : weights.tensors) {
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) w.uint<std::uint64_t>(d);
        for (double v : t.values()) w.f64(v);
    }
    return w.take();
}

ModelWeights decode_weights(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (r.str(4) != std::string(kMagic, 4)) fail(ErrorKind::Format, "not an AEW1 weights file (bad magic)");
    ModelWeights out;
    out.format_version = r.uint<std::uint32_t>();
    if (out.format_version != kWeightsFormatVersion) {
        fail(ErrorKind::Format, "unsupported weights format version " + std::to_string(out.format_version));
    }
    out.config_hash = r.uint<std::uint64_t>();
    const auto count = r.uint<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.uint<std::uint32_t>();
        std::string name = r.str(name_len);
        const auto rank = r.uint<std::uint32_t>();
        r.need(static_cast<std::size_t>(rank) * 8);
        std::vector<std::size_t> shape(rank);
        std::size_t n = 1;
        for (auto& d : shape) {
            d = static_cast<std::size_t>(r.uint<std::uint64_t>());
            if (d != 0 && n > r.remaining() / d) fail(ErrorKind::Format, "weights file is truncated");
            n *= d;
        }
        r.need(n * 8);
        std::vector<double> data(n);
        for (double& v : data) v = r.f64();
        if (!out.tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(data))).second) {
            fail(ErrorKind::Format, "duplicate tensor name in weights file");
        }
    }
    if (!r.done()) fail(ErrorKind::Format, "trailing bytes after weights");
    return out;
}

void save_weights(const ModelWeights& weights, const std::filesystem::path& path) {
    const auto bytes = encode_weights(weights);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write weights " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "failed writing weights " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path, const ModelConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read weights " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ModelWeights w = decode_weights(bytes);
    if (w.config_hash != config.hash()) {
        fail(ErrorKind::ConfigMismatch, "weights " + path.string() + " were trained with a different model config");
    }
    Network check(config, w);  // names and shapes
    return w;
}

}  // namespace ae::nn
