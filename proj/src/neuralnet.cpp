#include "ae/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ae/rng.hpp"

namespace ae::nn {
namespace {

void check_finite(std::span<const double> values, const std::string& layer) {
    for (double v : values) {
        if (!std::isfinite(v)) fail(ErrorKind::Numeric, "non-finite activation in layer " + layer);
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = W x + b with W stored [out][in].
void dense(const Tensor& w, const Tensor& b, const double* x, std::size_t in, double* y) {
    const std::size_t out = b.size();
    for (std::size_t o = 0; o < out; ++o) {
        const double* row = w.data() + o * in;
        double acc = b[o];
        for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

// dW += dy x^T, db += dy, dx (optional) += W^T dy.
void dense_backward(const Tensor& w, const double* x, std::size_t in, const double* dy, std::size_t out,
                    Tensor& dw, Tensor& db, double* dx) {
    for (std::size_t o = 0; o < out; ++o) {
        const double g = dy[o];
        db[o] += g;
        if (g == 0.0) continue;
        double* drow = dw.data() + o * in;
        const double* row = w.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) drow[i] += g * x[i];
        if (dx != nullptr) {
            for (std::size_t i = 0; i < in; ++i) dx[i] += g * row[i];
        }
    }
}

std::string layer_name(const char* prefix, std::size_t i, const char* suffix) {
    return std::string(prefix) + std::to_string(i) + suffix;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
        fail(ErrorKind::InvalidInput, "tensor data length does not match its shape");
    }
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Config

void ModelConfig::validate() const {
    auto bad = [](const std::string& what) { fail(ErrorKind::Config, "model config: " + what); };
    if (face_height <= 0 || face_width <= 0) bad("face dimensions must be positive");
    if (kernel <= 0) bad("kernel must be positive");
    if (conv_filters.empty()) bad("at least one conv layer is required");
    int h = face_height;
    int w = face_width;
    for (std::size_t l = 0; l < conv_filters.size(); ++l) {
        if (conv_filters[l] <= 0) bad("conv filter counts must be positive");
        h = h - kernel + 1;
        w = w - kernel + 1;
        if (h < 2 || w < 2) bad("face too small for conv layer " + std::to_string(l));
        h /= 2;
        w /= 2;
    }
    if (face_dense <= 0) bad("face_dense must be positive");
    if (pose_inputs <= 0 || pose_inputs % 3 != 0) bad("pose_inputs must be a positive multiple of 3");
    for (int u : pose_hidden) {
        if (u <= 0) bad("pose hidden sizes must be positive");
    }
    if (fusion_units <= 0) bad("fusion_units must be positive");
    if (lstm_hidden <= 0) bad("lstm_hidden must be positive");
    if (sequence_length <= 0) bad("sequence_length must be positive");
}

std::string ModelConfig::canonical() const {
    std::ostringstream s;
    s << "face=" << face_height << "x" << face_width << ";conv=";
    for (std::size_t i = 0; i < conv_filters.size(); ++i) s << (i ? "," : "") << conv_filters[i];
    s << ";kernel=" << kernel << ";face_dense=" << face_dense << ";pose_inputs=" << pose_inputs << ";pose_hidden=";
    for (std::size_t i = 0; i < pose_hidden.size(); ++i) s << (i ? "," : "") << pose_hidden[i];
    s << ";fusion=" << fusion_units << ";lstm=" << lstm_hidden << ";steps=" << sequence_length
      << ";classes=" << kNumClasses;
    return s.str();
}

std::uint64_t ModelConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<ModelConfig::ConvShape> ModelConfig::conv_shapes() const {
    std::vector<ConvShape> out;
    int h = face_height;
    int w = face_width;
    int in_ch = 1;
    for (int filters : conv_filters) {
        ConvShape s{};
        s.in_channels = in_ch;
        s.out_channels = filters;
        s.in_h = h;
        s.in_w = w;
        s.conv_h = h - kernel + 1;
        s.conv_w = w - kernel + 1;
        s.pool_h = s.conv_h / 2;
        s.pool_w = s.conv_w / 2;
        out.push_back(s);
        h = s.pool_h;
        w = s.pool_w;
        in_ch = filters;
    }
    return out;
}

int ModelConfig::face_features() const {
    const auto shapes = conv_shapes();
    const auto& last = shapes.back();
    return last.out_channels * last.pool_h * last.pool_w;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> parameter_layout(const ModelConfig& config) {
    config.validate();
    using Shape = std::vector<std::size_t>;
    std::vector<std::pair<std::string, Shape>> out;
    auto z = [](int v) { return static_cast<std::size_t>(v); };
    const auto convs = config.conv_shapes();
    for (std::size_t l = 0; l < convs.size(); ++l) {
        const auto& c = convs[l];
        out.emplace_back(layer_name("face.conv", l, ".weight"),
                         Shape{z(c.out_channels), z(c.in_channels), z(config.kernel), z(config.kernel)});
        out.emplace_back(layer_name("face.conv", l, ".bias"), Shape{z(c.out_channels)});
    }
    out.emplace_back("face.dense.weight", Shape{z(config.face_dense), z(config.face_features())});
    out.emplace_back("face.dense.bias", Shape{z(config.face_dense)});
    int in = config.pose_inputs;
    for (std::size_t l = 0; l < config.pose_hidden.size(); ++l) {
        out.emplace_back(layer_name("pose.dense", l, ".weight"), Shape{z(config.pose_hidden[l]), z(in)});
        out.emplace_back(layer_name("pose.dense", l, ".bias"), Shape{z(config.pose_hidden[l])});
        in = config.pose_hidden[l];
    }
    const int fused = config.face_dense + in;
    out.emplace_back("fusion.weight", Shape{z(config.fusion_units), z(fused)});
    out.emplace_back("fusion.bias", Shape{z(config.fusion_units)});
    const int h = config.lstm_hidden;
    out.emplace_back("lstm.input.weight", Shape{z(4 * h), z(config.fusion_units)});
    out.emplace_back("lstm.hidden.weight", Shape{z(4 * h), z(h)});
    out.emplace_back("lstm.bias", Shape{z(4 * h)});
    out.emplace_back("output.weight", Shape{z(kNumClasses), z(h)});
    out.emplace_back("output.bias", Shape{z(kNumClasses)});
    return out;
}

// ---------------------------------------------------------------------------
// Weights

const Tensor& ModelWeights::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) fail(ErrorKind::Config, "weights have no tensor '" + name + "'");
    return it->second;
}

std::size_t ModelWeights::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : tensors) n += t.size();
    return n;
}

ModelWeights zero_weights(const ModelConfig& config) {
    ModelWeights w;
    w.config_hash = config.hash();
    for (auto& [name, shape] : parameter_layout(config)) w.tensors.emplace(name, Tensor(shape));
    return w;
}

ModelWeights init_weights(const ModelConfig& config, std::uint64_t seed) {
    ModelWeights w = zero_weights(config);
    Rng rng(seed);
    // Walk the layout (weights precede their bias) rather than the map so that
    // draw order follows the network.
    double bound = 0.0;
    for (auto& [name, shape] : parameter_layout(config)) {
        if (name.ends_with(".weight")) {
            std::size_t fan_in = 1;
            for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
            bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        }
        for (double& v : w.tensors.at(name).values()) v = rng.uniform(-bound, bound);
    }
    return w;
}

ParamMap zero_like(const ModelWeights& weights) {
    ParamMap out;
    for (const auto& [name, t] : weights.tensors) out.emplace(name, Tensor(t.shape()));
    return out;
}

// ---------------------------------------------------------------------------
// Inputs

std::array<double, kPoseValues> pose_features(const PoseKeypoints& pose) {
    auto out = pose.flat();
    const auto& neck = pose[Keypoint::Neck];
    const auto& rs = pose[Keypoint::RShoulder];
    const auto& ls = pose[Keypoint::LShoulder];
    if (!neck.present() || !rs.present() || !ls.present()) return out;
    const double scale = std::hypot(rs.x - ls.x, rs.y - ls.y);
    if (!(scale > 1e-6)) return out;
    for (int k = 0; k < kNumKeypoints; ++k) {
        const auto& p = pose.at(k);
        if (!p.present()) continue;
        out[3 * k] = (p.x - neck.x) / scale;
        out[3 * k + 1] = (p.y - neck.y) / scale;
    }
    return out;
}

SequenceInput encode_frames(std::span<const Frame> frames, const ModelConfig& config) {
    if (config.pose_inputs != kPoseValues) {
        fail(ErrorKind::Config, "frame input needs pose_inputs = 54, config has " + std::to_string(config.pose_inputs));
    }
    SequenceInput in;
    in.steps = static_cast<int>(frames.size());
    const std::size_t pixels = static_cast<std::size_t>(config.face_height) * config.face_width;
    in.face.reserve(frames.size() * pixels);
    in.pose.reserve(frames.size() * kPoseValues);
    for (const auto& f : frames) {
        if (f.face.height() != config.face_height || f.face.width() != config.face_width) {
            fail(ErrorKind::Config, "face crop " + std::to_string(f.face.height()) + "x" +
                                        std::to_string(f.face.width()) + " does not match model input " +
                                        std::to_string(config.face_height) + "x" + std::to_string(config.face_width));
        }
        in.face.insert(in.face.end(), f.face.pixels().begin(), f.face.pixels().end());
        const auto p = pose_features(f.pose);
        in.pose.insert(in.pose.end(), p.begin(), p.end());
    }
    return in;
}

SequenceInput encode_sequence(const Sequence& seq, const ModelConfig& config) {
    if (static_cast<int>(seq.frames.size()) != config.sequence_length) {
        fail(ErrorKind::Config, "sequence has " + std::to_string(seq.frames.size()) + " frames, model expects " +
                                    std::to_string(config.sequence_length));
    }
    return encode_frames(seq.frames, config);
}

// ---------------------------------------------------------------------------
// Network

struct Network::Cache {
    struct Step {
        std::vector<std::vector<double>> conv_z;
        std::vector<std::vector<double>> pool;
        std::vector<std::vector<int>> pool_arg;
        std::vector<double> face_z, face_a;
        std::vector<std::vector<double>> pose_z, pose_a;
        std::vector<double> fused, fusion_z, fusion_a;
        std::vector<double> gi, gf, gg, go, c, tanh_c, h;
    };
    std::vector<Step> steps;
    ClassVector logp{};
};

Network::Network(ModelConfig config, const ModelWeights& weights)
    : config_(std::move(config)), weights_(&weights) {
    config_.validate();
    if (weights.config_hash != config_.hash()) {
        fail(ErrorKind::ConfigMismatch, "weights were built for a different model config");
    }
    const auto layout = parameter_layout(config_);
    if (layout.size() != weights.tensors.size()) {
        fail(ErrorKind::ConfigMismatch, "weights have " + std::to_string(weights.tensors.size()) +
                                            " tensors, config expects " + std::to_string(layout.size()));
    }
    for (const auto& [name, shape] : layout) {
        if (weights.at(name).shape() != shape) {
            fail(ErrorKind::ConfigMismatch, "tensor '" + name + "' has the wrong shape");
        }
    }
    conv_ = config_.conv_shapes();
    for (std::size_t l = 0; l < conv_.size(); ++l) {
        conv_w_.push_back(&weights.at(layer_name("face.conv", l, ".weight")));
        conv_b_.push_back(&weights.at(layer_name("face.conv", l, ".bias")));
    }
    for (std::size_t l = 0; l < config_.pose_hidden.size(); ++l) {
        pose_w_.push_back(&weights.at(layer_name("pose.dense", l, ".weight")));
        pose_b_.push_back(&weights.at(layer_name("pose.dense", l, ".bias")));
    }
    face_w_ = &weights.at("face.dense.weight");
    face_b_ = &weights.at("face.dense.bias");
    fusion_w_ = &weights.at("fusion.weight");
    fusion_b_ = &weights.at("fusion.bias");
    lstm_wx_ = &weights.at("lstm.input.weight");
    lstm_wh_ = &weights.at("lstm.hidden.weight");
    lstm_b_ = &weights.at("lstm.bias");
    out_w_ = &weights.at("output.weight");
    out_b_ = &weights.at("output.bias");
}

ClassVector Network::forward(const SequenceInput& input) const {
    Cache cache;
    return run(input, &cache);
}

ClassVector Network::run(const SequenceInput& input, Cache* cache) const {
    const std::size_t pixels = static_cast<std::size_t>(config_.face_height) * config_.face_width;
    const std::size_t pose_n = static_cast<std::size_t>(config_.pose_inputs);
    if (input.steps <= 0 || input.face.size() != pixels * input.steps || input.pose.size() != pose_n * input.steps) {
        fail(ErrorKind::Config, "sequence input does not match the model config");
    }
    check_finite(input.face, "input.face");
    check_finite(input.pose, "input.pose");
    const std::size_t H = static_cast<std::size_t>(config_.lstm_hidden);
    const int k = config_.kernel;
    std::vector<double> h_prev(H, 0.0), c_prev(H, 0.0), z(4 * H);
    cache->steps.resize(static_cast<std::size_t>(input.steps));

    for (int t = 0; t < input.steps; ++t) {
        auto& st = cache->steps[static_cast<std::size_t>(t)];

        // Face branch.
        st.conv_z.resize(conv_.size());
        st.pool.resize(conv_.size());
        st.pool_arg.resize(conv_.size());
        const double* layer_in = input.face.data() + pixels * t;
        for (std::size_t l = 0; l < conv_.size(); ++l) {
            const auto& s = conv_[l];
            const Tensor& w = *conv_w_[l];
            const Tensor& b = *conv_b_[l];
            auto& cz = st.conv_z[l];
            cz.assign(static_cast<std::size_t>(s.out_channels * s.conv_h * s.conv_w), 0.0);
            for (int o = 0; o < s.out_channels; ++o) {
                double* out = cz.data() + static_cast<std::size_t>(o * s.conv_h * s.conv_w);
                std::fill(out, out + s.conv_h * s.conv_w, b[static_cast<std::size_t>(o)]);
                for (int i = 0; i < s.in_channels; ++i) {
                    const double* src = layer_in + static_cast<std::size_t>(i * s.in_h * s.in_w);
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const double wv = w[static_cast<std::size_t>(((o * s.in_channels + i) * k + ky) * k + kx)];
                            for (int y = 0; y < s.conv_h; ++y) {
                                const double* row = src + (y + ky) * s.in_w + kx;
                                double* dst = out + y * s.conv_w;
                                for (int x = 0; x < s.conv_w; ++x) dst[x] += wv * row[x];
                            }
                        }
                    }
                }
            }
            // ReLU then 2x2 max-pool; relu(max) == max(relu), so pool on z.
            auto& pool = st.pool[l];
            auto& arg = st.pool_arg[l];
            pool.assign(static_cast<std::size_t>(s.out_channels * s.pool_h * s.pool_w), 0.0);
            arg.assign(pool.size(), 0);
            for (int o = 0; o < s.out_channels; ++o) {
                for (int py = 0; py < s.pool_h; ++py) {
                    for (int px = 0; px < s.pool_w; ++px) {
                        int best = (o * s.conv_h + 2 * py) * s.conv_w + 2 * px;
                        for (int dy = 0; dy < 2; ++dy) {
                            for (int dx = 0; dx < 2; ++dx) {
                                const int idx = (o * s.conv_h + 2 * py + dy) * s.conv_w + 2 * px + dx;
                                if (cz[static_cast<std::size_t>(idx)] > cz[static_cast<std::size_t>(best)]) best = idx;
                            }
                        }
                        const std::size_t p = static_cast<std::size_t>((o * s.pool_h + py) * s.pool_w + px);
                        arg[p] = best;
                        pool[p] = std::max(0.0, cz[static_cast<std::size_t>(best)]);
                    }
                }
            }
            check_finite(pool, layer_name("face.conv", l, ""));
            layer_in = pool.data();
        }
        const std::size_t face_n = static_cast<std::size_t>(config_.face_dense);
        st.face_z.resize(face_n);
        st.face_a.resize(face_n);
        dense(*face_w_, *face_b_, st.pool.back().data(), st.pool.back().size(), st.face_z.data());
        for (std::size_t i = 0; i < face_n; ++i) st.face_a[i] = std::max(0.0, st.face_z[i]);
        check_finite(st.face_a, "face.dense");

        // Pose branch.
        st.pose_z.resize(pose_w_.size());
        st.pose_a.resize(pose_w_.size());
        const double* pin = input.pose.data() + pose_n * t;
        std::size_t pin_n = pose_n;
        for (std::size_t l = 0; l < pose_w_.size(); ++l) {
            const std::size_t n = pose_b_[l]->size();
            st.pose_z[l].resize(n);
            st.pose_a[l].resize(n);
            dense(*pose_w_[l], *pose_b_[l], pin, pin_n, st.pose_z[l].data());
            for (std::size_t i = 0; i < n; ++i) st.pose_a[l][i] = std::max(0.0, st.pose_z[l][i]);
            check_finite(st.pose_a[l], layer_name("pose.dense", l, ""));
            pin = st.pose_a[l].data();
            pin_n = n;
        }

        // Fusion.
        st.fused.assign(st.face_a.begin(), st.face_a.end());
        st.fused.insert(st.fused.end(), pin, pin + pin_n);
        const std::size_t fu = static_cast<std::size_t>(config_.fusion_units);
        st.fusion_z.resize(fu);
        st.fusion_a.resize(fu);
        dense(*fusion_w_, *fusion_b_, st.fused.data(), st.fused.size(), st.fusion_z.data());
        for (std::size_t i = 0; i < fu; ++i) st.fusion_a[i] = std::max(0.0, st.fusion_z[i]);
        check_finite(st.fusion_a, "fusion");

        // LSTM step, gate order i, f, g, o.
        dense(*lstm_wx_, *lstm_b_, st.fusion_a.data(), fu, z.data());
        for (std::size_t r = 0; r < 4 * H; ++r) {
            const double* row = lstm_wh_->data() + r * H;
            double acc = 0.0;
            for (std::size_t j = 0; j < H; ++j) acc += row[j] * h_prev[j];
            z[r] += acc;
        }
        st.gi.resize(H); st.gf.resize(H); st.gg.resize(H); st.go.resize(H);
        st.c.resize(H); st.tanh_c.resize(H); st.h.resize(H);
        for (std::size_t j = 0; j < H; ++j) {
            st.gi[j] = sigmoid(z[j]);
            st.gf[j] = sigmoid(z[H + j]);
            st.gg[j] = std::tanh(z[2 * H + j]);
            st.go[j] = sigmoid(z[3 * H + j]);
            st.c[j] = st.gf[j] * c_prev[j] + st.gi[j] * st.gg[j];
            st.tanh_c[j] = std::tanh(st.c[j]);
            st.h[j] = st.go[j] * st.tanh_c[j];
        }
        check_finite(st.h, "lstm");
        h_prev = st.h;
        c_prev = st.c;
    }

    // Output head with LogSoftMax.
    ClassVector logits{};
    dense(*out_w_, *out_b_, h_prev.data(), H, logits.data());
    check_finite(logits, "output");
    const double hi = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - hi);
    const double lse = hi + std::log(sum);
    for (auto& v : logits) v -= lse;
    cache->logp = logits;
    return logits;
}

double Network::accumulate_gradient(const SequenceInput& input, AddresseeClass label, ParamMap& grads) const {
    Cache cache;
    const ClassVector logp = run(input, &cache);
    const double loss = nll_loss(logp, label);

    auto grad = [&](const std::string& name) -> Tensor& {
        auto it = grads.find(name);
        if (it == grads.end()) fail(ErrorKind::Config, "gradient map has no tensor '" + name + "'");
        return it->second;
    };

    const std::size_t H = static_cast<std::size_t>(config_.lstm_hidden);
    const std::size_t fu = static_cast<std::size_t>(config_.fusion_units);
    const std::size_t T = cache.steps.size();
    const int k = config_.kernel;

    // d(-logp[y]) / d logits = softmax - onehot
    ClassVector dlogits{};
    for (int c = 0; c < kNumClasses; ++c) dlogits[c] = std::exp(logp[c]);
    dlogits[class_index(label)] -= 1.0;
    std::vector<double> dh(H, 0.0), dc(H, 0.0);
    dense_backward(*out_w_, cache.steps.back().h.data(), H, dlogits.data(), kNumClasses, grad("output.weight"),
                   grad("output.bias"), dh.data());

    Tensor& g_wx = grad("lstm.input.weight");
    Tensor& g_wh = grad("lstm.hidden.weight");
    Tensor& g_lb = grad("lstm.bias");
    Tensor& g_fw = grad("fusion.weight");
    Tensor& g_fb = grad("fusion.bias");
    Tensor& g_face_w = grad("face.dense.weight");
    Tensor& g_face_b = grad("face.dense.bias");
    std::vector<Tensor*> g_pose_w, g_pose_b, g_conv_w, g_conv_b;
    for (std::size_t l = 0; l < pose_w_.size(); ++l) {
        g_pose_w.push_back(&grad(layer_name("pose.dense", l, ".weight")));
        g_pose_b.push_back(&grad(layer_name("pose.dense", l, ".bias")));
    }
    for (std::size_t l = 0; l < conv_.size(); ++l) {
        g_conv_w.push_back(&grad(layer_name("face.conv", l, ".weight")));
        g_conv_b.push_back(&grad(layer_name("face.conv", l, ".bias")));
    }

    const std::size_t pixels = static_cast<std::size_t>(config_.face_height) * config_.face_width;
    const std::size_t pose_n = static_cast<std::size_t>(config_.pose_inputs);
    const std::vector<double> zeros(H, 0.0);
    std::vector<double> dz(4 * H), dx(fu), dh_prev(H);

    for (std::size_t tt = T; tt-- > 0;) {
        const auto& st = cache.steps[tt];
        const std::vector<double>& c_prev = tt > 0 ? cache.steps[tt - 1].c : zeros;
        const std::vector<double>& h_prev = tt > 0 ? cache.steps[tt - 1].h : zeros;

        for (std::size_t j = 0; j < H; ++j) {
            const double tc = st.tanh_c[j];
            dc[j] += dh[j] * st.go[j] * (1.0 - tc * tc);
            const double d_o = dh[j] * tc;
            const double d_i = dc[j] * st.gg[j];
            const double d_g = dc[j] * st.gi[j];
            const double d_f = dc[j] * c_prev[j];
            dz[j] = d_i * st.gi[j] * (1.0 - st.gi[j]);
            dz[H + j] = d_f * st.gf[j] * (1.0 - st.gf[j]);
            dz[2 * H + j] = d_g * (1.0 - st.gg[j] * st.gg[j]);
            dz[3 * H + j] = d_o * st.go[j] * (1.0 - st.go[j]);
            dc[j] *= st.gf[j];
        }
        std::fill(dx.begin(), dx.end(), 0.0);
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        dense_backward(*lstm_wx_, st.fusion_a.data(), fu, dz.data(), 4 * H, g_wx, g_lb, dx.data());
        {
            // Hidden-to-hidden weights have no bias of their own.
            for (std::size_t r = 0; r < 4 * H; ++r) {
                const double g = dz[r];
                if (g == 0.0) continue;
                double* drow = g_wh.data() + r * H;
                const double* row = lstm_wh_->data() + r * H;
                for (std::size_t j = 0; j < H; ++j) {
                    drow[j] += g * h_prev[j];
                    dh_prev[j] += g * row[j];
                }
            }
        }
        dh = dh_prev;

        // Fusion.
        std::vector<double> dfz(fu);
        for (std::size_t i = 0; i < fu; ++i) dfz[i] = st.fusion_z[i] > 0.0 ? dx[i] : 0.0;
        std::vector<double> dfused(st.fused.size(), 0.0);
        dense_backward(*fusion_w_, st.fused.data(), st.fused.size(), dfz.data(), fu, g_fw, g_fb, dfused.data());

        // Pose branch.
        const std::size_t face_n = static_cast<std::size_t>(config_.face_dense);
        std::vector<double> dpa(dfused.begin() + static_cast<std::ptrdiff_t>(face_n), dfused.end());
        for (std::size_t l = pose_w_.size(); l-- > 0;) {
            std::vector<double> dpz(dpa.size());
            for (std::size_t i = 0; i < dpa.size(); ++i) dpz[i] = st.pose_z[l][i] > 0.0 ? dpa[i] : 0.0;
            const double* pin = l > 0 ? st.pose_a[l - 1].data() : input.pose.data() + pose_n * tt;
            const std::size_t pin_n = l > 0 ? st.pose_a[l - 1].size() : pose_n;
            std::vector<double> dpin(l > 0 ? pin_n : 0, 0.0);
            dense_backward(*pose_w_[l], pin, pin_n, dpz.data(), dpz.size(), *g_pose_w[l], *g_pose_b[l],
                           l > 0 ? dpin.data() : nullptr);
            dpa = std::move(dpin);
        }

        // Face dense.
        std::vector<double> dfz_face(face_n);
        for (std::size_t i = 0; i < face_n; ++i) dfz_face[i] = st.face_z[i] > 0.0 ? dfused[i] : 0.0;
        std::vector<double> dpool(st.pool.back().size(), 0.0);
        dense_backward(*face_w_, st.pool.back().data(), st.pool.back().size(), dfz_face.data(), face_n, g_face_w,
                       g_face_b, dpool.data());

        // Conv stack.
        for (std::size_t l = conv_.size(); l-- > 0;) {
            const auto& s = conv_[l];
            const auto& cz = st.conv_z[l];
            std::vector<double> dcz(cz.size(), 0.0);
            for (std::size_t p = 0; p < dpool.size(); ++p) {
                const auto idx = static_cast<std::size_t>(st.pool_arg[l][p]);
                if (cz[idx] > 0.0) dcz[idx] += dpool[p];
            }
            const double* layer_in = l > 0 ? st.pool[l - 1].data() : input.face.data() + pixels * tt;
            std::vector<double> din(l > 0 ? static_cast<std::size_t>(s.in_channels * s.in_h * s.in_w) : 0, 0.0);
            const Tensor& w = *conv_w_[l];
            Tensor& gw = *g_conv_w[l];
            Tensor& gb = *g_conv_b[l];
            for (int o = 0; o < s.out_channels; ++o) {
                const double* dout = dcz.data() + static_cast<std::size_t>(o * s.conv_h * s.conv_w);
                double bsum = 0.0;
                for (int q = 0; q < s.conv_h * s.conv_w; ++q) bsum += dout[q];
                gb[static_cast<std::size_t>(o)] += bsum;
                if (std::all_of(dout, dout + s.conv_h * s.conv_w, [](double v) { return v == 0.0; })) continue;
                for (int i = 0; i < s.in_channels; ++i) {
                    const double* src = layer_in + static_cast<std::size_t>(i * s.in_h * s.in_w);
                    double* dsrc = l > 0 ? din.data() + static_cast<std::size_t>(i * s.in_h * s.in_w) : nullptr;
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const std::size_t widx = static_cast<std::size_t>(((o * s.in_channels + i) * k + ky) * k + kx);
                            const double wv = w[widx];
                            double acc = 0.0;
                            for (int y = 0; y < s.conv_h; ++y) {
                                const double* row = src + (y + ky) * s.in_w + kx;
                                const double* drow = dout + y * s.conv_w;
                                for (int x = 0; x < s.conv_w; ++x) acc += drow[x] * row[x];
                                if (dsrc != nullptr) {
                                    double* dst = dsrc + (y + ky) * s.in_w + kx;
                                    for (int x = 0; x < s.conv_w; ++x) dst[x] += wv * drow[x];
                                }
                            }
                            gw[widx] += acc;
                        }
                    }
                }
            }
            dpool = std::move(din);
        }
    }
    return loss;
}

ClassVector forward_sequence(const Network& net, const Sequence& seq) {
    return net.forward(encode_sequence(seq, net.config()));
}

double nll_loss(const ClassVector& logp, AddresseeClass label) {
    return -logp[class_index(label)];
}

namespace {

BatchGradient reduce_batch(const Network& net, std::size_t n, const auto& sample_at) {
    if (n == 0) fail(ErrorKind::InvalidInput, "empty batch");
    BatchGradient out;
    out.grads = zero_like(net.weights());
    ParamMap scratch = zero_like(net.weights());
    double loss = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        for (auto& [name, t] : scratch) t.fill(0.0);
        const LabeledInput& sample = sample_at(s);
        loss += net.accumulate_gradient(sample.input, sample.label, scratch);
        for (auto& [name, t] : out.grads) {
            const Tensor& g = scratch.at(name);
            for (std::size_t i = 0; i < t.size(); ++i) t[i] += g[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& [name, t] : out.grads) {
        for (double& v : t.values()) v *= inv;
        if (!t.all_finite()) fail(ErrorKind::Numeric, "non-finite gradient in tensor " + name);
    }
    out.mean_loss = loss * inv;
    return out;
}

}  // namespace

BatchGradient backward(const Network& net, std::span<const LabeledInput* const> batch) {
    return reduce_batch(net, batch.size(), [&](std::size_t i) -> const LabeledInput& { return *batch[i]; });
}

BatchGradient backward(const Network& net, std::span<const LabeledInput> batch) {
    return reduce_batch(net, batch.size(), [&](std::size_t i) -> const LabeledInput& { return batch[i]; });
}

}  // namespace ae::nn
