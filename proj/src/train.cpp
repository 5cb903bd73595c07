#include "ae/train.hpp"

#include <cmath>
#include <numeric>

#include "ae/rng.hpp"

namespace ae::nn {

void TrainConfig::validate() const {
    auto bad = [](const std::string& what) { fail(ErrorKind::Config, "train config: " + what); };
    if (!(learning_rate > 0.0)) bad("learning_rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) bad("betas must be in (0,1)");
    if (!(epsilon > 0.0)) bad("epsilon must be positive");
    if (batch_size <= 0) bad("batch_size must be positive");
    if (epochs <= 0) bad("epochs must be positive");
    if (patience <= 0) bad("patience must be positive");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) bad("val_fraction must be in [0,1)");
}

Adam::Adam(const TrainConfig& config, const ModelWeights& weights)
    : lr_(config.learning_rate), beta1_(config.beta1), beta2_(config.beta2), eps_(config.epsilon),
      m_(zero_like(weights)), v_(zero_like(weights)) {}

void Adam::step(ModelWeights& weights, const ParamMap& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, w] : weights.tensors) {
        const Tensor& g = grads.at(name);
        Tensor& m = m_.at(name);
        Tensor& v = v_.at(name);
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

std::vector<LabeledInput> encode_utterances(std::span<const Utterance> utterances, const ModelConfig& config) {
    std::vector<LabeledInput> out;
    for (const auto& u : utterances) {
        for (const auto& seq : window_utterance(u)) {
            out.push_back({encode_sequence(seq, config), u.label()});
        }
    }
    return out;
}

UtteranceSplit split_utterances(std::span<const Utterance> utterances, double val_fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(utterances.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, 0x5EED));
    rng.shuffle(order);
    std::size_t n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(utterances.size())));
    if (n_val >= utterances.size()) n_val = utterances.empty() ? 0 : utterances.size() - 1;
    std::vector<bool> is_val(utterances.size(), false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
    UtteranceSplit split;
    for (std::size_t i = 0; i < utterances.size(); ++i) {
        (is_val[i] ? split.validation : split.train).push_back(utterances[i]);
    }
    return split;
}

SetMetrics evaluate_set(const Network& net, std::span<const LabeledInput> data) {
    SetMetrics m;
    if (data.empty()) return m;
    std::size_t correct = 0;
    for (const auto& s : data) {
        const ClassVector logp = net.forward(s.input);
        m.loss += nll_loss(logp, s.label);
        if (argmax_class(logp) == s.label) ++correct;
    }
    m.loss /= static_cast<double>(data.size());
    m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return m;
}

TrainResult train(std::span<const LabeledInput> train_set, std::span<const LabeledInput> val_set,
                  const ModelConfig& model_config, const TrainConfig& train_config) {
    model_config.validate();
    train_config.validate();
    if (train_set.empty()) fail(ErrorKind::Training, "training split is empty");

    ModelWeights weights = init_weights(model_config, mix_seed(train_config.seed, 0));
    Network net(model_config, weights);
    Adam adam(train_config, weights);
    const std::span<const LabeledInput> selection = val_set.empty() ? train_set : val_set;

    TrainResult result;
    double best_loss = INFINITY;
    int stale = 0;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<const LabeledInput*> batch;

    for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(train_config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        SetMetrics val;
        try {
            for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(train_config.batch_size)) {
                const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(train_config.batch_size));
                batch.clear();
                for (std::size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);
                BatchGradient g = backward(net, batch);
                if (!std::isfinite(g.mean_loss)) fail(ErrorKind::Numeric, "non-finite training loss");
                loss_sum += g.mean_loss * static_cast<double>(batch.size());
                adam.step(weights, g.grads);
            }
            val = evaluate_set(net, selection);
            if (!std::isfinite(val.loss)) fail(ErrorKind::Numeric, "non-finite validation loss");
        } catch (const Error& e) {
            fail(ErrorKind::Training, "training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }
        result.history.push_back({epoch, loss_sum / static_cast<double>(train_set.size()), val.loss, val.accuracy});

        if (val.loss < best_loss) {
            best_loss = val.loss;
            result.weights = weights;
            result.best_epoch = epoch;
            stale = 0;
        } else if (++stale >= train_config.patience) {
            break;
        }
    }
    return result;
}

}  // namespace ae::nn
