#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "taro/autodiff.hpp"
#include "taro/common.hpp"
#include "taro/tensor.hpp"

namespace taro {

enum class SslMode { positive_pair, contrastive };

inline std::string to_string(SslMode m) {
    return m == SslMode::positive_pair ? "positive_pair" : "contrastive";
}

// Layer widths including input and output, e.g. {16, 64, 32}.
struct MlpConfig {
    std::vector<std::size_t> dims;
};

// MLP parameters. Hidden layers use ReLU, the last layer is linear.
struct Mlp {
    std::vector<Tensor> weights;  // layer i: [dims[i+1] x dims[i]]
    std::vector<Tensor> biases;   // layer i: [dims[i+1]]

    std::size_t in_dim() const { return weights.front().shape()[1]; }
    std::size_t out_dim() const { return weights.back().shape()[0]; }

    // Fan-in uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    static Mlp init(const MlpConfig& cfg, std::mt19937_64& rng) {
        if (cfg.dims.size() < 2) throw ConfigError("mlp: need at least input and output dims");
        Mlp mlp;
        for (std::size_t l = 0; l + 1 < cfg.dims.size(); ++l) {
            std::size_t fan_in = cfg.dims[l];
            std::size_t fan_out = cfg.dims[l + 1];
            double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            std::uniform_real_distribution<double> dist(-bound, bound);
            std::vector<double> w(fan_out * fan_in);
            for (double& v : w) v = dist(rng);
            std::vector<double> b(fan_out);
            for (double& v : b) v = dist(rng);
            mlp.weights.emplace_back(std::vector<std::size_t>{fan_out, fan_in}, std::move(w));
            mlp.biases.emplace_back(std::vector<std::size_t>{fan_out}, std::move(b));
        }
        return mlp;
    }
};

struct LinearHead {
    Tensor W;  // [classes x dim]
    Tensor b;  // [classes]

    std::size_t classes() const { return W.shape()[0]; }

    static LinearHead init(std::size_t classes, std::size_t dim, std::mt19937_64& rng) {
        double bound = 1.0 / std::sqrt(static_cast<double>(dim));
        std::uniform_real_distribution<double> dist(-bound, bound);
        std::vector<double> w(classes * dim);
        for (double& v : w) v = dist(rng);
        std::vector<double> b(classes);
        for (double& v : b) v = dist(rng);
        return LinearHead{Tensor({classes, dim}, std::move(w)), Tensor({classes}, std::move(b))};
    }
};

// Encoder f, projector g, optional predictor h (positive-pair mode only),
// optional linear classification head for evaluation. In contrastive mode
// there is no predictor and p := z.
struct SiamNet {
    Mlp encoder;
    Mlp projector;
    std::optional<Mlp> predictor;
    std::optional<LinearHead> head;

    std::size_t in_dim() const { return encoder.in_dim(); }
    std::size_t embed_dim() const { return encoder.out_dim(); }

    void validate() const {
        if (projector.in_dim() != encoder.out_dim()) {
            throw ConfigError("siamnet: projector input dim does not match encoder output");
        }
        if (predictor) {
            if (predictor->in_dim() != projector.out_dim() ||
                predictor->out_dim() != projector.out_dim()) {
                throw ConfigError("siamnet: predictor dims must match projector output");
            }
        }
        if (head && head->W.shape()[1] != encoder.out_dim()) {
            throw ConfigError("siamnet: head input dim does not match encoder output");
        }
    }
};

struct ModelConfig {
    MlpConfig encoder{{16, 64, 32}};
    MlpConfig projector{{32, 32, 16}};
    MlpConfig predictor{{16, 8, 16}};
    SslMode mode = SslMode::positive_pair;

    SiamNet make_net(std::uint64_t seed) const {
        std::mt19937_64 rng(seed);
        SiamNet net;
        net.encoder = Mlp::init(encoder, rng);
        net.projector = Mlp::init(projector, rng);
        if (mode == SslMode::positive_pair) net.predictor = Mlp::init(predictor, rng);
        net.validate();
        return net;
    }
};

// Tape handles for one net's parameters, registered once per forward pass.
struct MlpVars {
    std::vector<Var> weights;
    std::vector<Var> biases;
};

struct NetVars {
    MlpVars encoder;
    MlpVars projector;
    std::optional<MlpVars> predictor;
    std::optional<std::pair<Var, Var>> head;  // W, b

    static NetVars make(Tape& tape, const SiamNet& net) {
        NetVars vars;
        vars.encoder = register_mlp(tape, net.encoder);
        vars.projector = register_mlp(tape, net.projector);
        if (net.predictor) vars.predictor = register_mlp(tape, *net.predictor);
        if (net.head) vars.head = std::make_pair(tape.leaf(net.head->W), tape.leaf(net.head->b));
        return vars;
    }

    std::vector<Var> trainable_params() const {
        std::vector<Var> out;
        auto push_mlp = [&out](const MlpVars& m) {
            for (std::size_t l = 0; l < m.weights.size(); ++l) {
                out.push_back(m.weights[l]);
                out.push_back(m.biases[l]);
            }
        };
        push_mlp(encoder);
        push_mlp(projector);
        if (predictor) push_mlp(*predictor);
        return out;
    }

private:
    static MlpVars register_mlp(Tape& tape, const Mlp& mlp) {
        MlpVars vars;
        for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
            vars.weights.push_back(tape.leaf(mlp.weights[l]));
            vars.biases.push_back(tape.leaf(mlp.biases[l]));
        }
        return vars;
    }
};

// Applies the trainable params of `vars` back onto `net` tensors after an
// optimizer step.
inline std::vector<Tensor*> trainable_tensors(SiamNet& net) {
    std::vector<Tensor*> out;
    auto push_mlp = [&out](Mlp& m) {
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            out.push_back(&m.weights[l]);
            out.push_back(&m.biases[l]);
        }
    };
    push_mlp(net.encoder);
    push_mlp(net.projector);
    if (net.predictor) push_mlp(*net.predictor);
    return out;
}

// e = f(x), z = g(e), p = h(z) (or p = z without a predictor).
struct EmbeddingVars {
    Var e;
    Var z;
    Var p;
};

inline Var forward_mlp(Tape& tape, const MlpVars& vars, Var x) {
    Var h = x;
    for (std::size_t l = 0; l < vars.weights.size(); ++l) {
        h = tape.linear(vars.weights[l], vars.biases[l], h);
        if (l + 1 < vars.weights.size()) h = tape.relu(h);
    }
    return h;
}

inline EmbeddingVars forward_embed(Tape& tape, const NetVars& vars, Var x) {
    EmbeddingVars emb;
    emb.e = forward_mlp(tape, vars.encoder, x);
    emb.z = forward_mlp(tape, vars.projector, emb.e);
    emb.p = vars.predictor ? forward_mlp(tape, *vars.predictor, emb.z) : emb.z;
    return emb;
}

// Plain-value embeddings, for target scoring and evaluation features.
struct EmbeddingValues {
    Tensor e;
    Tensor z;
    Tensor p;
};

inline EmbeddingValues embed_values(const SiamNet& net, const Tensor& x) {
    Tape tape;
    NetVars vars = NetVars::make(tape, net);
    EmbeddingVars emb = forward_embed(tape, vars, tape.leaf(x));
    return EmbeddingValues{tape.value(emb.e), tape.value(emb.z), tape.value(emb.p)};
}

// Linear probe logits. The encoder feature is stop-gradiented so probe
// training updates the head only.
inline Var head_logits(Tape& tape, const NetVars& vars, Var e, bool block_encoder = true) {
    if (!vars.head) throw ConfigError("head_logits: net has no classification head");
    Var feat = block_encoder ? tape.stop_gradient(e) : e;
    return tape.linear(vars.head->first, vars.head->second, feat);
}

inline std::size_t argmax_index(const Tensor& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

}  // namespace taro
