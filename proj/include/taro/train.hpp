#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "taro/attacks.hpp"
#include "taro/common.hpp"
#include "taro/data.hpp"
#include "taro/losses.hpp"
#include "taro/models.hpp"
#include "taro/target_selection.hpp"

namespace taro {

enum class AttackMode { untargeted, random_target, taro_target };

inline std::string to_string(AttackMode m) {
    switch (m) {
        case AttackMode::untargeted: return "untargeted";
        case AttackMode::random_target: return "random_target";
        default: return "taro_target";
    }
}

struct OptimizerConfig {
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;

    void validate() const {
        if (!(lr > 0.0)) throw ConfigError("optimizer: lr must be > 0");
        if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("optimizer: momentum in [0,1)");
        if (weight_decay < 0.0) throw ConfigError("optimizer: weight_decay must be >= 0");
    }
};

// SGD with momentum and weight decay.
class SgdOptimizer {
public:
    explicit SgdOptimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    // Resumes from a checkpointed momentum state.
    void set_velocity(std::vector<Tensor> velocity) { velocity_ = std::move(velocity); }
    const std::vector<Tensor>& velocity() const { return velocity_; }

    void step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
        if (velocity_.empty()) {
            for (Tensor* p : params) velocity_.push_back(Tensor::zeros(p->shape()));
        }
        if (velocity_.size() != params.size()) {
            throw ConfigError("optimizer: momentum state does not match parameter count");
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& p = *params[i];
            Tensor& v = velocity_[i];
            for (std::size_t k = 0; k < p.size(); ++k) {
                double g = grads[i][k] + cfg_.weight_decay * p[k];
                v[k] = cfg_.momentum * v[k] + g;
                p[k] -= cfg_.lr * v[k];
            }
        }
    }

private:
    OptimizerConfig cfg_;
    std::vector<Tensor> velocity_;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double wall_seconds = 0.0;
};

struct Metrics {
    double clean_acc = 0.0;   // percent
    double robust_acc = 0.0;  // percent
    std::vector<EpochRecord> epochs;
    double wall_seconds = 0.0;
};

// Full experiment description. Epsilons and augmentation noise may be left
// at 0 to be resolved from the data scale (0.1 x mean per-coordinate std).
struct RunConfig {
    std::string data_dir;
    ModelConfig model;
    LossConfig loss;
    ScoreConfig score;
    AttackMode attack_mode = AttackMode::taro_target;
    SslMode ssl_mode = SslMode::positive_pair;
    OptimizerConfig optimizer;
    double epsilon = 0.0;        // training-attack radius; 0 = auto
    int attack_steps = 10;
    int eval_attack_steps = 20;
    double augment_noise = 0.0;  // 0 = auto
    double augment_dropout = 0.1;
    double augment_scale_min = 0.8;
    double augment_scale_max = 1.25;
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    std::size_t head_epochs = 40;
    double head_lr = 0.1;
    std::uint64_t seed = 1;

    void validate() const {
        loss.validate();
        score.validate();
        optimizer.validate();
        if (batch_size < 2) throw ConfigError("run: batch_size must be >= 2");
        if (epsilon < 0.0) throw ConfigError("run: epsilon must be >= 0");
        if (attack_steps < 1 || eval_attack_steps < 1) {
            throw ConfigError("run: attack steps must be >= 1");
        }
        if (ssl_mode == SslMode::contrastive && batch_size < 3 &&
            attack_mode != AttackMode::untargeted) {
            throw ConfigError("run: contrastive targeted modes need batch_size >= 3 for negatives");
        }
    }

    double resolved_epsilon(const Dataset& ds) const {
        return epsilon > 0.0 ? epsilon : 0.1 * ds.feature_std();
    }

    AugmentConfig resolved_augment(const Dataset& ds) const {
        AugmentConfig aug;
        aug.noise_std = augment_noise > 0.0 ? augment_noise : 0.1 * ds.feature_std();
        aug.dropout_p = augment_dropout;
        aug.scale_min = augment_scale_min;
        aug.scale_max = augment_scale_max;
        return aug;
    }
};

struct TrainResult {
    SiamNet net;
    Metrics metrics;
    std::vector<Tensor> velocity;  // optimizer momentum, needed for bitwise resume
};

namespace detail {

inline Var batch_train_loss(Tape& tape, const NetVars& vars, SslMode mode,
                            const std::vector<Tensor>& t1, const std::vector<Tensor>& t2,
                            const std::vector<Tensor>& t1_adv, const std::vector<Tensor>& t2_adv,
                            double tau) {
    std::size_t batch = t1.size();
    Var total = tape.constant(0.0);
    if (mode == SslMode::positive_pair) {
        for (std::size_t i = 0; i < batch; ++i) {
            total = tape.add(total, loss_taro_ss(tape, vars, tape.leaf(t1[i]),
                                                 tape.leaf(t1_adv[i]), tape.leaf(t2_adv[i])));
        }
    } else {
        std::vector<Var> z1(batch);
        for (std::size_t i = 0; i < batch; ++i) {
            z1[i] = forward_embed(tape, vars, tape.leaf(t1[i])).z;
        }
        for (std::size_t i = 0; i < batch; ++i) {
            Var z2 = forward_embed(tape, vars, tape.leaf(t2[i])).z;
            Var z1_adv = forward_embed(tape, vars, tape.leaf(t1_adv[i])).z;
            std::vector<Var> negatives;
            negatives.reserve(batch - 1);
            for (std::size_t j = 0; j < batch; ++j) {
                if (j != i) negatives.push_back(z1[j]);
            }
            total = tape.add(total, loss_taro_contrastive(tape, z1[i], z2, z1_adv, negatives, tau));
        }
    }
    return tape.scale(total, 1.0 / static_cast<double>(batch));
}

}  // namespace detail

// Adversarial SSL training loop covering all attack modes and both SSL
// modes. Deterministic: every random draw is derived from (seed, epoch,
// step, sample), so reruns and checkpoint resumes agree bitwise.
inline TrainResult train_ssl(const RunConfig& cfg, const Dataset& ds, SiamNet net,
                             std::size_t start_epoch = 0,
                             std::vector<Tensor> start_velocity = {}) {
    cfg.validate();
    net.validate();
    auto t_begin = std::chrono::steady_clock::now();
    AugmentConfig aug = cfg.resolved_augment(ds);
    AttackConfig attack = AttackConfig::train_defaults(cfg.resolved_epsilon(ds));
    attack.steps = cfg.attack_steps;
    SgdOptimizer opt(cfg.optimizer);
    if (!start_velocity.empty()) opt.set_velocity(std::move(start_velocity));
    Metrics metrics;

    for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        auto t_epoch = std::chrono::steady_clock::now();
        // the permutation depends only on (seed, epoch) so resumed runs see
        // the same batches as uninterrupted ones
        std::vector<std::size_t> order(ds.train_idx);
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0xe70c, epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t steps = 0;
        for (std::size_t begin = 0; begin + 2 <= order.size(); begin += cfg.batch_size) {
            std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            if (end - begin < 2) break;
            std::size_t batch = end - begin;
            std::size_t step = begin / cfg.batch_size;

            std::vector<Tensor> t1(batch), t2(batch);
            for (std::size_t i = 0; i < batch; ++i) {
                auto views = augment_views(ds.features[order[begin + i]], aug,
                                           mix_seed(cfg.seed, epoch, step, i));
                t1[i] = std::move(views.first);
                t2[i] = std::move(views.second);
            }

            // target mining is per view: candidates come from the other view
            std::vector<std::size_t> targets1, targets2;
            if (cfg.attack_mode == AttackMode::taro_target) {
                std::vector<EmbeddingValues> emb1(batch), emb2(batch);
                parallel_for(batch, [&](std::size_t i) {
                    emb1[i] = embed_values(net, t1[i]);
                    emb2[i] = embed_values(net, t2[i]);
                });
                std::vector<std::size_t> identity(batch);
                std::iota(identity.begin(), identity.end(), 0);
                targets1 = select_targets(emb1, emb2, identity, cfg.score);
                targets2 = select_targets(emb2, emb1, identity, cfg.score);
            } else if (cfg.attack_mode == AttackMode::random_target) {
                targets1.resize(batch);
                targets2.resize(batch);
                for (std::size_t i = 0; i < batch; ++i) {
                    std::mt19937_64 rng(mix_seed(cfg.seed, 0x7a46, epoch * 131071 + step, i));
                    std::uniform_int_distribution<std::size_t> dist(0, batch - 2);
                    std::size_t j = dist(rng);
                    targets1[i] = j >= i ? j + 1 : j;
                    j = dist(rng);
                    targets2[i] = j >= i ? j + 1 : j;
                }
            }

            bool positive_pair = cfg.ssl_mode == SslMode::positive_pair;
            std::vector<Tensor> t1_adv(batch), t2_adv(batch);
            parallel_for(batch, [&](std::size_t i) {
                std::mt19937_64 rng1(mix_seed(cfg.seed, 0xadc1, epoch * 131071 + step, i));
                std::mt19937_64 rng2(mix_seed(cfg.seed, 0xadc2, epoch * 131071 + step, i));
                if (positive_pair) {
                    if (cfg.attack_mode == AttackMode::untargeted) {
                        t1_adv[i] = attack_untargeted_ssl(net, t1[i], t2[i], attack,
                                                          SslMode::positive_pair, rng1);
                        t2_adv[i] = attack_untargeted_ssl(net, t2[i], t1[i], attack,
                                                          SslMode::positive_pair, rng2);
                    } else {
                        t1_adv[i] = attack_targeted(net, t1[i], t2[targets1[i]], attack, rng1);
                        t2_adv[i] = attack_targeted(net, t2[i], t1[targets2[i]], attack, rng2);
                    }
                } else {
                    std::vector<Tensor> negatives;
                    negatives.reserve(batch - 1);
                    for (std::size_t j = 0; j < batch; ++j) {
                        if (j != i) negatives.push_back(t1[j]);
                    }
                    if (cfg.attack_mode == AttackMode::untargeted) {
                        t1_adv[i] = attack_untargeted_ssl(net, t1[i], t2[i], attack,
                                                          SslMode::contrastive, rng1, negatives,
                                                          cfg.loss.tau);
                    } else {
                        t1_adv[i] = attack_targeted_contrastive(net, t1[i], t2[targets1[i]],
                                                                negatives, attack, cfg.loss, rng1);
                    }
                }
            });

            Tape tape;
            NetVars vars = NetVars::make(tape, net);
            Var loss = detail::batch_train_loss(tape, vars, cfg.ssl_mode, t1, t2, t1_adv, t2_adv,
                                                cfg.loss.tau);
            double loss_value = tape.value(loss).scalar_value();
            if (!std::isfinite(loss_value)) {
                throw NumericError("train: loss diverged at epoch " + std::to_string(epoch) +
                                   " step " + std::to_string(step));
            }
            std::vector<Var> params = vars.trainable_params();
            std::vector<Tensor> grads = tape.backward(loss, params);
            std::vector<Tensor*> tensors = trainable_tensors(net);
            opt.step(tensors, grads);
            epoch_loss += loss_value;
            ++steps;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = steps ? epoch_loss / static_cast<double>(steps) : 0.0;
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count();
        metrics.epochs.push_back(rec);
    }
    metrics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    return TrainResult{std::move(net), std::move(metrics), opt.velocity()};
}

inline TrainResult train_ssl(const RunConfig& cfg, const Dataset& ds) {
    ModelConfig model = cfg.model;
    model.mode = cfg.ssl_mode;
    if (model.encoder.dims.front() != ds.dim) {
        throw ConfigError("run: encoder input dim " + std::to_string(model.encoder.dims.front()) +
                          " does not match data dim " + std::to_string(ds.dim));
    }
    return train_ssl(cfg, ds, model.make_net(mix_seed(cfg.seed, 0x1217)));
}

inline TrainResult train_taro_positive_pair(RunConfig cfg, const Dataset& ds) {
    cfg.attack_mode = AttackMode::taro_target;
    cfg.ssl_mode = SslMode::positive_pair;
    return train_ssl(cfg, ds);
}

inline TrainResult train_untargeted_baseline(RunConfig cfg, const Dataset& ds) {
    cfg.attack_mode = AttackMode::untargeted;
    return train_ssl(cfg, ds);
}

inline TrainResult train_taro_contrastive(RunConfig cfg, const Dataset& ds) {
    cfg.attack_mode = AttackMode::taro_target;
    cfg.ssl_mode = SslMode::contrastive;
    return train_ssl(cfg, ds);
}

// Trains the linear head on frozen-encoder features. With robust_head, each
// step's features come from adversarial inputs generated against the current
// head (AT loss).
inline SiamNet train_linear_head(SiamNet net, const Dataset& ds, const AttackConfig& eval_attack,
                                 const RunConfig& cfg, bool robust_head) {
    std::mt19937_64 init_rng(mix_seed(cfg.seed, 0xead0));
    net.head = LinearHead::init(ds.n_classes, net.embed_dim(), init_rng);
    OptimizerConfig head_opt{cfg.head_lr, 0.9, 0.0};
    SgdOptimizer opt(head_opt);
    bool attack_enabled = robust_head && eval_attack.epsilon > 0.0;

    // frozen encoder: clean features are fixed across head epochs
    std::vector<Tensor> clean_feats(ds.train_idx.size());
    parallel_for(ds.train_idx.size(), [&](std::size_t i) {
        clean_feats[i] = embed_values(net, ds.features[ds.train_idx[i]]).e;
    });

    std::vector<std::size_t> order(ds.train_idx.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < cfg.head_epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0xead5, epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            std::size_t batch = end - begin;
            std::size_t step = begin / cfg.batch_size;
            std::vector<Tensor> feats(batch);
            parallel_for(batch, [&](std::size_t i) {
                std::size_t sample = order[begin + i];
                if (attack_enabled) {
                    std::mt19937_64 rng(mix_seed(cfg.seed, 0xeada, epoch * 131071 + step, i));
                    Tensor x_adv = attack_supervised_eval(net, ds.features[ds.train_idx[sample]],
                                                          ds.labels[ds.train_idx[sample]],
                                                          eval_attack, rng);
                    feats[i] = embed_values(net, x_adv).e;
                } else {
                    feats[i] = clean_feats[sample];
                }
            });
            Tape tape;
            Var W = tape.leaf(net.head->W);
            Var b = tape.leaf(net.head->b);
            Var total = tape.constant(0.0);
            for (std::size_t i = 0; i < batch; ++i) {
                Var logits = tape.linear(W, b, tape.leaf(feats[i]));
                total = tape.add(total,
                                 loss_cross_entropy(tape, logits, ds.labels[ds.train_idx[order[begin + i]]]));
            }
            Var loss = tape.scale(total, 1.0 / static_cast<double>(batch));
            if (!std::isfinite(tape.value(loss).scalar_value())) {
                throw NumericError("head training: loss diverged");
            }
            std::vector<Tensor> grads = tape.backward(loss, {W, b});
            std::vector<Tensor*> params{&net.head->W, &net.head->b};
            opt.step(params, grads);
        }
    }
    return net;
}

// Clean and PGD accuracy of a net with a trained head on the test split.
inline Metrics evaluate_head(const SiamNet& net, const Dataset& ds,
                             const AttackConfig& eval_attack, std::uint64_t seed) {
    Metrics m;
    std::size_t n = ds.test_idx.size();
    if (n == 0) throw DataError("evaluate: empty test split");
    std::vector<char> clean_ok(n, 0), robust_ok(n, 0);
    bool attack_enabled = eval_attack.epsilon > 0.0;
    parallel_for(n, [&](std::size_t i) {
        const Tensor& x = ds.features[ds.test_idx[i]];
        std::size_t label = ds.labels[ds.test_idx[i]];
        Tape tape;
        NetVars vars = NetVars::make(tape, net);
        Var logits = head_logits(tape, vars, forward_embed(tape, vars, tape.leaf(x)).e);
        clean_ok[i] = argmax_index(tape.value(logits)) == label;
        if (!attack_enabled) {
            robust_ok[i] = clean_ok[i];
            return;
        }
        std::mt19937_64 rng(mix_seed(seed, 0xeba1, i));
        Tensor x_adv = attack_supervised_eval(net, x, label, eval_attack, rng);
        Tape tape2;
        NetVars vars2 = NetVars::make(tape2, net);
        Var logits2 = head_logits(tape2, vars2, forward_embed(tape2, vars2, tape2.leaf(x_adv)).e);
        robust_ok[i] = clean_ok[i] && argmax_index(tape2.value(logits2)) == label;
    });
    double clean = 0.0, robust = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        clean += clean_ok[i];
        robust += robust_ok[i];
    }
    m.clean_acc = 100.0 * clean / static_cast<double>(n);
    m.robust_acc = 100.0 * robust / static_cast<double>(n);
    return m;
}

// Linear evaluation: head trained on clean features, tested clean and under
// the PGD evaluation attack.
inline Metrics linear_evaluation(const SiamNet& net, const Dataset& ds,
                                 const AttackConfig& eval_attack, const RunConfig& cfg) {
    SiamNet probed = train_linear_head(net, ds, eval_attack, cfg, /*robust_head=*/false);
    return evaluate_head(probed, ds, eval_attack, cfg.seed);
}

// Robust linear evaluation: head trained on adversarial examples.
inline Metrics robust_linear_evaluation(const SiamNet& net, const Dataset& ds,
                                        const AttackConfig& eval_attack, const RunConfig& cfg) {
    SiamNet probed = train_linear_head(net, ds, eval_attack, cfg, /*robust_head=*/true);
    return evaluate_head(probed, ds, eval_attack, cfg.seed);
}

// Freeze the encoder pretrained elsewhere and probe it on a new dataset.
inline Metrics transfer_evaluation(const SiamNet& net, const Dataset& target_ds,
                                   const AttackConfig& eval_attack, const RunConfig& cfg) {
    if (net.in_dim() != target_ds.dim) {
        throw ConfigError("transfer: encoder input dim does not match target dataset");
    }
    return linear_evaluation(net, target_ds, eval_attack, cfg);
}

inline AttackConfig make_eval_attack(const RunConfig& cfg, const Dataset& ds) {
    AttackConfig attack = AttackConfig::eval_defaults(cfg.resolved_epsilon(ds));
    attack.steps = cfg.eval_attack_steps;
    return attack;
}

}  // namespace taro
