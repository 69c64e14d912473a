#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "taro/autodiff.hpp"
#include "taro/losses.hpp"
#include "taro/models.hpp"

namespace taro {

struct AttackConfig {
    double epsilon = 0.1;
    double alpha = 0.025;
    int steps = 10;
    bool random_start = true;
    std::optional<std::pair<double, double>> clamp_range;

    void validate() const {
        if (!(epsilon > 0.0)) throw ConfigError("attack: epsilon must be > 0");
        if (!(alpha > 0.0)) throw ConfigError("attack: alpha must be > 0");
        if (steps < 1) throw ConfigError("attack: steps must be >= 1");
    }

    // Training attack defaults mirror the 8/255, 2/255, K=10 ratios.
    static AttackConfig train_defaults(double epsilon) {
        return AttackConfig{epsilon, epsilon / 4.0, 10, true, std::nullopt};
    }

    // Evaluation attack defaults mirror the 8/255, 8/2550, K=20 ratios.
    static AttackConfig eval_defaults(double epsilon) {
        return AttackConfig{epsilon, epsilon / 10.0, 20, true, std::nullopt};
    }
};

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Elementwise clamp of delta to [-eps, +eps]; idempotent.
inline Tensor project_linf(Tensor delta, double epsilon) {
    for (std::size_t i = 0; i < delta.size(); ++i) {
        delta[i] = std::clamp(delta[i], -epsilon, epsilon);
    }
    return delta;
}

using AttackLoss = std::function<Var(Tape&, Var x_pert)>;

// Iterated signed-gradient ascent of lossfn over the l-inf ball around x:
//   delta <- proj( delta + alpha * sign(grad_delta loss) ).
// Deterministic given the rng state.
inline Tensor pgd_ascend(const AttackLoss& lossfn, const Tensor& x, const AttackConfig& cfg,
                         std::mt19937_64& rng) {
    cfg.validate();
    Tensor delta = Tensor::zeros(x.shape());
    if (cfg.random_start) {
        std::uniform_real_distribution<double> dist(-cfg.epsilon, cfg.epsilon);
        for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = dist(rng);
    }
    auto make_pert = [&](const Tensor& d) {
        Tensor xp = x;
        for (std::size_t i = 0; i < xp.size(); ++i) {
            xp[i] += d[i];
            if (cfg.clamp_range) {
                xp[i] = std::clamp(xp[i], cfg.clamp_range->first, cfg.clamp_range->second);
            }
        }
        return xp;
    };
    for (int step = 0; step < cfg.steps; ++step) {
        Tape tape;
        Var xp = tape.leaf(make_pert(delta));
        Var loss = lossfn(tape, xp);
        Tensor grad = tape.backward(loss, {xp})[0];
        for (std::size_t i = 0; i < grad.size(); ++i) {
            if (!std::isfinite(grad[i])) throw NumericError("pgd: non-finite attack gradient");
            delta[i] += cfg.alpha * sign0(grad[i]);
        }
        delta = project_linf(std::move(delta), cfg.epsilon);
    }
    return make_pert(delta);
}

// Untargeted SSL attack: maximize the training loss against the positive view.
inline Tensor attack_untargeted_ssl(const SiamNet& net, const Tensor& x_base, const Tensor& x_pos,
                                    const AttackConfig& cfg, SslMode mode, std::mt19937_64& rng,
                                    std::span<const Tensor> negatives = {}, double tau = 0.5) {
    AttackLoss lossfn = [&](Tape& tape, Var xp) {
        NetVars vars = NetVars::make(tape, net);
        if (mode == SslMode::positive_pair) {
            return loss_ss(tape, vars, xp, tape.leaf(x_pos));
        }
        Var z = forward_embed(tape, vars, xp).z;
        std::vector<Var> pos{forward_embed(tape, vars, tape.leaf(x_pos)).z};
        std::vector<Var> negs;
        negs.reserve(negatives.size());
        for (const Tensor& n : negatives) negs.push_back(forward_embed(tape, vars, tape.leaf(n)).z);
        return loss_nt_xent(tape, z, pos, negs, tau);
    };
    return pgd_ascend(lossfn, x_base, cfg, rng);
}

// Targeted attack: ascend -L_ss(x + delta, x_target), pulling the perturbed
// embedding toward the target's.
inline Tensor attack_targeted(const SiamNet& net, const Tensor& x_base, const Tensor& x_target,
                              const AttackConfig& cfg, std::mt19937_64& rng) {
    AttackLoss lossfn = [&](Tape& tape, Var xp) {
        NetVars vars = NetVars::make(tape, net);
        return loss_targeted_attack(tape, vars, xp, tape.leaf(x_target));
    };
    return pgd_ascend(lossfn, x_base, cfg, rng);
}

// Contrastive targeted attack objective per the TARO attack loss.
inline Tensor attack_targeted_contrastive(const SiamNet& net, const Tensor& x_base,
                                          const Tensor& x_target,
                                          std::span<const Tensor> negatives,
                                          const AttackConfig& cfg, const LossConfig& loss_cfg,
                                          std::mt19937_64& rng) {
    AttackLoss lossfn = [&](Tape& tape, Var xp) {
        NetVars vars = NetVars::make(tape, net);
        Var z = forward_embed(tape, vars, xp).z;
        Var z_target = forward_embed(tape, vars, tape.leaf(x_target)).z;
        std::vector<Var> negs;
        negs.reserve(negatives.size());
        for (const Tensor& n : negatives) negs.push_back(forward_embed(tape, vars, tape.leaf(n)).z);
        return loss_ours_rocl_attack(tape, z, negs, z_target, loss_cfg.tau, loss_cfg.w);
    };
    return pgd_ascend(lossfn, x_base, cfg, rng);
}

// PGD on cross-entropy through the frozen encoder and head. Returns the
// worse of the final adversary and the clean point, which makes robust
// accuracy <= clean accuracy hold exactly.
inline Tensor attack_supervised_eval(const SiamNet& net, const Tensor& x, std::size_t label,
                                     const AttackConfig& cfg, std::mt19937_64& rng) {
    if (!net.head) throw ConfigError("attack_supervised_eval: net has no head");
    auto logits_of = [&](Tape& tape, Var xp) {
        NetVars vars = NetVars::make(tape, net);
        Var e = forward_embed(tape, vars, xp).e;
        return tape.linear(vars.head->first, vars.head->second, e);
    };
    AttackLoss lossfn = [&](Tape& tape, Var xp) {
        return loss_cross_entropy(tape, logits_of(tape, xp), label);
    };
    Tensor x_adv = pgd_ascend(lossfn, x, cfg, rng);
    auto eval_point = [&](const Tensor& pt) {
        Tape tape;
        Var xp = tape.leaf(pt);
        Var logits = logits_of(tape, xp);
        double ce = tape.value(loss_cross_entropy(tape, logits, label)).scalar_value();
        bool correct = argmax_index(tape.value(logits)) == label;
        return std::make_pair(ce, correct);
    };
    auto [ce_adv, correct_adv] = eval_point(x_adv);
    auto [ce_clean, correct_clean] = eval_point(x);
    if (!correct_clean) return x;
    (void)correct_adv;
    return ce_adv >= ce_clean ? x_adv : x;
}

}  // namespace taro
