#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "taro/autodiff.hpp"
#include "taro/models.hpp"

namespace taro {

struct LossConfig {
    double tau = 0.5;  // temperature of the contrastive loss
    double w = 2.0;    // weight of the adversarial similarity loss

    void validate() const {
        if (!(tau > 0.0)) throw ConfigError("loss: tau must be > 0");
        if (w < 0.0) throw ConfigError("loss: w must be >= 0");
    }
};

// Symmetric negative cosine with stop-gradient on the projector branch:
//   -1/2 cos(p1, sg(z2)) - 1/2 cos(p2, sg(z1)).
// Value lies in [-1, 1].
inline Var loss_ss_embed(Tape& tape, const EmbeddingVars& a, const EmbeddingVars& b) {
    Var t1 = tape.cosine_similarity(a.p, tape.stop_gradient(b.z));
    Var t2 = tape.cosine_similarity(b.p, tape.stop_gradient(a.z));
    return tape.scale(tape.add(t1, t2), -0.5);
}

inline Var loss_ss(Tape& tape, const NetVars& net, Var x1, Var x2) {
    return loss_ss_embed(tape, forward_embed(tape, net, x1), forward_embed(tape, net, x2));
}

// Multi-positive nt-xent:
//   -log( sum_p exp(sim(z,p)/tau) / (sum_p exp(sim(z,p)/tau) + sum_n exp(sim(z,n)/tau)) ).
inline Var loss_nt_xent(Tape& tape, Var z, std::span<const Var> positives,
                        std::span<const Var> negatives, double tau) {
    if (positives.empty()) throw ConfigError("nt_xent: positive set must be non-empty");
    auto sim_exp = [&](Var other) {
        return tape.exp(tape.scale(tape.cosine_similarity(z, other), 1.0 / tau));
    };
    Var numer = sim_exp(positives[0]);
    for (std::size_t i = 1; i < positives.size(); ++i) numer = tape.add(numer, sim_exp(positives[i]));
    Var denom = numer;
    for (Var n : negatives) denom = tape.add(denom, sim_exp(n));
    return tape.sub(tape.log(denom), tape.log(numer));
}

// Targeted attack objective: ascending maximizes similarity to the target.
inline Var loss_targeted_attack(Tape& tape, const NetVars& net, Var x_pert, Var x_target) {
    return tape.neg(loss_ss(tape, net, x_pert, x_target));
}

// Three-term agreement between the clean anchor and both adversaries:
//   L(t1x, t1x_adv) + L(t1x_adv, t2x_adv) + L(t2x_adv, t1x).
inline Var loss_taro_ss(Tape& tape, const NetVars& net, Var t1x, Var t1x_adv, Var t2x_adv) {
    EmbeddingVars clean = forward_embed(tape, net, t1x);
    EmbeddingVars adv1 = forward_embed(tape, net, t1x_adv);
    EmbeddingVars adv2 = forward_embed(tape, net, t2x_adv);
    Var a = loss_ss_embed(tape, clean, adv1);
    Var b = loss_ss_embed(tape, adv1, adv2);
    Var c = loss_ss_embed(tape, adv2, clean);
    return tape.add(tape.add(a, b), c);
}

// Contrastive attack objective: nt-xent with the positive term removed
// (numerator replaced by exp(0) = 1) plus w * cos(z, z_target).
inline Var loss_ours_rocl_attack(Tape& tape, Var z, std::span<const Var> negatives, Var z_target,
                                 double tau, double w) {
    Var denom = tape.constant(1.0);
    for (Var n : negatives) {
        denom = tape.add(denom, tape.exp(tape.scale(tape.cosine_similarity(z, n), 1.0 / tau)));
    }
    Var repulsion = tape.log(denom);  // -log(1 / (1 + sum_n exp(sim/tau)))
    Var similarity = tape.scale(tape.cosine_similarity(z, z_target), w);
    return tape.add(repulsion, similarity);
}

// Contrastive training loss with the adversary as an extra positive.
inline Var loss_taro_contrastive(Tape& tape, Var z1, Var z2, Var z1_adv,
                                 std::span<const Var> negatives, double tau) {
    std::vector<Var> positives{z2, z1_adv};
    return loss_nt_xent(tape, z1, positives, negatives, tau);
}

// -log softmax(logits)[label].
inline Var loss_cross_entropy(Tape& tape, Var logits, std::size_t label) {
    const Tensor& l = tape.value(logits);
    if (l.size() < 2) throw ConfigError("cross_entropy: need at least two classes");
    if (label >= l.size()) throw ConfigError("cross_entropy: label out of range");
    return tape.sub(tape.logsumexp(logits), tape.pick(logits, label));
}

}  // namespace taro
