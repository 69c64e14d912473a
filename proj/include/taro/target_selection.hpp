#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "taro/common.hpp"
#include "taro/models.hpp"
#include "taro/tensor.hpp"

namespace taro {

struct ScoreConfig {
    double tau_score = 0.5;  // temperature of the entropy term

    void validate() const {
        if (!(tau_score > 0.0)) throw ConfigError("score: tau_score must be > 0");
    }
};

// Shannon entropy of softmax(p'/tau), treating p' as the logits of the
// candidate instance. High entropy marks confusing candidates.
inline double score_entropy(const Tensor& p_prime, double tau) {
    if (!(tau > 0.0)) throw ConfigError("score_entropy: tau must be > 0");
    double m = p_prime[0] / tau;
    for (std::size_t i = 1; i < p_prime.size(); ++i) m = std::max(m, p_prime[i] / tau);
    double z = 0.0;
    for (std::size_t i = 0; i < p_prime.size(); ++i) z += std::exp(p_prime[i] / tau - m);
    double h = 0.0;
    for (std::size_t i = 0; i < p_prime.size(); ++i) {
        double s = std::exp(p_prime[i] / tau - m) / z;
        if (s > 0.0) h -= s * std::log(s);
    }
    return h;
}

// Cosine similarity of encoder features.
inline double score_similarity(const Tensor& e, const Tensor& e_prime) {
    double na = e.norm2();
    double nb = e_prime.norm2();
    if (na <= kNormEps || nb <= kNormEps) {
        throw NumericError("score_similarity: degenerate feature norm");
    }
    return e.dot(e_prime) / (na * nb);
}

namespace detail {

// Euclidean normalization of a score vector across the candidate axis.
inline void l2_normalize_scores(std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n <= kNormEps) return;  // all-zero component carries no preference
    for (double& x : v) x /= n;
}

}  // namespace detail

// For each base sample i, picks argmax_j of the TARO score over candidates j,
// where the candidate pool is the other view's batch. The similarity entry of
// the excluded indices (self / positive pair) is set to -1 before the
// per-sample Euclidean normalization of both component vectors; excluded
// indices are never returned. Ties break toward the lowest index.
//
// positive_of[i] is the candidate index holding i's positive pair (the other
// view of the same instance), normally i itself.
inline std::vector<std::size_t> select_targets(std::span<const EmbeddingValues> bases,
                                               std::span<const EmbeddingValues> candidates,
                                               std::span<const std::size_t> positive_of,
                                               const ScoreConfig& cfg) {
    cfg.validate();
    if (candidates.size() < 2) {
        throw ConfigError("select_targets: need at least two candidates in the batch");
    }
    if (positive_of.size() != bases.size()) {
        throw ConfigError("select_targets: pairing map size mismatch");
    }
    std::vector<double> entropy_raw(candidates.size());
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        entropy_raw[j] = score_entropy(candidates[j].p, cfg.tau_score);
    }
    std::vector<std::size_t> selected(bases.size());
    for (std::size_t i = 0; i < bases.size(); ++i) {
        std::size_t positive = positive_of[i];
        auto excluded = [&](std::size_t j) { return j == i || j == positive; };
        std::vector<double> sim(candidates.size());
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            sim[j] = excluded(j) ? -1.0 : score_similarity(bases[i].e, candidates[j].e);
        }
        std::vector<double> entropy = entropy_raw;
        detail::l2_normalize_scores(sim);
        detail::l2_normalize_scores(entropy);
        bool found = false;
        std::size_t best = 0;
        double best_score = 0.0;
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            if (excluded(j)) continue;
            double s = sim[j] + entropy[j];
            if (!found || s > best_score) {
                found = true;
                best = j;
                best_score = s;
            }
        }
        if (!found) throw ConfigError("select_targets: no eligible candidate for sample");
        selected[i] = best;
    }
    return selected;
}

// Per-base-class histogram of target classes plus the probe's mean predicted
// probability per class (computed over base-class samples).
struct TargetAnalysis {
    std::size_t n_classes = 0;
    // [base_class][target_class] counts
    std::vector<std::vector<std::size_t>> target_histogram;
    // [base_class][class] mean softmax probability of base samples
    std::vector<std::vector<double>> mean_predicted_prob;
};

inline std::vector<double> softmax_values(const Tensor& logits) {
    double m = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) m = std::max(m, logits[i]);
    double z = 0.0;
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) z += std::exp(logits[i] - m);
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - m) / z;
    return out;
}

// base_labels[i] is the class of base sample i; target_labels[i] the class of
// its selected target; probe_probs[i] the probe's softmax on base sample i.
inline TargetAnalysis target_class_distribution(std::span<const std::size_t> base_labels,
                                                std::span<const std::size_t> target_labels,
                                                std::span<const std::vector<double>> probe_probs,
                                                std::size_t n_classes) {
    if (base_labels.size() != target_labels.size() || base_labels.size() != probe_probs.size()) {
        throw ConfigError("target_class_distribution: size mismatch");
    }
    TargetAnalysis out;
    out.n_classes = n_classes;
    out.target_histogram.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
    out.mean_predicted_prob.assign(n_classes, std::vector<double>(n_classes, 0.0));
    std::vector<std::size_t> base_counts(n_classes, 0);
    for (std::size_t i = 0; i < base_labels.size(); ++i) {
        std::size_t c = base_labels[i];
        out.target_histogram[c][target_labels[i]] += 1;
        for (std::size_t k = 0; k < n_classes; ++k) {
            out.mean_predicted_prob[c][k] += probe_probs[i][k];
        }
        base_counts[c] += 1;
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (base_counts[c] == 0) continue;
        for (std::size_t k = 0; k < n_classes; ++k) {
            out.mean_predicted_prob[c][k] /= static_cast<double>(base_counts[c]);
        }
    }
    return out;
}

// The two non-self classes with the highest mean predicted probability.
inline std::pair<std::size_t, std::size_t> top2_confused_classes(const TargetAnalysis& analysis,
                                                                 std::size_t base_class) {
    const auto& probs = analysis.mean_predicted_prob[base_class];
    std::size_t first = static_cast<std::size_t>(-1);
    std::size_t second = static_cast<std::size_t>(-1);
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (k == base_class) continue;
        if (first == static_cast<std::size_t>(-1) || probs[k] > probs[first]) {
            second = first;
            first = k;
        } else if (second == static_cast<std::size_t>(-1) || probs[k] > probs[second]) {
            second = k;
        }
    }
    return {first, second};
}

}  // namespace taro
