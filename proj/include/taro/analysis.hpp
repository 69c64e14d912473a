#pragma once

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "taro/attacks.hpp"
#include "taro/data.hpp"
#include "taro/target_selection.hpp"
#include "taro/train.hpp"

namespace taro {

// Replays the training loop's per-batch target selection (augmented views,
// shuffled batches) for several rounds, records the class of every selected
// target, and pairs that with a linear probe's mean predicted probability
// per class.
inline TargetAnalysis run_target_analysis(const SiamNet& net, const Dataset& ds,
                                          const RunConfig& cfg, std::size_t rounds = 10) {
    if (ds.train_idx.size() < 2) throw DataError("analysis: need at least two train samples");
    AttackConfig eval_attack = make_eval_attack(cfg, ds);
    SiamNet probed = train_linear_head(net, ds, eval_attack, cfg, /*robust_head=*/false);
    AugmentConfig aug = cfg.resolved_augment(ds);

    std::vector<std::size_t> base_labels, target_labels;
    for (std::size_t round = 0; round < rounds; ++round) {
        std::vector<std::size_t> order(ds.train_idx);
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0xa117, round));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t begin = 0; begin + 2 <= order.size(); begin += cfg.batch_size) {
            std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            std::size_t batch = end - begin;
            if (batch < 2) break;
            std::vector<EmbeddingValues> view1(batch), view2(batch);
            parallel_for(batch, [&](std::size_t i) {
                auto views = augment_views(ds.features[order[begin + i]], aug,
                                           mix_seed(cfg.seed, 0xa118, round, begin + i));
                view1[i] = embed_values(net, views.first);
                view2[i] = embed_values(net, views.second);
            });
            std::vector<std::size_t> identity(batch);
            std::iota(identity.begin(), identity.end(), 0);
            std::vector<std::size_t> selected = select_targets(view1, view2, identity, cfg.score);
            for (std::size_t i = 0; i < batch; ++i) {
                base_labels.push_back(ds.labels[order[begin + i]]);
                target_labels.push_back(ds.labels[order[begin + selected[i]]]);
            }
        }
    }

    // probe confusion measured on the clean train embeddings
    std::size_t n = ds.train_idx.size();
    std::vector<std::vector<double>> clean_probs(n);
    std::vector<std::size_t> clean_labels(n);
    parallel_for(n, [&](std::size_t i) {
        clean_labels[i] = ds.labels[ds.train_idx[i]];
        Tape tape;
        NetVars vars = NetVars::make(tape, probed);
        Var logits = head_logits(
            tape, vars, forward_embed(tape, vars, tape.leaf(ds.features[ds.train_idx[i]])).e);
        clean_probs[i] = softmax_values(tape.value(logits));
    });
    TargetAnalysis probe_side =
        target_class_distribution(clean_labels, clean_labels, clean_probs, ds.n_classes);

    std::vector<std::vector<double>> dummy_probs(base_labels.size(),
                                                 std::vector<double>(ds.n_classes, 0.0));
    TargetAnalysis out =
        target_class_distribution(base_labels, target_labels, dummy_probs, ds.n_classes);
    out.mean_predicted_prob = std::move(probe_side.mean_predicted_prob);
    return out;
}

inline void write_target_analysis_csv(const TargetAnalysis& analysis, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("analysis: cannot open '" + path + "' for writing");
    out << "base_class,target_class,count,mean_predicted_prob\n";
    for (std::size_t c = 0; c < analysis.n_classes; ++c) {
        for (std::size_t k = 0; k < analysis.n_classes; ++k) {
            out << c << "," << k << "," << analysis.target_histogram[c][k] << ","
                << detail::format_double(analysis.mean_predicted_prob[c][k]) << "\n";
        }
    }
}

// CSV of clean and attacked encoder embeddings; projection/plotting is left
// to external tools. The adversarial rows use the untargeted attack that
// pushes the embedding away from the clean one.
inline void export_embeddings(const SiamNet& net, const Dataset& ds, const AttackConfig& attack,
                              std::uint64_t seed, const std::string& path) {
    std::size_t n = ds.size();
    std::vector<Tensor> clean_e(n), adv_e(n);
    parallel_for(n, [&](std::size_t i) {
        clean_e[i] = embed_values(net, ds.features[i]).e;
        std::mt19937_64 rng(mix_seed(seed, 0xe3b0, i));
        Tensor x_adv = attack_untargeted_ssl(net, ds.features[i], ds.features[i], attack,
                                             SslMode::positive_pair, rng);
        adv_e[i] = embed_values(net, x_adv).e;
    });
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("export: cannot open '" + path + "' for writing");
    std::size_t k = net.embed_dim();
    out << "sample_id,label,is_adversarial";
    for (std::size_t d = 0; d < k; ++d) out << ",e_" << d;
    out << "\n";
    auto write_row = [&](std::size_t i, bool adv, const Tensor& e) {
        out << i << "," << ds.labels[i] << "," << (adv ? 1 : 0);
        for (std::size_t d = 0; d < k; ++d) out << "," << detail::format_double(e[d]);
        out << "\n";
    };
    for (std::size_t i = 0; i < n; ++i) write_row(i, false, clean_e[i]);
    for (std::size_t i = 0; i < n; ++i) write_row(i, true, adv_e[i]);
}

}  // namespace taro
