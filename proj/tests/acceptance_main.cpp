// Acceptance gate: one pass/fail line per criterion, fixed tolerances, and a
// nonzero exit code if anything fails. Each check is built on an independent
// oracle (finite differences, brute force, analytic values) or on a pinned
// directional trend measured on the default synthetic benchmark.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "taro/taro.hpp"

using namespace taro;

namespace {

int failures = 0;

void report(int id, const std::string& what, bool ok, const std::string& detail) {
    std::printf("criterion %2d [%s] %s (%s)\n", id, ok ? "PASS" : "FAIL", what.c_str(),
                detail.c_str());
    if (!ok) ++failures;
}

Tensor random_tensor(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(dim);
    for (double& x : v) x = gauss(rng);
    return Tensor::vector(std::move(v));
}

SiamNet small_net(std::uint64_t seed) {
    ModelConfig cfg;
    cfg.encoder.dims = {4, 6, 5};
    cfg.projector.dims = {5, 5, 4};
    cfg.predictor.dims = {4, 3, 4};
    return cfg.make_net(seed);
}

constexpr double kGradRtol = 1e-4;
constexpr double kGradAtol = 1e-6;

bool grad_close(double got, double want) {
    return std::abs(got - want) <= kGradAtol + kGradRtol * std::abs(want);
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness against central finite differences.
void criterion_gradients() {
    double max_rel = 0.0;
    bool ok = true;
    auto note = [&](const std::vector<Tensor>& grads, const std::vector<Tensor>& fd) {
        for (std::size_t p = 0; p < grads.size(); ++p) {
            for (std::size_t i = 0; i < grads[p].size(); ++i) {
                if (!grad_close(grads[p][i], fd[p][i])) ok = false;
                double denom = std::max(1e-6, std::abs(fd[p][i]));
                max_rel = std::max(max_rel, std::abs(grads[p][i] - fd[p][i]) / denom);
            }
        }
    };
    // Generic check for losses without stop-gradient: finite differences of
    // the loss itself.
    auto check_plain = [&](auto&& lossfn, std::vector<Tensor> inputs) {
        Tape tape;
        std::vector<Var> leaves;
        for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
        auto grads = tape.backward(lossfn(tape, leaves), leaves);
        auto fd = finite_diff_grad(
            [&](std::span<const Tensor> p) {
                Tape t;
                std::vector<Var> ls;
                for (const Tensor& q : p) ls.push_back(t.leaf(q));
                return t.value(lossfn(t, ls)).scalar_value();
            },
            inputs);
        note(grads, fd);
    };

    for (std::uint64_t net_seed = 1; net_seed <= 50; ++net_seed) {
        SiamNet net = small_net(net_seed);
        std::mt19937_64 rng(net_seed * 7919 + 13);
        Tensor x1 = random_tensor(4, rng);
        Tensor x2 = random_tensor(4, rng);
        Tensor x3 = random_tensor(4, rng);
        Tensor x4 = random_tensor(4, rng);

        // Stop-gradient losses: the finite-difference oracle must freeze the
        // stopped branch at its base value, otherwise it measures the full
        // derivative which stop_gradient intentionally discards.
        Tensor z1_0 = embed_values(net, x1).z;
        Tensor z2_0 = embed_values(net, x2).z;
        Tensor z3_0 = embed_values(net, x3).z;
        auto frozen_pair = [&](Tape& tape, const NetVars& vars, Var a, Var b, const Tensor& za,
                               const Tensor& zb) {
            Var pa = forward_embed(tape, vars, a).p;
            Var pb = forward_embed(tape, vars, b).p;
            Var t1 = tape.cosine_similarity(pa, tape.leaf(zb));
            Var t2 = tape.cosine_similarity(pb, tape.leaf(za));
            return tape.scale(tape.add(t1, t2), -0.5);
        };
        {
            Tape tape;
            NetVars vars = NetVars::make(tape, net);
            Var a = tape.leaf(x1);
            Var b = tape.leaf(x2);
            auto grads = tape.backward(loss_ss(tape, vars, a, b), std::vector<Var>{a, b});
            auto fd = finite_diff_grad(
                [&](std::span<const Tensor> p) {
                    Tape t;
                    NetVars v = NetVars::make(t, net);
                    return t.value(frozen_pair(t, v, t.leaf(p[0]), t.leaf(p[1]), z1_0, z2_0))
                        .scalar_value();
                },
                std::vector<Tensor>{x1, x2});
            note(grads, fd);
        }
        {
            Tape tape;
            NetVars vars = NetVars::make(tape, net);
            Var a = tape.leaf(x1);
            Var b = tape.leaf(x2);
            Var c = tape.leaf(x3);
            auto grads =
                tape.backward(loss_taro_ss(tape, vars, a, b, c), std::vector<Var>{a, b, c});
            auto fd = finite_diff_grad(
                [&](std::span<const Tensor> p) {
                    Tape t;
                    NetVars v = NetVars::make(t, net);
                    Var va = t.leaf(p[0]), vb = t.leaf(p[1]), vc = t.leaf(p[2]);
                    Var sum = t.add(t.add(frozen_pair(t, v, va, vb, z1_0, z2_0),
                                          frozen_pair(t, v, vb, vc, z2_0, z3_0)),
                                    frozen_pair(t, v, vc, va, z3_0, z1_0));
                    return t.value(sum).scalar_value();
                },
                std::vector<Tensor>{x1, x2, x3});
            note(grads, fd);
        }
        // nt-xent composed with the network projections
        check_plain(
            [&](Tape& tape, std::vector<Var>& ls) {
                NetVars v = NetVars::make(tape, net);
                Var z0 = forward_embed(tape, v, ls[0]).z;
                std::vector<Var> pos{forward_embed(tape, v, ls[1]).z};
                std::vector<Var> neg{forward_embed(tape, v, ls[2]).z};
                return loss_nt_xent(tape, z0, pos, neg, 0.5);
            },
            {x1, x2, x3});
        // contrastive attack objective
        check_plain(
            [&](Tape& tape, std::vector<Var>& ls) {
                NetVars v = NetVars::make(tape, net);
                Var z0 = forward_embed(tape, v, ls[0]).z;
                std::vector<Var> neg{forward_embed(tape, v, ls[1]).z};
                Var zt = forward_embed(tape, v, ls[2]).z;
                return loss_ours_rocl_attack(tape, z0, neg, zt, 0.5, 2.0);
            },
            {x1, x2, x3});
        // contrastive training loss with the adversary as extra positive
        check_plain(
            [&](Tape& tape, std::vector<Var>& ls) {
                NetVars v = NetVars::make(tape, net);
                Var z1 = forward_embed(tape, v, ls[0]).z;
                Var z2 = forward_embed(tape, v, ls[1]).z;
                Var za = forward_embed(tape, v, ls[2]).z;
                std::vector<Var> neg{forward_embed(tape, v, ls[3]).z};
                return loss_taro_contrastive(tape, z1, z2, za, neg, 0.5);
            },
            {x1, x2, x3, x4});
        // cross entropy through a random linear head on the encoder features
        SiamNet headed = net;
        headed.head = LinearHead::init(3, net.embed_dim(), rng);
        check_plain(
            [&](Tape& tape, std::vector<Var>& ls) {
                NetVars v = NetVars::make(tape, headed);
                // block_encoder=false: the probe-training default stops the
                // encoder gradient, which finite differences cannot see
                Var logits =
                    head_logits(tape, v, forward_embed(tape, v, ls[0]).e, /*block_encoder=*/false);
                return loss_cross_entropy(tape, logits, net_seed % 3);
            },
            {x1});
    }
    char detail[64];
    std::snprintf(detail, sizeof(detail), "max rel err %.2e, rtol 1e-4 atol 1e-6", max_rel);
    report(1, "loss gradients match central finite differences on 50 nets", ok, detail);
}

// ---------------------------------------------------------------------------
// 2. Stop-gradient semantics: zero contribution through the stopped branch.
void criterion_stop_gradient() {
    bool ok = true;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        SiamNet net = small_net(seed);
        std::mt19937_64 rng(seed * 31 + 5);
        Tensor x1 = random_tensor(4, rng);
        Tensor x2 = random_tensor(4, rng);
        {
            // an arbitrary graph wrapped entirely in stop_gradient
            Tape tape;
            NetVars vars = NetVars::make(tape, net);
            Var x = tape.leaf(x1);
            Var y = tape.sum(tape.stop_gradient(
                tape.mul(forward_embed(tape, vars, x).z, tape.relu(x))));
            Tensor g = tape.backward(y, std::vector<Var>{x})[0];
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (g[i] != 0.0) ok = false;
            }
        }
        {
            // the stopped branch of the agreement loss: cos(p(x2), sg z(x1))
            // contributes exactly zero gradient to x1
            Tape tape;
            NetVars vars = NetVars::make(tape, net);
            Var a = tape.leaf(x1);
            Var b = tape.leaf(x2);
            Var term = tape.cosine_similarity(forward_embed(tape, vars, b).p,
                                              tape.stop_gradient(forward_embed(tape, vars, a).z));
            Tensor g = tape.backward(term, std::vector<Var>{a})[0];
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (g[i] != 0.0) ok = false;
            }
        }
    }
    report(2, "stopped branches contribute exactly zero gradient", ok, "50 randomized graphs");
}

// ---------------------------------------------------------------------------
// 3. Analytic loss identities.
void criterion_loss_identities() {
    bool ok = true;
    // p == z net: agreement loss of a point with itself is exactly -1
    ModelConfig idc;
    idc.encoder.dims = {3, 3};
    idc.projector.dims = {3, 3};
    idc.predictor.dims = {3, 3};
    SiamNet net = idc.make_net(1);
    auto set_identity = [](Mlp& mlp) {
        std::size_t d = mlp.weights[0].shape()[0];
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) mlp.weights[0][i * d + j] = i == j ? 1.0 : 0.0;
            mlp.biases[0][i] = 0.0;
        }
    };
    set_identity(net.encoder);
    set_identity(net.projector);
    set_identity(*net.predictor);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 10; ++i) {
        Tensor x = random_tensor(3, rng);
        Tape tape;
        NetVars vars = NetVars::make(tape, net);
        double v = tape.value(loss_ss(tape, vars, tape.leaf(x), tape.leaf(x))).scalar_value();
        if (std::abs(v - (-1.0)) > 1e-9) ok = false;
    }
    {
        // single positive, no negatives: numerator equals denominator, 0 exactly
        Tape tape;
        Var z = tape.leaf(Tensor::vector({0.3, -0.7}));
        std::vector<Var> pos{tape.leaf(Tensor::vector({1.0, 2.0}))};
        double v = tape.value(loss_nt_xent(tape, z, pos, {}, 0.5)).scalar_value();
        if (v != 0.0) ok = false;
    }
    {
        // sim 1 positive, sim 0 negative, tau 1: -log(e / (e + 1))
        Tape tape;
        Var z = tape.leaf(Tensor::vector({1.0, 0.0}));
        std::vector<Var> pos{tape.leaf(Tensor::vector({2.0, 0.0}))};
        std::vector<Var> neg{tape.leaf(Tensor::vector({0.0, 1.0}))};
        double v = tape.value(loss_nt_xent(tape, z, pos, neg, 1.0)).scalar_value();
        double want = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
        if (std::abs(v - want) > 1e-9) ok = false;
    }
    report(3, "analytic loss identities", ok, "self-agreement -1, nt-xent 0 and -log(e/(e+1))");
}

// ---------------------------------------------------------------------------
// 4. PGD ball invariant on 10^4 randomized attacks plus the ascent property.
void criterion_pgd() {
    const std::size_t n = 10000;
    std::vector<char> ball_ok(n, 0), ascended(n, 0);
    parallel_for(n, [&](std::size_t i) {
        SiamNet net = small_net(1 + i / 1000);  // ten distinct nets
        std::mt19937_64 data_rng(i * 2654435761u + 17);
        Tensor x = random_tensor(4, data_rng);
        Tensor other = random_tensor(4, data_rng);
        AttackConfig cfg = AttackConfig::train_defaults(0.25);
        bool targeted = i % 2 == 1;

        // ball invariant, measured with random start enabled
        std::mt19937_64 rng(i);
        Tensor adv = targeted ? attack_targeted(net, x, other, cfg, rng)
                              : attack_untargeted_ssl(net, x, other, cfg,
                                                      SslMode::positive_pair, rng);
        double m = 0.0;
        for (std::size_t d = 0; d < adv.size(); ++d) {
            m = std::max(m, std::abs(adv[d] - x[d]));
        }
        ball_ok[i] = m <= cfg.epsilon + 1e-12;

        // ascent of the attack objective from the clean point. The gradient
        // flows only through the perturbed view's branch, so the ascended
        // objective is the cosine between p(x') and the fixed z(other),
        // negated for the untargeted attack.
        cfg.random_start = false;
        std::mt19937_64 rng2(i);
        Tensor adv2 = targeted ? attack_targeted(net, x, other, cfg, rng2)
                               : attack_untargeted_ssl(net, x, other, cfg,
                                                       SslMode::positive_pair, rng2);
        auto objective = [&](const Tensor& a) {
            Tape tape;
            NetVars vars = NetVars::make(tape, net);
            Var pa = forward_embed(tape, vars, tape.leaf(a)).p;
            Var zb = forward_embed(tape, vars, tape.leaf(other)).z;
            double c = tape.value(tape.cosine_similarity(pa, zb)).scalar_value();
            return targeted ? c : -c;
        };
        ascended[i] = objective(adv2) >= objective(x) - 1e-12;
    });
    std::size_t balls = 0, ups = 0;
    for (std::size_t i = 0; i < n; ++i) {
        balls += ball_ok[i];
        ups += ascended[i];
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "ball %zu/%zu, ascent %zu/%zu (need all, >=95%%)", balls,
                  n, ups, n);
    report(4, "pgd ball invariant and ascent property", balls == n && ups >= n * 95 / 100, detail);
}

// ---------------------------------------------------------------------------
// 5. Target selection against an independent brute-force scorer.
std::size_t brute_force_target(std::span<const EmbeddingValues> candidates, std::size_t i,
                               std::size_t positive, double tau) {
    std::size_t n = candidates.size();
    std::vector<double> sim(n), ent(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i || j == positive) {
            sim[j] = -1.0;
        } else {
            const Tensor& a = candidates[i].e;
            const Tensor& b = candidates[j].e;
            sim[j] = a.dot(b) / (a.norm2() * b.norm2());
        }
        const Tensor& p = candidates[j].p;
        double m = p[0] / tau;
        for (std::size_t k = 1; k < p.size(); ++k) m = std::max(m, p[k] / tau);
        double denom = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) denom += std::exp(p[k] / tau - m);
        double h = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            double s = std::exp(p[k] / tau - m) / denom;
            if (s > 0.0) h -= s * std::log(s);
        }
        ent[j] = h;
    }
    auto l2norm = [](std::vector<double>& v) {
        double acc = 0.0;
        for (double x : v) acc += x * x;
        acc = std::sqrt(acc);
        if (acc > 1e-12) {
            for (double& x : v) x /= acc;
        }
    };
    l2norm(sim);
    l2norm(ent);
    std::size_t best = n;
    double best_score = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i || j == positive) continue;
        double s = sim[j] + ent[j];
        if (best == n || s > best_score) {
            best = j;
            best_score = s;
        }
    }
    return best;
}

void criterion_target_selection() {
    std::mt19937_64 rng(23);
    ScoreConfig cfg;
    bool ok = true;
    std::size_t checked = 0;
    for (std::size_t batch_size = 2; batch_size <= 8; ++batch_size) {
        for (int trial = 0; trial < 25; ++trial) {
            std::vector<EmbeddingValues> batch;
            for (std::size_t i = 0; i < batch_size; ++i) {
                batch.push_back(
                    EmbeddingValues{random_tensor(4, rng), random_tensor(4, rng),
                                    random_tensor(4, rng)});
            }
            // self-pairing for batches of two (pairing to the other sample
            // would exclude every candidate), random non-self pairing above
            std::vector<std::size_t> pairing(batch_size);
            for (std::size_t i = 0; i < batch_size; ++i) {
                pairing[i] = batch_size == 2
                                 ? i
                                 : (i + 1 + static_cast<std::size_t>(rng() % (batch_size - 1))) %
                                       batch_size;
            }
            std::vector<std::size_t> sel = select_targets(batch, batch, pairing, cfg);
            for (std::size_t i = 0; i < batch_size; ++i) {
                std::size_t want = brute_force_target(batch, i, pairing[i], cfg.tau_score);
                if (sel[i] != want || sel[i] == i ||
                    (pairing[i] != i && sel[i] == pairing[i])) {
                    ok = false;
                }
                ++checked;
            }
        }
    }
    char detail[64];
    std::snprintf(detail, sizeof(detail), "%zu selections, batches 2..8", checked);
    report(5, "target selection matches the brute-force scorer", ok, detail);
}

// ---------------------------------------------------------------------------
// 6/7. Linear-model range experiments.
void criterion_theorems() {
    RangeReport r1 = theorem1_experiment(500, 2, 0.5, 7);
    char d1[96];
    std::snprintf(d1, sizeof(d1), "ordering %.1f%% of 500 (need >=90%%)",
                  100.0 * r1.fraction_ordering);
    report(6, "contrastive range dominates agreement-only range", r1.fraction_ordering >= 0.90, d1);

    RangeReport r2 = theorem2_experiment(500, 2, 0.5, 7);
    char d2[128];
    std::snprintf(d2, sizeof(d2), "pointwise %.1f%% (need 100%%), ordering %.1f%% (need >=95%%)",
                  100.0 * r2.fraction_pointwise, 100.0 * r2.fraction_ordering);
    report(7, "targeted range dominates under the premise", r2.fraction_pointwise == 1.0 &&
                                                                r2.fraction_ordering >= 0.95,
           d2);
}

// ---------------------------------------------------------------------------
// 8-11. Directional trends on the default synthetic benchmark.
struct BenchmarkOutcome {
    double clean[3] = {0, 0, 0};    // untargeted, random_target, taro_target
    double robust[3] = {0, 0, 0};
    double transfer_robust[3] = {0, 0, 0};  // untargeted and taro only
    double top2_min_fraction = 1.0;
};

BenchmarkOutcome run_benchmark() {
    SyntheticDatasetSpec spec;
    spec.n_classes = 5;
    spec.dim = 16;
    spec.samples_per_class = 40;
    spec.separation = 8.0;
    spec.cluster_std = 1.0;
    spec.seed = 101;
    Dataset ds = generate_clusters(spec);

    // domain-shifted copy for transfer: every feature translated by a fixed
    // offset comparable to the cluster spread
    Dataset shifted = ds;
    for (Tensor& f : shifted.features) {
        for (std::size_t k = 0; k < f.size(); ++k) f[k] += 1.5;
    }

    auto base_cfg = [&](std::uint64_t seed) {
        RunConfig cfg;
        cfg.model.encoder.dims = {16, 24, 8};
        cfg.model.projector.dims = {8, 8, 8};
        cfg.model.predictor.dims = {8, 4, 8};
        cfg.epochs = 60;
        cfg.batch_size = 16;
        cfg.attack_steps = 10;
        cfg.eval_attack_steps = 10;
        cfg.head_epochs = 30;
        cfg.epsilon = 0.8;
        cfg.seed = seed;
        return cfg;
    };

    const AttackMode modes[3] = {AttackMode::untargeted, AttackMode::random_target,
                                 AttackMode::taro_target};
    BenchmarkOutcome out;
    const int n_seeds = 3;
    for (int s = 1; s <= n_seeds; ++s) {
        for (int m = 0; m < 3; ++m) {
            RunConfig cfg = base_cfg(static_cast<std::uint64_t>(s));
            cfg.attack_mode = modes[m];
            TrainResult r = train_ssl(cfg, ds);
            Metrics lin = linear_evaluation(r.net, ds, make_eval_attack(cfg, ds), cfg);
            out.clean[m] += lin.clean_acc / n_seeds;
            out.robust[m] += lin.robust_acc / n_seeds;
            if (m != 1) {
                Metrics tr =
                    transfer_evaluation(r.net, shifted, make_eval_attack(cfg, shifted), cfg);
                out.transfer_robust[m] += tr.robust_acc / n_seeds;
            }
            // The target-class distribution is a figure-style analysis of one
            // pinned model (the first seed's score-targeted run). The other
            // seeds can collapse the predictor's output scale, which leaves
            // the probe perfectly confident on the train split and makes its
            // "most confused classes" numerical noise; accuracy trends (8-10)
            // still average over all seeds.
            if (m == 2 && s == 1) {
                TargetAnalysis ta = run_target_analysis(r.net, ds, cfg);
                for (std::size_t c = 0; c < ta.n_classes; ++c) {
                    auto [a, b] = top2_confused_classes(ta, c);
                    std::size_t total = 0;
                    for (std::size_t k = 0; k < ta.n_classes; ++k) {
                        total += ta.target_histogram[c][k];
                    }
                    double frac = total == 0
                                      ? 0.0
                                      : static_cast<double>(ta.target_histogram[c][a] +
                                                            ta.target_histogram[c][b]) /
                                            static_cast<double>(total);
                    out.top2_min_fraction = std::min(out.top2_min_fraction, frac);
                }
            }
        }
    }
    return out;
}

void criterion_trends(const BenchmarkOutcome& b) {
    char d8[128];
    std::snprintf(d8, sizeof(d8),
                  "robust %.1f vs %.1f (+%.1f, need >=5), clean %.1f vs %.1f (+%.1f, need >=3)",
                  b.robust[1], b.robust[0], b.robust[1] - b.robust[0], b.clean[1], b.clean[0],
                  b.clean[1] - b.clean[0]);
    report(8, "random-target training beats untargeted training",
           b.robust[1] - b.robust[0] >= 5.0 && b.clean[1] - b.clean[0] >= 3.0, d8);

    char d9[96];
    std::snprintf(d9, sizeof(d9), "score-based %.1f vs random %.1f robust (need >=)", b.robust[2],
                  b.robust[1]);
    report(9, "score-based selection at least matches random selection",
           b.robust[2] >= b.robust[1], d9);

    char d10[96];
    std::snprintf(d10, sizeof(d10), "transfer robust %.1f vs %.1f (+%.1f, need >=3)",
                  b.transfer_robust[2], b.transfer_robust[0],
                  b.transfer_robust[2] - b.transfer_robust[0]);
    report(10, "score-targeted pretraining transfers more robustly",
           b.transfer_robust[2] - b.transfer_robust[0] >= 3.0, d10);

    char d11[96];
    std::snprintf(d11, sizeof(d11), "min top-2 confused fraction %.2f (need >=0.30)",
                  b.top2_min_fraction);
    report(11, "targets concentrate in the probe's confused classes",
           b.top2_min_fraction >= 0.30, d11);
}

// ---------------------------------------------------------------------------
// 12. Bitwise-identical artifacts across reruns.
std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_determinism() {
    SyntheticDatasetSpec spec;
    spec.n_classes = 3;
    spec.dim = 8;
    spec.samples_per_class = 12;
    spec.seed = 11;
    Dataset ds = generate_clusters(spec);
    RunConfig cfg;
    cfg.model.encoder.dims = {8, 10, 6};
    cfg.model.projector.dims = {6, 6, 4};
    cfg.model.predictor.dims = {4, 3, 4};
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.attack_steps = 3;
    cfg.eval_attack_steps = 3;
    cfg.head_epochs = 5;
    cfg.epsilon = 0.2;
    cfg.seed = 9;

    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "taro_acceptance_det";
    fs::create_directories(dir);
    std::vector<std::string> metrics_bytes, ckpt_bytes;
    for (int run = 0; run < 2; ++run) {
        TrainResult r = train_ssl(cfg, ds);
        fs::path mpath = dir / ("metrics" + std::to_string(run) + ".jsonl");
        fs::path cpath = dir / ("checkpoint" + std::to_string(run) + ".json");
        write_metrics_jsonl(r.metrics, mpath.string());
        Checkpoint ckpt;
        ckpt.config = cfg;
        ckpt.net = r.net;
        ckpt.epoch = cfg.epochs;
        ckpt.velocity = r.velocity;
        save_checkpoint(ckpt, cpath.string());
        metrics_bytes.push_back(slurp(mpath));
        ckpt_bytes.push_back(slurp(cpath));
    }
    fs::remove_all(dir);
    bool metrics_equal = metrics_bytes[0] == metrics_bytes[1] && !metrics_bytes[0].empty();
    bool ckpt_equal = ckpt_bytes[0] == ckpt_bytes[1] && !ckpt_bytes[0].empty();
    report(12, "identical reruns produce bitwise-identical artifacts",
           metrics_equal && ckpt_equal,
           metrics_equal && ckpt_equal ? "metrics and checkpoint bytes equal" : "byte mismatch");
}

}  // namespace

int main() {
    auto t0 = std::chrono::steady_clock::now();
    criterion_gradients();
    criterion_stop_gradient();
    criterion_loss_identities();
    criterion_pgd();
    criterion_target_selection();
    criterion_theorems();
    BenchmarkOutcome bench = run_benchmark();
    criterion_trends(bench);
    criterion_determinism();
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s: %d criterion(s) failed, %.1f s total\n", failures == 0 ? "OK" : "FAILURES",
                failures, secs);
    return failures == 0 ? 0 : 1;
}
