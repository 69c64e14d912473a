#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "taro/common.hpp"
#include "taro/tensor.hpp"

namespace taro {

// Linear binary model f(x) = w . x, one positive pair, one negative, and a
// target whose feature distance from x clears the targeted-attack premise.
struct LinearProblem {
    Tensor w;
    Tensor x;
    Tensor x_neg;
    Tensor x_target;
    double epsilon = 0.5;

    double f(const Tensor& point) const { return w.dot(point); }

    double f_shifted(const Tensor& base, const Tensor& delta) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < base.size(); ++i) acc += w[i] * (base[i] + delta[i]);
        return acc;
    }
};

using Objective = std::function<double(const Tensor& delta)>;

// |f(x) - f(x + delta)|
inline Objective objective_ss(const LinearProblem& p) {
    return [&p](const Tensor& delta) { return std::abs(p.f(p.x) - p.f_shifted(p.x, delta)); };
}

// |f(x) - f(x + delta)| - |f(x_neg) - f(x + delta)|
inline Objective objective_ntxent(const LinearProblem& p) {
    return [&p](const Tensor& delta) {
        double fx = p.f_shifted(p.x, delta);
        return std::abs(p.f(p.x) - fx) - std::abs(p.f(p.x_neg) - fx);
    };
}

// |f(x + delta) - f(x_target)|
inline Objective objective_targeted(const LinearProblem& p) {
    return [&p](const Tensor& delta) {
        return std::abs(p.f_shifted(p.x, delta) - p.f(p.x_target));
    };
}

struct BruteForceResult {
    Tensor delta;
    double value = 0.0;
};

namespace detail {

inline void for_each_grid_point(std::size_t dim, double epsilon, std::size_t grid_n,
                                const std::function<void(const Tensor&)>& visit) {
    Tensor delta = Tensor::zeros({dim});
    std::vector<std::size_t> idx(dim, 0);
    double step = grid_n > 1 ? 2.0 * epsilon / static_cast<double>(grid_n - 1) : 0.0;
    while (true) {
        for (std::size_t d = 0; d < dim; ++d) {
            delta[d] = -epsilon + step * static_cast<double>(idx[d]);
        }
        visit(delta);
        std::size_t d = dim;
        while (d-- > 0) {
            if (++idx[d] < grid_n) break;
            idx[d] = 0;
            if (d == 0) return;
        }
    }
}

}  // namespace detail

// Maximizes an objective over the discretized l-inf ball. Exhaustive grid for
// dim <= 4 (the grid includes delta = 0 for odd grid_n); sign-corner
// enumeration plus random samples otherwise. Ties keep the first point in
// lexicographic visit order.
inline BruteForceResult brute_force_max(const Objective& objective, std::size_t dim,
                                        double epsilon, std::size_t grid_n = 41,
                                        std::uint64_t seed = 0) {
    BruteForceResult best;
    bool found = false;
    auto consider = [&](const Tensor& delta) {
        double v = objective(delta);
        if (!found || v > best.value) {
            found = true;
            best.value = v;
            best.delta = delta;
        }
    };
    if (dim <= 4) {
        detail::for_each_grid_point(dim, epsilon, grid_n, consider);
    } else {
        // corners dominate piecewise-linear objectives
        Tensor corner = Tensor::zeros({dim});
        for (std::size_t mask = 0; mask < (std::size_t{1} << dim) && dim < 24; ++mask) {
            for (std::size_t d = 0; d < dim; ++d) {
                corner[d] = (mask >> d) & 1 ? epsilon : -epsilon;
            }
            consider(corner);
        }
        consider(Tensor::zeros({dim}));
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> dist(-epsilon, epsilon);
        Tensor delta = Tensor::zeros({dim});
        for (int s = 0; s < 10000; ++s) {
            for (std::size_t d = 0; d < dim; ++d) delta[d] = dist(rng);
            consider(delta);
        }
    }
    return best;
}

// Per-instance outcome of one theorem comparison.
struct RangeInstance {
    double ss_objective = 0.0;        // max |f(x) - f(x+d)|
    double other_objective = 0.0;     // literal competing objective at its max
    double ss_range = 0.0;            // appendix range proxy at the ss optimum
    double other_range = 0.0;         // appendix range proxy at the competing optimum
    double ss_displacement = 0.0;     // |f(x) - f(x+d*)| at the ss optimum
    double other_displacement = 0.0;  // |f(x) - f(x+d*)| at the competing optimum
    bool ordering_holds = false;      // other_range >= ss_range
    bool pointwise_holds = false;     // theorem 2 only
};

struct RangeReport {
    std::size_t ensemble_size = 0;
    std::size_t dims = 0;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    double fraction_ordering = 0.0;   // instances where the range proxy ordering holds
    double fraction_literal = 0.0;    // instances where the literal objective ordering holds
    double fraction_pointwise = 1.0;  // theorem 2 pointwise inequality
    double mean_ss_displacement = 0.0;
    double mean_other_displacement = 0.0;
    std::vector<RangeInstance> instances;
};

namespace detail {

inline Tensor random_vector(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(dim);
    for (double& x : v) x = gauss(rng);
    return Tensor::vector(std::move(v));
}

inline double l1_norm(const Tensor& v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) acc += std::abs(v[i]);
    return acc;
}

// Rescales x_target - x so that |f(x_target) - f(x)| > 2 * eps * ||w||_1,
// the feature-distance regime under which the targeted-attack derivation's
// pointwise inequality holds for every delta in the ball.
inline void enforce_target_premise(LinearProblem& p, std::mt19937_64& rng) {
    double wl1 = l1_norm(p.w);
    for (int attempt = 0; attempt < 64; ++attempt) {
        double gap = std::abs(p.f(p.x_target) - p.f(p.x));
        double need = 2.0 * p.epsilon * wl1;
        if (gap > need * 1.05) return;
        if (gap > kNormEps) {
            double grow = (need * 1.25) / gap;
            for (std::size_t i = 0; i < p.x_target.size(); ++i) {
                p.x_target[i] = p.x[i] + (p.x_target[i] - p.x[i]) * grow;
            }
        } else {
            p.x_target = random_vector(p.x.size(), rng);
        }
    }
    throw NumericError("theory: could not satisfy the target-distance premise");
}

inline LinearProblem random_problem(std::size_t dim, double epsilon, std::mt19937_64& rng,
                                    bool with_target) {
    LinearProblem p;
    p.epsilon = epsilon;
    p.w = random_vector(dim, rng);
    while (l1_norm(p.w) <= kNormEps) p.w = random_vector(dim, rng);
    p.x = random_vector(dim, rng);
    p.x_neg = random_vector(dim, rng);
    p.x_target = random_vector(dim, rng);
    if (with_target) enforce_target_premise(p, rng);
    return p;
}

}  // namespace detail

// Compares the untargeted ss objective against nt-xent over an ensemble of
// random linear problems. The ordering statistic uses the range proxy from
// the appendix derivation: A^2 for ss versus A^2 + B^2 for nt-xent, where
// A = |f(x) - f(x+d)| and B = |f(x_neg) - f(x+d)|, each evaluated at its own
// brute-force optimum.
inline RangeReport theorem1_experiment(std::size_t ensemble_size, std::size_t dims, double epsilon,
                                       std::uint64_t seed, std::size_t grid_n = 41) {
    RangeReport report;
    report.ensemble_size = ensemble_size;
    report.dims = dims;
    report.epsilon = epsilon;
    report.seed = seed;
    report.instances.resize(ensemble_size);
    std::vector<LinearProblem> problems(ensemble_size);
    for (std::size_t i = 0; i < ensemble_size; ++i) {
        std::mt19937_64 rng(mix_seed(seed, i));
        problems[i] = detail::random_problem(dims, epsilon, rng, false);
    }
    parallel_for(ensemble_size, [&](std::size_t i) {
        const LinearProblem& p = problems[i];
        RangeInstance& inst = report.instances[i];
        auto ss = brute_force_max(objective_ss(p), dims, epsilon, grid_n, mix_seed(seed, i, 1));
        Objective ntxent_range = [&p](const Tensor& delta) {
            double fx = p.f_shifted(p.x, delta);
            double a = std::abs(p.f(p.x) - fx);
            double b = std::abs(p.f(p.x_neg) - fx);
            return a * a + b * b;
        };
        auto nt_literal =
            brute_force_max(objective_ntxent(p), dims, epsilon, grid_n, mix_seed(seed, i, 2));
        auto nt_range = brute_force_max(ntxent_range, dims, epsilon, grid_n, mix_seed(seed, i, 3));
        inst.ss_objective = ss.value;
        inst.other_objective = nt_literal.value;
        inst.ss_range = ss.value * ss.value;
        inst.other_range = nt_range.value;
        inst.ss_displacement = ss.value;
        inst.other_displacement = objective_ss(p)(nt_range.delta);
        inst.ordering_holds = inst.other_range >= inst.ss_range - 1e-12;
        inst.pointwise_holds = true;
    });
    double ord = 0.0, lit = 0.0, mss = 0.0, mo = 0.0;
    for (const RangeInstance& inst : report.instances) {
        ord += inst.ordering_holds ? 1.0 : 0.0;
        lit += inst.other_objective >= inst.ss_objective - 1e-12 ? 1.0 : 0.0;
        mss += inst.ss_displacement;
        mo += inst.other_displacement;
    }
    double n = static_cast<double>(ensemble_size);
    report.fraction_ordering = ord / n;
    report.fraction_literal = lit / n;
    report.mean_ss_displacement = mss / n;
    report.mean_other_displacement = mo / n;
    return report;
}

// Compares the targeted objective against the ss objective, and checks the
// pointwise inequality |f(x) - f(x+d)| < |f(x') - f(x+d)| at the ss-optimal
// delta for every premise-satisfying instance.
inline RangeReport theorem2_experiment(std::size_t ensemble_size, std::size_t dims, double epsilon,
                                       std::uint64_t seed, std::size_t grid_n = 41) {
    RangeReport report;
    report.ensemble_size = ensemble_size;
    report.dims = dims;
    report.epsilon = epsilon;
    report.seed = seed;
    report.instances.resize(ensemble_size);
    std::vector<LinearProblem> problems(ensemble_size);
    for (std::size_t i = 0; i < ensemble_size; ++i) {
        std::mt19937_64 rng(mix_seed(seed, i));
        problems[i] = detail::random_problem(dims, epsilon, rng, true);
    }
    parallel_for(ensemble_size, [&](std::size_t i) {
        const LinearProblem& p = problems[i];
        RangeInstance& inst = report.instances[i];
        auto ss = brute_force_max(objective_ss(p), dims, epsilon, grid_n, mix_seed(seed, i, 1));
        auto targeted =
            brute_force_max(objective_targeted(p), dims, epsilon, grid_n, mix_seed(seed, i, 2));
        inst.ss_objective = ss.value;
        inst.other_objective = targeted.value;
        inst.ss_range = ss.value;
        inst.other_range = targeted.value;
        inst.ss_displacement = ss.value;
        inst.other_displacement = objective_ss(p)(targeted.delta);
        inst.ordering_holds = targeted.value >= ss.value - 1e-12;
        inst.pointwise_holds = objective_ss(p)(ss.delta) < objective_targeted(p)(ss.delta);
    });
    double ord = 0.0, lit = 0.0, pw = 0.0, mss = 0.0, mo = 0.0;
    for (const RangeInstance& inst : report.instances) {
        ord += inst.ordering_holds ? 1.0 : 0.0;
        lit += inst.other_objective >= inst.ss_objective - 1e-12 ? 1.0 : 0.0;
        pw += inst.pointwise_holds ? 1.0 : 0.0;
        mss += inst.ss_displacement;
        mo += inst.other_displacement;
    }
    double n = static_cast<double>(ensemble_size);
    report.fraction_ordering = ord / n;
    report.fraction_literal = lit / n;
    report.fraction_pointwise = pw / n;
    report.mean_ss_displacement = mss / n;
    report.mean_other_displacement = mo / n;
    return report;
}

}  // namespace taro
