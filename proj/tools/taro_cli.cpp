// Command-line surface: dataset generation, training, evaluation, transfer,
// target analysis, the linear-model range experiments, and embedding export.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "taro/taro.hpp"

namespace {

using nlohmann::json;

taro::SyntheticDatasetSpec dataset_spec_from_json(const json& j) {
    static const std::set<std::string> known = {"n_classes",  "dim",         "samples_per_class",
                                                "separation", "cluster_std", "seed"};
    if (!j.is_object()) throw taro::ConfigError("dataset spec: expected a JSON object");
    for (const auto& item : j.items()) {
        if (!known.count(item.key())) {
            throw taro::ConfigError("dataset spec: unknown key '" + item.key() + "'");
        }
    }
    taro::SyntheticDatasetSpec spec;
    auto get = [&j](const char* key, auto& out) {
        if (j.contains(key)) {
            try {
                out = j.at(key).template get<std::decay_t<decltype(out)>>();
            } catch (const json::exception& e) {
                throw taro::ConfigError("dataset spec: bad value for '" + std::string(key) +
                                        "': " + e.what());
            }
        }
    };
    get("n_classes", spec.n_classes);
    get("dim", spec.dim);
    get("samples_per_class", spec.samples_per_class);
    get("separation", spec.separation);
    get("cluster_std", spec.cluster_std);
    get("seed", spec.seed);
    spec.validate();
    return spec;
}

taro::Dataset load_data_for(const taro::RunConfig& cfg, const std::string& override_dir = "") {
    std::string dir = override_dir.empty() ? cfg.data_dir : override_dir;
    if (dir.empty()) throw taro::ConfigError("config: data_dir is required");
    return taro::load_dataset_dir(dir);
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_dir) {
    taro::SyntheticDatasetSpec spec = dataset_spec_from_json(taro::load_json_file(spec_path));
    taro::Dataset ds = taro::generate_clusters(spec);
    taro::save_dataset_dir(ds, out_dir);
    std::cout << "wrote " << ds.train_idx.size() << " train / " << ds.test_idx.size()
              << " test rows to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::string& resume_path) {
    taro::RunConfig cfg = taro::run_config_from_json(taro::load_json_file(config_path));
    taro::Dataset ds = load_data_for(cfg);
    std::filesystem::create_directories(out_dir);

    taro::TrainResult result;
    if (resume_path.empty()) {
        result = taro::train_ssl(cfg, ds);
    } else {
        taro::Checkpoint ckpt = taro::load_checkpoint(resume_path);
        result = taro::train_ssl(cfg, ds, std::move(ckpt.net), ckpt.epoch,
                                 std::move(ckpt.velocity));
    }

    taro::AttackConfig eval_attack = taro::make_eval_attack(cfg, ds);
    taro::Metrics linear = taro::linear_evaluation(result.net, ds, eval_attack, cfg);
    taro::Metrics robust = taro::robust_linear_evaluation(result.net, ds, eval_attack, cfg);

    taro::Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.net = result.net;
    ckpt.epoch = cfg.epochs;
    ckpt.velocity = result.velocity;
    taro::save_checkpoint(ckpt, out_dir + "/checkpoint.json");
    taro::write_metrics_jsonl(result.metrics, out_dir + "/metrics.jsonl");
    json summary = taro::metrics_summary_json(result.metrics, linear, robust);
    taro::write_json_file(summary, out_dir + "/summary.json");
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir, bool robust_head,
             double eps, int steps) {
    taro::Checkpoint ckpt = taro::load_checkpoint(ckpt_path);
    taro::RunConfig cfg = ckpt.config;
    if (eps >= 0.0) cfg.epsilon = eps;
    if (steps > 0) cfg.eval_attack_steps = steps;
    taro::Dataset ds = load_data_for(cfg, data_dir);
    taro::AttackConfig eval_attack = taro::make_eval_attack(cfg, ds);
    if (eps == 0.0) eval_attack.epsilon = 0.0;  // --eps 0 disables the attack
    taro::Metrics m = robust_head
                          ? taro::robust_linear_evaluation(ckpt.net, ds, eval_attack, cfg)
                          : taro::linear_evaluation(ckpt.net, ds, eval_attack, cfg);
    json j{{"clean_acc", m.clean_acc}, {"robust_acc", m.robust_acc}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_transfer(const std::string& ckpt_path, const std::string& data_dir) {
    taro::Checkpoint ckpt = taro::load_checkpoint(ckpt_path);
    taro::Dataset ds = taro::load_dataset_dir(data_dir);
    taro::AttackConfig eval_attack = taro::make_eval_attack(ckpt.config, ds);
    taro::Metrics m = taro::transfer_evaluation(ckpt.net, ds, eval_attack, ckpt.config);
    json j{{"clean_acc", m.clean_acc}, {"robust_acc", m.robust_acc}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_analyze_targets(const std::string& ckpt_path, const std::string& data_dir,
                        const std::string& out_csv) {
    taro::Checkpoint ckpt = taro::load_checkpoint(ckpt_path);
    taro::Dataset ds = taro::load_dataset_dir(data_dir);
    taro::TargetAnalysis analysis = taro::run_target_analysis(ckpt.net, ds, ckpt.config);
    taro::write_target_analysis_csv(analysis, out_csv);
    std::cout << "wrote target histogram for " << analysis.n_classes << " classes to " << out_csv
              << "\n";
    return 0;
}

int cmd_theory(int which, std::size_t ensemble, std::size_t dim, double eps, std::uint64_t seed,
               const std::string& out_path) {
    taro::RangeReport report = which == 1 ? taro::theorem1_experiment(ensemble, dim, eps, seed)
                                          : taro::theorem2_experiment(ensemble, dim, eps, seed);
    json j = taro::range_report_to_json(report);
    if (!out_path.empty()) taro::write_json_file(j, out_path);
    std::printf("instances        %zu (dim %zu, eps %g)\n", report.ensemble_size, report.dims,
                report.epsilon);
    std::printf("ordering holds   %.1f%%\n", 100.0 * report.fraction_ordering);
    std::printf("literal holds    %.1f%%\n", 100.0 * report.fraction_literal);
    if (which == 2) std::printf("pointwise holds  %.1f%%\n", 100.0 * report.fraction_pointwise);
    std::printf("mean displacement: base %.4f, competing %.4f\n", report.mean_ss_displacement,
                report.mean_other_displacement);
    return 0;
}

int cmd_export_embeddings(const std::string& ckpt_path, const std::string& data_dir,
                          const std::string& out_csv) {
    taro::Checkpoint ckpt = taro::load_checkpoint(ckpt_path);
    taro::Dataset ds = taro::load_dataset_dir(data_dir);
    taro::AttackConfig attack = taro::make_eval_attack(ckpt.config, ds);
    taro::export_embeddings(ckpt.net, ds, attack, ckpt.config.seed, out_csv);
    std::cout << "wrote " << 2 * ds.size() << " embedding rows to " << out_csv << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"taro: adversarial self-supervised learning laboratory"};
    app.require_subcommand(1);

    std::string spec_path, config_path, ckpt_path, data_dir, out_path, resume_path;
    bool robust_head = false;
    double eps = -1.0;
    int steps = 0;
    int which = 1;
    std::size_t ensemble = 500, dim = 2;
    double theory_eps = 0.5;
    std::uint64_t seed = 1;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic cluster dataset");
    gen->add_option("--spec", spec_path, "dataset spec JSON")->required();
    gen->add_option("--out", out_path, "output directory")->required();

    auto* train = app.add_subcommand("train", "adversarial SSL training run");
    train->add_option("--config", config_path, "run config JSON")->required();
    train->add_option("--out", out_path, "output directory")->required();
    train->add_option("--resume", resume_path, "checkpoint to resume from");

    auto* eval = app.add_subcommand("eval", "linear / robust-linear evaluation");
    eval->add_option("--checkpoint", ckpt_path)->required();
    eval->add_option("--data", data_dir)->required();
    eval->add_flag("--robust-head", robust_head, "train the probe on adversarial examples");
    eval->add_option("--eps", eps, "override evaluation-attack radius");
    eval->add_option("--steps", steps, "override evaluation-attack steps");

    auto* transfer = app.add_subcommand("transfer", "probe a frozen encoder on another dataset");
    transfer->add_option("--checkpoint", ckpt_path)->required();
    transfer->add_option("--data", data_dir)->required();

    auto* analyze = app.add_subcommand("analyze-targets", "target-class histogram of the score");
    analyze->add_option("--checkpoint", ckpt_path)->required();
    analyze->add_option("--data", data_dir)->required();
    analyze->add_option("--out", out_path, "output CSV")->required();

    auto* theory = app.add_subcommand("theory", "perturbation-range experiments on linear models");
    theory->add_option("--which", which, "experiment 1 or 2")->check(CLI::Range(1, 2));
    theory->add_option("--ensemble", ensemble, "number of random problems");
    theory->add_option("--dim", dim, "problem dimension");
    theory->add_option("--eps", theory_eps, "ball radius");
    theory->add_option("--seed", seed, "rng seed");
    theory->add_option("--out", out_path, "report JSON path");

    auto* exp = app.add_subcommand("export-embeddings", "clean + attacked encoder embeddings CSV");
    exp->add_option("--checkpoint", ckpt_path)->required();
    exp->add_option("--data", data_dir)->required();
    exp->add_option("--out", out_path, "output CSV")->required();

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_data(spec_path, out_path);
        if (train->parsed()) return cmd_train(config_path, out_path, resume_path);
        if (eval->parsed()) return cmd_eval(ckpt_path, data_dir, robust_head, eps, steps);
        if (transfer->parsed()) return cmd_transfer(ckpt_path, data_dir);
        if (analyze->parsed()) return cmd_analyze_targets(ckpt_path, data_dir, out_path);
        if (theory->parsed())
            return cmd_theory(which, ensemble, dim, theory_eps, seed, out_path);
        if (exp->parsed()) return cmd_export_embeddings(ckpt_path, data_dir, out_path);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const taro::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const taro::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const taro::NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const taro::ShapeError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
