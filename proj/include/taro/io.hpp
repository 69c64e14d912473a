#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "taro/common.hpp"
#include "taro/models.hpp"
#include "taro/tensor.hpp"
#include "taro/theory.hpp"
#include "taro/train.hpp"

namespace taro {

inline constexpr int kCheckpointVersion = 1;

inline AttackMode attack_mode_from_string(const std::string& s) {
    if (s == "untargeted") return AttackMode::untargeted;
    if (s == "random_target") return AttackMode::random_target;
    if (s == "taro_target") return AttackMode::taro_target;
    throw ConfigError("config: unknown attack_mode '" + s + "'");
}

inline SslMode ssl_mode_from_string(const std::string& s) {
    if (s == "positive_pair") return SslMode::positive_pair;
    if (s == "contrastive") return SslMode::contrastive;
    throw ConfigError("config: unknown ssl_mode '" + s + "'");
}

// Flat JSON document mirroring RunConfig field names. Unknown keys are
// rejected so typos in experiment sweeps fail loudly.
inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["data_dir"] = cfg.data_dir;
    j["encoder_dims"] = cfg.model.encoder.dims;
    j["projector_dims"] = cfg.model.projector.dims;
    j["predictor_dims"] = cfg.model.predictor.dims;
    j["tau"] = cfg.loss.tau;
    j["w"] = cfg.loss.w;
    j["tau_score"] = cfg.score.tau_score;
    j["attack_mode"] = to_string(cfg.attack_mode);
    j["ssl_mode"] = to_string(cfg.ssl_mode);
    j["lr"] = cfg.optimizer.lr;
    j["momentum"] = cfg.optimizer.momentum;
    j["weight_decay"] = cfg.optimizer.weight_decay;
    j["epsilon"] = cfg.epsilon;
    j["attack_steps"] = cfg.attack_steps;
    j["eval_attack_steps"] = cfg.eval_attack_steps;
    j["augment_noise"] = cfg.augment_noise;
    j["augment_dropout"] = cfg.augment_dropout;
    j["augment_scale_min"] = cfg.augment_scale_min;
    j["augment_scale_max"] = cfg.augment_scale_max;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["head_epochs"] = cfg.head_epochs;
    j["head_lr"] = cfg.head_lr;
    j["seed"] = cfg.seed;
    return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "data_dir",        "encoder_dims",     "projector_dims",    "predictor_dims",
        "tau",             "w",                "tau_score",         "attack_mode",
        "ssl_mode",        "lr",               "momentum",          "weight_decay",
        "epsilon",         "attack_steps",     "eval_attack_steps", "augment_noise",
        "augment_dropout", "augment_scale_min", "augment_scale_max", "epochs",
        "batch_size",      "head_epochs",      "head_lr",           "seed"};
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    for (const auto& item : j.items()) {
        if (!known.count(item.key())) throw ConfigError("config: unknown key '" + item.key() + "'");
    }
    RunConfig cfg;
    auto get = [&j](const char* key, auto& out) {
        if (j.contains(key)) {
            try {
                out = j.at(key).template get<std::decay_t<decltype(out)>>();
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("config: bad value for '" + std::string(key) + "': " + e.what());
            }
        }
    };
    get("data_dir", cfg.data_dir);
    get("encoder_dims", cfg.model.encoder.dims);
    get("projector_dims", cfg.model.projector.dims);
    get("predictor_dims", cfg.model.predictor.dims);
    get("tau", cfg.loss.tau);
    get("w", cfg.loss.w);
    get("tau_score", cfg.score.tau_score);
    if (j.contains("attack_mode")) {
        cfg.attack_mode = attack_mode_from_string(j.at("attack_mode").get<std::string>());
    }
    if (j.contains("ssl_mode")) {
        cfg.ssl_mode = ssl_mode_from_string(j.at("ssl_mode").get<std::string>());
    }
    get("lr", cfg.optimizer.lr);
    get("momentum", cfg.optimizer.momentum);
    get("weight_decay", cfg.optimizer.weight_decay);
    get("epsilon", cfg.epsilon);
    get("attack_steps", cfg.attack_steps);
    get("eval_attack_steps", cfg.eval_attack_steps);
    get("augment_noise", cfg.augment_noise);
    get("augment_dropout", cfg.augment_dropout);
    get("augment_scale_min", cfg.augment_scale_min);
    get("augment_scale_max", cfg.augment_scale_max);
    get("epochs", cfg.epochs);
    get("batch_size", cfg.batch_size);
    get("head_epochs", cfg.head_epochs);
    get("head_lr", cfg.head_lr);
    get("seed", cfg.seed);
    cfg.model.mode = cfg.ssl_mode;
    cfg.validate();
    return cfg;
}

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("json: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("json: failed to parse '" + path + "': " + e.what());
    }
    return j;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("json: cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

namespace detail {

inline nlohmann::json tensor_to_json(const Tensor& t) {
    return nlohmann::json{{"shape", t.shape()}, {"data", t.data()}};
}

inline Tensor tensor_from_json(const nlohmann::json& j) {
    try {
        return Tensor(j.at("shape").get<std::vector<std::size_t>>(),
                      j.at("data").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: corrupt tensor payload: ") + e.what());
    }
}

inline void mlp_to_json(nlohmann::json& tensors, const std::string& prefix, const Mlp& mlp) {
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
        tensors[prefix + ".w" + std::to_string(l)] = tensor_to_json(mlp.weights[l]);
        tensors[prefix + ".b" + std::to_string(l)] = tensor_to_json(mlp.biases[l]);
    }
}

inline Mlp mlp_from_json(const nlohmann::json& tensors, const std::string& prefix,
                         const MlpConfig& cfg) {
    Mlp mlp;
    for (std::size_t l = 0; l + 1 < cfg.dims.size(); ++l) {
        std::string wkey = prefix + ".w" + std::to_string(l);
        std::string bkey = prefix + ".b" + std::to_string(l);
        if (!tensors.contains(wkey) || !tensors.contains(bkey)) {
            throw DataError("checkpoint: missing tensor '" + wkey + "'");
        }
        Tensor w = tensor_from_json(tensors.at(wkey));
        Tensor b = tensor_from_json(tensors.at(bkey));
        if (w.shape() != std::vector<std::size_t>{cfg.dims[l + 1], cfg.dims[l]} ||
            b.shape() != std::vector<std::size_t>{cfg.dims[l + 1]}) {
            throw ShapeError("checkpoint: tensor '" + wkey + "' does not match configured dims");
        }
        mlp.weights.push_back(std::move(w));
        mlp.biases.push_back(std::move(b));
    }
    return mlp;
}

}  // namespace detail

struct Checkpoint {
    int version = kCheckpointVersion;
    RunConfig config;
    SiamNet net;
    std::size_t epoch = 0;
    std::vector<Tensor> velocity;  // optimizer momentum for mid-run resumes
};

// Single JSON document with explicit shape arrays and round-trip decimal
// floats; save -> load -> save is byte-identical.
inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = ckpt.version;
    j["config"] = run_config_to_json(ckpt.config);
    j["epoch"] = ckpt.epoch;
    nlohmann::json tensors;
    detail::mlp_to_json(tensors, "encoder", ckpt.net.encoder);
    detail::mlp_to_json(tensors, "projector", ckpt.net.projector);
    if (ckpt.net.predictor) detail::mlp_to_json(tensors, "predictor", *ckpt.net.predictor);
    if (ckpt.net.head) {
        tensors["head.W"] = detail::tensor_to_json(ckpt.net.head->W);
        tensors["head.b"] = detail::tensor_to_json(ckpt.net.head->b);
    }
    for (std::size_t i = 0; i < ckpt.velocity.size(); ++i) {
        tensors["velocity.v" + std::to_string(i)] = detail::tensor_to_json(ckpt.velocity[i]);
    }
    j["tensors"] = std::move(tensors);
    write_json_file(j, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    nlohmann::json j = load_json_file(path);
    Checkpoint ckpt;
    if (!j.contains("format_version") || !j.at("format_version").is_number_integer()) {
        throw DataError("checkpoint: missing format_version");
    }
    ckpt.version = j.at("format_version").get<int>();
    if (ckpt.version != kCheckpointVersion) {
        throw DataError("checkpoint: unsupported format version " + std::to_string(ckpt.version));
    }
    ckpt.config = run_config_from_json(j.at("config"));
    ckpt.epoch = j.value("epoch", std::size_t{0});
    const nlohmann::json& tensors = j.at("tensors");
    ckpt.net.encoder = detail::mlp_from_json(tensors, "encoder", ckpt.config.model.encoder);
    ckpt.net.projector = detail::mlp_from_json(tensors, "projector", ckpt.config.model.projector);
    if (ckpt.config.ssl_mode == SslMode::positive_pair) {
        ckpt.net.predictor =
            detail::mlp_from_json(tensors, "predictor", ckpt.config.model.predictor);
    }
    if (tensors.contains("head.W")) {
        ckpt.net.head = LinearHead{detail::tensor_from_json(tensors.at("head.W")),
                                   detail::tensor_from_json(tensors.at("head.b"))};
    }
    for (std::size_t i = 0; tensors.contains("velocity.v" + std::to_string(i)); ++i) {
        ckpt.velocity.push_back(
            detail::tensor_from_json(tensors.at("velocity.v" + std::to_string(i))));
    }
    ckpt.net.validate();
    return ckpt;
}

// One JSON record per epoch.
inline void write_metrics_jsonl(const Metrics& metrics, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("metrics: cannot open '" + path + "' for writing");
    for (const EpochRecord& rec : metrics.epochs) {
        // wall time stays out of the file so identical reruns emit
        // byte-identical metrics
        nlohmann::json j{{"epoch", rec.epoch}, {"train_loss", rec.train_loss}};
        out << j.dump() << "\n";
    }
}

inline nlohmann::json metrics_summary_json(const Metrics& train_metrics, const Metrics& linear,
                                           const Metrics& robust_linear) {
    nlohmann::json j;
    j["train_epochs"] = train_metrics.epochs.size();
    j["final_train_loss"] =
        train_metrics.epochs.empty() ? 0.0 : train_metrics.epochs.back().train_loss;
    j["linear"] = {{"clean_acc", linear.clean_acc}, {"robust_acc", linear.robust_acc}};
    j["robust_linear"] = {{"clean_acc", robust_linear.clean_acc},
                          {"robust_acc", robust_linear.robust_acc}};
    return j;
}

inline nlohmann::json range_report_to_json(const RangeReport& report, bool with_instances = true) {
    nlohmann::json j;
    j["ensemble_size"] = report.ensemble_size;
    j["dims"] = report.dims;
    j["epsilon"] = report.epsilon;
    j["seed"] = report.seed;
    j["fraction_ordering"] = report.fraction_ordering;
    j["fraction_literal"] = report.fraction_literal;
    j["fraction_pointwise"] = report.fraction_pointwise;
    j["mean_ss_displacement"] = report.mean_ss_displacement;
    j["mean_other_displacement"] = report.mean_other_displacement;
    if (with_instances) {
        nlohmann::json instances = nlohmann::json::array();
        for (const RangeInstance& inst : report.instances) {
            instances.push_back({{"ss_objective", inst.ss_objective},
                                 {"other_objective", inst.other_objective},
                                 {"ss_range", inst.ss_range},
                                 {"other_range", inst.other_range},
                                 {"ordering_holds", inst.ordering_holds},
                                 {"pointwise_holds", inst.pointwise_holds}});
        }
        j["instances"] = std::move(instances);
    }
    return j;
}

}  // namespace taro
