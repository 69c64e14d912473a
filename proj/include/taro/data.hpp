#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "taro/common.hpp"
#include "taro/tensor.hpp"

namespace taro {

struct SyntheticDatasetSpec {
    std::size_t n_classes = 5;
    std::size_t dim = 16;
    std::size_t samples_per_class = 40;
    double separation = 6.0;   // mean pairwise center distance
    double cluster_std = 1.0;  // within-cluster std per coordinate
    std::uint64_t seed = 1;

    void validate() const {
        if (n_classes < 2) throw ConfigError("dataset: n_classes must be >= 2");
        if (dim == 0) throw ConfigError("dataset: dim must be positive");
        if (samples_per_class == 0) throw ConfigError("dataset: samples_per_class must be positive");
        if (!(separation > 0.0)) throw ConfigError("dataset: separation must be > 0");
        if (!(cluster_std > 0.0)) throw ConfigError("dataset: cluster_std must be > 0");
    }
};

// Labels are consumed only by evaluation and analysis; the SSL training path
// receives label-free views.
struct Dataset {
    std::size_t dim = 0;
    std::size_t n_classes = 0;
    std::vector<Tensor> features;
    std::vector<std::size_t> labels;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;

    std::size_t size() const { return features.size(); }

    // Mean of per-coordinate standard deviations over the train split.
    double feature_std() const {
        if (train_idx.empty()) throw DataError("dataset: empty train split");
        double total = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            double mean = 0.0;
            for (std::size_t i : train_idx) mean += features[i][d];
            mean /= static_cast<double>(train_idx.size());
            double var = 0.0;
            for (std::size_t i : train_idx) {
                double diff = features[i][d] - mean;
                var += diff * diff;
            }
            var /= static_cast<double>(train_idx.size());
            total += std::sqrt(var);
        }
        return total / static_cast<double>(dim);
    }
};

// Gaussian clusters at random centers, rescaled so the mean pairwise center
// distance equals `separation`. Split 80/20 per class, deterministic.
inline Dataset generate_clusters(const SyntheticDatasetSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<Tensor> centers;
    centers.reserve(spec.n_classes);
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        std::vector<double> center(spec.dim);
        for (double& v : center) v = gauss(rng);
        centers.push_back(Tensor::vector(std::move(center)));
    }
    double mean_dist = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < centers.size(); ++a) {
        for (std::size_t b = a + 1; b < centers.size(); ++b) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < spec.dim; ++k) {
                double diff = centers[a][k] - centers[b][k];
                d2 += diff * diff;
            }
            mean_dist += std::sqrt(d2);
            ++pairs;
        }
    }
    mean_dist /= static_cast<double>(pairs);
    double rescale = spec.separation / mean_dist;
    for (Tensor& c : centers) {
        for (std::size_t k = 0; k < spec.dim; ++k) c[k] *= rescale;
    }

    Dataset ds;
    ds.dim = spec.dim;
    ds.n_classes = spec.n_classes;
    std::size_t train_per_class =
        (spec.samples_per_class * 8 + 9) / 10;  // ceil(0.8 n), at least one test sample below
    if (train_per_class >= spec.samples_per_class && spec.samples_per_class > 1) {
        train_per_class = spec.samples_per_class - 1;
    }
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            std::vector<double> x(spec.dim);
            for (std::size_t k = 0; k < spec.dim; ++k) {
                x[k] = centers[c][k] + spec.cluster_std * gauss(rng);
            }
            std::size_t idx = ds.features.size();
            ds.features.push_back(Tensor::vector(std::move(x)));
            ds.labels.push_back(c);
            if (s < train_per_class) {
                ds.train_idx.push_back(idx);
            } else {
                ds.test_idx.push_back(idx);
            }
        }
    }
    return ds;
}

// Vector-domain stand-ins for crop/flip/jitter: additive Gaussian noise,
// per-coordinate dropout, and a random global scale.
struct AugmentConfig {
    double noise_std = 0.1;  // absolute units; callers scale by feature std
    double dropout_p = 0.1;
    double scale_min = 0.8;
    double scale_max = 1.25;
};

inline Tensor augment_once(const Tensor& x, const AugmentConfig& cfg, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> scale_dist(cfg.scale_min, cfg.scale_max);
    double scale = cfg.scale_min < cfg.scale_max ? scale_dist(rng) : cfg.scale_min;
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = out[i] * scale;
        if (cfg.noise_std > 0.0) v += cfg.noise_std * gauss(rng);
        if (cfg.dropout_p > 0.0 && unit(rng) < cfg.dropout_p) v = 0.0;
        out[i] = v;
    }
    return out;
}

inline std::pair<Tensor, Tensor> augment_views(const Tensor& x, const AugmentConfig& cfg,
                                               std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor t1 = augment_once(x, cfg, rng);
    Tensor t2 = augment_once(x, cfg, rng);
    return {std::move(t1), std::move(t2)};
}

namespace detail {

// Full round-trip decimal formatting.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline double parse_double(const std::string& field, std::size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw DataError("csv: non-numeric field '" + field + "' at line " +
                        std::to_string(line_no));
    }
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, ',')) fields.push_back(cur);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

}  // namespace detail

// Rows are `label,feat_0,...,feat_{d-1}` with a header line. A dataset
// directory holds train.csv and test.csv.
inline void save_csv_rows(const Dataset& ds, const std::vector<std::size_t>& rows,
                          const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("csv: cannot open '" + path + "' for writing");
    out << "label";
    for (std::size_t d = 0; d < ds.dim; ++d) out << ",feat_" << d;
    out << "\n";
    for (std::size_t i : rows) {
        out << ds.labels[i];
        for (std::size_t d = 0; d < ds.dim; ++d) {
            out << "," << detail::format_double(ds.features[i][d]);
        }
        out << "\n";
    }
}

// Loads one CSV file; all rows land in the train split of the returned set.
inline Dataset load_csv_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("csv: '" + path + "' is empty");
    auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header[0] != "label") {
        throw DataError("csv: '" + path + "' has an unexpected header");
    }
    std::size_t dim = header.size() - 1;
    Dataset ds;
    ds.dim = dim;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != dim + 1) {
            throw DataError("csv: row width mismatch at line " + std::to_string(line_no) +
                            " (expected " + std::to_string(dim + 1) + " fields, got " +
                            std::to_string(fields.size()) + ")");
        }
        double label_val = detail::parse_double(fields[0], line_no);
        if (label_val < 0.0 || label_val != std::floor(label_val)) {
            throw DataError("csv: invalid label at line " + std::to_string(line_no));
        }
        std::vector<double> x(dim);
        for (std::size_t d = 0; d < dim; ++d) x[d] = detail::parse_double(fields[d + 1], line_no);
        std::size_t idx = ds.features.size();
        ds.features.push_back(Tensor::vector(std::move(x)));
        ds.labels.push_back(static_cast<std::size_t>(label_val));
        ds.train_idx.push_back(idx);
        ds.n_classes = std::max(ds.n_classes, static_cast<std::size_t>(label_val) + 1);
    }
    if (ds.features.empty()) throw DataError("csv: '" + path + "' has no data rows");
    return ds;
}

inline void save_dataset_dir(const Dataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    save_csv_rows(ds, ds.train_idx, dir + "/train.csv");
    save_csv_rows(ds, ds.test_idx, dir + "/test.csv");
}

inline Dataset load_dataset_dir(const std::string& dir) {
    Dataset train = load_csv_dataset(dir + "/train.csv");
    Dataset test = load_csv_dataset(dir + "/test.csv");
    if (test.dim != train.dim) throw DataError("dataset: train/test feature width mismatch");
    Dataset ds = std::move(train);
    for (std::size_t i = 0; i < test.features.size(); ++i) {
        std::size_t idx = ds.features.size();
        ds.features.push_back(test.features[i]);
        ds.labels.push_back(test.labels[i]);
        ds.test_idx.push_back(idx);
    }
    ds.n_classes = std::max(ds.n_classes, test.n_classes);
    return ds;
}

}  // namespace taro
