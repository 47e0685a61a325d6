#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "scenecad/error.hpp"
#include "scenecad/metrics.hpp"
#include "scenecad/mlp.hpp"
#include "scenecad/relations.hpp"

namespace scenecad::config {

using nlohmann::json;

inline constexpr int kConfigFormatVersion = 1;

/// Every tunable of the reconstruction pipeline in one place. Defaults follow
/// the reference setup; a JSON config file may override any subset.
struct PipelineConfig {
    // voxelization / heatmap
    double voxel_size = 0.05;    // meters
    double heatmap_sigma = 0.15; // meters

    // corner detection
    double nms_threshold = 0.5;
    int nms_radius = 3;  // voxels

    // edge / quad candidates
    double planarity_tol = 0.05;      // meters, max corner-to-plane residual
    double edge_threshold = 0.5;      // keep candidates with score >= threshold
    double quad_threshold = 0.5;
    double oracle_match_radius = 0.15;  // meters, corner->GT snap for oracle labels

    // relations
    relations::RelationConfig relations;
    double pool_margin = relations::kDefaultPoolMargin;  // meters around object boxes
    int message_steps = 1;

    // training
    mpnn::TrainConfig train;
    std::uint64_t model_seed = 7;

    // evaluation
    metrics::MetricThresholds thresholds;

    void validate() const {
        if (!(voxel_size > 0.0 && heatmap_sigma > 0.0)) {
            throw InvalidInput("config: voxel_size and heatmap_sigma must be positive");
        }
        if (!(nms_threshold > 0.0 && nms_threshold < 1.0) || nms_radius < 1) {
            throw InvalidInput("config: nms_threshold must be in (0,1), nms_radius >= 1");
        }
        if (!(planarity_tol >= 0.0 && oracle_match_radius > 0.0)) {
            throw InvalidInput("config: planarity_tol >= 0 and oracle_match_radius > 0 required");
        }
        if (!(edge_threshold >= 0.0 && edge_threshold <= 1.0 && quad_threshold >= 0.0 &&
              quad_threshold <= 1.0)) {
            throw InvalidInput("config: classifier thresholds must be in [0,1]");
        }
        if (!(pool_margin >= 0.0) || !std::isfinite(pool_margin)) {
            throw InvalidInput("config: pool_margin must be finite and >= 0");
        }
        if (message_steps < 1) {
            throw InvalidInput("config: message_steps must be >= 1");
        }
        relations.validate();
        train.validate();
        thresholds.validate();
    }
};

inline json config_to_json(const PipelineConfig& c) {
    json j;
    j["format"] = "scenecad-config";
    j["version"] = kConfigFormatVersion;
    j["voxel_size"] = c.voxel_size;
    j["heatmap_sigma"] = c.heatmap_sigma;
    j["nms_threshold"] = c.nms_threshold;
    j["nms_radius"] = c.nms_radius;
    j["planarity_tol"] = c.planarity_tol;
    j["edge_threshold"] = c.edge_threshold;
    j["quad_threshold"] = c.quad_threshold;
    j["oracle_match_radius"] = c.oracle_match_radius;
    j["relations"] = {{"tau_p", c.relations.tau_p},
                      {"parallel_tol_deg", c.relations.parallel_tol_deg},
                      {"bin_count", c.relations.bin_count},
                      {"angle_range_deg", c.relations.angle_range_deg}};
    j["pool_margin"] = c.pool_margin;
    j["message_steps"] = c.message_steps;
    j["train"] = {{"learning_rate", c.train.learning_rate},
                  {"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"seed", c.train.seed}};
    j["model_seed"] = c.model_seed;
    j["thresholds"] = {{"translation_max", c.thresholds.translation_max},
                       {"rotation_max_deg", c.thresholds.rotation_max_deg},
                       {"scale_max_ratio", c.thresholds.scale_max_ratio},
                       {"corner_radius", c.thresholds.corner_radius}};
    return j;
}

namespace detail {

template <typename T>
void take(const json& j, const char* key, T& slot, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
        slot = it->get<T>();
    } catch (const json::exception&) {
        throw DataError(where + ": field '" + key + "' has the wrong type");
    }
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    if (!j.is_object()) {
        throw DataError(where + ": expected a JSON object");
    }
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed) {
            if (item.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw DataError(where + ": unknown field '" + item.key() + "' (format version " +
                            std::to_string(kConfigFormatVersion) + ")");
        }
    }
}

}  // namespace detail

/// Apply a (possibly partial) JSON config on top of `base`. Unknown keys are
/// rejected; the merged result is validated.
inline PipelineConfig config_from_json(const json& j, const std::string& where,
                                       PipelineConfig base = {}) {
    detail::check_keys(j,
                       {"format", "version", "voxel_size", "heatmap_sigma", "nms_threshold",
                        "nms_radius", "planarity_tol", "edge_threshold", "quad_threshold",
                        "oracle_match_radius", "relations", "pool_margin", "message_steps",
                        "train", "model_seed", "thresholds"},
                       where);
    if (j.contains("format") && j["format"].get<std::string>() != "scenecad-config") {
        throw DataError(where + ": not a scenecad-config file");
    }
    if (j.contains("version") && j["version"].get<int>() != kConfigFormatVersion) {
        throw DataError(where + ": unsupported config format version");
    }
    detail::take(j, "voxel_size", base.voxel_size, where);
    detail::take(j, "heatmap_sigma", base.heatmap_sigma, where);
    detail::take(j, "nms_threshold", base.nms_threshold, where);
    detail::take(j, "nms_radius", base.nms_radius, where);
    detail::take(j, "planarity_tol", base.planarity_tol, where);
    detail::take(j, "edge_threshold", base.edge_threshold, where);
    detail::take(j, "quad_threshold", base.quad_threshold, where);
    detail::take(j, "oracle_match_radius", base.oracle_match_radius, where);
    if (j.contains("relations")) {
        const json& r = j["relations"];
        detail::check_keys(r, {"tau_p", "parallel_tol_deg", "bin_count", "angle_range_deg"},
                           where + ".relations");
        detail::take(r, "tau_p", base.relations.tau_p, where);
        detail::take(r, "parallel_tol_deg", base.relations.parallel_tol_deg, where);
        detail::take(r, "bin_count", base.relations.bin_count, where);
        detail::take(r, "angle_range_deg", base.relations.angle_range_deg, where);
    }
    detail::take(j, "pool_margin", base.pool_margin, where);
    detail::take(j, "message_steps", base.message_steps, where);
    if (j.contains("train")) {
        const json& t = j["train"];
        detail::check_keys(t, {"learning_rate", "epochs", "batch_size", "seed"},
                           where + ".train");
        detail::take(t, "learning_rate", base.train.learning_rate, where);
        detail::take(t, "epochs", base.train.epochs, where);
        detail::take(t, "batch_size", base.train.batch_size, where);
        detail::take(t, "seed", base.train.seed, where);
    }
    detail::take(j, "model_seed", base.model_seed, where);
    if (j.contains("thresholds")) {
        const json& t = j["thresholds"];
        detail::check_keys(
            t, {"translation_max", "rotation_max_deg", "scale_max_ratio", "corner_radius"},
            where + ".thresholds");
        detail::take(t, "translation_max", base.thresholds.translation_max, where);
        detail::take(t, "rotation_max_deg", base.thresholds.rotation_max_deg, where);
        detail::take(t, "scale_max_ratio", base.thresholds.scale_max_ratio, where);
        detail::take(t, "corner_radius", base.thresholds.corner_radius, where);
    }
    base.validate();
    return base;
}

inline PipelineConfig load_config(const std::string& path, PipelineConfig base = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open config file: " + path);
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw DataError(path + ": not valid JSON");
    }
    return config_from_json(j, path, base);
}

inline void save_config(const std::string& path, const PipelineConfig& c) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open config file for writing: " + path);
    }
    out << config_to_json(c).dump(1) << "\n";
}

}  // namespace scenecad::config
