// Command-line front end for the reconstruction pipeline: synthetic scene
// generation, layout extraction, CAD alignment, relation prediction,
// training, and benchmark evaluation.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 invalid input or
// malformed data at runtime, 3 numerical failure. Errors go to stderr as a
// single JSON record; regular output is JSON on stdout.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <scenecad/scenecad.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scenecad;

namespace {

// ---------------------------------------------------------------------------
// config plumbing: command-line flag > config file > built-in default
// ---------------------------------------------------------------------------

struct ConfigOverrides {
    std::optional<double> voxel_size, heatmap_sigma, nms_threshold, planarity_tol,
        edge_threshold, quad_threshold, oracle_radius, tau_p, parallel_tol, pool_margin,
        learning_rate;
    std::optional<int> nms_radius, message_steps, epochs, batch_size, bin_count;
    std::optional<std::uint64_t> model_seed, train_seed;
};

void add_config_options(CLI::App& app, std::string& config_path, ConfigOverrides& o) {
    app.add_option("--config", config_path, "pipeline config JSON (partial files allowed)");
    app.add_option("--voxel-size", o.voxel_size, "voxel edge length, meters");
    app.add_option("--heatmap-sigma", o.heatmap_sigma, "corner heatmap bandwidth, meters");
    app.add_option("--nms-threshold", o.nms_threshold, "heatmap peak threshold in (0,1)");
    app.add_option("--nms-radius", o.nms_radius, "suppression radius, voxels");
    app.add_option("--planarity-tol", o.planarity_tol, "max quad corner-to-plane residual, meters");
    app.add_option("--edge-threshold", o.edge_threshold, "edge classifier keep threshold");
    app.add_option("--quad-threshold", o.quad_threshold, "quad classifier keep threshold");
    app.add_option("--oracle-radius", o.oracle_radius, "oracle corner match radius, meters");
    app.add_option("--tau-p", o.tau_p, "relation proximity expansion, meters");
    app.add_option("--parallel-tol", o.parallel_tol, "support parallelism tolerance, degrees");
    app.add_option("--bins", o.bin_count, "number of angle bins");
    app.add_option("--pool-margin", o.pool_margin, "object pooling margin, meters");
    app.add_option("--steps", o.message_steps, "message passing steps");
    app.add_option("--lr", o.learning_rate, "training learning rate");
    app.add_option("--epochs", o.epochs, "training epochs");
    app.add_option("--batch", o.batch_size, "training batch size");
    app.add_option("--train-seed", o.train_seed, "shuffle seed for training");
    app.add_option("--model-seed", o.model_seed, "weight initialization seed");
}

config::PipelineConfig make_config(const std::string& config_path, const ConfigOverrides& o) {
    config::PipelineConfig cfg;
    if (!config_path.empty()) {
        cfg = config::load_config(config_path, cfg);
    }
    const auto set = [](auto& slot, const auto& opt) {
        if (opt) slot = *opt;
    };
    set(cfg.voxel_size, o.voxel_size);
    set(cfg.heatmap_sigma, o.heatmap_sigma);
    set(cfg.nms_threshold, o.nms_threshold);
    set(cfg.nms_radius, o.nms_radius);
    set(cfg.planarity_tol, o.planarity_tol);
    set(cfg.edge_threshold, o.edge_threshold);
    set(cfg.quad_threshold, o.quad_threshold);
    set(cfg.oracle_match_radius, o.oracle_radius);
    set(cfg.relations.tau_p, o.tau_p);
    set(cfg.relations.parallel_tol_deg, o.parallel_tol);
    set(cfg.relations.bin_count, o.bin_count);
    set(cfg.pool_margin, o.pool_margin);
    set(cfg.message_steps, o.message_steps);
    set(cfg.train.learning_rate, o.learning_rate);
    set(cfg.train.epochs, o.epochs);
    set(cfg.train.batch_size, o.batch_size);
    set(cfg.train.seed, o.train_seed);
    set(cfg.model_seed, o.model_seed);
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

std::vector<std::string> list_scene_files(const std::string& path) {
    std::vector<std::string> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") {
                files.push_back(entry.path().string());
            }
        }
        std::sort(files.begin(), files.end());
    } else if (fs::exists(path)) {
        files.push_back(path);
    }
    if (files.empty()) {
        throw DataError("no scene files found at: " + path);
    }
    return files;
}

std::vector<datagen::Scene> load_scenes(const std::string& path) {
    std::vector<datagen::Scene> scenes;
    for (const std::string& f : list_scene_files(path)) {
        scenes.push_back(io::load_scene(f));
    }
    return scenes;
}

align::CadDatabase make_database(const std::string& cad_dir) {
    return cad_dir.empty() ? datagen::builtin_cad_database() : io::load_cad_database(cad_dir);
}

json layout_report_json(const metrics::LayoutReport& r) {
    return {{"corner",
             {{"precision", r.corner_precision},
              {"recall", r.corner_recall},
              {"correct", r.corner_correct},
              {"predicted", r.corner_pred},
              {"gt", r.corner_gt}}},
            {"edge",
             {{"precision", r.edge_precision},
              {"recall", r.edge_recall},
              {"correct", r.edge_correct},
              {"predicted", r.edge_pred},
              {"gt", r.edge_gt}}},
            {"quad",
             {{"precision", r.quad_precision},
              {"recall", r.quad_recall},
              {"correct", r.quad_correct},
              {"predicted", r.quad_pred},
              {"gt", r.quad_gt}}}};
}

json alignment_report_json(const metrics::AlignmentReport& r) {
    json per_cat = json::object();
    for (const auto& [cat, acc] : r.per_category) per_cat[cat] = acc;
    json counts = json::object();
    for (const auto& [cat, c] : r.counts) counts[cat] = {c.first, c.second};
    return {{"class_average", r.class_average},
            {"instance_average", r.instance_average},
            {"per_category", per_cat},
            {"counts", counts}};
}

json benchmark_json(const pipeline::BenchmarkReport& r) {
    return {{"scenes", r.scene_count},
            {"layout", layout_report_json(r.layout)},
            {"alignment", alignment_report_json(r.alignment)},
            {"relations",
             {{"support_accuracy", r.support_accuracy},
              {"angle_accuracy", r.angle_accuracy},
              {"support_total", r.support_total},
              {"angle_total", r.angle_total}}},
            {"retrieval",
             {{"accuracy", r.retrieval_accuracy},
              {"correct", r.retrieval_correct},
              {"attempted", r.retrieval_attempted}}}};
}

void print_json(const json& j) { std::cout << j.dump(1) << "\n"; }

struct LoadedModels {
    io::ModelSet set;
    bool present = false;
};

LoadedModels maybe_load_models(const std::string& path) {
    LoadedModels out;
    if (!path.empty()) {
        out.set = io::load_models(path);
        out.present = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

struct GenArgs {
    std::uint64_t seed = 1;
    int count = 1;
    std::string out;
    double corner_jitter = 0.0;
    double point_noise = 0.0;
    double dropout = 0.0;
    int wall_min = 4, wall_max = 8;
    int object_min = 3, object_max = 6;
    double room_min = 3.5, room_max = 6.0;
};

int cmd_gen(const GenArgs& a, const config::PipelineConfig& cfg) {
    datagen::SceneSpec spec;
    spec.corner_jitter_sigma = a.corner_jitter;
    spec.point_noise_sigma = a.point_noise;
    spec.dropout = a.dropout;
    spec.wall_min = a.wall_min;
    spec.wall_max = a.wall_max;
    spec.object_min = a.object_min;
    spec.object_max = a.object_max;
    spec.room_min = a.room_min;
    spec.room_max = a.room_max;
    spec.voxel_size = cfg.voxel_size;
    spec.heatmap_sigma = cfg.heatmap_sigma;
    spec.validate();

    json written = json::array();
    const bool to_directory = a.count > 1 || fs::is_directory(a.out);
    if (to_directory) {
        std::error_code ec;
        fs::create_directories(a.out, ec);
        if (ec) {
            throw DataError("cannot create output directory: " + a.out);
        }
    }
    for (int k = 0; k < a.count; ++k) {
        spec.seed = a.seed + static_cast<std::uint64_t>(k);
        const datagen::Scene scene = datagen::generate_scene(spec, cfg.relations);
        std::string path = a.out;
        if (to_directory) {
            char name[32];
            std::snprintf(name, sizeof(name), "scene_%08llu.json",
                          static_cast<unsigned long long>(spec.seed));
            path = (fs::path(a.out) / name).string();
        }
        io::save_scene(path, scene);
        written.push_back(path);
    }
    print_json({{"written", written}});
    return 0;
}

struct LayoutArgs {
    std::string scene, mode = "oracle", models, obj_out;
};

int cmd_layout(const LayoutArgs& a, const config::PipelineConfig& cfg) {
    const datagen::Scene scene = io::load_scene(a.scene);
    const pipeline::ClassifierMode mode = pipeline::classifier_mode_from_string(a.mode);
    const LoadedModels models = maybe_load_models(a.models);
    std::optional<layout::FeatureGrid> features;
    if (mode == pipeline::ClassifierMode::Model) {
        if (!models.present) {
            throw InvalidInput("layout: --models is required in model mode");
        }
        features = layout::compute_feature_grid(scene.occupancy);
    }
    const pipeline::LayoutResult lr = pipeline::extract_layout(
        scene, cfg, mode, models.present ? &models.set : nullptr,
        features ? &*features : nullptr);
    const metrics::LayoutReport rep = metrics::layout_prf(lr.graph, scene.gt_layout,
                                                          cfg.thresholds);
    if (!a.obj_out.empty()) {
        io::save_obj_quads(a.obj_out, lr.graph.corners, lr.graph.quads);
    }
    json corners = json::array();
    for (std::size_t i = 0; i < lr.corners.size(); ++i) {
        corners.push_back({{"position", io::detail::vec3_json(lr.corners.corners[i])},
                           {"score", lr.corners.scores[i]}});
    }
    json edges = json::array();
    for (const layout::EdgeCandidate& e : lr.edges) {
        edges.push_back({{"corners", {e.i, e.j}}, {"score", e.score}});
    }
    json quads = json::array();
    for (const layout::QuadCandidate& q : lr.quads) {
        quads.push_back({{"corners", {q.corners[0], q.corners[1], q.corners[2], q.corners[3]}},
                         {"score", q.score},
                         {"planarity_residual", q.planarity_residual}});
    }
    print_json({{"corners", corners},
                {"edges", edges},
                {"quads", quads},
                {"report", layout_report_json(rep)},
                {"table", metrics::format_layout_table(rep)}});
    return 0;
}

struct AlignArgs {
    std::string scene, cad_db;
};

int cmd_align(const AlignArgs& a, const config::PipelineConfig& cfg) {
    const datagen::Scene scene = io::load_scene(a.scene);
    const align::CadDatabase db = make_database(a.cad_db);
    const std::vector<pipeline::ObjectAlignment> aligned =
        pipeline::align_scene_objects(scene, &db);
    std::vector<metrics::AlignedObject> pred;
    json objects = json::array();
    for (std::size_t i = 0; i < aligned.size(); ++i) {
        const pipeline::ObjectAlignment& oa = aligned[i];
        pred.push_back(oa.aligned);
        objects.push_back(
            {{"category", oa.aligned.category},
             {"translation", io::detail::vec3_json(oa.aligned.pose.translation)},
             {"rotation", io::detail::mat3_json(oa.aligned.pose.rotation.matrix())},
             {"scale", io::detail::vec3_json(oa.aligned.pose.scale)},
             {"retrieved_model", oa.retrieval_attempted ? json(oa.aligned.model_id) : json()},
             {"gt_model", scene.objects[i].model_id}});
    }
    const metrics::AlignmentReport rep =
        metrics::alignment_accuracy(pred, pipeline::gt_aligned_objects(scene), cfg.thresholds);
    print_json({{"objects", objects},
                {"report", alignment_report_json(rep)},
                {"table", metrics::format_alignment_table(rep)}});
    return 0;
}

struct RelationsArgs {
    std::string scene, models;
};

int cmd_relations(const RelationsArgs& a, const config::PipelineConfig& cfg) {
    const datagen::Scene scene = io::load_scene(a.scene);
    const LoadedModels models = maybe_load_models(a.models);
    std::vector<relations::Relation> predicted;
    json result;
    if (models.present) {
        const layout::FeatureGrid features = layout::compute_feature_grid(scene.occupancy);
        const relations::SceneGraph graph = pipeline::make_relation_graph(scene, features, cfg);
        predicted = mpnn::predict_relations(graph, models.set.relation, cfg.message_steps);
        const mpnn::RelationAccuracy acc =
            mpnn::evaluate_relations(models.set.relation, {graph}, cfg.message_steps);
        result["support_accuracy"] = acc.support;
        result["angle_accuracy"] = acc.angle;
        result["mode"] = "model";
    } else {
        predicted = relations::extract_object_layout_relations(
            scene.object_boxes(), layout::quad_corner_positions(scene.gt_layout),
            cfg.relations);
        const std::vector<relations::Relation> angles =
            relations::extract_object_object_angles(scene.object_boxes(), cfg.relations);
        predicted.insert(predicted.end(), angles.begin(), angles.end());
        result["mode"] = "rules";
    }
    json rels = json::array();
    for (const relations::Relation& r : predicted) rels.push_back(io::relation_json(r));
    result["relations"] = std::move(rels);
    print_json(result);
    return 0;
}

struct TrainArgs {
    std::string scenes, out;
    int holdout_every = 5;
};

int cmd_train(const TrainArgs& a, const config::PipelineConfig& cfg) {
    const std::vector<datagen::Scene> all = load_scenes(a.scenes);
    std::vector<datagen::Scene> train, holdout;
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (a.holdout_every > 0 &&
            static_cast<int>(i % a.holdout_every) == a.holdout_every - 1) {
            holdout.push_back(all[i]);
        } else {
            train.push_back(all[i]);
        }
    }
    pipeline::TrainingSummary summary;
    const io::ModelSet models = pipeline::train_pipeline(train, holdout, cfg, &summary);
    io::save_models(a.out, models);
    json result;
    result["models"] = a.out;
    result["train_scenes"] = train.size();
    result["holdout_scenes"] = holdout.size();
    result["edge_samples"] = summary.edge_samples;
    result["quad_samples"] = summary.quad_samples;
    result["final"] = {
        {"edge_loss", summary.edge_log.epoch_loss.back()},
        {"quad_loss", summary.quad_log.epoch_loss.back()},
        {"relation_loss", summary.relation_log.epoch_loss.back()},
        {"edge_holdout_accuracy", summary.edge_log.holdout_accuracy.back()},
        {"quad_holdout_accuracy", summary.quad_log.holdout_accuracy.back()},
        {"support_holdout_accuracy", summary.relation_log.support_accuracy.back()},
        {"angle_holdout_accuracy", summary.relation_log.angle_accuracy.back()}};
    print_json(result);
    return 0;
}

struct EvalArgs {
    std::string scenes, mode = "oracle", models, cad_db;
    bool no_retrieval = false;
};

int cmd_eval(const EvalArgs& a, const config::PipelineConfig& cfg) {
    const std::vector<datagen::Scene> scenes = load_scenes(a.scenes);
    const pipeline::ClassifierMode mode = pipeline::classifier_mode_from_string(a.mode);
    const LoadedModels models = maybe_load_models(a.models);
    if (mode == pipeline::ClassifierMode::Model && !models.present) {
        throw InvalidInput("eval: --models is required in model mode");
    }
    std::optional<align::CadDatabase> db;
    if (!a.no_retrieval) db = make_database(a.cad_db);
    const pipeline::BenchmarkReport report =
        pipeline::run_benchmark(scenes, cfg, mode, models.present ? &models.set : nullptr,
                                db ? &*db : nullptr);
    json j = benchmark_json(report);
    j["layout_table"] = metrics::format_layout_table(report.layout);
    j["alignment_table"] = metrics::format_alignment_table(report.alignment);
    print_json(j);
    return 0;
}

struct RunArgs {
    std::string scene, mode = "oracle", models, cad_db, obj_out;
};

int cmd_run(const RunArgs& a, const config::PipelineConfig& cfg) {
    const datagen::Scene scene = io::load_scene(a.scene);
    const pipeline::ClassifierMode mode = pipeline::classifier_mode_from_string(a.mode);
    const LoadedModels models = maybe_load_models(a.models);
    if (mode == pipeline::ClassifierMode::Model && !models.present) {
        throw InvalidInput("run: --models is required in model mode");
    }
    const align::CadDatabase db = make_database(a.cad_db);

    std::optional<layout::FeatureGrid> features;
    if (mode == pipeline::ClassifierMode::Model) {
        features = layout::compute_feature_grid(scene.occupancy);
    }
    const pipeline::LayoutResult lr = pipeline::extract_layout(
        scene, cfg, mode, models.present ? &models.set : nullptr,
        features ? &*features : nullptr);
    if (!a.obj_out.empty()) {
        io::save_obj_quads(a.obj_out, lr.graph.corners, lr.graph.quads);
    }
    const pipeline::BenchmarkReport report = pipeline::run_benchmark(
        {scene}, cfg, mode, models.present ? &models.set : nullptr, &db);

    json preds = json::array();
    if (models.present) {
        if (!features) features = layout::compute_feature_grid(scene.occupancy);
        const relations::SceneGraph graph = pipeline::make_relation_graph(scene, *features, cfg);
        for (const relations::Relation& r :
             mpnn::predict_relations(graph, models.set.relation, cfg.message_steps)) {
            preds.push_back(io::relation_json(r));
        }
    }
    json j = benchmark_json(report);
    j["detected"] = {{"corners", lr.corners.size()},
                     {"edges", lr.edges.size()},
                     {"quads", lr.quads.size()}};
    if (models.present) j["predicted_relations"] = std::move(preds);
    print_json(j);
    return 0;
}

json error_record(const char* type, const std::string& stage, const std::string& message) {
    return {{"error", {{"type", type}, {"stage", stage}, {"message", message}}}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale scene reconstruction: layout, CAD alignment, relations"};
    app.require_subcommand(0, 1);

    std::string config_path;
    ConfigOverrides overrides;
    bool print_config = false;
    add_config_options(app, config_path, overrides);
    app.add_flag("--print-config", print_config, "print the effective config and exit");

    GenArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "generate synthetic scenes");
    gen_cmd->add_option("--seed", gen.seed, "base scene seed");
    gen_cmd->add_option("--count", gen.count, "number of scenes")
        ->check(CLI::Range(1, std::numeric_limits<int>::max()));
    gen_cmd->add_option("--out", gen.out, "output file (or directory when count > 1)")
        ->required();
    gen_cmd->add_option("--corner-jitter", gen.corner_jitter, "corner observation noise, meters");
    gen_cmd->add_option("--point-noise", gen.point_noise, "scan point noise, meters");
    gen_cmd->add_option("--dropout", gen.dropout, "occupied-cell dropout fraction");
    gen_cmd->add_option("--wall-min", gen.wall_min, "min wall count (4..8)");
    gen_cmd->add_option("--wall-max", gen.wall_max, "max wall count (4..8)");
    gen_cmd->add_option("--object-min", gen.object_min, "min objects per scene");
    gen_cmd->add_option("--object-max", gen.object_max, "max objects per scene");
    gen_cmd->add_option("--room-min", gen.room_min, "min room extent, meters");
    gen_cmd->add_option("--room-max", gen.room_max, "max room extent, meters");

    LayoutArgs lay;
    CLI::App* lay_cmd = app.add_subcommand("layout", "extract the room layout graph");
    lay_cmd->add_option("--scene", lay.scene, "scene JSON")->required();
    lay_cmd->add_option("--mode", lay.mode, "oracle|model");
    lay_cmd->add_option("--models", lay.models, "model checkpoint (model mode)");
    lay_cmd->add_option("--obj", lay.obj_out, "write the quad mesh as OBJ");

    AlignArgs ali;
    CLI::App* ali_cmd = app.add_subcommand("align", "estimate object poses + retrieve shapes");
    ali_cmd->add_option("--scene", ali.scene, "scene JSON")->required();
    ali_cmd->add_option("--cad-db", ali.cad_db, "CAD database directory (default: built-in)");

    RelationsArgs rel;
    CLI::App* rel_cmd = app.add_subcommand("relations", "extract or predict relations");
    rel_cmd->add_option("--scene", rel.scene, "scene JSON")->required();
    rel_cmd->add_option("--models", rel.models, "model checkpoint (learned prediction)");

    TrainArgs tra;
    CLI::App* tra_cmd = app.add_subcommand("train", "train all networks on labeled scenes");
    tra_cmd->add_option("--scenes", tra.scenes, "scene file or directory")->required();
    tra_cmd->add_option("--out", tra.out, "checkpoint output path")->required();
    tra_cmd->add_option("--holdout-every", tra.holdout_every,
                        "every Nth scene goes to the holdout split (0 = none)");

    EvalArgs eva;
    CLI::App* eva_cmd = app.add_subcommand("eval", "run the benchmark over a scene set");
    eva_cmd->add_option("--scenes", eva.scenes, "scene file or directory")->required();
    eva_cmd->add_option("--mode", eva.mode, "oracle|model");
    eva_cmd->add_option("--models", eva.models, "model checkpoint (model mode)");
    eva_cmd->add_option("--cad-db", eva.cad_db, "CAD database directory (default: built-in)");
    eva_cmd->add_flag("--no-retrieval", eva.no_retrieval, "skip shape retrieval");

    RunArgs run;
    CLI::App* run_cmd = app.add_subcommand("run", "full pipeline on a single scene");
    run_cmd->add_option("--scene", run.scene, "scene JSON")->required();
    run_cmd->add_option("--mode", run.mode, "oracle|model");
    run_cmd->add_option("--models", run.models, "model checkpoint (model mode)");
    run_cmd->add_option("--cad-db", run.cad_db, "CAD database directory (default: built-in)");
    run_cmd->add_option("--obj", run.obj_out, "write the extracted quad mesh as OBJ");

    // config flags may appear before or after the subcommand name
    for (CLI::App* sub : {gen_cmd, lay_cmd, ali_cmd, rel_cmd, tra_cmd, eva_cmd, run_cmd}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    std::string stage = "config";
    try {
        const config::PipelineConfig cfg = make_config(config_path, overrides);
        if (print_config) {
            print_json(config::config_to_json(cfg));
            return 0;
        }
        if (app.got_subcommand(gen_cmd)) {
            stage = "gen";
            return cmd_gen(gen, cfg);
        }
        if (app.got_subcommand(lay_cmd)) {
            stage = "layout";
            return cmd_layout(lay, cfg);
        }
        if (app.got_subcommand(ali_cmd)) {
            stage = "align";
            return cmd_align(ali, cfg);
        }
        if (app.got_subcommand(rel_cmd)) {
            stage = "relations";
            return cmd_relations(rel, cfg);
        }
        if (app.got_subcommand(tra_cmd)) {
            stage = "train";
            return cmd_train(tra, cfg);
        }
        if (app.got_subcommand(eva_cmd)) {
            stage = "eval";
            return cmd_eval(eva, cfg);
        }
        if (app.got_subcommand(run_cmd)) {
            stage = "run";
            return cmd_run(run, cfg);
        }
        std::cout << app.help();
        return 0;
    } catch (const NumericalError& e) {
        std::cerr << error_record("numerical", stage, e.what()).dump() << "\n";
        return 3;
    } catch (const InvalidInput& e) {
        std::cerr << error_record("invalid_input", stage, e.what()).dump() << "\n";
        return stage == "config" ? 1 : 2;
    } catch (const DataError& e) {
        std::cerr << error_record("data", stage, e.what()).dump() << "\n";
        return stage == "config" ? 1 : 2;
    }
}
