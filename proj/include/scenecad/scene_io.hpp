#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenecad/align.hpp"
#include "scenecad/datagen.hpp"
#include "scenecad/geom.hpp"
#include "scenecad/layout.hpp"
#include "scenecad/mlp.hpp"
#include "scenecad/mpnn.hpp"
#include "scenecad/relations.hpp"

namespace scenecad::io {

using geom::Mat3;
using geom::Rot3;
using geom::Vec3;
using geom::VoxelGrid;
using nlohmann::json;

inline constexpr int kSceneFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;
inline constexpr int kCadFormatVersion = 1;

// ---------------------------------------------------------------------------
// low-level helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open file for reading: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open file for writing: " + path);
    }
    out << text;
    if (!out) {
        throw DataError("write failed: " + path);
    }
}

inline json parse_json(const std::string& text, const std::string& where) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        throw DataError(where + ": not valid JSON");
    }
    return j;
}

/// Strict field check: every key must be known. Typos and fields from newer
/// format revisions fail loudly instead of being ignored.
inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where, int version) {
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
                            std::to_string(version) + ")");
        }
    }
}

inline const json& field(const json& j, const char* key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) {
        throw DataError(where + ": missing field '" + key + "'");
    }
    return *it;
}

inline json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number()) {
        throw DataError(where + ": expected [x,y,z]");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json mat3_json(const Mat3& m) {
    json out = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.push_back(m(r, c));
    return out;
}

inline Mat3 mat3_from(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 9) {
        throw DataError(where + ": expected 9 row-major entries");
    }
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = j[3 * r + c].get<double>();
    return m;
}

inline Rot3 rotation_from(const json& j, const std::string& where) {
    const Mat3 m = mat3_from(j, where);
    if (!Rot3::is_rotation(m)) {
        throw DataError(where + ": matrix is not a proper rotation");
    }
    return Rot3::from_matrix_unchecked(m);
}

inline json points_json(const std::vector<Vec3>& pts) {
    json out = json::array();
    for (const Vec3& p : pts) out.push_back(vec3_json(p));
    return out;
}

inline std::vector<Vec3> points_from(const json& j, const std::string& where) {
    if (!j.is_array()) {
        throw DataError(where + ": expected an array of points");
    }
    std::vector<Vec3> out;
    out.reserve(j.size());
    for (const json& p : j) out.push_back(vec3_from(p, where));
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// relation <-> string encoding
// ---------------------------------------------------------------------------

inline std::string relation_kind_string(const relations::Relation& r) {
    switch (r.kind) {
        case relations::Relation::Kind::NoSupport: return "none";
        case relations::Relation::Kind::VerticalSupport: return "vertical_support";
        case relations::Relation::Kind::HorizontalTouch: return "horizontal_touch";
        case relations::Relation::Kind::AngleBin:
            return "angle_bin:" + std::to_string(r.bin);
    }
    throw InvalidInput("relation_kind_string: bad kind");
}

inline json relation_json(const relations::Relation& r) {
    const bool angle = r.kind == relations::Relation::Kind::AngleBin;
    return {{"source", "object:" + std::to_string(r.source)},
            {"target", (angle ? "object:" : "quad:") + std::to_string(r.target)},
            {"kind", relation_kind_string(r)}};
}

namespace detail {

inline int parse_node_ref(const std::string& s, const char* prefix, const std::string& where) {
    const std::string pre = std::string(prefix) + ":";
    if (s.rfind(pre, 0) != 0) {
        throw DataError(where + ": expected '" + pre + "<index>', got '" + s + "'");
    }
    int v = 0;
    const auto res = std::from_chars(s.data() + pre.size(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 0) {
        throw DataError(where + ": bad node index in '" + s + "'");
    }
    return v;
}

inline relations::Relation relation_from(const json& j, const std::string& where) {
    check_keys(j, {"source", "target", "kind"}, where, kSceneFormatVersion);
    relations::Relation r;
    const std::string kind = field(j, "kind", where).get<std::string>();
    const std::string src = field(j, "source", where).get<std::string>();
    const std::string tgt = field(j, "target", where).get<std::string>();
    r.source = parse_node_ref(src, "object", where);
    if (kind == "none" || kind == "vertical_support" || kind == "horizontal_touch") {
        r.target = parse_node_ref(tgt, "quad", where);
        r.kind = kind == "none" ? relations::Relation::Kind::NoSupport
                 : kind == "vertical_support" ? relations::Relation::Kind::VerticalSupport
                                              : relations::Relation::Kind::HorizontalTouch;
    } else if (kind.rfind("angle_bin:", 0) == 0) {
        r.target = parse_node_ref(tgt, "object", where);
        r.kind = relations::Relation::Kind::AngleBin;
        int b = 0;
        const auto res = std::from_chars(kind.data() + 10, kind.data() + kind.size(), b);
        if (res.ec != std::errc() || res.ptr != kind.data() + kind.size() || b < 0) {
            throw DataError(where + ": bad angle bin in '" + kind + "'");
        }
        r.bin = b;
    } else {
        throw DataError(where + ": unknown relation kind '" + kind + "'");
    }
    return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// scene files
// ---------------------------------------------------------------------------

inline json scene_to_json(const datagen::Scene& scene) {
    json j;
    j["format"] = "scenecad-scene";
    j["version"] = kSceneFormatVersion;
    j["units"] = "meters";
    j["metadata"] = {{"seed", scene.seed},
                     {"partial_scan", "occupancy_dropout"},
                     {"dropout", scene.dropout},
                     {"corner_jitter_sigma", scene.corner_jitter_sigma},
                     {"point_noise_sigma", scene.point_noise_sigma},
                     {"heatmap_sigma", scene.heatmap_sigma}};

    const VoxelGrid& g = scene.occupancy;
    json occupied = json::array();
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        if (g.values[i] > 0.5) occupied.push_back(i);
    }
    j["occupancy"] = {{"origin", detail::vec3_json(g.origin)},
                      {"voxel_size", g.voxel_size},
                      {"dims", {g.nx, g.ny, g.nz}},
                      {"occupied", std::move(occupied)}};

    j["corner_observations"] = detail::points_json(scene.corner_observations);

    json layout;
    layout["corners"] = detail::points_json(scene.gt_layout.corners);
    layout["edges"] = json::array();
    for (const auto& [a, b] : scene.gt_layout.edges) layout["edges"].push_back({a, b});
    layout["quads"] = json::array();
    for (const auto& q : scene.gt_layout.quads) layout["quads"].push_back({q[0], q[1], q[2], q[3]});
    j["layout"] = std::move(layout);

    j["objects"] = json::array();
    for (const datagen::PlacedObject& o : scene.objects) {
        json obj;
        obj["category"] = o.category;
        obj["model_id"] = o.model_id;
        obj["pose"] = {{"translation", detail::vec3_json(o.pose.translation)},
                       {"rotation", detail::mat3_json(o.pose.rotation.matrix())},
                       {"scale", detail::vec3_json(o.pose.scale)}};
        obj["obb"] = {{"center", detail::vec3_json(o.obb.center)},
                      {"basis", detail::mat3_json(o.obb.basis.matrix())},
                      {"half_extents", detail::vec3_json(o.obb.half_extents)},
                      {"front_axis", o.obb.front_axis},
                      {"front_sign", o.obb.front_sign}};
        obj["correspondences"] = {{"source", detail::points_json(o.correspondences.source)},
                                  {"target", detail::points_json(o.correspondences.target)}};
        j["objects"].push_back(std::move(obj));
    }

    j["relations"] = json::array();
    for (const relations::Relation& r : scene.gt_relations) {
        j["relations"].push_back(relation_json(r));
    }
    return j;
}

inline datagen::Scene scene_from_json(const json& j, const std::string& where = "scene") {
    detail::check_keys(j,
                       {"format", "version", "units", "metadata", "occupancy",
                        "corner_observations", "layout", "objects", "relations"},
                       where, kSceneFormatVersion);
    if (detail::field(j, "format", where).get<std::string>() != "scenecad-scene") {
        throw DataError(where + ": not a scenecad-scene file");
    }
    if (detail::field(j, "version", where).get<int>() != kSceneFormatVersion) {
        throw DataError(where + ": unsupported scene format version");
    }
    if (detail::field(j, "units", where).get<std::string>() != "meters") {
        throw DataError(where + ": units must be meters");
    }

    datagen::Scene scene;
    const json& meta = detail::field(j, "metadata", where);
    detail::check_keys(meta,
                       {"seed", "partial_scan", "dropout", "corner_jitter_sigma",
                        "point_noise_sigma", "heatmap_sigma"},
                       where + ".metadata", kSceneFormatVersion);
    scene.seed = detail::field(meta, "seed", where).get<std::uint64_t>();
    scene.dropout = detail::field(meta, "dropout", where).get<double>();
    scene.corner_jitter_sigma = detail::field(meta, "corner_jitter_sigma", where).get<double>();
    scene.point_noise_sigma = detail::field(meta, "point_noise_sigma", where).get<double>();
    scene.heatmap_sigma = detail::field(meta, "heatmap_sigma", where).get<double>();

    const json& occ = detail::field(j, "occupancy", where);
    detail::check_keys(occ, {"origin", "voxel_size", "dims", "occupied"}, where + ".occupancy",
                       kSceneFormatVersion);
    const json& dims = detail::field(occ, "dims", where);
    if (!dims.is_array() || dims.size() != 3) {
        throw DataError(where + ": occupancy dims must be [nx,ny,nz]");
    }
    VoxelGrid g(detail::vec3_from(detail::field(occ, "origin", where), where + ".occupancy"),
                detail::field(occ, "voxel_size", where).get<double>(), dims[0].get<int>(),
                dims[1].get<int>(), dims[2].get<int>());
    for (const json& idx : detail::field(occ, "occupied", where)) {
        const std::size_t i = idx.get<std::size_t>();
        if (i >= g.values.size()) {
            throw DataError(where + ": occupied cell index out of range");
        }
        g.values[i] = 1.0;
    }
    scene.occupancy = std::move(g);
    scene.voxel_size = scene.occupancy.voxel_size;

    scene.corner_observations =
        detail::points_from(detail::field(j, "corner_observations", where), where);

    const json& lay = detail::field(j, "layout", where);
    detail::check_keys(lay, {"corners", "edges", "quads"}, where + ".layout",
                       kSceneFormatVersion);
    scene.gt_layout.corners = detail::points_from(detail::field(lay, "corners", where), where);
    const int n_corners = static_cast<int>(scene.gt_layout.corners.size());
    const auto corner_index = [&](const json& v) {
        const int i = v.get<int>();
        if (i < 0 || i >= n_corners) {
            throw DataError(where + ": layout index out of range");
        }
        return i;
    };
    for (const json& e : detail::field(lay, "edges", where)) {
        if (!e.is_array() || e.size() != 2) {
            throw DataError(where + ": layout edge must be [i,j]");
        }
        scene.gt_layout.add_edge(corner_index(e[0]), corner_index(e[1]));
    }
    for (const json& q : detail::field(lay, "quads", where)) {
        if (!q.is_array() || q.size() != 4) {
            throw DataError(where + ": layout quad must be [a,b,c,d]");
        }
        scene.gt_layout.add_quad(
            {corner_index(q[0]), corner_index(q[1]), corner_index(q[2]), corner_index(q[3])});
    }

    for (const json& oj : detail::field(j, "objects", where)) {
        detail::check_keys(oj, {"category", "model_id", "pose", "obb", "correspondences"},
                           where + ".objects", kSceneFormatVersion);
        datagen::PlacedObject o;
        o.category = detail::field(oj, "category", where).get<std::string>();
        o.model_id = detail::field(oj, "model_id", where).get<std::string>();
        const json& pj = detail::field(oj, "pose", where);
        detail::check_keys(pj, {"translation", "rotation", "scale"}, where + ".pose",
                           kSceneFormatVersion);
        o.pose.translation =
            detail::vec3_from(detail::field(pj, "translation", where), where + ".pose");
        o.pose.rotation =
            detail::rotation_from(detail::field(pj, "rotation", where), where + ".pose");
        o.pose.scale = detail::vec3_from(detail::field(pj, "scale", where), where + ".pose");
        if (!o.pose.valid()) {
            throw DataError(where + ": pose scale must be positive and finite");
        }
        const json& bj = detail::field(oj, "obb", where);
        detail::check_keys(bj, {"center", "basis", "half_extents", "front_axis", "front_sign"},
                           where + ".obb", kSceneFormatVersion);
        o.obb.center = detail::vec3_from(detail::field(bj, "center", where), where + ".obb");
        o.obb.basis = detail::rotation_from(detail::field(bj, "basis", where), where + ".obb");
        o.obb.half_extents =
            detail::vec3_from(detail::field(bj, "half_extents", where), where + ".obb");
        o.obb.front_axis = detail::field(bj, "front_axis", where).get<int>();
        o.obb.front_sign = detail::field(bj, "front_sign", where).get<int>();
        if (o.obb.front_axis < 0 || o.obb.front_axis > 2 ||
            (o.obb.front_sign != 1 && o.obb.front_sign != -1)) {
            throw DataError(where + ": obb front axis/sign out of range");
        }
        const json& cj = detail::field(oj, "correspondences", where);
        detail::check_keys(cj, {"source", "target"}, where + ".correspondences",
                           kSceneFormatVersion);
        o.correspondences.source =
            detail::points_from(detail::field(cj, "source", where), where);
        o.correspondences.target =
            detail::points_from(detail::field(cj, "target", where), where);
        if (o.correspondences.source.size() != o.correspondences.target.size()) {
            throw DataError(where + ": correspondence source/target length mismatch");
        }
        scene.objects.push_back(std::move(o));
    }

    const int n_objects = static_cast<int>(scene.objects.size());
    const int n_quads = static_cast<int>(scene.gt_layout.quads.size());
    for (const json& rj : detail::field(j, "relations", where)) {
        const relations::Relation r = detail::relation_from(rj, where + ".relations");
        const bool angle = r.kind == relations::Relation::Kind::AngleBin;
        if (r.source >= n_objects || r.target >= (angle ? n_objects : n_quads)) {
            throw DataError(where + ": relation references a missing node");
        }
        scene.gt_relations.push_back(r);
    }
    return scene;
}

inline void save_scene(const std::string& path, const datagen::Scene& scene) {
    detail::write_text_file(path, scene_to_json(scene).dump(1) + "\n");
}

inline datagen::Scene load_scene(const std::string& path) {
    return scene_from_json(detail::parse_json(detail::read_text_file(path), path), path);
}

// ---------------------------------------------------------------------------
// model checkpoints
// ---------------------------------------------------------------------------

/// Every trained network of the pipeline in one file.
struct ModelSet {
    mpnn::MlpModel edge_classifier;
    mpnn::MlpModel quad_classifier;
    mpnn::RelationModels relation;
};

inline json mlp_to_json(const mpnn::MlpModel& m) {
    json layers = json::array();
    for (const mpnn::Layer& layer : m.layers()) {
        json w = json::array();
        for (int r = 0; r < layer.weight.rows(); ++r) {
            json row = json::array();
            for (int c = 0; c < layer.weight.cols(); ++c) row.push_back(layer.weight(r, c));
            w.push_back(std::move(row));
        }
        json b = json::array();
        for (int r = 0; r < layer.bias.size(); ++r) b.push_back(layer.bias(r));
        layers.push_back({{"weight", std::move(w)}, {"bias", std::move(b)}});
    }
    return {{"layers", std::move(layers)}};
}

inline mpnn::MlpModel mlp_from_json(const json& j, const std::string& where) {
    detail::check_keys(j, {"layers"}, where, kModelFormatVersion);
    std::vector<mpnn::Layer> layers;
    for (const json& lj : detail::field(j, "layers", where)) {
        detail::check_keys(lj, {"weight", "bias"}, where, kModelFormatVersion);
        const json& wj = detail::field(lj, "weight", where);
        const json& bj = detail::field(lj, "bias", where);
        if (!wj.is_array() || wj.empty() || !wj[0].is_array() || wj[0].empty() ||
            bj.size() != wj.size()) {
            throw DataError(where + ": layer weight/bias shape mismatch");
        }
        mpnn::Layer layer;
        layer.weight.resize(static_cast<int>(wj.size()), static_cast<int>(wj[0].size()));
        for (int r = 0; r < layer.weight.rows(); ++r) {
            if (static_cast<int>(wj[r].size()) != layer.weight.cols()) {
                throw DataError(where + ": ragged weight matrix");
            }
            for (int c = 0; c < layer.weight.cols(); ++c) {
                layer.weight(r, c) = wj[r][c].get<double>();
            }
        }
        layer.bias.resize(static_cast<int>(bj.size()));
        for (int r = 0; r < layer.bias.size(); ++r) layer.bias(r) = bj[r].get<double>();
        layers.push_back(std::move(layer));
    }
    try {
        return mpnn::MlpModel::from_layers(std::move(layers));
    } catch (const InvalidInput& e) {
        throw DataError(where + ": " + e.what());
    }
}

inline void save_models(const std::string& path, const ModelSet& m) {
    json j;
    j["format"] = "scenecad-models";
    j["version"] = kModelFormatVersion;
    j["edge_classifier"] = mlp_to_json(m.edge_classifier);
    j["quad_classifier"] = mlp_to_json(m.quad_classifier);
    j["message_fn"] = mlp_to_json(m.relation.f_e);
    j["support_head"] = mlp_to_json(m.relation.support_head);
    j["angle_head"] = mlp_to_json(m.relation.angle_head);
    detail::write_text_file(path, j.dump(1) + "\n");
}

inline ModelSet load_models(const std::string& path) {
    const json j = detail::parse_json(detail::read_text_file(path), path);
    detail::check_keys(j,
                       {"format", "version", "edge_classifier", "quad_classifier", "message_fn",
                        "support_head", "angle_head"},
                       path, kModelFormatVersion);
    if (detail::field(j, "format", path).get<std::string>() != "scenecad-models") {
        throw DataError(path + ": not a scenecad-models file");
    }
    if (detail::field(j, "version", path).get<int>() != kModelFormatVersion) {
        throw DataError(path + ": unsupported model format version");
    }
    ModelSet m;
    m.edge_classifier = mlp_from_json(detail::field(j, "edge_classifier", path), path);
    m.quad_classifier = mlp_from_json(detail::field(j, "quad_classifier", path), path);
    m.relation.f_e = mlp_from_json(detail::field(j, "message_fn", path), path);
    m.relation.support_head = mlp_from_json(detail::field(j, "support_head", path), path);
    m.relation.angle_head = mlp_from_json(detail::field(j, "angle_head", path), path);
    return m;
}

// ---------------------------------------------------------------------------
// point clouds and meshes
// ---------------------------------------------------------------------------

namespace detail {

inline void append_double(std::string& out, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

}  // namespace detail

/// One "x y z" line per point; shortest round-trip decimal form.
inline void save_xyz(const std::string& path, const std::vector<Vec3>& pts) {
    std::string out;
    for (const Vec3& p : pts) {
        detail::append_double(out, p.x());
        out.push_back(' ');
        detail::append_double(out, p.y());
        out.push_back(' ');
        detail::append_double(out, p.z());
        out.push_back('\n');
    }
    detail::write_text_file(path, out);
}

inline std::vector<Vec3> load_xyz(const std::string& path) {
    const std::string text = detail::read_text_file(path);
    std::vector<Vec3> pts;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    while (p < end) {
        while (p < end && (*p == ' ' || *p == '\n' || *p == '\r' || *p == '\t')) ++p;
        if (p == end) break;
        Vec3 v;
        for (int a = 0; a < 3; ++a) {
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            double x = 0.0;
            const auto res = std::from_chars(p, end, x);
            if (res.ec != std::errc()) {
                throw DataError(path + ": malformed coordinate");
            }
            v[a] = x;
            p = res.ptr;
        }
        pts.push_back(v);
    }
    return pts;
}

/// Wavefront OBJ with one quad face per layout quad (1-based indices).
inline void save_obj_quads(const std::string& path, const std::vector<Vec3>& corners,
                           const std::vector<std::array<int, 4>>& quads) {
    std::string out;
    for (const Vec3& c : corners) {
        out += "v ";
        detail::append_double(out, c.x());
        out.push_back(' ');
        detail::append_double(out, c.y());
        out.push_back(' ');
        detail::append_double(out, c.z());
        out.push_back('\n');
    }
    for (const auto& q : quads) {
        out += "f";
        for (int idx : q) {
            if (idx < 0 || idx >= static_cast<int>(corners.size())) {
                throw InvalidInput("save_obj_quads: quad index out of range");
            }
            out += " " + std::to_string(idx + 1);
        }
        out.push_back('\n');
    }
    detail::write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// CAD database directory
// ---------------------------------------------------------------------------

/// Directory layout: <dir>/db.json listing models, <dir>/points/<id>.xyz with
/// the canonical surface points. Descriptors are recomputed at load time so
/// the index never goes stale against the point files.
inline void save_cad_database(const std::string& dir, const align::CadDatabase& db) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "points", ec);
    if (ec) {
        throw DataError("cannot create directory: " + dir);
    }
    json j;
    j["format"] = "scenecad-cad-db";
    j["version"] = kCadFormatVersion;
    j["models"] = json::array();
    for (const align::CadModel& m : db.models) {
        const std::string rel = "points/" + m.model_id + ".xyz";
        save_xyz((fs::path(dir) / rel).string(), m.points);
        j["models"].push_back(
            {{"model_id", m.model_id}, {"category", m.category}, {"points", rel}});
    }
    detail::write_text_file((fs::path(dir) / "db.json").string(), j.dump(1) + "\n");
}

inline align::CadDatabase load_cad_database(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string index_path = (fs::path(dir) / "db.json").string();
    const json j = detail::parse_json(detail::read_text_file(index_path), index_path);
    detail::check_keys(j, {"format", "version", "models"}, index_path, kCadFormatVersion);
    if (detail::field(j, "format", index_path).get<std::string>() != "scenecad-cad-db") {
        throw DataError(index_path + ": not a scenecad-cad-db file");
    }
    if (detail::field(j, "version", index_path).get<int>() != kCadFormatVersion) {
        throw DataError(index_path + ": unsupported CAD db format version");
    }
    align::CadDatabase db;
    for (const json& mj : detail::field(j, "models", index_path)) {
        detail::check_keys(mj, {"model_id", "category", "points"}, index_path,
                           kCadFormatVersion);
        align::CadModel m;
        m.model_id = detail::field(mj, "model_id", index_path).get<std::string>();
        m.category = detail::field(mj, "category", index_path).get<std::string>();
        const std::string rel = detail::field(mj, "points", index_path).get<std::string>();
        m.points = load_xyz((fs::path(dir) / rel).string());
        if (m.points.empty()) {
            throw DataError(index_path + ": model '" + m.model_id + "' has no points");
        }
        m.descriptor = align::compute_descriptor(geom::voxelize(m.points, 0.025, 1));
        db.add(std::move(m));
    }
    return db;
}

}  // namespace scenecad::io
