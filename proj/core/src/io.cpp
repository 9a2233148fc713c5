#include "relmap/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "relmap/errors.hpp"

namespace relmap {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "raw file formats assume a little-endian host");

namespace {

std::vector<char> read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_raw(const fs::path& path, const void* data, std::size_t bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw IoError("write failed for " + path.string());
}

json parse_json_file(const fs::path& path) {
    const auto text = read_all(path);
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::exception& e) {
        throw BundleError(BundleError::Kind::MalformedMetadata, path.string() + ": " + e.what());
    }
}

Dims dims_from_json(const json& j, const fs::path& where) {
    try {
        const auto v = j.get<std::vector<std::size_t>>();
        if (v.size() != 3) throw BundleError(BundleError::Kind::MalformedMetadata, where.string() + ": dims must have 3 entries");
        return {v[0], v[1], v[2]};
    } catch (const json::exception& e) {
        throw BundleError(BundleError::Kind::MalformedMetadata, where.string() + ": dims: " + e.what());
    }
}

json dims_to_json(const Dims& d) { return json::array({d.depth, d.height, d.width}); }

std::string sequence_file(SequenceKind kind) {
    std::string name(to_string(kind));
    for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return name + ".f32";
}

std::vector<char> read_sized(const fs::path& path, std::size_t expected) {
    if (!fs::exists(path)) throw BundleError(BundleError::Kind::MissingFile, "missing file " + path.string());
    auto bytes = read_all(path);
    if (bytes.size() != expected) {
        throw BundleError(BundleError::Kind::SizeMismatch, path.string() + " holds " + std::to_string(bytes.size()) +
                                                               " bytes, expected " + std::to_string(expected));
    }
    return bytes;
}

ojson slic_to_json(const SlicParams& p) {
    return {{"n_segments", p.n_segments},
            {"compactness", p.compactness},
            {"max_iterations", p.max_iterations},
            {"enforce_connectivity", p.enforce_connectivity},
            {"seed_sequence", to_string(p.seed_sequence)}};
}

SlicParams slic_from_json(const json& j) {
    SlicParams p;
    p.n_segments = j.at("n_segments").get<std::size_t>();
    p.compactness = j.at("compactness").get<double>();
    p.max_iterations = j.at("max_iterations").get<std::size_t>();
    p.enforce_connectivity = j.at("enforce_connectivity").get<bool>();
    p.seed_sequence = sequence_from_string(j.at("seed_sequence").get<std::string>());
    return p;
}

}  // namespace

std::vector<float> read_f32(const fs::path& path, std::size_t count) {
    const auto bytes = read_sized(path, count * sizeof(float));
    std::vector<float> out(count);
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

void write_f32(const fs::path& path, std::span<const float> data) { write_raw(path, data.data(), data.size_bytes()); }

void write_bytes(const fs::path& path, std::span<const std::uint8_t> data) {
    write_raw(path, data.data(), data.size_bytes());
}

void write_text(const fs::path& path, const std::string& text) { write_raw(path, text.data(), text.size()); }

// ---------------------------------------------------------------------------

Bundle load_bundle(const fs::path& dir) {
    const auto meta_path = dir / "meta.json";
    if (!fs::exists(meta_path)) throw BundleError(BundleError::Kind::MissingFile, "missing file " + meta_path.string());
    const auto meta = parse_json_file(meta_path);
    if (!meta.is_object() || !meta.contains("dims") || !meta.contains("sequences") || !meta["sequences"].is_object()) {
        throw BundleError(BundleError::Kind::MalformedMetadata, meta_path.string() + ": needs \"dims\" and \"sequences\"");
    }
    const Dims dims = dims_from_json(meta["dims"], meta_path);
    if (dims.voxels() == 0) throw BundleError(BundleError::Kind::MalformedMetadata, meta_path.string() + ": zero-sized dims");

    Bundle bundle;
    bundle.case_id = dir.filename().string();
    if (bundle.case_id.empty()) bundle.case_id = dir.parent_path().filename().string();
    if (meta.contains("case_id") && meta["case_id"].is_string()) bundle.case_id = meta["case_id"].get<std::string>();

    for (const auto& [name, file] : meta["sequences"].items()) {
        const auto kind = parse_sequence(name);
        if (!kind) throw BundleError(BundleError::Kind::UnknownSequence, meta_path.string() + ": unknown sequence '" + name + "'");
        if (!file.is_string()) {
            throw BundleError(BundleError::Kind::MalformedMetadata, meta_path.string() + ": file for " + name + " is not a string");
        }
        try {
            bundle.volume.set(*kind, ScalarVolume(dims, read_f32(dir / file.get<std::string>(), dims.voxels())));
        } catch (const ValidationError& e) {
            throw ValidationError((dir / file.get<std::string>()).string() + ": " + e.what());
        }
    }
    if (bundle.volume.sequence_count() == 0) {
        throw BundleError(BundleError::Kind::MalformedMetadata, meta_path.string() + ": no sequences declared");
    }
    if (meta.contains("ground_truth")) {
        if (!meta["ground_truth"].is_string()) {
            throw BundleError(BundleError::Kind::MalformedMetadata, meta_path.string() + ": ground_truth is not a string");
        }
        bundle.ground_truth = load_mask(dir / meta["ground_truth"].get<std::string>(), dims);
    }
    return bundle;
}

void save_bundle(const fs::path& dir, const MultiSequenceVolume& volume, const std::optional<BinaryMask>& ground_truth,
                 const std::string& case_id) {
    fs::create_directories(dir);
    ojson meta;
    if (!case_id.empty()) meta["case_id"] = case_id;
    meta["dims"] = dims_to_json(volume.dims());
    ojson sequences = ojson::object();
    for (auto kind : volume.present()) {
        sequences[std::string(to_string(kind))] = sequence_file(kind);
        write_f32(dir / sequence_file(kind), volume.get(kind).data());
    }
    meta["sequences"] = sequences;
    if (ground_truth) {
        if (ground_truth->dims() != volume.dims()) throw DimensionError("ground truth dims differ from volume dims");
        meta["ground_truth"] = "seg.u8";
        save_mask(*ground_truth, dir / "seg.u8");
    }
    write_text(dir / "meta.json", meta.dump(2) + "\n");
}

void save_mask(const BinaryMask& mask, const fs::path& path) { write_bytes(path, mask.bytes()); }

BinaryMask load_mask(const fs::path& path, const Dims& dims) {
    const auto bytes = read_sized(path, dims.voxels());
    std::vector<std::uint8_t> bits(bytes.begin(), bytes.end());
    for (auto b : bits) {
        if (b > 1) throw BundleError(BundleError::Kind::MalformedMetadata, path.string() + ": mask byte outside {0,1}");
    }
    return BinaryMask(dims, std::move(bits));
}

// ---------------------------------------------------------------------------

void save_labels(const SuperpixelLabelMap& labels, const std::optional<SlicParams>& params, const fs::path& dir) {
    fs::create_directories(dir);
    const auto data = labels.labels();
    write_raw(dir / "labels.u32", data.data(), data.size_bytes());
    ojson meta;
    meta["dims"] = dims_to_json(labels.dims());
    meta["count"] = labels.count();
    meta["params"] = params ? slic_to_json(*params) : ojson(nullptr);
    write_text(dir / "labels.json", meta.dump(2) + "\n");
}

SuperpixelLabelMap load_labels(const fs::path& dir, std::optional<SlicParams>* params) {
    const auto meta_path = dir / "labels.json";
    if (!fs::exists(meta_path)) throw BundleError(BundleError::Kind::MissingFile, "missing file " + meta_path.string());
    const auto meta = parse_json_file(meta_path);
    try {
        const Dims dims = dims_from_json(meta.at("dims"), meta_path);
        const auto count = meta.at("count").get<std::size_t>();
        const auto bytes = read_sized(dir / "labels.u32", dims.voxels() * sizeof(std::uint32_t));
        std::vector<std::uint32_t> data(dims.voxels());
        std::memcpy(data.data(), bytes.data(), bytes.size());
        if (params) *params = meta.contains("params") && !meta["params"].is_null() ? std::optional(slic_from_json(meta["params"])) : std::nullopt;
        return SuperpixelLabelMap(dims, std::move(data), count);
    } catch (const json::exception& e) {
        throw BundleError(BundleError::Kind::MalformedMetadata, meta_path.string() + ": " + e.what());
    }
}

void save_relevance(const RelevanceMap& relmap, const fs::path& dir) {
    relmap.validate();
    fs::create_directories(dir);
    save_labels(*relmap.labels, relmap.slic, dir);
    write_bytes(dir / "relmap.u8", relmap.voxel_map);

    ojson meta;
    meta["dims"] = dims_to_json(relmap.dims());
    meta["count"] = relmap.count();
    meta["method"] = to_string(relmap.method);
    meta["p_original"] = relmap.p_original;
    meta["uninformative"] = relmap.uninformative;
    meta["epsilon"] = relmap.epsilon;
    meta["oracle"] = relmap.oracle_identity;
    meta["slic"] = relmap.slic ? slic_to_json(*relmap.slic) : ojson(nullptr);
    meta["raw_scores"] = relmap.raw_scores;
    meta["normalized_scores"] = relmap.normalized_scores;
    if (!relmap.optimal_fills.empty()) meta["optimal_fills"] = relmap.optimal_fills;
    write_text(dir / "relmap.json", meta.dump(2) + "\n");
}

RelevanceMap load_relevance(const fs::path& dir) {
    const auto meta_path = dir / "relmap.json";
    if (!fs::exists(meta_path)) throw BundleError(BundleError::Kind::MissingFile, "missing file " + meta_path.string());
    const auto meta = parse_json_file(meta_path);
    RelevanceMap map;
    try {
        std::optional<SlicParams> slic;
        map.labels = std::make_shared<const SuperpixelLabelMap>(load_labels(dir, &slic));
        map.slic = slic;
        if (dims_from_json(meta.at("dims"), meta_path) != map.labels->dims()) {
            throw BundleError(BundleError::Kind::SizeMismatch, meta_path.string() + ": dims differ from labels.json");
        }
        map.method = method_family_from_string(meta.at("method").get<std::string>());
        map.p_original = meta.at("p_original").get<double>();
        map.uninformative = meta.at("uninformative").get<bool>();
        map.epsilon = meta.at("epsilon").get<double>();
        map.oracle_identity = meta.at("oracle").get<std::string>();
        map.raw_scores = meta.at("raw_scores").get<std::vector<double>>();
        map.normalized_scores = meta.at("normalized_scores").get<std::vector<std::uint8_t>>();
        if (meta.contains("optimal_fills")) map.optimal_fills = meta["optimal_fills"].get<std::vector<FillVector>>();
    } catch (const json::exception& e) {
        throw BundleError(BundleError::Kind::MalformedMetadata, meta_path.string() + ": " + e.what());
    }
    const auto bytes = read_sized(dir / "relmap.u8", map.labels->dims().voxels());
    map.voxel_map.assign(bytes.begin(), bytes.end());
    try {
        map.validate();
    } catch (const InvariantError& e) {
        throw BundleError(BundleError::Kind::MalformedMetadata, dir.string() + ": " + e.what());
    }
    return map;
}

}  // namespace relmap
