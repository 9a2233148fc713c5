#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/dist_sink.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "relmap/classifier.hpp"
#include "relmap/errors.hpp"
#include "relmap/evaluation.hpp"
#include "relmap/io.hpp"
#include "relmap/montage.hpp"
#include "relmap/phantom.hpp"
#include "relmap/remote_oracle.hpp"
#include "relmap/superpixel.hpp"

namespace relmap::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream in(text);
    for (std::string part; std::getline(in, part, sep);) {
        if (!part.empty()) parts.push_back(part);
    }
    return parts;
}

std::size_t parse_count(const std::string& text, const std::string& what) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size() || text.empty() || text[0] == '-') {
        throw ValidationError(what + ": '" + text + "' is not a nonnegative integer");
    }
    return static_cast<std::size_t>(v);
}

Dims parse_dims(const std::string& text, const std::string& what) {
    const auto parts = split(text, ',');
    if (parts.size() != 3) throw ValidationError(what + ": expected D,H,W, got '" + text + "'");
    return {parse_count(parts[0], what), parse_count(parts[1], what), parse_count(parts[2], what)};
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& text, F&& parse_one) {
    std::vector<T> out;
    for (const auto& part : split(text, ',')) out.push_back(parse_one(part));
    return out;
}

std::vector<std::size_t> parse_counts(const std::string& text, const std::string& what) {
    return parse_list<std::size_t>(text, [&](const std::string& s) { return parse_count(s, what); });
}

std::vector<SequenceKind> parse_sequences(const std::string& text) {
    return parse_list<SequenceKind>(text, [](const std::string& s) { return sequence_from_string(s); });
}

std::vector<MethodFamily> parse_methods(const std::string& text) {
    return parse_list<MethodFamily>(text, [](const std::string& s) { return method_family_from_string(s); });
}

template <typename T>
void take(const json& j, const char* key, T& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ValidationError("unknown config key '" + where + key + "'");
        }
    }
}

}  // namespace

void RunConfig::validate() const {
    if (n_segments < 1) throw ValidationError("n_segments must be >= 1");
    if (!(compactness > 0.0)) throw ValidationError("compactness must be > 0");
    if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
    budget.validate();
    if (oracle.empty()) throw ValidationError("oracle must be 'synthetic' or an endpoint URL");
    if (remote() && oracle.rfind("http://", 0) != 0 && oracle.rfind("https://", 0) != 0) {
        throw ValidationError("oracle endpoint must start with http:// or https://, got '" + oracle + "'");
    }
    if (crop && crop->voxels() == 0) throw ValidationError("crop dims must be positive");
    if (attempts < 1 || max_in_flight < 1 || timeout_ms < 1) {
        throw ValidationError("remote attempts, max_in_flight and timeout_ms must be >= 1");
    }
    if (grid_sequences.empty() || grid_n_segments.empty() || grid_methods.empty()) {
        throw ValidationError("grid sequences, n_segments and methods must be nonempty");
    }
    if (max_rank < 1) throw ValidationError("max_rank must be >= 1");
}

ojson to_json(const RunConfig& c) {
    ojson j;
    j["inputs"] = c.inputs;
    j["seed_sequence"] = to_string(c.seed_sequence);
    j["n_segments"] = c.n_segments;
    j["compactness"] = c.compactness;
    j["max_iterations"] = c.max_iterations;
    j["method"] = to_string(c.method);
    j["oracle"] = c.oracle;
    j["budget"] = {{"coarse_grid_size", c.budget.coarse_grid_size},
                   {"refinement_iterations", c.budget.refinement_iterations},
                   {"include_baseline_seeds", c.budget.include_baseline_seeds}};
    j["out"] = c.out;
    j["preprocess_order"] = to_string(c.preprocess_order);
    j["crop"] = c.crop ? ojson::array({c.crop->depth, c.crop->height, c.crop->width}) : ojson(nullptr);
    j["synthetic"] = {{"gain", c.gain}, {"offset", c.offset}, {"sequence_weights", c.sequence_weights}};
    j["remote"] = {{"timeout_ms", c.timeout_ms}, {"attempts", c.attempts}, {"max_in_flight", c.max_in_flight}};
    ojson seqs = ojson::array(), methods = ojson::array();
    for (auto s : c.grid_sequences) seqs.push_back(to_string(s));
    for (auto m : c.grid_methods) methods.push_back(to_string(m));
    j["grid"] = {{"sequences", seqs}, {"n_segments", c.grid_n_segments}, {"methods", methods}, {"workers", c.workers}};
    j["max_rank"] = c.max_rank;
    return j;
}

void apply_json(RunConfig& c, const json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    reject_unknown(j,
                   {"inputs", "seed_sequence", "n_segments", "compactness", "max_iterations", "method", "oracle",
                    "budget", "out", "preprocess_order", "crop", "synthetic", "remote", "grid", "max_rank"},
                   "");
    try {
        take(j, "inputs", c.inputs);
        if (j.contains("seed_sequence")) c.seed_sequence = sequence_from_string(j["seed_sequence"].get<std::string>());
        take(j, "n_segments", c.n_segments);
        take(j, "compactness", c.compactness);
        take(j, "max_iterations", c.max_iterations);
        if (j.contains("method")) c.method = method_family_from_string(j["method"].get<std::string>());
        take(j, "oracle", c.oracle);
        if (j.contains("budget")) {
            const auto& b = j["budget"];
            reject_unknown(b, {"coarse_grid_size", "refinement_iterations", "include_baseline_seeds"}, "budget.");
            take(b, "coarse_grid_size", c.budget.coarse_grid_size);
            take(b, "refinement_iterations", c.budget.refinement_iterations);
            take(b, "include_baseline_seeds", c.budget.include_baseline_seeds);
        }
        take(j, "out", c.out);
        if (j.contains("preprocess_order")) {
            c.preprocess_order = preprocess_order_from_string(j["preprocess_order"].get<std::string>());
        }
        if (j.contains("crop")) {
            if (j["crop"].is_null()) {
                c.crop.reset();
            } else {
                const auto v = j["crop"].get<std::vector<std::size_t>>();
                if (v.size() != 3) throw ValidationError("crop must be [D,H,W]");
                c.crop = Dims{v[0], v[1], v[2]};
            }
        }
        if (j.contains("synthetic")) {
            const auto& s = j["synthetic"];
            reject_unknown(s, {"gain", "offset", "sequence_weights"}, "synthetic.");
            take(s, "gain", c.gain);
            take(s, "offset", c.offset);
            take(s, "sequence_weights", c.sequence_weights);
        }
        if (j.contains("remote")) {
            const auto& r = j["remote"];
            reject_unknown(r, {"timeout_ms", "attempts", "max_in_flight"}, "remote.");
            take(r, "timeout_ms", c.timeout_ms);
            take(r, "attempts", c.attempts);
            take(r, "max_in_flight", c.max_in_flight);
        }
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            reject_unknown(g, {"sequences", "n_segments", "methods", "workers"}, "grid.");
            if (g.contains("sequences")) {
                c.grid_sequences.clear();
                for (const auto& s : g["sequences"]) c.grid_sequences.push_back(sequence_from_string(s.get<std::string>()));
            }
            take(g, "n_segments", c.grid_n_segments);
            if (g.contains("methods")) {
                c.grid_methods.clear();
                for (const auto& m : g["methods"]) c.grid_methods.push_back(method_family_from_string(m.get<std::string>()));
            }
            take(g, "workers", c.workers);
        }
        take(j, "max_rank", c.max_rank);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
}

int exit_code(const std::exception_ptr& error) {
    try {
        std::rethrow_exception(error);
    } catch (const OracleError&) {
        return kExitOracle;
    } catch (const InvariantError&) {
        return kExitInternal;
    } catch (const ValidationError&) {
        return kExitValidation;
    } catch (const DimensionError&) {
        return kExitValidation;
    } catch (const IoError&) {
        return kExitValidation;
    } catch (const relmap::ParseError&) {
        return kExitValidation;
    } catch (const BundleError&) {
        return kExitValidation;
    } catch (...) {
        return kExitInternal;
    }
}

// ---------------------------------------------------------------------------
// Run plumbing

namespace {

/// Exclusive use of an output directory for one run, plus its run log.
class OutputDir {
public:
    OutputDir(const fs::path& dir, spdlog::sinks::dist_sink_mt& sinks) : dir_(dir), sinks_(sinks) {
        fs::create_directories(dir_);
        lock_ = dir_ / ".relmap.lock";
        std::FILE* f = std::fopen(lock_.c_str(), "wx");
        if (!f) throw ValidationError("output directory " + dir_.string() + " is locked by another run (" + lock_.string() + ")");
        std::fclose(f);
        log_ = std::make_shared<spdlog::sinks::basic_file_sink_mt>((dir_ / "run.log").string());
        log_->set_level(spdlog::level::debug);
        sinks_.add_sink(log_);
    }
    ~OutputDir() {
        sinks_.remove_sink(log_);
        std::error_code ec;
        fs::remove(lock_, ec);
    }
    OutputDir(const OutputDir&) = delete;
    OutputDir& operator=(const OutputDir&) = delete;

    const fs::path& path() const { return dir_; }
    fs::path operator/(const std::string& name) const { return dir_ / name; }

private:
    fs::path dir_;
    fs::path lock_;
    spdlog::sinks::dist_sink_mt& sinks_;
    std::shared_ptr<spdlog::sinks::basic_file_sink_mt> log_;
};

struct MontageSpec {
    SliceAxis axis = SliceAxis::Z;
    std::vector<std::size_t> slices;
};

/// "axis=z slices=40,64,88"
MontageSpec parse_montage(const std::string& text) {
    MontageSpec spec;
    std::stringstream in(text);
    for (std::string token; in >> token;) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw ValidationError("montage: expected key=value, got '" + token + "'");
        const auto key = token.substr(0, eq), value = token.substr(eq + 1);
        if (key == "axis") {
            spec.axis = slice_axis_from_string(value);
        } else if (key == "slices") {
            spec.slices = parse_counts(value, "montage slices");
        } else {
            throw ValidationError("montage: unknown key '" + key + "'");
        }
    }
    return spec;
}

std::vector<std::size_t> default_slices(const Dims& d, SliceAxis axis) {
    const std::size_t n = axis == SliceAxis::Z ? d.depth : axis == SliceAxis::Y ? d.height : d.width;
    return {n / 4, n / 2, (3 * n) / 4};
}

SlicParams slic_params(const RunConfig& c) {
    SlicParams p;
    p.n_segments = c.n_segments;
    p.compactness = c.compactness;
    p.max_iterations = c.max_iterations;
    p.seed_sequence = c.seed_sequence;
    return p;
}

RemoteParams remote_params(const RunConfig& c) {
    RemoteParams r;
    r.endpoint = c.oracle;
    r.timeout = std::chrono::milliseconds(c.timeout_ms);
    r.attempts = c.attempts;
    r.max_in_flight = c.max_in_flight;
    return r;
}

/// Fails fast (exit 3) before anything is written.
std::shared_ptr<const RemoteOracle> connect_remote(const RunConfig& c) {
    auto oracle = std::make_shared<const RemoteOracle>(remote_params(c));
    const auto model = oracle->health();
    spdlog::info("oracle {} is healthy (model {})", c.oracle, model);
    return oracle;
}

std::shared_ptr<const Oracle> synthetic_oracle(const RunConfig& c, const std::optional<BinaryMask>& truth,
                                               const std::string& case_id) {
    if (!truth) {
        throw ValidationError("case '" + case_id + "' has no ground truth; the synthetic oracle reads its tumour region");
    }
    SyntheticParams p;
    p.target_region = *truth;
    p.gain = c.gain;
    p.offset = c.offset;
    p.sequence_weights = c.sequence_weights;
    return std::make_shared<const SyntheticOracle>(std::move(p));
}

const std::string& single_input(const RunConfig& c, const std::string& command) {
    if (c.inputs.size() != 1) {
        throw ValidationError(command + " takes exactly one bundle input, got " + std::to_string(c.inputs.size()));
    }
    return c.inputs.front();
}

Bundle load_bundle_checked(const std::string& path) {
    if (!fs::is_directory(path)) throw ValidationError("bundle directory not found: " + path);
    return load_bundle(path);
}

void write_config(const OutputDir& dir, const RunConfig& c, const std::string& command) {
    ojson j;
    j["command"] = command;
    j["config"] = to_json(c);
    write_text(dir / "config.json", j.dump(2) + "\n");
}

void write_png(const fs::path& path, const std::vector<std::uint8_t>& bytes) { write_bytes(path, bytes); }

// ---------------------------------------------------------------------------
// Commands

struct PrepareArgs {
    std::string t1w, t1wce, t2w, flair, seg;
    bool phantom = false;
    std::uint64_t phantom_seed = 1;
    std::string phantom_dims = "64,64,64";
};

int cmd_prepare(const RunConfig& c, const PrepareArgs& a, spdlog::sinks::dist_sink_mt& sinks, std::ostream& out) {
    MultiSequenceVolume raw;
    std::optional<BinaryMask> truth;
    std::string case_id;

    const bool nifti = !(a.t1w.empty() && a.t1wce.empty() && a.t2w.empty() && a.flair.empty());
    if (int(a.phantom) + int(nifti) + int(!c.inputs.empty()) != 1) {
        throw ValidationError("prepare needs exactly one source: --phantom, the four NIfTI flags, or a raw bundle");
    }
    if (a.phantom) {
        PhantomParams p;
        p.dims = parse_dims(a.phantom_dims, "--phantom-dims");
        // Default radii are for 64^3; keep the same proportions at other sizes.
        const std::array<std::size_t, 3> len = {p.dims.depth, p.dims.height, p.dims.width};
        for (std::size_t k = 0; k < 3; ++k) p.radii[k] *= double(len[k]) / 64.0;
        p.seed = a.phantom_seed;
        auto phantom = make_phantom(p);
        raw = std::move(phantom.volume);
        truth = std::move(phantom.ground_truth);
        case_id = phantom.id;
    } else if (nifti) {
        const std::array<std::pair<SequenceKind, const std::string*>, kSequenceCount> files = {
            {{SequenceKind::T1w, &a.t1w}, {SequenceKind::T1wCE, &a.t1wce}, {SequenceKind::T2w, &a.t2w},
             {SequenceKind::FLAIR, &a.flair}}};
        for (const auto& [kind, path] : files) {
            const auto name = std::string(to_string(kind));
            if (path->empty()) throw ValidationError("missing " + name + " input (--" + [&] {
                std::string flag = name;
                for (auto& ch : flag) ch = char(std::tolower(static_cast<unsigned char>(ch)));
                return flag;
            }() + ")");
            if (!fs::exists(*path)) throw ValidationError(name + " input not found: " + *path);
            try {
                raw.set(kind, load_nifti(*path, kind));
            } catch (const DimensionError& e) {
                throw ValidationError(name + " (" + *path + "): " + e.what());
            }
        }
        if (!a.seg.empty()) {
            if (!fs::exists(a.seg)) throw ValidationError("segmentation input not found: " + a.seg);
            const auto seg = load_nifti(a.seg, SequenceKind::T1w);
            if (seg.dims() != raw.dims()) throw ValidationError("segmentation " + a.seg + " dims differ from the sequences");
            BinaryMask m(seg.dims());
            for (std::size_t i = 0; i < seg.size(); ++i) m.set(i, seg[i] > 0.0f);
            truth = std::move(m);
        }
        case_id = fs::path(a.t1w).parent_path().filename().string();
    } else {
        auto bundle = load_bundle_checked(single_input(c, "prepare"));
        raw = std::move(bundle.volume);
        truth = std::move(bundle.ground_truth);
        case_id = bundle.case_id;
    }

    OutputDir dir(c.out, sinks);
    spdlog::info("prepare: case {} from {}", case_id, a.phantom ? "phantom" : nifti ? "NIfTI files" : c.inputs[0]);
    for (auto kind : raw.present()) {
        const auto& v = raw.get(kind);
        out << fmt::format("{:<6} min={:.6g} max={:.6g}\n", to_string(kind), v.min(), v.max());
    }
    const auto volume = preprocess(raw, c.crop, c.preprocess_order);
    if (truth && c.crop) truth = center_crop(*truth, *c.crop);
    save_bundle(dir.path(), volume, truth, case_id);
    write_config(dir, c, "prepare");
    out << fmt::format("bundle {} written to {} ({} sequences, dims {})\n", case_id, dir.path().string(),
                       volume.sequence_count(), to_string(volume.dims()));
    return kExitOk;
}

int cmd_slic(const RunConfig& c, spdlog::sinks::dist_sink_mt& sinks, std::ostream& out) {
    const auto bundle = load_bundle_checked(single_input(c, "slic"));
    const auto params = slic_params(c);
    OutputDir dir(c.out, sinks);
    spdlog::info("slic: {} on {} with n_segments={} compactness={}", c.inputs[0], to_string(c.seed_sequence),
                 params.n_segments, params.compactness);
    const auto labels = slic3d(bundle.volume.get(c.seed_sequence), params);
    save_labels(labels, params, dir.path());
    write_config(dir, c, "slic");
    out << fmt::format("K={} superpixels on {} written to {}\n", labels.count(), to_string(c.seed_sequence),
                       dir.path().string());
    return kExitOk;
}

int cmd_relmap(const RunConfig& c, const std::string& labels_dir, const std::string& montage,
               spdlog::sinks::dist_sink_mt& sinks, std::ostream& out) {
    std::optional<MontageSpec> montage_spec;
    if (!montage.empty()) montage_spec = parse_montage(montage);
    const auto bundle = load_bundle_checked(single_input(c, "relmap"));
    if (!bundle.volume.complete()) throw ValidationError("bundle " + c.inputs[0] + " lacks some of the four sequences");

    std::shared_ptr<const Oracle> oracle =
        c.remote() ? connect_remote(c) : synthetic_oracle(c, bundle.ground_truth, bundle.case_id);

    OutputDir dir(c.out, sinks);
    spdlog::info("relmap: {} with method {} and oracle {}", c.inputs[0], to_string(c.method), oracle->identity());
    std::optional<SlicParams> slic;
    std::shared_ptr<const SuperpixelLabelMap> labels;
    if (!labels_dir.empty()) {
        labels = std::make_shared<const SuperpixelLabelMap>(load_labels(labels_dir, &slic));
        if (labels->dims() != bundle.volume.dims()) {
            throw ValidationError("labels in " + labels_dir + " do not match the bundle dims");
        }
    } else {
        slic = slic_params(c);
        labels = std::make_shared<const SuperpixelLabelMap>(slic3d(bundle.volume.get(c.seed_sequence), *slic));
    }

    CountingOracle counter(*oracle);
    RelevanceOptions options;
    options.budget = c.budget;
    options.on_superpixel = [](std::size_t id, const PerturbationOutcome& o) {
        spdlog::debug("superpixel {}: p_perturbed={:.6f} delta={:.6f}", id, o.p_perturbed, o.delta);
    };
    auto relmap = compute_relevance(bundle.volume, labels, counter, c.method, options);
    relmap.slic = slic;
    save_relevance(relmap, dir.path());
    if (montage_spec) {
        if (montage_spec->slices.empty()) montage_spec->slices = default_slices(relmap.dims(), montage_spec->axis);
        write_png(dir / "montage.png", render_montage(bundle.volume.get(c.seed_sequence), &relmap, montage_spec->axis,
                                                      montage_spec->slices));
    }
    write_config(dir, c, "relmap");

    const auto ranking = rank_superpixels(relmap);
    const double max_delta = *std::max_element(relmap.raw_scores.begin(), relmap.raw_scores.end());
    out << fmt::format("K={} p_original={:.6f} top1={} max_delta={:.6f} oracle_calls={}{}\n", relmap.count(),
                       relmap.p_original, ranking.front(), max_delta, counter.calls(),
                       relmap.uninformative ? " uninformative" : "");
    return kExitOk;
}

int cmd_eval(const RunConfig& c, const std::vector<std::string>& relmaps, spdlog::sinks::dist_sink_mt& sinks,
             std::ostream& out) {
    if (c.inputs.empty()) throw ValidationError("eval needs at least one bundle");
    if (relmaps.size() != c.inputs.size()) {
        throw ValidationError(fmt::format("eval pairs bundles with relevance maps: got {} bundles and {} maps",
                                          c.inputs.size(), relmaps.size()));
    }
    std::vector<Bundle> bundles;
    std::vector<RelevanceMap> maps;
    for (std::size_t i = 0; i < c.inputs.size(); ++i) {
        bundles.push_back(load_bundle_checked(c.inputs[i]));
        if (!bundles.back().ground_truth) throw ValidationError("bundle " + c.inputs[i] + " has no ground truth");
        if (!fs::is_directory(relmaps[i])) throw ValidationError("relevance directory not found: " + relmaps[i]);
        maps.push_back(load_relevance(relmaps[i]));
        if (maps.back().dims() != bundles.back().volume.dims()) {
            throw ValidationError("relevance map " + relmaps[i] + " does not match bundle " + c.inputs[i]);
        }
    }

    std::vector<std::pair<std::string, const RelevanceMap*>> named;
    std::vector<const RelevanceMap*> ptrs;
    std::vector<const BinaryMask*> truths;
    std::size_t min_k = maps.front().count();
    for (std::size_t i = 0; i < maps.size(); ++i) {
        named.emplace_back(bundles[i].case_id, &maps[i]);
        ptrs.push_back(&maps[i]);
        truths.push_back(&*bundles[i].ground_truth);
        min_k = std::min(min_k, maps[i].count());
    }
    const std::size_t depth = std::min(c.max_rank, min_k);
    const auto dice = dice_report(named, truths);
    auto rank = rank_report(ptrs, truths, depth, depth);
    rank.method = std::string(to_string(maps.front().method));

    ojson params;
    params["method"] = to_string(maps.front().method);
    params["cases"] = maps.size();
    params["max_rank"] = depth;

    OutputDir dir(c.out, sinks);
    spdlog::info("eval: {} cases, mean optimal-threshold DSC {:.4f}", maps.size(), dice.mean_dsc);
    write_text(dir / "report.json", to_json(dice, params).dump(2) + "\n");
    write_text(dir / "rank_report.json", to_json(rank, params).dump(2) + "\n");
    write_config(dir, c, "eval");
    out << format_table(dice) << "\n" << format_table(std::vector<RankReport>{rank});
    return kExitOk;
}

int cmd_gridsearch(const RunConfig& c, spdlog::sinks::dist_sink_mt& sinks, std::ostream& out) {
    if (c.inputs.empty()) throw ValidationError("gridsearch needs at least one bundle");
    std::shared_ptr<const Oracle> remote;
    if (c.remote()) remote = connect_remote(c);

    std::vector<EvalCase> dataset;
    for (const auto& path : c.inputs) {
        auto bundle = load_bundle_checked(path);
        if (!bundle.ground_truth) throw ValidationError("bundle " + path + " has no ground truth");
        if (!bundle.volume.complete()) throw ValidationError("bundle " + path + " lacks some of the four sequences");
        dataset.push_back({bundle.case_id, std::move(bundle.volume), std::move(*bundle.ground_truth)});
    }

    OutputDir dir(c.out, sinks);
    spdlog::info("gridsearch: {} cases, {} sequences x {} methods x {} superpixel counts", dataset.size(),
                 c.grid_sequences.size(), c.grid_methods.size(), c.grid_n_segments.size());
    GridSpec spec;
    spec.sequences = c.grid_sequences;
    spec.n_segments = c.grid_n_segments;
    spec.methods = c.grid_methods;
    spec.slic = slic_params(c);
    spec.budget = c.budget;
    spec.case_workers = c.workers;
    const auto report = grid_search(dataset, spec, [&](const EvalCase& ec) {
        return remote ? remote : synthetic_oracle(c, ec.ground_truth, ec.id);
    });

    ojson params;
    params["cases"] = dataset.size();
    params["oracle"] = remote ? remote->identity() : std::string("synthetic");
    params["compactness"] = c.compactness;

    write_text(dir / "report.json", to_json(report, params).dump(2) + "\n");
    write_config(dir, c, "gridsearch");
    out << format_table(report);
    if (report.best) out << "best: " << format_best(report) << "\n";
    if (report.warnings) out << report.warnings << " case evaluations failed; see run.log\n";
    return kExitOk;
}

int cmd_montage(const RunConfig& c, const std::string& relmap_dir, bool ground_truth, const std::string& spec_text,
                spdlog::sinks::dist_sink_mt& sinks, std::ostream& out) {
    const auto bundle = load_bundle_checked(single_input(c, "montage"));
    auto spec = spec_text.empty() ? MontageSpec{} : parse_montage(spec_text);
    const auto& volume = bundle.volume.get(c.seed_sequence);
    if (spec.slices.empty()) spec.slices = default_slices(volume.dims(), spec.axis);

    std::optional<RelevanceMap> relmap;
    MontageOverlay overlay;
    if (!relmap_dir.empty() && ground_truth) throw ValidationError("montage takes --relmap or --ground-truth, not both");
    if (!relmap_dir.empty()) {
        relmap = load_relevance(relmap_dir);
        overlay = &*relmap;
    } else if (ground_truth) {
        if (!bundle.ground_truth) throw ValidationError("bundle has no ground truth to overlay");
        overlay = &*bundle.ground_truth;
    }
    const auto png = render_montage(volume, overlay, spec.axis, spec.slices);
    OutputDir dir(c.out, sinks);
    write_png(dir / "montage.png", png);
    write_config(dir, c, "montage");
    out << fmt::format("montage of {} slices written to {}\n", spec.slices.size(), (dir / "montage.png").string());
    return kExitOk;
}

/// Routes spdlog's default logger to `err` (and later run.log) for the duration of one run.
class LogScope {
public:
    explicit LogScope(std::ostream& err) : previous_(spdlog::default_logger()) {
        sinks_ = std::make_shared<spdlog::sinks::dist_sink_mt>();
        auto console = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
        console->set_level(spdlog::level::warn);
        console->set_pattern("relmap: %l: %v");
        sinks_->add_sink(console);
        auto logger = std::make_shared<spdlog::logger>("relmap", sinks_);
        logger->set_level(spdlog::level::debug);
        spdlog::set_default_logger(logger);
    }
    ~LogScope() { spdlog::set_default_logger(previous_); }
    LogScope(const LogScope&) = delete;
    LogScope& operator=(const LogScope&) = delete;

    spdlog::sinks::dist_sink_mt& sinks() { return *sinks_; }

private:
    std::shared_ptr<spdlog::logger> previous_;
    std::shared_ptr<spdlog::sinks::dist_sink_mt> sinks_;
};

}  // namespace

// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Perturbation-based relevance maps for volumetric classifiers", "relmap"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "relmap 0.1.0");

    std::string config_path, out_dir, oracle, seed_sequence, method, order, crop;
    std::size_t n_segments = 0, budget_grid = 0, budget_refine = 0;
    double compactness = 0.0;
    auto* o_config = app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    auto* o_out = app.add_option("--out", out_dir, "Output directory");
    auto* o_oracle = app.add_option("--oracle", oracle, "'synthetic' or scoring endpoint URL (default $RELMAP_ORACLE_URL)");
    auto* o_seed = app.add_option("--seed-sequence", seed_sequence, "Sequence SLIC runs on (T1w, T1wCE, T2w, FLAIR)");
    auto* o_n = app.add_option("--n-segments", n_segments, "Target superpixel count");
    auto* o_compact = app.add_option("--compactness", compactness, "SLIC compactness");
    auto* o_method = app.add_option("--method", method, "blank | min | max | optimal");
    auto* o_grid = app.add_option("--budget-grid", budget_grid, "Optimal search coarse grid size");
    auto* o_refine = app.add_option("--budget-refine", budget_refine, "Optimal search refinement rounds");
    auto* o_order = app.add_option("--order", order, "crop-then-normalize | normalize-then-crop");
    auto* o_crop = app.add_option("--crop", crop, "Centre-crop target D,H,W");

    std::vector<std::string> inputs;
    auto add_inputs = [&](CLI::App* sub, const std::string& what) { sub->add_option("inputs", inputs, what); };

    PrepareArgs prep;
    auto* prepare = app.add_subcommand("prepare", "Normalize and crop raw inputs into a volume bundle");
    add_inputs(prepare, "Raw bundle directory");
    prepare->add_option("--t1w", prep.t1w, "T1w NIfTI file");
    prepare->add_option("--t1wce", prep.t1wce, "T1wCE NIfTI file");
    prepare->add_option("--t2w", prep.t2w, "T2w NIfTI file");
    prepare->add_option("--flair", prep.flair, "FLAIR NIfTI file");
    prepare->add_option("--seg", prep.seg, "Segmentation NIfTI file (nonzero = tumour)");
    prepare->add_flag("--phantom", prep.phantom, "Generate a synthetic phantom case");
    prepare->add_option("--phantom-seed", prep.phantom_seed, "Phantom RNG seed");
    prepare->add_option("--phantom-dims", prep.phantom_dims, "Phantom dims D,H,W");

    auto* slic = app.add_subcommand("slic", "Compute the superpixel label map of a bundle");
    add_inputs(slic, "Bundle directory");

    std::string labels_dir, montage_spec;
    auto* relmap = app.add_subcommand("relmap", "Compute a relevance map");
    add_inputs(relmap, "Bundle directory");
    relmap->add_option("--labels", labels_dir, "Label map directory from `slic` (computed when absent)");
    relmap->add_option("--montage", montage_spec, "Also render a montage, e.g. \"axis=z slices=40,64,88\"");

    std::vector<std::string> relmap_dirs;
    std::size_t max_rank = 0;
    auto* eval = app.add_subcommand("eval", "Dice, ranked and cumulative reports for relevance maps");
    add_inputs(eval, "Bundle directories with ground truth");
    auto* o_rank = eval->add_option("--relmap", relmap_dirs, "Relevance map directories, paired with the bundles")->required();
    auto* o_max_rank = eval->add_option("--max-rank", max_rank, "Ranks / prefixes to report");
    (void)o_rank;

    std::string grid_sequences, grid_n, grid_methods;
    std::size_t workers = 0;
    auto* grid = app.add_subcommand("gridsearch", "Sequence x n_segments x method grid search");
    add_inputs(grid, "Bundle directories with ground truth");
    auto* o_gs = grid->add_option("--sequences", grid_sequences, "Comma-separated sequences");
    auto* o_gn = grid->add_option("--grid-n-segments", grid_n, "Comma-separated superpixel counts");
    auto* o_gm = grid->add_option("--methods", grid_methods, "Comma-separated methods");
    auto* o_workers = grid->add_option("--workers", workers, "Concurrent cases per cell (0 = hardware)");

    std::string montage_relmap;
    bool montage_gt = false;
    std::string montage_text;
    auto* montage = app.add_subcommand("montage", "Render a PNG slice montage of a bundle");
    add_inputs(montage, "Bundle directory");
    montage->add_option("--relmap", montage_relmap, "Relevance map directory to overlay");
    montage->add_flag("--ground-truth", montage_gt, "Overlay the bundle's ground truth");
    montage->add_option("--montage", montage_text, "Layout, e.g. \"axis=z slices=40,64,88\"");

    std::vector<const char*> argv;
    argv.push_back("relmap");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, er;
        const int code = app.exit(e, o, er);
        out << o.str();
        err << er.str();
        return code == 0 ? kExitOk : kExitValidation;
    }

    LogScope logs(err);
    try {
        RunConfig c;
        if (const char* env = std::getenv("RELMAP_ORACLE_URL"); env && *env) c.oracle = env;
        if (o_config->count()) {
            std::ifstream in(config_path);
            json j;
            try {
                j = json::parse(in);
            } catch (const json::exception& e) {
                throw ValidationError("config " + config_path + ": " + e.what());
            }
            apply_json(c, j);
        }
        if (!inputs.empty()) c.inputs = inputs;
        if (o_out->count()) c.out = out_dir;
        if (o_oracle->count()) c.oracle = oracle;
        if (o_seed->count()) c.seed_sequence = sequence_from_string(seed_sequence);
        if (o_n->count()) c.n_segments = n_segments;
        if (o_compact->count()) c.compactness = compactness;
        if (o_method->count()) c.method = method_family_from_string(method);
        if (o_grid->count()) c.budget.coarse_grid_size = budget_grid;
        if (o_refine->count()) c.budget.refinement_iterations = budget_refine;
        if (o_order->count()) c.preprocess_order = preprocess_order_from_string(order);
        if (o_crop->count()) c.crop = parse_dims(crop, "--crop");
        if (o_max_rank->count()) c.max_rank = max_rank;
        if (o_gs->count()) c.grid_sequences = parse_sequences(grid_sequences);
        if (o_gn->count()) c.grid_n_segments = parse_counts(grid_n, "--grid-n-segments");
        if (o_gm->count()) c.grid_methods = parse_methods(grid_methods);
        if (o_workers->count()) c.workers = workers;
        c.validate();
        if (c.out.empty()) throw ValidationError("--out is required");

        if (prepare->parsed()) return cmd_prepare(c, prep, logs.sinks(), out);
        if (slic->parsed()) return cmd_slic(c, logs.sinks(), out);
        if (relmap->parsed()) return cmd_relmap(c, labels_dir, montage_spec, logs.sinks(), out);
        if (eval->parsed()) return cmd_eval(c, relmap_dirs, logs.sinks(), out);
        if (grid->parsed()) return cmd_gridsearch(c, logs.sinks(), out);
        if (montage->parsed()) return cmd_montage(c, montage_relmap, montage_gt, montage_text, logs.sinks(), out);
        throw ValidationError("no command given");
    } catch (const std::exception& e) {
        const int code = exit_code(std::current_exception());
        spdlog::error("{}", e.what());
        return code;
    }
}

}  // namespace relmap::cli
