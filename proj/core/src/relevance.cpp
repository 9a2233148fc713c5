#include "relmap/relevance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relmap/errors.hpp"
#include "scratch.hpp"

namespace relmap {

std::string_view to_string(MethodFamily family) noexcept {
    switch (family) {
        case MethodFamily::Blank: return "blank";
        case MethodFamily::Min: return "min";
        case MethodFamily::Max: return "max";
        case MethodFamily::Optimal: return "optimal";
    }
    return "unknown";
}

MethodFamily method_family_from_string(std::string_view name) {
    if (name == "blank") return MethodFamily::Blank;
    if (name == "min") return MethodFamily::Min;
    if (name == "max") return MethodFamily::Max;
    if (name == "optimal") return MethodFamily::Optimal;
    throw ValidationError("unknown perturbation method '" + std::string(name) +
                          "' (expected blank, min, max or optimal)");
}

void RelevanceMap::validate() const {
    if (!labels) throw InvariantError("relevance map without a label map");
    if (raw_scores.size() != labels->count() || normalized_scores.size() != labels->count()) {
        throw InvariantError("relevance score count differs from superpixel count");
    }
    if (voxel_map.size() != labels->dims().voxels()) throw InvariantError("voxel map size mismatch");
    for (std::size_t i = 0; i < voxel_map.size(); ++i) {
        if (voxel_map[i] != normalized_scores[(*labels)[i]]) {
            throw InvariantError("voxel map is not superpixel-constant at voxel " + std::to_string(i));
        }
    }
}

bool operator==(const RelevanceMap& a, const RelevanceMap& b) {
    const bool same_labels = (a.labels == b.labels) || (a.labels && b.labels && *a.labels == *b.labels);
    return same_labels && a.raw_scores == b.raw_scores && a.normalized_scores == b.normalized_scores &&
           a.voxel_map == b.voxel_map && a.method == b.method && a.p_original == b.p_original &&
           a.uninformative == b.uninformative && a.slic == b.slic && a.oracle_identity == b.oracle_identity &&
           a.epsilon == b.epsilon && a.optimal_fills == b.optimal_fills;
}

std::vector<std::uint8_t> normalize_scores(std::span<const double> raw) {
    std::vector<std::uint8_t> out(raw.size(), 0);
    if (raw.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (hi == lo) return out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double scaled = 100.0 * (raw[i] - lo) / (hi - lo);
        out[i] = static_cast<std::uint8_t>(std::clamp(std::floor(scaled + 0.5), 0.0, 100.0));
    }
    return out;
}

namespace {

std::vector<std::size_t> processing_order(const RelevanceOptions& options, std::size_t count) {
    if (options.order.empty()) {
        std::vector<std::size_t> order(count);
        std::iota(order.begin(), order.end(), 0);
        return order;
    }
    auto sorted = options.order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] != i || sorted.size() != count) {
            throw ValidationError("relevance processing order is not a permutation of superpixel ids");
        }
    }
    return options.order;
}

OracleError with_superpixel(const OracleError& e, std::size_t id) {
    return OracleError(e.kind(), "superpixel " + std::to_string(id) + ": " + e.what(), e.http_status());
}

}  // namespace

RelevanceMap compute_relevance(const MultiSequenceVolume& volume,
                               std::shared_ptr<const SuperpixelLabelMap> labels, const Oracle& oracle,
                               MethodFamily family, const RelevanceOptions& options) {
    if (!labels) throw ValidationError("compute_relevance without a label map");
    if (labels->dims() != volume.dims()) {
        throw DimensionError("label map " + to_string(labels->dims()) + " vs volume " + to_string(volume.dims()));
    }
    if (!volume.complete()) throw ValidationError("compute_relevance requires all four sequences");

    const std::size_t count = labels->count();
    const auto order = processing_order(options, count);
    const auto members = labels->members();

    RelevanceMap map;
    map.method = family;
    map.oracle_identity = oracle.identity();
    map.p_original = oracle.score(volume).probability();
    map.raw_scores.assign(count, 0.0);

    auto report = [&](std::size_t id, const PerturbationOutcome& outcome) {
        map.raw_scores[id] = outcome.delta;
        if (options.on_superpixel) options.on_superpixel(id, outcome);
    };

    if (family == MethodFamily::Optimal) {
        map.optimal_fills.assign(count, FillVector{});
        for (auto id : order) {
            try {
                auto result = optimal_fill_search(volume, members[id], oracle, options.budget, map.p_original);
                map.optimal_fills[id] = result.method.fill;
                report(id, result.outcome);
            } catch (const OracleError& e) {
                throw with_superpixel(e, id);
            }
        }
    } else {
        const PerturbationMethod method = family == MethodFamily::Blank ? PerturbationMethod::blank()
                                          : family == MethodFamily::Min ? PerturbationMethod::min()
                                                                        : PerturbationMethod::max();
        const auto fill = resolve_fill(volume, method);
        detail::ScratchPool pool(volume, std::max<std::size_t>(1, oracle.max_in_flight()));
        for (std::size_t start = 0; start < order.size(); start += pool.size()) {
            const std::size_t n = std::min(pool.size(), order.size() - start);
            for (std::size_t k = 0; k < n; ++k) pool.fill(k, members[order[start + k]], fill);
            auto results = oracle.score_batch(pool.first(n));
            for (std::size_t k = 0; k < n; ++k) pool.restore(k, members[order[start + k]]);
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t id = order[start + k];
                if (const auto* error = std::get_if<OracleError>(&results[k])) throw with_superpixel(*error, id);
                report(id, make_outcome(method, map.p_original, std::get<ClassifierScore>(results[k]).probability()));
            }
        }
    }

    map.normalized_scores = normalize_scores(map.raw_scores);
    const auto [lo, hi] = std::minmax_element(map.raw_scores.begin(), map.raw_scores.end());
    map.uninformative = *lo == *hi;
    map.voxel_map.resize(labels->dims().voxels());
    for (std::size_t i = 0; i < map.voxel_map.size(); ++i) map.voxel_map[i] = map.normalized_scores[(*labels)[i]];
    map.labels = std::move(labels);
    return map;
}

std::vector<std::size_t> rank_superpixels(const RelevanceMap& relmap) {
    std::vector<std::size_t> ids(relmap.count());
    std::iota(ids.begin(), ids.end(), 0);
    std::stable_sort(ids.begin(), ids.end(),
                     [&](std::size_t a, std::size_t b) { return relmap.raw_scores[a] > relmap.raw_scores[b]; });
    return ids;
}

BinaryMask threshold_mask(const RelevanceMap& relmap, int threshold) {
    if (threshold < 0 || threshold > 100) {
        throw ValidationError("threshold " + std::to_string(threshold) + " outside [0, 100]");
    }
    BinaryMask mask(relmap.dims());
    for (std::size_t i = 0; i < relmap.voxel_map.size(); ++i) {
        if (relmap.voxel_map[i] >= threshold) mask.set(i, true);
    }
    return mask;
}

}  // namespace relmap
