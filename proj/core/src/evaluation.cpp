#include "relmap/evaluation.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "parallel.hpp"
#include "relmap/errors.hpp"

namespace relmap {

namespace {

double dice_from_counts(std::size_t intersection, std::size_t predicted, std::size_t truth) {
    return 2.0 * double(intersection) / double(predicted + truth);
}

void check_ground_truth(const Dims& dims, const BinaryMask& ground_truth, std::size_t truth_count) {
    if (ground_truth.dims() != dims) {
        throw DimensionError("ground truth " + to_string(ground_truth.dims()) + " vs " + to_string(dims));
    }
    if (truth_count == 0) throw ValidationError("ground truth mask is empty");
}

// Per superpixel: (voxel count, voxels inside the ground truth).
std::vector<std::pair<std::size_t, std::size_t>> overlap_counts(const RelevanceMap& relmap, const BinaryMask& gt) {
    std::vector<std::pair<std::size_t, std::size_t>> out(relmap.count(), {0, 0});
    const auto& labels = *relmap.labels;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        auto& [size, inside] = out[labels[i]];
        ++size;
        if (gt[i]) ++inside;
    }
    return out;
}

}  // namespace

double dice(const BinaryMask& a, const BinaryMask& b) {
    if (a.dims() != b.dims()) throw DimensionError("dice of " + to_string(a.dims()) + " and " + to_string(b.dims()));
    std::size_t na = 0;
    std::size_t nb = 0;
    std::size_t both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i];
        nb += b[i];
        both += a[i] && b[i];
    }
    if (nb == 0) throw ValidationError("ground truth mask is empty");
    return dice_from_counts(both, na, nb);
}

ThresholdResult optimal_threshold_dsc(const RelevanceMap& relmap, const BinaryMask& ground_truth) {
    const std::size_t truth = ground_truth.count();
    check_ground_truth(relmap.dims(), ground_truth, truth);

    // Histograms of scores, then suffix sums give counts of voxels with score >= t.
    std::array<std::size_t, 102> at_least{};
    std::array<std::size_t, 102> hits{};
    for (std::size_t i = 0; i < relmap.voxel_map.size(); ++i) {
        ++at_least[relmap.voxel_map[i]];
        if (ground_truth[i]) ++hits[relmap.voxel_map[i]];
    }
    for (int t = 99; t >= 0; --t) {
        at_least[std::size_t(t)] += at_least[std::size_t(t) + 1];
        hits[std::size_t(t)] += hits[std::size_t(t) + 1];
    }

    ThresholdResult result;
    result.curve.resize(kMaxThreshold - kMinThreshold + 1);
    for (int t = kMinThreshold; t <= kMaxThreshold; ++t) {
        const double d = dice_from_counts(hits[std::size_t(t)], at_least[std::size_t(t)], truth);
        result.curve[std::size_t(t - kMinThreshold)] = d;
        if (t == kMinThreshold || d > result.dsc) {
            result.dsc = d;
            result.best_threshold = t;
        }
    }
    return result;
}

std::vector<double> ranked_dsc(const RelevanceMap& relmap, const BinaryMask& ground_truth, std::size_t max_rank) {
    if (max_rank > relmap.count()) {
        throw ValidationError("max rank " + std::to_string(max_rank) + " exceeds superpixel count " +
                              std::to_string(relmap.count()));
    }
    const std::size_t truth = ground_truth.count();
    check_ground_truth(relmap.dims(), ground_truth, truth);
    const auto counts = overlap_counts(relmap, ground_truth);
    const auto ranking = rank_superpixels(relmap);
    std::vector<double> out;
    for (std::size_t r = 0; r < max_rank; ++r) {
        const auto& [size, inside] = counts[ranking[r]];
        out.push_back(dice_from_counts(inside, size, truth));
    }
    return out;
}

std::vector<double> cumulative_dsc(const RelevanceMap& relmap, const BinaryMask& ground_truth, std::size_t max_k) {
    if (max_k > relmap.count()) {
        throw ValidationError("max k " + std::to_string(max_k) + " exceeds superpixel count " +
                              std::to_string(relmap.count()));
    }
    const std::size_t truth = ground_truth.count();
    check_ground_truth(relmap.dims(), ground_truth, truth);
    const auto counts = overlap_counts(relmap, ground_truth);
    const auto ranking = rank_superpixels(relmap);
    std::vector<double> out;
    std::size_t size = 0;
    std::size_t inside = 0;
    for (std::size_t k = 0; k < max_k; ++k) {
        size += counts[ranking[k]].first;
        inside += counts[ranking[k]].second;
        out.push_back(dice_from_counts(inside, size, truth));
    }
    return out;
}

// ---------------------------------------------------------------------------

DiceReport dice_report(const std::vector<std::pair<std::string, const RelevanceMap*>>& maps,
                       const std::vector<const BinaryMask*>& ground_truths) {
    if (maps.size() != ground_truths.size()) throw ValidationError("one ground truth per relevance map required");
    DiceReport report;
    double total = 0.0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        report.cases.push_back({maps[i].first, optimal_threshold_dsc(*maps[i].second, *ground_truths[i])});
        total += report.cases.back().result.dsc;
    }
    report.mean_dsc = maps.empty() ? 0.0 : total / double(maps.size());
    return report;
}

RankReport rank_report(const std::vector<const RelevanceMap*>& maps, const std::vector<const BinaryMask*>& ground_truths,
                       std::size_t max_rank, std::size_t max_k) {
    if (maps.size() != ground_truths.size()) throw ValidationError("one ground truth per relevance map required");
    RankReport report;
    report.cases = maps.size();
    report.ranked.assign(max_rank, 0.0);
    report.cumulative.assign(max_k, 0.0);
    if (!maps.empty()) report.method = std::string(to_string(maps.front()->method));
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const auto ranked = ranked_dsc(*maps[i], *ground_truths[i], max_rank);
        const auto cumulative = cumulative_dsc(*maps[i], *ground_truths[i], max_k);
        for (std::size_t r = 0; r < max_rank; ++r) report.ranked[r] += ranked[r];
        for (std::size_t k = 0; k < max_k; ++k) report.cumulative[k] += cumulative[k];
    }
    if (!maps.empty()) {
        for (auto& v : report.ranked) v /= double(maps.size());
        for (auto& v : report.cumulative) v /= double(maps.size());
    }
    return report;
}

const GridCell& GridSearchReport::at(SequenceKind sequence, MethodFamily method, std::size_t n_segments) const {
    for (const auto& c : cells) {
        if (c.sequence == sequence && c.method == method && c.n_segments == n_segments) return c;
    }
    throw ValidationError("grid cell not in report");
}

GridSearchReport grid_search(const std::vector<EvalCase>& dataset, const GridSpec& spec, const OracleFactory& oracles) {
    if (spec.sequences.empty() || spec.n_segments.empty() || spec.methods.empty()) {
        throw ValidationError("grid search needs at least one sequence, n_segments and method");
    }
    if (dataset.empty()) throw ValidationError("grid search on an empty dataset");
    for (const auto& c : dataset) {
        if (c.ground_truth.dims() != c.volume.dims() || c.ground_truth.empty_region()) {
            throw ValidationError("case '" + c.id + "' lacks a usable ground truth");
        }
    }

    GridSearchReport report;
    report.spec = spec;
    const std::size_t n_methods = spec.methods.size();
    const std::size_t n_sizes = spec.n_segments.size();
    for (auto seq : spec.sequences) {
        for (auto method : spec.methods) {
            for (auto n : spec.n_segments) report.cells.push_back({seq, n, method, std::nullopt, 0, 0});
        }
    }

    std::vector<std::shared_ptr<const Oracle>> bound(dataset.size());
    std::vector<std::string> bind_errors(dataset.size());
    for (std::size_t c = 0; c < dataset.size(); ++c) {
        try {
            bound[c] = oracles(dataset[c]);
        } catch (const std::exception& e) {
            bind_errors[c] = e.what();
        }
    }

    for (std::size_t si = 0; si < spec.sequences.size(); ++si) {
        for (std::size_t ni = 0; ni < n_sizes; ++ni) {
            SlicParams params = spec.slic;
            params.seed_sequence = spec.sequences[si];
            params.n_segments = spec.n_segments[ni];

            std::vector<std::shared_ptr<const SuperpixelLabelMap>> labels(dataset.size());
            std::vector<std::string> errors = bind_errors;
            detail::parallel_for(dataset.size(), spec.case_workers, [&](std::size_t c) {
                if (!errors[c].empty()) return;
                try {
                    labels[c] = std::make_shared<const SuperpixelLabelMap>(
                        slic3d(dataset[c].volume.get(params.seed_sequence), params));
                } catch (const std::exception& e) {
                    errors[c] = e.what();
                }
            });

            for (std::size_t mi = 0; mi < n_methods; ++mi) {
                std::vector<std::optional<double>> dsc(dataset.size());
                std::vector<std::string> case_errors = errors;
                RelevanceOptions options;
                options.budget = spec.budget;
                detail::parallel_for(dataset.size(), spec.case_workers, [&](std::size_t c) {
                    if (!case_errors[c].empty()) return;
                    try {
                        auto map = compute_relevance(dataset[c].volume, labels[c], *bound[c], spec.methods[mi], options);
                        dsc[c] = optimal_threshold_dsc(map, dataset[c].ground_truth).dsc;
                    } catch (const std::exception& e) {
                        case_errors[c] = e.what();
                    }
                });

                auto& cell = report.cells[(si * n_methods + mi) * n_sizes + ni];
                double total = 0.0;
                for (std::size_t c = 0; c < dataset.size(); ++c) {
                    if (dsc[c]) {
                        total += *dsc[c];
                        ++cell.successes;
                    } else {
                        ++cell.failures;
                        ++report.warnings;
                        spdlog::warn("grid cell {}/{}/{}: case '{}' failed: {}", to_string(cell.sequence),
                                     cell.n_segments, to_string(cell.method), dataset[c].id, case_errors[c]);
                    }
                }
                if (cell.successes > 0) cell.mean_dsc = total / double(cell.successes);
            }
        }
    }

    for (std::size_t i = 0; i < report.cells.size(); ++i) {
        const auto& cell = report.cells[i];
        if (!cell.mean_dsc) continue;
        if (!report.best || *cell.mean_dsc > *report.cells[*report.best].mean_dsc) report.best = i;
    }
    return report;
}

// ---------------------------------------------------------------------------

using ojson = nlohmann::ordered_json;

ojson to_json(const DiceReport& report, const ojson& params) {
    ojson rows = ojson::array();
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < report.cases.size(); ++i) {
        const auto& c = report.cases[i];
        rows.push_back({{"case", c.case_id},
                        {"best_threshold", c.result.best_threshold},
                        {"dsc", c.result.dsc},
                        {"curve", c.result.curve}});
        if (!best || c.result.dsc > report.cases[*best].result.dsc) best = i;
    }
    ojson out = {{"kind", "dice"}, {"params", params}, {"rows", rows}, {"best", nullptr}};
    if (best) {
        const auto& c = report.cases[*best];
        out["best"] = {{"case", c.case_id}, {"best_threshold", c.result.best_threshold}, {"dsc", c.result.dsc}};
    }
    out["summary"] = {{"cases", report.cases.size()}, {"mean_dsc", report.mean_dsc}};
    return out;
}

ojson to_json(const RankReport& report, const ojson& params) {
    ojson rows = ojson::array();
    const std::size_t n = std::max(report.ranked.size(), report.cumulative.size());
    std::optional<std::size_t> best_k;
    for (std::size_t i = 0; i < n; ++i) {
        ojson row = {{"rank", i + 1}};
        row["ranked_dsc"] = i < report.ranked.size() ? ojson(report.ranked[i]) : ojson(nullptr);
        row["cumulative_dsc"] = i < report.cumulative.size() ? ojson(report.cumulative[i]) : ojson(nullptr);
        rows.push_back(row);
        if (i < report.cumulative.size() && (!best_k || report.cumulative[i] > report.cumulative[*best_k])) best_k = i;
    }
    ojson out = {{"kind", "rank"}, {"params", params}, {"rows", rows}, {"best", nullptr}};
    if (best_k) out["best"] = {{"cumulative_k", *best_k + 1}, {"dsc", report.cumulative[*best_k]}};
    out["summary"] = {{"method", report.method}, {"cases", report.cases}};
    return out;
}

ojson to_json(const GridSearchReport& report, const ojson& params) {
    ojson rows = ojson::array();
    for (const auto& c : report.cells) {
        rows.push_back({{"sequence", to_string(c.sequence)},
                        {"method", to_string(c.method)},
                        {"n_segments", c.n_segments},
                        {"mean_dsc", c.mean_dsc ? ojson(*c.mean_dsc) : ojson(nullptr)},
                        {"successes", c.successes},
                        {"failures", c.failures}});
    }
    ojson out = {{"kind", "grid"}, {"params", params}, {"rows", rows}, {"best", nullptr}};
    if (report.best) {
        const auto& c = report.cells[*report.best];
        out["best"] = {{"sequence", to_string(c.sequence)},
                       {"method", to_string(c.method)},
                       {"n_segments", c.n_segments},
                       {"mean_dsc", *c.mean_dsc}};
    }
    out["summary"] = {{"warnings", report.warnings}};
    return out;
}

std::string format_table(const DiceReport& report) {
    std::string out = fmt::format("{:<24} {:>9} {:>8}\n", "Case", "Threshold", "DSC");
    for (const auto& c : report.cases) {
        out += fmt::format("{:<24} {:>9} {:>8.4f}\n", c.case_id, c.result.best_threshold, c.result.dsc);
    }
    out += fmt::format("{:<24} {:>9} {:>8.4f}\n", "Average", "", report.mean_dsc);
    return out;
}

std::string format_table(const std::vector<RankReport>& reports) {
    auto header = [&](const std::string& title) {
        std::string line = fmt::format("{:<8}", title);
        for (const auto& r : reports) line += fmt::format(" {:>14}", "Avg. DSC " + r.method);
        return line + "\n";
    };
    std::string out = "Ranked superpixels\n" + header("Rank");
    std::size_t rows = 0;
    for (const auto& r : reports) rows = std::max(rows, r.ranked.size());
    for (std::size_t i = 0; i < rows; ++i) {
        out += fmt::format("{:<8}", i + 1);
        for (const auto& r : reports) {
            out += i < r.ranked.size() ? fmt::format(" {:>14.2f}", r.ranked[i]) : fmt::format(" {:>14}", "-");
        }
        out += "\n";
    }
    out += "\nCumulative top-ranked superpixels\n" + header("Rank");
    rows = 0;
    for (const auto& r : reports) rows = std::max(rows, r.cumulative.size());
    for (std::size_t i = 0; i < rows; ++i) {
        out += fmt::format("{:<8}", i == 0 ? std::string("1") : i == 1 ? std::string("1+2") : fmt::format("1+..+{}", i + 1));
        for (const auto& r : reports) {
            out += i < r.cumulative.size() ? fmt::format(" {:>14.2f}", r.cumulative[i]) : fmt::format(" {:>14}", "-");
        }
        out += "\n";
    }
    return out;
}

std::string format_table(const GridSearchReport& report) {
    const auto& spec = report.spec;
    constexpr int kCol = 7;
    const int group = kCol * int(spec.n_segments.size());
    std::string out = fmt::format("{:<7}", "");
    for (auto m : spec.methods) {
        std::string name(to_string(m));
        name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
        out += fmt::format("|{:^{}}", name, group);
    }
    out += "\n" + fmt::format("{:<7}", "");
    for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
        out += "|";
        for (auto n : spec.n_segments) out += fmt::format("{:>{}}", n, kCol);
    }
    out += "\n";
    std::size_t i = 0;
    for (auto seq : spec.sequences) {
        out += fmt::format("{:<7}", to_string(seq));
        for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
            out += "|";
            for (std::size_t ni = 0; ni < spec.n_segments.size(); ++ni, ++i) {
                const auto& cell = report.cells[i];
                std::string value = cell.mean_dsc ? fmt::format("{:.2f}", *cell.mean_dsc) : "-";
                if (report.best && *report.best == i) value = "*" + value;
                out += fmt::format("{:>{}}", value, kCol);
            }
        }
        out += "\n";
    }
    return out;
}

std::string format_best(const GridSearchReport& report) {
    if (!report.best) return "no successful cell";
    const auto& c = report.cells[*report.best];
    return fmt::format("{}/{}/{} → {:.4f}", to_string(c.sequence), c.n_segments, to_string(c.method), *c.mean_dsc);
}

}  // namespace relmap
