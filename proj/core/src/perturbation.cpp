#include "relmap/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "relmap/errors.hpp"
#include "scratch.hpp"

namespace relmap {

PerturbationMethod PerturbationMethod::optimal_fill(const FillVector& fill) {
    for (double v : fill) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw ValidationError("optimal fill values must be finite and in [0, 1]");
        }
    }
    return {Kind::OptimalFill, fill};
}

std::string_view to_string(PerturbationMethod::Kind kind) noexcept {
    switch (kind) {
        case PerturbationMethod::Kind::Blank: return "blank";
        case PerturbationMethod::Kind::Min: return "min";
        case PerturbationMethod::Kind::Max: return "max";
        case PerturbationMethod::Kind::OptimalFill: return "optimal";
    }
    return "unknown";
}

FillVector resolve_fill(const MultiSequenceVolume& volume, const PerturbationMethod& method) {
    FillVector out{};
    for (auto kind : volume.present()) {
        const auto s = static_cast<std::size_t>(kind);
        switch (method.kind) {
            case PerturbationMethod::Kind::Blank: out[s] = 0.0; break;
            case PerturbationMethod::Kind::Min: out[s] = volume.get(kind).min(); break;
            case PerturbationMethod::Kind::Max: out[s] = volume.get(kind).max(); break;
            case PerturbationMethod::Kind::OptimalFill: out[s] = method.fill[s]; break;
        }
    }
    return out;
}

double perturbation_loss(double p_original, double p_perturbed) {
    return 1.0 / std::max(std::abs(p_original - p_perturbed), kLossEpsilon);
}

double perturbation_loss(std::span<const std::pair<double, double>> pairs) {
    double total = 0.0;
    for (const auto& [p, q] : pairs) total += perturbation_loss(p, q);
    return total;
}

PerturbationOutcome make_outcome(const PerturbationMethod& method, double p_original, double p_perturbed) {
    return {method, p_original, p_perturbed, std::abs(p_original - p_perturbed),
            perturbation_loss(p_original, p_perturbed)};
}

MultiSequenceVolume apply_perturbation(const MultiSequenceVolume& volume, const BinaryMask& region,
                                       const PerturbationMethod& method) {
    if (region.dims() != volume.dims()) {
        throw DimensionError("region " + to_string(region.dims()) + " vs volume " + to_string(volume.dims()));
    }
    const auto fill = resolve_fill(volume, method);
    MultiSequenceVolume out = volume;
    for (auto kind : out.present()) {
        const auto value = static_cast<float>(fill[static_cast<std::size_t>(kind)]);
        auto data = out.get(kind).data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (region[i]) data[i] = value;
        }
    }
    return out;
}

void SearchBudget::validate() const {
    if (coarse_grid_size < 1) throw ValidationError("coarse_grid_size must be >= 1");
    if (refinement_iterations < 1) throw ValidationError("refinement_iterations must be >= 1");
}

namespace {

struct Candidate {
    FillVector fill;
    double probability;
    double delta;
};

// (|Δ| desc, fill asc)
bool better(const Candidate& a, const Candidate& b) {
    if (a.delta != b.delta) return a.delta > b.delta;
    return a.fill < b.fill;
}

class FillSearch {
public:
    FillSearch(const MultiSequenceVolume& volume, std::span<const std::size_t> region, const Oracle& oracle,
               double p_original, const SearchTrace& trace)
        : region_(region),
          oracle_(oracle),
          pool_(volume, std::max<std::size_t>(1, oracle.max_in_flight())),
          p_original_(p_original),
          trace_(trace) {}

    // Scores candidates not seen before; returns all of them in input order.
    std::vector<Candidate> evaluate(const std::vector<FillVector>& fills) {
        std::vector<FillVector> fresh;
        for (const auto& f : fills) {
            if (!cache_.contains(f) && std::find(fresh.begin(), fresh.end(), f) == fresh.end()) {
                fresh.push_back(f);
            }
        }
        for (std::size_t start = 0; start < fresh.size(); start += pool_.size()) {
            const std::size_t n = std::min(pool_.size(), fresh.size() - start);
            for (std::size_t k = 0; k < n; ++k) pool_.fill(k, region_, fresh[start + k]);
            auto results = oracle_.score_batch(pool_.first(n));
            for (std::size_t k = 0; k < n; ++k) pool_.restore(k, region_);
            calls_ += n;
            for (std::size_t k = 0; k < n; ++k) {
                const double p = value_or_throw(results[k]).probability();
                const double delta = std::abs(p_original_ - p);
                cache_.emplace(fresh[start + k], p);
                if (trace_) trace_({fresh[start + k], p, delta});
            }
        }
        std::vector<Candidate> out;
        out.reserve(fills.size());
        for (const auto& f : fills) {
            const double p = cache_.at(f);
            out.push_back({f, p, std::abs(p_original_ - p)});
        }
        return out;
    }

    void offer(const std::vector<Candidate>& candidates) {
        for (const auto& c : candidates) {
            if (!best_ || better(c, *best_)) best_ = c;
        }
    }

    const Candidate& best() const { return *best_; }
    std::size_t calls() const noexcept { return calls_; }

private:
    std::span<const std::size_t> region_;
    const Oracle& oracle_;
    detail::ScratchPool pool_;
    double p_original_;
    const SearchTrace& trace_;
    std::map<FillVector, double> cache_;
    std::optional<Candidate> best_;
    std::size_t calls_ = 0;
};

}  // namespace

FillSearchResult optimal_fill_search(const MultiSequenceVolume& volume, std::span<const std::size_t> region,
                                     const Oracle& oracle, const SearchBudget& budget,
                                     std::optional<double> p_original, const SearchTrace& trace) {
    budget.validate();
    if (!volume.complete()) throw ValidationError("optimal fill search requires all four sequences");
    if (region.empty()) throw ValidationError("optimal fill search on an empty region");
    for (auto kind : kAllSequences) {
        const auto& seq = volume.get(kind);
        if (seq.min() < 0.0f || seq.max() > 1.0f) {
            throw ValidationError("optimal fill search requires [0, 1]-normalized sequences; " +
                                  std::string(to_string(kind)) + " is not");
        }
    }
    const double p0 = p_original ? *p_original : oracle.score(volume).probability();

    FillSearch search(volume, region, oracle, p0, trace);
    const std::size_t grid = budget.coarse_grid_size;

    if (budget.include_baseline_seeds) {
        search.offer(search.evaluate({resolve_fill(volume, PerturbationMethod::blank()),
                                      resolve_fill(volume, PerturbationMethod::min()),
                                      resolve_fill(volume, PerturbationMethod::max())}));
    } else {
        FillVector mid;
        mid.fill(0.5);
        search.offer(search.evaluate({mid}));
    }

    // Coarse pass.
    auto grid_value = [grid](std::size_t g) { return grid == 1 ? 0.5 : double(g) / double(grid - 1); };
    for (std::size_t s = 0; s < kSequenceCount; ++s) {
        std::vector<FillVector> fills;
        for (std::size_t g = 0; g < grid; ++g) {
            FillVector f = search.best().fill;
            f[s] = grid_value(g);
            fills.push_back(f);
        }
        search.offer(search.evaluate(fills));
    }

    // Golden-section refinement inside the winning coarse cell of every coordinate.
    const double half_cell = grid == 1 ? 0.5 : 1.0 / double(grid - 1);
    std::array<std::pair<double, double>, kSequenceCount> bracket;
    for (std::size_t s = 0; s < kSequenceCount; ++s) {
        const double centre = search.best().fill[s];
        bracket[s] = {std::max(0.0, centre - half_cell), std::min(1.0, centre + half_cell)};
    }
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (std::size_t round = 0; round < budget.refinement_iterations; ++round) {
        for (std::size_t s = 0; s < kSequenceCount; ++s) {
            auto& [lo, hi] = bracket[s];
            const double c = hi - inv_phi * (hi - lo);
            const double d = lo + inv_phi * (hi - lo);
            FillVector fc = search.best().fill;
            FillVector fd = fc;
            fc[s] = c;
            fd[s] = d;
            const auto scored = search.evaluate({fc, fd});
            if (scored[0].delta >= scored[1].delta) {
                hi = d;
            } else {
                lo = c;
            }
            search.offer(scored);
        }
    }

    const auto& best = search.best();
    const auto method = PerturbationMethod::optimal_fill(best.fill);
    return {method, make_outcome(method, p0, best.probability), search.calls()};
}

FillSearchResult optimal_fill_search(const MultiSequenceVolume& volume, const BinaryMask& region,
                                     const Oracle& oracle, const SearchBudget& budget,
                                     std::optional<double> p_original, const SearchTrace& trace) {
    if (region.dims() != volume.dims()) {
        throw DimensionError("region " + to_string(region.dims()) + " vs volume " + to_string(volume.dims()));
    }
    const auto indices = region.indices();
    if (indices.empty()) throw ValidationError("optimal fill search on an empty region");
    return optimal_fill_search(volume, indices, oracle, budget, p_original, trace);
}

}  // namespace relmap
