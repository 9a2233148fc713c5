#include "relmap/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <spdlog/spdlog.h>

#include "relmap/errors.hpp"

namespace relmap {

void SlicParams::validate() const {
    if (n_segments < 1) throw ValidationError("n_segments must be >= 1");
    if (!(compactness > 0.0) || !std::isfinite(compactness)) {
        throw ValidationError("compactness must be a finite value > 0");
    }
    if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
}

SuperpixelLabelMap::SuperpixelLabelMap(Dims dims, std::vector<std::uint32_t> labels, std::size_t count)
    : dims_(dims), labels_(std::move(labels)), count_(count) {
    if (labels_.size() != dims_.voxels()) {
        throw DimensionError("label map holds " + std::to_string(labels_.size()) +
                             " voxels but dims " + to_string(dims_) + " require " +
                             std::to_string(dims_.voxels()));
    }
    if (count_ == 0 && !labels_.empty()) throw ValidationError("label map with zero labels");
    std::vector<bool> seen(count_, false);
    for (auto l : labels_) {
        if (l >= count_) {
            throw ValidationError("label " + std::to_string(l) + " outside [0, " +
                                  std::to_string(count_) + ")");
        }
        seen[l] = true;
    }
    for (std::size_t k = 0; k < count_; ++k) {
        if (!seen[k]) throw ValidationError("label " + std::to_string(k) + " never occurs");
    }
}

std::vector<std::vector<std::size_t>> SuperpixelLabelMap::members() const {
    std::vector<std::vector<std::size_t>> out(count_);
    for (std::size_t i = 0; i < labels_.size(); ++i) out[labels_[i]].push_back(i);
    return out;
}

namespace {

std::size_t grid_count(std::size_t length, std::size_t step) {
    return std::max<std::size_t>(1, length / step);
}

struct Center {
    double intensity;
    double z, y, x;
};

// Calls fn(neighbor_index) for every 6-neighbor of flat index i.
template <typename Fn>
void for_each_neighbor(const Dims& d, std::size_t i, Fn&& fn) {
    const std::size_t plane = d.height * d.width;
    const std::size_t z = i / plane;
    const std::size_t y = (i / d.width) % d.height;
    const std::size_t x = i % d.width;
    if (x > 0) fn(i - 1);
    if (x + 1 < d.width) fn(i + 1);
    if (y > 0) fn(i - d.width);
    if (y + 1 < d.height) fn(i + d.width);
    if (z > 0) fn(i - plane);
    if (z + 1 < d.depth) fn(i + plane);
}

std::vector<Center> seed_centers(const ScalarVolume& v, std::size_t step) {
    const Dims& d = v.dims();
    const std::array<std::size_t, 3> len = {d.depth, d.height, d.width};
    std::array<std::vector<std::size_t>, 3> pos;
    for (std::size_t a = 0; a < 3; ++a) {
        const std::size_t n = grid_count(len[a], step);
        const std::size_t span = (n - 1) * step;
        const std::size_t start = span < len[a] ? (len[a] - 1 - span) / 2 : 0;
        for (std::size_t i = 0; i < n; ++i) pos[a].push_back(std::min(start + i * step, len[a] - 1));
    }
    std::vector<Center> centers;
    for (auto z : pos[0]) {
        for (auto y : pos[1]) {
            for (auto x : pos[2]) {
                centers.push_back({v.at(z, y, x), double(z), double(y), double(x)});
            }
        }
    }
    return centers;
}

// Assignment pass. Strict comparison in ascending center order keeps ties on the lower index.
void assign(const ScalarVolume& v, const std::vector<Center>& centers, std::size_t step, double weight,
            std::vector<std::int32_t>& labels, std::vector<double>& dist) {
    const Dims& d = v.dims();
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    const auto s = static_cast<long>(step);
    auto window = [s](double c, std::size_t len) {
        const long mid = std::lround(c);
        return std::pair<long, long>{std::max(0L, mid - s), std::min(static_cast<long>(len) - 1, mid + s)};
    };

    for (std::size_t k = 0; k < centers.size(); ++k) {
        const Center& c = centers[k];
        const auto [z0, z1] = window(c.z, d.depth);
        const auto [y0, y1] = window(c.y, d.height);
        const auto [x0, x1] = window(c.x, d.width);
        for (long z = z0; z <= z1; ++z) {
            const double dz = double(z) - c.z;
            for (long y = y0; y <= y1; ++y) {
                const double dy = double(y) - c.y;
                std::size_t idx = d.index(std::size_t(z), std::size_t(y), std::size_t(x0));
                for (long x = x0; x <= x1; ++x, ++idx) {
                    const double dx = double(x) - c.x;
                    const double dc = double(v[idx]) - c.intensity;
                    const double dist2 = dc * dc + (dz * dz + dy * dy + dx * dx) * weight;
                    if (dist2 < dist[idx]) {
                        dist[idx] = dist2;
                        labels[idx] = static_cast<std::int32_t>(k);
                    }
                }
            }
        }
    }

    // Voxels outside every window: exhaustive nearest center.
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= 0) continue;
        const std::size_t z = i / (d.height * d.width);
        const std::size_t y = (i / d.width) % d.height;
        const std::size_t x = i % d.width;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < centers.size(); ++k) {
            const Center& c = centers[k];
            const double dc = double(v[i]) - c.intensity;
            const double ds2 = (z - c.z) * (z - c.z) + (y - c.y) * (y - c.y) + (x - c.x) * (x - c.x);
            const double dist2 = dc * dc + ds2 * weight;
            if (dist2 < best) {
                best = dist2;
                labels[i] = static_cast<std::int32_t>(k);
            }
        }
    }
}

// Returns mean spatial movement of centers that own at least one voxel.
double update_centers(const ScalarVolume& v, const std::vector<std::int32_t>& labels,
                      std::vector<Center>& centers) {
    const Dims& d = v.dims();
    std::vector<std::array<double, 4>> sums(centers.size(), {0, 0, 0, 0});
    std::vector<std::size_t> counts(centers.size(), 0);
    std::size_t i = 0;
    for (std::size_t z = 0; z < d.depth; ++z) {
        for (std::size_t y = 0; y < d.height; ++y) {
            for (std::size_t x = 0; x < d.width; ++x, ++i) {
                const auto k = static_cast<std::size_t>(labels[i]);
                sums[k][0] += v[i];
                sums[k][1] += double(z);
                sums[k][2] += double(y);
                sums[k][3] += double(x);
                ++counts[k];
            }
        }
    }
    double moved = 0.0;
    std::size_t active = 0;
    for (std::size_t k = 0; k < centers.size(); ++k) {
        if (counts[k] == 0) continue;
        const double n = double(counts[k]);
        Center next{sums[k][0] / n, sums[k][1] / n, sums[k][2] / n, sums[k][3] / n};
        moved += std::sqrt((next.z - centers[k].z) * (next.z - centers[k].z) +
                           (next.y - centers[k].y) * (next.y - centers[k].y) +
                           (next.x - centers[k].x) * (next.x - centers[k].x));
        centers[k] = next;
        ++active;
    }
    return active == 0 ? 0.0 : moved / double(active);
}

// Relabels 6-connected components; components below min_size join their largest
// already-finalized neighbor.
std::vector<std::int32_t> relabel_components(const Dims& d, const std::vector<std::int32_t>& labels,
                                             double min_size) {
    const std::size_t n = labels.size();
    std::vector<std::int32_t> out(n, -1);
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> queue;
    queue.reserve(n);

    for (std::size_t seed = 0; seed < n; ++seed) {
        if (out[seed] != -1) continue;
        const auto current = static_cast<std::int32_t>(sizes.size());
        const std::int32_t original = labels[seed];
        queue.clear();
        queue.push_back(seed);
        out[seed] = current;
        std::set<std::int32_t> adjacent;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            for_each_neighbor(d, queue[head], [&](std::size_t j) {
                if (out[j] == -1) {
                    if (labels[j] == original) {
                        out[j] = current;
                        queue.push_back(j);
                    }
                } else if (out[j] != current) {
                    adjacent.insert(out[j]);
                }
            });
        }
        if (double(queue.size()) < min_size && !adjacent.empty()) {
            std::int32_t target = *adjacent.begin();
            for (auto a : adjacent) {
                if (sizes[std::size_t(a)] > sizes[std::size_t(target)]) target = a;
            }
            for (auto j : queue) out[j] = target;
            sizes[std::size_t(target)] += queue.size();
        } else {
            sizes.push_back(queue.size());
        }
    }
    return out;
}

// Merges the smallest component into its largest neighbor until at most `limit` remain.
void merge_down_to(const Dims& d, std::vector<std::int32_t>& labels, std::size_t limit) {
    std::int32_t max_label = *std::max_element(labels.begin(), labels.end());
    std::vector<std::vector<std::size_t>> members(std::size_t(max_label) + 1);
    for (std::size_t i = 0; i < labels.size(); ++i) members[std::size_t(labels[i])].push_back(i);
    std::size_t alive = std::count_if(members.begin(), members.end(), [](auto& m) { return !m.empty(); });

    while (alive > limit) {
        std::size_t smallest = members.size();
        for (std::size_t k = 0; k < members.size(); ++k) {
            if (members[k].empty()) continue;
            if (smallest == members.size() || members[k].size() < members[smallest].size()) smallest = k;
        }
        std::set<std::int32_t> adjacent;
        for (auto i : members[smallest]) {
            for_each_neighbor(d, i, [&](std::size_t j) {
                if (std::size_t(labels[j]) != smallest) adjacent.insert(labels[j]);
            });
        }
        if (adjacent.empty()) break;
        std::int32_t target = *adjacent.begin();
        for (auto a : adjacent) {
            if (members[std::size_t(a)].size() > members[std::size_t(target)].size()) target = a;
        }
        for (auto i : members[smallest]) labels[i] = target;
        auto& dst = members[std::size_t(target)];
        dst.insert(dst.end(), members[smallest].begin(), members[smallest].end());
        members[smallest].clear();
        --alive;
    }
}

SuperpixelLabelMap compact(const Dims& d, const std::vector<std::int32_t>& labels) {
    const auto max_label = std::size_t(*std::max_element(labels.begin(), labels.end()));
    std::vector<std::int64_t> remap(max_label + 1, -1);
    for (auto l : labels) remap[std::size_t(l)] = 0;
    std::int64_t next = 0;
    for (auto& r : remap) {
        if (r == 0) r = next++;
    }
    std::vector<std::uint32_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = std::uint32_t(remap[std::size_t(labels[i])]);
    return SuperpixelLabelMap(d, std::move(out), std::size_t(next));
}

}  // namespace

std::size_t slic_grid_step(const Dims& dims, std::size_t n_segments) {
    if (n_segments == 0) throw ValidationError("n_segments must be >= 1");
    const double cell = double(dims.voxels()) / double(n_segments);
    auto step = std::max<std::size_t>(1, std::size_t(std::llround(std::cbrt(cell))));
    while (grid_count(dims.depth, step) * grid_count(dims.height, step) * grid_count(dims.width, step) >
           n_segments) {
        ++step;
    }
    return step;
}

SuperpixelLabelMap slic3d(const ScalarVolume& volume, const SlicParams& params) {
    params.validate();
    const Dims& d = volume.dims();
    if (d.voxels() == 0) throw ValidationError("slic3d on an empty volume");
    if (params.n_segments > d.voxels()) {
        throw ValidationError("n_segments " + std::to_string(params.n_segments) + " exceeds voxel count " +
                              std::to_string(d.voxels()));
    }
    if (volume.min() < 0.0f || volume.max() > 1.0f) {
        spdlog::warn("slic3d input outside [0, 1]; compactness {} assumes normalized intensities",
                     params.compactness);
    }

    const std::size_t step = slic_grid_step(d, params.n_segments);
    const double weight = (params.compactness * params.compactness) / double(step * step);
    auto centers = seed_centers(volume, step);

    std::vector<std::int32_t> labels(d.voxels(), -1);
    std::vector<double> dist(d.voxels());
    for (std::size_t iter = 0; iter < params.max_iterations; ++iter) {
        assign(volume, centers, step, weight, labels, dist);
        if (update_centers(volume, labels, centers) < 0.5) break;
    }

    if (params.enforce_connectivity) {
        const double min_size = double(step * step * step) / 4.0;
        labels = relabel_components(d, labels, min_size);
        merge_down_to(d, labels, params.n_segments);
    }
    return compact(d, labels);
}

BinaryMask superpixel_mask(const SuperpixelLabelMap& labels, std::size_t id) {
    if (id >= labels.count()) {
        throw ValidationError("superpixel id " + std::to_string(id) + " outside [0, " +
                              std::to_string(labels.count()) + ")");
    }
    BinaryMask mask(labels.dims());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (labels[i] == id) mask.set(i, true);
    }
    return mask;
}

std::vector<SuperpixelStats> superpixel_stats(const SuperpixelLabelMap& labels, const ScalarVolume& volume) {
    if (labels.dims() != volume.dims()) {
        throw DimensionError("label map " + to_string(labels.dims()) + " vs volume " +
                             to_string(volume.dims()));
    }
    const Dims& d = labels.dims();
    std::vector<SuperpixelStats> stats(labels.count());
    std::size_t i = 0;
    for (std::size_t z = 0; z < d.depth; ++z) {
        for (std::size_t y = 0; y < d.height; ++y) {
            for (std::size_t x = 0; x < d.width; ++x, ++i) {
                auto& s = stats[labels[i]];
                ++s.voxel_count;
                s.mean_intensity += volume[i];
                s.centroid[0] += double(z);
                s.centroid[1] += double(y);
                s.centroid[2] += double(x);
            }
        }
    }
    for (auto& s : stats) {
        const double n = double(s.voxel_count);
        s.mean_intensity /= n;
        for (auto& c : s.centroid) c /= n;
    }
    return stats;
}

bool labels_are_connected(const SuperpixelLabelMap& labels) {
    const Dims& d = labels.dims();
    std::vector<bool> visited(d.voxels(), false);
    std::vector<bool> label_seen(labels.count(), false);
    std::vector<std::size_t> queue;
    for (std::size_t seed = 0; seed < d.voxels(); ++seed) {
        if (visited[seed]) continue;
        const auto label = labels[seed];
        if (label_seen[label]) return false;
        label_seen[label] = true;
        queue.assign(1, seed);
        visited[seed] = true;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            for_each_neighbor(d, queue[head], [&](std::size_t j) {
                if (!visited[j] && labels[j] == label) {
                    visited[j] = true;
                    queue.push_back(j);
                }
            });
        }
    }
    return true;
}

}  // namespace relmap
