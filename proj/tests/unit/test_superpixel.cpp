#include <doctest.h>

#include <map>
#include <random>

#include "relmap/errors.hpp"
#include "relmap/superpixel.hpp"
#include "support/oracles.hpp"

using namespace relmap;

namespace {

// Brute-force partition/occupancy check straight from the label vector.
bool is_partition(const SuperpixelLabelMap& lm) {
    std::vector<std::size_t> hits(lm.count(), 0);
    for (auto l : lm.labels()) {
        if (l >= lm.count()) return false;
        ++hits[l];
    }
    for (auto h : hits) {
        if (h == 0) return false;
    }
    return true;
}

std::vector<std::size_t> label_sizes(const SuperpixelLabelMap& lm) {
    std::vector<std::size_t> sizes(lm.count(), 0);
    for (auto l : lm.labels()) ++sizes[l];
    return sizes;
}

// Volumes quantized to k/256 so that 1 - v is exact in float.
ScalarVolume quantized_volume(const Dims& d, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> q(0, 256);
    std::vector<float> data(d.voxels());
    for (auto& v : data) v = float(q(rng)) / 256.0f;
    return ScalarVolume(d, std::move(data));
}

}  // namespace

TEST_SUITE("superpixel") {

TEST_CASE("params validation") {
    SlicParams p;
    CHECK_NOTHROW(p.validate());
    p.n_segments = 0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = SlicParams{};
    p.compactness = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = SlicParams{};
    p.max_iterations = 0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("uniform 8^3 volume with 8 segments gives near-equal blocks") {
    const ScalarVolume v(Dims{8, 8, 8}, std::vector<float>(512, 0.5f));
    SlicParams p;
    p.n_segments = 8;
    p.compactness = 1.0;
    const auto lm = slic3d(v, p);
    CHECK(lm.count() == 8);
    CHECK(is_partition(lm));
    for (auto s : label_sizes(lm)) {
        CHECK(s >= 32);
        CHECK(s <= 96);
    }
}

TEST_CASE("single segment covers everything") {
    std::mt19937_64 rng(5);
    const auto v = testing::random_volume(Dims{6, 7, 8}, rng);
    SlicParams p;
    p.n_segments = 1;
    const auto lm = slic3d(v, p);
    CHECK(lm.count() == 1);
    for (auto l : lm.labels()) CHECK(l == 0);
}

TEST_CASE("two-region volume splits along the intensity boundary") {
    const Dims d{16, 16, 16};
    std::vector<float> data(d.voxels());
    for (std::size_t z = 0; z < d.depth; ++z)
        for (std::size_t y = 0; y < d.height; ++y)
            for (std::size_t x = 0; x < d.width; ++x) data[d.index(z, y, x)] = x < 8 ? 0.0f : 1.0f;
    SlicParams p;
    p.n_segments = 2;
    p.compactness = 0.01;
    const auto lm = slic3d(ScalarVolume(d, data), p);

    // Brute force: majority label per side and its share.
    for (int side = 0; side < 2; ++side) {
        std::map<std::uint32_t, std::size_t> votes;
        std::size_t total = 0;
        for (std::size_t i = 0; i < d.voxels(); ++i) {
            if ((data[i] == 1.0f) == (side == 1)) {
                ++votes[lm[i]];
                ++total;
            }
        }
        std::size_t majority = 0;
        for (auto& [label, n] : votes) majority = std::max(majority, n);
        CHECK(double(majority) / double(total) >= 0.95);
    }
}

TEST_CASE("errors") {
    CHECK_THROWS_AS(slic3d(ScalarVolume(Dims{0, 0, 0}), SlicParams{}), ValidationError);
    SlicParams p;
    p.n_segments = 9;
    CHECK_THROWS_AS(slic3d(ScalarVolume(Dims{2, 2, 2}), p), ValidationError);
}

TEST_CASE("grid step keeps the seed count within n_segments") {
    for (std::size_t n : {1, 2, 7, 50, 100, 250, 511}) {
        const Dims d{8, 8, 8};
        const auto s = slic_grid_step(d, n);
        CHECK(std::max<std::size_t>(1, 8 / s) * std::max<std::size_t>(1, 8 / s) * std::max<std::size_t>(1, 8 / s) <= n);
    }
}

TEST_CASE("partition, occupancy, connectivity and determinism on random volumes") {
    std::mt19937_64 rng(99);
    for (std::size_t n : {50, 100, 250}) {
        const auto v = testing::random_volume(Dims{32, 32, 32}, rng);
        SlicParams p;
        p.n_segments = n;
        const auto lm = slic3d(v, p);
        CHECK(is_partition(lm));
        CHECK(labels_are_connected(lm));
        CHECK(testing::brute_force_connected(lm));
        CHECK(lm.count() >= 1);
        CHECK(lm.count() <= n);
        CHECK(slic3d(v, p) == lm);
    }
}

TEST_CASE("connectivity can be disabled") {
    std::mt19937_64 rng(4);
    const auto v = testing::random_volume(Dims{16, 16, 16}, rng);
    SlicParams p;
    p.n_segments = 27;
    p.enforce_connectivity = false;
    const auto lm = slic3d(v, p);
    CHECK(is_partition(lm));
    CHECK(lm.count() <= 27);
}

TEST_CASE("global intensity inversion yields the identical label map") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 3; ++trial) {
        const Dims d{20, 20, 20};
        const auto v = quantized_volume(d, rng);
        std::vector<float> inv(v.size());
        for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0f - v[i];
        SlicParams p;
        p.n_segments = 50;
        CHECK(slic3d(v, p) == slic3d(ScalarVolume(d, inv), p));
    }
}

TEST_CASE("superpixel_mask partitions the volume") {
    std::mt19937_64 rng(8);
    const auto v = testing::random_volume(Dims{12, 12, 12}, rng);
    SlicParams p;
    p.n_segments = 20;
    const auto lm = slic3d(v, p);
    BinaryMask all(v.dims());
    for (std::size_t id = 0; id < lm.count(); ++id) {
        const auto m = superpixel_mask(lm, id);
        std::size_t occurrences = 0;
        for (auto l : lm.labels()) occurrences += l == id;
        CHECK(m.count() == occurrences);
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m[i]) {
                CHECK_FALSE(all[i]);
                all.set(i, true);
            }
        }
    }
    CHECK(all.count() == all.size());
    CHECK_THROWS_AS(superpixel_mask(lm, lm.count()), ValidationError);
}

TEST_CASE("superpixel_stats aggregates") {
    const Dims d{2, 2, 4};
    std::vector<float> data(d.voxels());
    std::vector<std::uint32_t> labels(d.voxels());
    for (std::size_t i = 0; i < d.voxels(); ++i) {
        const bool right = i % 4 >= 2;
        data[i] = right ? 1.0f : 0.0f;
        labels[i] = right ? 1 : 0;
    }
    const SuperpixelLabelMap lm(d, labels, 2);
    const auto stats = superpixel_stats(lm, ScalarVolume(d, data));
    CHECK(stats[0].mean_intensity == 0.0);
    CHECK(stats[1].mean_intensity == 1.0);
    CHECK(stats[0].voxel_count + stats[1].voxel_count == d.voxels());
    CHECK(stats[1].centroid[2] == doctest::Approx(2.5));

    const SuperpixelLabelMap one(d, std::vector<std::uint32_t>(d.voxels(), 0), 1);
    CHECK(superpixel_stats(one, ScalarVolume(d, data))[0].mean_intensity == 0.5);
    CHECK_THROWS_AS(superpixel_stats(one, ScalarVolume(Dims{1, 1, 1})), DimensionError);
}

TEST_CASE("label map constructor enforces occupancy") {
    CHECK_THROWS_AS(SuperpixelLabelMap(Dims{1, 1, 2}, {0, 2}, 2), ValidationError);
    CHECK_THROWS_AS(SuperpixelLabelMap(Dims{1, 1, 2}, {0, 0}, 2), ValidationError);
    CHECK_THROWS_AS(SuperpixelLabelMap(Dims{1, 1, 3}, {0, 0}, 1), DimensionError);
}

}
