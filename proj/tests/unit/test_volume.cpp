#include <doctest.h>

#include <random>

#include "relmap/errors.hpp"
#include "relmap/volume.hpp"
#include "support/oracles.hpp"

using namespace relmap;

namespace {

ScalarVolume line(std::vector<float> values) {
    const auto n = values.size();
    return ScalarVolume(Dims{1, 1, n}, std::move(values));
}

std::vector<float> as_vector(const ScalarVolume& v) { return {v.data().begin(), v.data().end()}; }

}  // namespace

TEST_SUITE("volume_core") {

TEST_CASE("sequence names round-trip in serialization order") {
    CHECK(kAllSequences.size() == 4);
    for (std::size_t i = 0; i < kSequenceCount; ++i) {
        CHECK(static_cast<std::size_t>(kAllSequences[i]) == i);
        CHECK(parse_sequence(to_string(kAllSequences[i])) == kAllSequences[i]);
    }
    CHECK_FALSE(parse_sequence("t2w").has_value());
    CHECK_THROWS_AS(sequence_from_string("DWI"), ValidationError);
}

TEST_CASE("scalar volume rejects bad data") {
    CHECK_THROWS_AS(ScalarVolume(Dims{2, 2, 2}, std::vector<float>(7)), DimensionError);
    CHECK_THROWS_AS(line({1.0f, std::nanf("")}), ValidationError);
    CHECK_THROWS_AS(line({1.0f, INFINITY}), ValidationError);
}

TEST_CASE("min_max_normalize examples") {
    CHECK(as_vector(min_max_normalize(line({0, 5, 10}))) == std::vector<float>{0.0f, 0.5f, 1.0f});
    CHECK(as_vector(min_max_normalize(line({3, 3, 3}))) == std::vector<float>{0.0f, 0.0f, 0.0f});
    CHECK(as_vector(min_max_normalize(line({-2, 0, 2}))) == std::vector<float>{0.0f, 0.5f, 1.0f});
}

TEST_CASE("min_max_normalize property: full range and order preserving") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(-1000.0f, 1000.0f);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<float> data(200);
        for (auto& v : data) v = u(rng);
        const auto in = line(data);
        const auto out = min_max_normalize(in);
        CHECK(out.min() == 0.0f);
        CHECK(out.max() == 1.0f);
        for (std::size_t i = 0; i < data.size(); ++i) {
            for (std::size_t j = 0; j < data.size(); j += 17) {
                if (in[i] <= in[j]) CHECK(out[i] <= out[j]);
            }
        }
    }
}

TEST_CASE("normalize_all normalizes each sequence independently") {
    MultiSequenceVolume mv;
    mv.set(SequenceKind::T1w, line({0, 5, 10}));
    mv.set(SequenceKind::FLAIR, line({0, 1, 2}));
    const auto out = normalize_all(mv);
    CHECK(out.get(SequenceKind::T1w).max() == 1.0f);
    CHECK(out.get(SequenceKind::FLAIR).max() == 1.0f);
    CHECK(out.get(SequenceKind::FLAIR)[1] == 0.5f);
    CHECK(out.dims() == mv.dims());
    CHECK_FALSE(out.has(SequenceKind::T2w));

    MultiSequenceVolume single;
    single.set(SequenceKind::T2w, line({4, 6, 9}));
    CHECK(normalize_all(single).get(SequenceKind::T2w) == min_max_normalize(line({4, 6, 9})));

    MultiSequenceVolume unit;
    unit.set(SequenceKind::T2w, line({0.0f, 0.25f, 1.0f}));
    CHECK(normalize_all(unit) == unit);
}

TEST_CASE("multi-sequence volume enforces shared dims") {
    MultiSequenceVolume mv;
    mv.set(SequenceKind::T1w, ScalarVolume(Dims{2, 2, 2}));
    CHECK_THROWS_AS(mv.set(SequenceKind::T2w, ScalarVolume(Dims{2, 2, 3})), DimensionError);
    CHECK_FALSE(mv.complete());
    CHECK_THROWS_AS(mv.get(SequenceKind::FLAIR), ValidationError);
}

TEST_CASE("center_crop of a BraTS-sized volume starts at (56, 56, 13)") {
    const Dims source{240, 240, 155};
    const Dims target{128, 128, 128};
    const auto offsets = center_crop_offsets(source, target);
    CHECK(offsets == std::array<std::size_t, 3>{56, 56, 13});

    std::vector<float> data(source.voxels());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = float(i % 65521);
    const ScalarVolume v(source, std::move(data));
    const auto cropped = center_crop(v, target);
    REQUIRE(cropped.dims() == target);
    bool equal = true;
    for (std::size_t z = 0; z < 128; ++z)
        for (std::size_t y = 0; y < 128; ++y)
            for (std::size_t x = 0; x < 128; ++x) equal &= cropped.at(z, y, x) == v.at(z + 56, y + 56, x + 13);
    CHECK(equal);
}

TEST_CASE("center_crop identity, symmetric crop and errors") {
    std::mt19937_64 rng(3);
    const auto v = testing::random_volume(Dims{5, 5, 5}, rng);
    CHECK(center_crop(v, Dims{5, 5, 5}) == v);
    CHECK(center_crop_offsets(Dims{5, 5, 5}, Dims{3, 3, 3}) == std::array<std::size_t, 3>{1, 1, 1});
    CHECK(center_crop(v, Dims{3, 3, 3}).at(0, 0, 0) == v.at(1, 1, 1));
    CHECK_THROWS_AS(center_crop(v, Dims{6, 5, 5}), DimensionError);
}

TEST_CASE("two shrinking crops equal one crop when the first crop removes an even margin") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> len(4, 14);
    std::uniform_int_distribution<std::size_t> pick(0, 100);
    for (int trial = 0; trial < 50; ++trial) {
        const Dims src{len(rng), len(rng), len(rng)};
        auto even_shrink = [&](std::size_t n) {
            const std::size_t m = n - 2 * (pick(rng) % ((n + 1) / 2));
            return std::max<std::size_t>(m, n % 2 == 0 ? 2 : 1);
        };
        const Dims mid{even_shrink(src.depth), even_shrink(src.height), even_shrink(src.width)};
        const Dims fin{1 + pick(rng) % mid.depth, 1 + pick(rng) % mid.height, 1 + pick(rng) % mid.width};
        const auto v = testing::random_volume(src, rng);
        CHECK(center_crop(center_crop(v, mid), fin) == center_crop(v, fin));
    }
}

TEST_CASE("floor offsets make odd two-step crops differ from a single crop") {
    // 5 -> 4 starts at 0, 4 -> 3 starts at 0, but 5 -> 3 starts at 1.
    CHECK(center_crop_offsets(Dims{5, 1, 1}, Dims{4, 1, 1})[0] == 0);
    CHECK(center_crop_offsets(Dims{4, 1, 1}, Dims{3, 1, 1})[0] == 0);
    CHECK(center_crop_offsets(Dims{5, 1, 1}, Dims{3, 1, 1})[0] == 1);
}

TEST_CASE("preprocess order flag") {
    MultiSequenceVolume mv;
    std::vector<float> data(27, 0.0f);
    data[0] = 10.0f;                  // outside the 1^3 centre crop
    data[Dims{3, 3, 3}.index(1, 1, 1)] = 5.0f;
    mv.set(SequenceKind::T2w, ScalarVolume(Dims{3, 3, 3}, data));
    const Dims target{1, 1, 1};
    CHECK(preprocess(mv, target, PreprocessOrder::CropThenNormalize).get(SequenceKind::T2w)[0] == 0.0f);
    CHECK(preprocess(mv, target, PreprocessOrder::NormalizeThenCrop).get(SequenceKind::T2w)[0] == 0.5f);
    CHECK(preprocess_order_from_string("crop-then-normalize") == PreprocessOrder::CropThenNormalize);
    CHECK_THROWS_AS(preprocess_order_from_string("sideways"), ValidationError);
}

TEST_CASE("binary mask basics") {
    BinaryMask m(Dims{2, 2, 2});
    m.set(3, true);
    m.set(5, true);
    CHECK(m.count() == 2);
    CHECK(m.indices() == std::vector<std::size_t>{3, 5});
    CHECK_THROWS_AS(BinaryMask(Dims{1, 1, 2}, std::vector<std::uint8_t>{0, 2}), ValidationError);
}

}
