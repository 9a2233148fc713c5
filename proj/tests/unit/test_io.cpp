#include <doctest.h>

#include <random>

#include "relmap/errors.hpp"
#include "relmap/io.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace relmap;
using testing::TempDir;

namespace {

BundleError::Kind bundle_error_kind(const fs::path& dir) {
    try {
        load_bundle(dir);
    } catch (const BundleError& e) {
        return e.kind();
    }
    FAIL("expected BundleError");
    return BundleError::Kind::MalformedMetadata;
}

void write_meta(const fs::path& dir, const std::string& json) { write_text(dir / "meta.json", json); }

}  // namespace

TEST_SUITE("io") {

TEST_CASE("bundle with a 256-byte volume loads; ground truth is optional") {
    TempDir tmp;
    std::vector<float> data(64);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = float(i);
    write_f32(tmp / "t2w.f32", data);
    CHECK(fs::file_size(tmp / "t2w.f32") == 256);
    write_meta(tmp.path(), R"({"dims":[4,4,4],"sequences":{"T2w":"t2w.f32"},"extra":"ignored"})");
    const auto b = load_bundle(tmp.path());
    CHECK(b.volume.dims() == Dims{4, 4, 4});
    CHECK(b.volume.get(SequenceKind::T2w).at(1, 2, 3) == float(16 + 8 + 3));
    CHECK_FALSE(b.ground_truth.has_value());
    CHECK(b.case_id == tmp.path().filename().string());
}

TEST_CASE("bundle errors are distinct") {
    TempDir tmp;
    CHECK(bundle_error_kind(tmp.path()) == BundleError::Kind::MissingFile);

    write_f32(tmp / "t2w.f32", std::vector<float>(32));  // 128 bytes
    write_meta(tmp.path(), R"({"dims":[4,4,4],"sequences":{"T2w":"t2w.f32"}})");
    CHECK(bundle_error_kind(tmp.path()) == BundleError::Kind::SizeMismatch);

    write_meta(tmp.path(), R"({"dims":[4,4,4],"sequences":{"DWI":"t2w.f32"}})");
    CHECK(bundle_error_kind(tmp.path()) == BundleError::Kind::UnknownSequence);

    write_meta(tmp.path(), R"({"dims":[4,4],"sequences":{"T2w":"t2w.f32"}})");
    CHECK(bundle_error_kind(tmp.path()) == BundleError::Kind::MalformedMetadata);
    write_meta(tmp.path(), R"({"dims":[4,4,4])");
    CHECK(bundle_error_kind(tmp.path()) == BundleError::Kind::MalformedMetadata);

    write_meta(tmp.path(), R"({"dims":[2,4,4],"sequences":{"T2w":"t2w.f32"},"ground_truth":"seg.u8"})");
    CHECK(bundle_error_kind(tmp.path()) == BundleError::Kind::MissingFile);
    write_bytes(tmp / "seg.u8", std::vector<std::uint8_t>(32, 2));
    CHECK(bundle_error_kind(tmp.path()) == BundleError::Kind::MalformedMetadata);
}

TEST_CASE("bundle round-trip is bit-exact") {
    TempDir tmp;
    std::mt19937_64 rng(1);
    const Dims d{5, 6, 7};
    MultiSequenceVolume mv;
    for (auto kind : kAllSequences) mv.set(kind, testing::random_volume(d, rng));
    const auto gt = testing::random_mask(d, rng);
    save_bundle(tmp / "case", mv, gt, "case-7");
    const auto b = load_bundle(tmp / "case");
    CHECK(b.volume == mv);
    CHECK(b.ground_truth == std::optional<BinaryMask>(gt));
    CHECK(b.case_id == "case-7");

    const auto meta = testing::read_file((tmp / "case" / "meta.json").string());
    save_bundle(tmp / "case", mv, gt, "case-7");
    CHECK(testing::read_file((tmp / "case" / "meta.json").string()) == meta);
}

TEST_CASE("mask round-trip and all-zero file") {
    TempDir tmp;
    std::mt19937_64 rng(2);
    const Dims d{8, 8, 8};
    const auto m = testing::random_mask(d, rng);
    save_mask(m, tmp / "m.u8");
    CHECK(load_mask(tmp / "m.u8", d) == m);

    save_mask(BinaryMask(d), tmp / "zero.u8");
    const auto bytes = testing::read_file((tmp / "zero.u8").string());
    CHECK(bytes.size() == 512);
    CHECK(std::all_of(bytes.begin(), bytes.end(), [](char c) { return c == 0; }));
    CHECK_THROWS_AS(load_mask(tmp / "zero.u8", Dims{4, 4, 4}), BundleError);
}

TEST_CASE("labels and relevance round-trip losslessly") {
    TempDir tmp;
    std::mt19937_64 rng(3);
    const auto v = testing::random_volume(Dims{10, 10, 10}, rng);
    SlicParams p;
    p.n_segments = 12;
    const auto lm = slic3d(v, p);
    save_labels(lm, p, tmp / "labels");
    std::optional<SlicParams> back;
    CHECK(load_labels(tmp / "labels", &back) == lm);
    REQUIRE(back.has_value());
    CHECK(back->n_segments == 12);
    CHECK(back->seed_sequence == SequenceKind::T2w);

    // Scores hitting every integer from 0 to 100.
    const Dims d{1, 1, 101};
    std::vector<std::uint32_t> raw(101);
    std::vector<double> scores(101);
    for (std::uint32_t i = 0; i < 101; ++i) raw[i] = i, scores[i] = i / 100.0;
    auto labels = std::make_shared<const SuperpixelLabelMap>(testing::labels_from(d, raw));
    auto m = testing::relmap_from_raw(labels, scores);
    m.method = MethodFamily::Optimal;
    m.p_original = 0.25;
    m.oracle_identity = "synthetic";
    m.optimal_fills.assign(101, FillVector{0.0, 0.25, 0.5, 1.0});
    for (std::size_t i = 0; i < 101; ++i) CHECK(m.normalized_scores[i] == i);
    save_relevance(m, tmp / "relmap");
    CHECK(load_relevance(tmp / "relmap") == m);

    const auto before = testing::read_file((tmp / "relmap" / "relmap.json").string());
    save_relevance(m, tmp / "relmap");
    CHECK(testing::read_file((tmp / "relmap" / "relmap.json").string()) == before);

    fs::remove(tmp / "relmap" / "relmap.u8");
    CHECK_THROWS_AS(load_relevance(tmp / "relmap"), BundleError);
}

TEST_CASE("write errors name the path") {
    try {
        write_text("/nonexistent-dir/x/y.txt", "z");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("/nonexistent-dir/x/y.txt") != std::string::npos);
    }
}

}
