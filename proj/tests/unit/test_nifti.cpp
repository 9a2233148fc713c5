#include <doctest.h>

#include <algorithm>
#include <random>

#include <zlib.h>

#include "relmap/errors.hpp"
#include "relmap/io.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace relmap;
using testing::TempDir;

namespace {

std::vector<char> float_fixture(std::int16_t nx, std::int16_t ny, std::int16_t nz, const std::vector<float>& body) {
    const std::int16_t dim[8] = {3, nx, ny, nz, 1, 1, 1, 1};
    return testing::nifti_bytes(16, 32, dim, body.data(), body.size() * sizeof(float));
}

std::string field_of(const fs::path& path) {
    try {
        load_nifti(path, SequenceKind::T2w);
    } catch (const ParseError& e) {
        return e.field();
    }
    return "<no error>";
}

template <typename T>
void put(std::vector<char>& bytes, std::size_t offset, T value) {
    std::memcpy(&bytes[offset], &value, sizeof(T));
}

template <typename T>
void swap_at(std::vector<char>& bytes, std::size_t offset) {
    std::reverse(bytes.begin() + std::ptrdiff_t(offset), bytes.begin() + std::ptrdiff_t(offset + sizeof(T)));
}

}  // namespace

TEST_SUITE("nifti") {

TEST_CASE("minimal float32 2x2x2 fixture loads 8 voxels in C order") {
    TempDir tmp;
    const std::vector<float> body = {0, 1, 2, 3, 4, 5, 6, 7};
    const auto bytes = float_fixture(2, 2, 2, body);
    testing::write_file((tmp / "a.nii").string(), bytes);
    const auto v = load_nifti(tmp / "a.nii", SequenceKind::T2w);
    CHECK(v.dims() == Dims{2, 2, 2});
    CHECK(v.size() == 8);
    // dim[1] (x) runs fastest: voxel (z=1, y=0, x=1) is element 5.
    CHECK(v.at(1, 0, 1) == 5.0f);
    CHECK(std::vector<float>(v.data().begin(), v.data().end()) == testing::brute_force_nifti(bytes));
}

TEST_CASE("anisotropic random fixtures agree with the independent reader") {
    TempDir tmp;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<float> u(-50.0f, 50.0f);
    for (int trial = 0; trial < 5; ++trial) {
        const std::int16_t nx = std::int16_t(2 + rng() % 5), ny = std::int16_t(2 + rng() % 5),
                           nz = std::int16_t(2 + rng() % 5);
        std::vector<float> body(std::size_t(nx * ny * nz));
        for (auto& x : body) x = u(rng);
        const auto bytes = float_fixture(nx, ny, nz, body);
        testing::write_file((tmp / "r.nii").string(), bytes);
        const auto v = load_nifti(tmp / "r.nii", SequenceKind::FLAIR);
        CHECK(v.dims() == Dims{std::size_t(nz), std::size_t(ny), std::size_t(nx)});
        CHECK(std::vector<float>(v.data().begin(), v.data().end()) == testing::brute_force_nifti(bytes));
    }
}

TEST_CASE("int16 and uint8 widen losslessly; scaling is applied") {
    TempDir tmp;
    const std::int16_t dim[8] = {3, 2, 1, 1, 1, 1, 1, 1};
    const std::int16_t shorts[2] = {0, 100};
    testing::write_file((tmp / "s.nii").string(), testing::nifti_bytes(4, 16, dim, shorts, sizeof(shorts)));
    const auto s = load_nifti(tmp / "s.nii", SequenceKind::T1w);
    CHECK(s[0] == 0.0f);
    CHECK(s[1] == 100.0f);

    const std::uint8_t bytes[2] = {3, 255};
    testing::write_file((tmp / "u.nii").string(), testing::nifti_bytes(2, 8, dim, bytes, 2, 2.0f, 1.0f));
    const auto u = load_nifti(tmp / "u.nii", SequenceKind::T1w);
    CHECK(u[0] == 7.0f);
    CHECK(u[1] == 511.0f);

    const double doubles[2] = {0.5, -2.25};
    testing::write_file((tmp / "d.nii").string(), testing::nifti_bytes(64, 64, dim, doubles, sizeof(doubles)));
    CHECK(load_nifti(tmp / "d.nii", SequenceKind::T1w)[1] == -2.25f);
}

TEST_CASE("gzip-compressed files load identically") {
    TempDir tmp;
    const std::vector<float> body = {9, 8, 7, 6, 5, 4, 3, 2};
    const auto bytes = float_fixture(2, 2, 2, body);
    const auto gz_path = (tmp / "a.nii.gz").string();
    gzFile gz = gzopen(gz_path.c_str(), "wb");
    REQUIRE(gz != nullptr);
    gzwrite(gz, bytes.data(), unsigned(bytes.size()));
    gzclose(gz);
    testing::write_file((tmp / "a.nii").string(), bytes);
    CHECK(load_nifti(gz_path, SequenceKind::T2w) == load_nifti(tmp / "a.nii", SequenceKind::T2w));
}

TEST_CASE("big-endian headers and bodies are swapped") {
    TempDir tmp;
    auto bytes = float_fixture(2, 1, 1, {1.5f, -3.0f});
    swap_at<std::int32_t>(bytes, 0);
    for (std::size_t i = 0; i < 8; ++i) swap_at<std::int16_t>(bytes, 40 + 2 * i);
    swap_at<std::int16_t>(bytes, 70);
    swap_at<std::int16_t>(bytes, 72);
    for (std::size_t off : {108, 112, 116, 352, 356}) swap_at<float>(bytes, off);
    testing::write_file((tmp / "be.nii").string(), bytes);
    const auto v = load_nifti(tmp / "be.nii", SequenceKind::T2w);
    CHECK(v[0] == 1.5f);
    CHECK(v[1] == -3.0f);
}

TEST_CASE("header defects name the field") {
    TempDir tmp;
    const auto good = float_fixture(2, 2, 2, std::vector<float>(8, 1.0f));
    const auto path = tmp / "bad.nii";

    auto bytes = good;
    std::fill(bytes.begin() + 344, bytes.begin() + 348, 0);
    testing::write_file(path.string(), bytes);
    CHECK(field_of(path) == "magic");

    bytes = good;
    put<std::int16_t>(bytes, 40, 4);
    testing::write_file(path.string(), bytes);
    CHECK(field_of(path) == "dim");

    bytes = good;
    put<std::int16_t>(bytes, 70, 128);
    testing::write_file(path.string(), bytes);
    CHECK(field_of(path) == "datatype");

    bytes = good;
    put<std::int16_t>(bytes, 72, 16);
    testing::write_file(path.string(), bytes);
    CHECK(field_of(path) == "bitpix");

    bytes = good;
    bytes.resize(352 + 4);
    testing::write_file(path.string(), bytes);
    CHECK(field_of(path) == "data");

    testing::write_file(path.string(), std::vector<char>(100, 0));
    CHECK(field_of(path) == "sizeof_hdr");

    CHECK_THROWS_AS(load_nifti(tmp / "absent.nii", SequenceKind::T2w), IoError);
}

}
