#include <doctest.h>

#include <chrono>
#include <random>

#include "relmap/remote_oracle.hpp"
#include "support/fake_server.hpp"
#include "support/oracles.hpp"

using namespace relmap;
using namespace std::chrono_literals;
using testing::FakeScoringServer;

namespace {

const Dims kDims{6, 5, 4};

SyntheticParams params() {
    SyntheticParams p;
    p.target_region = BinaryMask(kDims);
    for (std::size_t i = 0; i < 30; ++i) p.target_region.set(i * 4, true);
    p.sequence_weights = {0.1, 0.2, 0.3, 0.4};
    return p;
}

MultiSequenceVolume random_mv(const Dims& d, std::mt19937_64& rng) {
    MultiSequenceVolume mv;
    for (auto kind : kAllSequences) mv.set(kind, testing::random_volume(d, rng));
    return mv;
}

RemoteParams fast(const std::string& endpoint) {
    RemoteParams r;
    r.endpoint = endpoint;
    r.timeout = 2000ms;
    r.backoff_base = 10ms;
    return r;
}

OracleError catch_oracle_error(auto&& fn) {
    try {
        fn();
    } catch (const OracleError& e) {
        return e;
    }
    FAIL("expected OracleError");
    return OracleError(OracleError::Kind::Internal, "unreachable");
}

}  // namespace

TEST_SUITE("remote_oracle") {

TEST_CASE("base64 known vectors and round-trip") {
    auto enc = [](const std::string& s) {
        return base64_encode({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
    };
    CHECK(enc("") == "");
    CHECK(enc("f") == "Zg==");
    CHECK(enc("fo") == "Zm8=");
    CHECK(enc("foobar") == "Zm9vYmFy");
    std::mt19937_64 rng(1);
    for (std::size_t n = 0; n < 40; ++n) {
        std::vector<unsigned char> bytes(n);
        for (auto& b : bytes) b = static_cast<unsigned char>(rng());
        CHECK(base64_decode(base64_encode(bytes)) == bytes);
    }
    CHECK_THROWS_AS(base64_decode("abc"), ValidationError);
}

TEST_CASE("request body layout") {
    std::mt19937_64 rng(2);
    const auto mv = random_mv(kDims, rng);
    const auto body = nlohmann::json::parse(encode_score_request(mv));
    CHECK(body["dims"] == nlohmann::json::array({4, 6, 5, 4}));
    CHECK(body["order"] == "seq,z,y,x");
    CHECK(body["dtype"] == "f32le");
    CHECK(body["encoding"] == "base64");
    const auto bytes = base64_decode(body["data"].get<std::string>());
    REQUIRE(bytes.size() == 4 * kDims.voxels() * sizeof(float));
    // Third sequence block holds T2w.
    float first_t2w;
    std::memcpy(&first_t2w, bytes.data() + 2 * kDims.voxels() * sizeof(float), sizeof(float));
    CHECK(first_t2w == mv.get(SequenceKind::T2w)[0]);
    CHECK(decode_score_request(encode_score_request(mv)) == mv);
    CHECK_THROWS_AS(decode_score_request("{}"), ValidationError);
    CHECK_THROWS_AS(decode_score_request("[1,2"), ValidationError);
}

TEST_CASE("health and parity with the in-process oracle") {
    FakeScoringServer server(params());
    const RemoteOracle remote(fast(server.endpoint()));
    CHECK(remote.health() == "synthetic-test");
    CHECK(remote.identity() == "remote(" + server.endpoint() + ")");

    std::mt19937_64 rng(3);
    std::vector<MultiSequenceVolume> batch;
    for (int i = 0; i < 50; ++i) {
        const auto mv = random_mv(kDims, rng);
        CHECK(std::abs(remote.score(mv).probability() - server.oracle().score(mv).probability()) <= 1e-6);
        batch.push_back(mv);
    }
    const auto results = remote.score_batch(batch);
    REQUIRE(results.size() == batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        CHECK(std::abs(value_or_throw(results[i]).probability() - server.oracle().score(batch[i]).probability()) <=
              1e-6);
    }
    CHECK(server.batch_requests() == 1);
}

TEST_CASE("connection failures are retried, then reported as Connection") {
    auto p = fast("http://127.0.0.1:1");
    p.backoff_base = 20ms;
    const RemoteOracle remote(p);
    std::mt19937_64 rng(4);
    const auto start = std::chrono::steady_clock::now();
    const auto e = catch_oracle_error([&] { remote.score(random_mv(kDims, rng)); });
    const auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(e.kind() == OracleError::Kind::Connection);
    CHECK(e.retryable());
    // Three attempts sleep 20 ms + 40 ms between them.
    CHECK(elapsed >= 60ms);
    CHECK_THROWS_AS(remote.health(), OracleError);
}

TEST_CASE("timeouts are retried and a later attempt can succeed") {
    FakeScoringServer server(params());
    auto p = fast(server.endpoint());
    p.timeout = 150ms;
    const RemoteOracle remote(p);
    std::mt19937_64 rng(5);
    const auto mv = random_mv(kDims, rng);

    server.stall_next(2, 600ms);
    CHECK(remote.score(mv) == server.oracle().score(mv));
    CHECK(server.requests() == 3);

    server.stall_next(3, 600ms);
    const auto e = catch_oracle_error([&] { remote.score(mv); });
    CHECK(e.kind() == OracleError::Kind::Timeout);
}

TEST_CASE("HTTP errors, malformed bodies and out-of-range probabilities are not retried") {
    FakeScoringServer server(params());
    const RemoteOracle remote(fast(server.endpoint()));
    std::mt19937_64 rng(6);
    const auto mv = random_mv(kDims, rng);

    server.set_mode(FakeScoringServer::Mode::Unavailable);
    auto e = catch_oracle_error([&] { remote.score(mv); });
    CHECK(e.kind() == OracleError::Kind::HttpStatus);
    CHECK(e.http_status() == 503);
    CHECK_FALSE(e.retryable());
    CHECK(server.requests() == 1);

    server.set_mode(FakeScoringServer::Mode::OutOfRange);
    e = catch_oracle_error([&] { remote.score(mv); });
    CHECK(e.kind() == OracleError::Kind::OutOfRange);
    CHECK(server.requests() == 2);

    server.set_mode(FakeScoringServer::Mode::Malformed);
    e = catch_oracle_error([&] { remote.score(mv); });
    CHECK(e.kind() == OracleError::Kind::MalformedResponse);
    CHECK(server.requests() == 3);

    server.set_mode(FakeScoringServer::Mode::Normal);
    e = catch_oracle_error([&] { remote.score(random_mv(Dims{2, 2, 2}, rng)); });
    CHECK(e.http_status() == 422);

    httplib::Client raw(server.endpoint());
    auto res = raw.Post("/v1/score", "{\"dims\":[4,1,1,1]}", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(nlohmann::json::parse(res->body).contains("error"));
}

TEST_CASE("batch falls back to single requests when the endpoint is missing") {
    FakeScoringServer server(params(), /*with_batch=*/false);
    const RemoteOracle remote(fast(server.endpoint()));
    std::mt19937_64 rng(7);
    std::vector<MultiSequenceVolume> batch;
    for (int i = 0; i < 5; ++i) batch.push_back(random_mv(kDims, rng));
    const auto results = remote.score_batch(batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        CHECK(value_or_throw(results[i]) == server.oracle().score(batch[i]));
    }
    // The 404 probe hits no route, so only the five singles are counted.
    CHECK(server.requests() == 5);
    remote.score_batch(batch);
    CHECK(server.requests() == 10);
}

TEST_CASE("a rejected batch is split so that only the bad item fails") {
    FakeScoringServer server(params());
    const RemoteOracle remote(fast(server.endpoint()));
    std::mt19937_64 rng(8);
    std::vector<MultiSequenceVolume> batch = {random_mv(kDims, rng), random_mv(Dims{3, 3, 3}, rng),
                                              random_mv(kDims, rng)};
    const auto results = remote.score_batch(batch);
    CHECK(value_or_throw(results[0]) == server.oracle().score(batch[0]));
    REQUIRE(std::holds_alternative<OracleError>(results[1]));
    CHECK(std::get<OracleError>(results[1]).http_status() == 422);
    CHECK(value_or_throw(results[2]) == server.oracle().score(batch[2]));
}

}
