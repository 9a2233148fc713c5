#include "relmap/remote_oracle.hpp"

#include <bit>
#include <cstring>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace relmap {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "wire format assumes a little-endian host");

std::string base64_encode(std::span<const unsigned char> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                        static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(written));
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw ValidationError("base64 length is not a multiple of 4");
    std::vector<unsigned char> out(3 * (text.size() / 4));
    const int written = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                        static_cast<int>(text.size()));
    if (written < 0) throw ValidationError("invalid base64 payload");
    std::size_t padding = 0;
    if (!text.empty() && text.back() == '=') ++padding;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
    out.resize(static_cast<std::size_t>(written) - padding);
    return out;
}

std::string encode_score_request(const MultiSequenceVolume& volume) {
    const auto packed = pack_volume(volume);
    const auto* raw = reinterpret_cast<const unsigned char*>(packed.data());
    const Dims& d = volume.dims();
    json body;
    body["dims"] = {kSequenceCount, d.depth, d.height, d.width};
    body["order"] = "seq,z,y,x";
    body["dtype"] = "f32le";
    body["encoding"] = "base64";
    body["data"] = base64_encode({raw, packed.size() * sizeof(float)});
    return body.dump();
}

MultiSequenceVolume decode_score_request(const std::string& text) {
    json body;
    try {
        body = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("request is not JSON: ") + e.what());
    }
    try {
        const auto dims = body.at("dims").get<std::vector<std::size_t>>();
        if (dims.size() != 4 || dims[0] != kSequenceCount) throw ValidationError("dims must be [4,D,H,W]");
        if (body.at("order") != "seq,z,y,x" || body.at("dtype") != "f32le" || body.at("encoding") != "base64") {
            throw ValidationError("unsupported order/dtype/encoding");
        }
        const auto bytes = base64_decode(body.at("data").get<std::string>());
        const Dims d{dims[1], dims[2], dims[3]};
        if (bytes.size() != kSequenceCount * d.voxels() * sizeof(float)) {
            throw ValidationError("payload length does not match dims");
        }
        MultiSequenceVolume out;
        for (std::size_t s = 0; s < kSequenceCount; ++s) {
            std::vector<float> data(d.voxels());
            std::memcpy(data.data(), bytes.data() + s * d.voxels() * sizeof(float), d.voxels() * sizeof(float));
            out.set(kAllSequences[s], ScalarVolume(d, std::move(data)));
        }
        return out;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed request: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

namespace {

OracleError transport_error(httplib::Error error, const std::string& endpoint, const std::string& path) {
    const std::string where = endpoint + path + ": " + httplib::to_string(error);
    switch (error) {
        case httplib::Error::ConnectionTimeout:
        case httplib::Error::Read:
        case httplib::Error::Write:
            return OracleError(OracleError::Kind::Timeout, "timeout talking to " + where);
        default:
            return OracleError(OracleError::Kind::Connection, "cannot reach " + where);
    }
}

std::string error_message(const std::string& body) {
    try {
        auto j = json::parse(body);
        if (j.contains("error") && j["error"].is_string()) return j["error"].get<std::string>();
    } catch (const json::exception&) {
    }
    return body.substr(0, 200);
}

double parse_probability(const json& value) {
    if (!value.is_number()) {
        throw OracleError(OracleError::Kind::MalformedResponse, "probability is not a number");
    }
    return value.get<double>();
}

}  // namespace

RemoteOracle::RemoteOracle(RemoteParams params) : params_(std::move(params)) {
    if (params_.endpoint.empty()) throw ValidationError("remote oracle endpoint is empty");
    if (params_.attempts < 1) throw ValidationError("remote oracle needs at least one attempt");
    if (params_.max_in_flight < 1) throw ValidationError("remote oracle max_in_flight must be >= 1");
}

std::string RemoteOracle::identity() const { return "remote(" + params_.endpoint + ")"; }

std::string RemoteOracle::post(const std::string& path, const std::string& body) const {
    auto delay = params_.backoff_base;
    for (std::size_t attempt = 1;; ++attempt) {
        httplib::Client client(params_.endpoint);
        client.set_connection_timeout(params_.timeout);
        client.set_read_timeout(params_.timeout);
        client.set_write_timeout(params_.timeout);
        auto res = client.Post(path, body, "application/json");
        if (res) {
            if (res->status < 200 || res->status >= 300) {
                throw OracleError(OracleError::Kind::HttpStatus,
                                  params_.endpoint + path + " returned " + std::to_string(res->status) +
                                      ": " + error_message(res->body),
                                  res->status);
            }
            return res->body;
        }
        auto error = transport_error(res.error(), params_.endpoint, path);
        if (attempt >= params_.attempts) throw error;
        std::this_thread::sleep_for(delay);
        delay *= 2;
    }
}

std::string RemoteOracle::health() const {
    httplib::Client client(params_.endpoint);
    client.set_connection_timeout(params_.timeout);
    client.set_read_timeout(params_.timeout);
    auto res = client.Get("/v1/health");
    if (!res) throw transport_error(res.error(), params_.endpoint, "/v1/health");
    if (res->status != 200) {
        throw OracleError(OracleError::Kind::HttpStatus,
                          params_.endpoint + "/v1/health returned " + std::to_string(res->status), res->status);
    }
    try {
        auto body = json::parse(res->body);
        if (body.at("status") != "ok") {
            throw OracleError(OracleError::Kind::HttpStatus, "health status is not ok", res->status);
        }
        return body.at("model").get<std::string>();
    } catch (const json::exception& e) {
        throw OracleError(OracleError::Kind::MalformedResponse, std::string("health response: ") + e.what());
    }
}

ClassifierScore RemoteOracle::score(const MultiSequenceVolume& volume) const {
    const auto body = post("/v1/score", encode_score_request(volume));
    double p = 0.0;
    try {
        p = parse_probability(json::parse(body).at("probability"));
    } catch (const json::exception& e) {
        throw OracleError(OracleError::Kind::MalformedResponse, std::string("score response: ") + e.what());
    }
    return ClassifierScore(p);
}

std::vector<ScoreResult> RemoteOracle::score_sequential(std::span<const MultiSequenceVolume> volumes) const {
    std::vector<std::optional<ScoreResult>> slots(volumes.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < volumes.size(); i = next++) {
            try {
                slots[i].emplace(score(volumes[i]));
            } catch (const OracleError& e) {
                slots[i].emplace(e);
            } catch (const std::exception& e) {
                slots[i].emplace(OracleError(OracleError::Kind::Internal, e.what()));
            }
        }
    };
    const std::size_t workers = std::min(params_.max_in_flight, volumes.size());
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    pool.clear();

    std::vector<ScoreResult> out;
    out.reserve(volumes.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

std::vector<ScoreResult> RemoteOracle::score_batch(std::span<const MultiSequenceVolume> volumes) const {
    if (volumes.empty()) return {};
    if (volumes.size() == 1 || !batch_supported_) return score_sequential(volumes);

    std::string body = R"({"items":[)";
    for (std::size_t i = 0; i < volumes.size(); ++i) {
        if (i) body += ',';
        try {
            body += encode_score_request(volumes[i]);
        } catch (const ValidationError&) {
            // Invalid items are reported individually.
            return score_sequential(volumes);
        }
    }
    body += "]}";

    std::string response;
    try {
        response = post("/v1/score_batch", body);
    } catch (const OracleError& e) {
        const int status = e.http_status();
        if (e.kind() == OracleError::Kind::HttpStatus && (status == 404 || status == 405 || status == 501)) {
            batch_supported_ = false;
            return score_sequential(volumes);
        }
        if (e.kind() == OracleError::Kind::HttpStatus && (status == 400 || status == 422)) {
            // One bad item rejects the whole request; isolate it.
            return score_sequential(volumes);
        }
        return std::vector<ScoreResult>(volumes.size(), e);
    }

    std::vector<ScoreResult> out;
    try {
        const auto parsed = json::parse(response).at("probabilities");
        if (!parsed.is_array() || parsed.size() != volumes.size()) {
            throw OracleError(OracleError::Kind::MalformedResponse,
                              "score_batch returned " + std::to_string(parsed.size()) + " probabilities for " +
                                  std::to_string(volumes.size()) + " items");
        }
        for (const auto& p : parsed) {
            try {
                out.emplace_back(ClassifierScore(parse_probability(p)));
            } catch (const OracleError& e) {
                out.emplace_back(e);
            }
        }
    } catch (const json::exception& e) {
        return std::vector<ScoreResult>(
            volumes.size(),
            OracleError(OracleError::Kind::MalformedResponse, std::string("score_batch response: ") + e.what()));
    } catch (const OracleError& e) {
        return std::vector<ScoreResult>(volumes.size(), e);
    }
    return out;
}

}  // namespace relmap
