#include "faceqa/http_adapters.hpp"

#include <httplib.h>

#include <json.hpp>

#include "faceqa/common.hpp"

namespace faceqa {

namespace {

std::string to_string_bytes(const std::vector<std::uint8_t>& bytes) {
    return std::string(bytes.begin(), bytes.end());
}

httplib::Client make_client(const HttpEndpoint& endpoint, int timeout_seconds) {
    httplib::Client client(endpoint.base);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);
    client.set_write_timeout(timeout_seconds, 0);
    return client;
}

}  // namespace

HttpEndpoint HttpEndpoint::parse(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos || (url.compare(0, scheme, "http") != 0 && url.compare(0, scheme, "https") != 0)) {
        throw Error(ErrorKind::InvalidConfig, "not an http(s) url: " + url);
    }
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

HttpEmbeddingBackend::HttpEmbeddingBackend(std::string url, std::size_t dimension, int timeout_seconds)
    : endpoint_(HttpEndpoint::parse(url)),
      dimension_(dimension),
      id_("http-d" + std::to_string(dimension) + "-" + url),
      timeout_seconds_(timeout_seconds) {
    if (dimension == 0) throw Error(ErrorKind::InvalidConfig, "backend dimension must be positive");
}

std::vector<double> HttpEmbeddingBackend::compute(const FaceTensor& face) const {
    auto client = make_client(endpoint_, timeout_seconds_);
    auto res = client.Post(endpoint_.path, to_string_bytes(encode_png(face.image)), "image/png");
    if (!res) throw Error(ErrorKind::BackendFailure, id_ + ": " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(ErrorKind::BackendFailure, id_ + ": HTTP " + std::to_string(res->status));
    try {
        const auto body = nlohmann::json::parse(res->body);
        return body.at("vector").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::BackendFailure, id_ + ": bad response: " + e.what());
    }
}

HttpComparator::HttpComparator(std::string url, std::string api_key, int timeout_seconds)
    : url_(std::move(url)), endpoint_(HttpEndpoint::parse(url_)), api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {}

double HttpComparator::raw_score(const FaceTensor& a, const FaceTensor& b) const {
    auto client = make_client(endpoint_, timeout_seconds_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("X-Api-Key", api_key_);
    httplib::MultipartFormDataItems items{
        {"image_a", to_string_bytes(encode_png(a.image)), "image_a.png", "image/png"},
        {"image_b", to_string_bytes(encode_png(b.image)), "image_b.png", "image/png"},
    };
    auto res = client.Post(endpoint_.path, headers, items);
    if (!res) throw Error(ErrorKind::ComparatorFailure, url_ + ": " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(ErrorKind::ComparatorFailure, url_ + ": HTTP " + std::to_string(res->status));
    try {
        return nlohmann::json::parse(res->body).at("score").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ComparatorFailure, url_ + ": bad response: " + e.what());
    }
}

}  // namespace faceqa
