#pragma once

// Adapters for externally hosted models:
//   embedding backend: POST <url> with PNG bytes  -> {"vector": [...]}
//   comparator:        POST <url> multipart image_a, image_b (PNG) -> {"score": s}

#include <string>

#include "faceqa/embeddings.hpp"
#include "faceqa/evaluation.hpp"

namespace faceqa {

struct HttpEndpoint {
    std::string base;  // scheme://host[:port]
    std::string path;  // starts with '/'

    static HttpEndpoint parse(const std::string& url);
};

class HttpEmbeddingBackend final : public EmbeddingBackend {
public:
    HttpEmbeddingBackend(std::string url, std::size_t dimension, int timeout_seconds = 30);

    const std::string& backend_id() const override { return id_; }
    std::size_t dimension() const override { return dimension_; }
    std::vector<double> compute(const FaceTensor& face) const override;

private:
    HttpEndpoint endpoint_;
    std::size_t dimension_;
    std::string id_;
    int timeout_seconds_;
};

class HttpComparator final : public Comparator {
public:
    /// `api_key`, when non-empty, is sent as the X-Api-Key header.
    HttpComparator(std::string url, std::string api_key, int timeout_seconds = 30);

    std::string id() const override { return "http:" + url_; }
    double raw_score(const FaceTensor& a, const FaceTensor& b) const override;

private:
    std::string url_;
    HttpEndpoint endpoint_;
    std::string api_key_;
    int timeout_seconds_;
};

}  // namespace faceqa
