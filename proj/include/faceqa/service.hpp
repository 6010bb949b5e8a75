#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "faceqa/qualitymodel.hpp"

namespace httplib {
class Server;
}

namespace faceqa {

struct ServiceReply {
    int status = 200;
    std::string body;
};

/// Stateless scoring endpoint:
///   POST /v1/quality  (PNG/JPEG body) -> {"quality": q, "aligned": bool}
///   GET  /v1/health                   -> 200 once a checkpoint is loaded, else 503
class QualityService {
public:
    /// Throws BackendMismatch if the checkpoint was trained on another backend.
    QualityService(std::shared_ptr<const EmbeddingBackend> feature_backend, std::optional<Checkpoint> checkpoint,
                   std::shared_ptr<const FaceDetector> detector = nullptr);

    ServiceReply health() const;
    ServiceReply quality(std::string_view body) const;

    void mount(httplib::Server& server) const;

private:
    std::shared_ptr<const EmbeddingBackend> feature_backend_;
    std::optional<Checkpoint> checkpoint_;
    std::shared_ptr<const FaceDetector> detector_;
};

}  // namespace faceqa
