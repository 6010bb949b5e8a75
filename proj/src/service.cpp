#include "faceqa/service.hpp"

#include <httplib.h>

#include <json.hpp>

#include "faceqa/common.hpp"

namespace faceqa {

namespace {

ServiceReply error_reply(int status, std::string_view message) {
    return {status, nlohmann::json{{"error", message}}.dump()};
}

}  // namespace

QualityService::QualityService(std::shared_ptr<const EmbeddingBackend> feature_backend,
                               std::optional<Checkpoint> checkpoint, std::shared_ptr<const FaceDetector> detector)
    : feature_backend_(std::move(feature_backend)), checkpoint_(std::move(checkpoint)), detector_(std::move(detector)) {
    if (checkpoint_ && checkpoint_->backend_id != feature_backend_->backend_id()) {
        throw Error(ErrorKind::BackendMismatch, checkpoint_->backend_id + ", " + feature_backend_->backend_id());
    }
}

ServiceReply QualityService::health() const {
    if (!checkpoint_) return error_reply(503, "checkpoint not loaded");
    return {200, nlohmann::json{{"status", "ok"}, {"backend_id", checkpoint_->backend_id}}.dump()};
}

ServiceReply QualityService::quality(std::string_view body) const {
    if (!checkpoint_) return error_reply(503, "checkpoint not loaded");
    if (body.empty()) return error_reply(400, "empty body");
    try {
        const auto image = decode_image(
            std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
        const auto face = preprocess_face(image, detector_.get());
        const double q = predict_quality(face, *feature_backend_, *checkpoint_);
        return {200, nlohmann::json{{"quality", q}, {"aligned", face.aligned}}.dump()};
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::DecodeError || e.kind() == ErrorKind::EmptyImage) {
            return error_reply(400, "undecodable image");
        }
        return error_reply(e.exit_code() == 4 ? 502 : 500, e.what());
    }
}

void QualityService::mount(httplib::Server& server) const {
    server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
        const auto reply = health();
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    });
    server.Post("/v1/quality", [this](const httplib::Request& req, httplib::Response& res) {
        const auto reply = quality(req.body);
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    });
}

}  // namespace faceqa
