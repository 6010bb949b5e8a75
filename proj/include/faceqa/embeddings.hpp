#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "faceqa/dataset.hpp"

namespace faceqa {

struct Embedding {
    std::string image_id;
    std::vector<double> vector;
    std::string backend_id;

    friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// A frozen feature extractor. Implementations must be deterministic and safe
/// to call concurrently.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual const std::string& backend_id() const = 0;
    virtual std::size_t dimension() const = 0;
    /// Raw feature vector; throws Error(BackendFailure) on external failures.
    virtual std::vector<double> compute(const FaceTensor& face) const = 0;
};

/// Runs the backend and checks the dimension and finiteness of the result.
Embedding embed(const FaceTensor& face, const EmbeddingBackend& backend, std::string image_id = {});

/// Elementwise `embed`, order preserved. Failures are collected and reported
/// together in a BatchError listing the failing indices.
std::vector<Embedding> embed_batch(std::span<const FaceTensor> faces, const EmbeddingBackend& backend,
                                   std::span<const std::string> image_ids = {}, unsigned threads = 1);

inline constexpr int kStatGrid = 8;
inline constexpr std::size_t kStatCount = kStatGrid * kStatGrid + 6;

/// 8×8 grid of luma block means (row-major), then per-channel means, then
/// per-channel population standard deviations.
std::array<double, kStatCount> face_statistics(const FaceTensor& face);

/// Desk-scale stand-in for a pretrained backbone: a seeded random affine
/// projection of `face_statistics`, L2-normalised. Projection entries and
/// bias are drawn uniform in [-1, 1].
class TestBackend final : public EmbeddingBackend {
public:
    TestBackend(std::size_t dimension, std::uint64_t seed);

    const std::string& backend_id() const override { return id_; }
    std::size_t dimension() const override { return dimension_; }
    std::vector<double> compute(const FaceTensor& face) const override;

    /// Projection of a statistics vector followed by normalisation.
    std::vector<double> project(std::span<const double> statistics) const;

    const std::vector<double>& projection() const noexcept { return projection_; }  // D × 70, row-major
    const std::vector<double>& bias() const noexcept { return bias_; }

private:
    std::size_t dimension_;
    std::string id_;
    std::vector<double> projection_;
    std::vector<double> bias_;
};

std::shared_ptr<const TestBackend> make_test_backend(std::size_t dimension, std::uint64_t seed);

/// image_id -> Embedding for one backend. Single writer; concurrent reads
/// are safe once populated.
class EmbeddingCache {
public:
    EmbeddingCache(std::string backend_id, std::size_t dimension)
        : backend_id_(std::move(backend_id)), dimension_(dimension) {}

    const std::string& backend_id() const noexcept { return backend_id_; }
    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return entries_.size(); }

    /// Throws BackendMismatch or DimensionMismatch for foreign embeddings.
    void store(const Embedding& embedding);
    const Embedding* find(const std::string& image_id) const;

    std::string format() const;
    void save(const std::filesystem::path& path) const;
    static EmbeddingCache load(const std::filesystem::path& path, const std::string& backend_id);
    static EmbeddingCache parse(std::string_view text, const std::string& backend_id);

private:
    std::string backend_id_;
    std::size_t dimension_;
    std::map<std::string, Embedding> entries_;
};

/// Cache file name for a backend id inside a cache directory.
std::filesystem::path cache_path(const std::filesystem::path& cache_dir, const std::string& backend_id);

}  // namespace faceqa
