#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "faceqa/compliance.hpp"
#include "faceqa/embeddings.hpp"

namespace faceqa {

/// Euclidean distance; throws DimensionMismatch or BackendMismatch.
double mated_distance(const Embedding& gallery, const Embedding& probe);

struct Normalization {
    double d_min = 0.0;
    double d_max = 0.0;
    bool degenerate = false;  // d_min == d_max, every label set to 0.5
};

struct NormalizedDistances {
    std::vector<double> quality;
    Normalization normalization;
};

/// q_i = 1 - (d_i - d_min) / (d_max - d_min) over the whole input.
NormalizedDistances normalize_distances(std::span<const double> distances);

struct QualityLabel {
    std::string image_id;
    double quality = 0.0;
    friend bool operator==(const QualityLabel&, const QualityLabel&) = default;
};

struct GroundtruthSet {
    std::vector<QualityLabel> labels;
    Normalization normalization;
    std::string backend_id;
};

struct GroundtruthOptions {
    /// Append each gallery image with label 1.0 (ablation; excluded by default).
    bool include_gallery = false;
};

using EmbeddingTable = std::map<std::string, Embedding, std::less<>>;

/// Labels every probe of `manifest` from its distance to the subject's gallery
/// embedding, normalised globally over all probes.
GroundtruthSet build_groundtruth(const DatasetManifest& manifest, const GalleryMap& gallery,
                                 const EmbeddingTable& embeddings, const GroundtruthOptions& options = {});

using FaceLoader = std::function<FaceTensor(const ImageRecord&)>;

GroundtruthSet build_groundtruth(const DatasetManifest& manifest, const GalleryMap& gallery,
                                 const EmbeddingBackend& backend, const FaceLoader& load_face,
                                 const GroundtruthOptions& options = {});

std::string format_groundtruth(const GroundtruthSet& set);
void save_groundtruth(const std::filesystem::path& path, const GroundtruthSet& set);
GroundtruthSet parse_groundtruth(std::string_view text);
GroundtruthSet load_groundtruth(const std::filesystem::path& path);

}  // namespace faceqa
