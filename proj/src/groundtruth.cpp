#include "faceqa/groundtruth.hpp"

#include <algorithm>
#include <cmath>

#include "faceqa/common.hpp"
#include "faceqa/kernels.hpp"

namespace faceqa {

double mated_distance(const Embedding& gallery, const Embedding& probe) {
    if (gallery.vector.size() != probe.vector.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    std::to_string(gallery.vector.size()) + ", " + std::to_string(probe.vector.size()));
    }
    if (gallery.backend_id != probe.backend_id) {
        throw Error(ErrorKind::BackendMismatch, gallery.backend_id + ", " + probe.backend_id);
    }
    return std::sqrt(kernels::squared_distance(gallery.vector, probe.vector));
}

NormalizedDistances normalize_distances(std::span<const double> distances) {
    if (distances.empty()) throw Error(ErrorKind::EmptyInput, "no distances");
    for (std::size_t i = 0; i < distances.size(); ++i) {
        if (!std::isfinite(distances[i])) throw Error(ErrorKind::NonFiniteDistance, std::to_string(i));
    }
    const auto [lo, hi] = std::minmax_element(distances.begin(), distances.end());
    NormalizedDistances out;
    out.normalization = {*lo, *hi, *lo == *hi};
    out.quality.reserve(distances.size());
    const double range = *hi - *lo;
    for (double d : distances) {
        out.quality.push_back(out.normalization.degenerate ? 0.5 : 1.0 - (d - *lo) / range);
    }
    return out;
}

GroundtruthSet build_groundtruth(const DatasetManifest& manifest, const GalleryMap& gallery,
                                 const EmbeddingTable& embeddings, const GroundtruthOptions& options) {
    auto lookup = [&](const std::string& id) -> const Embedding& {
        auto it = embeddings.find(id);
        if (it == embeddings.end()) throw Error(ErrorKind::Internal, "no embedding for " + id);
        return it->second;
    };

    std::vector<std::string> probe_ids;
    std::vector<double> distances;
    std::string backend_id;
    for (const auto& e : manifest.entries) {
        auto g = gallery.find(e.subject_id);
        if (g == gallery.end()) throw Error(ErrorKind::MissingGallery, e.subject_id);
        if (g->second == e.image_id) continue;
        const auto& probe = lookup(e.image_id);
        distances.push_back(mated_distance(lookup(g->second), probe));
        probe_ids.push_back(e.image_id);
        backend_id = probe.backend_id;
    }

    GroundtruthSet set;
    if (!distances.empty()) {
        auto normalized = normalize_distances(distances);
        set.normalization = normalized.normalization;
        for (std::size_t i = 0; i < probe_ids.size(); ++i) {
            set.labels.push_back({probe_ids[i], normalized.quality[i]});
        }
    }
    if (options.include_gallery) {
        for (const auto& [subject, image] : gallery) {
            if (manifest.find(image) != nullptr) set.labels.push_back({image, 1.0});
        }
    }
    if (backend_id.empty() && !embeddings.empty()) backend_id = embeddings.begin()->second.backend_id;
    set.backend_id = backend_id;
    return set;
}

GroundtruthSet build_groundtruth(const DatasetManifest& manifest, const GalleryMap& gallery,
                                 const EmbeddingBackend& backend, const FaceLoader& load_face,
                                 const GroundtruthOptions& options) {
    EmbeddingTable table;
    for (const auto& e : manifest.entries) {
        if (!gallery.contains(e.subject_id)) throw Error(ErrorKind::MissingGallery, e.subject_id);
        table.emplace(e.image_id, embed(load_face(e), backend, e.image_id));
    }
    auto set = build_groundtruth(manifest, gallery, table, options);
    set.backend_id = backend.backend_id();
    return set;
}

std::string format_groundtruth(const GroundtruthSet& set) {
    std::string out = "# backend_id=" + set.backend_id + " d_min=" + format_g9(set.normalization.d_min) +
                      " d_max=" + format_g9(set.normalization.d_max) + "\n";
    for (const auto& l : set.labels) out += l.image_id + '\t' + format_g9(l.quality) + '\n';
    return out;
}

void save_groundtruth(const std::filesystem::path& path, const GroundtruthSet& set) {
    write_text_file(path, format_groundtruth(set));
}

GroundtruthSet parse_groundtruth(std::string_view text) {
    auto lines = split(text, '\n');
    GroundtruthSet set;
    try {
        if (lines.empty() || !lines[0].starts_with("# ")) throw std::invalid_argument("header");
        for (auto token : split(lines[0].substr(2), ' ')) {
            const auto eq = token.find('=');
            if (eq == std::string_view::npos) throw std::invalid_argument("header token");
            const auto key = token.substr(0, eq);
            const auto value = token.substr(eq + 1);
            if (key == "backend_id") set.backend_id = value;
            else if (key == "d_min") set.normalization.d_min = parse_double(value);
            else if (key == "d_max") set.normalization.d_max = parse_double(value);
        }
    } catch (const std::invalid_argument&) {
        throw Error(ErrorKind::CorruptFile, "groundtruth line 1");
    }
    set.normalization.degenerate = set.normalization.d_min == set.normalization.d_max;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto f = split(lines[i], '\t');
        try {
            if (f.size() != 2) throw std::invalid_argument("fields");
            set.labels.push_back({std::string(f[0]), parse_double(f[1])});
        } catch (const std::invalid_argument&) {
            throw Error(ErrorKind::CorruptFile, "groundtruth line " + std::to_string(i + 1));
        }
    }
    return set;
}

GroundtruthSet load_groundtruth(const std::filesystem::path& path) {
    return parse_groundtruth(read_text_file(path));
}

}  // namespace faceqa
