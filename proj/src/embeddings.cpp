#include "faceqa/embeddings.hpp"

#include <cmath>
#include <mutex>

#include "faceqa/common.hpp"
#include "faceqa/kernels.hpp"

namespace faceqa {

Embedding embed(const FaceTensor& face, const EmbeddingBackend& backend, std::string image_id) {
    auto vector = backend.compute(face);
    if (vector.size() != backend.dimension()) {
        throw Error(ErrorKind::BackendFailure, backend.backend_id() + ": expected dimension " +
                                                   std::to_string(backend.dimension()) + ", got " +
                                                   std::to_string(vector.size()));
    }
    for (double v : vector) {
        if (!std::isfinite(v)) throw Error(ErrorKind::BackendFailure, backend.backend_id() + ": non-finite output");
    }
    return {std::move(image_id), std::move(vector), backend.backend_id()};
}

std::vector<Embedding> embed_batch(std::span<const FaceTensor> faces, const EmbeddingBackend& backend,
                                   std::span<const std::string> image_ids, unsigned threads) {
    std::vector<Embedding> out(faces.size());
    std::vector<std::string> messages(faces.size());
    std::vector<char> failed(faces.size(), 0);
    parallel_for(faces.size(), threads, [&](std::size_t i) {
        try {
            out[i] = embed(faces[i], backend, i < image_ids.size() ? image_ids[i] : std::string{});
        } catch (const std::exception& e) {
            failed[i] = 1;
            messages[i] = e.what();
        }
    });
    std::vector<std::size_t> indices;
    std::string detail;
    for (std::size_t i = 0; i < faces.size(); ++i) {
        if (!failed[i]) continue;
        indices.push_back(i);
        if (!detail.empty()) detail += "; ";
        detail += "index " + std::to_string(i) + ": " + messages[i];
    }
    if (!indices.empty()) throw BatchError(ErrorKind::BackendFailure, std::move(indices), std::move(detail));
    return out;
}

std::array<double, kStatCount> face_statistics(const FaceTensor& face) {
    const auto& im = face.image;
    std::array<double, kStatCount> stats{};
    const auto luma = luminance(im);

    for (int gy = 0; gy < kStatGrid; ++gy) {
        const int y0 = gy * im.height / kStatGrid;
        const int y1 = (gy + 1) * im.height / kStatGrid;
        for (int gx = 0; gx < kStatGrid; ++gx) {
            const int x0 = gx * im.width / kStatGrid;
            const int x1 = (gx + 1) * im.width / kStatGrid;
            double sum = 0.0;
            for (int y = y0; y < y1; ++y) {
                const auto row = std::span<const float>(luma).subspan(static_cast<std::size_t>(y) * im.width + x0,
                                                                       static_cast<std::size_t>(x1 - x0));
                sum += kernels::moments(row).sum;
            }
            const int count = (y1 - y0) * (x1 - x0);
            stats[gy * kStatGrid + gx] = count > 0 ? sum / count : 0.0;
        }
    }

    const std::size_t n = static_cast<std::size_t>(im.height) * im.width;
    std::vector<float> plane(n);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < n; ++i) plane[i] = im.data[i * im.channels + std::min(c, im.channels - 1)];
        const auto m = kernels::moments(plane);
        const double mean = m.sum / static_cast<double>(n);
        const double var = std::max(0.0, m.sum_sq / static_cast<double>(n) - mean * mean);
        stats[kStatGrid * kStatGrid + c] = mean;
        stats[kStatGrid * kStatGrid + 3 + c] = std::sqrt(var);
    }
    return stats;
}

TestBackend::TestBackend(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension),
      id_("test-d" + std::to_string(dimension) + "-s" + std::to_string(seed)),
      projection_(dimension * kStatCount),
      bias_(dimension) {
    if (dimension == 0) throw Error(ErrorKind::InvalidConfig, "backend dimension must be positive");
    Rng rng(seed);
    for (auto& w : projection_) w = rng.uniform(-1.0, 1.0);
    for (auto& b : bias_) b = rng.uniform(-1.0, 1.0);
}

std::vector<double> TestBackend::project(std::span<const double> statistics) const {
    if (statistics.size() != kStatCount) {
        throw Error(ErrorKind::DimensionMismatch, std::to_string(statistics.size()));
    }
    std::vector<double> out(dimension_);
    for (std::size_t d = 0; d < dimension_; ++d) {
        out[d] = kernels::dot(std::span<const double>(projection_).subspan(d * kStatCount, kStatCount), statistics) +
                 bias_[d];
    }
    const double norm = std::sqrt(kernels::dot(out, out));
    if (norm > 0.0) {
        for (auto& v : out) v /= norm;
    }
    return out;
}

std::vector<double> TestBackend::compute(const FaceTensor& face) const {
    const auto stats = face_statistics(face);
    return project(stats);
}

std::shared_ptr<const TestBackend> make_test_backend(std::size_t dimension, std::uint64_t seed) {
    return std::make_shared<const TestBackend>(dimension, seed);
}

// ---------------------------------------------------------------------------

void EmbeddingCache::store(const Embedding& embedding) {
    if (embedding.backend_id != backend_id_) {
        throw Error(ErrorKind::BackendMismatch, backend_id_ + ", " + embedding.backend_id);
    }
    if (embedding.vector.size() != dimension_) {
        throw Error(ErrorKind::DimensionMismatch,
                    std::to_string(dimension_) + ", " + std::to_string(embedding.vector.size()));
    }
    entries_[embedding.image_id] = embedding;
}

const Embedding* EmbeddingCache::find(const std::string& image_id) const {
    auto it = entries_.find(image_id);
    return it == entries_.end() ? nullptr : &it->second;
}

std::string EmbeddingCache::format() const {
    std::string out = "# backend_id=" + backend_id_ + " dimension=" + std::to_string(dimension_) + "\n";
    for (const auto& [id, e] : entries_) {
        out += id;
        out += '\t';
        for (std::size_t i = 0; i < e.vector.size(); ++i) {
            if (i) out += ',';
            out += format_exact(e.vector[i]);
        }
        out += '\n';
    }
    return out;
}

void EmbeddingCache::save(const std::filesystem::path& path) const { write_text_file(path, format()); }

EmbeddingCache EmbeddingCache::parse(std::string_view text, const std::string& backend_id) {
    auto lines = split(text, '\n');
    const std::string prefix = "# backend_id=";
    if (lines.empty() || !lines[0].starts_with(prefix)) throw Error(ErrorKind::CorruptCache, "line 1");
    const auto header = lines[0].substr(prefix.size());
    const auto sep = header.rfind(" dimension=");
    if (sep == std::string_view::npos) throw Error(ErrorKind::CorruptCache, "line 1");
    const std::string found(header.substr(0, sep));
    std::size_t dimension = 0;
    try {
        dimension = static_cast<std::size_t>(parse_int(header.substr(sep + 11)));
    } catch (const std::invalid_argument&) {
        throw Error(ErrorKind::CorruptCache, "line 1");
    }
    if (found != backend_id) throw Error(ErrorKind::BackendMismatch, backend_id + ", " + found);

    EmbeddingCache cache(found, dimension);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            if (i + 1 == lines.size()) break;
            throw Error(ErrorKind::CorruptCache, "line " + std::to_string(i + 1));
        }
        auto fields = split(lines[i], '\t');
        // a file cut mid-row has no trailing newline and a short vector
        const bool last = i + 1 == lines.size();
        if (fields.size() != 2 || last) throw Error(ErrorKind::CorruptCache, "line " + std::to_string(i + 1));
        Embedding e{std::string(fields[0]), {}, found};
        try {
            for (auto v : split(fields[1], ',')) e.vector.push_back(parse_double(v));
        } catch (const std::invalid_argument&) {
            throw Error(ErrorKind::CorruptCache, "line " + std::to_string(i + 1));
        }
        if (e.vector.size() != dimension) throw Error(ErrorKind::CorruptCache, "line " + std::to_string(i + 1));
        cache.entries_[e.image_id] = std::move(e);
    }
    return cache;
}

EmbeddingCache EmbeddingCache::load(const std::filesystem::path& path, const std::string& backend_id) {
    return parse(read_text_file(path), backend_id);
}

std::filesystem::path cache_path(const std::filesystem::path& cache_dir, const std::string& backend_id) {
    std::string name;
    for (char c : backend_id) {
        const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        name += keep ? c : '_';
    }
    return cache_dir / ("embeddings_" + name + "_" + hex64(fnv1a(backend_id)).substr(0, 8) + ".tsv");
}

}  // namespace faceqa
