#include "faceqa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "faceqa/common.hpp"

namespace faceqa {

namespace {

std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

}  // namespace

std::string_view to_string(Role role) {
    switch (role) {
        case Role::Gallery: return "gallery";
        case Role::Probe: return "probe";
        default: return "unassigned";
    }
}

std::optional<Role> parse_role(std::string_view s) {
    if (s == "unassigned") return Role::Unassigned;
    if (s == "gallery") return Role::Gallery;
    if (s == "probe") return Role::Probe;
    return std::nullopt;
}

std::vector<std::string> DatasetManifest::subjects() const {
    std::set<std::string> unique;
    for (const auto& e : entries) unique.insert(e.subject_id);
    return {unique.begin(), unique.end()};
}

const ImageRecord* DatasetManifest::find(std::string_view image_id) const {
    for (const auto& e : entries) {
        if (e.image_id == image_id) return &e;
    }
    return nullptr;
}

std::filesystem::path DatasetManifest::resolve(const ImageRecord& record) const {
    std::filesystem::path p(record.path);
    if (p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

void canonicalize(DatasetManifest& manifest) {
    std::sort(manifest.entries.begin(), manifest.entries.end(), [](const auto& a, const auto& b) {
        return std::tie(a.subject_id, a.image_id) < std::tie(b.subject_id, b.image_id);
    });
    std::set<std::string_view> seen;
    for (const auto& e : manifest.entries) {
        if (!seen.insert(e.image_id).second) throw Error(ErrorKind::DuplicateImageId, e.image_id);
    }
}

DatasetManifest parse_manifest(std::string_view text, std::filesystem::path base_dir) {
    DatasetManifest manifest;
    manifest.base_dir = std::move(base_dir);
    auto lines = split(text, '\n');
    if (lines.empty() || strip_cr(lines.front()) != kManifestHeader) {
        throw Error(ErrorKind::MalformedManifest, "line 1");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto line = strip_cr(lines[i]);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(i + 1);
        auto fields = split(line, '\t');
        if (fields.size() != 4 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
            throw Error(ErrorKind::MalformedManifest, where);
        }
        auto role = parse_role(fields[3]);
        if (!role) throw Error(ErrorKind::MalformedManifest, where);
        manifest.entries.push_back(
            {std::string(fields[0]), std::string(fields[1]), std::string(fields[2]), *role});
    }
    canonicalize(manifest);
    return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw Error(ErrorKind::MissingFile, path.string());
    return parse_manifest(read_text_file(path), std::filesystem::absolute(path).parent_path());
}

std::string format_manifest(const DatasetManifest& manifest) {
    std::string out(kManifestHeader);
    out += '\n';
    for (const auto& e : manifest.entries) {
        out += e.subject_id;
        out += '\t';
        out += e.image_id;
        out += '\t';
        out += e.path;
        out += '\t';
        out += to_string(e.role);
        out += '\n';
    }
    return out;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    write_text_file(path, format_manifest(manifest));
}

std::pair<DatasetManifest, DatasetManifest> partition_subjects(const DatasetManifest& manifest,
                                                               std::size_t train_subjects,
                                                               std::size_t test_subjects,
                                                               std::uint64_t seed) {
    auto subjects = manifest.subjects();
    if (train_subjects + test_subjects > subjects.size()) {
        throw Error(ErrorKind::InsufficientSubjects, std::to_string(subjects.size()) + ", " +
                                                         std::to_string(train_subjects + test_subjects));
    }
    Rng rng(seed);
    rng.shuffle(subjects);
    std::set<std::string> train_set(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(train_subjects));
    std::set<std::string> test_set(subjects.begin() + static_cast<std::ptrdiff_t>(train_subjects),
                                   subjects.begin() + static_cast<std::ptrdiff_t>(train_subjects + test_subjects));

    DatasetManifest train{{}, Split::Train, manifest.base_dir};
    DatasetManifest test{{}, Split::Test, manifest.base_dir};
    for (const auto& e : manifest.entries) {
        if (train_set.contains(e.subject_id)) train.entries.push_back(e);
        else if (test_set.contains(e.subject_id)) test.entries.push_back(e);
    }
    canonicalize(train);
    canonicalize(test);
    return {std::move(train), std::move(test)};
}

Image load_image(const DatasetManifest& manifest, const ImageRecord& record) {
    return read_image(manifest.resolve(record));
}

// ---------------------------------------------------------------------------

SidecarDetector SidecarDetector::load(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw Error(ErrorKind::MissingFile, path.string());
    const auto text = read_text_file(path);
    auto lines = split(text, '\n');
    if (lines.empty() || strip_cr(lines.front()) != kLandmarkHeader) {
        throw Error(ErrorKind::CorruptFile, path.string() + ": line 1");
    }
    std::map<std::string, EyeLandmarks, std::less<>> landmarks;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto line = strip_cr(lines[i]);
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        try {
            if (fields.size() != 5) throw std::invalid_argument("field count");
            EyeLandmarks eyes{{parse_double(fields[1]), parse_double(fields[2])},
                              {parse_double(fields[3]), parse_double(fields[4])}};
            landmarks[std::string(fields[0])] = eyes;
        } catch (const std::invalid_argument&) {
            throw Error(ErrorKind::CorruptFile, path.string() + ": line " + std::to_string(i + 1));
        }
    }
    return SidecarDetector(std::move(landmarks));
}

std::optional<EyeLandmarks> SidecarDetector::detect(const Image&, std::string_view image_id) const {
    auto it = landmarks_.find(image_id);
    if (it == landmarks_.end()) return std::nullopt;
    return it->second;
}

std::string format_landmarks(const std::map<std::string, EyeLandmarks, std::less<>>& landmarks) {
    std::string out(kLandmarkHeader);
    out += '\n';
    for (const auto& [id, eyes] : landmarks) {
        out += id + '\t' + format_g9(eyes.left.x) + '\t' + format_g9(eyes.left.y) + '\t' +
               format_g9(eyes.right.x) + '\t' + format_g9(eyes.right.y) + '\n';
    }
    return out;
}

Point2 SimilarityTransform::apply(Point2 p) const {
    return {a_re * p.x - a_im * p.y + t_x, a_im * p.x + a_re * p.y + t_y};
}

Point2 SimilarityTransform::invert(Point2 q) const {
    const double dx = q.x - t_x;
    const double dy = q.y - t_y;
    const double norm = a_re * a_re + a_im * a_im;
    // (dx + i dy) / (a_re + i a_im)
    return {(dx * a_re + dy * a_im) / norm, (dy * a_re - dx * a_im) / norm};
}

std::optional<SimilarityTransform> eye_alignment(const EyeLandmarks& eyes) {
    Point2 left = eyes.left;
    Point2 right = eyes.right;
    if (left.x > right.x) std::swap(left, right);
    const double sx = right.x - left.x;
    const double sy = right.y - left.y;
    const double src_norm = sx * sx + sy * sy;
    if (!std::isfinite(src_norm) || src_norm < 1e-12) return std::nullopt;
    const double qx = kRightEyeCol - kLeftEyeCol;
    const double qy = 0.0;
    SimilarityTransform t;
    // a = (q_r - q_l) / (p_r - p_l)
    t.a_re = (qx * sx + qy * sy) / src_norm;
    t.a_im = (qy * sx - qx * sy) / src_norm;
    t.t_x = kLeftEyeCol - (t.a_re * left.x - t.a_im * left.y);
    t.t_y = kEyeRow - (t.a_im * left.x + t.a_re * left.y);
    return t;
}

FaceTensor preprocess_face(const Image& image, const FaceDetector* detector, std::string_view image_id) {
    if (image.empty() || image.height <= 0 || image.width <= 0) {
        throw Error(ErrorKind::EmptyImage, std::string(image_id));
    }
    Image source = image;
    if (source.channels == 1) {
        Image rgb(source.height, source.width, 3);
        for (std::size_t i = 0; i < source.data.size(); ++i) {
            rgb.data[3 * i] = rgb.data[3 * i + 1] = rgb.data[3 * i + 2] = source.data[i];
        }
        source = std::move(rgb);
    }

    FaceTensor face;
    if (detector != nullptr) {
        if (auto eyes = detector->detect(source, image_id)) {
            if (auto transform = eye_alignment(*eyes)) {
                face.image = Image(kFaceSize, kFaceSize, 3);
                for (int y = 0; y < kFaceSize; ++y) {
                    for (int x = 0; x < kFaceSize; ++x) {
                        const Point2 src = transform->invert({static_cast<double>(x), static_cast<double>(y)});
                        for (int c = 0; c < 3; ++c) face.image.at(y, x, c) = sample_bilinear(source, src.y, src.x, c);
                    }
                }
                face.aligned = true;
                face.source_eyes = eyes;
                clamp_unit(face.image);
                return face;
            }
        }
    }

    const int side = std::min(source.height, source.width);
    const int top = (source.height - side) / 2;
    const int left = (source.width - side) / 2;
    face.image = resize_bilinear(crop(source, top, left, side, side), kFaceSize, kFaceSize);
    clamp_unit(face.image);
    return face;
}

bool is_valid_face(const FaceTensor& face) {
    const auto& im = face.image;
    if (im.height != kFaceSize || im.width != kFaceSize || im.channels != 3) return false;
    return std::all_of(im.data.begin(), im.data.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

}  // namespace faceqa
