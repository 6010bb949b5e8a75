#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "faceqa/image.hpp"

namespace faceqa {

enum class Role { Unassigned, Gallery, Probe };
enum class Split { Unsplit, Train, Test };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view s);

struct ImageRecord {
    std::string subject_id;
    std::string image_id;
    std::string path;  // as written in the manifest
    Role role = Role::Unassigned;

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct DatasetManifest {
    std::vector<ImageRecord> entries;  // sorted by (subject_id, image_id)
    Split split = Split::Unsplit;
    std::filesystem::path base_dir;    // relative paths resolve against this

    std::vector<std::string> subjects() const;
    const ImageRecord* find(std::string_view image_id) const;
    std::filesystem::path resolve(const ImageRecord& record) const;
};

inline constexpr std::string_view kManifestHeader = "subject_id\timage_id\tpath\trole";

DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(std::string_view text, std::filesystem::path base_dir = {});
std::string format_manifest(const DatasetManifest& manifest);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Sorts entries canonically and rejects duplicate image ids.
void canonicalize(DatasetManifest& manifest);

/// Seeded permutation of the sorted subject list: the first `train_subjects`
/// go to train, the next `test_subjects` to test.
std::pair<DatasetManifest, DatasetManifest> partition_subjects(const DatasetManifest& manifest,
                                                               std::size_t train_subjects,
                                                               std::size_t test_subjects,
                                                               std::uint64_t seed);

Image load_image(const DatasetManifest& manifest, const ImageRecord& record);

// ---------------------------------------------------------------------------
// Face preprocessing

inline constexpr int kFaceSize = 224;
inline constexpr double kEyeRow = 0.35 * kFaceSize;
inline constexpr double kLeftEyeCol = 0.30 * kFaceSize;
inline constexpr double kRightEyeCol = 0.70 * kFaceSize;

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Eye centres in image pixel coordinates; `left` is the eye with the smaller x.
struct EyeLandmarks {
    Point2 left;
    Point2 right;
    friend bool operator==(const EyeLandmarks&, const EyeLandmarks&) = default;
};

class FaceDetector {
public:
    virtual ~FaceDetector() = default;
    virtual std::optional<EyeLandmarks> detect(const Image& image, std::string_view image_id) const = 0;
};

/// Landmarks read from a TSV sidecar keyed by image id.
class SidecarDetector final : public FaceDetector {
public:
    SidecarDetector() = default;
    explicit SidecarDetector(std::map<std::string, EyeLandmarks, std::less<>> landmarks)
        : landmarks_(std::move(landmarks)) {}

    static SidecarDetector load(const std::filesystem::path& path);

    std::optional<EyeLandmarks> detect(const Image& image, std::string_view image_id) const override;
    std::size_t size() const noexcept { return landmarks_.size(); }

private:
    std::map<std::string, EyeLandmarks, std::less<>> landmarks_;
};

inline constexpr std::string_view kLandmarkHeader =
    "image_id\tleft_eye_x\tleft_eye_y\tright_eye_x\tright_eye_y";

std::string format_landmarks(const std::map<std::string, EyeLandmarks, std::less<>>& landmarks);

/// Similarity transform dst = a * src + t in complex form (a = scale·e^{iθ}).
struct SimilarityTransform {
    double a_re = 1.0;
    double a_im = 0.0;
    double t_x = 0.0;
    double t_y = 0.0;

    Point2 apply(Point2 p) const;
    Point2 invert(Point2 q) const;
};

/// Transform that maps the eyes onto the canonical template positions.
std::optional<SimilarityTransform> eye_alignment(const EyeLandmarks& eyes);

struct FaceTensor {
    Image image;  // kFaceSize × kFaceSize × 3, values in [0,1]
    bool aligned = false;
    std::optional<EyeLandmarks> source_eyes;  // landmarks in the original image
};

/// Aligns on the detector's eye landmarks when available; otherwise centre
/// square crop and bilinear resize, flagged as unaligned. `detector` may be null.
FaceTensor preprocess_face(const Image& image, const FaceDetector* detector, std::string_view image_id = {});

bool is_valid_face(const FaceTensor& face);

}  // namespace faceqa
