#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "faceqa/dataset.hpp"

namespace faceqa {

// Six portrait-compliance proxies, each scored in [0,100]. The aggregate is
// their unweighted mean.
namespace compliance_test {
inline constexpr const char* kSharpness = "sharpness";
inline constexpr const char* kBrightness = "brightness";
inline constexpr const char* kContrast = "contrast";
inline constexpr const char* kSaturationSanity = "saturation_sanity";
inline constexpr const char* kPoseFrontality = "pose_frontality";
inline constexpr const char* kEyeResolution = "eye_resolution";
}  // namespace compliance_test

struct ComplianceReport {
    std::string image_id;
    std::map<std::string, double> test_scores;
    double aggregate = 0.0;

    friend bool operator==(const ComplianceReport&, const ComplianceReport&) = default;
};

// Calibration curves, exposed for tests.
inline constexpr double kSharpnessReference = 0.01;
inline constexpr double kContrastReference = 0.25;
inline constexpr double kMaxRollDegrees = 30.0;
inline constexpr double kEyeDistanceReference = 60.0;
inline constexpr double kNeutralScore = 50.0;

double sharpness_score(double laplacian_variance);
double brightness_score(double mean_luma);
double contrast_score(double std_luma);
double pose_frontality_score(const EyeLandmarks& eyes);
double eye_resolution_score(const EyeLandmarks& eyes);

/// Variance of the 3×3 4-neighbour Laplacian over interior pixels of a luma plane.
double laplacian_variance(std::span<const float> luma, int height, int width);

/// True when any pixel has channels that differ by more than one 8-bit step.
bool has_color(const Image& image);

ComplianceReport run_compliance_tests(const FaceTensor& face, std::string image_id = {});

using GalleryMap = std::map<std::string, std::string>;  // subject_id -> image_id

/// Per subject, the image with the highest aggregate (ties: smallest image id).
/// Updates roles in `manifest`: chosen -> gallery, others -> probe.
GalleryMap select_gallery(DatasetManifest& manifest, std::span<const ComplianceReport> reports);

inline constexpr const char* kAggregateRow = "aggregate";

std::string format_reports(std::span<const ComplianceReport> reports);
void save_reports(const std::filesystem::path& path, std::span<const ComplianceReport> reports);
std::vector<ComplianceReport> load_reports(const std::filesystem::path& path);

std::string format_gallery(const GalleryMap& gallery);
void save_gallery(const std::filesystem::path& path, const GalleryMap& gallery);
GalleryMap load_gallery(const std::filesystem::path& path);

}  // namespace faceqa
