#include "faceqa/compliance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "faceqa/common.hpp"
#include "faceqa/kernels.hpp"

namespace faceqa {

namespace {

double clamp100(double v) { return std::clamp(v, 0.0, 100.0); }

}  // namespace

double sharpness_score(double laplacian_variance) {
    return clamp100(100.0 * std::min(1.0, laplacian_variance / kSharpnessReference));
}

double brightness_score(double mean_luma) {
    return clamp100(100.0 * (1.0 - 2.0 * std::abs(mean_luma - 0.5)));
}

double contrast_score(double std_luma) {
    return clamp100(100.0 * std::min(1.0, std_luma / kContrastReference));
}

double pose_frontality_score(const EyeLandmarks& eyes) {
    double dx = eyes.right.x - eyes.left.x;
    double dy = eyes.right.y - eyes.left.y;
    if (dx < 0) {
        dx = -dx;
        dy = -dy;
    }
    const double roll = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
    return clamp100(100.0 * (1.0 - std::abs(roll) / kMaxRollDegrees));
}

double eye_resolution_score(const EyeLandmarks& eyes) {
    const double d = std::hypot(eyes.right.x - eyes.left.x, eyes.right.y - eyes.left.y);
    return clamp100(100.0 * std::min(1.0, d / kEyeDistanceReference));
}

double laplacian_variance(std::span<const float> luma, int height, int width) {
    if (height < 3 || width < 3) return 0.0;
    const auto& k = kernels::active();
    std::vector<float> response(static_cast<std::size_t>(height - 2) * (width - 2));
    for (int y = 1; y + 1 < height; ++y) {
        const float* up = luma.data() + static_cast<std::size_t>(y - 1) * width;
        k.laplacian_row(up, up + width, up + 2 * width, &response[static_cast<std::size_t>(y - 1) * (width - 2)],
                        static_cast<std::size_t>(width));
    }
    const auto m = k.moments(response.data(), response.size());
    const double n = static_cast<double>(response.size());
    const double mean = m.sum / n;
    return std::max(0.0, m.sum_sq / n - mean * mean);
}

bool has_color(const Image& image) {
    if (image.channels < 3) return false;
    constexpr float step = 1.0f / 255.0f;
    for (std::size_t i = 0; i + 2 < image.data.size(); i += image.channels) {
        const float r = image.data[i], g = image.data[i + 1], b = image.data[i + 2];
        if (std::max({r, g, b}) - std::min({r, g, b}) > step) return true;
    }
    return false;
}

ComplianceReport run_compliance_tests(const FaceTensor& face, std::string image_id) {
    namespace t = compliance_test;
    const auto& im = face.image;
    const auto luma = luminance(im);
    const auto m = kernels::moments(luma);
    const double n = static_cast<double>(luma.size());
    const double mean = m.sum / n;
    const double std_luma = std::sqrt(std::max(0.0, m.sum_sq / n - mean * mean));

    ComplianceReport report;
    report.image_id = std::move(image_id);
    auto& s = report.test_scores;
    s[t::kSharpness] = sharpness_score(laplacian_variance(luma, im.height, im.width));
    s[t::kBrightness] = brightness_score(mean);
    s[t::kContrast] = contrast_score(std_luma);
    s[t::kSaturationSanity] = has_color(im) ? 100.0 : kNeutralScore;
    if (face.source_eyes) {
        s[t::kPoseFrontality] = pose_frontality_score(*face.source_eyes);
        s[t::kEyeResolution] = eye_resolution_score(*face.source_eyes);
    } else {
        s[t::kPoseFrontality] = kNeutralScore;
        s[t::kEyeResolution] = kNeutralScore;
    }
    double total = 0.0;
    for (const auto& [name, score] : s) total += score;
    report.aggregate = total / static_cast<double>(s.size());
    return report;
}

GalleryMap select_gallery(DatasetManifest& manifest, std::span<const ComplianceReport> reports) {
    std::map<std::string_view, const ComplianceReport*> by_id;
    for (const auto& r : reports) by_id[r.image_id] = &r;

    GalleryMap gallery;
    std::map<std::string, double> best;
    for (const auto& e : manifest.entries) {
        auto it = by_id.find(e.image_id);
        if (it == by_id.end()) throw Error(ErrorKind::MissingReport, e.image_id);
        const double score = it->second->aggregate;
        auto g = gallery.find(e.subject_id);
        if (g == gallery.end()) {
            gallery[e.subject_id] = e.image_id;
            best[e.subject_id] = score;
            continue;
        }
        double& current = best[e.subject_id];
        if (score > current || (score == current && e.image_id < g->second)) {
            g->second = e.image_id;
            current = score;
        }
    }
    for (auto& e : manifest.entries) {
        e.role = gallery.at(e.subject_id) == e.image_id ? Role::Gallery : Role::Probe;
    }
    return gallery;
}

std::string format_reports(std::span<const ComplianceReport> reports) {
    std::string out = "image_id\ttest_name\tscore\n";
    for (const auto& r : reports) {
        for (const auto& [name, score] : r.test_scores) {
            out += r.image_id + '\t' + name + '\t' + format_g9(score) + '\n';
        }
        out += r.image_id + '\t' + kAggregateRow + '\t' + format_g9(r.aggregate) + '\n';
    }
    return out;
}

void save_reports(const std::filesystem::path& path, std::span<const ComplianceReport> reports) {
    write_text_file(path, format_reports(reports));
}

std::vector<ComplianceReport> load_reports(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    auto lines = split(text, '\n');
    if (lines.empty() || lines.front() != "image_id\ttest_name\tscore") {
        throw Error(ErrorKind::CorruptFile, path.string() + ": line 1");
    }
    std::vector<ComplianceReport> reports;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto f = split(lines[i], '\t');
        const std::string where = path.string() + ": line " + std::to_string(i + 1);
        if (f.size() != 3) throw Error(ErrorKind::CorruptFile, where);
        double value = 0.0;
        try {
            value = parse_double(f[2]);
        } catch (const std::invalid_argument&) {
            throw Error(ErrorKind::CorruptFile, where);
        }
        if (reports.empty() || reports.back().image_id != f[0]) {
            reports.push_back({std::string(f[0]), {}, 0.0});
        }
        if (f[1] == kAggregateRow) reports.back().aggregate = value;
        else reports.back().test_scores[std::string(f[1])] = value;
    }
    return reports;
}

std::string format_gallery(const GalleryMap& gallery) {
    std::string out = "subject_id\timage_id\n";
    for (const auto& [subject, image] : gallery) out += subject + '\t' + image + '\n';
    return out;
}

void save_gallery(const std::filesystem::path& path, const GalleryMap& gallery) {
    write_text_file(path, format_gallery(gallery));
}

GalleryMap load_gallery(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    auto lines = split(text, '\n');
    if (lines.empty() || lines.front() != "subject_id\timage_id") {
        throw Error(ErrorKind::CorruptFile, path.string() + ": line 1");
    }
    GalleryMap gallery;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto f = split(lines[i], '\t');
        if (f.size() != 2) throw Error(ErrorKind::CorruptFile, path.string() + ": line " + std::to_string(i + 1));
        gallery[std::string(f[0])] = std::string(f[1]);
    }
    return gallery;
}

}  // namespace faceqa
