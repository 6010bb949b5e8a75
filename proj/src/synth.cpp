#include "faceqa/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

#include "faceqa/common.hpp"

namespace faceqa {

namespace {

// Rendering constants. The base image of every subject is brought to the same
// mean luminance and the same 8x8 block contrast on the aligned face, so a
// given degradation strength moves every subject by a similar amount.
constexpr double kTextureAmplitude = 0.12;
constexpr int kIdentityGrid = 24;
constexpr double kIdentityAmplitude = 0.5;
constexpr double kBaseLuma = 0.5;
constexpr double kBaseBlockContrast = 0.08;

// Degradation at strength 1.
constexpr double kMaxBlurSigma = 2.5;
constexpr double kMaxNoiseStd = 0.01;
constexpr double kMaxGlare = 0.8;
constexpr double kGlareFalloff = 0.6;

std::uint64_t derive_seed(std::uint64_t seed, std::size_t subject, std::size_t image, std::string_view salt) {
    return fnv1a(std::to_string(seed) + "/" + std::to_string(subject) + "/" + std::to_string(image) + "/" +
                 std::string(salt));
}

// Coverage of a shape from its signed distance (negative inside), ~1 px ramp.
double coverage(double signed_distance) { return std::clamp(0.5 - signed_distance, 0.0, 1.0); }

double ellipse_distance(double x, double y, double cx, double cy, double rx, double ry) {
    const double nx = (x - cx) / rx;
    const double ny = (y - cy) / ry;
    return (std::sqrt(nx * nx + ny * ny) - 1.0) * std::min(rx, ry);
}

void blend(double* px, const double* color, double alpha) {
    for (int c = 0; c < 3; ++c) px[c] = (1.0 - alpha) * px[c] + alpha * color[c];
}

std::string subject_id(std::size_t s) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%03zu", s);
    return buf;
}

std::string image_id(std::size_t s, std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "s%03zu_i%02zu", s, i);
    return buf;
}

struct KnownEyes final : FaceDetector {
    EyeLandmarks eyes;
    std::optional<EyeLandmarks> detect(const Image&, std::string_view) const override { return eyes; }
};

// Mean luminance and RMS deviation of the 8x8 block means.
std::pair<double, double> block_contrast(const Image& image) {
    const auto luma = luminance(image);
    double mean = 0.0;
    for (float v : luma) mean += v;
    mean /= static_cast<double>(luma.size());
    std::array<double, 64> blocks{};
    std::array<int, 64> counts{};
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const int b = (y * 8 / image.height) * 8 + x * 8 / image.width;
            blocks[b] += luma[static_cast<std::size_t>(y) * image.width + x];
            ++counts[b];
        }
    }
    double var = 0.0;
    for (int b = 0; b < 64; ++b) {
        const double d = blocks[b] / std::max(1, counts[b]) - mean;
        var += d * d / 64.0;
    }
    return {mean, std::sqrt(var)};
}

}  // namespace

SubjectPattern make_subject(std::uint64_t seed, std::size_t subject_index, int image_size) {
    Rng rng(derive_seed(seed, subject_index, 0, "subject"));
    const double s = image_size;
    SubjectPattern p{};
    for (double& c : p.background) c = rng.uniform(0.25, 0.75);
    p.background_gradient = rng.uniform(-0.4, 0.4);
    const double tone = rng.uniform(0.45, 0.85);
    p.skin[0] = std::min(1.0, tone + rng.uniform(0.05, 0.12));
    p.skin[1] = tone * rng.uniform(0.78, 0.9);
    p.skin[2] = tone * rng.uniform(0.6, 0.78);
    const double hair = rng.uniform(0.05, 0.45);
    p.hair[0] = hair * rng.uniform(0.9, 1.3);
    p.hair[1] = hair * rng.uniform(0.7, 1.0);
    p.hair[2] = hair * rng.uniform(0.5, 0.9);
    p.face_cx = s * 0.5 + rng.uniform(-0.03, 0.03) * s;
    p.face_cy = s * 0.54 + rng.uniform(-0.03, 0.03) * s;
    p.face_rx = s * rng.uniform(0.25, 0.31);
    p.face_ry = s * rng.uniform(0.33, 0.39);

    const double half_sep = s * rng.uniform(0.095, 0.125);
    const double roll = rng.uniform(-8.0, 8.0) * std::numbers::pi / 180.0;
    const double ex = p.face_cx;
    const double ey = p.face_cy - p.face_ry * 0.22;
    p.eyes.left = {ex - half_sep * std::cos(roll), ey - half_sep * std::sin(roll)};
    p.eyes.right = {ex + half_sep * std::cos(roll), ey + half_sep * std::sin(roll)};
    p.eye_radius = s * rng.uniform(0.018, 0.026);
    p.mouth_width = s * rng.uniform(0.07, 0.11);
    for (auto& b : p.blobs) {
        b.x = p.face_cx + rng.uniform(-0.7, 0.7) * p.face_rx;
        b.y = p.face_cy + rng.uniform(-0.7, 0.7) * p.face_ry;
        b.radius = s * rng.uniform(0.06, 0.12);
        b.amplitude = rng.uniform(-0.3, 0.3);
    }
    p.texture_seed = rng.next();
    p.identity_seed = rng.next();
    return p;
}

Image render_subject(const SubjectPattern& p, int size) {
    Image out(size, size, 3);
    const double white[3] = {0.95, 0.95, 0.92};
    const double pupil[3] = {0.08, 0.06, 0.05};
    const double lips[3] = {0.55 * p.skin[0], 0.3 * p.skin[1], 0.3 * p.skin[2]};
    const double roll = std::atan2(p.eyes.right.y - p.eyes.left.y, p.eyes.right.x - p.eyes.left.x);
    const double mx = p.face_cx - std::sin(roll) * p.face_ry * 0.45;
    const double my = p.face_cy + std::cos(roll) * p.face_ry * 0.45;

    // low-frequency shading unique to the subject
    Rng identity_rng(p.identity_seed);
    Image shading(kIdentityGrid, kIdentityGrid, 1);
    for (auto& v : shading.data) v = static_cast<float>(kIdentityAmplitude * identity_rng.normal());
    shading = resize_bilinear(shading, size, size);

    Rng texture(p.texture_seed);
    std::vector<float> grain(static_cast<std::size_t>(size) * size);

    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double px[3];
            const double g = p.background_gradient * (static_cast<double>(x) / size - 0.5);
            for (int c = 0; c < 3; ++c) px[c] = p.background[c] + g;

            // hair: larger ellipse shifted up, drawn under the face
            blend(px, p.hair,
                  coverage(ellipse_distance(x, y, p.face_cx, p.face_cy - p.face_ry * 0.12, p.face_rx * 1.12,
                                            p.face_ry * 1.05)));
            const double face = coverage(ellipse_distance(x, y, p.face_cx, p.face_cy, p.face_rx, p.face_ry));
            double skin[3] = {p.skin[0], p.skin[1], p.skin[2]};
            for (const auto& b : p.blobs) {
                const double r2 = ((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y)) / (b.radius * b.radius);
                for (double& c : skin) c += b.amplitude * std::exp(-0.5 * r2);
            }
            blend(px, skin, face);

            for (const auto& eye : {p.eyes.left, p.eyes.right}) {
                blend(px, white,
                      face * coverage(ellipse_distance(x, y, eye.x, eye.y, p.eye_radius * 2.0, p.eye_radius * 1.2)));
                blend(px, pupil, face * coverage(std::hypot(x - eye.x, y - eye.y) - p.eye_radius));
            }
            blend(px, lips, face * coverage(ellipse_distance(x, y, mx, my, p.mouth_width, p.eye_radius * 1.1)));

            const double shade = shading.at(y, x, 0);
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = static_cast<float>(px[c] + shade);
            grain[static_cast<std::size_t>(y) * size + x] = static_cast<float>(face * kTextureAmplitude * texture.normal());
        }
    }

    KnownEyes detector;
    detector.eyes = p.eyes;
    const auto [mean, contrast] = block_contrast(preprocess_face(out, &detector).image);
    const double gain = kBaseBlockContrast / std::max(contrast, 1e-6);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = static_cast<float>(kBaseLuma + (out.data[i] - mean) * gain + grain[i / 3]);
    }
    clamp_unit(out);
    return out;
}

Degradation make_degradation(std::uint64_t seed, std::size_t subject_index, std::size_t image_index,
                             std::size_t images_per_subject) {
    Rng rng(derive_seed(seed, subject_index, image_index, "degradation"));
    Degradation d;
    d.noise_seed = rng.next();
    d.glare_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    if (image_index == 0 || images_per_subject < 2) return d;
    const double step = 1.0 / static_cast<double>(images_per_subject - 1);
    d.strength = std::clamp(static_cast<double>(image_index) * step + rng.uniform(-0.5, 0.5) * step, 0.02, 1.0);
    d.blur_sigma = kMaxBlurSigma * d.strength;
    d.noise_std = kMaxNoiseStd * d.strength;
    d.brightness_shift = kMaxGlare * d.strength;
    return d;
}

Image degrade(const Image& base, const Degradation& d) {
    Image out = gaussian_blur(base, d.blur_sigma);
    if (d.brightness_shift == 0.0 && d.noise_std == 0.0) return out;
    Rng rng(d.noise_seed);
    const double gx = 2.0 * std::cos(d.glare_angle) / std::max(1, out.width - 1);
    const double gy = 2.0 * std::sin(d.glare_angle) / std::max(1, out.height - 1);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const double ramp = gx * (x - 0.5 * (out.width - 1)) + gy * (y - 0.5 * (out.height - 1));
            const double glare = d.brightness_shift * (1.0 + kGlareFalloff * ramp);
            for (int c = 0; c < out.channels; ++c) {
                float& v = out.at(y, x, c);
                v = static_cast<float>(v + glare * (1.0 - v) + d.noise_std * rng.normal());
            }
        }
    }
    clamp_unit(out);
    return out;
}

std::vector<SynthSample> generate_synthetic(const SynthOptions& options) {
    if (options.subjects == 0 || options.images_per_subject == 0 || options.image_size < 16) {
        throw Error(ErrorKind::InvalidConfig, "synthetic dataset needs subjects, images and size >= 16");
    }
    std::vector<SynthSample> out;
    for (std::size_t s = 0; s < options.subjects; ++s) {
        const auto subject = make_subject(options.seed, s, options.image_size);
        const auto base = render_subject(subject, options.image_size);
        for (std::size_t i = 0; i < options.images_per_subject; ++i) {
            SynthSample sample;
            sample.degradation = make_degradation(options.seed, s, i, options.images_per_subject);
            sample.image = degrade(base, sample.degradation);
            sample.eyes = subject.eyes;
            const auto id = image_id(s, i);
            sample.record = {subject_id(s), id, "images/" + id + ".png", Role::Unassigned};
            out.push_back(std::move(sample));
        }
    }
    return out;
}

void write_synthetic(const std::filesystem::path& dir, const SynthOptions& options) {
    const auto samples = generate_synthetic(options);
    std::filesystem::create_directories(dir / "images");
    DatasetManifest manifest;
    std::map<std::string, EyeLandmarks, std::less<>> landmarks;
    std::string degradation = "image_id\tstrength\tblur_sigma\tnoise_std\tbrightness_shift\tglare_angle\n";
    for (const auto& s : samples) {
        write_png(dir / s.record.path, s.image);
        manifest.entries.push_back(s.record);
        landmarks[s.record.image_id] = s.eyes;
        degradation += s.record.image_id + '\t' + format_g9(s.degradation.strength) + '\t' +
                       format_g9(s.degradation.blur_sigma) + '\t' + format_g9(s.degradation.noise_std) + '\t' +
                       format_g9(s.degradation.brightness_shift) + '\t' + format_g9(s.degradation.glare_angle) + '\n';
    }
    canonicalize(manifest);
    save_manifest(dir / "manifest.tsv", manifest);
    write_text_file(dir / "landmarks.tsv", format_landmarks(landmarks));
    write_text_file(dir / "degradation.tsv", degradation);
}

}  // namespace faceqa
