#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "faceqa/dataset.hpp"

namespace faceqa {

struct SynthOptions {
    std::size_t subjects = 5;
    std::size_t images_per_subject = 6;
    std::uint64_t seed = 1;
    int image_size = 256;
};

/// Identity-bearing parameters of one synthetic subject.
struct SubjectPattern {
    double background[3];
    double background_gradient;
    double skin[3];
    double hair[3];
    double face_cx, face_cy, face_rx, face_ry;
    EyeLandmarks eyes;
    double eye_radius;
    double mouth_width;
    std::uint64_t texture_seed;   // fixed skin texture
    std::uint64_t identity_seed;  // low-frequency shading
    struct Blob {
        double x, y, radius, amplitude;
    } blobs[4];
};

struct Degradation {
    double strength = 0.0;  // [0,1]
    double blur_sigma = 0.0;
    double noise_std = 0.0;
    double brightness_shift = 0.0;  // veiling glare: v + a (1 - v), a falling off across the image
    double glare_angle = 0.0;       // direction of the falloff, radians
    std::uint64_t noise_seed = 0;
};

SubjectPattern make_subject(std::uint64_t seed, std::size_t subject_index, int image_size);
Image render_subject(const SubjectPattern& subject, int image_size);

/// Graded strength for image k of m: 0 for k = 0, otherwise jittered around k/(m-1).
Degradation make_degradation(std::uint64_t seed, std::size_t subject_index, std::size_t image_index,
                             std::size_t images_per_subject);
/// Blur, then brightness shift (glare), then additive Gaussian noise, then clamp.
Image degrade(const Image& base, const Degradation& degradation);

struct SynthSample {
    ImageRecord record;
    Image image;
    EyeLandmarks eyes;
    Degradation degradation;
};

std::vector<SynthSample> generate_synthetic(const SynthOptions& options);

/// Writes images/<id>.png, manifest.tsv, landmarks.tsv and degradation.tsv.
void write_synthetic(const std::filesystem::path& dir, const SynthOptions& options);

}  // namespace faceqa
