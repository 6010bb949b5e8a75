#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace faceqa {

/// Interleaved H×W×C image with values in [0,1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

    bool empty() const noexcept { return data.empty(); }
    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    float& at(int y, int x, int c) noexcept { return data[index(y, x, c)]; }
    float at(int y, int x, int c) const noexcept { return data[index(y, x, c)]; }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Decodes PNG or JPEG bytes. 8-bit values map to v/255, 16-bit to v/65535;
/// grayscale is replicated to three channels and alpha is dropped.
Image decode_image(std::span<const std::uint8_t> bytes, const std::filesystem::path& origin = {});
Image read_image(const std::filesystem::path& path);

/// 8-bit PNG encoding with round-to-nearest quantization.
std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

/// Bilinear sample at continuous pixel coordinates (pixel centres on integers),
/// coordinates clamped to the image border.
float sample_bilinear(const Image& image, double y, double x, int channel);

/// Resize with pixel-centre alignment: src = (dst + 0.5) * scale - 0.5.
Image resize_bilinear(const Image& image, int height, int width);

Image crop(const Image& image, int top, int left, int height, int width);

/// Separable Gaussian blur with edge clamping; sigma <= 0 returns the input.
Image gaussian_blur(const Image& image, double sigma);

/// BT.601 luma plane (single channel images pass through).
std::vector<float> luminance(const Image& image);

void clamp_unit(Image& image);

}  // namespace faceqa
