#include "faceqa/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "faceqa/common.hpp"

namespace faceqa {

Image decode_image(std::span<const std::uint8_t> bytes, const std::filesystem::path& origin) {
    const std::string where = origin.empty() ? std::string("<memory>") : origin.string();
    if (bytes.empty()) throw Error(ErrorKind::DecodeError, where);
    cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8U, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat mat;
    try {
        mat = cv::imdecode(buffer, cv::IMREAD_UNCHANGED);
    } catch (const cv::Exception&) {
        throw Error(ErrorKind::DecodeError, where);
    }
    if (mat.empty()) throw Error(ErrorKind::DecodeError, where);

    double scale = 0.0;
    switch (mat.depth()) {
        case CV_8U: scale = 1.0 / 255.0; break;
        case CV_16U: scale = 1.0 / 65535.0; break;
        default: throw Error(ErrorKind::DecodeError, where + ": unsupported bit depth");
    }
    const int src_channels = mat.channels();
    if (src_channels != 1 && src_channels != 3 && src_channels != 4) {
        throw Error(ErrorKind::DecodeError, where + ": unsupported channel count");
    }

    cv::Mat values;
    mat.convertTo(values, CV_MAKETYPE(CV_32F, src_channels), scale);
    Image out(values.rows, values.cols, 3);
    for (int y = 0; y < values.rows; ++y) {
        const float* row = values.ptr<float>(y);
        for (int x = 0; x < values.cols; ++x) {
            const float* px = row + static_cast<std::ptrdiff_t>(x) * src_channels;
            if (src_channels == 1) {
                out.at(y, x, 0) = out.at(y, x, 1) = out.at(y, x, 2) = px[0];
            } else {
                // OpenCV stores BGR(A)
                out.at(y, x, 0) = px[2];
                out.at(y, x, 1) = px[1];
                out.at(y, x, 2) = px[0];
            }
        }
    }
    clamp_unit(out);
    return out;
}

Image read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::DecodeError, path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_image(bytes, path);
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    if (image.empty()) throw Error(ErrorKind::EmptyImage, "cannot encode empty image");
    const int type = image.channels == 1 ? CV_8UC1 : CV_8UC3;
    cv::Mat mat(image.height, image.width, type);
    for (int y = 0; y < image.height; ++y) {
        auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                const int dst_c = image.channels == 1 ? 0 : 2 - c;
                const float v = std::clamp(image.at(y, x, c), 0.0f, 1.0f);
                row[x * image.channels + dst_c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
            }
        }
    }
    std::vector<std::uint8_t> bytes;
    cv::imencode(".png", mat, bytes);
    return bytes;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    const auto bytes = encode_png(image);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::MissingFile, path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

float sample_bilinear(const Image& image, double y, double x, int channel) {
    y = std::clamp(y, 0.0, static_cast<double>(image.height - 1));
    x = std::clamp(x, 0.0, static_cast<double>(image.width - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, image.height - 1);
    const int x1 = std::min(x0 + 1, image.width - 1);
    const double fy = y - y0;
    const double fx = x - x0;
    const double top = (1.0 - fx) * image.at(y0, x0, channel) + fx * image.at(y0, x1, channel);
    const double bottom = (1.0 - fx) * image.at(y1, x0, channel) + fx * image.at(y1, x1, channel);
    return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

Image resize_bilinear(const Image& image, int height, int width) {
    if (image.height == height && image.width == width) return image;
    Image out(height, width, image.channels);
    const double sy = static_cast<double>(image.height) / height;
    const double sx = static_cast<double>(image.width) / width;
    for (int y = 0; y < height; ++y) {
        const double src_y = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < width; ++x) {
            const double src_x = (x + 0.5) * sx - 0.5;
            for (int c = 0; c < image.channels; ++c) {
                out.at(y, x, c) = sample_bilinear(image, src_y, src_x, c);
            }
        }
    }
    return out;
}

Image crop(const Image& image, int top, int left, int height, int width) {
    Image out(height, width, image.channels);
    for (int y = 0; y < height; ++y) {
        const auto* src = &image.data[image.index(top + y, left, 0)];
        std::copy(src, src + static_cast<std::ptrdiff_t>(width) * image.channels, &out.data[out.index(y, 0, 0)]);
    }
    return out;
}

Image gaussian_blur(const Image& image, double sigma) {
    if (sigma <= 0.0 || image.empty()) return image;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> taps(2 * radius + 1);
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        taps[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
        total += taps[k + radius];
    }
    for (auto& t : taps) t /= total;

    Image tmp(image.height, image.width, image.channels);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    const int xx = std::clamp(x + k, 0, image.width - 1);
                    acc += taps[k + radius] * image.at(y, xx, c);
                }
                tmp.at(y, x, c) = static_cast<float>(acc);
            }
        }
    }
    Image out(image.height, image.width, image.channels);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    const int yy = std::clamp(y + k, 0, image.height - 1);
                    acc += taps[k + radius] * tmp.at(yy, x, c);
                }
                out.at(y, x, c) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

std::vector<float> luminance(const Image& image) {
    const std::size_t n = static_cast<std::size_t>(image.height) * image.width;
    std::vector<float> luma(n);
    if (image.channels == 1) {
        std::copy(image.data.begin(), image.data.end(), luma.begin());
        return luma;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const float* px = &image.data[i * image.channels];
        luma[i] = 0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2];
    }
    return luma;
}

void clamp_unit(Image& image) {
    for (auto& v : image.data) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace faceqa
