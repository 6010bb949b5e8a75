#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>

#include "faceqa/common.hpp"
#include "faceqa/dataset.hpp"
#include "faceqa/image.hpp"

namespace faceqa::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("faceqa_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Image random_image(int h, int w, int c, std::uint64_t seed) {
    Rng rng(seed);
    Image im(h, w, c);
    for (auto& v : im.data) v = static_cast<float>(rng.uniform());
    return im;
}

// Smooth but textured image: a few sinusoids, values well inside (0,1).
inline Image pattern_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    const double fx = rng.uniform(0.05, 0.4), fy = rng.uniform(0.05, 0.4), phase = rng.uniform(0, 6.28);
    Image im(h, w, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = 0.5 + 0.2 * std::sin(fx * x + phase) + 0.2 * std::cos(fy * y);
            for (int c = 0; c < 3; ++c) im.at(y, x, c) = static_cast<float>(v * (0.8 + 0.1 * c));
        }
    }
    return im;
}

inline FaceTensor face_of(Image image) {
    FaceTensor f;
    f.image = std::move(image);
    return f;
}

}  // namespace faceqa::testing
