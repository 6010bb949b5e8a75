#include "faceqa/common.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

namespace faceqa {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MissingFile: return "MissingFile";
        case ErrorKind::MalformedManifest: return "MalformedManifest";
        case ErrorKind::DuplicateImageId: return "DuplicateImageId";
        case ErrorKind::DecodeError: return "DecodeError";
        case ErrorKind::EmptyImage: return "EmptyImage";
        case ErrorKind::CorruptCache: return "CorruptCache";
        case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
        case ErrorKind::CorruptFile: return "CorruptFile";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::InsufficientSubjects: return "InsufficientSubjects";
        case ErrorKind::MissingReport: return "MissingReport";
        case ErrorKind::BackendMismatch: return "BackendMismatch";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::NonFiniteDistance: return "NonFiniteDistance";
        case ErrorKind::MissingGallery: return "MissingGallery";
        case ErrorKind::EmptyDataset: return "EmptyDataset";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::TooFewImages: return "TooFewImages";
        case ErrorKind::SingleSubject: return "SingleSubject";
        case ErrorKind::EmptyScores: return "EmptyScores";
        case ErrorKind::BackendFailure: return "BackendFailure";
        case ErrorKind::ComparatorFailure: return "ComparatorFailure";
        case ErrorKind::ScoreOutOfRange: return "ScoreOutOfRange";
        case ErrorKind::Internal: return "Internal";
    }
    return "Unknown";
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MissingFile:
        case ErrorKind::MalformedManifest:
        case ErrorKind::DuplicateImageId:
        case ErrorKind::DecodeError:
        case ErrorKind::EmptyImage:
        case ErrorKind::CorruptCache:
        case ErrorKind::CorruptCheckpoint:
        case ErrorKind::CorruptFile:
        case ErrorKind::InvalidConfig:
            return 2;
        case ErrorKind::BackendFailure:
        case ErrorKind::ComparatorFailure:
        case ErrorKind::ScoreOutOfRange:
            return 4;
        case ErrorKind::Internal:
            return 5;
        default:
            return 3;
    }
}

Error::Error(ErrorKind kind, std::string detail)
    : std::runtime_error(std::string(to_string(kind)) + "(" + detail + ")"),
      kind_(kind),
      detail_(std::move(detail)) {}

BatchError::BatchError(ErrorKind kind, std::vector<std::size_t> indices, std::string detail)
    : Error(kind, std::move(detail)), indices_(std::move(indices)) {}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::MissingFile, path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string format_g9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string format_exact(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument("not a number: '" + std::string(s) + "'");
    }
    return v;
}

long long parse_int(std::string_view s) {
    s = trim(s);
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
    }
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::below(std::size_t n) {
    // Lemire-style rejection keeps the mapping unbiased and portable.
    const std::uint64_t bound = n;
    const std::uint64_t threshold = (0 - bound) % bound;
    while (true) {
        std::uint64_t r = engine_();
        if (r >= threshold) return static_cast<std::size_t>(r % bound);
    }
}

double Rng::normal() {
    // Box-Muller; one draw per call keeps the stream position easy to reason about.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                    }
                }
            });
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace faceqa
