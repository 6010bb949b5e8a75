#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace faceqa {

enum class ErrorKind {
    // input errors (exit code 2)
    MissingFile,
    MalformedManifest,
    DuplicateImageId,
    DecodeError,
    EmptyImage,
    CorruptCache,
    CorruptCheckpoint,
    CorruptFile,
    InvalidConfig,
    // data / shape errors (exit code 3)
    InsufficientSubjects,
    MissingReport,
    BackendMismatch,
    DimensionMismatch,
    EmptyInput,
    NonFiniteDistance,
    MissingGallery,
    EmptyDataset,
    NonFiniteLoss,
    TooFewImages,
    SingleSubject,
    EmptyScores,
    // external service errors (exit code 4)
    BackendFailure,
    ComparatorFailure,
    ScoreOutOfRange,
    // internal invariant violation (exit code 5)
    Internal,
};

std::string_view to_string(ErrorKind kind);

/// Process exit code for an error kind: 2 input, 3 data/shape, 4 external service, 5 internal.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string detail);

    ErrorKind kind() const noexcept { return kind_; }
    /// The payload of the error: an image id, a path, a line number, a value.
    const std::string& detail() const noexcept { return detail_; }
    int exit_code() const noexcept { return faceqa::exit_code(kind_); }

private:
    ErrorKind kind_;
    std::string detail_;
};

/// Raised by batch operations; lists the failing element indices.
class BatchError : public Error {
public:
    BatchError(ErrorKind kind, std::vector<std::size_t> indices, std::string detail);
    const std::vector<std::size_t>& indices() const noexcept { return indices_; }

private:
    std::vector<std::size_t> indices_;
};

/// Whole-file text IO; a missing file raises MissingFile. Writes create parent directories.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Number formatting used by every text artifact.
std::string format_g9(double v);          // 9 significant digits
std::string format_exact(double v);       // shortest round-trip representation
double parse_double(std::string_view s);  // throws std::invalid_argument
long long parse_int(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

/// 64-bit FNV-1a, used for config digests.
std::uint64_t fnv1a(std::string_view s);
std::string hex64(std::uint64_t v);

/// Seeded generator with a portable mapping from engine output to values,
/// so results do not depend on the standard library's distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform();  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t below(std::size_t n);
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Every index is
/// processed exactly once; the first exception is rethrown after all workers join.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace faceqa
