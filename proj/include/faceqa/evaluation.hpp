#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "faceqa/embeddings.hpp"

namespace faceqa {

enum class QualityBinLabel { LowQ, MediumQ, HighQ };
std::string_view to_string(QualityBinLabel label);

struct QualityBin {
    QualityBinLabel label = QualityBinLabel::LowQ;
    std::vector<std::string> image_ids;  // ascending (quality, image_id)
};

using QualityEntry = std::pair<std::string, double>;  // (image_id, quality)

/// Sorts by (quality, image_id) and cuts three contiguous chunks whose sizes
/// differ by at most one; remainders go to LowQ first, then MediumQ.
std::array<QualityBin, 3> tertile_split(std::span<const QualityEntry> qualities);

// ---------------------------------------------------------------------------
// Comparison

struct ComparisonScore {
    std::string probe_id;
    std::string reference_id;
    double score = 0.0;  // [0,100], higher means more likely mated
    bool mated = false;

    friend bool operator==(const ComparisonScore&, const ComparisonScore&) = default;
};

class Comparator {
public:
    virtual ~Comparator() = default;
    virtual std::string id() const = 0;
    /// Raw comparator output; `compare` validates the range.
    virtual double raw_score(const FaceTensor& a, const FaceTensor& b) const = 0;
};

inline constexpr double kReferenceDistance = 2.0;

/// 100 · max(0, 1 − d / 2); d is the L2 distance of unit embeddings.
double score_from_distance(double distance);

/// Scores the L2 distance of groundtruth-backend embeddings.
class BuiltinComparator final : public Comparator {
public:
    explicit BuiltinComparator(std::shared_ptr<const EmbeddingBackend> backend) : backend_(std::move(backend)) {}
    std::string id() const override { return "builtin:" + backend_->backend_id(); }
    double raw_score(const FaceTensor& a, const FaceTensor& b) const override;

private:
    std::shared_ptr<const EmbeddingBackend> backend_;
};

/// Throws ScoreOutOfRange when a score is outside [0,100] (or not finite).
double validate_score(double score);

ComparisonScore compare(const FaceTensor& a, const FaceTensor& b, const Comparator& comparator,
                        std::string probe_id = {}, std::string reference_id = {}, bool mated = false);

struct ScoreSet {
    std::vector<ComparisonScore> comparisons;
    std::vector<double> mated;
    std::vector<double> non_mated;
    std::size_t unpaired_images = 0;  // bin images without any same-subject partner
};

/// Scores one (probe, reference) pair by image id.
using PairScorer = std::function<double(const std::string& probe_id, const std::string& reference_id)>;

struct ImagePair {
    std::string probe_id;
    std::string reference_id;
    bool mated = false;
};

struct PairPlan {
    std::vector<ImagePair> pairs;
    std::size_t unpaired_images = 0;
};

/// Mated: every unordered same-subject pair with at least one member in the
/// bin. Non-mated: each bin image against every image of one seeded random
/// other subject.
PairPlan plan_pairs(const QualityBin& bin, const DatasetManifest& manifest, std::uint64_t seed);

ScoreSet generate_scores(const QualityBin& bin, const DatasetManifest& manifest, const PairScorer& scorer,
                         std::uint64_t seed, unsigned threads = 1);

// ---------------------------------------------------------------------------
// DET

struct DetPoint {
    double threshold = 0.0;
    double far_pct = 0.0;
    double frr_pct = 0.0;
};

struct DetCurve {
    std::vector<DetPoint> points;  // ascending thresholds, sentinels at both ends
    double eer_pct = 0.0;
};

/// Accept iff score >= threshold. FAR = % non-mated accepted, FRR = % mated
/// rejected. EER is linearly interpolated between the thresholds that bracket
/// the FAR/FRR crossing.
DetCurve compute_det(std::span<const double> mated, std::span<const double> non_mated);
inline DetCurve compute_det(const ScoreSet& scores) { return compute_det(scores.mated, scores.non_mated); }

struct Histogram {
    std::vector<double> edges;  // bin_count + 1 values over [0,1]
    std::vector<std::size_t> counts;
};

/// Uniform bins over [0,1], half-open except the last, which includes 1.
Histogram quality_histogram(std::span<const double> qualities, std::size_t bin_count);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Files

std::string format_scores(std::span<const ComparisonScore> scores);
void save_scores(const std::filesystem::path& path, std::span<const ComparisonScore> scores);
std::vector<ComparisonScore> parse_scores(std::string_view text);
std::vector<ComparisonScore> load_scores(const std::filesystem::path& path);

std::string format_det(const DetCurve& curve);
std::string format_histogram(const Histogram& histogram);

}  // namespace faceqa
