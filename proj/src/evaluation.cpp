#include "faceqa/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "faceqa/common.hpp"
#include "faceqa/kernels.hpp"

namespace faceqa {

std::string_view to_string(QualityBinLabel label) {
    switch (label) {
        case QualityBinLabel::LowQ: return "LowQ";
        case QualityBinLabel::MediumQ: return "MediumQ";
        case QualityBinLabel::HighQ: return "HighQ";
    }
    return "";
}

std::array<QualityBin, 3> tertile_split(std::span<const QualityEntry> qualities) {
    const std::size_t n = qualities.size();
    if (n < 3) throw Error(ErrorKind::TooFewImages, std::to_string(n));
    std::vector<QualityEntry> sorted(qualities.begin(), qualities.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return std::tie(a.second, a.first) < std::tie(b.second, b.first);
    });
    const std::size_t base = n / 3;
    const std::size_t extra = n % 3;
    const std::array<std::size_t, 3> sizes{base + (extra >= 1 ? 1 : 0), base + (extra >= 2 ? 1 : 0), base};
    std::array<QualityBin, 3> bins{QualityBin{QualityBinLabel::LowQ, {}}, QualityBin{QualityBinLabel::MediumQ, {}},
                                   QualityBin{QualityBinLabel::HighQ, {}}};
    std::size_t at = 0;
    for (std::size_t b = 0; b < 3; ++b) {
        for (std::size_t k = 0; k < sizes[b]; ++k) bins[b].image_ids.push_back(sorted[at++].first);
    }
    return bins;
}

double score_from_distance(double distance) {
    return 100.0 * std::max(0.0, 1.0 - distance / kReferenceDistance);
}

double BuiltinComparator::raw_score(const FaceTensor& a, const FaceTensor& b) const {
    const auto ea = embed(a, *backend_);
    const auto eb = embed(b, *backend_);
    return score_from_distance(std::sqrt(kernels::squared_distance(ea.vector, eb.vector)));
}

double validate_score(double score) {
    if (!std::isfinite(score) || score < 0.0 || score > 100.0) {
        throw Error(ErrorKind::ScoreOutOfRange, format_g9(score));
    }
    return score;
}

ComparisonScore compare(const FaceTensor& a, const FaceTensor& b, const Comparator& comparator,
                        std::string probe_id, std::string reference_id, bool mated) {
    return {std::move(probe_id), std::move(reference_id), validate_score(comparator.raw_score(a, b)), mated};
}

PairPlan plan_pairs(const QualityBin& bin, const DatasetManifest& manifest, std::uint64_t seed) {
    std::map<std::string, std::vector<std::string>> by_subject;
    std::map<std::string, std::string, std::less<>> subject_of;
    for (const auto& e : manifest.entries) {
        by_subject[e.subject_id].push_back(e.image_id);
        subject_of[e.image_id] = e.subject_id;
    }
    for (auto& [s, ids] : by_subject) std::sort(ids.begin(), ids.end());
    if (by_subject.size() < 2) throw Error(ErrorKind::SingleSubject, std::to_string(by_subject.size()));

    std::vector<std::string> members = bin.image_ids;
    std::sort(members.begin(), members.end());
    const std::set<std::string, std::less<>> in_bin(members.begin(), members.end());

    std::vector<std::string> subjects;
    for (const auto& [s, ids] : by_subject) subjects.push_back(s);

    PairPlan plan;
    Rng rng(seed);
    for (const auto& a : members) {
        auto it = subject_of.find(a);
        if (it == subject_of.end()) throw Error(ErrorKind::Internal, "bin image not in manifest: " + a);
        const auto& subject = it->second;
        const auto& same = by_subject.at(subject);
        if (same.size() < 2) ++plan.unpaired_images;
        for (const auto& b : same) {
            if (b == a || (in_bin.contains(b) && b < a)) continue;
            plan.pairs.push_back({a, b, true});
        }
        std::vector<const std::string*> others;
        for (const auto& s : subjects) {
            if (s != subject) others.push_back(&s);
        }
        const auto& impostor = *others[rng.below(others.size())];
        for (const auto& b : by_subject.at(impostor)) plan.pairs.push_back({a, b, false});
    }
    return plan;
}

ScoreSet generate_scores(const QualityBin& bin, const DatasetManifest& manifest, const PairScorer& scorer,
                         std::uint64_t seed, unsigned threads) {
    const auto plan = plan_pairs(bin, manifest, seed);
    ScoreSet set;
    set.unpaired_images = plan.unpaired_images;
    set.comparisons.resize(plan.pairs.size());
    parallel_for(plan.pairs.size(), threads, [&](std::size_t i) {
        const auto& p = plan.pairs[i];
        set.comparisons[i] = {p.probe_id, p.reference_id, validate_score(scorer(p.probe_id, p.reference_id)),
                              p.mated};
    });
    for (const auto& c : set.comparisons) (c.mated ? set.mated : set.non_mated).push_back(c.score);
    return set;
}

DetCurve compute_det(std::span<const double> mated, std::span<const double> non_mated) {
    if (mated.empty()) throw Error(ErrorKind::EmptyScores, "mated");
    if (non_mated.empty()) throw Error(ErrorKind::EmptyScores, "non_mated");
    std::vector<double> m(mated.begin(), mated.end());
    std::vector<double> nm(non_mated.begin(), non_mated.end());
    std::sort(m.begin(), m.end());
    std::sort(nm.begin(), nm.end());

    std::vector<double> thresholds;
    std::merge(m.begin(), m.end(), nm.begin(), nm.end(), std::back_inserter(thresholds));
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    thresholds.insert(thresholds.begin(), thresholds.front() - 1.0);
    thresholds.push_back(thresholds.back() + 1.0);

    DetCurve curve;
    curve.points.reserve(thresholds.size());
    const double n_m = static_cast<double>(m.size());
    const double n_nm = static_cast<double>(nm.size());
    for (double t : thresholds) {
        const auto rejected = std::lower_bound(m.begin(), m.end(), t) - m.begin();
        const auto accepted = nm.end() - std::lower_bound(nm.begin(), nm.end(), t);
        curve.points.push_back({t, 100.0 * static_cast<double>(accepted) / n_nm,
                                100.0 * static_cast<double>(rejected) / n_m});
    }

    // FAR - FRR starts at +100 and ends at -100; find the first sign change.
    const auto& pts = curve.points;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const double diff = pts[k].far_pct - pts[k].frr_pct;
        if (diff > 0.0) continue;
        if (diff == 0.0 || k == 0) {
            curve.eer_pct = pts[k].far_pct;
        } else {
            const double prev = pts[k - 1].far_pct - pts[k - 1].frr_pct;
            const double alpha = prev / (prev - diff);
            curve.eer_pct = pts[k - 1].far_pct + alpha * (pts[k].far_pct - pts[k - 1].far_pct);
        }
        break;
    }
    return curve;
}

Histogram quality_histogram(std::span<const double> qualities, std::size_t bin_count) {
    if (bin_count == 0) throw Error(ErrorKind::InvalidConfig, "histogram needs at least one bin");
    Histogram h;
    h.counts.assign(bin_count, 0);
    for (std::size_t i = 0; i <= bin_count; ++i) h.edges.push_back(static_cast<double>(i) / bin_count);
    for (double q : qualities) {
        const double clamped = std::clamp(q, 0.0, 1.0);
        auto idx = static_cast<std::size_t>(std::floor(clamped * static_cast<double>(bin_count)));
        h.counts[std::min(idx, bin_count - 1)]++;
    }
    return h;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorKind::DimensionMismatch, "spearman inputs differ in length");
    if (a.size() < 2) throw Error(ErrorKind::EmptyInput, "spearman needs two points");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double mean = (n + 1.0) / 2.0;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - mean) * (rb[i] - mean);
        va += (ra[i] - mean) * (ra[i] - mean);
        vb += (rb[i] - mean) * (rb[i] - mean);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

// ---------------------------------------------------------------------------

std::string format_scores(std::span<const ComparisonScore> scores) {
    std::string out = "probe_id\treference_id\tmated\tscore\n";
    for (const auto& s : scores) {
        out += s.probe_id + '\t' + s.reference_id + '\t' + (s.mated ? "1" : "0") + '\t' + format_g9(s.score) + '\n';
    }
    return out;
}

void save_scores(const std::filesystem::path& path, std::span<const ComparisonScore> scores) {
    write_text_file(path, format_scores(scores));
}

std::vector<ComparisonScore> parse_scores(std::string_view text) {
    auto lines = split(text, '\n');
    if (lines.empty() || lines[0] != "probe_id\treference_id\tmated\tscore") {
        throw Error(ErrorKind::CorruptFile, "scores line 1");
    }
    std::vector<ComparisonScore> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto f = split(lines[i], '\t');
        try {
            if (f.size() != 4 || (f[2] != "0" && f[2] != "1")) throw std::invalid_argument("fields");
            out.push_back({std::string(f[0]), std::string(f[1]), parse_double(f[3]), f[2] == "1"});
        } catch (const std::invalid_argument&) {
            throw Error(ErrorKind::CorruptFile, "scores line " + std::to_string(i + 1));
        }
    }
    return out;
}

std::vector<ComparisonScore> load_scores(const std::filesystem::path& path) {
    return parse_scores(read_text_file(path));
}

std::string format_det(const DetCurve& curve) {
    std::string out = "threshold,far_pct,frr_pct\n";
    for (const auto& p : curve.points) {
        out += format_g9(p.threshold) + ',' + format_g9(p.far_pct) + ',' + format_g9(p.frr_pct) + '\n';
    }
    return out;
}

std::string format_histogram(const Histogram& h) {
    std::string out = "bin_start,bin_end,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        out += format_g9(h.edges[i]) + ',' + format_g9(h.edges[i + 1]) + ',' + std::to_string(h.counts[i]) + '\n';
    }
    return out;
}

}  // namespace faceqa
