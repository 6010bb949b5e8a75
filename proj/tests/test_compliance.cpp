#include <doctest.h>

#include <cmath>

#include "faceqa/compliance.hpp"
#include "faceqa/synth.hpp"
#include "support.hpp"

using namespace faceqa;
using faceqa::testing::TempDir;
namespace ct = faceqa::compliance_test;

namespace {

// Population variance of the 4-neighbour Laplacian over interior pixels,
// straight from the definition.
double reference_laplacian_variance(const std::vector<float>& l, int h, int w) {
    std::vector<double> r;
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            const auto at = [&](int yy, int xx) { return static_cast<double>(l[yy * w + xx]); };
            r.push_back(at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1) - 4 * at(y, x));
        }
    }
    double mean = 0;
    for (double v : r) mean += v;
    mean /= r.size();
    double var = 0;
    for (double v : r) var += (v - mean) * (v - mean);
    return var / r.size();
}

FaceTensor textured_face(std::uint64_t seed) {
    auto face = faceqa::testing::face_of(faceqa::testing::random_image(kFaceSize, kFaceSize, 3, seed));
    return face;
}

}  // namespace

TEST_CASE("uniform mid-gray scores zero sharpness and contrast") {
    const auto r = run_compliance_tests(faceqa::testing::face_of(Image(kFaceSize, kFaceSize, 3, 0.5f)));
    CHECK(r.test_scores.at(ct::kSharpness) == 0.0);
    CHECK(r.test_scores.at(ct::kContrast) == 0.0);
    CHECK(r.test_scores.at(ct::kBrightness) == 100.0);
    CHECK(r.test_scores.at(ct::kSaturationSanity) == kNeutralScore);
    CHECK(r.test_scores.at(ct::kPoseFrontality) == kNeutralScore);
    CHECK(r.test_scores.at(ct::kEyeResolution) == kNeutralScore);
    CHECK(r.test_scores.size() == 6);
}

TEST_CASE("all-black image scores zero brightness") {
    const auto r = run_compliance_tests(faceqa::testing::face_of(Image(kFaceSize, kFaceSize, 3, 0.0f)));
    CHECK(r.test_scores.at(ct::kBrightness) == 0.0);
}

TEST_CASE("laplacian variance matches the reference convolution") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto im = faceqa::testing::random_image(31 + seed, 40 + 3 * seed, 3, seed);
        const auto l = luminance(im);
        CHECK(laplacian_variance(l, im.height, im.width) ==
              doctest::Approx(reference_laplacian_variance(l, im.height, im.width)).epsilon(1e-6));
    }
}

TEST_CASE("blurring with sigma 3 strictly lowers sharpness") {
    // Low-amplitude texture keeps the unblurred variance below the calibration cap.
    auto im = faceqa::testing::random_image(kFaceSize, kFaceSize, 3, 1);
    for (auto& v : im.data) v = 0.5f + 0.02f * (v - 0.5f);
    const auto sharp = faceqa::testing::face_of(im);
    const auto blurred = faceqa::testing::face_of(gaussian_blur(im, 3.0));
    const auto ls = luminance(sharp.image), lb = luminance(blurred.image);
    const double vs = reference_laplacian_variance(ls, kFaceSize, kFaceSize);
    const double vb = reference_laplacian_variance(lb, kFaceSize, kFaceSize);
    REQUIRE(vb < vs);
    REQUIRE(vs < kSharpnessReference);
    const double s_sharp = run_compliance_tests(sharp).test_scores.at(ct::kSharpness);
    const double s_blur = run_compliance_tests(blurred).test_scores.at(ct::kSharpness);
    CHECK(s_sharp == doctest::Approx(100.0 * vs / kSharpnessReference).epsilon(1e-5));
    CHECK(s_blur < s_sharp);
}

TEST_CASE("calibration curves") {
    CHECK(sharpness_score(0.005) == doctest::Approx(50.0));
    CHECK(sharpness_score(1.0) == 100.0);
    CHECK(brightness_score(0.25) == doctest::Approx(50.0));
    CHECK(brightness_score(1.0) == 0.0);
    CHECK(contrast_score(0.125) == doctest::Approx(50.0));
    CHECK(contrast_score(0.5) == 100.0);
    CHECK(pose_frontality_score({{0, 0}, {10, 0}}) == 100.0);
    CHECK(pose_frontality_score({{0, 0}, {10, 10}}) == 0.0);  // 45 degrees
    CHECK(pose_frontality_score({{0, 0}, {std::sqrt(3.0), 1}}) == doctest::Approx(0.0).epsilon(1e-9));  // 30 degrees
    CHECK(pose_frontality_score({{0, 0}, {1, std::tan(15 * std::acos(-1.0) / 180)}}) == doctest::Approx(50.0));
    CHECK(eye_resolution_score({{0, 0}, {30, 0}}) == doctest::Approx(50.0));
    CHECK(eye_resolution_score({{0, 0}, {90, 0}}) == 100.0);
}

TEST_CASE("landmark tests use the source eyes") {
    auto face = textured_face(2);
    face.source_eyes = EyeLandmarks{{100, 100}, {130, 100}};
    face.aligned = true;
    const auto r = run_compliance_tests(face, "x");
    CHECK(r.image_id == "x");
    CHECK(r.test_scores.at(ct::kPoseFrontality) == 100.0);
    CHECK(r.test_scores.at(ct::kEyeResolution) == doctest::Approx(50.0));
    CHECK(r.test_scores.at(ct::kSaturationSanity) == 100.0);
}

TEST_CASE("scores lie in range and the aggregate is their mean") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto face = textured_face(seed);
        if (seed % 2) face.source_eyes = EyeLandmarks{{10.0 * seed, 5}, {10.0 * seed + 40, 5.0 + 3 * seed}};
        const auto r = run_compliance_tests(face);
        double total = 0;
        for (const auto& [name, s] : r.test_scores) {
            CHECK(s >= 0.0);
            CHECK(s <= 100.0);
            total += s;
        }
        CHECK(r.aggregate == doctest::Approx(total / 6));
        CHECK(r.aggregate >= 0.0);
        CHECK(r.aggregate <= 100.0);
    }
}

// On near-linear content the clamped border adds a little curvature under blur,
// so the chain is checked on face renders, not on smooth test patterns.
TEST_CASE("more blur never raises sharpness") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto im = render_subject(make_subject(seed, seed, kFaceSize), kFaceSize);
        double last = run_compliance_tests(faceqa::testing::face_of(im)).test_scores.at(ct::kSharpness);
        for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
            const double s =
                run_compliance_tests(faceqa::testing::face_of(gaussian_blur(im, sigma))).test_scores.at(ct::kSharpness);
            CHECK(s <= last);
            last = s;
        }
    }
}

TEST_CASE("pushing luminance toward the nearer extreme never raises brightness") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto base = faceqa::testing::random_image(64, 64, 3, seed);
        const bool up = seed % 2 == 0;  // half the cases are first pushed past the midpoint
        double last = 101.0;
        for (double a : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
            Image im = base;
            for (auto& v : im.data) {
                const double shifted = up ? 0.55 + 0.45 * v : 0.45 * v;  // mean now on one side of 0.5
                v = static_cast<float>(up ? shifted + a * (1 - shifted) : (1 - a) * shifted);
            }
            const double s = run_compliance_tests(faceqa::testing::face_of(resize_bilinear(im, kFaceSize, kFaceSize)))
                                 .test_scores.at(ct::kBrightness);
            CHECK(s <= last);
            last = s;
        }
        CHECK(last < 1e-3);
    }
}

TEST_CASE("gallery is the argmax with ties broken by image id") {
    DatasetManifest m;
    m.entries = {{"a", "a01", "", Role::Unassigned},
                 {"a", "a02", "", Role::Unassigned},
                 {"a", "a03", "", Role::Unassigned},
                 {"b", "b01", "", Role::Unassigned}};
    std::vector<ComplianceReport> reports{{"a03", {}, 95}, {"a02", {}, 95}, {"a01", {}, 80}, {"b01", {}, 10}};
    const auto g = select_gallery(m, reports);
    CHECK(g.at("a") == "a02");
    CHECK(g.at("b") == "b01");
    CHECK(m.entries[0].role == Role::Probe);
    CHECK(m.entries[1].role == Role::Gallery);
    CHECK(m.entries[2].role == Role::Probe);
    CHECK(m.entries[3].role == Role::Gallery);

    reports.pop_back();
    try {
        select_gallery(m, reports);
        FAIL("expected MissingReport");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingReport);
        CHECK(e.detail() == "b01");
    }
}

TEST_CASE("gallery is invariant under positive scaling of aggregates") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        DatasetManifest m;
        std::vector<ComplianceReport> reports;
        for (int s = 0; s < 4; ++s) {
            for (int i = 0; i < 5; ++i) {
                const std::string id = "s" + std::to_string(s) + "_" + std::to_string(i);
                m.entries.push_back({"s" + std::to_string(s), id, "", Role::Unassigned});
                // Coarse values so ties actually occur.
                reports.push_back({id, {}, 10.0 * static_cast<double>(rng.below(6))});
            }
        }
        auto m2 = m;
        const auto g = select_gallery(m, reports);
        const double k = rng.uniform(0.01, 50.0);
        for (auto& r : reports) r.aggregate *= k;
        CHECK(select_gallery(m2, reports) == g);
        std::size_t galleries = 0;
        for (const auto& e : m.entries) galleries += e.role == Role::Gallery;
        CHECK(galleries == 4);
    }
}

TEST_CASE("report and gallery files round trip") {
    TempDir dir("reports");
    std::vector<ComplianceReport> reports;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto face = textured_face(seed);
        reports.push_back(run_compliance_tests(face, "img" + std::to_string(seed)));
    }
    save_reports(dir / "r.tsv", reports);
    const auto loaded = load_reports(dir / "r.tsv");
    REQUIRE(loaded.size() == 3);
    CHECK(loaded[1].image_id == "img1");
    CHECK(loaded[1].test_scores.size() == 6);
    CHECK(format_reports(loaded) == read_text_file(dir / "r.tsv"));

    const GalleryMap g{{"a", "a02"}, {"b", "b01"}};
    save_gallery(dir / "g.tsv", g);
    CHECK(load_gallery(dir / "g.tsv") == g);
}
