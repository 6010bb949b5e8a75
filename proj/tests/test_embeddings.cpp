#include <doctest.h>

#include <cmath>

#include "faceqa/embeddings.hpp"
#include "support.hpp"

using namespace faceqa;
using faceqa::testing::TempDir;

namespace {

class FlakyBackend final : public EmbeddingBackend {
public:
    const std::string& backend_id() const override { return id_; }
    std::size_t dimension() const override { return 2; }
    std::vector<double> compute(const FaceTensor& face) const override {
        const float tag = face.image.data.at(0);
        if (tag > 0.9f) throw Error(ErrorKind::BackendFailure, "flaky");
        if (tag > 0.8f) return {1.0};                  // wrong dimension
        if (tag > 0.7f) return {NAN, 0.0};             // non-finite
        return {tag, 1.0};
    }

private:
    std::string id_ = "flaky";
};

FaceTensor tagged(float v) { return faceqa::testing::face_of(Image(2, 2, 3, v)); }

}  // namespace

TEST_CASE("face statistics follow their definition") {
    const auto im = faceqa::testing::random_image(kFaceSize, kFaceSize, 3, 1);
    const auto stats = face_statistics(faceqa::testing::face_of(im));
    const auto luma = luminance(im);
    // 224 / 8 = 28 pixel blocks.
    for (int gy : {0, 3, 7}) {
        for (int gx : {0, 5, 7}) {
            double s = 0;
            for (int y = gy * 28; y < gy * 28 + 28; ++y)
                for (int x = gx * 28; x < gx * 28 + 28; ++x) s += luma[y * kFaceSize + x];
            CHECK(stats[gy * 8 + gx] == doctest::Approx(s / (28 * 28)).epsilon(1e-9));
        }
    }
    for (int c = 0; c < 3; ++c) {
        double s = 0, s2 = 0;
        const double n = kFaceSize * kFaceSize;
        for (int i = 0; i < kFaceSize * kFaceSize; ++i) {
            s += im.data[3 * i + c];
            s2 += double(im.data[3 * i + c]) * im.data[3 * i + c];
        }
        CHECK(stats[64 + c] == doctest::Approx(s / n).epsilon(1e-9));
        CHECK(stats[67 + c] == doctest::Approx(std::sqrt(s2 / n - (s / n) * (s / n))).epsilon(1e-7));
    }
}

TEST_CASE("test backend is a seeded normalised affine projection") {
    const TestBackend a(16, 3), b(16, 3), c(16, 4);
    CHECK(a.projection() == b.projection());
    CHECK(a.bias() == b.bias());
    CHECK(a.projection() != c.projection());
    CHECK(a.backend_id() != c.backend_id());
    CHECK(a.projection().size() == 16 * kStatCount);
    for (double w : a.projection()) {
        CHECK(w >= -1.0);
        CHECK(w <= 1.0);
    }

    const auto face = faceqa::testing::face_of(faceqa::testing::random_image(kFaceSize, kFaceSize, 3, 2));
    const auto v = a.compute(face);
    REQUIRE(v.size() == 16);
    double norm = 0;
    for (double x : v) norm += x * x;
    CHECK(norm == doctest::Approx(1.0));

    // Independent recomputation from the exposed parameters.
    const auto stats = face_statistics(face);
    std::vector<double> raw(16);
    double rn = 0;
    for (int d = 0; d < 16; ++d) {
        raw[d] = a.bias()[d];
        for (std::size_t k = 0; k < kStatCount; ++k) raw[d] += a.projection()[d * kStatCount + k] * stats[k];
        rn += raw[d] * raw[d];
    }
    for (int d = 0; d < 16; ++d) CHECK(v[d] == doctest::Approx(raw[d] / std::sqrt(rn)).epsilon(1e-12));

    CHECK(a.compute(face) == v);
    CHECK_THROWS_AS(a.project(std::vector<double>(5)), Error);
}

TEST_CASE("embed validates backend output") {
    const FlakyBackend backend;
    CHECK(embed(tagged(0.5f), backend, "x").vector == std::vector<double>{0.5, 1.0});
    CHECK(embed(tagged(0.5f), backend, "x").backend_id == "flaky");
    CHECK_THROWS_AS(embed(tagged(0.85f), backend), Error);
    CHECK_THROWS_AS(embed(tagged(0.75f), backend), Error);
}

TEST_CASE("embed_batch keeps order and reports every failing index") {
    const FlakyBackend backend;
    std::vector<FaceTensor> faces{tagged(0.1f), tagged(0.95f), tagged(0.3f), tagged(0.85f), tagged(0.2f)};
    for (unsigned threads : {1u, 3u}) {
        try {
            embed_batch(faces, backend, {}, threads);
            FAIL("expected BatchError");
        } catch (const BatchError& e) {
            CHECK(e.indices() == std::vector<std::size_t>{1, 3});
            CHECK(e.kind() == ErrorKind::BackendFailure);
        }
    }
    faces.erase(faces.begin() + 3);
    faces.erase(faces.begin() + 1);
    const std::vector<std::string> ids{"a", "b", "c"};
    const auto out = embed_batch(faces, backend, ids, 2);
    REQUIRE(out.size() == 3);
    CHECK(out[1].image_id == "b");
    CHECK(out[1].vector[0] == doctest::Approx(0.3));
}

TEST_CASE("embedding cache round trip is exact") {
    const TestBackend backend(8, 1);
    EmbeddingCache cache(backend.backend_id(), 8);
    for (std::uint64_t s = 0; s < 4; ++s) {
        const auto face = faceqa::testing::face_of(faceqa::testing::random_image(32, 32, 3, s));
        cache.store(embed(face, backend, "img" + std::to_string(s)));
    }
    TempDir dir("cache");
    const auto path = cache_path(dir.path(), backend.backend_id());
    cache.save(path);
    const auto loaded = EmbeddingCache::load(path, backend.backend_id());
    CHECK(loaded.size() == 4);
    CHECK(*loaded.find("img2") == *cache.find("img2"));
    CHECK(loaded.format() == cache.format());

    CHECK_THROWS_AS(EmbeddingCache::load(path, "other"), Error);
    CHECK_THROWS_AS(cache.store({"x", {1, 2, 3}, backend.backend_id()}), Error);
    CHECK_THROWS_AS(cache.store({"x", std::vector<double>(8), "other"}), Error);
}

TEST_CASE("truncated or garbled cache files are rejected") {
    EmbeddingCache cache("b", 3);
    cache.store({"a", {0.1, 0.2, 0.3}, "b"});
    cache.store({"c", {0.4, 0.5, 0.6}, "b"});
    const auto text = cache.format();
    const auto kind = [](std::string_view t) {
        try {
            EmbeddingCache::parse(t, "b");
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::Internal;
    };
    CHECK(kind(text.substr(0, text.size() - 4)) == ErrorKind::CorruptCache);
    CHECK(kind(text.substr(0, text.size() - 1)) == ErrorKind::CorruptCache);
    CHECK(kind("garbage\n") == ErrorKind::CorruptCache);
    CHECK(kind("# backend_id=b dimension=3\na\t0.1,x,0.3\n") == ErrorKind::CorruptCache);
    CHECK(kind("# backend_id=b dimension=3\na\t0.1,0.3\n") == ErrorKind::CorruptCache);
    CHECK(EmbeddingCache::parse(text, "b").size() == 2);
}
