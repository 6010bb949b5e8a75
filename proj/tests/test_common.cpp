#include <doctest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <set>

#include "faceqa/common.hpp"

using namespace faceqa;

TEST_CASE("exit codes follow the documented table") {
    CHECK(exit_code(ErrorKind::MissingFile) == 2);
    CHECK(exit_code(ErrorKind::DuplicateImageId) == 2);
    CHECK(exit_code(ErrorKind::InvalidConfig) == 2);
    CHECK(exit_code(ErrorKind::InsufficientSubjects) == 3);
    CHECK(exit_code(ErrorKind::EmptyDataset) == 3);
    CHECK(exit_code(ErrorKind::SingleSubject) == 3);
    CHECK(exit_code(ErrorKind::BackendFailure) == 4);
    CHECK(exit_code(ErrorKind::ScoreOutOfRange) == 4);
    CHECK(exit_code(ErrorKind::Internal) == 5);
    const Error e(ErrorKind::DuplicateImageId, "a01");
    CHECK(e.detail() == "a01");
    CHECK(std::string(e.what()).find("a01") != std::string::npos);
}

TEST_CASE("number formatting") {
    CHECK(format_g9(0.5) == "0.5");
    CHECK(format_g9(2.0 / 3.0) == "0.666666667");
    CHECK(format_g9(1e-12) == "1e-12");

    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<int>(rng.below(30)) - 15);
        CHECK(parse_double(format_exact(v)) == v);
    }
    CHECK(parse_double(" 1.25 ") == 1.25);
    CHECK_THROWS(parse_double("1.2x"));
    CHECK_THROWS(parse_double(""));
    CHECK(parse_int("-42") == -42);
    CHECK_THROWS(parse_int("4.2"));
}

TEST_CASE("split and trim") {
    const auto parts = split("a\t\tb", '\t');
    REQUIRE(parts.size() == 3);
    CHECK(parts[0] == "a");
    CHECK(parts[1].empty());
    CHECK(parts[2] == "b");
    CHECK(trim("  x y \r\n") == "x y");
}

TEST_CASE("fnv1a matches the published test vectors") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("rng is seed-deterministic and in range") {
    Rng a(9), b(9), c(10);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        CHECK(x == b.uniform());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        differs = differs || x != c.uniform();
        const auto k = a.below(7);
        CHECK(k == b.below(7));
        CHECK(k < 7);
    }
    CHECK(differs);

    Rng n(1);
    double sum = 0, sq = 0;
    const int count = 20000;
    for (int i = 0; i < count; ++i) {
        const double v = n.normal();
        sum += v;
        sq += v * v;
    }
    CHECK(std::abs(sum / count) < 0.05);
    CHECK(std::abs(sq / count - 1.0) < 0.05);
}

TEST_CASE("shuffle is a permutation") {
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    Rng rng(4);
    rng.shuffle(v);
    CHECK(std::set<int>(v.begin(), v.end()).size() == 50);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);

    std::atomic<int> visited{0};
    CHECK_THROWS_AS(parallel_for(20, 3,
                                 [&](std::size_t i) {
                                     visited++;
                                     if (i == 5) throw Error(ErrorKind::Internal, "boom");
                                 }),
                    Error);
    CHECK(visited.load() == 20);
}
