#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "faceqa/pipeline.hpp"
#include "support.hpp"

using namespace faceqa;
using faceqa::testing::TempDir;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "faceqa");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// Small but complete configuration: 6 subjects x 4 images, 4/2 split.
std::string write_config(const TempDir& dir, const std::string& out = "out") {
    const auto d = dir.path().string();
    const std::string text = "# test pipeline\n"
                             "synth_dir = " + d + "/data\n"
                             "synth_subjects = 6\n"
                             "synth_images = 4\n"
                             "synth_size = 96\n"
                             "synth_seed = 3\n"
                             "manifest = " + d + "/data/manifest.tsv\n"
                             "landmarks = " + d + "/data/landmarks.tsv\n"
                             "output_dir = " + d + "/" + out + "\n"
                             "feature_backend = test:64:23\n"
                             "groundtruth_backend = test:32:11\n"
                             "train_subjects = 4\n"
                             "test_subjects = 2\n"
                             "epochs = 5\n"
                             "batch_size = 4\n"
                             "learning_rate = 0.01\n";
    const auto path = dir / ("config_" + out + ".txt");
    write_text_file(path, text);
    return path.string();
}

}  // namespace

TEST_CASE("backend spec text form") {
    const auto t = BackendSpec::parse("test:128:11");
    CHECK(t.kind == "test");
    CHECK(t.dimension == 128);
    CHECK(t.seed == 11);
    CHECK(t.str() == "test:128:11");
    const auto h = BackendSpec::parse("http:2048:http://localhost:9000/embed");
    CHECK(h.url == "http://localhost:9000/embed");
    CHECK(h.str() == "http:2048:http://localhost:9000/embed");
    CHECK_THROWS_AS(BackendSpec::parse("test:0:1"), Error);
    CHECK_THROWS_AS(BackendSpec::parse("grpc:8:x"), Error);
    CHECK_THROWS_AS(BackendSpec::parse("test"), Error);
}

TEST_CASE("config parse, override and serialize") {
    auto c = PipelineConfig::parse("learning_rate = 0.5  # trailing comment\n\n# comment\nepochs=7\nkeep_going = true\n");
    CHECK(c.train.learning_rate == 0.5);
    CHECK(c.train.epochs == 7);
    CHECK(c.keep_going);
    CHECK(c.train.batch_size == 32);
    CHECK(c.train_subjects == 300);
    CHECK(c.test_subjects == 100);

    c.apply_override("batch_size=3");
    CHECK(c.train.batch_size == 3);
    CHECK_THROWS_AS(c.apply_override("batch_size"), Error);
    CHECK_THROWS_AS(c.apply_override("no_such_key=1"), Error);
    CHECK_THROWS_AS(c.apply_override("epochs=many"), Error);
    CHECK_THROWS_AS(PipelineConfig::parse("epochs\n"), Error);

    const auto text = c.serialize();
    CHECK(PipelineConfig::parse(text).serialize() == text);
    CHECK(text.find("batch_size = 3\n") != std::string::npos);

    try {
        PipelineConfig::load("/nonexistent/config.txt");
        FAIL("expected MissingFile");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingFile);
    }
}

TEST_CASE("cli usage errors exit with 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"score"}).code == 2);  // images are required
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"train", "--set", "bogus=1"}).code == 2);
}

TEST_CASE("missing manifest exits with 2") {
    TempDir dir("cli_missing");
    const auto r = run({"groundtruth", "-s", "manifest=" + (dir / "nope.tsv").string(), "-s",
                        "output_dir=" + dir.path().string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("MissingFile") != std::string::npos);
}

TEST_CASE("full pipeline through the cli") {
    TempDir dir("cli_full");
    const auto cfg = write_config(dir);
    const auto out = dir.path() / "out";

    REQUIRE(run({"synth", "-c", cfg}).code == 0);
    const auto manifest = load_manifest(dir / "data/manifest.tsv");
    CHECK(manifest.entries.size() == 24);
    CHECK(manifest.subjects().size() == 6);
    CHECK(std::filesystem::exists(dir / "data/degradation.tsv"));
    CHECK(std::filesystem::exists(dir / "data/config.synth.txt"));

    auto r = run({"groundtruth", "-c", cfg});
    REQUIRE(r.code == 0);
    const auto gt = load_groundtruth(out / "groundtruth.tsv");
    CHECK(gt.labels.size() == 4 * 3);  // one label per train probe
    CHECK(load_groundtruth(out / "groundtruth_test.tsv").labels.size() == 2 * 3);
    CHECK(load_gallery(out / "gallery_train.tsv").size() == 4);
    for (const char* f : {"manifest_train.tsv", "manifest_test.tsv", "compliance_train.tsv", "config.groundtruth.txt"}) {
        CHECK(std::filesystem::exists(out / f));
    }
    // The echoed config is itself a loadable config.
    CHECK(PipelineConfig::load(out / "config.groundtruth.txt").serialize() == read_text_file(out / "config.groundtruth.txt"));

    r = run({"train", "-c", cfg});
    REQUIRE(r.code == 0);
    const auto ck = load_checkpoint(out / "checkpoint.txt");
    CHECK(ck.params.feature_dim == 64);
    CHECK(ck.config.epochs == 5);
    const auto loss = read_text_file(out / "loss_history.csv");
    CHECK(loss.starts_with("epoch,loss\n1,"));
    CHECK(std::count(loss.begin(), loss.end(), '\n') == 6);

    const auto img = (dir / "data/images").string() + "/" + manifest.entries[0].image_id + ".png";
    r = run({"score", "-c", cfg, img, img});
    REQUIRE(r.code == 0);
    std::istringstream rows(r.out);
    std::string header, row1, row2;
    std::getline(rows, header);
    std::getline(rows, row1);
    std::getline(rows, row2);
    CHECK(header == "path\tquality");
    CHECK(row1 == row2);
    const double q = std::stod(row1.substr(row1.find('\t') + 1));
    CHECK(q >= 0.0);
    CHECK(q <= 1.0);

    r = run({"evaluate", "-c", cfg});
    REQUIRE(r.code == 0);
    for (const char* bin : {"LowQ", "MediumQ", "HighQ"}) {
        CHECK(std::filesystem::exists(out / (std::string("det_") + bin + ".csv")));
        CHECK(std::filesystem::exists(out / (std::string("scores_") + bin + ".tsv")));
    }
    CHECK(std::filesystem::exists(out / "histogram.csv"));
    const auto summary = nlohmann::json::parse(read_text_file(out / "summary.json"));
    CHECK(summary.at("bins").size() == 3);
    for (const auto& b : summary.at("bins")) {
        CHECK(b.at("eer_pct").get<double>() >= 0.0);
        CHECK(b.at("eer_pct").get<double>() <= 100.0);
    }
    CHECK(summary.contains("spearman_vs_groundtruth"));
    CHECK(summary.at("n_labeled_probes").get<int>() == 6);

    SUBCASE("rerun with the same seeds is byte-identical") {
        const auto cfg2 = write_config(dir, "out2");
        const auto out2 = dir.path() / "out2";
        REQUIRE(run({"groundtruth", "-c", cfg2}).code == 0);
        REQUIRE(run({"train", "-c", cfg2}).code == 0);
        REQUIRE(run({"evaluate", "-c", cfg2}).code == 0);
        for (const char* f : {"groundtruth.tsv", "groundtruth_test.tsv", "checkpoint.txt", "loss_history.csv",
                              "summary.json", "qualities.tsv", "det_LowQ.csv", "histogram.csv"}) {
            CHECK_MESSAGE(read_text_file(out / f) == read_text_file(out2 / f), f);
        }
    }

    SUBCASE("embedding cache gives the same labels") {
        const auto cache = (dir / "cache").string();
        REQUIRE(run({"groundtruth", "-c", cfg, "-s", "cache_dir=" + cache, "-s", "output_dir=" + (dir / "c1").string()}).code == 0);
        REQUIRE(run({"groundtruth", "-c", cfg, "-s", "cache_dir=" + cache, "-s", "output_dir=" + (dir / "c2").string()}).code == 0);
        CHECK(read_text_file(dir / "c1/groundtruth.tsv") == read_text_file(out / "groundtruth.tsv"));
        CHECK(read_text_file(dir / "c2/groundtruth.tsv") == read_text_file(out / "groundtruth.tsv"));
        CHECK_FALSE(std::filesystem::is_empty(dir / "cache"));
    }

    SUBCASE("threads do not change results") {
        REQUIRE(run({"groundtruth", "-c", cfg, "-s", "threads=4", "-s", "output_dir=" + (dir / "t4").string()}).code == 0);
        CHECK(read_text_file(dir / "t4/groundtruth.tsv") == read_text_file(out / "groundtruth.tsv"));
    }

    SUBCASE("unreadable image: error row, keep-going decides the exit code") {
        write_text_file(dir / "broken.png", "not a png");
        const auto broken = (dir / "broken.png").string();
        auto s = run({"score", "-c", cfg, broken, img});
        CHECK(s.code == 2);
        CHECK(s.out.find(broken + "\tERROR:DecodeError") != std::string::npos);
        s = run({"score", "-c", cfg, "--keep-going", broken, img});
        CHECK(s.code == 0);
        CHECK(s.out.find(broken + "\tERROR:DecodeError") != std::string::npos);
        CHECK(s.out.find(img + "\t") != std::string::npos);
    }

    SUBCASE("score output file") {
        const auto path = (dir / "scores/out.tsv").string();
        REQUIRE(run({"score", "-c", cfg, "-s", "score_output=" + path, img}).code == 0);
        CHECK(read_text_file(path).starts_with("path\tquality\n"));
    }

    SUBCASE("checkpoint from another feature backend is refused") {
        const auto s = run({"evaluate", "-c", cfg, "-s", "feature_backend=test:64:24"});
        CHECK(s.code == 3);
        CHECK(s.err.find("BackendMismatch") != std::string::npos);
    }

    SUBCASE("evaluation on one subject fails with SingleSubject") {
        auto test = load_manifest(out / "manifest_test.tsv");
        const auto first = test.entries.front().subject_id;
        std::erase_if(test.entries, [&](const ImageRecord& e) { return e.subject_id != first; });
        save_manifest(dir / "one.tsv", test);
        const auto s = run({"evaluate", "-c", cfg, "-s", "eval_manifest=" + (dir / "one.tsv").string()});
        CHECK(s.code == 3);
        CHECK(s.err.find("SingleSubject") != std::string::npos);
    }

    SUBCASE("empty groundtruth exits with the EmptyDataset code") {
        write_text_file(dir / "empty_gt.tsv", "# backend_id=x d_min=0 d_max=0\n");
        const auto s = run({"train", "-c", cfg, "-s", "groundtruth=" + (dir / "empty_gt.tsv").string()});
        CHECK(s.code == exit_code(ErrorKind::EmptyDataset));
        CHECK(s.err.find("EmptyDataset") != std::string::npos);
    }
}

TEST_CASE("degenerate labels warn") {
    TempDir dir("cli_degenerate");
    // Every image of a subject identical: all mated distances are 0.
    DatasetManifest m;
    m.base_dir = dir.path();
    const auto im = faceqa::testing::random_image(32, 32, 3, 1);
    for (const char* s : {"a", "b"}) {
        for (int i = 0; i < 3; ++i) {
            const std::string id = std::string(s) + std::to_string(i);
            write_png(dir / (id + ".png"), im);
            m.entries.push_back({s, id, id + ".png", Role::Unassigned});
        }
    }
    canonicalize(m);
    save_manifest(dir / "m.tsv", m);
    const auto r = run({"groundtruth", "-s", "manifest=" + (dir / "m.tsv").string(), "-s",
                        "output_dir=" + (dir / "out").string(), "-s", "train_subjects=0", "-s", "test_subjects=0"});
    CHECK(r.code == 0);
    CHECK(r.err.find("DegenerateNormalization") != std::string::npos);
    const auto gt = load_groundtruth(dir / "out/groundtruth.tsv");
    REQUIRE(gt.labels.size() == 4);
    for (const auto& l : gt.labels) CHECK(l.quality == 0.5);
}
