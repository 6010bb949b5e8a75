#include "faceqa/pipeline.hpp"

#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>
#include <set>

#include <json.hpp>

#include "faceqa/common.hpp"
#include "faceqa/http_adapters.hpp"

namespace faceqa {

// ---------------------------------------------------------------------------
// Configuration

BackendSpec BackendSpec::parse(const std::string& text) {
    const auto first = text.find(':');
    const auto second = first == std::string::npos ? std::string::npos : text.find(':', first + 1);
    if (second == std::string::npos) throw Error(ErrorKind::InvalidConfig, "backend spec: " + text);
    BackendSpec spec;
    spec.kind = text.substr(0, first);
    try {
        const auto dim = parse_int(std::string_view(text).substr(first + 1, second - first - 1));
        if (dim <= 0) throw std::invalid_argument("dimension");
        spec.dimension = static_cast<std::size_t>(dim);
        const auto rest = text.substr(second + 1);
        if (spec.kind == "test") spec.seed = static_cast<std::uint64_t>(parse_int(rest));
        else if (spec.kind == "http") spec.url = rest;
        else throw std::invalid_argument("kind");
    } catch (const std::invalid_argument&) {
        throw Error(ErrorKind::InvalidConfig, "backend spec: " + text);
    }
    return spec;
}

std::string BackendSpec::str() const {
    return kind + ":" + std::to_string(dimension) + ":" + (kind == "test" ? std::to_string(seed) : url);
}

std::shared_ptr<const EmbeddingBackend> make_backend(const BackendSpec& spec) {
    if (spec.kind == "test") return make_test_backend(spec.dimension, spec.seed);
    if (spec.kind == "http") return std::make_shared<const HttpEmbeddingBackend>(spec.url, spec.dimension);
    throw Error(ErrorKind::InvalidConfig, "unknown backend kind: " + spec.kind);
}

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("not a boolean: " + v);
}

std::uint64_t parse_u64(const std::string& v) {
    const auto x = parse_int(v);
    if (x < 0) throw std::invalid_argument("negative: " + v);
    return static_cast<std::uint64_t>(x);
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

PipelineConfig PipelineConfig::parse(std::string_view text) {
    PipelineConfig config;
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        auto line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::InvalidConfig, "config line " + std::to_string(line_no));
        }
        config.set(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }
    return config;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw Error(ErrorKind::MissingFile, path.string());
    return parse(read_text_file(path));
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
    try {
        if (key == "manifest") manifest = value;
        else if (key == "landmarks") landmarks = value;
        else if (key == "output_dir") output_dir = value;
        else if (key == "cache_dir") cache_dir = value;
        else if (key == "checkpoint") checkpoint = value;
        else if (key == "groundtruth") groundtruth = value;
        else if (key == "eval_manifest") eval_manifest = value;
        else if (key == "synth_dir") synth_dir = value;
        else if (key == "groundtruth_backend") groundtruth_backend = BackendSpec::parse(value);
        else if (key == "feature_backend") feature_backend = BackendSpec::parse(value);
        else if (key == "train_subjects") train_subjects = parse_u64(value);
        else if (key == "test_subjects") test_subjects = parse_u64(value);
        else if (key == "partition_seed") partition_seed = parse_u64(value);
        else if (key == "learning_rate") train.learning_rate = parse_double(value);
        else if (key == "epochs") train.epochs = static_cast<int>(parse_int(value));
        else if (key == "batch_size") train.batch_size = parse_u64(value);
        else if (key == "train_seed") train.seed = parse_u64(value);
        else if (key == "init_seed") init_seed = parse_u64(value);
        else if (key == "include_unaligned") include_unaligned = parse_bool(value);
        else if (key == "include_gallery_labels") include_gallery_labels = parse_bool(value);
        else if (key == "eval_seed") eval_seed = parse_u64(value);
        else if (key == "histogram_bins") histogram_bins = parse_u64(value);
        else if (key == "comparator") {
            if (value != "builtin" && value != "external") throw std::invalid_argument(value);
            comparator = value;
        } else if (key == "synth_subjects") synth.subjects = parse_u64(value);
        else if (key == "synth_images") synth.images_per_subject = parse_u64(value);
        else if (key == "synth_seed") synth.seed = parse_u64(value);
        else if (key == "synth_size") synth.image_size = static_cast<int>(parse_int(value));
        else if (key == "host") host = value;
        else if (key == "port") port = static_cast<int>(parse_int(value));
        else if (key == "threads") threads = static_cast<unsigned>(std::max<long long>(1, parse_int(value)));
        else if (key == "keep_going") keep_going = parse_bool(value);
        else if (key == "score_output") score_output = value;
        else throw Error(ErrorKind::InvalidConfig, "unknown key: " + key);
    } catch (const std::invalid_argument& e) {
        throw Error(ErrorKind::InvalidConfig, key + ": " + e.what());
    }
}

void PipelineConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidConfig, "expected key=value: " + assignment);
    set(std::string(trim(std::string_view(assignment).substr(0, eq))),
        std::string(trim(std::string_view(assignment).substr(eq + 1))));
}

std::string PipelineConfig::serialize() const {
    std::map<std::string, std::string> kv{
        {"manifest", manifest.string()},
        {"landmarks", landmarks.string()},
        {"output_dir", output_dir.string()},
        {"cache_dir", cache_dir.string()},
        {"checkpoint", checkpoint.string()},
        {"groundtruth", groundtruth.string()},
        {"eval_manifest", eval_manifest.string()},
        {"synth_dir", synth_dir.string()},
        {"groundtruth_backend", groundtruth_backend.str()},
        {"feature_backend", feature_backend.str()},
        {"train_subjects", std::to_string(train_subjects)},
        {"test_subjects", std::to_string(test_subjects)},
        {"partition_seed", std::to_string(partition_seed)},
        {"learning_rate", format_exact(train.learning_rate)},
        {"epochs", std::to_string(train.epochs)},
        {"batch_size", std::to_string(train.batch_size)},
        {"train_seed", std::to_string(train.seed)},
        {"init_seed", std::to_string(init_seed)},
        {"include_unaligned", bool_str(include_unaligned)},
        {"include_gallery_labels", bool_str(include_gallery_labels)},
        {"eval_seed", std::to_string(eval_seed)},
        {"histogram_bins", std::to_string(histogram_bins)},
        {"comparator", comparator},
        {"synth_subjects", std::to_string(synth.subjects)},
        {"synth_images", std::to_string(synth.images_per_subject)},
        {"synth_seed", std::to_string(synth.seed)},
        {"synth_size", std::to_string(synth.image_size)},
        {"host", host},
        {"port", std::to_string(port)},
        {"threads", std::to_string(threads)},
        {"keep_going", bool_str(keep_going)},
        {"score_output", score_output.string()},
    };
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

std::ostream& PipelineConfig::diagnostics() const { return log ? *log : std::cerr; }

std::filesystem::path PipelineConfig::checkpoint_path() const {
    return checkpoint.empty() ? output_dir / "checkpoint.txt" : checkpoint;
}

std::filesystem::path PipelineConfig::groundtruth_path() const {
    return groundtruth.empty() ? output_dir / "groundtruth.tsv" : groundtruth;
}

std::filesystem::path PipelineConfig::eval_manifest_path() const {
    return eval_manifest.empty() ? output_dir / "manifest_test.tsv" : eval_manifest;
}

// ---------------------------------------------------------------------------
// Shared stages

namespace {

void echo_config(const PipelineConfig& config, const std::filesystem::path& dir, std::string_view command) {
    write_text_file(dir / ("config." + std::string(command) + ".txt"), config.serialize());
}

std::shared_ptr<const FaceDetector> make_detector(const PipelineConfig& config) {
    if (config.landmarks.empty()) return nullptr;
    return std::make_shared<const SidecarDetector>(SidecarDetector::load(config.landmarks));
}

struct ImageAnalysis {
    std::optional<ComplianceReport> report;
    std::vector<Embedding> embeddings;  // one per requested backend
    bool aligned = false;
};

// Loads, preprocesses and analyses every entry. Embeddings come from the
// per-backend cache when present; new ones are added to it.
std::vector<ImageAnalysis> analyze(const DatasetManifest& manifest, const FaceDetector* detector,
                                   std::span<const EmbeddingBackend* const> backends,
                                   std::span<EmbeddingCache* const> caches, bool want_reports, unsigned threads) {
    std::vector<ImageAnalysis> out(manifest.entries.size());
    parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
        const auto& record = manifest.entries[i];
        const auto face = preprocess_face(load_image(manifest, record), detector, record.image_id);
        auto& a = out[i];
        a.aligned = face.aligned;
        if (want_reports) a.report = run_compliance_tests(face, record.image_id);
        for (std::size_t b = 0; b < backends.size(); ++b) {
            const Embedding* cached = caches[b] != nullptr ? caches[b]->find(record.image_id) : nullptr;
            a.embeddings.push_back(cached != nullptr ? *cached : embed(face, *backends[b], record.image_id));
        }
    });
    for (std::size_t b = 0; b < backends.size(); ++b) {
        if (caches[b] == nullptr) continue;
        for (const auto& a : out) caches[b]->store(a.embeddings[b]);
    }
    return out;
}

std::unique_ptr<EmbeddingCache> open_cache(const PipelineConfig& config, const EmbeddingBackend& backend) {
    if (config.cache_dir.empty()) return nullptr;
    const auto path = cache_path(config.cache_dir, backend.backend_id());
    if (std::filesystem::exists(path)) {
        return std::make_unique<EmbeddingCache>(EmbeddingCache::load(path, backend.backend_id()));
    }
    return std::make_unique<EmbeddingCache>(backend.backend_id(), backend.dimension());
}

void close_cache(const PipelineConfig& config, const EmbeddingCache* cache) {
    if (cache != nullptr) cache->save(cache_path(config.cache_dir, cache->backend_id()));
}

DatasetManifest load_split_manifest(const std::filesystem::path& path, Split split) {
    auto m = load_manifest(path);
    m.split = split;
    return m;
}

// Manifests written to the output directory carry absolute image paths.
DatasetManifest with_absolute_paths(DatasetManifest m) {
    for (auto& e : m.entries) e.path = std::filesystem::absolute(m.resolve(e)).lexically_normal().string();
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands

void cmd_synth(const PipelineConfig& config) {
    const auto dir = config.synth_dir.empty() ? config.output_dir : config.synth_dir;
    write_synthetic(dir, config.synth);
    echo_config(config, dir, "synth");
}

GroundtruthOutputs cmd_groundtruth(const PipelineConfig& config) {
    auto manifest = load_manifest(config.manifest);
    DatasetManifest train, test;
    if (config.train_subjects == 0 && config.test_subjects == 0) {
        train = manifest;
        train.split = Split::Train;
    } else {
        std::tie(train, test) =
            partition_subjects(manifest, config.train_subjects, config.test_subjects, config.partition_seed);
    }

    const auto detector = make_detector(config);
    const auto backend = make_backend(config.groundtruth_backend);
    auto cache = open_cache(config, *backend);
    const EmbeddingBackend* backends[] = {backend.get()};
    EmbeddingCache* caches[] = {cache.get()};
    GroundtruthOptions options{config.include_gallery_labels};

    auto label_split = [&](DatasetManifest& split, std::string_view name) {
        const auto analysis = analyze(split, detector.get(), backends, caches, true, config.threads);
        std::vector<ComplianceReport> reports;
        EmbeddingTable table;
        for (std::size_t i = 0; i < analysis.size(); ++i) {
            reports.push_back(*analysis[i].report);
            table.emplace(split.entries[i].image_id, analysis[i].embeddings[0]);
        }
        const auto gallery = select_gallery(split, reports);
        auto set = build_groundtruth(split, gallery, table, options);
        set.backend_id = backend->backend_id();
        if (set.normalization.degenerate) {
            config.diagnostics() << "warning: DegenerateNormalization in " << name << " split (d_min == d_max == "
                      << format_g9(set.normalization.d_min) << "); all labels set to 0.5\n";
        }
        const auto suffix = std::string(name);
        save_manifest(config.output_dir / ("manifest_" + suffix + ".tsv"), with_absolute_paths(split));
        save_reports(config.output_dir / ("compliance_" + suffix + ".tsv"), reports);
        save_gallery(config.output_dir / ("gallery_" + suffix + ".tsv"), gallery);
        return set;
    };

    GroundtruthOutputs outputs;
    outputs.train = label_split(train, "train");
    save_groundtruth(config.groundtruth_path(), outputs.train);
    if (!test.entries.empty()) {
        outputs.test = label_split(test, "test");
        save_groundtruth(config.output_dir / "groundtruth_test.tsv", *outputs.test);
    }
    close_cache(config, cache.get());
    echo_config(config, config.output_dir, "groundtruth");
    return outputs;
}

TrainResult cmd_train(const PipelineConfig& config) {
    const auto labels = load_groundtruth(config.groundtruth_path());
    if (labels.labels.empty()) throw Error(ErrorKind::EmptyDataset, config.groundtruth_path().string());
    const auto manifest = load_split_manifest(config.output_dir / "manifest_train.tsv", Split::Train);

    DatasetManifest labeled{{}, Split::Train, manifest.base_dir};
    for (const auto& l : labels.labels) {
        const auto* record = manifest.find(l.image_id);
        if (record == nullptr) throw Error(ErrorKind::MissingReport, l.image_id);
        labeled.entries.push_back(*record);
    }

    const auto detector = make_detector(config);
    const auto backend = make_backend(config.feature_backend);
    auto cache = open_cache(config, *backend);
    const EmbeddingBackend* backends[] = {backend.get()};
    EmbeddingCache* caches[] = {cache.get()};
    const auto analysis = analyze(labeled, detector.get(), backends, caches, false, config.threads);
    close_cache(config, cache.get());

    std::vector<TrainingSample> samples;
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        if (!config.include_unaligned && !analysis[i].aligned) continue;
        samples.push_back({analysis[i].embeddings[0].vector, labels.labels[i].quality});
    }
    auto result = train_head(samples, config.train, config.init_seed);

    Checkpoint ck{result.params, backend->backend_id(), config.train, result.loss_history.back()};
    save_checkpoint(config.checkpoint_path(), ck);
    std::string csv = "epoch,loss\n";
    for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
        csv += std::to_string(e + 1) + "," + format_exact(result.loss_history[e]) + "\n";
    }
    write_text_file(config.output_dir / "loss_history.csv", csv);
    echo_config(config, config.output_dir, "train");
    return result;
}

int cmd_score(const PipelineConfig& config, std::span<const std::string> images, std::ostream& out) {
    const auto checkpoint = load_checkpoint(config.checkpoint_path());
    const auto backend = make_backend(config.feature_backend);
    if (checkpoint.backend_id != backend->backend_id()) {
        throw Error(ErrorKind::BackendMismatch, checkpoint.backend_id + ", " + backend->backend_id());
    }
    const auto detector = make_detector(config);
    out << "path\tquality\n";
    for (const auto& path : images) {
        try {
            const auto id = std::filesystem::path(path).stem().string();
            const auto face = preprocess_face(read_image(path), detector.get(), id);
            out << path << '\t' << format_g9(predict_quality(face, *backend, checkpoint)) << '\n';
        } catch (const Error& e) {
            out << path << "\tERROR:" << to_string(e.kind()) << '\n';
            if (!config.keep_going) return e.exit_code();
        }
    }
    return 0;
}

EvaluationSummary cmd_evaluate(const PipelineConfig& config) {
    const auto manifest = load_split_manifest(config.eval_manifest_path(), Split::Test);
    if (manifest.subjects().size() < 2) throw Error(ErrorKind::SingleSubject, config.eval_manifest_path().string());
    const auto checkpoint = load_checkpoint(config.checkpoint_path());
    const auto feature_backend = make_backend(config.feature_backend);
    if (checkpoint.backend_id != feature_backend->backend_id()) {
        throw Error(ErrorKind::BackendMismatch, checkpoint.backend_id + ", " + feature_backend->backend_id());
    }
    const auto gt_backend = make_backend(config.groundtruth_backend);
    const auto detector = make_detector(config);

    auto feature_cache = open_cache(config, *feature_backend);
    auto gt_cache = open_cache(config, *gt_backend);
    const EmbeddingBackend* backends[] = {feature_backend.get(), gt_backend.get()};
    EmbeddingCache* caches[] = {feature_cache.get(), gt_cache.get()};
    const auto analysis = analyze(manifest, detector.get(), backends, caches, false, config.threads);
    close_cache(config, feature_cache.get());
    close_cache(config, gt_cache.get());

    std::vector<QualityEntry> qualities;
    std::map<std::string, const Embedding*, std::less<>> gt_embeddings;
    std::string quality_tsv = "image_id\tquality\n";
    for (std::size_t i = 0; i < analysis.size(); ++i) {
        const auto& id = manifest.entries[i].image_id;
        const double q = predict_quality(analysis[i].embeddings[0].vector, checkpoint.params);
        qualities.emplace_back(id, q);
        gt_embeddings[id] = &analysis[i].embeddings[1];
        quality_tsv += id + '\t' + format_g9(q) + '\n';
    }
    write_text_file(config.output_dir / "qualities.tsv", quality_tsv);

    PairScorer scorer;
    std::unique_ptr<Comparator> external;
    std::map<std::string, FaceTensor, std::less<>> faces;
    std::mutex faces_mutex;
    if (config.comparator == "external") {
        const char* url = std::getenv("FACEQA_COMPARATOR_URL");
        const char* key = std::getenv("FACEQA_COMPARATOR_KEY");
        if (url == nullptr) throw Error(ErrorKind::InvalidConfig, "FACEQA_COMPARATOR_URL is not set");
        external = std::make_unique<HttpComparator>(url, key != nullptr ? key : "");
        auto face_of = [&](const std::string& id) {
            std::lock_guard lock(faces_mutex);
            auto it = faces.find(id);
            if (it == faces.end()) {
                const auto* record = manifest.find(id);
                it = faces.emplace(id, preprocess_face(load_image(manifest, *record), detector.get(), id)).first;
            }
            return it->second;
        };
        scorer = [&, face_of](const std::string& a, const std::string& b) {
            return compare(face_of(a), face_of(b), *external).score;
        };
    } else {
        scorer = [&](const std::string& a, const std::string& b) {
            return score_from_distance(mated_distance(*gt_embeddings.at(a), *gt_embeddings.at(b)));
        };
    }

    EvaluationSummary summary;
    nlohmann::json bins_json = nlohmann::json::array();
    const auto bins = tertile_split(qualities);
    std::map<std::string, double, std::less<>> quality_of(qualities.begin(), qualities.end());
    for (const auto& bin : bins) {
        const auto scores = generate_scores(bin, manifest, scorer, config.eval_seed, config.threads);
        if (scores.unpaired_images > 0) {
            config.diagnostics() << "note: " << scores.unpaired_images << " image(s) in " << to_string(bin.label)
                      << " have no same-subject partner\n";
        }
        const auto det = compute_det(scores);
        const auto name = std::string(to_string(bin.label));
        save_scores(config.output_dir / ("scores_" + name + ".tsv"), scores.comparisons);
        write_text_file(config.output_dir / ("det_" + name + ".csv"), format_det(det));

        BinSummary b{bin.label, det.eer_pct, bin.image_ids.size(), scores.mated.size(), scores.non_mated.size(), 0.0};
        for (const auto& id : bin.image_ids) b.mean_quality += quality_of.at(id);
        b.mean_quality /= static_cast<double>(bin.image_ids.size());
        summary.bins.push_back(b);
        bins_json.push_back({{"bin", name},
                             {"eer_pct", b.eer_pct},
                             {"n_images", b.n_images},
                             {"n_mated", b.n_mated},
                             {"n_nonmated", b.n_nonmated},
                             {"mean_quality", b.mean_quality}});
    }

    std::vector<double> all_q;
    for (const auto& [id, q] : qualities) all_q.push_back(q);
    write_text_file(config.output_dir / "histogram.csv",
                    format_histogram(quality_histogram(all_q, config.histogram_bins)));

    nlohmann::json summary_json{
        {"bins", bins_json},
        {"comparator", config.comparator == "external" ? external->id() : "builtin:" + gt_backend->backend_id()},
        {"pair_protocol",
         "mated: unordered same-subject pairs with at least one member in the bin, no self pairs; "
         "non-mated: each bin image against all images of one seeded random other subject"},
        {"eval_seed", config.eval_seed},
    };
    const auto gt_test = config.output_dir / "groundtruth_test.tsv";
    if (std::filesystem::exists(gt_test)) {
        const auto labels = load_groundtruth(gt_test);
        std::vector<double> predicted, truth;
        for (const auto& l : labels.labels) {
            auto it = quality_of.find(l.image_id);
            if (it == quality_of.end()) continue;
            predicted.push_back(it->second);
            truth.push_back(l.quality);
        }
        summary.n_probes_with_labels = predicted.size();
        if (predicted.size() >= 2) {
            summary.spearman_vs_groundtruth = spearman(predicted, truth);
            summary_json["spearman_vs_groundtruth"] = *summary.spearman_vs_groundtruth;
            summary_json["n_labeled_probes"] = predicted.size();
        }
    }
    write_text_file(config.output_dir / "summary.json", summary_json.dump(2) + "\n");
    echo_config(config, config.output_dir, "evaluate");
    return summary;
}

}  // namespace faceqa
