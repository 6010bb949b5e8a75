#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faceqa/compliance.hpp"
#include "faceqa/embeddings.hpp"
#include "faceqa/evaluation.hpp"
#include "faceqa/groundtruth.hpp"
#include "faceqa/qualitymodel.hpp"
#include "faceqa/synth.hpp"

namespace faceqa {

/// "test:<dim>:<seed>" or "http:<dim>:<url>".
struct BackendSpec {
    std::string kind = "test";
    std::size_t dimension = 128;
    std::uint64_t seed = 0;
    std::string url;

    static BackendSpec parse(const std::string& text);
    std::string str() const;
};

std::shared_ptr<const EmbeddingBackend> make_backend(const BackendSpec& spec);

struct PipelineConfig {
    std::filesystem::path manifest;
    std::filesystem::path landmarks;  // optional sidecar; empty = geometric fallback only
    std::filesystem::path output_dir = "faceqa_out";
    std::filesystem::path cache_dir;   // empty = no embedding cache
    std::filesystem::path checkpoint;  // empty = <output_dir>/checkpoint.txt
    std::filesystem::path groundtruth; // empty = <output_dir>/groundtruth.tsv
    std::filesystem::path eval_manifest;  // empty = <output_dir>/manifest_test.tsv
    std::filesystem::path synth_dir;   // empty = output_dir

    BackendSpec groundtruth_backend{"test", 128, 11, {}};
    BackendSpec feature_backend{"test", kDefaultFeatureDim, 23, {}};

    std::size_t train_subjects = 300;
    std::size_t test_subjects = 100;
    std::uint64_t partition_seed = 0;

    TrainConfig train;
    std::uint64_t init_seed = 0;
    bool include_unaligned = true;
    bool include_gallery_labels = false;

    std::uint64_t eval_seed = 0;
    std::size_t histogram_bins = 20;
    std::string comparator = "builtin";  // builtin | external (FACEQA_COMPARATOR_URL / _KEY)

    SynthOptions synth;

    std::string host = "127.0.0.1";
    int port = 8080;
    unsigned threads = 1;
    bool keep_going = false;
    std::filesystem::path score_output;  // empty = stdout
    std::ostream* log = nullptr;         // warnings and notes; null = std::cerr, never serialized

    std::ostream& diagnostics() const;

    /// `key = value` lines; '#' starts a comment.
    static PipelineConfig load(const std::filesystem::path& path);
    static PipelineConfig parse(std::string_view text);
    /// Throws InvalidConfig for unknown keys or malformed values.
    void set(const std::string& key, const std::string& value);
    void apply_override(const std::string& assignment);  // "key=value"
    std::string serialize() const;

    std::filesystem::path checkpoint_path() const;
    std::filesystem::path groundtruth_path() const;
    std::filesystem::path eval_manifest_path() const;
};

void cmd_synth(const PipelineConfig& config);

struct GroundtruthOutputs {
    GroundtruthSet train;
    std::optional<GroundtruthSet> test;
};
GroundtruthOutputs cmd_groundtruth(const PipelineConfig& config);

TrainResult cmd_train(const PipelineConfig& config);

/// Writes `path\tquality` rows. Returns the process exit code: with
/// keep_going, failures become `ERROR:` rows and the result is 0; without it
/// the first failure stops the run with its error's exit code.
int cmd_score(const PipelineConfig& config, std::span<const std::string> images, std::ostream& out);

struct BinSummary {
    QualityBinLabel bin;
    double eer_pct = 0.0;
    std::size_t n_images = 0;
    std::size_t n_mated = 0;
    std::size_t n_nonmated = 0;
    double mean_quality = 0.0;
};

struct EvaluationSummary {
    std::vector<BinSummary> bins;
    std::optional<double> spearman_vs_groundtruth;
    std::size_t n_probes_with_labels = 0;
};
EvaluationSummary cmd_evaluate(const PipelineConfig& config);

/// Blocks serving HTTP until the process is stopped.
int cmd_serve(const PipelineConfig& config);

/// Entry point behind the `faceqa` executable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace faceqa
