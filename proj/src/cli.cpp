#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>

#include "faceqa/common.hpp"
#include "faceqa/pipeline.hpp"
#include "faceqa/service.hpp"

namespace faceqa {

int cmd_serve(const PipelineConfig& config) {
    const auto backend = make_backend(config.feature_backend);
    std::optional<Checkpoint> checkpoint;
    if (std::filesystem::exists(config.checkpoint_path())) checkpoint = load_checkpoint(config.checkpoint_path());
    else config.diagnostics() << "warning: no checkpoint at " << config.checkpoint_path() << "; /v1/quality answers 503\n";
    std::shared_ptr<const FaceDetector> detector;
    if (!config.landmarks.empty()) {
        detector = std::make_shared<const SidecarDetector>(SidecarDetector::load(config.landmarks));
    }
    const QualityService service(backend, std::move(checkpoint), detector);
    httplib::Server server;
    server.new_task_queue = [&] { return new httplib::ThreadPool(std::max(1u, config.threads)); };
    service.mount(server);
    config.diagnostics() << "listening on " << config.host << ":" << config.port << "\n";
    if (!server.listen(config.host, config.port)) {
        throw Error(ErrorKind::BackendFailure, "cannot bind " + config.host + ":" + std::to_string(config.port));
    }
    return 0;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Face image quality assessment pipeline", "faceqa"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    bool keep_going = false;
    std::vector<std::string> images;

    const char* names[] = {"groundtruth", "train", "score", "evaluate", "synth", "serve"};
    for (const char* name : names) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config,-c", config_path, "key = value config file");
        sub->add_option("--set,-s", overrides, "override a config key (key=value), repeatable");
        sub->add_flag("--keep-going", keep_going, "record per-image failures and continue");
        if (std::string_view(name) == "score") sub->add_option("images", images, "image files")->required();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostream& stream = e.get_exit_code() == 0 ? out : err;
        stream << (e.get_exit_code() == 0 ? app.help() : std::string(e.what()) + "\n");
        return e.get_exit_code() == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        PipelineConfig config = config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);
        for (const auto& o : overrides) config.apply_override(o);
        if (keep_going) config.keep_going = true;
        config.log = &err;

        if (command == "synth") {
            cmd_synth(config);
        } else if (command == "groundtruth") {
            const auto outputs = cmd_groundtruth(config);
            out << "labels: " << outputs.train.labels.size() << " train";
            if (outputs.test) out << ", " << outputs.test->labels.size() << " test";
            out << "\n";
        } else if (command == "train") {
            const auto result = cmd_train(config);
            out << "final loss: " << format_g9(result.loss_history.back()) << "\n";
        } else if (command == "score") {
            if (config.score_output.empty()) return cmd_score(config, images, out);
            std::filesystem::create_directories(std::filesystem::absolute(config.score_output).parent_path());
            std::ofstream file(config.score_output, std::ios::binary);
            return cmd_score(config, images, file);
        } else if (command == "evaluate") {
            const auto summary = cmd_evaluate(config);
            for (const auto& b : summary.bins) {
                out << to_string(b.bin) << "\tEER " << format_g9(b.eer_pct) << "%\n";
            }
            if (summary.spearman_vs_groundtruth) {
                out << "spearman vs groundtruth: " << format_g9(*summary.spearman_vs_groundtruth) << "\n";
            }
        } else if (command == "serve") {
            return cmd_serve(config);
        }
        return 0;
    } catch (const BatchError& e) {
        err << "error: " << e.what() << " (" << e.indices().size() << " item(s))\n";
        return e.exit_code();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 5;
    }
}

}  // namespace faceqa
