#include "faceqa/qualitymodel.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "faceqa/common.hpp"
#include "faceqa/kernels.hpp"

namespace faceqa {

namespace {

void check_features(std::span<const double> features, const HeadParameters& params) {
    if (features.size() != params.feature_dim || !params.consistent()) {
        throw Error(ErrorKind::DimensionMismatch,
                    std::to_string(params.feature_dim) + ", " + std::to_string(features.size()));
    }
}

// Adds d(loss)/d(params) for one sample to `acc` and returns the sample loss.
double accumulate_gradients(std::span<const double> x, double target, const HeadParameters& p,
                            HeadGradients& acc) {
    std::array<double, kHiddenUnits> pre{};
    double y = p.b2;
    for (std::size_t j = 0; j < kHiddenUnits; ++j) {
        pre[j] = kernels::dot(p.column(j), x) + p.b1[j];
        if (pre[j] > 0.0) y += p.w2[j] * pre[j];
    }
    const double residual = y - target;
    const double g = 2.0 * residual;
    acc.b2 += g;
    for (std::size_t j = 0; j < kHiddenUnits; ++j) {
        if (pre[j] <= 0.0) continue;
        acc.w2[j] += g * pre[j];
        const double delta = g * p.w2[j];
        acc.b1[j] += delta;
        kernels::axpy(delta, x, std::span<double>(acc.w1).subspan(j * p.feature_dim, p.feature_dim));
    }
    return residual * residual;
}

void apply_update(HeadParameters& p, const HeadGradients& g, double scale) {
    kernels::axpy(-scale, g.w1, p.w1);
    kernels::axpy(-scale, g.b1, p.b1);
    kernels::axpy(-scale, g.w2, p.w2);
    p.b2 -= scale * g.b2;
}

void reset(HeadGradients& g) {
    std::fill(g.w1.begin(), g.w1.end(), 0.0);
    std::fill(g.b1.begin(), g.b1.end(), 0.0);
    std::fill(g.w2.begin(), g.w2.end(), 0.0);
    g.b2 = 0.0;
}

std::string join_row(std::span<const double> values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += '\t';
        out += format_exact(values[i]);
    }
    return out;
}

std::vector<double> parse_row(std::string_view line, std::size_t expected) {
    std::vector<double> out;
    for (auto f : split(line, '\t')) out.push_back(parse_double(f));
    if (out.size() != expected) throw std::invalid_argument("row width");
    return out;
}

}  // namespace

HeadParameters HeadParameters::zeros(std::size_t feature_dim) {
    HeadParameters p;
    p.feature_dim = feature_dim;
    p.w1.assign(feature_dim * kHiddenUnits, 0.0);
    p.b1.assign(kHiddenUnits, 0.0);
    p.w2.assign(kHiddenUnits, 0.0);
    return p;
}

bool HeadParameters::consistent() const {
    return feature_dim > 0 && w1.size() == feature_dim * kHiddenUnits && b1.size() == kHiddenUnits &&
           w2.size() == kHiddenUnits;
}

bool HeadParameters::finite() const {
    auto ok = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return ok(w1) && ok(b1) && ok(w2) && std::isfinite(b2);
}

double head_forward(std::span<const double> features, const HeadParameters& params) {
    check_features(features, params);
    double y = params.b2;
    for (std::size_t j = 0; j < kHiddenUnits; ++j) {
        const double h = std::max(0.0, kernels::dot(params.column(j), features) + params.b1[j]);
        y += params.w2[j] * h;
    }
    return y;
}

HeadGradients head_gradients(std::span<const double> features, double target, const HeadParameters& params) {
    check_features(features, params);
    auto grads = HeadGradients::zeros(params.feature_dim);
    accumulate_gradients(features, target, params, grads);
    return grads;
}

std::string TrainConfig::canonical() const {
    return "learning_rate=" + format_exact(learning_rate) + ";epochs=" + std::to_string(epochs) +
           ";batch_size=" + std::to_string(batch_size) + ";seed=" + std::to_string(seed) + ";loss=mse";
}

std::string TrainConfig::digest() const { return hex64(fnv1a(canonical())); }

HeadParameters init_head(std::size_t feature_dim, std::uint64_t init_seed) {
    auto p = HeadParameters::zeros(feature_dim);
    Rng rng(init_seed);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    for (auto& w : p.w1) w = rng.uniform(-bound1, bound1);
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(kHiddenUnits));
    for (auto& w : p.w2) w = rng.uniform(-bound2, bound2);
    return p;
}

std::vector<std::vector<std::size_t>> epoch_orders(std::size_t n, int epochs, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> orders;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        orders.push_back(order);
    }
    return orders;
}

TrainResult train_head(std::span<const TrainingSample> data, const TrainConfig& config, HeadParameters init,
                       const std::vector<std::vector<std::size_t>>& orders) {
    if (data.empty()) throw Error(ErrorKind::EmptyDataset, "no training samples");
    if (config.epochs <= 0 || config.batch_size == 0 || !(config.learning_rate > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, config.canonical());
    }
    if (orders.size() < static_cast<std::size_t>(config.epochs)) {
        throw Error(ErrorKind::Internal, "missing epoch orders");
    }
    for (const auto& s : data) check_features(s.features, init);

    TrainResult result{std::move(init), {}};
    auto& params = result.params;
    auto grads = HeadGradients::zeros(params.feature_dim);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto& order = orders[static_cast<std::size_t>(epoch)];
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            reset(grads);
            for (std::size_t k = start; k < end; ++k) {
                const auto& s = data[order[k]];
                loss_sum += accumulate_gradients(s.features, s.label, params, grads);
            }
            apply_update(params, grads, config.learning_rate / static_cast<double>(end - start));
        }
        const double mean_loss = loss_sum / static_cast<double>(order.size());
        if (!std::isfinite(mean_loss) || !params.finite()) {
            throw Error(ErrorKind::NonFiniteLoss, std::to_string(epoch));
        }
        result.loss_history.push_back(mean_loss);
    }
    return result;
}

TrainResult train_head(std::span<const TrainingSample> data, const TrainConfig& config, std::uint64_t init_seed) {
    if (data.empty()) throw Error(ErrorKind::EmptyDataset, "no training samples");
    auto init = init_head(data.front().features.size(), init_seed);
    return train_head(data, config, std::move(init), epoch_orders(data.size(), std::max(config.epochs, 0), config.seed));
}

double clamp_quality(double raw) { return std::clamp(raw, 0.0, 1.0); }

double predict_quality(std::span<const double> features, const HeadParameters& params) {
    return clamp_quality(head_forward(features, params));
}

double predict_quality(const FaceTensor& face, const EmbeddingBackend& feature_backend,
                       const HeadParameters& params) {
    return predict_quality(embed(face, feature_backend).vector, params);
}

double predict_quality(const FaceTensor& face, const EmbeddingBackend& feature_backend,
                       const Checkpoint& checkpoint) {
    if (checkpoint.backend_id != feature_backend.backend_id()) {
        throw Error(ErrorKind::BackendMismatch, checkpoint.backend_id + ", " + feature_backend.backend_id());
    }
    return predict_quality(face, feature_backend, checkpoint.params);
}

// ---------------------------------------------------------------------------

std::string format_checkpoint(const Checkpoint& ck) {
    const auto& p = ck.params;
    std::string out(kCheckpointMagic);
    out += "\nbackend_id=" + ck.backend_id + " F=" + std::to_string(p.feature_dim) +
           " loss=" + format_exact(ck.final_loss) + "\n";
    out += "[config]\n";
    out += "learning_rate=" + format_exact(ck.config.learning_rate) + "\n";
    out += "epochs=" + std::to_string(ck.config.epochs) + "\n";
    out += "batch_size=" + std::to_string(ck.config.batch_size) + "\n";
    out += "seed=" + std::to_string(ck.config.seed) + "\n";
    out += "digest=" + ck.config.digest() + "\n";
    out += "[W1]\n";
    std::vector<double> row(kHiddenUnits);
    for (std::size_t i = 0; i < p.feature_dim; ++i) {
        for (std::size_t j = 0; j < kHiddenUnits; ++j) row[j] = p.W1(i, j);
        out += join_row(row) + "\n";
    }
    out += "[b1]\n" + join_row(p.b1) + "\n";
    out += "[w2]\n" + join_row(p.w2) + "\n";
    out += "[b2]\n" + format_exact(p.b2) + "\n";
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    write_text_file(path, format_checkpoint(checkpoint));
}

Checkpoint parse_checkpoint(std::string_view text) {
    auto lines = split(text, '\n');
    std::size_t at = 0;
    auto fail = [&](std::string_view what) {
        return Error(ErrorKind::CorruptCheckpoint, "line " + std::to_string(at + 1) + ": " + std::string(what));
    };
    auto next = [&]() -> std::string_view {
        if (at >= lines.size()) throw fail("unexpected end of file");
        return lines[at++];
    };
    auto expect = [&](std::string_view marker) {
        if (next() != marker) {
            --at;
            throw fail("expected " + std::string(marker));
        }
    };

    Checkpoint ck;
    try {
        expect(kCheckpointMagic);
        std::size_t feature_dim = 0;
        for (auto token : split(next(), ' ')) {
            const auto eq = token.find('=');
            if (eq == std::string_view::npos) throw std::invalid_argument("metadata");
            const auto key = token.substr(0, eq);
            const auto value = token.substr(eq + 1);
            if (key == "backend_id") ck.backend_id = value;
            else if (key == "F") feature_dim = static_cast<std::size_t>(parse_int(value));
            else if (key == "loss") ck.final_loss = parse_double(value);
        }
        if (feature_dim == 0) throw std::invalid_argument("F");
        expect("[config]");
        std::string digest;
        for (int k = 0; k < 5; ++k) {
            const auto line = next();
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) throw std::invalid_argument("config");
            const auto key = line.substr(0, eq);
            const auto value = line.substr(eq + 1);
            if (key == "learning_rate") ck.config.learning_rate = parse_double(value);
            else if (key == "epochs") ck.config.epochs = static_cast<int>(parse_int(value));
            else if (key == "batch_size") ck.config.batch_size = static_cast<std::size_t>(parse_int(value));
            else if (key == "seed") ck.config.seed = static_cast<std::uint64_t>(parse_int(value));
            else if (key == "digest") digest = value;
            else throw std::invalid_argument("config key");
        }
        if (digest != ck.config.digest()) throw std::invalid_argument("config digest");

        ck.params = HeadParameters::zeros(feature_dim);
        expect("[W1]");
        for (std::size_t i = 0; i < feature_dim; ++i) {
            const auto row = parse_row(next(), kHiddenUnits);
            for (std::size_t j = 0; j < kHiddenUnits; ++j) ck.params.W1(i, j) = row[j];
        }
        expect("[b1]");
        ck.params.b1 = parse_row(next(), kHiddenUnits);
        expect("[w2]");
        ck.params.w2 = parse_row(next(), kHiddenUnits);
        expect("[b2]");
        ck.params.b2 = parse_double(next());
    } catch (const std::invalid_argument& e) {
        --at;
        throw fail(e.what());
    }
    if (!ck.params.finite()) throw Error(ErrorKind::CorruptCheckpoint, "non-finite parameters");
    return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw Error(ErrorKind::MissingFile, path.string());
    return parse_checkpoint(read_text_file(path));
}

}  // namespace faceqa
