#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "faceqa/embeddings.hpp"

namespace faceqa {

inline constexpr std::size_t kHiddenUnits = 32;
inline constexpr std::size_t kDefaultFeatureDim = 2048;

/// Two-layer regression head: h = relu(W1ᵀx + b1), y = w2ᵀh + b2.
/// W1 is F×32; it is stored hidden-major so that w1[j*F + i] = W1(i, j).
struct HeadParameters {
    std::size_t feature_dim = 0;
    std::vector<double> w1;
    std::vector<double> b1;
    std::vector<double> w2;
    double b2 = 0.0;

    static HeadParameters zeros(std::size_t feature_dim);

    double& W1(std::size_t i, std::size_t j) { return w1[j * feature_dim + i]; }
    double W1(std::size_t i, std::size_t j) const { return w1[j * feature_dim + i]; }
    std::span<const double> column(std::size_t j) const {
        return std::span<const double>(w1).subspan(j * feature_dim, feature_dim);
    }

    bool consistent() const;
    bool finite() const;

    friend bool operator==(const HeadParameters&, const HeadParameters&) = default;
};

/// Gradients share the parameter layout.
using HeadGradients = HeadParameters;

/// Raw (unclamped) head output.
double head_forward(std::span<const double> features, const HeadParameters& params);

/// Gradients of (y - target)² with respect to every parameter. The ReLU
/// derivative at exactly zero is taken as 0.
HeadGradients head_gradients(std::span<const double> features, double target, const HeadParameters& params);

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;  // drives the per-epoch shuffle

    /// Canonical text form, also the input of `digest`.
    std::string canonical() const;
    std::string digest() const;
};

struct TrainingSample {
    std::vector<double> features;
    double label = 0.0;
};

struct TrainResult {
    HeadParameters params;
    std::vector<double> loss_history;  // mean training loss per epoch
};

/// W1, w2 ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
HeadParameters init_head(std::size_t feature_dim, std::uint64_t init_seed);

/// Visiting order for every epoch, each a seeded shuffle continuing one stream.
std::vector<std::vector<std::size_t>> epoch_orders(std::size_t n, int epochs, std::uint64_t seed);

/// Plain mini-batch gradient descent on mean squared error. Batch gradients
/// are summed in visiting order. The epoch loss is the mean of per-sample
/// losses evaluated before each batch update.
TrainResult train_head(std::span<const TrainingSample> data, const TrainConfig& config, std::uint64_t init_seed);

/// Same loop with explicit initial parameters and visiting orders.
TrainResult train_head(std::span<const TrainingSample> data, const TrainConfig& config, HeadParameters init,
                       const std::vector<std::vector<std::size_t>>& orders);

double clamp_quality(double raw);

struct Checkpoint {
    HeadParameters params;
    std::string backend_id;
    TrainConfig config;
    double final_loss = 0.0;
};

/// clamp(head_forward(features), 0, 1).
double predict_quality(std::span<const double> features, const HeadParameters& params);
double predict_quality(const FaceTensor& face, const EmbeddingBackend& feature_backend,
                       const HeadParameters& params);
/// Also checks that the checkpoint was trained on `feature_backend`.
double predict_quality(const FaceTensor& face, const EmbeddingBackend& feature_backend,
                       const Checkpoint& checkpoint);

inline constexpr std::string_view kCheckpointMagic = "FACEQHEAD v1";

std::string format_checkpoint(const Checkpoint& checkpoint);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace faceqa
