#pragma once

#include "boundwalk/core.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace boundwalk {

class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class Activation { Identity, Relu, Tanh };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view text);

/// Dense layer computing W a + b, W stored row-major with `rows` outputs.
struct DenseLayer {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> weights;
    Vector bias;

    bool operator==(const DenseLayer&) const = default;
};

/// Fully connected classifier. The activation is applied between layers,
/// never after the last one, so the output is the logit vector.
class Model {
  public:
    Model() = default;
    Model(std::vector<DenseLayer> layers, Activation activation);

    std::size_t input_dim() const { return layers_.front().cols; }
    std::size_t num_classes() const { return layers_.back().rows; }
    Activation activation() const { return activation_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& mutable_layers() { return layers_; }

    bool operator==(const Model&) const = default;

  private:
    std::vector<DenseLayer> layers_;
    Activation activation_ = Activation::Identity;
};

struct Dataset {
    std::vector<Vector> samples;
    std::vector<int> labels;
    int num_classes = 0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    /// First `count` entries (or all if fewer).
    Dataset head(std::size_t count) const;
};

Vector forward(const Model& model, std::span<const double> x);

/// Value and input gradient of coeffs . forward(model, x).
struct ScalarGrad {
    double value = 0.0;
    Vector grad;
};
ScalarGrad grad_scalar(const Model& model, std::span<const double> x, std::span<const double> coeffs);

int predict(const Model& model, std::span<const double> x);
double accuracy(const Model& model, const Dataset& data);

struct TrainOptions {
    std::vector<std::size_t> hidden;
    Activation activation = Activation::Relu;
    int epochs = 10;
    double learning_rate = 0.1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

struct TrainResult {
    Model model;
    double train_accuracy = 0.0;
};

/// Mini-batch SGD on softmax cross-entropy. Deterministic for a given seed.
TrainResult train_mlp(const Dataset& data, const TrainOptions& options);

/// Seeded random initialisation used by train_mlp before the first epoch.
Model init_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t num_classes,
               Activation activation, std::uint64_t seed);

/// Gaussian clusters around seeded random centres, clipped to [0, 1].
Dataset make_blobs(std::size_t per_class, int num_classes, std::size_t dim, double spread, std::uint64_t seed);

/// Reads an IDX image/label pair; pixels are scaled to [0, 1].
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace boundwalk
