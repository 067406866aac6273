#include "boundwalk/models.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace boundwalk {

namespace {

double activate(Activation act, double z) {
    switch (act) {
        case Activation::Identity: return z;
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
    }
    return z;
}

// Derivative expressed through the pre-activation; ReLU uses 0 at the kink.
double activate_derivative(Activation act, double z) {
    switch (act) {
        case Activation::Identity: return 1.0;
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
    }
    return 1.0;
}

void affine(const DenseLayer& layer, std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < layer.rows; ++i) {
        const double* row = layer.weights.data() + i * layer.cols;
        double acc = layer.bias[i];
        for (std::size_t j = 0; j < layer.cols; ++j) acc += row[j] * in[j];
        out[i] = acc;
    }
}

// Pre-activations of every layer; the last entry holds the logits.
std::vector<Vector> forward_trace(const Model& model, std::span<const double> x) {
    if (x.size() != model.input_dim())
        throw DimensionError("model expects input of length " + std::to_string(model.input_dim()) +
                             ", got " + std::to_string(x.size()));
    const auto& layers = model.layers();
    std::vector<Vector> pre(layers.size());
    Vector act(x.begin(), x.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        pre[l].resize(layers[l].rows);
        affine(layers[l], act, pre[l]);
        if (l + 1 < layers.size()) {
            act.resize(pre[l].size());
            for (std::size_t i = 0; i < act.size(); ++i) act[i] = activate(model.activation(), pre[l][i]);
        }
    }
    return pre;
}

void softmax_inplace(Vector& v) {
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& e : v) {
        e = std::exp(e - m);
        sum += e;
    }
    for (double& e : v) e /= sum;
}

}  // namespace

std::string_view to_string(Activation act) {
    switch (act) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
    }
    return "?";
}

Activation parse_activation(std::string_view text) {
    if (text == "identity") return Activation::Identity;
    if (text == "relu") return Activation::Relu;
    if (text == "tanh") return Activation::Tanh;
    throw std::invalid_argument("unknown activation '" + std::string(text) + "'");
}

Model::Model(std::vector<DenseLayer> layers, Activation activation)
    : layers_(std::move(layers)), activation_(activation) {
    if (layers_.empty()) throw DimensionError("model needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.rows == 0 || layer.cols == 0) throw DimensionError("empty layer");
        if (layer.weights.size() != layer.rows * layer.cols || layer.bias.size() != layer.rows)
            throw DimensionError("layer " + std::to_string(l) + " has inconsistent weight/bias sizes");
        if (l > 0 && layer.cols != layers_[l - 1].rows)
            throw DimensionError("layer " + std::to_string(l) + " does not chain with its predecessor");
    }
    if (layers_.back().rows < 2) throw DimensionError("model needs at least two classes");
}

Dataset Dataset::head(std::size_t count) const {
    Dataset out;
    out.num_classes = num_classes;
    const std::size_t n = std::min(count, samples.size());
    out.samples.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n));
    out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

Vector forward(const Model& model, std::span<const double> x) {
    auto pre = forward_trace(model, x);
    return std::move(pre.back());
}

ScalarGrad grad_scalar(const Model& model, std::span<const double> x, std::span<const double> coeffs) {
    if (coeffs.size() != model.num_classes())
        throw DimensionError("coefficient vector must have one entry per class");
    const auto pre = forward_trace(model, x);
    const auto& layers = model.layers();

    ScalarGrad out;
    out.value = dot(coeffs, pre.back());

    Vector upstream(coeffs.begin(), coeffs.end());
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& layer = layers[l];
        Vector down(layer.cols, 0.0);
        for (std::size_t i = 0; i < layer.rows; ++i) {
            const double g = upstream[i];
            if (g == 0.0) continue;
            const double* row = layer.weights.data() + i * layer.cols;
            for (std::size_t j = 0; j < layer.cols; ++j) down[j] += g * row[j];
        }
        if (l > 0) {
            for (std::size_t j = 0; j < down.size(); ++j)
                down[j] *= activate_derivative(model.activation(), pre[l - 1][j]);
        }
        upstream = std::move(down);
    }
    out.grad = std::move(upstream);
    return out;
}

int predict(const Model& model, std::span<const double> x) {
    const Vector logits = forward(model, x);
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double accuracy(const Model& model, const Dataset& data) {
    if (data.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) hits += predict(model, data.samples[i]) == data.labels[i];
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

Model init_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t num_classes,
               Activation activation, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(num_classes);

    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        layer.cols = dims[l];
        layer.rows = dims[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.rows + layer.cols));
        std::uniform_real_distribution<double> uni(-limit, limit);
        layer.weights.resize(layer.rows * layer.cols);
        for (double& w : layer.weights) w = uni(rng);
        layer.bias.assign(layer.rows, 0.0);
        layers.push_back(std::move(layer));
    }
    return Model(std::move(layers), activation);
}

TrainResult train_mlp(const Dataset& data, const TrainOptions& options) {
    if (data.empty()) throw std::invalid_argument("train_mlp: empty dataset");
    if (data.labels.size() != data.samples.size()) throw DimensionError("train_mlp: label count mismatch");
    const std::size_t num_classes =
        data.num_classes > 0 ? static_cast<std::size_t>(data.num_classes)
                             : static_cast<std::size_t>(*std::max_element(data.labels.begin(), data.labels.end()) + 1);

    Model model = init_mlp(data.samples.front().size(), options.hidden, std::max<std::size_t>(num_classes, 2),
                           options.activation, options.seed);
    auto& layers = model.mutable_layers();
    const std::size_t depth = layers.size();
    const Activation act = model.activation();

    std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);

    std::vector<std::vector<double>> grad_w(depth);
    std::vector<Vector> grad_b(depth);

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);
            for (std::size_t l = 0; l < depth; ++l) {
                grad_w[l].assign(layers[l].weights.size(), 0.0);
                grad_b[l].assign(layers[l].rows, 0.0);
            }
            for (std::size_t k = start; k < stop; ++k) {
                const Vector& x = data.samples[order[k]];
                const auto pre = forward_trace(model, x);
                Vector delta = pre.back();
                softmax_inplace(delta);
                delta[static_cast<std::size_t>(data.labels[order[k]])] -= 1.0;

                for (std::size_t l = depth; l-- > 0;) {
                    const auto& layer = layers[l];
                    Vector input(layer.cols);
                    if (l == 0) {
                        std::copy(x.begin(), x.end(), input.begin());
                    } else {
                        for (std::size_t j = 0; j < layer.cols; ++j) input[j] = activate(act, pre[l - 1][j]);
                    }
                    Vector down(layer.cols, 0.0);
                    for (std::size_t i = 0; i < layer.rows; ++i) {
                        const double g = delta[i];
                        grad_b[l][i] += g;
                        if (g == 0.0) continue;
                        double* gw = grad_w[l].data() + i * layer.cols;
                        const double* w = layer.weights.data() + i * layer.cols;
                        for (std::size_t j = 0; j < layer.cols; ++j) {
                            gw[j] += g * input[j];
                            down[j] += g * w[j];
                        }
                    }
                    if (l > 0) {
                        for (std::size_t j = 0; j < down.size(); ++j)
                            down[j] *= activate_derivative(act, pre[l - 1][j]);
                    }
                    delta = std::move(down);
                }
            }
            const double scale = options.learning_rate / static_cast<double>(stop - start);
            for (std::size_t l = 0; l < depth; ++l) {
                for (std::size_t i = 0; i < layers[l].weights.size(); ++i) layers[l].weights[i] -= scale * grad_w[l][i];
                for (std::size_t i = 0; i < layers[l].rows; ++i) layers[l].bias[i] -= scale * grad_b[l][i];
            }
        }
    }
    TrainResult result{std::move(model), 0.0};
    result.train_accuracy = accuracy(result.model, data);
    return result;
}

Dataset make_blobs(std::size_t per_class, int num_classes, std::size_t dim, double spread, std::uint64_t seed) {
    if (per_class < 1) throw std::invalid_argument("make_blobs: need at least one sample per class");
    if (num_classes < 2 || dim < 1) throw std::invalid_argument("make_blobs: need >= 2 classes and dim >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> centre_dist(0.2, 0.8);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<Vector> centres(static_cast<std::size_t>(num_classes), Vector(dim));
    for (auto& c : centres)
        for (double& e : c) e = centre_dist(rng);

    Dataset data;
    data.num_classes = num_classes;
    for (std::size_t i = 0; i < per_class; ++i) {
        for (int k = 0; k < num_classes; ++k) {
            Vector s = centres[static_cast<std::size_t>(k)];
            for (double& e : s) e = std::clamp(e + spread * noise(rng), 0.0, 1.0);
            data.samples.push_back(std::move(s));
            data.labels.push_back(k);
        }
    }
    return data;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset, const std::string& what) {
    if (buf.size() < offset + 4) throw FormatError(what + ": truncated header");
    return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
           (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto img = read_file(images);
    const auto lab = read_file(labels);

    const std::string img_name = images.filename().string();
    const std::string lab_name = labels.filename().string();
    if (read_be32(img, 0, img_name) != 0x00000803) throw FormatError(img_name + ": bad magic number for IDX images");
    if (read_be32(lab, 0, lab_name) != 0x00000801) throw FormatError(lab_name + ": bad magic number for IDX labels");

    const std::size_t count = read_be32(img, 4, img_name);
    const std::size_t rows = read_be32(img, 8, img_name);
    const std::size_t cols = read_be32(img, 12, img_name);
    const std::size_t label_count = read_be32(lab, 4, lab_name);
    if (count != label_count)
        throw FormatError("count mismatch: " + std::to_string(count) + " images vs " + std::to_string(label_count) +
                          " labels");
    const std::size_t pixels = rows * cols;
    if (img.size() < 16 + count * pixels) throw FormatError(img_name + ": truncated pixel data");
    if (lab.size() < 8 + count) throw FormatError(lab_name + ": truncated label data");

    Dataset data;
    data.num_classes = 10;
    data.samples.reserve(count);
    data.labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Vector s(pixels);
        const unsigned char* src = img.data() + 16 + i * pixels;
        for (std::size_t j = 0; j < pixels; ++j) s[j] = static_cast<double>(src[j]) / 255.0;
        const int label = lab[8 + i];
        if (label > 9) throw FormatError(lab_name + ": label outside 0-9");
        data.samples.push_back(std::move(s));
        data.labels.push_back(label);
    }
    return data;
}

std::string model_to_json(const Model& model) {
    nlohmann::json doc;
    doc["version"] = 1;
    doc["activation"] = std::string(to_string(model.activation()));
    doc["layers"] = nlohmann::json::array();
    for (const auto& layer : model.layers()) {
        doc["layers"].push_back(
            {{"rows", layer.rows}, {"cols", layer.cols}, {"weights", layer.weights}, {"bias", layer.bias}});
    }
    return doc.dump(1);
}

Model model_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
        if (doc.at("version").get<int>() != 1) throw FormatError("unsupported weight file version");
        std::vector<DenseLayer> layers;
        for (const auto& entry : doc.at("layers")) {
            DenseLayer layer;
            layer.rows = entry.at("rows").get<std::size_t>();
            layer.cols = entry.at("cols").get<std::size_t>();
            layer.weights = entry.at("weights").get<std::vector<double>>();
            layer.bias = entry.at("bias").get<Vector>();
            layers.push_back(std::move(layer));
        }
        return Model(std::move(layers), parse_activation(doc.at("activation").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed weight file: ") + e.what());
    }
}

void save_model(const Model& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << model_to_json(model) << '\n';
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace boundwalk
