#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advtopk/graph.hpp"
#include "advtopk/tensor.hpp"

namespace advtopk {

enum class LayerKind : std::uint8_t { Affine = 0, Relu = 1, Conv3x3 = 2, Flatten = 3 };

struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    int in = 0;   // affine: input width; conv: input channels
    int out = 0;  // affine: output width; conv: output channels
};

struct Architecture {
    Shape input_shape;  // {n} for flat features, {c,h,w} in front of conv stacks
    std::vector<LayerSpec> layers;

    int feature_count() const;
    int output_count() const;  // width of the final layer
    void validate(int label_count) const;
};

struct InputSample {
    std::vector<float> features;  // in [0,1]^n
    int label = 0;
};

struct Dataset {
    std::vector<InputSample> samples;
    std::string split;  // "train" / "validation"
    std::uint64_t seed = 0;

    void validate(int feature_count, int label_count) const;
};

// The fixed network under attack. Parameters are immutable after training or
// loading; concurrent reads are safe.
class Model {
public:
    Architecture arch;
    std::vector<Tensor> params;  // affine: W(out,in), b(out); conv: K(cout,cin,3,3), b(cout)
    std::vector<std::string> labels;

    int feature_count() const { return arch.feature_count(); }
    int label_count() const { return static_cast<int>(labels.size()); }
    // (h,w) when the input carries spatial structure, otherwise nullopt
    std::optional<std::pair<int, int>> image_shape() const;

    // Wires the network into `g` starting from `input` (a flat feature
    // vector node) and returns the logits node. When `param_nodes` is given
    // the parameter leaves are created with requires_grad and reported there;
    // otherwise parameters enter as plain constants.
    NodeId build_forward(Graph& g, NodeId input, std::vector<NodeId>* param_nodes = nullptr) const;

    std::vector<float> logits(std::span<const float> x) const;
    std::vector<float> predict(std::span<const float> x) const;
    int predicted_label(std::span<const float> x) const;

    void validate() const;
};

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    float learning_rate = 0.1f;
    float lr_decay = 1.0f;  // multiplied into the rate after every epoch
    std::uint64_t seed = 1;
};

struct TrainReport {
    double train_accuracy = 0.0;
    double validation_accuracy = 0.0;
    double final_loss = 0.0;
};

Model train_classifier(const Dataset& train, const Dataset& validation, const Architecture& arch,
                       std::vector<std::string> labels, const TrainConfig& cfg,
                       TrainReport* report = nullptr);

double accuracy(const Model& model, const Dataset& data);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

// Gaussian class clusters clamped to [0,1]^dim; `spread` is the per-feature
// standard deviation and controls how much the classes overlap.
Dataset generate_synthetic(int class_count, int samples_per_class, int dimension,
                           std::uint64_t seed, float spread = 0.10f);

// IDX byte format: 0x00000803 image files, 0x00000801 label files,
// big-endian dimensions, one unsigned byte per pixel scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace advtopk
