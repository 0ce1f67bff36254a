#include "advtopk/classifier.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "advtopk/kernels.hpp"

namespace advtopk {

namespace {

// Fixed chunk grid for batch-gradient accumulation. Chunk partial sums are
// combined in chunk order, so results do not depend on the thread count.
constexpr int kGradChunks = 8;

Shape walk_layers(const Architecture& arch, bool validate_only = false) {
    Shape cur = arch.input_shape;
    (void)validate_only;
    for (std::size_t li = 0; li < arch.layers.size(); ++li) {
        const LayerSpec& l = arch.layers[li];
        const std::string where = "layer " + std::to_string(li);
        switch (l.kind) {
            case LayerKind::Affine:
                if (cur.size() != 1)
                    throw std::invalid_argument(where + ": affine needs flat input, have " + shape_str(cur));
                if (cur[0] != l.in)
                    throw std::invalid_argument(where + ": affine expects width " + std::to_string(l.in) +
                                                ", have " + shape_str(cur));
                cur = {l.out};
                break;
            case LayerKind::Relu:
                break;
            case LayerKind::Conv3x3:
                if (cur.size() != 3)
                    throw std::invalid_argument(where + ": conv3x3 needs (c,h,w) input, have " + shape_str(cur));
                if (cur[0] != l.in)
                    throw std::invalid_argument(where + ": conv3x3 expects " + std::to_string(l.in) +
                                                " channels, have " + shape_str(cur));
                cur = {l.out, cur[1], cur[2]};
                break;
            case LayerKind::Flatten:
                cur = {static_cast<int>(shape_size(cur))};
                break;
        }
    }
    return cur;
}

}  // namespace

int Architecture::feature_count() const { return static_cast<int>(shape_size(input_shape)); }

int Architecture::output_count() const {
    Shape out = walk_layers(*this);
    return static_cast<int>(shape_size(out));
}

void Architecture::validate(int label_count) const {
    if (layers.empty()) throw std::invalid_argument("architecture has no layers");
    Shape out = walk_layers(*this);
    if (out.size() != 1 || out[0] != label_count)
        throw std::invalid_argument("final layer yields " + shape_str(out) + ", expected (" +
                                    std::to_string(label_count) + ") logits");
}

void Dataset::validate(int feature_count, int label_count) const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const InputSample& s = samples[i];
        if (static_cast<int>(s.features.size()) != feature_count)
            throw std::invalid_argument("sample " + std::to_string(i) + " has " +
                                        std::to_string(s.features.size()) + " features, expected " +
                                        std::to_string(feature_count));
        if (s.label < 0 || s.label >= label_count)
            throw std::invalid_argument("sample " + std::to_string(i) + " label out of range");
        for (float v : s.features) {
            if (!(v >= 0.0f && v <= 1.0f))
                throw std::invalid_argument("sample " + std::to_string(i) + " has feature outside [0,1]");
        }
    }
}

std::optional<std::pair<int, int>> Model::image_shape() const {
    if (arch.input_shape.size() == 3) return std::make_pair(arch.input_shape[1], arch.input_shape[2]);
    if (arch.input_shape.size() == 2) return std::make_pair(arch.input_shape[0], arch.input_shape[1]);
    return std::nullopt;
}

void Model::validate() const {
    if (labels.empty()) throw std::invalid_argument("model has no labels");
    arch.validate(label_count());
    std::vector<std::string> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("label names are not unique");
    std::size_t expected = 0;
    for (const LayerSpec& l : arch.layers) {
        if (l.kind == LayerKind::Affine || l.kind == LayerKind::Conv3x3) expected += 2;
    }
    if (params.size() != expected)
        throw std::invalid_argument("model carries " + std::to_string(params.size()) +
                                    " parameter tensors, architecture needs " + std::to_string(expected));
}

NodeId Model::build_forward(Graph& g, NodeId input, std::vector<NodeId>* param_nodes) const {
    const bool track = param_nodes != nullptr;
    NodeId cur = input;
    if (arch.input_shape.size() > 1) cur = g.reshape(cur, arch.input_shape);
    std::size_t pi = 0;
    for (std::size_t li = 0; li < arch.layers.size(); ++li) {
        const LayerSpec& l = arch.layers[li];
        const std::string tag = "l" + std::to_string(li);
        switch (l.kind) {
            case LayerKind::Affine: {
                NodeId w = g.value(params[pi], tag + ".w", track);
                NodeId b = g.value(params[pi + 1], tag + ".b", track);
                pi += 2;
                cur = g.add(g.matmul(w, cur), b);
                if (track) {
                    param_nodes->push_back(w);
                    param_nodes->push_back(b);
                }
                break;
            }
            case LayerKind::Relu:
                cur = g.relu(cur);
                break;
            case LayerKind::Conv3x3: {
                NodeId w = g.value(params[pi], tag + ".k", track);
                NodeId b = g.value(params[pi + 1], tag + ".b", track);
                pi += 2;
                cur = g.conv3x3(cur, w, b);
                if (track) {
                    param_nodes->push_back(w);
                    param_nodes->push_back(b);
                }
                break;
            }
            case LayerKind::Flatten:
                cur = g.reshape(cur, {static_cast<int>(g.size(cur))});
                break;
        }
    }
    return cur;
}

std::vector<float> Model::logits(std::span<const float> x) const {
    if (static_cast<int>(x.size()) != feature_count())
        throw std::invalid_argument("input has " + std::to_string(x.size()) + " features, model expects " +
                                    std::to_string(feature_count()));
    Graph g;
    NodeId in = g.value(Tensor({feature_count()}, std::vector<float>(x.begin(), x.end())), "x");
    NodeId out = build_forward(g, in);
    g.forward();
    return g.value(out).to_vector();
}

std::vector<float> Model::predict(std::span<const float> x) const { return stable_softmax(logits(x)); }

int Model::predicted_label(std::span<const float> x) const { return argmax_low_id(predict(x)); }

namespace {

std::vector<Tensor> init_params(const Architecture& arch, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> unit(0.0f, 1.0f);
    std::vector<Tensor> params;
    for (const LayerSpec& l : arch.layers) {
        if (l.kind == LayerKind::Affine) {
            const float sd = std::sqrt(2.0f / static_cast<float>(l.in));
            Tensor w({l.out, l.in});
            for (std::size_t i = 0; i < w.size(); ++i) w[i] = sd * unit(rng);
            params.push_back(std::move(w));
            params.emplace_back(Shape{l.out});
        } else if (l.kind == LayerKind::Conv3x3) {
            const float sd = std::sqrt(2.0f / (9.0f * static_cast<float>(l.in)));
            Tensor w({l.out, l.in, 3, 3});
            for (std::size_t i = 0; i < w.size(); ++i) w[i] = sd * unit(rng);
            params.push_back(std::move(w));
            params.emplace_back(Shape{l.out});
        }
    }
    return params;
}

struct SampleGraph {
    Graph g;
    NodeId x = -1;
    NodeId onehot = -1;
    NodeId loss = -1;
    std::vector<NodeId> param_nodes;
};

void build_sample_graph(SampleGraph& sg, const Model& model) {
    sg.x = sg.g.placeholder({model.feature_count()}, "x");
    NodeId logits = model.build_forward(sg.g, sg.x, &sg.param_nodes);
    sg.onehot = sg.g.placeholder({model.label_count()}, "onehot");
    NodeId lp = sg.g.log_softmax(logits);
    sg.loss = sg.g.scale_add(sg.g.sum_reduce(sg.g.mul(sg.onehot, lp)), -1.0f, 0.0f);
}

}  // namespace

Model train_classifier(const Dataset& train, const Dataset& validation, const Architecture& arch,
                       std::vector<std::string> labels, const TrainConfig& cfg, TrainReport* report) {
    if (train.samples.empty()) throw std::invalid_argument("training set is empty");
    const int label_count = static_cast<int>(labels.size());
    arch.validate(label_count);
    train.validate(static_cast<int>(shape_size(arch.input_shape)), label_count);

    std::vector<int> seen(static_cast<std::size_t>(label_count), 0);
    for (const InputSample& s : train.samples) seen[static_cast<std::size_t>(s.label)] = 1;
    if (std::accumulate(seen.begin(), seen.end(), 0) != label_count)
        throw std::invalid_argument("training set does not cover every class");

    Model model;
    model.arch = arch;
    model.labels = std::move(labels);
    model.params = init_params(arch, cfg.seed);
    model.validate();

    std::vector<SampleGraph> chunk_graphs(kGradChunks);
    for (SampleGraph& sg : chunk_graphs) build_sample_graph(sg, model);
    const std::size_t n_params = model.params.size();

    std::vector<std::vector<Tensor>> chunk_grads(kGradChunks);
    for (auto& grads : chunk_grads) {
        grads.reserve(n_params);
        for (const Tensor& p : model.params) grads.emplace_back(p.shape());
    }

    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<int> order(train.samples.size());
    std::iota(order.begin(), order.end(), 0);

    float lr = cfg.learning_rate;
    double epoch_loss = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const int batch = static_cast<int>(stop - start);
            const int per_chunk = (batch + kGradChunks - 1) / kGradChunks;
            std::vector<double> chunk_loss(kGradChunks, 0.0);

#pragma omp parallel for num_threads(kernels::threads()) schedule(dynamic, 1)
            for (int c = 0; c < kGradChunks; ++c) {
                SampleGraph& sg = chunk_graphs[static_cast<std::size_t>(c)];
                auto& grads = chunk_grads[static_cast<std::size_t>(c)];
                for (std::size_t pi = 0; pi < n_params; ++pi) {
                    grads[pi].fill(0.0f);
                    sg.g.leaf_data(sg.param_nodes[pi]) = model.params[pi];
                }
                const std::size_t lo = start + static_cast<std::size_t>(c) * per_chunk;
                const std::size_t hi = std::min(stop, lo + static_cast<std::size_t>(per_chunk));
                for (std::size_t s = lo; s < hi; ++s) {
                    const InputSample& sample = train.samples[static_cast<std::size_t>(order[s])];
                    sg.g.set_value(sg.x, Tensor({static_cast<int>(sample.features.size())}, sample.features));
                    Tensor onehot({static_cast<int>(model.label_count())});
                    onehot[static_cast<std::size_t>(sample.label)] = 1.0f;
                    sg.g.set_value(sg.onehot, std::move(onehot));
                    sg.g.forward();
                    chunk_loss[static_cast<std::size_t>(c)] += sg.g.value(sg.loss)[0];
                    sg.g.backward(sg.loss);
                    for (std::size_t pi = 0; pi < n_params; ++pi) {
                        const Tensor& pg = sg.g.grad(sg.param_nodes[pi]);
                        float* acc = grads[pi].data();
                        for (std::size_t i = 0; i < pg.size(); ++i) acc[i] += pg[i];
                    }
                }
            }

            double batch_loss = 0.0;
            for (double l : chunk_loss) batch_loss += l;
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch));
            epoch_loss += batch_loss;

            const float step = lr / static_cast<float>(batch);
            for (std::size_t pi = 0; pi < n_params; ++pi) {
                float* p = model.params[pi].data();
                for (int c = 0; c < kGradChunks; ++c) {
                    const float* g = chunk_grads[static_cast<std::size_t>(c)][pi].data();
                    for (std::size_t i = 0; i < model.params[pi].size(); ++i) p[i] -= step * g[i];
                }
            }
        }
        lr *= cfg.lr_decay;
    }

    if (report) {
        report->train_accuracy = accuracy(model, train);
        report->validation_accuracy = validation.samples.empty() ? 0.0 : accuracy(model, validation);
        report->final_loss = epoch_loss / static_cast<double>(train.samples.size());
    }
    return model;
}

double accuracy(const Model& model, const Dataset& data) {
    if (data.samples.empty()) return 0.0;
    const int n = static_cast<int>(data.samples.size());
    int correct = 0;
#pragma omp parallel for num_threads(kernels::threads()) schedule(dynamic, 16) reduction(+ : correct)
    for (int i = 0; i < n; ++i) {
        const InputSample& s = data.samples[static_cast<std::size_t>(i)];
        if (model.predicted_label(s.features) == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    os.write(b, 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

void put_i32(std::ostream& os, std::int32_t v) { put_u32(os, static_cast<std::uint32_t>(v)); }

void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    if (!is) throw std::runtime_error("model file truncated");
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("model file truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::int32_t get_i32(std::istream& is) { return static_cast<std::int32_t>(get_u32(is)); }

float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

constexpr char kMagic[4] = {'A', 'D', 'V', 'M'};
constexpr std::uint16_t kFormatVersion = 1;

}  // namespace

void save_model(const Model& model, const std::string& path) {
    model.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write(kMagic, 4);
    put_u16(os, kFormatVersion);
    put_u32(os, static_cast<std::uint32_t>(model.arch.input_shape.size()));
    for (int d : model.arch.input_shape) put_i32(os, d);
    put_u32(os, static_cast<std::uint32_t>(model.arch.layers.size()));
    for (const LayerSpec& l : model.arch.layers) {
        os.put(static_cast<char>(l.kind));
        put_i32(os, l.in);
        put_i32(os, l.out);
    }
    put_u32(os, static_cast<std::uint32_t>(model.labels.size()));
    for (const std::string& name : model.labels) {
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    put_u32(os, static_cast<std::uint32_t>(model.params.size()));
    for (const Tensor& p : model.params) {
        put_u32(os, static_cast<std::uint32_t>(p.shape().size()));
        for (int d : p.shape()) put_i32(os, d);
        for (std::size_t i = 0; i < p.size(); ++i) put_f32(os, p[i]);
    }
    if (!os) throw std::runtime_error("write failed for " + path);
}

Model load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open model file " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path + " is not a model file (bad magic)");
    const std::uint16_t version = get_u16(is);
    if (version != kFormatVersion)
        throw std::runtime_error("unsupported model format version " + std::to_string(version));

    Model model;
    const std::uint32_t rank = get_u32(is);
    if (rank == 0 || rank > 4) throw std::runtime_error("corrupt model file: input rank " + std::to_string(rank));
    model.arch.input_shape.resize(rank);
    for (std::uint32_t i = 0; i < rank; ++i) model.arch.input_shape[i] = get_i32(is);
    const std::uint32_t n_layers = get_u32(is);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        LayerSpec l;
        const int kind = is.get();
        if (kind < 0 || kind > 3) throw std::runtime_error("corrupt model file: unknown layer kind");
        l.kind = static_cast<LayerKind>(kind);
        l.in = get_i32(is);
        l.out = get_i32(is);
        model.arch.layers.push_back(l);
    }
    const std::uint32_t n_labels = get_u32(is);
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        const std::uint32_t len = get_u32(is);
        if (len > 4096) throw std::runtime_error("corrupt model file: label length " + std::to_string(len));
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw std::runtime_error("model file truncated");
        model.labels.push_back(std::move(name));
    }
    const std::uint32_t n_params = get_u32(is);
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const std::uint32_t prank = get_u32(is);
        if (prank == 0 || prank > 4) throw std::runtime_error("corrupt model file: parameter rank");
        Shape shape(prank);
        for (std::uint32_t d = 0; d < prank; ++d) shape[d] = get_i32(is);
        Tensor t(shape);
        for (std::size_t v = 0; v < t.size(); ++v) t[v] = get_f32(is);
        model.params.push_back(std::move(t));
    }
    model.validate();
    return model;
}

Dataset generate_synthetic(int class_count, int samples_per_class, int dimension,
                           std::uint64_t seed, float spread) {
    if (class_count < 2 || samples_per_class < 1 || dimension < 1)
        throw std::invalid_argument("synthetic dataset needs >= 2 classes, >= 1 sample, >= 1 dimension");
    std::mt19937_64 rng(seed);
    // Center range vs spread sets the class overlap: per-feature gaps around
    // 0.1 leave the clusters separable yet within reach of small-budget
    // perturbations.
    std::uniform_real_distribution<float> center_dist(0.35f, 0.65f);
    std::normal_distribution<float> noise(0.0f, spread);

    std::vector<std::vector<float>> centers(static_cast<std::size_t>(class_count));
    for (auto& c : centers) {
        c.resize(static_cast<std::size_t>(dimension));
        for (float& v : c) v = center_dist(rng);
    }

    Dataset ds;
    ds.seed = seed;
    ds.samples.reserve(static_cast<std::size_t>(class_count) * samples_per_class);
    for (int cls = 0; cls < class_count; ++cls) {
        for (int s = 0; s < samples_per_class; ++s) {
            InputSample sample;
            sample.label = cls;
            sample.features.resize(static_cast<std::size_t>(dimension));
            for (int d = 0; d < dimension; ++d) {
                const float v = centers[static_cast<std::size_t>(cls)][static_cast<std::size_t>(d)] + noise(rng);
                sample.features[static_cast<std::size_t>(d)] = std::min(1.0f, std::max(0.0f, v));
            }
            ds.samples.push_back(std::move(sample));
        }
    }
    return ds;
}

namespace {

std::uint32_t read_be_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error(path + ": truncated header");
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("cannot open " + images_path);
    if (read_be_u32(imgs, images_path) != 0x00000803u)
        throw std::runtime_error(images_path + ": bad magic, expected image file (0x00000803)");
    const std::uint32_t count = read_be_u32(imgs, images_path);
    const std::uint32_t rows = read_be_u32(imgs, images_path);
    const std::uint32_t cols = read_be_u32(imgs, images_path);
    if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096)
        throw std::runtime_error(images_path + ": implausible image dimensions");

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("cannot open " + labels_path);
    if (read_be_u32(labs, labels_path) != 0x00000801u)
        throw std::runtime_error(labels_path + ": bad magic, expected label file (0x00000801)");
    const std::uint32_t label_count = read_be_u32(labs, labels_path);
    if (label_count != count)
        throw std::runtime_error("image/label count mismatch: " + std::to_string(count) + " vs " +
                                 std::to_string(label_count));

    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> buf(pixels);
    Dataset ds;
    ds.samples.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
        if (!imgs) throw std::runtime_error(images_path + ": truncated at image " + std::to_string(i));
        const int label = labs.get();
        if (label < 0) throw std::runtime_error(labels_path + ": truncated at label " + std::to_string(i));
        InputSample s;
        s.label = label;
        s.features.resize(pixels);
        for (std::size_t p = 0; p < pixels; ++p)
            s.features[p] = static_cast<float>(buf[p]) / 255.0f;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace advtopk
