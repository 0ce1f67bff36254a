#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "advtopk/classifier.hpp"
#include "support.hpp"

using namespace advtopk;

namespace {

Architecture mlp(int in, int hidden, int out) {
    Architecture a;
    a.input_shape = {in};
    a.layers = {{LayerKind::Affine, in, hidden}, {LayerKind::Relu, 0, 0}, {LayerKind::Affine, hidden, out}};
    return a;
}

std::vector<std::string> label_names(int n) {
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("label" + std::to_string(i));
    return names;
}

std::pair<Dataset, Dataset> split_per_class(const Dataset& all, int classes, int per_class, int train_n) {
    Dataset train, val;
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < per_class; ++i)
            ((i < train_n) ? train : val)
                .samples.push_back(all.samples[static_cast<std::size_t>(c * per_class + i)]);
    return {train, val};
}

Model tiny_fixture(std::uint64_t seed = 3) {
    Dataset all = generate_synthetic(5, 40, 12, seed, 0.08f);
    auto [train, val] = split_per_class(all, 5, 40, 30);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.seed = seed;
    return train_classifier(train, val, mlp(12, 32, 5), label_names(5), cfg);
}

}  // namespace

TEST_CASE("zero final layer predicts the uniform distribution") {
    std::mt19937 rng(1);
    Model m;
    m.arch = mlp(4, 3, 5);
    m.labels = label_names(5);
    m.params = {Tensor({3, 4}, testsupport::random_values(12, rng)), Tensor({3}),
                Tensor({5, 3}), Tensor({5})};
    const std::vector<float> p = m.predict(std::vector<float>{0.1f, 0.4f, 0.9f, 0.2f});
    for (float v : p) CHECK(v == doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("argmax is invariant under a constant shift of all logits") {
    Model m;
    m.arch = mlp(4, 6, 5);
    m.labels = label_names(5);
    std::mt19937 rng(2);
    m.params = {Tensor({6, 4}, testsupport::random_values(24, rng)),
                Tensor({6}, testsupport::random_values(6, rng)),
                Tensor({5, 6}, testsupport::random_values(30, rng)),
                Tensor({5}, testsupport::random_values(5, rng))};
    Model shifted = m;
    for (std::size_t i = 0; i < 5; ++i) shifted.params[3][i] += 7.5f;  // final bias + c

    for (int rep = 0; rep < 20; ++rep) {
        const std::vector<float> x = testsupport::random_values(4, rng, 0.0f, 1.0f);
        CHECK(m.predicted_label(x) == shifted.predicted_label(x));
        const std::vector<float> pa = m.predict(x);
        const std::vector<float> pb = stable_softmax(m.logits(x));
        for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);
    }
}

TEST_CASE("zero input through a zero-bias network yields zero logits") {
    Model m;
    m.arch = mlp(4, 6, 3);
    m.labels = label_names(3);
    std::mt19937 rng(3);
    m.params = {Tensor({6, 4}, testsupport::random_values(24, rng)), Tensor({6}),
                Tensor({3, 6}, testsupport::random_values(18, rng)), Tensor({3})};
    for (float v : m.logits(std::vector<float>(4, 0.0f))) CHECK(v == 0.0f);
}

TEST_CASE("logit change under perturbation respects the layer-norm product bound") {
    // two-layer linear network: z(x) = W2 (W1 x), so |z(x+d)-z(x)|_2 is at
    // most |W2|_F |W1|_F |d|_2
    Model m;
    m.arch.input_shape = {2};
    m.arch.layers = {{LayerKind::Affine, 2, 3}, {LayerKind::Affine, 3, 2}};
    m.labels = label_names(2);
    Tensor w1({3, 2}, {0.5f, -1.0f, 2.0f, 0.25f, -0.75f, 1.5f});
    Tensor w2({2, 3}, {1.0f, -0.5f, 0.3f, 0.8f, 0.2f, -1.1f});
    m.params = {w1, Tensor({3}), w2, Tensor({2})};

    auto frob = [](const Tensor& t) {
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) s += static_cast<double>(t[i]) * t[i];
        return std::sqrt(s);
    };
    const double lipschitz = frob(w1) * frob(w2);

    std::mt19937 rng(4);
    for (int rep = 0; rep < 50; ++rep) {
        const std::vector<float> x = testsupport::random_values(2, rng, 0.0f, 1.0f);
        const std::vector<float> d = testsupport::random_values(2, rng, -0.05f, 0.05f);
        std::vector<float> xd = {x[0] + d[0], x[1] + d[1]};
        const std::vector<float> z0 = m.logits(x);
        const std::vector<float> z1 = m.logits(xd);
        double dz = 0.0, dn = 0.0;
        for (std::size_t i = 0; i < z0.size(); ++i)
            dz += static_cast<double>(z1[i] - z0[i]) * (z1[i] - z0[i]);
        for (float v : d) dn += static_cast<double>(v) * v;
        CHECK(std::sqrt(dz) <= lipschitz * std::sqrt(dn) + 1e-6);
    }
}

TEST_CASE("trained fixture reaches 90% held-out accuracy and is deterministic") {
    Dataset all = generate_synthetic(8, 50, 24, 17, 0.10f);
    auto [train, val] = split_per_class(all, 8, 50, 40);
    TrainConfig cfg;
    cfg.epochs = 25;
    cfg.seed = 5;
    TrainReport r1, r2;
    Model m1 = train_classifier(train, val, mlp(24, 48, 8), label_names(8), cfg, &r1);
    Model m2 = train_classifier(train, val, mlp(24, 48, 8), label_names(8), cfg, &r2);
    CHECK(r1.validation_accuracy >= 0.90);
    CHECK(r1.validation_accuracy == r2.validation_accuracy);
    for (std::size_t p = 0; p < m1.params.size(); ++p)
        for (std::size_t i = 0; i < m1.params[p].size(); ++i)
            CHECK(m1.params[p][i] == m2.params[p][i]);
}

TEST_CASE("training rejects a set that does not cover every class") {
    Dataset train = generate_synthetic(3, 10, 6, 1);
    train.samples.erase(train.samples.begin(), train.samples.begin() + 10);  // drop class 0
    TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train_classifier(train, {}, mlp(6, 8, 3), label_names(3), cfg),
                    std::invalid_argument);
}

TEST_CASE("model file round trip reproduces predictions bit-exactly") {
    Model m = tiny_fixture();
    const std::string path = "/tmp/advtopk_test_model.advm";
    save_model(m, path);
    Model loaded = load_model(path);
    CHECK(loaded.labels == m.labels);
    std::mt19937 rng(6);
    for (int rep = 0; rep < 10; ++rep) {
        const std::vector<float> x = testsupport::random_values(12, rng, 0.0f, 1.0f);
        const std::vector<float> p0 = m.predict(x);
        const std::vector<float> p1 = loaded.predict(x);
        for (std::size_t i = 0; i < p0.size(); ++i) CHECK(p0[i] == p1[i]);
    }
    std::remove(path.c_str());
}

TEST_CASE("model loader rejects foreign and truncated files") {
    const std::string path = "/tmp/advtopk_bad_model.advm";
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOPE junk";
    }
    CHECK_THROWS_AS(load_model(path), std::runtime_error);
    {
        std::ofstream os(path, std::ios::binary);
        os << "ADVM";  // magic only
    }
    CHECK_THROWS_AS(load_model(path), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("predict rejects wrong feature length") {
    Model m = tiny_fixture();
    CHECK_THROWS_AS(m.predict(std::vector<float>(5, 0.2f)), std::invalid_argument);
}

TEST_CASE("synthetic generator is seeded and stays inside the unit box") {
    Dataset a = generate_synthetic(4, 25, 10, 123, 0.3f);
    Dataset b = generate_synthetic(4, 25, 10, 123, 0.3f);
    Dataset c = generate_synthetic(4, 25, 10, 124, 0.3f);
    CHECK(a.samples.size() == 100);
    bool all_equal = true, differs = false;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        if (a.samples[i].features != b.samples[i].features) all_equal = false;
        if (a.samples[i].features != c.samples[i].features) differs = true;
        for (float v : a.samples[i].features) CHECK((v >= 0.0f && v <= 1.0f));
    }
    CHECK(all_equal);
    CHECK(differs);
    a.validate(10, 4);
}

namespace {

void write_be32(std::ofstream& os, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>((v >> 16) & 0xff),
                       static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
    os.write(b, 4);
}

void write_idx_pair(const std::string& img_path, const std::string& lab_path, int count, int rows,
                    int cols, const std::vector<unsigned char>& pixels,
                    const std::vector<unsigned char>& labels, std::uint32_t img_magic = 0x803,
                    bool truncate_pixels = false) {
    std::ofstream img(img_path, std::ios::binary);
    write_be32(img, img_magic);
    write_be32(img, static_cast<std::uint32_t>(count));
    write_be32(img, static_cast<std::uint32_t>(rows));
    write_be32(img, static_cast<std::uint32_t>(cols));
    const std::size_t n = truncate_pixels ? pixels.size() / 2 : pixels.size();
    img.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(n));
    std::ofstream lab(lab_path, std::ios::binary);
    write_be32(lab, 0x801);
    write_be32(lab, static_cast<std::uint32_t>(labels.size()));
    lab.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

}  // namespace

TEST_CASE("IDX ingestion parses the byte format and scales to [0,1]") {
    const std::string img = "/tmp/advtopk_idx_images", lab = "/tmp/advtopk_idx_labels";
    const std::vector<unsigned char> pixels = {0, 128, 255, 64, 32, 16, 8, 200};
    const std::vector<unsigned char> labels = {1, 0};
    write_idx_pair(img, lab, 2, 2, 2, pixels, labels);
    Dataset ds = load_idx(img, lab);
    REQUIRE(ds.samples.size() == 2);
    CHECK(ds.samples[0].features[0] == 0.0f);
    CHECK(ds.samples[0].features[1] == doctest::Approx(128.0 / 255.0));
    CHECK(ds.samples[0].features[2] == 1.0f);
    CHECK(ds.samples[0].label == 1);
    CHECK(ds.samples[1].label == 0);

    write_idx_pair(img, lab, 2, 2, 2, pixels, labels, 0x802);
    CHECK_THROWS_AS(load_idx(img, lab), std::runtime_error);

    write_idx_pair(img, lab, 2, 2, 2, pixels, labels, 0x803, /*truncate_pixels=*/true);
    CHECK_THROWS_AS(load_idx(img, lab), std::runtime_error);

    std::remove(img.c_str());
    std::remove(lab.c_str());
}

TEST_CASE("a small conv network trains end to end on 2-D data") {
    // four 6x6 patterns per class: bright top half vs bright bottom half
    Dataset train, val;
    std::mt19937 rng(8);
    std::uniform_real_distribution<float> noise(0.0f, 0.25f);
    for (int n = 0; n < 80; ++n) {
        InputSample s;
        s.label = n % 2;
        s.features.resize(36);
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c) {
                const bool bright = (s.label == 0) ? r < 3 : r >= 3;
                s.features[static_cast<std::size_t>(r * 6 + c)] =
                    std::min(1.0f, (bright ? 0.7f : 0.0f) + noise(rng));
            }
        ((n < 60) ? train : val).samples.push_back(std::move(s));
    }
    Architecture arch;
    arch.input_shape = {1, 6, 6};
    arch.layers = {{LayerKind::Conv3x3, 1, 4},
                   {LayerKind::Relu, 0, 0},
                   {LayerKind::Flatten, 0, 0},
                   {LayerKind::Affine, 144, 2}};
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.learning_rate = 0.05f;
    TrainReport report;
    Model m = train_classifier(train, val, arch, {"top", "bottom"}, cfg, &report);
    CHECK(report.validation_accuracy >= 0.9);
    CHECK(m.image_shape().has_value());
    CHECK(m.image_shape()->first == 6);
}
