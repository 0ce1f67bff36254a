#include "advtopk/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace advtopk {

EmbeddingTable EmbeddingTable::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open embedding file " + path);
    EmbeddingTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string label;
        ss >> label;
        std::vector<float> vec;
        std::string tok;
        while (ss >> tok) {
            std::size_t used = 0;
            float v = 0.0f;
            try {
                v = std::stof(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size())
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unparsable number '" +
                                         tok + "'");
            vec.push_back(v);
        }
        if (vec.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": no vector components");
        if (table.dim_ == 0) table.dim_ = static_cast<int>(vec.size());
        if (static_cast<int>(vec.size()) != table.dim_)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": dimension " +
                                     std::to_string(vec.size()) + " does not match earlier entries (" +
                                     std::to_string(table.dim_) + ")");
        double norm2 = 0.0;
        for (float v : vec) norm2 += static_cast<double>(v) * v;
        if (norm2 == 0.0)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": zero vector for '" + label + "'");
        if (!table.vectors_.emplace(label, std::move(vec)).second)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duplicate label '" + label + "'");
        table.names_.push_back(label);
    }
    if (table.vectors_.empty()) throw std::runtime_error(path + ": no embeddings found");
    return table;
}

const std::vector<float>& EmbeddingTable::vector_for(const std::string& label) const {
    auto it = vectors_.find(label);
    if (it == vectors_.end()) throw std::invalid_argument("no embedding for label '" + label + "'");
    return it->second;
}

void EmbeddingTable::require(std::span<const std::string> labels) const {
    std::string missing;
    for (const std::string& l : labels) {
        if (!contains(l)) {
            if (!missing.empty()) missing += ", ";
            missing += l;
        }
    }
    if (!missing.empty()) throw std::runtime_error("embedding table is missing labels: " + missing);
}

float EmbeddingTable::similarity(const std::string& a, const std::string& b) const {
    const std::vector<float>& va = vector_for(a);
    const std::vector<float>& vb = vector_for(b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        dot += static_cast<double>(va[i]) * vb[i];
        na += static_cast<double>(va[i]) * va[i];
        nb += static_cast<double>(vb[i]) * vb[i];
    }
    const double cosine = dot / (std::sqrt(na) * std::sqrt(nb));
    return static_cast<float>(std::min(1.0, std::max(-1.0, cosine)));
}

TargetStrategy parse_strategy(const std::string& name) {
    if (name == "random") return TargetStrategy::Random;
    if (name == "most-like") return TargetStrategy::MostLike;
    if (name == "least-like") return TargetStrategy::LeastLike;
    if (name == "highest-clean") return TargetStrategy::HighestClean;
    if (name == "lowest-clean") return TargetStrategy::LowestClean;
    if (name == "exhaustive-top1") return TargetStrategy::ExhaustiveTop1;
    throw std::invalid_argument("unknown target strategy '" + name +
                                "' (expected random, most-like, least-like, highest-clean, "
                                "lowest-clean or exhaustive-top1)");
}

const char* strategy_name(TargetStrategy s) {
    switch (s) {
        case TargetStrategy::Random: return "random";
        case TargetStrategy::MostLike: return "most-like";
        case TargetStrategy::LeastLike: return "least-like";
        case TargetStrategy::HighestClean: return "highest-clean";
        case TargetStrategy::LowestClean: return "lowest-clean";
        case TargetStrategy::ExhaustiveTop1: return "exhaustive-top1";
    }
    return "?";
}

bool TargetSpec::contains(int label) const {
    return std::find(targets.begin(), targets.end(), label) != targets.end();
}

void TargetSpec::validate(int label_count) const {
    if (targets.empty()) throw std::invalid_argument("target list is empty");
    if (static_cast<int>(targets.size()) >= label_count)
        throw std::invalid_argument("k = " + std::to_string(targets.size()) +
                                    " must be smaller than the label count " + std::to_string(label_count));
    if (ground_truth < 0 || ground_truth >= label_count)
        throw std::invalid_argument("ground truth label out of range");
    std::vector<int> sorted = targets;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("targets are not distinct");
    for (int t : targets) {
        if (t < 0 || t >= label_count) throw std::invalid_argument("target label out of range");
        if (t == ground_truth) throw std::invalid_argument("targets must exclude the ground truth");
    }
}

namespace {

// Non-GT labels ordered by score; ties fall back to the lower label id.
std::vector<int> rank_by_score(const std::vector<double>& score, int gt, bool descending) {
    std::vector<int> ids;
    ids.reserve(score.size());
    for (int i = 0; i < static_cast<int>(score.size()); ++i) {
        if (i != gt) ids.push_back(i);
    }
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
        const double sa = score[static_cast<std::size_t>(a)];
        const double sb = score[static_cast<std::size_t>(b)];
        if (sa != sb) return descending ? sa > sb : sa < sb;
        return a < b;
    });
    return ids;
}

}  // namespace

std::vector<TargetSpec> select_targets(TargetStrategy strategy, int k, const InputSample& sample,
                                       const Model& model, const EmbeddingTable* table,
                                       std::uint64_t seed) {
    const int n_labels = model.label_count();
    if (k < 1 || k >= n_labels)
        throw std::invalid_argument("k = " + std::to_string(k) + " must satisfy 1 <= k < " +
                                    std::to_string(n_labels));
    const int gt = sample.label;

    auto finish = [&](std::vector<int> targets) {
        TargetSpec spec;
        spec.targets = std::move(targets);
        spec.ground_truth = gt;
        spec.strategy = strategy;
        spec.validate(n_labels);
        return spec;
    };

    switch (strategy) {
        case TargetStrategy::Random: {
            std::vector<int> pool;
            for (int i = 0; i < n_labels; ++i)
                if (i != gt) pool.push_back(i);
            std::mt19937_64 rng(seed);
            // partial Fisher-Yates: the first k entries are a uniformly
            // ordered sample without replacement
            for (int i = 0; i < k; ++i) {
                std::uniform_int_distribution<int> pick(i, static_cast<int>(pool.size()) - 1);
                std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
            }
            pool.resize(static_cast<std::size_t>(k));
            return {finish(std::move(pool))};
        }
        case TargetStrategy::MostLike:
        case TargetStrategy::LeastLike: {
            if (!table) throw std::invalid_argument("similarity strategies need an embedding table");
            table->require(model.labels);
            const std::string& gt_name = model.labels[static_cast<std::size_t>(gt)];
            std::vector<double> score(static_cast<std::size_t>(n_labels), 0.0);
            for (int i = 0; i < n_labels; ++i)
                score[static_cast<std::size_t>(i)] =
                    table->similarity(gt_name, model.labels[static_cast<std::size_t>(i)]);
            std::vector<int> ranked = rank_by_score(score, gt, strategy == TargetStrategy::MostLike);
            ranked.resize(static_cast<std::size_t>(k));
            return {finish(std::move(ranked))};
        }
        case TargetStrategy::HighestClean:
        case TargetStrategy::LowestClean: {
            const std::vector<float> p = model.predict(sample.features);
            std::vector<double> score(p.begin(), p.end());
            std::vector<int> ranked = rank_by_score(score, gt, strategy == TargetStrategy::HighestClean);
            ranked.resize(static_cast<std::size_t>(k));
            return {finish(std::move(ranked))};
        }
        case TargetStrategy::ExhaustiveTop1: {
            if (k != 1) throw std::invalid_argument("exhaustive-top1 requires k = 1");
            std::vector<TargetSpec> specs;
            for (int i = 0; i < n_labels; ++i) {
                if (i != gt) specs.push_back(finish({i}));
            }
            return specs;
        }
    }
    throw std::invalid_argument("unknown target strategy");
}

}  // namespace advtopk
