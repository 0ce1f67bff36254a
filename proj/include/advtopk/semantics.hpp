#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "advtopk/classifier.hpp"

namespace advtopk {

// Label-name word embeddings, loaded from a text file with one entry per
// line: the label followed by its vector components. Immutable after load.
class EmbeddingTable {
public:
    static EmbeddingTable load(const std::string& path);

    int dimension() const { return dim_; }
    std::size_t size() const { return vectors_.size(); }
    bool contains(const std::string& label) const { return vectors_.count(label) > 0; }
    const std::vector<float>& vector_for(const std::string& label) const;
    // entry names in file order (doubles as the fixture label vocabulary)
    const std::vector<std::string>& names() const { return names_; }

    // Throws listing every label missing from the table.
    void require(std::span<const std::string> labels) const;

    // Cosine of the two embedding vectors, in [-1, 1].
    float similarity(const std::string& a, const std::string& b) const;

private:
    int dim_ = 0;
    std::unordered_map<std::string, std::vector<float>> vectors_;
    std::vector<std::string> names_;
};

enum class TargetStrategy {
    Random,
    MostLike,
    LeastLike,
    HighestClean,
    LowestClean,
    ExhaustiveTop1,
};

TargetStrategy parse_strategy(const std::string& name);
const char* strategy_name(TargetStrategy s);

// An ordered attack-target list. Targets are distinct and never include the
// ground truth.
struct TargetSpec {
    std::vector<int> targets;  // (t_1, ..., t_k), rank order
    int ground_truth = -1;
    TargetStrategy strategy = TargetStrategy::Random;

    int k() const { return static_cast<int>(targets.size()); }
    bool contains(int label) const;
    void validate(int label_count) const;
};

// Builds the target list(s) for one sample. All strategies yield a single
// spec except exhaustive-top1, which enumerates every non-ground-truth label
// as its own k=1 spec. Score ties break toward the lower label id.
std::vector<TargetSpec> select_targets(TargetStrategy strategy, int k, const InputSample& sample,
                                       const Model& model, const EmbeddingTable* table,
                                       std::uint64_t seed);

}  // namespace advtopk
