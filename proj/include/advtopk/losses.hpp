#pragma once

#include <span>
#include <string>
#include <vector>

#include "advtopk/graph.hpp"
#include "advtopk/semantics.hpp"

namespace advtopk {

// Hinge margin between the strongest non-target logit and the target logit.
// Zero exactly when the target is the (weak) argmax.
float cw_loss(std::span<const float> logits, int target);

// Ordered variant: at rank i the target t_i competes against every label not
// already placed at ranks 1..i. Zero exactly when the ordered top-k equals
// the target list.
float cw_topk_loss(std::span<const float> logits, const TargetSpec& targets);

// KL(p || q) with the 0 log 0 = 0 convention. q must be strictly positive
// wherever p is.
double kl_loss(std::span<const float> p, std::span<const float> q);

// -log p[y]
double cross_entropy_loss(std::span<const float> probs, int label);

// A designed prediction distribution whose descending order starts with the
// ordered targets. Target logits step down from z_max by gamma; the remaining
// labels get alpha times their mean similarity to the targets plus a small
// floor, then everything goes through softmax.
struct AdvDistribution {
    std::vector<float> probs;
    TargetSpec targets;
    float z_max = 10.0f;
    float gamma = 0.3f;
    float alpha = 1.0f;
    float eps_floor = 1e-5f;
};

struct AdvDistributionParams {
    float z_max = 10.0f;
    float gamma = 0.3f;
    float alpha = 1.0f;
    float eps_floor = 1e-5f;
};

// `labels` names every class so similarities can be looked up; `table` may be
// null when alpha == 0 (semantic knowledge discarded, all non-targets equal).
AdvDistribution build_adv_distribution(const TargetSpec& targets, const EmbeddingTable* table,
                                       std::span<const std::string> labels,
                                       const AdvDistributionParams& params = {});

// Graph builders for the differentiable attack objectives. Each returns a
// scalar node computed from `logits`.
NodeId append_cw_topk_loss(Graph& g, NodeId logits, const TargetSpec& targets);
NodeId append_kl_loss(Graph& g, NodeId logits, const AdvDistribution& adv);
NodeId append_cross_entropy(Graph& g, NodeId logits, int label);

}  // namespace advtopk
