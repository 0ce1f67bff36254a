#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "advtopk/attack.hpp"
#include "advtopk/eval.hpp"

namespace advtopk {

// One attack configuration inside a campaign. The tag uniquely labels the
// variant in outcome files and reports, e.g. "cw-topk@9x1000" or
// "pgd@eps0.063x10".
struct AttackVariant {
    AttackMethod method = AttackMethod::CwTopk;
    OptimizerConfig opt;   // optimizer methods
    BudgetConfig budget;   // signed-gradient methods
    std::string tag() const;
};

struct CampaignSpec {
    std::vector<AttackVariant> variants;
    TargetStrategy strategy = TargetStrategy::Random;
    int k = 1;
    int sample_count = 50;
    std::uint64_t seed = 7;
    AdvDistributionParams adv;

    void validate() const;
};

// The evaluation subset: correctly classified validation samples, chosen by a
// seeded shuffle.
struct EvalPool {
    std::vector<InputSample> samples;
    std::vector<int> source_indices;  // positions in the original validation set
};

EvalPool select_eval_pool(const Model& model, const Dataset& validation, int count,
                          std::uint64_t seed);

struct CampaignTask {
    int id = -1;
    int variant = -1;
    int sample = -1;           // index into the pool
    TargetSpec targets;        // empty target list for untargeted variants
    bool targeted = true;
};

// Deterministic task list: variant-major, then sample, then target list.
// Target lists are selected once per sample from hash(seed, sample), so every
// variant attacks identical (sample, targets) pairs.
std::vector<CampaignTask> enumerate_tasks(const CampaignSpec& spec, const EvalPool& pool,
                                          const Model& model, const EmbeddingTable* table);

OutcomeRecord run_task(const Model& model, const EvalPool& pool, const CampaignSpec& spec,
                       const CampaignTask& task, const EmbeddingTable* table);

struct OutcomesFile {
    std::string meta_line;  // first line of the file, a JSON object
    std::vector<OutcomeRecord> records;
};

OutcomesFile read_outcomes(const std::string& path);

// Runs every task not already present in `path`, streaming records to the
// file in task order (an interrupted run leaves a valid prefix that a rerun
// picks up). Returns all records in task order. `threads` bounds the worker
// pool; 0 means all hardware threads.
std::vector<OutcomeRecord> run_campaign(const Model& model, const EvalPool& pool,
                                        const CampaignSpec& spec, const EmbeddingTable* table,
                                        const std::string& path, int threads = 0,
                                        const std::function<void(int, int)>& progress = {});

}  // namespace advtopk
