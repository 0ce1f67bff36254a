#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advtopk/classifier.hpp"
#include "advtopk/losses.hpp"
#include "advtopk/semantics.hpp"

namespace advtopk {

enum class AttackMethod { CwTopk, Distill, Fgsm, Pgd, Mifgsm };

AttackMethod parse_method(const std::string& name);
const char* method_name(AttackMethod m);
bool is_optimizer_method(AttackMethod m);  // CwTopk / Distill

// Penalty-optimization settings: `search_steps` trials of the trade-off
// constant, `iterations` gradient steps per trial.
struct OptimizerConfig {
    int search_steps = 9;
    int iterations = 1000;
    float lambda_init = 1e-3f;
    float lambda_lo = 0.0f;
    float lambda_hi = 1e10f;
    float step_size = 0.01f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float adam_eps = 1e-8f;
    int energy_norm = 2;  // only the squared l2 energy is implemented

    void validate() const;
};

// Budget-ball settings for the signed-gradient family.
struct BudgetConfig {
    float epsilon = 0.063f;
    int steps = 10;
    float step_size = 0.0f;  // 0 = per-method default
    float momentum = 1.0f;   // mifgsm only
    bool targeted = false;

    void validate() const;
};

struct AttackOutcome {
    AttackMethod method = AttackMethod::CwTopk;
    TargetSpec targets;  // empty target list for untargeted runs
    bool targeted = true;
    std::vector<float> adversarial;  // x', always inside [0,1]^n
    std::vector<float> delta;        // x' - x
    bool success = false;
    double l1 = 0.0, l2 = 0.0, linf = 0.0;
    float final_lambda = 0.0f;
    int iterations_used = 0;
    int gt_rank = 0;                           // 1-based rank of the ground truth in `prediction`
    std::vector<float> prediction;             // f(x')
    std::vector<std::pair<float, bool>> lambda_trace;  // (lambda, trial success)
};

// Trade-off constant schedule: grow by 10x until the first success, then
// bisect between the largest failing and smallest succeeding value.
class LambdaSearch {
public:
    LambdaSearch(float init, float lo, float hi);
    float current() const { return current_; }
    bool bracketed() const { return upper_found_; }
    void report(bool success);

private:
    float lower_;
    float upper_ = 0.0f;
    float upper_bound_;
    float current_;
    bool upper_found_ = false;
};

// True iff the k highest-probability labels, in descending order, equal
// `targets`. Ties resolve toward the lower label id; a tie across the rank-k
// boundary counts as failure.
bool check_ordered_topk(std::span<const float> probs, std::span<const int> targets);

// 1-based rank of `label`: one plus the number of labels with strictly higher
// probability, plus equal-probability labels with a lower id.
int probability_rank(std::span<const float> probs, int label);

// Minimizes ||x'-x||_2^2 + lambda * L(x') over x' = (tanh(w)+1)/2 with the
// lambda schedule above. Returns the minimum-l2 successful iterate across all
// trials, or the lowest-loss iterate with success=false when every trial
// fails. `adv` is required for the Distill loss and ignored otherwise.
AttackOutcome optimize_attack(const Model& model, std::span<const float> x, AttackMethod method,
                              const TargetSpec& targets, const AdvDistribution* adv,
                              const OptimizerConfig& cfg);

// Signed-gradient family. `targets` null selects untargeted mode (push the
// prediction off `gt_label`); otherwise the first target drives the step and
// success means the full ordered target list is realized.
AttackOutcome fgsm(const Model& model, std::span<const float> x, int gt_label,
                   const TargetSpec* targets, const BudgetConfig& budget);
AttackOutcome pgd(const Model& model, std::span<const float> x, int gt_label,
                  const TargetSpec* targets, const BudgetConfig& budget);
AttackOutcome mifgsm(const Model& model, std::span<const float> x, int gt_label,
                     const TargetSpec* targets, const BudgetConfig& budget);

}  // namespace advtopk
