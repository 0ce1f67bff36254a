#include "advtopk/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace advtopk {

AttackMethod parse_method(const std::string& name) {
    if (name == "cw-topk") return AttackMethod::CwTopk;
    if (name == "distill") return AttackMethod::Distill;
    if (name == "fgsm") return AttackMethod::Fgsm;
    if (name == "pgd") return AttackMethod::Pgd;
    if (name == "mifgsm") return AttackMethod::Mifgsm;
    throw std::invalid_argument("unknown attack method '" + name +
                                "' (expected cw-topk, distill, fgsm, pgd or mifgsm)");
}

const char* method_name(AttackMethod m) {
    switch (m) {
        case AttackMethod::CwTopk: return "cw-topk";
        case AttackMethod::Distill: return "distill";
        case AttackMethod::Fgsm: return "fgsm";
        case AttackMethod::Pgd: return "pgd";
        case AttackMethod::Mifgsm: return "mifgsm";
    }
    return "?";
}

bool is_optimizer_method(AttackMethod m) {
    return m == AttackMethod::CwTopk || m == AttackMethod::Distill;
}

void OptimizerConfig::validate() const {
    if (search_steps < 1) throw std::invalid_argument("optimizer: search_steps must be >= 1");
    if (iterations < 1) throw std::invalid_argument("optimizer: iterations must be >= 1");
    if (!(lambda_init > 0.0f)) throw std::invalid_argument("optimizer: lambda_init must be positive");
    if (!(lambda_hi > 0.0f)) throw std::invalid_argument("optimizer: lambda upper bound must be positive");
    if (lambda_lo < 0.0f || lambda_lo >= lambda_hi)
        throw std::invalid_argument("optimizer: lambda bounds must satisfy 0 <= lo < hi");
    if (!(step_size > 0.0f)) throw std::invalid_argument("optimizer: step_size must be positive");
    if (beta1 < 0.0f || beta1 >= 1.0f || beta2 < 0.0f || beta2 >= 1.0f)
        throw std::invalid_argument("optimizer: moment decays must lie in [0,1)");
    if (energy_norm != 2) throw std::invalid_argument("optimizer: only the l2 energy penalty is supported");
}

void BudgetConfig::validate() const {
    if (epsilon < 0.0f) throw std::invalid_argument("budget: epsilon must be >= 0");
    if (steps < 1) throw std::invalid_argument("budget: steps must be >= 1");
    if (step_size < 0.0f) throw std::invalid_argument("budget: step_size must be >= 0");
    if (momentum < 0.0f) throw std::invalid_argument("budget: momentum must be >= 0");
}

LambdaSearch::LambdaSearch(float init, float lo, float hi)
    : lower_(lo), upper_bound_(hi), current_(init) {
    if (!(init > 0.0f) || !(hi > 0.0f) || lo < 0.0f || lo >= hi || init > hi)
        throw std::invalid_argument("lambda search: need 0 <= lo < hi and 0 < init <= hi");
}

void LambdaSearch::report(bool success) {
    if (success) {
        upper_found_ = true;
        upper_ = current_;
        current_ = 0.5f * (lower_ + upper_);
    } else {
        lower_ = current_;
        if (upper_found_) {
            current_ = 0.5f * (lower_ + upper_);
        } else {
            current_ = std::min(current_ * 10.0f, upper_bound_);
        }
    }
}

bool check_ordered_topk(std::span<const float> probs, std::span<const int> targets) {
    const int n = static_cast<int>(probs.size());
    const int k = static_cast<int>(targets.size());
    if (k < 1 || k > n) return false;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const float pa = probs[static_cast<std::size_t>(a)];
        const float pb = probs[static_cast<std::size_t>(b)];
        if (pa != pb) return pa > pb;
        return a < b;
    });
    for (int i = 0; i < k; ++i) {
        if (order[static_cast<std::size_t>(i)] != targets[static_cast<std::size_t>(i)]) return false;
    }
    if (k < n && probs[static_cast<std::size_t>(order[static_cast<std::size_t>(k - 1)])] ==
                     probs[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])])
        return false;  // tie straddling the boundary: ordering not realized
    return true;
}

int probability_rank(std::span<const float> probs, int label) {
    const float py = probs[static_cast<std::size_t>(label)];
    int rank = 1;
    for (int c = 0; c < static_cast<int>(probs.size()); ++c) {
        if (c == label) continue;
        const float pc = probs[static_cast<std::size_t>(c)];
        if (pc > py || (pc == py && c < label)) ++rank;
    }
    return rank;
}

namespace {

struct Norms {
    double l1 = 0.0, l2 = 0.0, linf = 0.0;
};

Norms delta_norms(std::span<const float> delta) {
    Norms n;
    double sq = 0.0;
    for (float v : delta) {
        const double a = std::abs(static_cast<double>(v));
        n.l1 += a;
        sq += a * a;
        n.linf = std::max(n.linf, a);
    }
    n.l2 = std::sqrt(sq);
    return n;
}

void finalize_outcome(AttackOutcome& out, std::span<const float> x) {
    out.delta.resize(out.adversarial.size());
    for (std::size_t i = 0; i < out.adversarial.size(); ++i)
        out.delta[i] = out.adversarial[i] - x[i];
    const Norms n = delta_norms(out.delta);
    out.l1 = n.l1;
    out.l2 = n.l2;
    out.linf = n.linf;
    if (out.targets.ground_truth >= 0) out.gt_rank = probability_rank(out.prediction, out.targets.ground_truth);
}

struct AdamState {
    std::vector<float> m, v;
    int t = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0f), v(n, 0.0f) {}

    void reset() {
        std::fill(m.begin(), m.end(), 0.0f);
        std::fill(v.begin(), v.end(), 0.0f);
        t = 0;
    }

    void step(Tensor& w, const Tensor& grad, const OptimizerConfig& cfg) {
        ++t;
        const float c1 = 1.0f - std::pow(cfg.beta1, static_cast<float>(t));
        const float c2 = 1.0f - std::pow(cfg.beta2, static_cast<float>(t));
        float* pw = w.data();
        const float* g = grad.data();
        for (std::size_t i = 0; i < m.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * g[i] * g[i];
            const float mhat = m[i] / c1;
            const float vhat = v[i] / c2;
            pw[i] -= cfg.step_size * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
};

}  // namespace

AttackOutcome optimize_attack(const Model& model, std::span<const float> x, AttackMethod method,
                              const TargetSpec& targets, const AdvDistribution* adv,
                              const OptimizerConfig& cfg) {
    if (!is_optimizer_method(method))
        throw std::invalid_argument("optimize_attack drives cw-topk and distill only");
    cfg.validate();
    targets.validate(model.label_count());
    if (method == AttackMethod::Distill) {
        if (!adv) throw std::invalid_argument("distill attack needs an adversarial distribution");
        if (adv->targets.targets != targets.targets)
            throw std::invalid_argument("adversarial distribution was built for different targets");
    }
    const int n = model.feature_count();
    if (static_cast<int>(x.size()) != n)
        throw std::invalid_argument("input has wrong feature count");

    // Starting point delta = 0: w = arctanh(2x - 1), clamped away from +-1.
    Tensor w0({n});
    for (int i = 0; i < n; ++i) {
        const float v = std::min(1.0f - 1e-6f, std::max(-1.0f + 1e-6f, 2.0f * x[static_cast<std::size_t>(i)] - 1.0f));
        w0[static_cast<std::size_t>(i)] = std::atanh(v);
    }

    Graph g;
    NodeId w = g.value(w0, "w", /*requires_grad=*/true);
    NodeId xprime = g.scale_add(g.tanh(w), 0.5f, 0.5f);
    NodeId xconst = g.value(Tensor({n}, std::vector<float>(x.begin(), x.end())), "x");
    NodeId delta = g.sub(xprime, xconst);
    NodeId energy = g.sum_reduce(g.mul(delta, delta));
    NodeId logits = model.build_forward(g, xprime);
    NodeId loss = method == AttackMethod::CwTopk ? append_cw_topk_loss(g, logits, targets)
                                                 : append_kl_loss(g, logits, *adv);
    NodeId lambda_node = g.value(Tensor::scalar(cfg.lambda_init), "lambda");
    NodeId objective = g.add(energy, g.mul(lambda_node, loss));

    // The target list excludes the ground truth and x is correctly
    // classified, so the clean input cannot already satisfy the attack.
    g.forward();
    if (g.value(loss)[0] <= 0.0f ||
        check_ordered_topk(stable_softmax(g.value(logits).values()), targets.targets))
        throw std::invalid_argument(
            "attack precondition violated: clean input already satisfies the target ordering "
            "(is the sample correctly classified and the target list ground-truth exclusive?)");

    AttackOutcome out;
    out.method = method;
    out.targets = targets;
    out.targeted = true;

    LambdaSearch search(cfg.lambda_init, cfg.lambda_lo, cfg.lambda_hi);
    AdamState adam(static_cast<std::size_t>(n));

    double best_l2 = std::numeric_limits<double>::infinity();
    float best_failed_loss = std::numeric_limits<float>::infinity();
    std::vector<float> best_x, best_pred, fallback_x, fallback_pred;
    float best_lambda = 0.0f;
    int updates = 0;

    for (int trial = 0; trial < cfg.search_steps; ++trial) {
        const float lam = search.current();
        g.set_value(w, w0);
        g.set_value(lambda_node, Tensor::scalar(lam));
        adam.reset();
        bool trial_success = false;

        for (int it = 0; it <= cfg.iterations; ++it) {
            g.forward();
            const float objective_value = g.value(objective)[0];
            if (!std::isfinite(objective_value)) break;  // abort this trial, let the search continue

            const std::vector<float> probs = stable_softmax(g.value(logits).values());
            if (check_ordered_topk(probs, targets.targets)) {
                trial_success = true;
                double sq = 0.0;
                for (float d : g.value(delta).values()) sq += static_cast<double>(d) * d;
                const double l2 = std::sqrt(sq);
                if (l2 < best_l2) {
                    best_l2 = l2;
                    best_x = g.value(xprime).to_vector();
                    best_pred = probs;
                    best_lambda = lam;
                }
            } else if (g.value(loss)[0] < best_failed_loss) {
                best_failed_loss = g.value(loss)[0];
                fallback_x = g.value(xprime).to_vector();
                fallback_pred = probs;
            }

            if (it == cfg.iterations) break;
            g.backward(objective);
            adam.step(g.leaf_data(w), g.grad(w), cfg);
            ++updates;
        }

        out.lambda_trace.emplace_back(lam, trial_success);
        search.report(trial_success);
    }

    out.iterations_used = updates;
    if (!best_x.empty()) {
        out.success = true;
        out.adversarial = std::move(best_x);
        out.prediction = std::move(best_pred);
        out.final_lambda = best_lambda;
    } else {
        out.success = false;
        out.adversarial = std::move(fallback_x);
        out.prediction = std::move(fallback_pred);
        out.final_lambda = out.lambda_trace.back().first;
    }
    finalize_outcome(out, x);
    return out;
}

namespace {

// Gradient of the cross-entropy toward `label` at the bound input leaf.
struct CeGradientGraph {
    Graph g;
    NodeId x = -1;
    NodeId logits = -1;
    NodeId ce = -1;

    CeGradientGraph(const Model& model, int label) {
        x = g.placeholder({model.feature_count()}, "x", /*requires_grad=*/true);
        logits = model.build_forward(g, x);
        ce = append_cross_entropy(g, logits, label);
    }

    const Tensor& gradient_at(const std::vector<float>& point) {
        g.set_value(x, Tensor({static_cast<int>(point.size())}, point));
        g.forward();
        g.backward(ce);
        return g.grad(x);
    }
};

AttackOutcome budget_attack(const Model& model, std::span<const float> x, int gt_label,
                            const TargetSpec* targets, const BudgetConfig& budget,
                            AttackMethod method) {
    budget.validate();
    if (targets) targets->validate(model.label_count());
    if (static_cast<int>(x.size()) != model.feature_count())
        throw std::invalid_argument("input has wrong feature count");
    const bool targeted = targets != nullptr;
    const int drive_label = targeted ? targets->targets.front() : gt_label;
    // untargeted ascends the ground-truth cross-entropy, targeted descends
    // the target's
    const float direction = targeted ? -1.0f : 1.0f;
    const int steps = method == AttackMethod::Fgsm ? 1 : budget.steps;
    float step_size = budget.step_size;
    if (step_size <= 0.0f) {
        if (method == AttackMethod::Fgsm) step_size = budget.epsilon;
        else if (method == AttackMethod::Pgd) step_size = 2.0f * budget.epsilon / static_cast<float>(steps);
        else step_size = budget.epsilon / static_cast<float>(steps);
    }

    CeGradientGraph ce(model, drive_label);
    const std::size_t n = x.size();
    std::vector<float> current(x.begin(), x.end());
    std::vector<float> momentum(n, 0.0f);

    for (int s = 0; s < steps; ++s) {
        const Tensor& grad = ce.gradient_at(current);
        const float* gptr = grad.data();
        if (method == AttackMethod::Mifgsm) {
            double l1 = 0.0;
            for (std::size_t i = 0; i < n; ++i) l1 += std::abs(static_cast<double>(gptr[i]));
            const float scale = l1 > 0.0 ? static_cast<float>(1.0 / l1) : 0.0f;
            for (std::size_t i = 0; i < n; ++i)
                momentum[i] = budget.momentum * momentum[i] + scale * gptr[i];
            gptr = momentum.data();
        }
        for (std::size_t i = 0; i < n; ++i) {
            const float sg = gptr[i] > 0.0f ? 1.0f : (gptr[i] < 0.0f ? -1.0f : 0.0f);
            float v = current[i] + direction * step_size * sg;
            // project onto the epsilon ball around x, then onto the box
            v = std::min(x[i] + budget.epsilon, std::max(x[i] - budget.epsilon, v));
            v = std::min(1.0f, std::max(0.0f, v));
            current[i] = v;
        }
    }

    AttackOutcome out;
    out.method = method;
    out.targeted = targeted;
    if (targeted) {
        out.targets = *targets;
    } else {
        out.targets.ground_truth = gt_label;
        out.targets.strategy = TargetStrategy::Random;
    }
    out.adversarial = std::move(current);
    out.prediction = model.predict(out.adversarial);
    out.success = targeted ? check_ordered_topk(out.prediction, targets->targets)
                           : argmax_low_id(out.prediction) != gt_label;
    out.iterations_used = steps;
    finalize_outcome(out, x);
    // rounding in x +- epsilon can leak an ulp past the budget; pin it
    for (std::size_t i = 0; i < n; ++i)
        out.delta[i] = std::min(budget.epsilon, std::max(-budget.epsilon, out.delta[i]));
    const Norms nn = delta_norms(out.delta);
    out.l1 = nn.l1;
    out.l2 = nn.l2;
    out.linf = nn.linf;
    return out;
}

}  // namespace

AttackOutcome fgsm(const Model& model, std::span<const float> x, int gt_label,
                   const TargetSpec* targets, const BudgetConfig& budget) {
    return budget_attack(model, x, gt_label, targets, budget, AttackMethod::Fgsm);
}

AttackOutcome pgd(const Model& model, std::span<const float> x, int gt_label,
                  const TargetSpec* targets, const BudgetConfig& budget) {
    return budget_attack(model, x, gt_label, targets, budget, AttackMethod::Pgd);
}

AttackOutcome mifgsm(const Model& model, std::span<const float> x, int gt_label,
                     const TargetSpec* targets, const BudgetConfig& budget) {
    return budget_attack(model, x, gt_label, targets, budget, AttackMethod::Mifgsm);
}

}  // namespace advtopk
