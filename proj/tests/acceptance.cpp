// Acceptance suite: ten numbered criteria, one PASS/FAIL line each.
// Exit code is the number of failed criteria.
//
// The heavy criteria share one fixture model and a couple of attack
// campaigns; everything is seeded, so reruns reproduce the same numbers.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "advtopk/campaign.hpp"
#include "advtopk/kernels.hpp"
#include "support.hpp"

using namespace advtopk;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

struct Criterion {
    int id;
    std::string title;
    Clock::time_point start = Clock::now();
    bool ok = true;
    std::string detail;

    Criterion(int id_, std::string title_) : id(id_), title(std::move(title_)) {}

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }

    void note(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }

    void finish() {
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        std::printf("[%2d] %s  %-58s (%.1f s)%s%s\n", id, ok ? "PASS" : "FAIL", title.c_str(), secs,
                    detail.empty() ? "" : "  -- ", detail.c_str());
        std::fflush(stdout);
        if (!ok) ++g_failures;
    }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------- fixture --

struct FixtureBundle {
    Model model;
    Dataset train, val;
    EmbeddingTable table;
};

FixtureBundle build_fixture() {
    FixtureBundle f;
    f.table = EmbeddingTable::load(ADVTOPK_EMBEDDINGS_FILE);
    Dataset all = generate_synthetic(20, 160, 64, 1001, 0.10f);
    for (int c = 0; c < 20; ++c)
        for (int i = 0; i < 160; ++i)
            ((i < 120) ? f.train : f.val)
                .samples.push_back(all.samples[static_cast<std::size_t>(c * 160 + i)]);
    Architecture arch;
    arch.input_shape = {64};
    arch.layers = {{LayerKind::Affine, 64, 128}, {LayerKind::Relu, 0, 0}, {LayerKind::Affine, 128, 20}};
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.seed = 1;
    TrainReport report;
    f.model = train_classifier(f.train, f.val, arch, f.table.names(), cfg, &report);
    std::printf("fixture: 20 classes, dim 64, train acc %.4f, val acc %.4f\n",
                report.train_accuracy, report.validation_accuracy);
    if (report.validation_accuracy < 0.90)
        std::printf("warning: fixture accuracy below the 90%% gate\n");
    return f;
}

AttackVariant opt_variant(AttackMethod m, int steps, int iters) {
    AttackVariant v;
    v.method = m;
    v.opt.search_steps = steps;
    v.opt.iterations = iters;
    return v;
}

std::vector<OutcomeRecord> in_group(const std::vector<OutcomeRecord>& records, const std::string& tag) {
    std::vector<OutcomeRecord> out;
    for (const OutcomeRecord& r : records)
        if (r.method_tag == tag) out.push_back(r);
    return out;
}

double mean_l2_of_successes(const std::vector<OutcomeRecord>& records) {
    double sum = 0.0;
    int n = 0;
    for (const OutcomeRecord& r : records)
        if (r.success) {
            sum += r.l2;
            ++n;
        }
    return n ? sum / n : -1.0;
}

double asr_of(const std::vector<OutcomeRecord>& records) {
    int n = 0;
    for (const OutcomeRecord& r : records) n += r.success;
    return records.empty() ? 0.0 : 100.0 * n / static_cast<double>(records.size());
}

// ----------------------------------------------------------- criterion 1 --

void criterion_gradients(const FixtureBundle& f) {
    Criterion c(1, "gradient checks: primitives and both attack losses");
    std::mt19937 rng(2101);
    int cases = 0;
    float worst = 0.0f;

    auto check_grad = [&](Graph& g, NodeId leaf, NodeId root) {
        g.forward();
        g.backward(root);
        // the probe's float32 noise grows with |f|; floor the scale there
        const float floor = std::max(1.0f, std::abs(g.value(root)[0]));
        float w = 0.0f;
        const bool ok = testsupport::grads_match(g.grad(leaf).to_vector(),
                                                 testsupport::fd_gradient(g, leaf, root), 1e-3f, floor, &w);
        worst = std::max(worst, w);
        ++cases;
        return ok;
    };

    // one weighted-sum probe per primitive, 100 randomized cases each
    struct UnaryCase {
        const char* name;
        std::function<NodeId(Graph&, NodeId)> build;
        float lo, hi, kink, margin;
    };
    const std::vector<UnaryCase> unary = {
        {"relu", [](Graph& g, NodeId x) { return g.relu(x); }, -2, 2, 0, 0.05f},
        {"tanh", [](Graph& g, NodeId x) { return g.tanh(x); }, -2, 2, 0, 0},
        {"arctanh", [](Graph& g, NodeId x) { return g.arctanh(x); }, -0.9f, 0.9f, 0, 0},
        {"exp", [](Graph& g, NodeId x) { return g.exp(x); }, -2, 2, 0, 0},
        {"log", [](Graph& g, NodeId x) { return g.log(x); }, 0.2f, 2, 0, 0},
        {"softmax", [](Graph& g, NodeId x) { return g.softmax(x); }, -2, 2, 0, 0},
        {"log_softmax", [](Graph& g, NodeId x) { return g.log_softmax(x); }, -2, 2, 0, 0},
        {"scale_add", [](Graph& g, NodeId x) { return g.scale_add(x, 1.3f, 0.2f); }, -2, 2, 0, 0},
        {"clamp", [](Graph& g, NodeId x) { return g.clamp(x, -1, 1); }, -2, 2, -1, 0.05f},
        {"sum", [](Graph& g, NodeId x) { return g.reshape(g.sum_reduce(x), {1}); }, -2, 2, 0, 0},
    };
    for (const UnaryCase& uc : unary) {
        bool all_ok = true;
        for (int rep = 0; rep < 100; ++rep) {
            std::vector<float> values = testsupport::random_values(6, rng, uc.lo, uc.hi);
            if (uc.margin > 0) {
                testsupport::avoid_kink(values, uc.kink, uc.margin);
                testsupport::avoid_kink(values, -uc.kink, uc.margin);
            }
            Graph g;
            NodeId x = g.value(Tensor({6}, values), "x", true);
            NodeId out = uc.build(g, x);
            const int width = static_cast<int>(g.size(out));
            NodeId flat = g.shape(out).size() == 1 ? out : g.reshape(out, {width});
            NodeId head = g.sum_reduce(g.mul(
                flat, g.value(Tensor({width}, testsupport::random_values(static_cast<std::size_t>(width),
                                                                         rng, 0.3f, 1.5f)))));
            all_ok &= check_grad(g, x, head);
        }
        c.expect(all_ok, std::string(uc.name) + " gradient mismatch");
    }

    // matmul, mul/add/sub, max/pick/conv
    bool ok = true;
    for (int rep = 0; rep < 100; ++rep) {
        Graph g;
        NodeId a = g.value(Tensor({4, 5}, testsupport::random_values(20, rng)), "a", true);
        NodeId v = g.value(Tensor({5}, testsupport::random_values(5, rng)), "v", true);
        NodeId b = g.value(Tensor({4}, testsupport::random_values(4, rng)), "b", true);
        NodeId head = g.sum_reduce(g.mul(g.add(g.matmul(a, v), b),
                                         g.value(Tensor({4}, testsupport::random_values(4, rng, 0.3f, 1.5f)))));
        ok &= check_grad(g, a, head);
        ok &= check_grad(g, v, head);
        ok &= check_grad(g, b, head);
    }
    c.expect(ok, "affine chain gradient mismatch");

    ok = true;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<float> values = testsupport::random_values(7, rng);
        std::sort(values.begin(), values.end());
        if (values[6] - values[5] < 0.05f) values[6] += 0.1f;
        std::shuffle(values.begin(), values.end(), rng);
        Graph g;
        NodeId x = g.value(Tensor({7}, values), "x", true);
        NodeId head = g.add(g.max_reduce(x), g.pick(x, rep % 7));
        ok &= check_grad(g, x, head);
    }
    c.expect(ok, "max/pick gradient mismatch");

    ok = true;
    for (int rep = 0; rep < 25; ++rep) {
        Graph g;
        NodeId x = g.value(Tensor({1, 5, 5}, testsupport::random_values(25, rng)), "x", true);
        NodeId w = g.value(Tensor({2, 1, 3, 3}, testsupport::random_values(18, rng)), "w", true);
        NodeId b = g.value(Tensor({2}, testsupport::random_values(2, rng)), "b", true);
        NodeId head = g.sum_reduce(g.mul(g.reshape(g.conv3x3(x, w, b), {50}),
                                         g.value(Tensor({50}, testsupport::random_values(50, rng, 0.3f, 1.5f)))));
        ok &= check_grad(g, x, head);
        ok &= check_grad(g, w, head);
        ok &= check_grad(g, b, head);
    }
    c.expect(ok, "conv3x3 gradient mismatch");

    // the full ordered hinge and the distillation loss, end to end through
    // the fixture network
    int hinge_checked = 0;
    bool hinge_ok = true, kl_ok = true;
    std::uniform_int_distribution<int> pick_sample(0, static_cast<int>(f.val.samples.size()) - 1);
    for (int rep = 0; rep < 100; ++rep) {
        const InputSample& s = f.val.samples[static_cast<std::size_t>(pick_sample(rng))];
        std::vector<int> ids(20);
        std::iota(ids.begin(), ids.end(), 0);
        std::shuffle(ids.begin(), ids.end(), rng);
        TargetSpec spec;
        const int k = 1 + rep % 5;
        for (int i = 0; i < 20 && static_cast<int>(spec.targets.size()) < k; ++i)
            if (ids[static_cast<std::size_t>(i)] != s.label) spec.targets.push_back(ids[static_cast<std::size_t>(i)]);
        spec.ground_truth = s.label;

        Graph g;
        NodeId x = g.value(Tensor({64}, s.features), "x", true);
        NodeId logits = f.model.build_forward(g, x);
        NodeId hinge = append_cw_topk_loss(g, logits, spec);
        g.forward();
        // probe only away from hinge corners
        bool smooth = true;
        const std::vector<float> z = g.value(logits).to_vector();
        for (int i = 0; i < spec.k(); ++i) {
            float best = -1e30f, second = -1e30f;
            for (int cidx = 0; cidx < 20; ++cidx) {
                bool placed = false;
                for (int j = 0; j <= i; ++j) placed |= spec.targets[static_cast<std::size_t>(j)] == cidx;
                if (placed) continue;
                const float v = z[static_cast<std::size_t>(cidx)];
                if (v > best) {
                    second = best;
                    best = v;
                } else if (v > second) {
                    second = v;
                }
            }
            if (best - second < 0.02f ||
                std::abs(best - z[static_cast<std::size_t>(spec.targets[static_cast<std::size_t>(i)])]) < 0.02f)
                smooth = false;
        }
        if (smooth) {
            hinge_ok &= check_grad(g, x, hinge);
            ++hinge_checked;
        }

        AdvDistributionParams params;
        const AdvDistribution adv = build_adv_distribution(spec, &f.table, f.model.labels, params);
        Graph g2;
        NodeId x2 = g2.value(Tensor({64}, s.features), "x", true);
        NodeId kl = append_kl_loss(g2, f.model.build_forward(g2, x2), adv);
        kl_ok &= check_grad(g2, x2, kl);
    }
    c.expect(hinge_ok, "ordered hinge end-to-end gradient mismatch");
    c.expect(kl_ok, "distillation loss end-to-end gradient mismatch");
    c.expect(hinge_checked >= 60, "too few smooth hinge probes");
    c.note(std::to_string(cases) + " cases, worst scaled err " + fmt(worst));
    const double secs = std::chrono::duration<double>(Clock::now() - c.start).count();
    c.expect(secs < 10.0, "exceeded the 10 s budget");
    c.finish();
}

// ----------------------------------------------------------- criterion 2 --

void criterion_loss_equivalences() {
    Criterion c(2, "loss equivalences: k=1 collapse and zero iff ordered top-k");
    std::mt19937 rng(2202);
    bool collapse = true;
    for (int rep = 0; rep < 10000; ++rep) {
        const std::vector<float> z = testsupport::random_values(14, rng, -6.0f, 6.0f);
        std::uniform_int_distribution<int> pick(0, 13);
        const int t = pick(rng);
        TargetSpec spec;
        spec.targets = {t};
        spec.ground_truth = (t + 1 + pick(rng) % 13) % 14;
        if (cw_topk_loss(z, spec) != cw_loss(z, t)) collapse = false;
    }
    c.expect(collapse, "k=1 ordered hinge differs from the top-1 hinge");

    bool iff = true;
    int zeros = 0;
    for (int k : {1, 2, 3, 5}) {
        for (int rep = 0; rep < 3000; ++rep) {
            std::vector<float> z = testsupport::random_values(10, rng, -4.0f, 4.0f);
            std::vector<int> ids(10);
            std::iota(ids.begin(), ids.end(), 0);
            std::shuffle(ids.begin(), ids.end(), rng);
            TargetSpec spec;
            spec.targets.assign(ids.begin(), ids.begin() + k);
            spec.ground_truth = ids.back();
            if (rep % 3 == 0)
                for (int i = 0; i < k; ++i)
                    z[static_cast<std::size_t>(spec.targets[static_cast<std::size_t>(i)])] = 6.0f - 0.4f * i;
            std::vector<int> order(10);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                if (z[static_cast<std::size_t>(a)] != z[static_cast<std::size_t>(b)])
                    return z[static_cast<std::size_t>(a)] > z[static_cast<std::size_t>(b)];
                return a < b;
            });
            const bool satisfied = std::vector<int>(order.begin(), order.begin() + k) == spec.targets;
            const float loss = cw_topk_loss(z, spec);
            if (satisfied != (loss == 0.0f)) iff = false;
            zeros += satisfied;
        }
    }
    c.expect(iff, "loss zero does not coincide with the sorted ordering");
    c.expect(zeros > 3000, "too few satisfied orderings exercised");
    c.finish();
}

// ----------------------------------------------------------- criterion 3 --

void criterion_distribution(const FixtureBundle& f) {
    Criterion c(3, "designed distribution invariants over 1000 random target lists");
    std::mt19937 rng(2303);
    AdvDistributionParams params;  // Z=10 gamma=0.3 alpha=1 floor=1e-5
    bool ok = true;
    for (int rep = 0; rep < 1000; ++rep) {
        const int k = 1 + rep % 5;
        std::vector<int> ids(20);
        std::iota(ids.begin(), ids.end(), 0);
        std::shuffle(ids.begin(), ids.end(), rng);
        TargetSpec spec;
        spec.targets.assign(ids.begin(), ids.begin() + k);
        spec.ground_truth = ids.back();
        const AdvDistribution adv = build_adv_distribution(spec, &f.table, f.model.labels, params);
        double sum = 0.0;
        for (float p : adv.probs) sum += p;
        if (std::abs(sum - 1.0) >= 1e-6) ok = false;
        for (int i = 0; i + 1 < k; ++i)
            if (!(adv.probs[static_cast<std::size_t>(spec.targets[static_cast<std::size_t>(i)])] >
                  adv.probs[static_cast<std::size_t>(spec.targets[static_cast<std::size_t>(i + 1)])]))
                ok = false;
        const float weakest = adv.probs[static_cast<std::size_t>(spec.targets[static_cast<std::size_t>(k - 1)])];
        for (int l = 0; l < 20; ++l)
            if (!spec.contains(l) && !(weakest > adv.probs[static_cast<std::size_t>(l)])) ok = false;
    }
    c.expect(ok, "ordering or normalization violated");

    TargetSpec spec;
    spec.targets = {1, 2, 3, 4, 5};
    spec.ground_truth = 0;
    AdvDistributionParams bad;
    bad.alpha = 10.0f - 4.0f * 0.3f;  // alpha == weakest target logit
    bool rejected = false;
    try {
        build_adv_distribution(spec, &f.table, f.model.labels, bad);
    } catch (const std::invalid_argument&) {
        rejected = true;
    }
    c.expect(rejected, "alpha >= weakest target logit was not rejected");
    c.finish();
}

// ----------------------------------------------------------- criterion 4 --

void criterion_grid_oracle() {
    Criterion c(4, "engine within 10% of the dense grid oracle (tiny linear model)");
    Model m;
    m.arch.input_shape = {2};
    m.arch.layers = {{LayerKind::Affine, 2, 3}};
    m.params = {Tensor({3, 2}, {2.0f, 0.3f, -1.0f, 1.8f, -0.8f, -1.6f}),
                Tensor({3}, {0.1f, -0.2f, 0.05f})};
    m.labels = {"a", "b", "c"};
    const std::vector<float> x0 = {0.62f, 0.55f};
    c.expect(m.predicted_label(x0) == 0, "fixture point not classified as label 0");

    OptimizerConfig cfg;  // 9x1000
    for (int target : {1, 2}) {
        // independent oracle: dense scan at 1e-3, top-1 by hand-sorted logits
        double oracle = 1e30;
        const float res = 1e-3f;
        const int n = 1000;
        for (int i = 0; i <= n; ++i) {
            for (int j = 0; j <= n; ++j) {
                const float x = i * res, y = j * res;
                const std::vector<float> z = m.logits(std::vector<float>{x, y});
                int top = 0;
                for (int l = 1; l < 3; ++l)
                    if (z[static_cast<std::size_t>(l)] > z[static_cast<std::size_t>(top)]) top = l;
                bool strict = true;
                for (int l = 0; l < 3; ++l)
                    if (l != top && z[static_cast<std::size_t>(l)] == z[static_cast<std::size_t>(top)])
                        strict = false;
                if (top != target || !strict) continue;
                oracle = std::min(oracle, std::hypot(static_cast<double>(x) - x0[0],
                                                     static_cast<double>(y) - x0[1]));
            }
        }
        TargetSpec spec;
        spec.targets = {target};
        spec.ground_truth = 0;
        const AttackOutcome out = optimize_attack(m, x0, AttackMethod::CwTopk, spec, nullptr, cfg);
        c.expect(out.success, "engine failed on target " + std::to_string(target));
        c.expect(out.l2 <= 1.1 * oracle && out.l2 >= 0.9 * oracle,
                 "target " + std::to_string(target) + ": engine " + fmt(out.l2) + " vs oracle " + fmt(oracle));
        c.note("t" + std::to_string(target) + " engine/oracle " + fmt(out.l2 / oracle));
    }
    const double secs = std::chrono::duration<double>(Clock::now() - c.start).count();
    c.expect(secs < 60.0, "exceeded the 60 s budget");
    c.finish();
}

// ------------------------------------------------- criteria 5 and 8 (top-1) --

std::vector<OutcomeRecord> top1_campaign(const FixtureBundle& f, const std::string& dir) {
    CampaignSpec spec;
    spec.variants = {opt_variant(AttackMethod::CwTopk, 9, 30), opt_variant(AttackMethod::Distill, 9, 30),
                     opt_variant(AttackMethod::CwTopk, 9, 1000),
                     opt_variant(AttackMethod::Distill, 9, 1000)};
    spec.strategy = TargetStrategy::Random;
    spec.k = 1;
    spec.sample_count = 200;
    spec.seed = 7;
    const EvalPool pool = select_eval_pool(f.model, f.val, spec.sample_count, spec.seed);
    return run_campaign(f.model, pool, spec, &f.table, dir + "/top1.jsonl", 0,
                        [](int d, int t) {
                            if (d % 100 == 0 || d == t) std::printf("  top1 campaign %d/%d\n", d, t);
                        });
}

void criterion_top1(const std::vector<OutcomeRecord>& records) {
    Criterion c(5, "top-1 trend: 100% ASR at 9x1000, distillation l2 within 1.10x");
    const auto cw = in_group(records, "cw-topk@9x1000");
    const auto kd = in_group(records, "distill@9x1000");
    c.expect(cw.size() == 200 && kd.size() == 200, "unexpected record counts");
    c.expect(asr_of(cw) == 100.0, "cw-topk 9x1000 ASR " + fmt(asr_of(cw)));
    c.expect(asr_of(kd) == 100.0, "distill 9x1000 ASR " + fmt(asr_of(kd)));
    const double cwl2 = mean_l2_of_successes(cw);
    const double kdl2 = mean_l2_of_successes(kd);
    c.expect(kdl2 <= 1.10 * cwl2, "distill l2 " + fmt(kdl2) + " vs cw " + fmt(cwl2));
    c.note("mean l2: cw " + fmt(cwl2) + ", distill " + fmt(kdl2));
    c.finish();
}

void criterion_budget_monotonicity(const std::vector<OutcomeRecord>& records) {
    Criterion c(8, "budget monotonicity: mean l2 at 9x1000 <= 9x30 on matched tasks");
    for (const char* method : {"cw-topk", "distill"}) {
        const auto short_run = in_group(records, std::string(method) + "@9x30");
        const auto long_run = in_group(records, std::string(method) + "@9x1000");
        const double s = mean_l2_of_successes(short_run);
        const double l = mean_l2_of_successes(long_run);
        c.expect(s >= 0 && l >= 0, std::string(method) + ": missing successes");
        c.expect(l <= s, std::string(method) + ": 9x1000 " + fmt(l) + " > 9x30 " + fmt(s));
        c.note(std::string(method) + " " + fmt(s) + " -> " + fmt(l));
    }
    c.finish();
}

// ----------------------------------------------------------- criterion 6 --

void criterion_top5(const FixtureBundle& f, const std::string& dir) {
    Criterion c(6, "top-5 trend at 9x30: distillation beats the ordered hinge");
    CampaignSpec spec;
    spec.variants = {opt_variant(AttackMethod::CwTopk, 9, 30), opt_variant(AttackMethod::Distill, 9, 30)};
    spec.strategy = TargetStrategy::Random;
    spec.k = 5;
    spec.sample_count = 100;
    spec.seed = 19;
    const EvalPool pool = select_eval_pool(f.model, f.val, spec.sample_count, spec.seed);
    const auto records = run_campaign(f.model, pool, spec, &f.table, dir + "/top5.jsonl", 0);
    const auto cw = in_group(records, "cw-topk@9x30");
    const auto kd = in_group(records, "distill@9x30");
    const double cw_asr = asr_of(cw), kd_asr = asr_of(kd);
    const double cw_l2 = mean_l2_of_successes(cw), kd_l2 = mean_l2_of_successes(kd);
    const bool asr_gap = kd_asr >= cw_asr + 5.0;
    const bool l2_gap = kd_asr >= cw_asr && cw_l2 > 0 && kd_l2 <= 0.9 * cw_l2;
    c.expect(asr_gap || l2_gap,
             "ASR cw " + fmt(cw_asr) + " vs distill " + fmt(kd_asr) + ", l2 cw " + fmt(cw_l2) +
                 " vs distill " + fmt(kd_l2));
    c.note("ASR " + fmt(cw_asr) + " -> " + fmt(kd_asr) + ", l2 " + fmt(cw_l2) + " -> " + fmt(kd_l2));
    c.finish();
}

// ----------------------------------------------------------- criterion 7 --

void criterion_rank_suite(const FixtureBundle& f, const std::string& dir) {
    Criterion c(7, "rank suite: untargeted pgd outranks targeted cw, exact hand fixture");
    CampaignSpec spec;
    AttackVariant pgd_v;
    pgd_v.method = AttackMethod::Pgd;
    pgd_v.budget.targeted = false;
    AttackVariant mif_v;
    mif_v.method = AttackMethod::Mifgsm;
    mif_v.budget.targeted = false;
    spec.variants = {pgd_v, mif_v, opt_variant(AttackMethod::CwTopk, 9, 30)};
    spec.strategy = TargetStrategy::Random;
    spec.k = 1;
    spec.sample_count = 50;
    spec.seed = 23;
    const EvalPool pool = select_eval_pool(f.model, f.val, spec.sample_count, spec.seed);
    const auto records = run_campaign(f.model, pool, spec, &f.table, dir + "/ranks.jsonl", 0);

    const std::vector<int> m_list = {1, 2, 3, 5, 10};
    const RankStats pgd_stats = gt_rank_stats(in_group(records, pgd_v.tag()), m_list);
    const RankStats cw_stats = gt_rank_stats(in_group(records, "cw-topk@9x30"), m_list);
    c.expect(pgd_stats.n > 0 && cw_stats.n > 0, "no successful attacks to rank");
    c.expect(pgd_stats.average_rank > cw_stats.average_rank,
             "pgd rank " + fmt(pgd_stats.average_rank) + " vs cw " + fmt(cw_stats.average_rank));
    for (const RankStats* st : {&pgd_stats, &cw_stats}) {
        for (std::size_t i = 1; i < st->top_m_proportion.size(); ++i)
            c.expect(st->top_m_proportion[i] >= st->top_m_proportion[i - 1],
                     "proportions not monotone in m");
    }
    c.note("avg rank: pgd " + fmt(pgd_stats.average_rank) + ", cw " + fmt(cw_stats.average_rank));

    // exact agreement with an independent hand aggregation of 10 outcomes
    std::vector<OutcomeRecord> fixture;
    std::vector<int> hand_ranks;
    std::mt19937 rng(2707);
    for (int i = 0; i < 10; ++i) {
        OutcomeRecord r;
        r.sample = i;
        r.method_tag = "hand";
        r.strategy = "random";
        r.k = 1;
        r.targeted = true;
        r.ground_truth = i % 4;
        r.targets = {(i % 4 + 1) % 4};
        r.success = i != 3;  // one failure excluded from the statistics
        r.l2 = 1.0 + i;
        r.prediction = stable_softmax(testsupport::random_values(6, rng, -2.0f, 2.0f));
        if (r.success) {
            int rank = 1;
            const float py = r.prediction[static_cast<std::size_t>(r.ground_truth)];
            for (int l = 0; l < 6; ++l) {
                if (l == r.ground_truth) continue;
                const float pl = r.prediction[static_cast<std::size_t>(l)];
                if (pl > py || (pl == py && l < r.ground_truth)) ++rank;
            }
            hand_ranks.push_back(rank);
        }
        fixture.push_back(std::move(r));
    }
    const std::vector<int> small_m = {1, 2, 3};
    const RankStats hand = gt_rank_stats(fixture, small_m);
    double mean = 0.0;
    for (int r : hand_ranks) mean += r;
    mean /= static_cast<double>(hand_ranks.size());
    c.expect(hand.n == static_cast<int>(hand_ranks.size()), "hand fixture count mismatch");
    c.expect(hand.average_rank == mean, "hand fixture mean mismatch");
    for (std::size_t mi = 0; mi < small_m.size(); ++mi) {
        double expect = 0.0;
        for (int r : hand_ranks) expect += r <= small_m[mi];
        expect /= static_cast<double>(hand_ranks.size());
        c.expect(hand.top_m_proportion[mi] == expect, "hand fixture proportion mismatch");
    }
    c.finish();
}

// ----------------------------------------------------------- criterion 9 --

void criterion_case_ordering(const FixtureBundle& f, const std::string& dir) {
    Criterion c(9, "protocol ordering: best <= average <= worst mean l2 (exhaustive)");
    CampaignSpec spec;
    spec.variants = {opt_variant(AttackMethod::CwTopk, 9, 1000)};
    spec.strategy = TargetStrategy::ExhaustiveTop1;
    spec.k = 1;
    spec.sample_count = 12;
    spec.seed = 29;
    const EvalPool pool = select_eval_pool(f.model, f.val, spec.sample_count, spec.seed);
    const auto records = run_campaign(f.model, pool, spec, &f.table, dir + "/exhaustive.jsonl", 0,
                                      [](int d, int t) {
                                          if (d % 60 == 0 || d == t)
                                              std::printf("  exhaustive campaign %d/%d\n", d, t);
                                      });
    const auto reports = aggregate_cases(records);
    const EvalReport *best = nullptr, *avg = nullptr, *worst = nullptr;
    for (const EvalReport& r : reports) {
        if (r.case_tag == "best") best = &r;
        if (r.case_tag == "average") avg = &r;
        if (r.case_tag == "worst") worst = &r;
    }
    c.expect(best && avg && worst, "missing case reports");
    if (best && avg && worst) {
        c.expect(best->l2_mean && avg->l2_mean && worst->l2_mean, "missing norm means");
        if (best->l2_mean && avg->l2_mean && worst->l2_mean) {
            c.expect(*best->l2_mean <= *avg->l2_mean && *avg->l2_mean <= *worst->l2_mean,
                     "ordering violated: " + fmt(*best->l2_mean) + ", " + fmt(*avg->l2_mean) + ", " +
                         fmt(*worst->l2_mean));
            c.note(fmt(*best->l2_mean) + " <= " + fmt(*avg->l2_mean) + " <= " + fmt(*worst->l2_mean));
        }
    }
    c.finish();
}

// ---------------------------------------------------------- criterion 10 --

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void criterion_determinism(const FixtureBundle& f, const std::string& dir) {
    Criterion c(10, "determinism and formats: reruns, round trips, IDX fixtures");

    // repeated reproduce runs, byte for byte
    const std::string cli = ADVTOPK_CLI_PATH;
    const std::string run1 = dir + "/rep1", run2 = dir + "/rep2";
    fs::create_directories(run1);
    fs::create_directories(run2);
    for (const std::string& run : {run1, run2}) {
        const std::string cmd = cli + " reproduce --preset top1-random --samples 5 --outdir " + run +
                                " --embeddings " + ADVTOPK_EMBEDDINGS_FILE + " > " + run + "/log.txt 2>&1";
        c.expect(std::system(cmd.c_str()) == 0, "reproduce run failed, see " + run + "/log.txt");
    }
    for (const char* name : {"/top1-random-random.jsonl", "/top1-random-report.json",
                             "/top1-random-report.csv", "/model.advm"}) {
        c.expect(slurp(run1 + name) == slurp(run2 + name) && !slurp(run1 + name).empty(),
                 std::string("rerun differs for ") + name);
    }

    // model round trip is bit-exact on predictions
    const std::string mpath = dir + "/fixture.advm";
    save_model(f.model, mpath);
    const Model loaded = load_model(mpath);
    bool same = true;
    for (int i = 0; i < 20; ++i) {
        const auto& s = f.val.samples[static_cast<std::size_t>(i * 7)];
        if (f.model.predict(s.features) != loaded.predict(s.features)) same = false;
    }
    c.expect(same, "model round trip changed predictions");

    // IDX parser against three hand-crafted byte fixtures
    auto write_be = [](std::ofstream& os, std::uint32_t v) {
        const char b[4] = {static_cast<char>(v >> 24), static_cast<char>((v >> 16) & 0xff),
                           static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
        os.write(b, 4);
    };
    const std::string img = dir + "/im.idx", lab = dir + "/la.idx";
    {
        std::ofstream io(img, std::ios::binary), lo(lab, std::ios::binary);
        write_be(io, 0x803);
        write_be(io, 2);
        write_be(io, 2);
        write_be(io, 2);
        const unsigned char px[8] = {0, 255, 51, 102, 153, 204, 10, 20};
        io.write(reinterpret_cast<const char*>(px), 8);
        write_be(lo, 0x801);
        write_be(lo, 2);
        lo.put(1);
        lo.put(0);
    }
    bool idx_ok = false;
    try {
        const Dataset ds = load_idx(img, lab);
        idx_ok = ds.samples.size() == 2 && ds.samples[0].label == 1 &&
                 ds.samples[0].features[0] == 0.0f && ds.samples[0].features[1] == 1.0f &&
                 ds.samples[0].features[2] == 51.0f / 255.0f && ds.samples[1].features[3] == 20.0f / 255.0f;
    } catch (const std::exception&) {
    }
    c.expect(idx_ok, "valid IDX pair parsed wrong");

    {
        std::ofstream io(img, std::ios::binary);
        write_be(io, 0x807);  // wrong magic
        write_be(io, 2);
        write_be(io, 2);
        write_be(io, 2);
    }
    bool rejected = false;
    try {
        load_idx(img, lab);
    } catch (const std::exception&) {
        rejected = true;
    }
    c.expect(rejected, "bad magic accepted");

    {
        std::ofstream io(img, std::ios::binary);
        write_be(io, 0x803);
        write_be(io, 2);
        write_be(io, 2);
        write_be(io, 2);
        io.put(0);  // truncated pixel payload
    }
    rejected = false;
    try {
        load_idx(img, lab);
    } catch (const std::exception&) {
        rejected = true;
    }
    c.expect(rejected, "truncated image payload accepted");

    // report json round trip, numeric fields exactly
    std::vector<OutcomeRecord> records;
    OutcomeRecord r;
    r.sample = 0;
    r.method_tag = "m";
    r.strategy = "random";
    r.k = 1;
    r.targeted = true;
    r.ground_truth = 0;
    r.targets = {1};
    r.success = true;
    r.l1 = 0.123456789012345;
    r.l2 = 0.0718281828459045;
    r.linf = 0.0314159265358979;
    r.prediction = {0.25f, 0.75f};
    records.push_back(r);
    const auto reports = aggregate_cases(records);
    write_report(reports, ReportFormat::Json, dir + "/rt.json");
    const auto loaded_reports = read_report_json(dir + "/rt.json");
    bool rt = loaded_reports.size() == reports.size();
    for (std::size_t i = 0; rt && i < reports.size(); ++i) {
        rt = loaded_reports[i].asr == reports[i].asr && loaded_reports[i].l1_mean == reports[i].l1_mean &&
             loaded_reports[i].l2_mean == reports[i].l2_mean &&
             loaded_reports[i].gt_top_m == reports[i].gt_top_m;
    }
    c.expect(rt, "report json round trip drifted");
    c.finish();
}

}  // namespace

int main() {
    kernels::set_threads(kernels::hardware_threads());
    const std::string dir = "/tmp/advtopk_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::printf("== acceptance suite (workers: %d) ==\n", kernels::threads());
    const FixtureBundle fixture = build_fixture();

    criterion_gradients(fixture);
    criterion_loss_equivalences();
    criterion_distribution(fixture);
    criterion_grid_oracle();

    const auto top1_records = top1_campaign(fixture, dir);
    criterion_top1(top1_records);
    criterion_top5(fixture, dir);
    criterion_rank_suite(fixture, dir);
    criterion_budget_monotonicity(top1_records);
    criterion_case_ordering(fixture, dir);
    criterion_determinism(fixture, dir);

    std::printf("== %d/10 criteria passed ==\n", 10 - g_failures);
    return g_failures;
}
