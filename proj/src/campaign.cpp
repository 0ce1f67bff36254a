#include "advtopk/campaign.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "advtopk/kernels.hpp"

namespace advtopk {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string short_float(float v) { return ordered_json(v).dump(); }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 step over the combined value
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace

std::string AttackVariant::tag() const {
    std::string t = method_name(method);
    if (is_optimizer_method(method)) {
        t += "@" + std::to_string(opt.search_steps) + "x" + std::to_string(opt.iterations);
    } else {
        if (budget.targeted) t += "-t";
        t += "@eps" + short_float(budget.epsilon);
        if (method != AttackMethod::Fgsm) t += "x" + std::to_string(budget.steps);
        if (method == AttackMethod::Mifgsm && budget.momentum != 1.0f)
            t += "m" + short_float(budget.momentum);
    }
    return t;
}

void CampaignSpec::validate() const {
    if (variants.empty()) throw std::invalid_argument("campaign has no attack variants");
    if (sample_count < 1) throw std::invalid_argument("campaign needs at least one sample");
    if (k < 1) throw std::invalid_argument("campaign k must be >= 1");
    std::set<std::string> tags;
    for (const AttackVariant& v : variants) {
        if (is_optimizer_method(v.method)) v.opt.validate();
        else v.budget.validate();
        if (!tags.insert(v.tag()).second)
            throw std::invalid_argument("duplicate attack variant '" + v.tag() + "'");
    }
}

EvalPool select_eval_pool(const Model& model, const Dataset& validation, int count,
                          std::uint64_t seed) {
    std::vector<int> correct;
    for (int i = 0; i < static_cast<int>(validation.samples.size()); ++i) {
        const InputSample& s = validation.samples[static_cast<std::size_t>(i)];
        if (model.predicted_label(s.features) == s.label) correct.push_back(i);
    }
    if (count > static_cast<int>(correct.size()))
        throw std::invalid_argument("campaign wants " + std::to_string(count) +
                                    " samples but only " + std::to_string(correct.size()) +
                                    " validation samples are correctly classified");
    std::mt19937_64 rng(mix_seed(seed, 0xeca1u));
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, static_cast<int>(correct.size()) - 1);
        std::swap(correct[static_cast<std::size_t>(i)], correct[static_cast<std::size_t>(pick(rng))]);
    }
    correct.resize(static_cast<std::size_t>(count));
    EvalPool pool;
    pool.source_indices = correct;
    pool.samples.reserve(correct.size());
    for (int idx : correct) pool.samples.push_back(validation.samples[static_cast<std::size_t>(idx)]);
    return pool;
}

std::vector<CampaignTask> enumerate_tasks(const CampaignSpec& spec, const EvalPool& pool,
                                          const Model& model, const EmbeddingTable* table) {
    spec.validate();
    if (static_cast<int>(pool.samples.size()) < spec.sample_count)
        throw std::invalid_argument("pool is smaller than the campaign sample count");

    std::vector<std::vector<TargetSpec>> per_sample(static_cast<std::size_t>(spec.sample_count));
    bool any_targeted = false;
    for (const AttackVariant& v : spec.variants)
        any_targeted |= is_optimizer_method(v.method) || v.budget.targeted;
    if (any_targeted) {
        for (int s = 0; s < spec.sample_count; ++s) {
            per_sample[static_cast<std::size_t>(s)] =
                select_targets(spec.strategy, spec.k, pool.samples[static_cast<std::size_t>(s)], model,
                               table, mix_seed(spec.seed, static_cast<std::uint64_t>(s)));
        }
    }

    std::vector<CampaignTask> tasks;
    int id = 0;
    for (int v = 0; v < static_cast<int>(spec.variants.size()); ++v) {
        const AttackVariant& variant = spec.variants[static_cast<std::size_t>(v)];
        const bool targeted = is_optimizer_method(variant.method) || variant.budget.targeted;
        for (int s = 0; s < spec.sample_count; ++s) {
            if (targeted) {
                for (const TargetSpec& t : per_sample[static_cast<std::size_t>(s)]) {
                    CampaignTask task;
                    task.id = id++;
                    task.variant = v;
                    task.sample = s;
                    task.targets = t;
                    task.targeted = true;
                    tasks.push_back(std::move(task));
                }
            } else {
                CampaignTask task;
                task.id = id++;
                task.variant = v;
                task.sample = s;
                task.targets.ground_truth = pool.samples[static_cast<std::size_t>(s)].label;
                task.targeted = false;
                tasks.push_back(std::move(task));
            }
        }
    }
    return tasks;
}

OutcomeRecord run_task(const Model& model, const EvalPool& pool, const CampaignSpec& spec,
                       const CampaignTask& task, const EmbeddingTable* table) {
    const InputSample& sample = pool.samples[static_cast<std::size_t>(task.sample)];
    const AttackVariant& variant = spec.variants[static_cast<std::size_t>(task.variant)];

    AttackOutcome out;
    if (is_optimizer_method(variant.method)) {
        AdvDistribution adv;
        const AdvDistribution* advp = nullptr;
        if (variant.method == AttackMethod::Distill) {
            adv = build_adv_distribution(task.targets, table, model.labels, spec.adv);
            advp = &adv;
        }
        out = optimize_attack(model, sample.features, variant.method, task.targets, advp, variant.opt);
    } else {
        const TargetSpec* targets = task.targeted ? &task.targets : nullptr;
        switch (variant.method) {
            case AttackMethod::Fgsm:
                out = fgsm(model, sample.features, sample.label, targets, variant.budget);
                break;
            case AttackMethod::Pgd:
                out = pgd(model, sample.features, sample.label, targets, variant.budget);
                break;
            default:
                out = mifgsm(model, sample.features, sample.label, targets, variant.budget);
                break;
        }
    }

    OutcomeRecord rec;
    rec.task = task.id;
    rec.sample = task.sample;
    rec.method_tag = variant.tag();
    rec.strategy = task.targeted ? strategy_name(spec.strategy) : "untargeted";
    rec.k = task.targeted ? spec.k : 0;
    rec.targeted = task.targeted;
    rec.ground_truth = sample.label;
    rec.targets = task.targets.targets;
    rec.success = out.success;
    rec.l1 = out.l1;
    rec.l2 = out.l2;
    rec.linf = out.linf;
    rec.final_lambda = out.final_lambda;
    rec.iterations = out.iterations_used;
    rec.gt_rank = out.gt_rank;
    rec.prediction = std::move(out.prediction);
    rec.adversarial = std::move(out.adversarial);
    rec.delta = std::move(out.delta);
    rec.lambda_trace = std::move(out.lambda_trace);
    return rec;
}

namespace {

std::uint64_t model_checksum(const Model& model) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a over parameter bytes
    auto eat = [&h](const void* data, std::size_t n) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const Tensor& t : model.params) eat(t.data(), t.size() * sizeof(float));
    return h;
}

std::string campaign_meta(const CampaignSpec& spec, const EvalPool& pool, const Model& model) {
    ordered_json j;
    j["meta"] = 1;
    j["strategy"] = strategy_name(spec.strategy);
    j["k"] = spec.k;
    j["sample_count"] = spec.sample_count;
    j["seed"] = spec.seed;
    ordered_json variants = ordered_json::array();
    for (const AttackVariant& v : spec.variants) variants.push_back(v.tag());
    j["variants"] = std::move(variants);
    j["adv"] = {{"z_max", spec.adv.z_max},
                {"gamma", spec.adv.gamma},
                {"alpha", spec.adv.alpha},
                {"eps_floor", spec.adv.eps_floor}};
    j["labels"] = model.labels;
    j["input_shape"] = model.arch.input_shape;
    j["model_checksum"] = model_checksum(model);
    j["pool"] = pool.source_indices;
    return j.dump();
}

}  // namespace

OutcomesFile read_outcomes(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open outcomes file " + path);
    OutcomesFile out;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(path + ": empty outcomes file");
    ordered_json meta = ordered_json::parse(line, nullptr, false);
    if (meta.is_discarded() || !meta.contains("meta"))
        throw std::runtime_error(path + ": first line is not a campaign header");
    out.meta_line = line;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.records.push_back(record_from_json_line(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad record: " + e.what());
        }
    }
    return out;
}

std::vector<OutcomeRecord> run_campaign(const Model& model, const EvalPool& pool,
                                        const CampaignSpec& spec, const EmbeddingTable* table,
                                        const std::string& path, int threads,
                                        const std::function<void(int, int)>& progress) {
    const std::vector<CampaignTask> tasks = enumerate_tasks(spec, pool, model, table);
    const std::string meta = campaign_meta(spec, pool, model);

    std::vector<OutcomeRecord> done;
    if (std::filesystem::exists(path)) {
        // Tolerate a truncated trailing line from an interrupted run: keep the
        // valid prefix, rerun the rest.
        std::ifstream is(path);
        std::string line;
        if (!std::getline(is, line) || line != meta)
            throw std::runtime_error(path + " belongs to a different campaign; refusing to mix outcomes");
        int expected = 0;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            OutcomeRecord rec;
            try {
                rec = record_from_json_line(line);
            } catch (const std::exception&) {
                break;
            }
            if (rec.task != expected) break;
            done.push_back(std::move(rec));
            ++expected;
        }
    }

    const int first_missing = static_cast<int>(done.size());
    const int total = static_cast<int>(tasks.size());
    if (first_missing >= total) {
        if (progress) progress(total, total);
        return done;
    }

    // Rewrite the valid prefix, then stream the remaining records in task
    // order so an interruption still leaves a resumable file.
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << meta << '\n';
    for (const OutcomeRecord& r : done) os << record_to_json_line(r) << '\n';
    os.flush();

    if (threads <= 0) threads = kernels::hardware_threads();
    const int missing = total - first_missing;
    std::vector<std::optional<OutcomeRecord>> slots(static_cast<std::size_t>(missing));
    std::mutex io_mutex;
    int write_next = 0;
    int completed = first_missing;
    std::exception_ptr failure;

#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
    for (int i = 0; i < missing; ++i) {
        try {
            const CampaignTask& task = tasks[static_cast<std::size_t>(first_missing + i)];
            OutcomeRecord rec = run_task(model, pool, spec, task, table);
            std::lock_guard<std::mutex> guard(io_mutex);
            slots[static_cast<std::size_t>(i)] = std::move(rec);
            while (write_next < missing && slots[static_cast<std::size_t>(write_next)]) {
                os << record_to_json_line(*slots[static_cast<std::size_t>(write_next)]) << '\n';
                os.flush();
                done.push_back(std::move(*slots[static_cast<std::size_t>(write_next)]));
                slots[static_cast<std::size_t>(write_next)].reset();
                ++write_next;
                ++completed;
                if (progress) progress(completed, total);
            }
        } catch (...) {
            std::lock_guard<std::mutex> guard(io_mutex);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    if (!os) throw std::runtime_error("write failed for " + path);
    return done;
}

}  // namespace advtopk
