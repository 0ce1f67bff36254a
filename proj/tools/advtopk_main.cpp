#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "advtopk/campaign.hpp"
#include "advtopk/config.hpp"
#include "advtopk/kernels.hpp"

namespace fs = std::filesystem;
using namespace advtopk;

namespace {

struct DataOptions {
    int classes = 20;
    int train_per_class = 120;
    int val_per_class = 40;
    int dim = 64;
    double spread = 0.10;
    std::uint64_t data_seed = 1001;
    std::string idx_train_images, idx_train_labels, idx_val_images, idx_val_labels;

    bool uses_idx() const { return !idx_train_images.empty(); }
};

struct TrainOptions {
    int hidden = 128;
    int conv_channels = 0;
    int epochs = 30;
    int batch = 32;
    double lr = 0.1;
    double lr_decay = 1.0;
    std::uint64_t seed = 1;
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
    cmd->add_option("--classes", d.classes, "synthetic: number of classes");
    cmd->add_option("--train-per-class", d.train_per_class, "synthetic: training samples per class");
    cmd->add_option("--val-per-class", d.val_per_class, "synthetic: validation samples per class");
    cmd->add_option("--dim", d.dim, "synthetic: feature dimension");
    cmd->add_option("--spread", d.spread, "synthetic: per-feature cluster standard deviation");
    cmd->add_option("--data-seed", d.data_seed, "synthetic: generator seed");
    cmd->add_option("--idx-train-images", d.idx_train_images, "IDX training image file");
    cmd->add_option("--idx-train-labels", d.idx_train_labels, "IDX training label file");
    cmd->add_option("--idx-val-images", d.idx_val_images, "IDX validation image file");
    cmd->add_option("--idx-val-labels", d.idx_val_labels, "IDX validation label file");
}

// Every flag doubles as a config-file key and an ADVTOPK_* environment
// variable; explicit flags win, then the environment, then the file.
void finish_options(CLI::App* cmd) {
    cmd->set_config("--config", "", "key = value configuration file");
    for (const CLI::Option* opt : cmd->get_options()) {
        std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config") continue;
        const_cast<CLI::Option*>(opt)->envname(Config::env_name(name));
    }
}

std::pair<Dataset, Dataset> build_datasets(const DataOptions& d) {
    if (d.uses_idx()) {
        if (d.idx_train_labels.empty() || d.idx_val_images.empty() || d.idx_val_labels.empty())
            throw std::runtime_error("IDX mode needs all four --idx-* paths");
        Dataset train = load_idx(d.idx_train_images, d.idx_train_labels);
        Dataset val = load_idx(d.idx_val_images, d.idx_val_labels);
        train.split = "train";
        val.split = "validation";
        return {std::move(train), std::move(val)};
    }
    Dataset all = generate_synthetic(d.classes, d.train_per_class + d.val_per_class, d.dim,
                                     d.data_seed, static_cast<float>(d.spread));
    Dataset train, val;
    train.split = "train";
    val.split = "validation";
    train.seed = val.seed = d.data_seed;
    const int per_class = d.train_per_class + d.val_per_class;
    for (int c = 0; c < d.classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            const InputSample& s = all.samples[static_cast<std::size_t>(c * per_class + i)];
            (i < d.train_per_class ? train : val).samples.push_back(s);
        }
    }
    return {std::move(train), std::move(val)};
}

int label_count_of(const DataOptions& d, const Dataset& train) {
    if (!d.uses_idx()) return d.classes;
    int maxl = 0;
    for (const InputSample& s : train.samples) maxl = std::max(maxl, s.label);
    return maxl + 1;
}

std::vector<std::string> dataset_labels(const DataOptions& d, int label_count,
                                        const std::string& embeddings_path) {
    if (!d.uses_idx() && !embeddings_path.empty() && fs::exists(embeddings_path)) {
        const EmbeddingTable table = EmbeddingTable::load(embeddings_path);
        if (static_cast<int>(table.names().size()) == label_count) return table.names();
    }
    std::vector<std::string> names;
    char buf[32];
    for (int i = 0; i < label_count; ++i) {
        std::snprintf(buf, sizeof(buf), d.uses_idx() ? "digit%d" : "class%02d", i);
        names.emplace_back(buf);
    }
    return names;
}

Architecture make_architecture(const DataOptions& d, const TrainOptions& t, const Dataset& train,
                               int label_count) {
    Architecture arch;
    if (d.uses_idx()) {
        const int pixels = static_cast<int>(train.samples.at(0).features.size());
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(pixels))));
        arch.input_shape = {1, side, pixels / side};
        if (t.conv_channels > 0) {
            arch.layers = {{LayerKind::Conv3x3, 1, t.conv_channels},
                           {LayerKind::Relu, 0, 0},
                           {LayerKind::Flatten, 0, 0},
                           {LayerKind::Affine, t.conv_channels * pixels, label_count}};
        } else {
            arch.layers = {{LayerKind::Flatten, 0, 0},
                           {LayerKind::Affine, pixels, t.hidden},
                           {LayerKind::Relu, 0, 0},
                           {LayerKind::Affine, t.hidden, label_count}};
        }
    } else {
        arch.input_shape = {d.dim};
        arch.layers = {{LayerKind::Affine, d.dim, t.hidden},
                       {LayerKind::Relu, 0, 0},
                       {LayerKind::Affine, t.hidden, label_count}};
    }
    return arch;
}

Model train_fixture(const DataOptions& d, const TrainOptions& t, const std::string& embeddings,
                    const Dataset& train, const Dataset& val, TrainReport* report) {
    const int labels = label_count_of(d, train);
    TrainConfig cfg;
    cfg.epochs = t.epochs;
    cfg.batch_size = t.batch;
    cfg.learning_rate = static_cast<float>(t.lr);
    cfg.lr_decay = static_cast<float>(t.lr_decay);
    cfg.seed = t.seed;
    return train_classifier(train, val, make_architecture(d, t, train, labels),
                            dataset_labels(d, labels, embeddings), cfg, report);
}

AttackVariant optimizer_variant(AttackMethod m, int search_steps, int iterations,
                                const OptimizerConfig& base) {
    AttackVariant v;
    v.method = m;
    v.opt = base;
    v.opt.search_steps = search_steps;
    v.opt.iterations = iterations;
    return v;
}

std::vector<std::pair<int, int>> parse_budgets(const std::string& text) {
    std::vector<std::pair<int, int>> budgets;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::size_t x = item.find('x');
        if (x == std::string::npos)
            throw std::runtime_error("budget '" + item + "' must look like 9x1000");
        budgets.emplace_back(std::stoi(item.substr(0, x)), std::stoi(item.substr(x + 1)));
    }
    if (budgets.empty()) throw std::runtime_error("no optimizer budgets given");
    return budgets;
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<int> parse_m_list(const std::string& text) {
    std::vector<int> out;
    for (const std::string& s : split_csv(text)) out.push_back(std::stoi(s));
    if (out.empty()) throw std::runtime_error("empty m-list");
    return out;
}

void print_progress(const std::string& what, int done, int total) {
    const int step = std::max(1, total / 20);
    if (done == total || done % step == 0)
        std::cerr << what << ": " << done << "/" << total << " attacks done" << std::endl;
}

void print_report_table(const std::vector<EvalReport>& reports) {
    auto num = [](const std::optional<double>& v) {
        if (!v) return std::string("N.A.");
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4g", *v);
        return std::string(buf);
    };
    std::printf("%-22s %-15s %-8s %2s %8s %9s %8s %8s %8s\n", "method", "strategy", "case", "k",
                "asr", "l1", "l2", "linf", "gt_rank");
    for (const EvalReport& r : reports) {
        std::printf("%-22s %-15s %-8s %2d %7.2f%% %9s %8s %8s %8s\n", r.method.c_str(),
                    r.strategy.c_str(), r.case_tag.c_str(), r.k, r.asr, num(r.l1_mean).c_str(),
                    num(r.l2_mean).c_str(), num(r.linf_mean).c_str(), num(r.gt_avg_rank).c_str());
    }
}

std::vector<EvalReport> evaluate_files(const std::vector<std::string>& outcome_files,
                                       const std::vector<int>& m_list) {
    std::vector<OutcomeRecord> records;
    std::string snapshot;
    for (const std::string& f : outcome_files) {
        OutcomesFile of = read_outcomes(f);
        if (!snapshot.empty()) snapshot += "\n";
        snapshot += of.meta_line;
        records.insert(records.end(), of.records.begin(), of.records.end());
    }
    return aggregate_cases(records, m_list, snapshot);
}

std::optional<std::pair<int, int>> shape_from_meta(const std::string& meta_line) {
    const auto meta = nlohmann::json::parse(meta_line);
    const auto shape = meta.at("input_shape").get<std::vector<int>>();
    if (shape.size() == 3 && shape[0] == 1) return std::make_pair(shape[1], shape[2]);
    if (shape.size() == 2) return std::make_pair(shape[0], shape[1]);
    return std::nullopt;
}

struct PresetCampaign {
    std::string name;
    CampaignSpec spec;
};

std::vector<PresetCampaign> preset_campaigns(const std::string& preset, int samples) {
    OptimizerConfig base;
    auto four_variants = [&]() {
        return std::vector<AttackVariant>{
            optimizer_variant(AttackMethod::CwTopk, 9, 30, base),
            optimizer_variant(AttackMethod::Distill, 9, 30, base),
            optimizer_variant(AttackMethod::CwTopk, 9, 1000, base),
            optimizer_variant(AttackMethod::Distill, 9, 1000, base),
        };
    };
    auto campaign = [&](TargetStrategy strategy, int k) {
        CampaignSpec spec;
        spec.variants = four_variants();
        spec.strategy = strategy;
        spec.k = k;
        spec.sample_count = samples;
        spec.seed = 7;
        return spec;
    };

    if (preset == "top1-random") return {{"random", campaign(TargetStrategy::Random, 1)}};
    if (preset == "top1-mostlike") return {{"most-like", campaign(TargetStrategy::MostLike, 1)}};
    if (preset == "top1-leastlike") return {{"least-like", campaign(TargetStrategy::LeastLike, 1)}};
    if (preset == "top5-random") return {{"random", campaign(TargetStrategy::Random, 5)}};
    if (preset == "top5-mostlike") return {{"most-like", campaign(TargetStrategy::MostLike, 5)}};
    if (preset == "top5-leastlike") return {{"least-like", campaign(TargetStrategy::LeastLike, 5)}};
    if (preset == "top5-cleanscore")
        return {{"highest-clean", campaign(TargetStrategy::HighestClean, 5)},
                {"lowest-clean", campaign(TargetStrategy::LowestClean, 5)}};
    if (preset == "gt-rank-table") {
        CampaignSpec spec = campaign(TargetStrategy::Random, 1);
        std::vector<AttackVariant> variants;
        for (AttackMethod m : {AttackMethod::Fgsm, AttackMethod::Pgd, AttackMethod::Mifgsm}) {
            AttackVariant v;
            v.method = m;
            v.budget.targeted = false;
            variants.push_back(v);
        }
        for (AttackVariant& v : spec.variants) variants.push_back(std::move(v));
        spec.variants = std::move(variants);
        return {{"table", spec}};
    }
    throw std::runtime_error("unknown preset '" + preset +
                             "' (valid: top1-random, top1-mostlike, top1-leastlike, top5-random, "
                             "top5-mostlike, top5-leastlike, top5-cleanscore, gt-rank-table)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ordered top-k adversarial attack toolkit"};
    app.require_subcommand(1);

    // ---------- train ----------
    auto* train_cmd = app.add_subcommand("train", "train the fixture classifier, write a model file");
    DataOptions tr_data;
    TrainOptions tr_opts;
    std::string tr_out = "model.advm";
    std::string tr_embeddings = "data/embeddings20.txt";
    int tr_threads = 0;
    add_data_options(train_cmd, tr_data);
    train_cmd->add_option("--hidden", tr_opts.hidden, "hidden layer width");
    train_cmd->add_option("--conv-channels", tr_opts.conv_channels,
                          "3x3 conv front end with this many channels (IDX data only)");
    train_cmd->add_option("--epochs", tr_opts.epochs, "training epochs");
    train_cmd->add_option("--batch", tr_opts.batch, "mini-batch size");
    train_cmd->add_option("--lr", tr_opts.lr, "learning rate");
    train_cmd->add_option("--lr-decay", tr_opts.lr_decay, "per-epoch learning-rate factor");
    train_cmd->add_option("--seed", tr_opts.seed, "training seed");
    train_cmd->add_option("--embeddings", tr_embeddings, "embedding file supplying label names");
    train_cmd->add_option("--out", tr_out, "output model path");
    train_cmd->add_option("--threads", tr_threads, "worker threads (0 = all cores)");
    finish_options(train_cmd);

    // ---------- attack ----------
    auto* attack_cmd = app.add_subcommand("attack", "run an attack campaign, write outcomes");
    DataOptions at_data;
    std::string at_model = "model.advm";
    std::string at_outcomes = "outcomes.jsonl";
    std::string at_methods = "cw-topk,distill";
    std::string at_budgets = "9x30";
    std::string at_strategy = "random";
    std::string at_embeddings = "data/embeddings20.txt";
    int at_k = 1, at_samples = 50, at_threads = 0;
    std::uint64_t at_seed = 7;
    OptimizerConfig at_opt;
    BudgetConfig at_budget;
    AdvDistributionParams at_adv;
    add_data_options(attack_cmd, at_data);
    attack_cmd->add_option("--model", at_model, "model file to attack");
    attack_cmd->add_option("--outcomes", at_outcomes, "output JSON-lines file (resumable)");
    attack_cmd->add_option("--methods", at_methods, "comma list: cw-topk,distill,fgsm,pgd,mifgsm");
    attack_cmd->add_option("--budgets", at_budgets, "optimizer schedules, e.g. 9x30,9x1000");
    attack_cmd->add_option("--strategy", at_strategy,
                           "random | most-like | least-like | highest-clean | lowest-clean | exhaustive-top1");
    attack_cmd->add_option("--k", at_k, "number of ordered targets");
    attack_cmd->add_option("--samples", at_samples, "evaluation subset size");
    attack_cmd->add_option("--seed", at_seed, "campaign seed");
    attack_cmd->add_option("--threads", at_threads, "worker threads (0 = all cores)");
    attack_cmd->add_option("--embeddings", at_embeddings, "embedding file for semantic strategies");
    attack_cmd->add_option("--lambda-init", at_opt.lambda_init, "initial trade-off constant");
    attack_cmd->add_option("--lambda-lo", at_opt.lambda_lo, "trade-off search lower bound");
    attack_cmd->add_option("--lambda-hi", at_opt.lambda_hi, "trade-off search upper bound");
    attack_cmd->add_option("--step-size", at_opt.step_size, "optimizer step size");
    attack_cmd->add_option("--beta1", at_opt.beta1, "first moment decay");
    attack_cmd->add_option("--beta2", at_opt.beta2, "second moment decay");
    attack_cmd->add_option("--epsilon", at_budget.epsilon, "budget-ball radius (fgsm family)");
    attack_cmd->add_option("--steps", at_budget.steps, "iterations (pgd/mifgsm)");
    attack_cmd->add_option("--budget-step-size", at_budget.step_size,
                           "per-step size (0 = per-method default)");
    attack_cmd->add_option("--momentum", at_budget.momentum, "momentum decay (mifgsm)");
    attack_cmd->add_flag("--targeted-budget", at_budget.targeted,
                         "drive fgsm/pgd/mifgsm at the first target instead of away from the truth");
    attack_cmd->add_option("--z-max", at_adv.z_max, "designed distribution: leading target logit");
    attack_cmd->add_option("--gamma", at_adv.gamma, "designed distribution: per-rank decrement");
    attack_cmd->add_option("--alpha", at_adv.alpha, "designed distribution: similarity weight");
    attack_cmd->add_option("--eps-floor", at_adv.eps_floor, "designed distribution: logit floor");
    finish_options(attack_cmd);

    // ---------- evaluate ----------
    auto* eval_cmd = app.add_subcommand("evaluate", "aggregate outcomes into reports");
    std::string ev_outcomes, ev_format = "json", ev_out = "report.json", ev_mlist = "1,2,3,5,10";
    std::string ev_heatmap_out;
    int ev_heatmap_task = -1;
    eval_cmd->add_option("--outcomes", ev_outcomes, "comma list of outcome files")->required();
    eval_cmd->add_option("--format", ev_format, "json | csv");
    eval_cmd->add_option("--out", ev_out, "report path");
    eval_cmd->add_option("--m-list", ev_mlist, "rank buckets for GT-in-top-m proportions");
    eval_cmd->add_option("--heatmap-task", ev_heatmap_task, "export this task's perturbation as PGM");
    eval_cmd->add_option("--heatmap-out", ev_heatmap_out, "heatmap output path");
    finish_options(eval_cmd);

    // ---------- reproduce ----------
    auto* repro_cmd = app.add_subcommand("reproduce", "train + attack + evaluate a named preset");
    std::string rp_preset, rp_outdir = "runs", rp_embeddings = "data/embeddings20.txt";
    int rp_samples = 50, rp_threads = 0;
    repro_cmd->add_option("--preset", rp_preset, "preset name")->required();
    repro_cmd->add_option("--outdir", rp_outdir, "output directory");
    repro_cmd->add_option("--samples", rp_samples, "evaluation subset size");
    repro_cmd->add_option("--threads", rp_threads, "worker threads (0 = all cores)");
    repro_cmd->add_option("--embeddings", rp_embeddings, "embedding file");
    finish_options(repro_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (train_cmd->parsed()) {
            kernels::set_threads(tr_threads > 0 ? tr_threads : kernels::hardware_threads());
            auto [train, val] = build_datasets(tr_data);
            TrainReport report;
            Model model = train_fixture(tr_data, tr_opts, tr_embeddings, train, val, &report);
            save_model(model, tr_out);
            std::printf("train accuracy %.4f, validation accuracy %.4f, final loss %.4f\n",
                        report.train_accuracy, report.validation_accuracy, report.final_loss);
            std::printf("wrote %s\n", tr_out.c_str());
        } else if (attack_cmd->parsed()) {
            kernels::set_threads(at_threads > 0 ? at_threads : kernels::hardware_threads());
            const Model model = load_model(at_model);
            auto [train, val] = build_datasets(at_data);
            (void)train;
            const EvalPool pool = select_eval_pool(model, val, at_samples, at_seed);

            CampaignSpec spec;
            spec.strategy = parse_strategy(at_strategy);
            spec.k = at_k;
            spec.sample_count = at_samples;
            spec.seed = at_seed;
            spec.adv = at_adv;
            const auto budgets = parse_budgets(at_budgets);
            for (const std::string& name : split_csv(at_methods)) {
                const AttackMethod m = parse_method(name);
                if (is_optimizer_method(m)) {
                    for (const auto& [steps, iters] : budgets)
                        spec.variants.push_back(optimizer_variant(m, steps, iters, at_opt));
                } else {
                    AttackVariant v;
                    v.method = m;
                    v.budget = at_budget;
                    spec.variants.push_back(v);
                }
            }

            EmbeddingTable table;
            const EmbeddingTable* table_ptr = nullptr;
            if (fs::exists(at_embeddings)) {
                table = EmbeddingTable::load(at_embeddings);
                table_ptr = &table;
            }
            const auto records =
                run_campaign(model, pool, spec, table_ptr, at_outcomes, at_threads,
                             [](int d, int t) { print_progress("attack", d, t); });
            std::printf("wrote %zu outcome records to %s\n", records.size(), at_outcomes.c_str());
        } else if (eval_cmd->parsed()) {
            const std::vector<int> m_list = parse_m_list(ev_mlist);
            const std::vector<std::string> files = split_csv(ev_outcomes);
            const std::vector<EvalReport> reports = evaluate_files(files, m_list);
            const ReportFormat format = ev_format == "csv" ? ReportFormat::Csv : ReportFormat::Json;
            if (ev_format != "csv" && ev_format != "json")
                throw std::runtime_error("unknown report format '" + ev_format + "'");
            write_report(reports, format, ev_out);
            print_report_table(reports);
            std::printf("wrote %s\n", ev_out.c_str());
            if (ev_heatmap_task >= 0) {
                if (ev_heatmap_out.empty()) throw std::runtime_error("--heatmap-task needs --heatmap-out");
                OutcomesFile of = read_outcomes(files.at(0));
                const OutcomeRecord* hit = nullptr;
                for (const OutcomeRecord& r : of.records)
                    if (r.task == ev_heatmap_task) hit = &r;
                if (!hit) throw std::runtime_error("no record with task id " + std::to_string(ev_heatmap_task));
                export_heatmap(hit->delta, shape_from_meta(of.meta_line), ev_heatmap_out);
                std::printf("wrote %s\n", ev_heatmap_out.c_str());
            }
        } else if (repro_cmd->parsed()) {
            kernels::set_threads(rp_threads > 0 ? rp_threads : kernels::hardware_threads());
            fs::create_directories(rp_outdir);
            const DataOptions data;  // presets pin the default fixture
            const TrainOptions topts;
            auto [train, val] = build_datasets(data);

            const std::string model_path = rp_outdir + "/model.advm";
            Model model;
            if (fs::exists(model_path)) {
                model = load_model(model_path);
            } else {
                TrainReport report;
                model = train_fixture(data, topts, rp_embeddings, train, val, &report);
                save_model(model, model_path);
                std::printf("trained fixture: train accuracy %.4f, validation accuracy %.4f\n",
                            report.train_accuracy, report.validation_accuracy);
            }

            EmbeddingTable table = EmbeddingTable::load(rp_embeddings);
            std::vector<std::string> outcome_files;
            for (const PresetCampaign& pc : preset_campaigns(rp_preset, rp_samples)) {
                const EvalPool pool = select_eval_pool(model, val, pc.spec.sample_count, pc.spec.seed);
                const std::string path = rp_outdir + "/" + rp_preset + "-" + pc.name + ".jsonl";
                run_campaign(model, pool, pc.spec, &table, path, rp_threads,
                             [&](int d, int t) { print_progress(rp_preset + "/" + pc.name, d, t); });
                outcome_files.push_back(path);
            }
            const std::vector<int> m_list(std::begin(kDefaultRankBuckets), std::end(kDefaultRankBuckets));
            const std::vector<EvalReport> reports = evaluate_files(outcome_files, m_list);
            write_report(reports, ReportFormat::Json, rp_outdir + "/" + rp_preset + "-report.json");
            write_report(reports, ReportFormat::Csv, rp_outdir + "/" + rp_preset + "-report.csv");
            print_report_table(reports);
            std::printf("wrote %s/%s-report.{json,csv}\n", rp_outdir.c_str(), rp_preset.c_str());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
