#include "advtopk/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace advtopk {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json record_to_json(const OutcomeRecord& r) {
    ordered_json j;
    j["task"] = r.task;
    j["sample"] = r.sample;
    j["method"] = r.method_tag;
    j["strategy"] = r.strategy;
    j["k"] = r.k;
    j["targeted"] = r.targeted;
    j["gt"] = r.ground_truth;
    j["targets"] = r.targets;
    j["success"] = r.success;
    j["l1"] = r.l1;
    j["l2"] = r.l2;
    j["linf"] = r.linf;
    j["lambda"] = r.final_lambda;
    j["iterations"] = r.iterations;
    j["gt_rank"] = r.gt_rank;
    ordered_json trace = ordered_json::array();
    for (const auto& [lam, ok] : r.lambda_trace) trace.push_back({lam, ok});
    j["lambda_trace"] = std::move(trace);
    j["prediction"] = r.prediction;
    j["adversarial"] = r.adversarial;
    j["delta"] = r.delta;
    return j;
}

}  // namespace

std::string record_to_json_line(const OutcomeRecord& r) { return record_to_json(r).dump(); }

OutcomeRecord record_from_json_line(const std::string& line) {
    const ordered_json j = ordered_json::parse(line);
    OutcomeRecord r;
    r.task = j.at("task").get<int>();
    r.sample = j.at("sample").get<int>();
    r.method_tag = j.at("method").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.k = j.at("k").get<int>();
    r.targeted = j.at("targeted").get<bool>();
    r.ground_truth = j.at("gt").get<int>();
    r.targets = j.at("targets").get<std::vector<int>>();
    r.success = j.at("success").get<bool>();
    r.l1 = j.at("l1").get<double>();
    r.l2 = j.at("l2").get<double>();
    r.linf = j.at("linf").get<double>();
    r.final_lambda = j.at("lambda").get<float>();
    r.iterations = j.at("iterations").get<int>();
    r.gt_rank = j.at("gt_rank").get<int>();
    for (const auto& e : j.at("lambda_trace"))
        r.lambda_trace.emplace_back(e.at(0).get<float>(), e.at(1).get<bool>());
    r.prediction = j.at("prediction").get<std::vector<float>>();
    r.adversarial = j.at("adversarial").get<std::vector<float>>();
    r.delta = j.at("delta").get<std::vector<float>>();
    return r;
}

NormTriple perturbation_norms(std::span<const float> delta) {
    NormTriple n;
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

RankStats gt_rank_stats(std::span<const OutcomeRecord> records, std::span<const int> m_list) {
    RankStats stats;
    stats.m_list.assign(m_list.begin(), m_list.end());
    stats.top_m_proportion.assign(m_list.size(), 0.0);
    double rank_sum = 0.0;
    for (const OutcomeRecord& r : records) {
        if (!r.success) continue;
        if (r.prediction.empty()) throw std::invalid_argument("outcome lacks a prediction vector");
        const int rank = probability_rank(r.prediction, r.ground_truth);
        rank_sum += rank;
        ++stats.n;
        for (std::size_t i = 0; i < m_list.size(); ++i) {
            if (rank <= m_list[i]) stats.top_m_proportion[i] += 1.0;
        }
    }
    if (stats.n > 0) {
        for (double& p : stats.top_m_proportion) p /= stats.n;
        stats.average_rank = rank_sum / stats.n;
    }
    return stats;
}

namespace {

EvalReport summarize(const std::string& method, const std::string& strategy, const std::string& case_tag,
                     int k, const std::vector<OutcomeRecord>& outcomes, int denominator,
                     std::span<const int> m_list, const std::string& config_snapshot) {
    EvalReport rep;
    rep.method = method;
    rep.strategy = strategy;
    rep.case_tag = case_tag;
    rep.k = k;
    rep.n = denominator;
    rep.config = config_snapshot;
    int successes = 0;
    double l1 = 0.0, l2 = 0.0, linf = 0.0;
    for (const OutcomeRecord& r : outcomes) {
        if (!r.success) continue;
        ++successes;
        l1 += r.l1;
        l2 += r.l2;
        linf += r.linf;
    }
    rep.asr = denominator > 0 ? 100.0 * successes / denominator : 0.0;
    if (successes > 0) {
        rep.l1_mean = l1 / successes;
        rep.l2_mean = l2 / successes;
        rep.linf_mean = linf / successes;
    }
    const RankStats rs = gt_rank_stats(outcomes, m_list);
    rep.m_list = rs.m_list;
    rep.gt_top_m = rs.top_m_proportion;
    if (rs.n > 0) rep.gt_avg_rank = rs.average_rank;
    return rep;
}

}  // namespace

std::vector<EvalReport> aggregate_cases(std::span<const OutcomeRecord> records,
                                        std::span<const int> m_list,
                                        const std::string& config_snapshot) {
    std::map<std::tuple<std::string, std::string, int>, std::vector<OutcomeRecord>> groups;
    for (const OutcomeRecord& r : records)
        groups[{r.method_tag, r.strategy, r.k}].push_back(r);

    std::vector<EvalReport> reports;
    for (const auto& [key, group] : groups) {
        const auto& [method, strategy, k] = key;
        std::map<int, std::vector<const OutcomeRecord*>> by_sample;
        bool targeted = true;
        for (const OutcomeRecord& r : group) {
            by_sample[r.sample].push_back(&r);
            targeted = targeted && r.targeted;
        }

        // Untargeted runs have no per-target grouping; they only pool.
        if (targeted) {
            std::vector<OutcomeRecord> best, worst;
            for (const auto& [sample, list] : by_sample) {
                const OutcomeRecord* easiest = nullptr;
                const OutcomeRecord* hardest = nullptr;
                bool all_succeeded = true;
                for (const OutcomeRecord* r : list) {
                    if (r->success) {
                        if (!easiest || r->l2 < easiest->l2) easiest = r;
                        if (!hardest || r->l2 > hardest->l2) hardest = r;
                    } else {
                        all_succeeded = false;
                    }
                }
                OutcomeRecord failed;
                failed.sample = sample;
                failed.success = false;
                best.push_back(easiest ? *easiest : failed);
                worst.push_back(all_succeeded && hardest ? *hardest : failed);
            }
            const int samples = static_cast<int>(by_sample.size());
            reports.push_back(summarize(method, strategy, "best", k, best, samples, m_list, config_snapshot));
            reports.push_back(summarize(method, strategy, "average", k,
                                        std::vector<OutcomeRecord>(group.begin(), group.end()),
                                        static_cast<int>(group.size()), m_list, config_snapshot));
            reports.push_back(summarize(method, strategy, "worst", k, worst, samples, m_list, config_snapshot));
        } else {
            reports.push_back(summarize(method, strategy, "average", k,
                                        std::vector<OutcomeRecord>(group.begin(), group.end()),
                                        static_cast<int>(group.size()), m_list, config_snapshot));
        }
    }
    return reports;
}

namespace {

ordered_json report_to_json(const EvalReport& r) {
    ordered_json j;
    j["method"] = r.method;
    j["strategy"] = r.strategy;
    j["case"] = r.case_tag;
    j["k"] = r.k;
    j["asr"] = r.asr;
    j["l1_mean"] = r.l1_mean ? ordered_json(*r.l1_mean) : ordered_json(nullptr);
    j["l2_mean"] = r.l2_mean ? ordered_json(*r.l2_mean) : ordered_json(nullptr);
    j["linf_mean"] = r.linf_mean ? ordered_json(*r.linf_mean) : ordered_json(nullptr);
    ordered_json tops = ordered_json::object();
    for (std::size_t i = 0; i < r.m_list.size(); ++i)
        tops["top_" + std::to_string(r.m_list[i])] = r.gt_top_m[i];
    j["gt_top_m"] = std::move(tops);
    j["gt_avg_rank"] = r.gt_avg_rank ? ordered_json(*r.gt_avg_rank) : ordered_json(nullptr);
    j["n"] = r.n;
    j["config"] = r.config;
    return j;
}

std::string csv_number(double v) {
    ordered_json j = v;  // shortest round-trip representation
    return j.dump();
}

}  // namespace

void write_report(std::span<const EvalReport> reports, ReportFormat format, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    if (format == ReportFormat::Json) {
        ordered_json arr = ordered_json::array();
        for (const EvalReport& r : reports) arr.push_back(report_to_json(r));
        os << arr.dump(2) << '\n';
    } else {
        std::vector<int> m_list;
        if (!reports.empty()) m_list = reports[0].m_list;
        os << "method,strategy,case,k,asr,l1_mean,l2_mean,linf_mean";
        for (int m : m_list) os << ",gt_top_" << m;
        os << ",gt_avg_rank,n\n";
        for (const EvalReport& r : reports) {
            os << r.method << ',' << r.strategy << ',' << r.case_tag << ',' << r.k << ',' << csv_number(r.asr);
            auto cell = [&](const std::optional<double>& v) {
                os << ',' << (v ? csv_number(*v) : std::string("N.A."));
            };
            cell(r.l1_mean);
            cell(r.l2_mean);
            cell(r.linf_mean);
            for (double p : r.gt_top_m) os << ',' << csv_number(p);
            cell(r.gt_avg_rank);
            os << ',' << r.n << '\n';
        }
    }
    if (!os) throw std::runtime_error("write failed for " + path);
}

std::vector<EvalReport> read_report_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open report " + path);
    ordered_json arr = ordered_json::parse(is);
    std::vector<EvalReport> reports;
    for (const auto& j : arr) {
        EvalReport r;
        r.method = j.at("method").get<std::string>();
        r.strategy = j.at("strategy").get<std::string>();
        r.case_tag = j.at("case").get<std::string>();
        r.k = j.at("k").get<int>();
        r.asr = j.at("asr").get<double>();
        if (!j.at("l1_mean").is_null()) r.l1_mean = j.at("l1_mean").get<double>();
        if (!j.at("l2_mean").is_null()) r.l2_mean = j.at("l2_mean").get<double>();
        if (!j.at("linf_mean").is_null()) r.linf_mean = j.at("linf_mean").get<double>();
        for (const auto& [key, value] : j.at("gt_top_m").items()) {
            r.m_list.push_back(std::stoi(key.substr(4)));
            r.gt_top_m.push_back(value.get<double>());
        }
        if (!j.at("gt_avg_rank").is_null()) r.gt_avg_rank = j.at("gt_avg_rank").get<double>();
        r.n = j.at("n").get<int>();
        r.config = j.at("config").get<std::string>();
        reports.push_back(std::move(r));
    }
    return reports;
}

void export_heatmap(std::span<const float> delta, std::optional<std::pair<int, int>> shape,
                    const std::string& path) {
    if (!shape)
        throw std::invalid_argument("heatmap export needs 2-D input shape metadata; "
                                    "flat feature vectors have none");
    const auto [h, w] = *shape;
    if (static_cast<std::size_t>(h) * static_cast<std::size_t>(w) != delta.size())
        throw std::invalid_argument("heatmap: shape " + std::to_string(h) + "x" + std::to_string(w) +
                                    " does not match " + std::to_string(delta.size()) + " values");
    float peak = 0.0f;
    for (float v : delta) peak = std::max(peak, std::abs(v));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "P5\n" << w << ' ' << h << "\n255\n";
    for (float v : delta) {
        const float scaled = peak > 0.0f ? std::abs(v) / peak * 255.0f : 0.0f;
        os.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
    }
    if (!os) throw std::runtime_error("write failed for " + path);
}

}  // namespace advtopk
