#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advtopk/attack.hpp"

namespace advtopk {

// One attack run as it appears in an outcomes file (JSON-lines).
struct OutcomeRecord {
    int task = -1;
    int sample = -1;  // index into the campaign's evaluation subset
    std::string method_tag;
    std::string strategy;
    int k = 1;
    bool targeted = true;
    int ground_truth = -1;
    std::vector<int> targets;
    bool success = false;
    double l1 = 0.0, l2 = 0.0, linf = 0.0;
    float final_lambda = 0.0f;
    int iterations = 0;
    int gt_rank = 0;
    std::vector<float> prediction;
    std::vector<float> adversarial;
    std::vector<float> delta;
    std::vector<std::pair<float, bool>> lambda_trace;
};

std::string record_to_json_line(const OutcomeRecord& r);
OutcomeRecord record_from_json_line(const std::string& line);

struct NormTriple {
    double l1 = 0.0, l2 = 0.0, linf = 0.0;
};

NormTriple perturbation_norms(std::span<const float> delta);

struct RankStats {
    std::vector<int> m_list;
    std::vector<double> top_m_proportion;  // fraction of successful attacks with GT rank <= m
    double average_rank = 0.0;
    int n = 0;  // successful attacks counted
};

// Ranks recomputed from each record's prediction vector; statistics cover
// successful attacks only.
RankStats gt_rank_stats(std::span<const OutcomeRecord> records, std::span<const int> m_list);

struct EvalReport {
    std::string method;
    std::string strategy;
    std::string case_tag;  // best / average / worst
    int k = 1;
    double asr = 0.0;  // percent
    std::optional<double> l1_mean, l2_mean, linf_mean;  // nullopt -> "N.A." (no success)
    std::vector<int> m_list;
    std::vector<double> gt_top_m;
    std::optional<double> gt_avg_rank;
    int n = 0;
    std::string config;  // snapshot of the campaign configuration
};

inline constexpr int kDefaultRankBuckets[] = {1, 2, 3, 5, 10};

// Splits records into (method, strategy, k) groups and produces reports.
// Groups where a sample was attacked with several target lists additionally
// yield best/worst cases: per sample the easiest (smallest l2 success) and
// hardest target; a sample with any failed target fails its worst case.
// Norm means and rank statistics cover successful attacks only.
std::vector<EvalReport> aggregate_cases(std::span<const OutcomeRecord> records,
                                        std::span<const int> m_list = kDefaultRankBuckets,
                                        const std::string& config_snapshot = "");

enum class ReportFormat { Json, Csv };

void write_report(std::span<const EvalReport> reports, ReportFormat format, const std::string& path);
std::vector<EvalReport> read_report_json(const std::string& path);

// Absolute perturbation magnitudes scaled to [0,255], written as binary PGM
// (P5). Requires 2-D shape metadata.
void export_heatmap(std::span<const float> delta, std::optional<std::pair<int, int>> shape,
                    const std::string& path);

}  // namespace advtopk
