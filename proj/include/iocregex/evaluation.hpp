#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "iocregex/normalize.hpp"

namespace iocregex {

class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GroundTruth {
    std::string text;
    IocKind kind = IocKind::other;
    std::vector<std::string> capture_groups;
    std::string dataset_id;
    std::string normalized;  // filled by prepare_truths; matching uses this
};

/// A generated regex as evaluation sees it: its pattern plus the capture
/// groups (G_k) of the IOC it came from.
struct ScoredRegex {
    std::string id;
    std::string pattern;
    std::vector<std::string> source_groups;
    std::string source_ioc;  // normalized IOC text
    int score = 0;
};

std::vector<GroundTruth> truths_from_json(const nlohmann::json& doc, const std::string& source);
std::vector<ScoredRegex> regexes_from_products(const nlohmann::json& doc, const std::string& source);

/// Normalizes each truth's text with its declared kind and checks that every
/// annotated capture group occurs in it.
void prepare_truths(std::vector<GroundTruth>& truths, const Normalizer& normalizer);

struct HitRate {
    std::vector<bool> matched;  // per truth
    std::size_t matched_count = 0;
    std::size_t total = 0;
    double rate = 0.0;
    std::map<IocKind, std::size_t> unmatched_by_kind;
};

/// Match matrix [regex][truth] with unanchored search on normalized text.
std::vector<std::vector<bool>> match_matrix(const std::vector<ScoredRegex>& regexes,
                                            const std::vector<GroundTruth>& truths);

HitRate hit_rate(const std::vector<ScoredRegex>& regexes, const std::vector<GroundTruth>& truths);
HitRate hit_rate(const std::vector<std::vector<bool>>& matrix, const std::vector<GroundTruth>& truths);

/// Case-folded set comparison of capture groups.
bool same_groups(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// FP_k / |M_k|; absent when the regex matches no truth.
std::optional<double> fpr(const ScoredRegex& regex, const std::vector<GroundTruth>& truths);
std::optional<double> fpr(const std::vector<bool>& row, const std::vector<std::string>& source_groups,
                          const std::vector<GroundTruth>& truths);

double mean_fpr(const std::vector<double>& per_regex);

/// 1 - levenshtein(a, b) / max(|a|, |b|).
std::size_t edit_distance(std::string_view a, std::string_view b);
double similarity(std::string_view a, std::string_view b);

double cosine(const std::vector<double>& a, const std::vector<double>& b);
double structural_similarity(std::string_view pattern_a, std::string_view pattern_b);

struct Summary {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
    std::size_t count = 0;
};

/// Quantile with linear interpolation between closest ranks:
/// h = (n - 1) p, q = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
double quantile(std::vector<double> values, double p);
Summary summarize(const std::vector<double>& values);
Summary score_distribution(const std::vector<double>& scores);

struct EvaluationReport {
    std::string dataset_id;
    std::size_t total = 0;
    std::size_t matched = 0;
    double hit_rate = 0.0;
    std::map<IocKind, std::size_t> unmatched_by_kind;
    std::vector<std::pair<std::string, std::optional<double>>> per_regex_fpr;
    std::optional<double> mean_fpr;
    std::size_t false_positive_pairs = 0;
    std::optional<Summary> score_stats;
    std::optional<Summary> similarity_stats;
};

/// One report per dataset id, sorted by id. Truths must be prepared.
std::vector<EvaluationReport> evaluate(const std::vector<ScoredRegex>& regexes, const std::vector<GroundTruth>& truths);

nlohmann::json report_to_json(const EvaluationReport& report);
nlohmann::json matrix_to_json(const std::vector<ScoredRegex>& regexes, const std::vector<GroundTruth>& truths,
                              const std::vector<std::vector<bool>>& matrix);

}  // namespace iocregex
