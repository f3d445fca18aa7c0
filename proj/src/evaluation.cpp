#include "iocregex/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "iocregex/regex.hpp"
#include "iocregex/text.hpp"

namespace iocregex {

using nlohmann::json;

namespace {

std::string where(const std::string& source, std::size_t index) {
    return source + ": record " + std::to_string(index);
}

std::vector<std::string> string_list(const json& j, const std::string& context, const char* field) {
    if (!j.is_array()) throw EvaluationError(context + ": \"" + field + "\" must be an array of strings");
    std::vector<std::string> out;
    for (const auto& v : j) {
        if (!v.is_string()) throw EvaluationError(context + ": \"" + field + "\" must be an array of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

const json& required(const json& rec, const char* field, const std::string& context) {
    if (!rec.contains(field)) throw EvaluationError(context + ": missing field \"" + field + "\"");
    return rec.at(field);
}

}  // namespace

std::vector<GroundTruth> truths_from_json(const json& doc, const std::string& source) {
    if (!doc.is_array()) throw EvaluationError(source + ": ground truth must be a JSON array");
    std::vector<GroundTruth> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& rec = doc[i];
        const auto ctx = where(source, i);
        if (!rec.is_object()) throw EvaluationError(ctx + ": expected an object");
        GroundTruth t;
        const auto& text = required(rec, "text", ctx);
        const auto& kind = required(rec, "kind", ctx);
        const auto& dataset = required(rec, "dataset_id", ctx);
        if (!text.is_string() || !kind.is_string() || !dataset.is_string())
            throw EvaluationError(ctx + ": text, kind and dataset_id must be strings");
        t.text = text.get<std::string>();
        auto k = parse_ioc_kind(kind.get<std::string>());
        if (!k || *k == IocKind::other) throw EvaluationError(ctx + ": unsupported kind \"" + kind.get<std::string>() + "\"");
        t.kind = *k;
        t.dataset_id = dataset.get<std::string>();
        t.capture_groups = string_list(required(rec, "capture_groups", ctx), ctx, "capture_groups");
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<ScoredRegex> regexes_from_products(const json& doc, const std::string& source) {
    if (!doc.is_array()) throw EvaluationError(source + ": products must be a JSON array");
    std::vector<ScoredRegex> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& rec = doc[i];
        const auto ctx = where(source, i);
        if (!rec.is_object()) throw EvaluationError(ctx + ": expected an object");
        const auto& pattern = required(rec, "pattern", ctx);
        if (pattern.is_null()) continue;
        if (!pattern.is_string()) throw EvaluationError(ctx + ": \"pattern\" must be a string");
        ScoredRegex r;
        const auto& id = required(rec, "ioc_id", ctx);
        r.id = id.is_string() ? id.get<std::string>() : id.dump();
        r.pattern = pattern.get<std::string>();
        if (auto err = rx::syntax_error(r.pattern)) throw EvaluationError(ctx + ": " + err->what());
        r.source_groups = string_list(required(rec, "capture_groups", ctx), ctx, "capture_groups");
        const auto& normalized = required(rec, "normalized", ctx);
        if (!normalized.is_string()) throw EvaluationError(ctx + ": \"normalized\" must be a string");
        r.source_ioc = normalized.get<std::string>();
        const auto& score = required(rec, "score", ctx);
        if (!score.is_number_integer()) throw EvaluationError(ctx + ": \"score\" must be an integer");
        r.score = score.get<int>();
        out.push_back(std::move(r));
    }
    return out;
}

void prepare_truths(std::vector<GroundTruth>& truths, const Normalizer& normalizer) {
    for (std::size_t i = 0; i < truths.size(); ++i) {
        auto& t = truths[i];
        try {
            t.normalized = normalizer.make_record(t.text, t.kind).normalized;
        } catch (const std::exception& e) {
            throw EvaluationError("ground truth " + std::to_string(i) + ": " + e.what());
        }
        for (const auto& g : t.capture_groups) {
            if (!text::icontains(t.normalized, g))
                throw EvaluationError("ground truth " + std::to_string(i) + ": capture group \"" + g +
                                      "\" does not occur in \"" + t.normalized + "\"");
        }
    }
}

std::vector<std::vector<bool>> match_matrix(const std::vector<ScoredRegex>& regexes,
                                            const std::vector<GroundTruth>& truths) {
    std::vector<std::vector<bool>> m;
    m.reserve(regexes.size());
    for (const auto& r : regexes) {
        const auto re = rx::Regex::compile(r.pattern);
        auto& row = m.emplace_back(truths.size(), false);
        for (std::size_t j = 0; j < truths.size(); ++j) {
            const auto& subject = truths[j].normalized.empty() ? truths[j].text : truths[j].normalized;
            row[j] = re.search(subject);
        }
    }
    return m;
}

HitRate hit_rate(const std::vector<std::vector<bool>>& matrix, const std::vector<GroundTruth>& truths) {
    if (truths.empty()) throw EvaluationError("hit rate is undefined for an empty ground-truth set");
    HitRate h;
    h.total = truths.size();
    h.matched.assign(truths.size(), false);
    for (const auto& row : matrix)
        for (std::size_t j = 0; j < truths.size(); ++j)
            if (row[j]) h.matched[j] = true;
    for (std::size_t j = 0; j < truths.size(); ++j) {
        if (h.matched[j]) ++h.matched_count;
        else ++h.unmatched_by_kind[truths[j].kind];
    }
    h.rate = static_cast<double>(h.matched_count) / static_cast<double>(h.total);
    return h;
}

HitRate hit_rate(const std::vector<ScoredRegex>& regexes, const std::vector<GroundTruth>& truths) {
    if (truths.empty()) throw EvaluationError("hit rate is undefined for an empty ground-truth set");
    return hit_rate(match_matrix(regexes, truths), truths);
}

bool same_groups(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::set<std::string> fa, fb;
    for (const auto& s : a) fa.insert(text::folded(s));
    for (const auto& s : b) fb.insert(text::folded(s));
    return fa == fb;
}

std::optional<double> fpr(const std::vector<bool>& row, const std::vector<std::string>& source_groups,
                          const std::vector<GroundTruth>& truths) {
    std::size_t matched = 0, fp = 0;
    for (std::size_t j = 0; j < truths.size(); ++j) {
        if (!row[j]) continue;
        ++matched;
        if (!same_groups(truths[j].capture_groups, source_groups)) ++fp;
    }
    if (matched == 0) return std::nullopt;
    return static_cast<double>(fp) / static_cast<double>(matched);
}

std::optional<double> fpr(const ScoredRegex& regex, const std::vector<GroundTruth>& truths) {
    return fpr(match_matrix({regex}, truths).front(), regex.source_groups, truths);
}

double mean_fpr(const std::vector<double>& per_regex) {
    if (per_regex.empty()) throw EvaluationError("mean FPR is undefined when no regex matched any truth");
    return std::accumulate(per_regex.begin(), per_regex.end(), 0.0) / static_cast<double>(per_regex.size());
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double similarity(std::string_view a, std::string_view b) {
    const auto longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) dot += a[i] * b[i];
    for (double x : a) na += x * x;
    for (double x : b) nb += x * x;
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double structural_similarity(std::string_view pattern_a, std::string_view pattern_b) {
    const auto fa = rx::structural_features(pattern_a).counts;
    const auto fb = rx::structural_features(pattern_b).counts;
    return cosine({fa.begin(), fa.end()}, {fb.begin(), fb.end()});
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw EvaluationError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

Summary summarize(const std::vector<double>& values) {
    if (values.empty()) throw EvaluationError("distribution of an empty sample is undefined");
    Summary s;
    s.count = values.size();
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    s.q1 = quantile(values, 0.25);
    s.median = quantile(values, 0.5);
    s.q3 = quantile(values, 0.75);
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    return s;
}

Summary score_distribution(const std::vector<double>& scores) { return summarize(scores); }

std::vector<EvaluationReport> evaluate(const std::vector<ScoredRegex>& regexes, const std::vector<GroundTruth>& truths) {
    std::map<std::string, std::vector<GroundTruth>> by_dataset;
    for (const auto& t : truths) by_dataset[t.dataset_id].push_back(t);

    std::vector<EvaluationReport> reports;
    for (const auto& [id, subset] : by_dataset) {
        EvaluationReport rep;
        rep.dataset_id = id;
        const auto matrix = match_matrix(regexes, subset);
        const auto h = hit_rate(matrix, subset);
        rep.total = h.total;
        rep.matched = h.matched_count;
        rep.hit_rate = h.rate;
        rep.unmatched_by_kind = h.unmatched_by_kind;

        std::vector<double> rates, scores, sims;
        for (std::size_t i = 0; i < regexes.size(); ++i) {
            auto f = fpr(matrix[i], regexes[i].source_groups, subset);
            rep.per_regex_fpr.emplace_back(regexes[i].id, f);
            if (!f) continue;
            rates.push_back(*f);
            scores.push_back(regexes[i].score);
            sims.push_back(similarity(regexes[i].pattern, regexes[i].source_ioc));
            for (std::size_t j = 0; j < subset.size(); ++j)
                if (matrix[i][j] && !same_groups(subset[j].capture_groups, regexes[i].source_groups))
                    ++rep.false_positive_pairs;
        }
        if (!rates.empty()) {
            rep.mean_fpr = mean_fpr(rates);
            rep.score_stats = summarize(scores);
            rep.similarity_stats = summarize(sims);
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

namespace {

json summary_json(const std::optional<Summary>& s) {
    if (!s) return nullptr;
    return {{"count", s->count}, {"min", s->min}, {"q1", s->q1},     {"median", s->median},
            {"q3", s->q3},       {"max", s->max}, {"mean", s->mean}};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json report_to_json(const EvaluationReport& r) {
    json unmatched = json::object();
    for (auto k : {IocKind::file_path, IocKind::registry_key, IocKind::command_line}) {
        auto it = r.unmatched_by_kind.find(k);
        unmatched[std::string(to_string(k))] = it == r.unmatched_by_kind.end() ? 0 : it->second;
    }
    json per = json::array();
    for (const auto& [id, f] : r.per_regex_fpr) per.push_back({{"regex_id", id}, {"fpr", optional_number(f)}});
    return {{"dataset_id", r.dataset_id},
            {"total", r.total},
            {"matched", r.matched},
            {"hit_rate", r.hit_rate},
            {"unmatched_by_kind", unmatched},
            {"per_regex_fpr", per},
            {"mean_fpr", optional_number(r.mean_fpr)},
            {"false_positive_pairs", r.false_positive_pairs},
            {"score_stats", summary_json(r.score_stats)},
            {"similarity_stats", summary_json(r.similarity_stats)}};
}

json matrix_to_json(const std::vector<ScoredRegex>& regexes, const std::vector<GroundTruth>& truths,
                    const std::vector<std::vector<bool>>& matrix) {
    json rows = json::array();
    for (std::size_t i = 0; i < regexes.size(); ++i) {
        json hits = json::array();
        for (std::size_t j = 0; j < truths.size(); ++j)
            if (matrix[i][j]) hits.push_back(j);
        rows.push_back({{"regex_id", regexes[i].id}, {"matched_truths", hits}});
    }
    return rows;
}

}  // namespace iocregex
