#include "iocregex/grading.hpp"

#include <algorithm>

#include "iocregex/regex.hpp"
#include "iocregex/text.hpp"

namespace iocregex {

bool is_glue_char(char c) {
    switch (c) {
    case '\\': case '/': case ' ': case '\t': case ';': case '"': case '\'': case ':': case ',': case '=':
        return true;
    default:
        return false;
    }
}

namespace {

std::vector<std::string> distinct_keep(const GroupAnnotation& a) {
    std::vector<std::string> out;
    for (const auto& k : a.keep_components()) {
        auto f = text::folded(k);
        if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(std::move(f));
    }
    return out;
}

int foreign_segments(const std::string& run, const std::vector<std::string>& keep, std::size_t min_length) {
    std::vector<bool> covered(run.size(), false);
    for (const auto& k : keep) {
        for (auto q = text::ifind(run, k); q != std::string::npos; q = text::ifind(run, k, q + 1))
            std::fill(covered.begin() + q, covered.begin() + q + k.size(), true);
    }
    int count = 0;
    std::size_t length = 0;
    for (std::size_t i = 0; i <= run.size(); ++i) {
        if (i < run.size() && !covered[i] && !is_glue_char(run[i])) {
            ++length;
            continue;
        }
        if (length >= min_length) ++count;
        length = 0;
    }
    return count;
}

}  // namespace

RegexCandidate grade(std::string_view pattern, const GroupAnnotation& annotation, const GradingOptions& options) {
    std::optional<rx::Regex> re;
    try {
        re = rx::Regex::compile(pattern);
    } catch (const rx::SyntaxError& e) {
        throw GradingError(std::string("cannot grade a pattern that does not compile: ") + e.what());
    }
    const auto runs = rx::literal_runs(re->ast());
    const auto keep = distinct_keep(annotation);

    RegexCandidate c;
    c.pattern = std::string(pattern);
    for (const auto& k : keep) {
        const bool counted = std::any_of(runs.begin(), runs.end(),
                                         [&](const rx::LiteralRun& r) { return !r.optional && text::icontains(r.text, k); });
        if (counted) ++c.n_cg;
    }
    c.n_wc = rx::count_wildcard_units(re->ast(), true);
    for (const auto& r : runs) c.n_wc += foreign_segments(r.text, keep, options.foreign_min_length);
    c.score = options.alpha * c.n_cg - options.beta * c.n_wc;
    return c;
}

bool better(const RegexCandidate& a, const RegexCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.pattern.size() != b.pattern.size()) return a.pattern.size() < b.pattern.size();
    return a.pattern < b.pattern;
}

Selection select_best(const GroupAnnotation& annotation, const GeneratorBackend& backend, std::size_t k,
                      std::uint64_t rng_seed, const WorkflowOptions& workflow, const GradingOptions& grading) {
    Selection out;
    for (std::size_t i = 0; i < k; ++i) {
        auto options = workflow;
        options.run_index = i;
        auto [final, trace] = generate(annotation, backend, splitmix64(rng_seed + i), options);
        out.traces.push_back(std::move(trace));
        if (!final) continue;
        auto candidate = grade(*final, annotation, grading);
        candidate.trace_ref = i;
        if (!out.best || better(candidate, *out.best)) out.best = candidate;
        out.candidates.push_back(std::move(candidate));
    }
    return out;
}

}  // namespace iocregex
