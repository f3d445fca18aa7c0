#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "iocregex/capture_finder.hpp"
#include "iocregex/generation.hpp"

namespace iocregex {

class GradingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GradingOptions {
    int alpha = 1;
    int beta = 1;
    std::size_t foreign_min_length = 3;
};

struct RegexCandidate {
    std::string pattern;
    int n_cg = 0;
    int n_wc = 0;
    int score = 0;
    std::size_t trace_ref = 0;  // index of the generate() run that produced it
};

/// Characters that separate components and are never counted as foreign text.
bool is_glue_char(char c);

/// Score = alpha * n_cg - beta * n_wc. n_cg counts distinct keep components
/// found in a literal run outside every optional construct; n_wc counts
/// wildcard units (one leading and one trailing top-level ".*" exempt) plus
/// foreign literal segments of at least `foreign_min_length` characters.
RegexCandidate grade(std::string_view pattern, const GroupAnnotation& annotation, const GradingOptions& options = {});

struct Selection {
    std::optional<RegexCandidate> best;
    std::vector<RegexCandidate> candidates;
    std::vector<WorkflowTrace> traces;
};

/// True when `a` should be preferred over `b`: higher score, then shorter
/// pattern, then lexicographically smaller.
bool better(const RegexCandidate& a, const RegexCandidate& b);

/// Runs generate() k times with derived seeds and keeps the best final.
Selection select_best(const GroupAnnotation& annotation, const GeneratorBackend& backend, std::size_t k,
                      std::uint64_t rng_seed, const WorkflowOptions& workflow = {},
                      const GradingOptions& grading = {});

}  // namespace iocregex
