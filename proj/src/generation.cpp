#include "iocregex/generation.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "iocregex/regex.hpp"
#include "iocregex/text.hpp"

namespace iocregex {

using nlohmann::json;

std::string_view to_string(Stage stage) {
    switch (stage) {
    case Stage::debug: return "debug";
    case Stage::noncapture: return "noncapture";
    case Stage::overgen: return "overgen";
    }
    return "debug";
}

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::error: return "error";
    }
    return "fail";
}

json trace_to_json(const WorkflowTrace& trace) {
    json attempts = json::array();
    for (const auto& a : trace.attempts) {
        attempts.push_back({{"restart", a.restart},
                            {"stage", to_string(a.stage)},
                            {"verdict", to_string(a.verdict)},
                            {"pattern", a.pattern},
                            {"diagnostic", a.diagnostic}});
    }
    return {{"attempts", attempts},
            {"restarts", trace.restarts},
            {"backend_calls", trace.backend_calls},
            {"final", trace.final ? json(*trace.final) : json(nullptr)}};
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// ---- debug ----------------------------------------------------------------

DebugResult debug_check(std::string_view pattern, std::string_view target) {
    DebugResult r;
    std::vector<rx::Token> tokens;
    std::optional<rx::Regex> full;
    try {
        tokens = rx::tokenize(pattern);
        full = rx::Regex::compile(pattern);
    } catch (const rx::SyntaxError& e) {
        r.syntax_offset = e.offset();
        r.diagnostic = e.what();
        return r;
    }
    if (full->search(target)) {
        r.pass = true;
        return r;
    }

    // Grow the pattern one lexical token at a time. Prefixes that do not
    // compile on their own (an open group, say) are skipped.
    std::size_t matched_end = 0;
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        const auto& tok = tokens[k];
        const std::size_t end = tok.offset + tok.text.size();
        const auto prefix = pattern.substr(0, end);
        std::optional<rx::Regex> re;
        try {
            re = rx::Regex::compile(prefix);
        } catch (const rx::SyntaxError&) {
            continue;
        }
        if (auto reach = re->furthest_match_end(target)) {
            matched_end = end;
            r.target_offset = *reach;
            continue;
        }
        r.failing_token = tok.text;
        r.failing_token_offset = tok.offset;
        break;
    }
    r.matched_prefix = std::string(pattern.substr(0, matched_end));

    std::ostringstream out;
    out << "the pattern does not match the IOC. The longest matching prefix of the pattern is \""
        << r.matched_prefix << "\", which reaches offset " << r.target_offset << " of the IOC";
    if (r.target_offset < target.size()) out << " (next IOC text: \"" << target.substr(r.target_offset, 16) << "\")";
    out << ". Matching breaks at pattern token \"" << r.failing_token << "\" (pattern offset "
        << r.failing_token_offset << ").";
    r.diagnostic = out.str();
    return r;
}

// ---- noncapture -------------------------------------------------------------

namespace {

std::vector<std::string> unique_folded(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& s : items) {
        auto f = text::folded(s);
        if (!f.empty() && std::find(out.begin(), out.end(), f) == out.end()) out.push_back(std::move(f));
    }
    return out;
}

bool covered_by_keep(std::string_view run, std::size_t pos, std::size_t len, const std::vector<std::string>& keep) {
    for (const auto& k : keep) {
        if (k.size() < len) continue;
        for (auto q = text::ifind(run, k); q != std::string_view::npos; q = text::ifind(run, k, q + 1)) {
            if (q <= pos && pos + len <= q + k.size()) return true;
        }
    }
    return false;
}

std::string join_list(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += "\"" + items[i] + "\"";
    }
    return out;
}

}  // namespace

NoncaptureResult noncapture_check(std::string_view pattern, const GroupAnnotation& annotation) {
    const auto keep_raw = annotation.keep_components();
    if (keep_raw.empty()) throw std::invalid_argument("noncapture_check needs at least one keep component");

    const auto re = rx::Regex::compile(pattern);
    const auto runs = rx::literal_runs(re.ast());
    const auto keep = unique_folded(keep_raw);

    NoncaptureResult r;
    for (const auto& k : keep) {
        const bool present = std::any_of(runs.begin(), runs.end(), [&](const auto& run) { return text::icontains(run.text, k); });
        if (!present) r.missing_keep.push_back(k);
    }
    for (const auto& d : unique_folded(annotation.discard_components())) {
        if (std::find(keep.begin(), keep.end(), d) != keep.end()) continue;
        bool violated = false;
        for (const auto& run : runs) {
            for (auto p = text::ifind(run.text, d); p != std::string_view::npos && !violated;
                 p = text::ifind(run.text, d, p + 1)) {
                if (!covered_by_keep(run.text, p, d.size(), keep)) violated = true;
            }
            if (violated) break;
        }
        if (violated) r.present_discard.push_back(d);
    }
    r.pass = r.missing_keep.empty() && r.present_discard.empty();
    if (!r.pass) {
        std::ostringstream out;
        if (!r.missing_keep.empty())
            out << "capture-group components missing from the pattern: " << join_list(r.missing_keep) << ".";
        if (!r.present_discard.empty()) {
            if (!r.missing_keep.empty()) out << " ";
            out << "non-capture components still present literally: " << join_list(r.present_discard) << ".";
        }
        r.diagnostic = out.str();
    }
    return r;
}

// ---- overgen ----------------------------------------------------------------

namespace {

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
    const std::uint64_t range = hi - lo + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return lo + x % range;
}

constexpr int kMaxRejections = 1000;

}  // namespace

std::vector<std::string> random_probe_strings(std::uint64_t seed, const std::vector<std::string>& exclude) {
    std::mt19937_64 rng(seed);
    std::vector<std::string> out;
    out.reserve(kOvergenSamples);
    while (out.size() < kOvergenSamples) {
        std::string s;
        for (int tries = 0; tries < kMaxRejections; ++tries) {
            s.resize(bounded(rng, 8, 64));
            for (auto& c : s) c = static_cast<char>(bounded(rng, 33, 126));
            const bool clean = std::none_of(exclude.begin(), exclude.end(),
                                            [&](const std::string& k) { return !k.empty() && text::icontains(s, k); });
            if (clean) break;
        }
        out.push_back(std::move(s));
    }
    return out;
}

OvergenResult overgen_check(std::string_view pattern, std::uint64_t seed, const std::vector<std::string>& keep) {
    const auto re = rx::Regex::compile(pattern);
    OvergenResult r;
    r.samples = random_probe_strings(seed, keep);
    for (const auto& s : r.samples)
        if (re.search(s)) r.matched.push_back(s);
    r.pass = r.matched.size() < r.samples.size();
    if (!r.pass) {
        r.diagnostic = "the pattern matched all " + std::to_string(r.samples.size()) +
                       " random strings and is overly generic.";
    }
    return r;
}

// ---- prompts ----------------------------------------------------------------

std::string dialect_rules() {
    return "- Start with (?i) so matching is case-insensitive.\n"
           "- Escape regex metacharacters in literal text, for example \\\\ for a backslash and \\. for a dot.\n"
           "- Allowed: literals, character classes [...], \\d \\w \\s and their negations, the wildcard ., "
           "quantifiers * + ? {m,n} and their lazy forms, alternation |, groups (...) and (?:...), "
           "anchors ^ $ \\A \\Z \\b \\B.\n"
           "- Not allowed: backreferences, lookaround, named groups, inline flags other than a leading (?i).\n"
           "- Capture-group components must appear literally and not inside an optional group.\n"
           "- Replace every non-capture component with a wildcard construct.\n";
}

namespace {

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

}  // namespace

std::string build_prompt(const GroupAnnotation& a, const std::vector<Attempt>& transcript, std::size_t prior_restarts) {
    std::ostringstream p;
    p << "Write one regular expression that detects variants of the indicator of compromise below.\n\n";
    p << "IOC kind: " << to_string(a.record.kind) << "\n";
    p << "IOC: " << a.record.normalized << "\n";
    p << "Components: " << join(a.record.components, " | ") << "\n";
    if (a.groups_known) {
        std::vector<std::string> seqs;
        for (const auto& s : a.sequence_texts()) seqs.push_back("[" + join(s, " | ") + "]");
        p << "Capture groups (keep literally, in this order): " << join(seqs, " ") << "\n";
        const auto discard = a.discard_components();
        p << "Non-capture components (must not appear literally): "
          << (discard.empty() ? std::string("none") : join(discard, " | ")) << "\n";
    } else {
        p << "Capture groups: unknown. Decide which components are stable and generalize the rest.\n";
    }
    p << "\nDialect rules:\n" << dialect_rules();
    if (prior_restarts > 0) {
        p << "\nNote: " << prior_restarts << " earlier attempt" << (prior_restarts == 1 ? " was" : "s were")
          << " abandoned. Start again from scratch.\n";
    }
    if (!transcript.empty()) {
        const auto& last = transcript.back();
        p << "\nPrevious pattern: " << last.pattern << "\n";
        p << "Check: " << to_string(last.stage) << " (" << to_string(last.verdict) << ")\n";
        p << "Diagnostic: " << last.diagnostic << "\n";
    }
    p << "\nReply with the regular expression only, on a single line.\n";
    return p.str();
}

// ---- backends ---------------------------------------------------------------

namespace {

/// Sequences for the offline template when capture finding was bypassed: the
/// last path component and every argument after the executable are assumed
/// to vary.
std::vector<std::vector<std::size_t>> heuristic_sequences(const IocRecord& r) {
    std::vector<std::size_t> seq;
    if (r.kind == IocKind::command_line) {
        if (!r.components.empty()) seq.push_back(0);
    } else {
        for (std::size_t i = 0; i < r.components.size(); ++i)
            if (!text::is_drive_letter(r.components[i])) seq.push_back(i);
        if (seq.size() >= 2) seq.pop_back();
    }
    if (seq.empty()) return {};
    return {seq};
}

}  // namespace

std::string TemplateBackend::render(const GroupAnnotation& a) {
    const auto& r = a.record;
    const auto sequences = a.groups_known ? a.capture_sequences : heuristic_sequences(r);
    std::string out = "(?i).*";
    if (sequences.empty()) return out;

    if (r.kind != IocKind::command_line) {
        const auto& seq = sequences.front();
        for (std::size_t j = 0; j < seq.size(); ++j) {
            if (j) out += (seq[j] == seq[j - 1] + 1) ? "\\\\" : "\\\\.*\\\\";
            out += rx::escape(r.components[seq[j]]);
        }
        out += seq.back() + 1 < r.components.size() ? "\\\\.*" : ".*";
        return out;
    }

    const auto tokens = tokenize_command(r.normalized);
    auto tight = [&](std::size_t prev, std::size_t cur) {
        if (cur != prev + 1 || cur >= tokens.size()) return false;
        if (tokens[prev].has_quotes || tokens[cur].has_quotes) return false;
        const auto gap = std::string_view(r.normalized).substr(tokens[prev].end, tokens[cur].begin - tokens[prev].end);
        return !gap.empty() && std::all_of(gap.begin(), gap.end(), text::is_space);
    };
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        if (s) out += ".*";
        const auto& seq = sequences[s];
        for (std::size_t j = 0; j < seq.size(); ++j) {
            if (j) out += tight(seq[j - 1], seq[j]) ? "\\s+" : ".*";
            out += rx::escape(r.components[seq[j]]);
        }
    }
    out += ".*";
    return out;
}

std::string TemplateBackend::propose(const GenerationRequest& request) const { return render(*request.annotation); }

ScriptedBackend::ScriptedBackend(std::vector<std::vector<json>> runs) : runs_(std::move(runs)) {
    if (runs_.empty()) throw std::invalid_argument("scripted backend needs at least one run");
    for (const auto& run : runs_)
        if (run.empty()) throw std::invalid_argument("scripted backend run has no emissions");
}

ScriptedBackend ScriptedBackend::of(std::vector<std::string> emissions) {
    std::vector<json> run(emissions.begin(), emissions.end());
    return ScriptedBackend({run});
}

ScriptedBackend ScriptedBackend::from_json(const json& doc) {
    auto emissions_of = [](const json& j) -> std::vector<json> {
        const json& list = j.is_object() ? j.at("emissions") : j;
        if (!list.is_array()) throw std::runtime_error("replay emissions must be an array");
        for (const auto& e : list) {
            if (!e.is_string() && !(e.is_object() && e.contains("error")))
                throw std::runtime_error("replay emission must be a string or {\"error\": ...}");
        }
        return list.get<std::vector<json>>();
    };
    std::vector<std::vector<json>> runs;
    if (doc.is_object() && doc.contains("runs")) {
        for (const auto& r : doc.at("runs")) runs.push_back(emissions_of(r));
    } else {
        runs.push_back(emissions_of(doc));
    }
    return ScriptedBackend(std::move(runs));
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error(file.string() + ": cannot open replay file");
    try {
        return from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw std::runtime_error(file.string() + ": " + e.what());
    }
}

std::string ScriptedBackend::propose(const GenerationRequest& request) const {
    if (runs_.empty()) throw BackendError("replay has no runs");
    const auto& run = runs_[std::min(request.run_index, runs_.size() - 1)];
    if (run.empty()) throw BackendError("replay run has no emissions");
    const auto& e = run[std::min(request.call_index, run.size() - 1)];
    if (e.is_object()) throw BackendError(e.at("error").get<std::string>());
    const auto s = e.get<std::string>();
    if (s == "{{template}}") return TemplateBackend::render(*request.annotation);
    if (s == "{{exact}}") return "(?i)" + rx::escape(request.annotation->record.normalized);
    return s;
}

std::string extract_pattern(std::string_view reply) {
    auto clean = [](std::string_view line) {
        line = text::trim(line);
        if (line.size() >= 2 && line.front() == '`' && line.back() == '`') line = line.substr(1, line.size() - 2);
        return std::string(text::trim(line));
    };
    std::string_view body = reply;
    if (auto fence = reply.find("```"); fence != std::string_view::npos) {
        auto start = reply.find('\n', fence);
        body = start == std::string_view::npos ? std::string_view{} : reply.substr(start + 1);
        if (auto close = body.find("```"); close != std::string_view::npos) body = body.substr(0, close);
    }
    std::istringstream lines{std::string(body)};
    for (std::string line; std::getline(lines, line);) {
        auto c = clean(line);
        if (!c.empty()) return c;
    }
    return {};
}

std::unique_ptr<GeneratorBackend> make_backend(const BackendConfig& config) {
    if (config.kind == "template_fallback") return std::make_unique<TemplateBackend>();
    if (config.kind == "scripted_mock") {
        if (config.replay_file.empty()) throw std::runtime_error("scripted_mock backend needs a replay file");
        return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(config.replay_file));
    }
    if (config.kind == "remote_llm") return make_remote_backend(config.remote);
    throw std::runtime_error("unknown backend \"" + config.kind + "\"");
}

// ---- workflow ---------------------------------------------------------------

std::pair<std::optional<std::string>, WorkflowTrace> generate(const GroupAnnotation& annotation,
                                                              const GeneratorBackend& backend, std::uint64_t rng_seed,
                                                              const WorkflowOptions& options) {
    WorkflowTrace trace;
    const std::string& target = annotation.record.normalized;
    const auto keep = annotation.keep_components();
    std::size_t call_index = 0;

    auto call = [&](RequestKind kind, const std::vector<Attempt>& transcript, const std::string& previous,
                    std::size_t pass) {
        GenerationRequest req;
        req.annotation = &annotation;
        req.kind = kind;
        req.prompt = build_prompt(annotation, transcript, pass);
        req.previous_pattern = previous;
        req.call_index = call_index++;
        req.run_index = options.run_index;
        req.seed = rng_seed;
        ++trace.backend_calls;
        return backend.propose(req);
    };

    if (options.single_shot) {
        Attempt a;
        try {
            a.pattern = call(RequestKind::initial, {}, {}, 0);
            if (auto err = rx::syntax_error(a.pattern)) {
                a.diagnostic = err->what();
            } else {
                a.verdict = Verdict::pass;
                trace.final = a.pattern;
            }
        } catch (const BackendError& e) {
            a.verdict = Verdict::error;
            a.diagnostic = std::string("backend error: ") + e.what();
        }
        trace.attempts.push_back(std::move(a));
        return {trace.final, trace};
    }

    const std::size_t passes = std::max<std::size_t>(1, options.max_restarts);
    const std::size_t cap = std::max<std::size_t>(1, options.max_iterations);
    for (std::size_t pass = 0; pass < passes; ++pass) {
        if (pass) ++trace.restarts;
        std::vector<Attempt> local;
        auto record = [&](std::string pattern, Stage stage, Verdict verdict, std::string diagnostic) {
            Attempt a{std::move(pattern), stage, verdict, std::move(diagnostic), pass};
            local.push_back(a);
            trace.attempts.push_back(std::move(a));
        };

        std::string candidate;
        try {
            candidate = call(RequestKind::initial, {}, {}, pass);
        } catch (const BackendError& e) {
            record({}, Stage::debug, Verdict::error, std::string("backend error: ") + e.what());
            continue;
        }

        std::size_t debug_n = 0;
        std::size_t noncapture_n = 0;
        // Asks for a revision; transport errors use up the loop's budget.
        auto refine = [&](Stage stage, std::size_t& counter) {
            const auto kind = stage == Stage::debug ? RequestKind::fix_debug : RequestKind::fix_noncapture;
            while (counter < cap) {
                try {
                    candidate = call(kind, local, candidate, pass);
                    return true;
                } catch (const BackendError& e) {
                    record(candidate, stage, Verdict::error, std::string("backend error: ") + e.what());
                    ++counter;
                }
            }
            return false;
        };

        bool abandon = false;
        while (!abandon) {
            if (debug_n >= cap) break;
            auto d = debug_check(candidate, target);
            record(candidate, Stage::debug, d.pass ? Verdict::pass : Verdict::fail, d.diagnostic);
            ++debug_n;
            if (!d.pass) {
                abandon = !refine(Stage::debug, debug_n);
                continue;
            }
            if (annotation.groups_known) {
                if (noncapture_n >= cap) break;
                auto nc = noncapture_check(candidate, annotation);
                record(candidate, Stage::noncapture, nc.pass ? Verdict::pass : Verdict::fail, nc.diagnostic);
                ++noncapture_n;
                if (!nc.pass) {
                    abandon = !refine(Stage::noncapture, noncapture_n);
                    continue;
                }
            }
            auto og = overgen_check(candidate, splitmix64(rng_seed + pass), keep);
            record(candidate, Stage::overgen, og.pass ? Verdict::pass : Verdict::fail, og.diagnostic);
            if (og.pass) {
                trace.final = candidate;
                return {trace.final, trace};
            }
            abandon = true;
        }
    }
    return {std::nullopt, trace};
}

}  // namespace iocregex
