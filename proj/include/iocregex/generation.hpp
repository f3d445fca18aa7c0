#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "iocregex/capture_finder.hpp"

namespace iocregex {

enum class Stage { debug, noncapture, overgen };
enum class Verdict { pass, fail, error };

std::string_view to_string(Stage stage);
std::string_view to_string(Verdict verdict);

struct Attempt {
    std::string pattern;
    Stage stage = Stage::debug;
    Verdict verdict = Verdict::fail;
    std::string diagnostic;
    std::size_t restart = 0;
};

struct WorkflowTrace {
    std::vector<Attempt> attempts;
    std::size_t restarts = 0;  // restarts begun after the first pass
    std::size_t backend_calls = 0;
    std::optional<std::string> final;
};

nlohmann::json trace_to_json(const WorkflowTrace& trace);

// ---- checks -------------------------------------------------------------

struct DebugResult {
    bool pass = false;
    std::string diagnostic;
    std::optional<std::size_t> syntax_offset;
    std::string matched_prefix;   // longest matching compilable token prefix
    std::string failing_token;
    std::size_t failing_token_offset = 0;
    std::size_t target_offset = 0;  // how far into the target that prefix reaches
};

/// Unanchored match of `pattern` against `target`; on failure, a token-prefix
/// probe locates the first pattern token that breaks the match.
DebugResult debug_check(std::string_view pattern, std::string_view target);

struct NoncaptureResult {
    bool pass = false;
    std::vector<std::string> missing_keep;
    std::vector<std::string> present_discard;
    std::string diagnostic;
};

/// Every keep component must occur case-insensitively in the pattern's
/// literal stream, and no discard component may, except where the occurrence
/// lies inside an occurrence of a keep component. Precondition: the pattern
/// compiles and the annotation has at least one keep component.
NoncaptureResult noncapture_check(std::string_view pattern, const GroupAnnotation& annotation);

struct OvergenResult {
    bool pass = false;
    std::vector<std::string> samples;
    std::vector<std::string> matched;
    std::string diagnostic;
};

inline constexpr std::size_t kOvergenSamples = 10;

/// Ten seeded printable non-whitespace strings of length 8..64 that contain
/// none of `exclude` (case-insensitive).
std::vector<std::string> random_probe_strings(std::uint64_t seed, const std::vector<std::string>& exclude);

/// Fails only when the pattern matches all ten probe strings.
OvergenResult overgen_check(std::string_view pattern, std::uint64_t seed,
                            const std::vector<std::string>& keep_components = {});

// ---- prompts and backends -----------------------------------------------

enum class RequestKind { initial, fix_debug, fix_noncapture };

struct GenerationRequest {
    const GroupAnnotation* annotation = nullptr;
    RequestKind kind = RequestKind::initial;
    std::string prompt;
    std::string previous_pattern;
    std::size_t call_index = 0;  // 0-based within one generate() run
    std::size_t run_index = 0;   // candidate index within select_best
    std::uint64_t seed = 0;
};

/// Raised by backends for transport or protocol failures. The workflow
/// records it and carries on.
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;
    virtual std::string_view kind() const = 0;
    /// Exactly one candidate per call. Implementations must be safe to call
    /// from several threads at once.
    virtual std::string propose(const GenerationRequest& request) const = 0;
};

/// Offline backend: keep sequences joined by their escaped delimiters inside
/// a "(?i).*...*" frame.
class TemplateBackend final : public GeneratorBackend {
public:
    std::string_view kind() const override { return "template_fallback"; }
    std::string propose(const GenerationRequest& request) const override;

    static std::string render(const GroupAnnotation& annotation);
};

/// Replays emissions from a file, indexed by call number (the last entry
/// repeats). Entries are pattern strings, the directives "{{template}}" and
/// "{{exact}}", or {"error": msg} to simulate a transport failure.
class ScriptedBackend final : public GeneratorBackend {
public:
    explicit ScriptedBackend(std::vector<std::vector<nlohmann::json>> runs);
    static ScriptedBackend from_json(const nlohmann::json& doc);
    static ScriptedBackend from_file(const std::filesystem::path& file);
    /// One run, emissions given as plain strings.
    static ScriptedBackend of(std::vector<std::string> emissions);

    std::string_view kind() const override { return "scripted_mock"; }
    std::string propose(const GenerationRequest& request) const override;

private:
    std::vector<std::vector<nlohmann::json>> runs_;
};

struct RemoteConfig {
    std::string endpoint = "https://api.openai.com/v1";
    std::string model = "gpt-4o";
    double temperature = 0.7;
    std::string api_key_env = "IOCREGEX_API_KEY";
    int timeout_seconds = 60;
    int max_in_flight = 4;
};

/// OpenAI-compatible chat-completions client. The credential is read from
/// the environment variable named in the config, never from files.
std::unique_ptr<GeneratorBackend> make_remote_backend(const RemoteConfig& config);

/// Extracts the first non-empty line of the first fenced code block, or of
/// the whole reply when there is no fence.
std::string extract_pattern(std::string_view reply);

struct BackendConfig {
    std::string kind = "template_fallback";
    std::filesystem::path replay_file;
    RemoteConfig remote;
};

std::unique_ptr<GeneratorBackend> make_backend(const BackendConfig& config);

std::string dialect_rules();

/// Deterministic prompt text: IOC, keep and discard lists, dialect rules and
/// the latest diagnostic from `transcript` when there is one.
std::string build_prompt(const GroupAnnotation& annotation, const std::vector<Attempt>& transcript,
                         std::size_t prior_restarts = 0);

// ---- workflow -----------------------------------------------------------

struct WorkflowOptions {
    std::size_t max_iterations = 10;  // per loop, per restart
    std::size_t max_restarts = 5;     // total passes through the workflow
    bool single_shot = false;         // one backend call, no checks beyond compiling
    std::size_t run_index = 0;
};

std::pair<std::optional<std::string>, WorkflowTrace> generate(const GroupAnnotation& annotation,
                                                              const GeneratorBackend& backend,
                                                              std::uint64_t rng_seed,
                                                              const WorkflowOptions& options = {});

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace iocregex
