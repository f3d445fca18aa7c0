#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iocregex/evaluation.hpp"
#include "iocregex/generation.hpp"
#include "iocregex/grading.hpp"

namespace iocregex {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// full: the complete pipeline. no_capture (-CR): capture finding bypassed.
/// no_reasoning (C-R): single-shot generation. neither (-C-R): both.
enum class AblationMode { full, no_capture, no_reasoning, neither };

std::string_view to_string(AblationMode mode);
std::optional<AblationMode> parse_ablation_mode(std::string_view name);

struct PipelineConfig {
    std::vector<std::filesystem::path> knowledge_base;
    std::vector<std::filesystem::path> table_overrides;
    BackendConfig backend;
    std::size_t candidates = 5;
    std::size_t max_iterations = 10;
    std::size_t max_restarts = 5;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    AblationMode mode = AblationMode::full;

    std::filesystem::path input;
    std::filesystem::path output_dir;
    std::filesystem::path products;
    std::filesystem::path truths;
    std::filesystem::path report;
    std::filesystem::path matrix;  // optional audit dump

    /// Overlays keys of a JSON config document (same names as the fields).
    void merge_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

    /// Caps >= 1, k >= 1, referenced input files exist.
    void validate(bool need_input, bool need_evaluation_inputs) const;
};

struct InputIoc {
    std::string id;
    std::string text;
};

/// JSON array of strings or {"id", "ioc"} objects, or a text file with one
/// IOC per line ('#' starts a comment line).
std::vector<InputIoc> read_inputs(const std::filesystem::path& file);

struct RunSummary {
    std::size_t inputs = 0;
    std::size_t excluded = 0;   // kind other / unclassifiable
    std::size_t rejected = 0;   // preprocessing errors and no capture group
    std::size_t processed = 0;  // reached generation
    std::size_t generated = 0;  // produced a final regex
    std::size_t failed = 0;     // processed but no regex, plus preprocessing errors
    std::size_t backend_calls = 0;
    std::map<std::string, std::size_t> by_kind;
};

nlohmann::json summary_to_json(const RunSummary& summary, const PipelineConfig& config);

struct GenerateOutput {
    nlohmann::json products = nlohmann::json::array();
    nlohmann::json rejections = nlohmann::json::array();
    nlohmann::json annotations = nlohmann::json::array();
    nlohmann::json traces = nlohmann::json::array();
    RunSummary summary;
    int exit_code = 0;
};

/// Everything the generate stage needs, loaded once.
struct PipelineContext {
    KnowledgeStore store;
    NormalizationTables tables;
    std::unique_ptr<GeneratorBackend> backend;

    static PipelineContext load(const PipelineConfig& config);
};

GenerateOutput generate_products(const std::vector<InputIoc>& inputs, const PipelineContext& context,
                                 const PipelineConfig& config);

/// Reads inputs, runs generate_products, writes products.json,
/// rejections.json, annotations.json, traces.json and summary.json into
/// output_dir.
GenerateOutput run_generate(const PipelineConfig& config);

struct EvaluateOutput {
    nlohmann::json report;
    std::vector<EvaluationReport> reports;
};

EvaluateOutput evaluate_products(const nlohmann::json& products, const nlohmann::json& truths,
                                 const Normalizer& normalizer, const std::string& products_name = "products",
                                 const std::string& truths_name = "truths",
                                 nlohmann::json* matrix_out = nullptr);

/// Writes the report (and the match matrix when configured).
EvaluateOutput run_evaluate(const PipelineConfig& config);

struct AblationOutput {
    GenerateOutput generation;
    EvaluateOutput evaluation;
};

/// run_generate with `mode` into output_dir, then evaluation against truths.
AblationOutput run_ablation(PipelineConfig config, AblationMode mode);

nlohmann::json read_json_file(const std::filesystem::path& file);
void write_json_file(const std::filesystem::path& file, const nlohmann::json& doc);

}  // namespace iocregex
