// iocregex: batch front end for the IOC-to-regex pipeline.
//
//   iocregex generate    --kb data/windows_starter_kb.json --input iocs.txt --out run/
//   iocregex evaluate    --kb ... --products run/products.json --truths truths.json --report report.json
//   iocregex ablate      --kb ... --input iocs.txt --truths truths.json --mode no-capture --out run-cr/
//   iocregex kb-validate --kb data/windows_starter_kb.json [--export store.json]
//
// Exit status: 0 success, 1 configuration or I/O failure, 2 some IOCs failed.

#include <iostream>

#include "CLI11.hpp"
#include "iocregex/pipeline.hpp"

namespace {

using iocregex::PipelineConfig;

struct Options {
    PipelineConfig config;
    std::string config_file;
    std::string backend;
    std::string replay;
    std::string endpoint;
    std::string model;
    double temperature = -1;
    std::string mode = "full";
    std::string export_path;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_file, "JSON config file (flags override it)")->check(CLI::ExistingFile);
    cmd->add_option("--kb", o.config.knowledge_base, "knowledge-base definition file(s)")->check(CLI::ExistingFile);
    cmd->add_option("--tables", o.config.table_overrides, "normalization table override file(s)")
        ->check(CLI::ExistingFile);
}

void add_generation(CLI::App* cmd, Options& o) {
    cmd->add_option("--input", o.config.input, "IOC list (.json array or one IOC per line)");
    cmd->add_option("--out", o.config.output_dir, "output directory");
    cmd->add_option("--backend", o.backend, "template_fallback | scripted_mock | remote_llm");
    cmd->add_option("--replay", o.replay, "replay file for scripted_mock");
    cmd->add_option("--endpoint", o.endpoint, "chat-completions base URL for remote_llm");
    cmd->add_option("--model", o.model, "model name for remote_llm");
    cmd->add_option("--temperature", o.temperature, "sampling temperature for remote_llm");
    cmd->add_option("-k,--candidates", o.config.candidates, "candidates per IOC");
    cmd->add_option("--max-iterations", o.config.max_iterations, "per-loop iteration cap");
    cmd->add_option("--max-restarts", o.config.max_restarts, "restart cap");
    cmd->add_option("--seed", o.config.seed, "RNG seed");
    cmd->add_option("-j,--workers", o.config.workers, "worker threads");
}

/// Config file first, then explicit flags on top.
PipelineConfig resolve(const Options& o) {
    PipelineConfig c;
    if (!o.config_file.empty()) {
        const std::filesystem::path file(o.config_file);
        c.merge_json(iocregex::read_json_file(file), file.parent_path());
    }
    const auto& f = o.config;
    c.knowledge_base.insert(c.knowledge_base.end(), f.knowledge_base.begin(), f.knowledge_base.end());
    c.table_overrides.insert(c.table_overrides.end(), f.table_overrides.begin(), f.table_overrides.end());
    const PipelineConfig defaults;
    if (f.candidates != defaults.candidates) c.candidates = f.candidates;
    if (f.max_iterations != defaults.max_iterations) c.max_iterations = f.max_iterations;
    if (f.max_restarts != defaults.max_restarts) c.max_restarts = f.max_restarts;
    if (f.seed != defaults.seed) c.seed = f.seed;
    if (f.workers != defaults.workers) c.workers = f.workers;
    if (!f.input.empty()) c.input = f.input;
    if (!f.output_dir.empty()) c.output_dir = f.output_dir;
    if (!f.products.empty()) c.products = f.products;
    if (!f.truths.empty()) c.truths = f.truths;
    if (!f.report.empty()) c.report = f.report;
    if (!f.matrix.empty()) c.matrix = f.matrix;
    if (!o.backend.empty()) c.backend.kind = o.backend;
    if (!o.replay.empty()) c.backend.replay_file = o.replay;
    if (!o.endpoint.empty()) c.backend.remote.endpoint = o.endpoint;
    if (!o.model.empty()) c.backend.remote.model = o.model;
    if (o.temperature >= 0) c.backend.remote.temperature = o.temperature;
    return c;
}

void print_summary(const iocregex::GenerateOutput& out) {
    const auto& s = out.summary;
    std::cerr << "inputs " << s.inputs << ", excluded " << s.excluded << ", rejected " << s.rejected
              << ", processed " << s.processed << ", generated " << s.generated << ", failed " << s.failed << "\n";
}

void print_reports(const iocregex::EvaluateOutput& out) {
    for (const auto& r : out.reports) {
        std::cerr << r.dataset_id << ": hit rate " << r.hit_rate * 100.0 << "% (" << r.matched << "/" << r.total
                  << "), mean FPR ";
        if (r.mean_fpr) std::cerr << *r.mean_fpr * 100.0 << "%\n";
        else std::cerr << "n/a\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate and evaluate regexes for file-path, registry and command-line IOCs"};
    app.require_subcommand(1);
    Options o;

    auto* gen = app.add_subcommand("generate", "normalize, find capture groups, generate and grade regexes");
    add_common(gen, o);
    add_generation(gen, o);

    auto* eval = app.add_subcommand("evaluate", "score a product file against ground truth");
    add_common(eval, o);
    eval->add_option("--products", o.config.products, "products.json from generate")->check(CLI::ExistingFile);
    eval->add_option("--truths", o.config.truths, "ground-truth file")->check(CLI::ExistingFile);
    eval->add_option("--report", o.config.report, "report output path");
    eval->add_option("--matrix", o.config.matrix, "optional per-pair match dump");

    auto* abl = app.add_subcommand("ablate", "run one ablation variant and evaluate it");
    add_common(abl, o);
    add_generation(abl, o);
    abl->add_option("--truths", o.config.truths, "ground-truth file")->check(CLI::ExistingFile);
    abl->add_option("--report", o.config.report, "report output path (default <out>/report.json)");
    abl->add_option("--mode", o.mode, "full | -CR | C-R | -C-R (aliases: no-capture, no-reasoning, neither)");

    auto* kb = app.add_subcommand("kb-validate", "check knowledge-base files and print node counts");
    add_common(kb, o);
    kb->add_option("--export", o.export_path, "write the merged store in the definition-file schema");

    CLI11_PARSE(app, argc, argv);

    try {
        auto config = resolve(o);
        if (gen->parsed()) {
            auto out = iocregex::run_generate(config);
            print_summary(out);
            return out.exit_code;
        }
        if (eval->parsed()) {
            print_reports(iocregex::run_evaluate(config));
            return 0;
        }
        if (abl->parsed()) {
            auto mode = iocregex::parse_ablation_mode(o.mode);
            if (!mode) throw iocregex::ConfigError("unknown ablation mode \"" + o.mode + "\"");
            auto out = iocregex::run_ablation(config, *mode);
            print_summary(out.generation);
            print_reports(out.evaluation);
            return out.generation.exit_code;
        }
        if (kb->parsed()) {
            if (config.knowledge_base.empty()) throw iocregex::ConfigError("at least one --kb file is required");
            auto store = iocregex::KnowledgeStore::ingest(config.knowledge_base);
            for (auto f : {iocregex::Forest::path, iocregex::Forest::registry, iocregex::Forest::command})
                std::cout << iocregex::to_string(f) << ": " << store.node_count(f) << " nodes\n";
            if (!o.export_path.empty()) iocregex::write_json_file(o.export_path, store.export_json());
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "iocregex: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
