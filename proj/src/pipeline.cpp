#include "iocregex/pipeline.hpp"

#include <atomic>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "iocregex/text.hpp"

namespace iocregex {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(AblationMode mode) {
    switch (mode) {
    case AblationMode::full: return "full";
    case AblationMode::no_capture: return "-CR";
    case AblationMode::no_reasoning: return "C-R";
    case AblationMode::neither: return "-C-R";
    }
    return "full";
}

std::optional<AblationMode> parse_ablation_mode(std::string_view name) {
    if (name == "full" || name == "CR") return AblationMode::full;
    if (name == "-CR" || name == "no-capture") return AblationMode::no_capture;
    if (name == "C-R" || name == "no-reasoning") return AblationMode::no_reasoning;
    if (name == "-C-R" || name == "neither") return AblationMode::neither;
    return std::nullopt;
}

json read_json_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError(file.string() + ": cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& file, const json& doc) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError(file.string() + ": cannot write file");
    out << doc.dump(2) << "\n";
    if (!out) throw ConfigError(file.string() + ": write failed");
}

// ---- config -----------------------------------------------------------------

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::size_t positive(const json& j, const char* key) {
    if (!j.is_number_integer() || j.get<long long>() < 1) throw ConfigError(std::string(key) + " must be an integer >= 1");
    return j.get<std::size_t>();
}

}  // namespace

void PipelineConfig::merge_json(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, v] : doc.items()) {
        if (key == "knowledge_base" || key == "tables") {
            auto& target = key == "knowledge_base" ? knowledge_base : table_overrides;
            if (!v.is_array()) throw ConfigError(key + " must be an array of paths");
            for (const auto& p : v) target.push_back(resolve(base_dir, p.get<std::string>()));
        } else if (key == "backend") {
            if (!v.is_object()) throw ConfigError("backend must be an object");
            for (const auto& [bk, bv] : v.items()) {
                if (bk == "kind") backend.kind = bv.get<std::string>();
                else if (bk == "replay_file") backend.replay_file = resolve(base_dir, bv.get<std::string>());
                else if (bk == "endpoint") backend.remote.endpoint = bv.get<std::string>();
                else if (bk == "model") backend.remote.model = bv.get<std::string>();
                else if (bk == "temperature") backend.remote.temperature = bv.get<double>();
                else if (bk == "api_key_env") backend.remote.api_key_env = bv.get<std::string>();
                else if (bk == "timeout_seconds") backend.remote.timeout_seconds = static_cast<int>(positive(bv, "timeout_seconds"));
                else if (bk == "max_in_flight") backend.remote.max_in_flight = static_cast<int>(positive(bv, "max_in_flight"));
                else throw ConfigError("unknown backend key \"" + bk + "\"");
            }
        } else if (key == "candidates") candidates = positive(v, "candidates");
        else if (key == "max_iterations") max_iterations = positive(v, "max_iterations");
        else if (key == "max_restarts") max_restarts = positive(v, "max_restarts");
        else if (key == "workers") workers = positive(v, "workers");
        else if (key == "seed") seed = v.get<std::uint64_t>();
        else if (key == "mode") {
            auto m = parse_ablation_mode(v.get<std::string>());
            if (!m) throw ConfigError("unknown mode \"" + v.get<std::string>() + "\"");
            mode = *m;
        } else {
            throw ConfigError("unknown config key \"" + key + "\"");
        }
    }
}

void PipelineConfig::validate(bool need_input, bool need_evaluation_inputs) const {
    if (candidates < 1) throw ConfigError("candidate count must be >= 1");
    if (max_iterations < 1) throw ConfigError("iteration cap must be >= 1");
    if (max_restarts < 1) throw ConfigError("restart cap must be >= 1");
    if (workers < 1) throw ConfigError("worker count must be >= 1");
    auto must_exist = [](const fs::path& p, const char* what) {
        if (p.empty()) throw ConfigError(std::string(what) + " is required");
        if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
    };
    for (const auto& p : knowledge_base) must_exist(p, "knowledge base file");
    for (const auto& p : table_overrides) must_exist(p, "table override file");
    if (backend.kind == "scripted_mock") must_exist(backend.replay_file, "replay file");
    if (need_input) must_exist(input, "input file");
    if (need_evaluation_inputs) must_exist(truths, "ground-truth file");
}

// ---- inputs -----------------------------------------------------------------

namespace {

std::string default_id(std::size_t index) {
    std::ostringstream s;
    s << "ioc-" << std::setw(4) << std::setfill('0') << index + 1;
    return s.str();
}

}  // namespace

std::vector<InputIoc> read_inputs(const fs::path& file) {
    std::vector<InputIoc> out;
    if (file.extension() == ".json") {
        const auto doc = read_json_file(file);
        if (!doc.is_array()) throw ConfigError(file.string() + ": input must be a JSON array");
        for (std::size_t i = 0; i < doc.size(); ++i) {
            const auto& e = doc[i];
            if (e.is_string()) {
                out.push_back({default_id(i), e.get<std::string>()});
            } else if (e.is_object() && e.contains("ioc") && e["ioc"].is_string()) {
                out.push_back({e.contains("id") ? e["id"].get<std::string>() : default_id(i), e["ioc"].get<std::string>()});
            } else {
                throw ConfigError(file.string() + ": record " + std::to_string(i) + " must be a string or {\"ioc\": ...}");
            }
        }
        return out;
    }
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError(file.string() + ": cannot open file");
    std::size_t index = 0;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        out.push_back({default_id(index++), std::string(t)});
    }
    return out;
}

json summary_to_json(const RunSummary& s, const PipelineConfig& config) {
    return {{"inputs", s.inputs},
            {"excluded", s.excluded},
            {"rejected", s.rejected},
            {"processed", s.processed},
            {"generated", s.generated},
            {"failed", s.failed},
            {"backend_calls", s.backend_calls},
            {"by_kind", s.by_kind},
            {"mode", to_string(config.mode)},
            {"backend", config.backend.kind},
            {"seed", config.seed},
            {"candidates", config.candidates}};
}

// ---- generate ---------------------------------------------------------------

PipelineContext PipelineContext::load(const PipelineConfig& config) {
    PipelineContext ctx;
    try {
        ctx.store = KnowledgeStore::ingest(config.knowledge_base);
    } catch (const KnowledgeBaseError& e) {
        throw ConfigError(e.what());
    }
    ctx.tables = NormalizationTables::defaults();
    for (const auto& p : config.table_overrides) {
        try {
            ctx.tables.merge_file(p);
        } catch (const std::runtime_error& e) {
            throw ConfigError(e.what());
        }
    }
    try {
        ctx.backend = make_backend(config.backend);
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
    }
    return ctx;
}

namespace {

enum class Outcome { excluded, rejected, broken, generated, failed };

struct ItemResult {
    Outcome outcome = Outcome::excluded;
    std::string kind;
    json product;
    json rejection;
    json annotation;
    json trace;
    std::size_t backend_calls = 0;
};

json rejection(const InputIoc& in, const char* stage, const std::string& reason) {
    return {{"ioc_id", in.id}, {"ioc", in.text}, {"stage", stage}, {"reason", reason}};
}

ItemResult process(const InputIoc& in, const Normalizer& normalizer, const GeneratorBackend& backend,
                   const PipelineConfig& config, std::size_t index) {
    ItemResult out;
    IocKind kind;
    try {
        kind = normalizer.classify(in.text);
    } catch (const ClassificationError& e) {
        out.rejection = rejection(in, "classify", e.what());
        return out;
    }
    out.kind = std::string(to_string(kind));
    if (kind == IocKind::other) {
        out.rejection = rejection(in, "classify", "kind other: not a path, registry key or command line");
        return out;
    }

    IocRecord record;
    try {
        record = normalizer.make_record(in.text, kind, in.id);
    } catch (const std::exception& e) {
        out.outcome = Outcome::broken;
        out.rejection = rejection(in, "normalize", e.what());
        return out;
    }

    const auto found = find_groups(record, normalizer.store());
    const bool bypass = config.mode == AblationMode::no_capture || config.mode == AblationMode::neither;
    out.annotation = annotation_to_json(found);
    out.annotation["ioc_id"] = in.id;
    if (!bypass && !found.kept()) {
        out.outcome = Outcome::rejected;
        out.rejection = rejection(in, "filter", kNoCaptureGroup);
        return out;
    }
    const auto working = bypass ? bypass_groups(record) : found;
    if (!working.kept()) {
        out.outcome = Outcome::rejected;
        out.rejection = rejection(in, "filter", "no components");
        return out;
    }

    WorkflowOptions workflow;
    workflow.max_iterations = config.max_iterations;
    workflow.max_restarts = config.max_restarts;
    workflow.single_shot = config.mode == AblationMode::no_reasoning || config.mode == AblationMode::neither;
    const auto seed = splitmix64(config.seed ^ splitmix64(index));
    const auto selection = select_best(working, backend, config.candidates, seed, workflow);

    json runs = json::array();
    for (const auto& t : selection.traces) {
        runs.push_back(trace_to_json(t));
        out.backend_calls += t.backend_calls;
    }
    out.trace = {{"ioc_id", in.id}, {"runs", runs}};

    if (!selection.best) {
        out.outcome = Outcome::failed;
        out.rejection = rejection(in, "generate", "no candidate passed the workflow");
        return out;
    }
    const auto& best = *selection.best;
    out.outcome = Outcome::generated;
    out.product = {{"ioc_id", in.id},
                   {"ioc", in.text},
                   {"normalized", record.normalized},
                   {"kind", to_string(kind)},
                   {"capture_groups", found.keep_components()},
                   {"pattern", best.pattern},
                   {"score", best.score},
                   {"n_cg", best.n_cg},
                   {"n_wc", best.n_wc},
                   {"candidates_considered", selection.candidates.size()}};
    return out;
}

}  // namespace

GenerateOutput generate_products(const std::vector<InputIoc>& inputs, const PipelineContext& context,
                                 const PipelineConfig& config) {
    const Normalizer normalizer(context.store, context.tables);
    std::vector<ItemResult> results(inputs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < inputs.size(); i = next++)
            results[i] = process(inputs[i], normalizer, *context.backend, config, i);
    };
    const std::size_t n = std::min(config.workers, std::max<std::size_t>(1, inputs.size()));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    GenerateOutput out;
    auto& s = out.summary;
    s.inputs = inputs.size();
    for (auto& r : results) {
        if (!r.kind.empty()) ++s.by_kind[r.kind];
        if (!r.annotation.is_null()) out.annotations.push_back(std::move(r.annotation));
        if (!r.trace.is_null()) out.traces.push_back(std::move(r.trace));
        if (!r.rejection.is_null()) out.rejections.push_back(std::move(r.rejection));
        s.backend_calls += r.backend_calls;
        switch (r.outcome) {
        case Outcome::excluded: ++s.excluded; break;
        case Outcome::broken:
            ++s.rejected;
            ++s.failed;
            break;
        case Outcome::rejected: ++s.rejected; break;
        case Outcome::generated:
            ++s.processed;
            ++s.generated;
            out.products.push_back(std::move(r.product));
            break;
        case Outcome::failed:
            ++s.processed;
            ++s.failed;
            break;
        }
    }
    out.exit_code = s.failed > 0 ? 2 : 0;
    return out;
}

GenerateOutput run_generate(const PipelineConfig& config) {
    config.validate(true, false);
    if (config.output_dir.empty()) throw ConfigError("output directory is required");
    const auto inputs = read_inputs(config.input);
    const auto context = PipelineContext::load(config);
    auto out = generate_products(inputs, context, config);
    write_json_file(config.output_dir / "products.json", out.products);
    write_json_file(config.output_dir / "rejections.json", out.rejections);
    write_json_file(config.output_dir / "annotations.json", out.annotations);
    write_json_file(config.output_dir / "traces.json", out.traces);
    write_json_file(config.output_dir / "summary.json", summary_to_json(out.summary, config));
    return out;
}

// ---- evaluate ---------------------------------------------------------------

EvaluateOutput evaluate_products(const json& products, const json& truths_doc, const Normalizer& normalizer,
                                 const std::string& products_name, const std::string& truths_name,
                                 json* matrix_out) {
    auto regexes = regexes_from_products(products, products_name);
    auto truths = truths_from_json(truths_doc, truths_name);
    prepare_truths(truths, normalizer);

    EvaluateOutput out;
    out.reports = evaluate(regexes, truths);
    json reports = json::array();
    for (const auto& r : out.reports) reports.push_back(report_to_json(r));
    out.report = {{"reports", reports}};
    if (matrix_out) *matrix_out = matrix_to_json(regexes, truths, match_matrix(regexes, truths));
    return out;
}

EvaluateOutput run_evaluate(const PipelineConfig& config) {
    config.validate(false, true);
    if (config.products.empty() || !fs::exists(config.products))
        throw ConfigError("products file not found: " + config.products.string());
    if (config.report.empty()) throw ConfigError("report path is required");
    auto store = KnowledgeStore::ingest(config.knowledge_base);
    auto tables = NormalizationTables::defaults();
    for (const auto& p : config.table_overrides) tables.merge_file(p);
    const Normalizer normalizer(store, tables);

    json matrix;
    auto out = evaluate_products(read_json_file(config.products), read_json_file(config.truths), normalizer,
                                 config.products.string(), config.truths.string(),
                                 config.matrix.empty() ? nullptr : &matrix);
    write_json_file(config.report, out.report);
    if (!config.matrix.empty()) write_json_file(config.matrix, matrix);
    return out;
}

AblationOutput run_ablation(PipelineConfig config, AblationMode mode) {
    config.mode = mode;
    config.validate(true, true);
    AblationOutput out;
    out.generation = run_generate(config);
    config.products = config.output_dir / "products.json";
    if (config.report.empty()) config.report = config.output_dir / "report.json";
    out.evaluation = run_evaluate(config);
    return out;
}

}  // namespace iocregex
