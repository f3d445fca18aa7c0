// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fail.

#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "iocregex/pipeline.hpp"
#include "iocregex/regex.hpp"
#include "oracles.hpp"
#include "paths.hpp"

using namespace iocregex;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Time limits in seconds, per criterion. 0 means untimed.
constexpr double kLimit[10] = {0, 5.0, 5.0, 1.0, 10.0, 0, 0, 30.0, 0, 0};
constexpr double kSimilarityTol = 1e-9;
constexpr double kMinHitRate = 0.95;
constexpr double kMaxMeanFpr = 0.05;

struct Result {
    bool ok = true;
    std::ostringstream detail;

    void expect(bool cond, const std::string& what) {
        if (!cond && ok) detail << what;
        ok = ok && cond;
    }
};

const KnowledgeStore& store() { return testing_paths::starter_store(); }

const Normalizer& normalizer() {
    static const Normalizer n(store());
    return n;
}

GroupAnnotation annotate(std::string_view ioc) { return find_groups(normalizer().make_record(ioc), store()); }

KnowledgeStore store_of(const json& doc) { return KnowledgeStore::from_documents({doc}, {"inline"}); }

IocRecord record_of(IocKind kind, std::vector<std::string> components) {
    IocRecord r;
    r.kind = kind;
    r.components = std::move(components);
    for (std::size_t i = 0; i < r.components.size(); ++i) r.normalized += (i ? "\\" : "") + r.components[i];
    r.raw = r.normalized;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("iocregex-acceptance-" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

const char* kTask =
    "schtasks /create /s <remote_host> /u \"<username>\" /p \"<password>\" /ru \"SYSTEM\" /tn one /sc DAILY "
    "/tr \"c:\\users\\public\\11.bat\" /F";

// ---- criteria ---------------------------------------------------------------

void path_oracle(Result& r) {
    std::mt19937_64 rng(1001);
    int mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        auto in = oracle::random_path_instance(rng);
        auto a = find_path_groups(record_of(IocKind::file_path, in.components), store_of(in.doc));
        const auto expected = oracle::longest_adjacent_run(in.components, in.names, in.edges);
        const auto got = a.capture_sequences.empty() ? std::vector<std::size_t>{} : a.capture_sequences[0];
        if (got != expected || a.capture_sequences.size() > 1) ++mismatches;
    }
    r.expect(mismatches == 0, std::to_string(mismatches) + " of 1000 instances differ");
    r.detail << "1000 instances";
}

void command_oracle(Result& r) {
    std::mt19937_64 rng(1002);
    int mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        auto in = oracle::random_command_instance(rng);
        auto a = find_command_groups(record_of(IocKind::command_line, in.components), store_of(in.doc));
        if (a.sequence_texts() != oracle::interpret_command_pseudocode(in)) ++mismatches;
    }
    r.expect(mismatches == 0, std::to_string(mismatches) + " of 1000 instances differ");
    r.detail << "1000 instances";
}

void worked_examples(Result& r) {
    using Texts = std::vector<std::vector<std::string>>;
    auto path = annotate("C:\\Users\\Public\\11.bat");
    r.expect(path.sequence_texts() == Texts{{"Users", "Public"}}, "file path groups; ");

    auto task = annotate(kTask);
    r.expect(task.sequence_texts() == Texts{{"schtasks", "/create", "/s", "/u", "/p", "/ru", "/tn", "/sc", "/tr", "/F"}},
             "schtasks sequence; ");
    r.expect(task.discard_components() == std::vector<std::string>{"<remote_host>", "<username>", "<password>", "SYSTEM",
                                                                   "one", "DAILY", "c:\\users\\public\\11.bat"},
             "schtasks discards; ");

    std::vector<GroundTruth> truths{
        {"c:\\windows\\system32\\pscp.exe", IocKind::file_path, {"windows", "system32"}, "d", {}},
        {"c:\\users\\pam\\desktop\\rcs.3aka3.doc", IocKind::file_path, {"users", "desktop"}, "d", {}},
    };
    prepare_truths(truths, normalizer());
    const ScoredRegex certutil{"certutil", "(?i)c:\\\\", {"Windows", "System32"}, "", 0};
    auto reports = evaluate({certutil}, truths);
    r.expect(reports.size() == 1 && reports[0].false_positive_pairs == 1, "certutil false positives; ");
    r.detail << "3 examples";
}

struct Scenario {
    std::string family;
    const GroupAnnotation* annotation;
    std::vector<std::string> script;
    bool expect_final;
    std::size_t expect_restarts;
};

void workflow_guarantees(Result& r) {
    const std::vector<GroupAnnotation> annotations{
        annotate("C:\\Users\\Public\\11.bat"),
        annotate("C:\\Windows\\System32\\evil.dll"),
        annotate("HKEY_CURRENT_USER\\Software\\Microsoft\\Windows\\CurrentVersion\\Run\\upd"),
        annotate(kTask),
        annotate("C:\\ProgramData\\Microsoft\\Windows\\StartMenu\\Programs\\StartUp\\evil.exe"),
    };
    const std::string miss = "qq_no_match_qq";
    const WorkflowOptions options;
    std::vector<Scenario> scenarios;
    for (std::size_t i = 0; i < 25; ++i) {
        const auto* a = &annotations[i % annotations.size()];
        scenarios.push_back({"always-broken", a, {i % 2 ? "(unclosed" : "a[b"}, false, options.max_restarts - 1});
        scenarios.push_back({"always-universal", a, {".*"}, false, options.max_restarts - 1});
        const std::size_t n = 1 + i % 10;
        std::vector<std::string> eventually(n - 1, miss);
        eventually.push_back("{{template}}");
        scenarios.push_back({"eventually-correct", a, eventually, true, 0});
        const std::size_t passes = 1 + i % 4;
        std::vector<std::string> restart(passes * options.max_iterations, miss);
        restart.push_back("{{template}}");
        scenarios.push_back({"after-restart", a, restart, true, passes});
    }

    std::map<std::string, int> failures;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        const auto& sc = scenarios[s];
        const auto backend = ScriptedBackend::of(sc.script);
        const auto [final, trace] = generate(*sc.annotation, backend, s, options);
        bool ok = trace.restarts < options.max_restarts;
        std::map<std::pair<std::size_t, Stage>, std::size_t> per_loop;
        for (const auto& at : trace.attempts) ++per_loop[{at.restart, at.stage}];
        for (const auto& [key, count] : per_loop) ok = ok && count <= options.max_iterations;
        ok = ok && final.has_value() == sc.expect_final && trace.restarts == sc.expect_restarts;
        if (final) {
            const auto& a = *sc.annotation;
            ok = ok && rx::Regex::compile(*final).search(a.record.normalized);
            ok = ok && noncapture_check(*final, a).pass;
            ok = ok && overgen_check(*final, splitmix64(s), a.keep_components()).pass;
        }
        if (!ok) ++failures[sc.family];
    }
    for (const auto& [family, n] : failures) r.expect(false, family + ": " + std::to_string(n) + " failed; ");
    r.detail << scenarios.size() << " scenarios";
}

GroupAnnotation with_keep(const std::vector<std::string>& keep) {
    GroupAnnotation a;
    a.record.kind = IocKind::file_path;
    a.record.components = keep;
    a.record.components.push_back("discarded.tmp");
    a.labels.assign(keep.size(), GroupLabel::keep);
    a.labels.push_back(GroupLabel::discard);
    auto& seq = a.capture_sequences.emplace_back();
    for (std::size_t i = 0; i < keep.size(); ++i) seq.push_back(i);
    return a;
}

void grading_oracle(Result& r) {
    std::mt19937_64 rng(1005);
    int mismatches = 0;
    for (int i = 0; i < 200; ++i) {
        auto g = oracle::random_grading_case(rng);
        auto c = grade(g.pattern, with_keep(g.keep));
        if (c.n_cg != g.n_cg || c.n_wc != g.n_wc || c.score != g.n_cg - g.n_wc) ++mismatches;
    }
    r.expect(mismatches == 0, std::to_string(mismatches) + " of 200 patterns differ; ");
    auto startup = annotate("C:\\ProgramData\\Microsoft\\Windows\\StartMenu\\Programs\\StartUp\\evil.exe");
    auto c = grade("(?i).*ProgramData\\\\Microsoft\\\\Windows\\\\StartMenu\\\\Programs\\\\StartUp.*", startup);
    r.expect(c.n_cg == 6 && c.score == 6, "StartUp exemplar graded n_cg " + std::to_string(c.n_cg) + " score " +
                                              std::to_string(c.score) + "; ");
    r.detail << "200 patterns, exemplar n_cg " << c.n_cg << " score " << c.score;
}

void metrics_fixture(Result& r) {
    auto truths = truths_from_json(read_json_file(testing_paths::fixture("metrics/truths.json")), "truths.json");
    prepare_truths(truths, normalizer());
    auto regexes =
        regexes_from_products(read_json_file(testing_paths::fixture("metrics/products.json")), "products.json");
    auto reports = evaluate(regexes, truths);
    r.expect(reports.size() == 2, "expected two datasets; ");
    if (reports.size() == 2) {
        const auto& d1 = reports[0];
        const auto& d2 = reports[1];
        r.expect(d1.matched == 6 && d1.total == 8 && d1.hit_rate == 0.75, "ds1 hit rate; ");
        r.expect(d1.unmatched_by_kind.at(IocKind::registry_key) == 1 &&
                     d1.unmatched_by_kind.at(IocKind::command_line) == 1,
                 "ds1 unmatched by kind; ");
        const std::vector<std::optional<double>> fprs{0.0, 0.5, 0.0, 0.0};
        bool same = d1.per_regex_fpr.size() >= fprs.size();
        for (std::size_t i = 0; same && i < fprs.size(); ++i) same = d1.per_regex_fpr[i].second == fprs[i];
        r.expect(same, "ds1 per-regex fpr; ");
        r.expect(d1.mean_fpr == std::optional<double>(0.125) && d1.false_positive_pairs == 1, "ds1 mean fpr; ");
        r.expect(d2.matched == 2 && d2.hit_rate == 0.5, "ds2 hit rate; ");
        r.expect(d2.unmatched_by_kind.at(IocKind::file_path) == 1, "ds2 unmatched by kind; ");
        r.expect(d2.mean_fpr == std::optional<double>(1.0) && d2.false_positive_pairs == 2, "ds2 mean fpr; ");
    }
    const double sim = similarity("abc", "abd");
    const double cos = structural_similarity("(a)+", "[b]*");
    r.expect(std::abs(sim - 2.0 / 3.0) <= kSimilarityTol, "similarity; ");
    r.expect(std::abs(cos - 0.5) <= kSimilarityTol, "structural cosine; ");
    r.detail << "similarity " << std::setprecision(4) << sim << ", cosine " << cos;
}

PipelineConfig e2e_config(const fs::path& out) {
    PipelineConfig c;
    c.knowledge_base = {testing_paths::data("windows_starter_kb.json")};
    c.input = testing_paths::fixture("e2e/iocs.json");
    c.truths = testing_paths::fixture("e2e/truths.json");
    c.output_dir = out;
    return c;
}

double average_fpr(const EvaluateOutput& e) {
    double sum = 0;
    for (const auto& rep : e.reports) sum += rep.mean_fpr.value_or(0.0);
    return e.reports.empty() ? 0 : sum / e.reports.size();
}

double average_hit(const EvaluateOutput& e) {
    double sum = 0;
    for (const auto& rep : e.reports) sum += rep.hit_rate;
    return e.reports.empty() ? 0 : sum / e.reports.size();
}

void end_to_end(Result& r) {
    TempDir dir;
    auto a = run_ablation(e2e_config(dir.path / "a"), AblationMode::full);
    auto b = run_ablation(e2e_config(dir.path / "b"), AblationMode::full);
    r.expect(!a.evaluation.reports.empty(), "no reports; ");
    for (const auto& rep : a.evaluation.reports) {
        r.expect(rep.hit_rate >= kMinHitRate, rep.dataset_id + " hit rate below threshold; ");
        r.expect(rep.mean_fpr && *rep.mean_fpr <= kMaxMeanFpr, rep.dataset_id + " mean FPR above threshold; ");
        r.detail << rep.dataset_id << " hit " << std::fixed << std::setprecision(1) << rep.hit_rate * 100 << "% fpr "
                 << rep.mean_fpr.value_or(-1) * 100 << "%; ";
    }
    r.expect(a.generation.products == b.generation.products, "products differ between runs; ");
}

void ablation_direction(Result& r) {
    TempDir dir;
    auto full = run_ablation(e2e_config(dir.path / "full"), AblationMode::full);
    auto cr = run_ablation(e2e_config(dir.path / "cr"), AblationMode::no_capture);
    const double f_fpr = average_fpr(full.evaluation), cr_fpr = average_fpr(cr.evaluation);
    r.expect(f_fpr <= cr_fpr, "full mean FPR above -CR; ");

    auto replay = [&](const fs::path& out) {
        auto c = e2e_config(out);
        c.backend.kind = "scripted_mock";
        c.backend.replay_file = testing_paths::fixture("e2e/replay_first_fail.json");
        return c;
    };
    auto reasoning = run_ablation(replay(dir.path / "replay-full"), AblationMode::full);
    auto single = run_ablation(replay(dir.path / "replay-c-r"), AblationMode::no_reasoning);
    const double h_full = average_hit(reasoning.evaluation), h_single = average_hit(single.evaluation);
    r.expect(h_full >= h_single, "reasoning hit rate below single shot; ");
    r.detail << std::fixed << std::setprecision(1) << "FPR full " << f_fpr * 100 << "% vs -CR " << cr_fpr * 100
             << "%; hit full " << h_full * 100 << "% vs C-R " << h_single * 100 << "%";
}

void reproducibility(Result& r) {
    TempDir dir;
    run_ablation(e2e_config(dir.path / "a"), AblationMode::full);
    run_ablation(e2e_config(dir.path / "b"), AblationMode::full);
    for (const char* f : {"products.json", "report.json"}) {
        const auto x = slurp(dir.path / "a" / f), y = slurp(dir.path / "b" / f);
        r.expect(!x.empty() && x == y, std::string(f) + " differs; ");
    }
    r.detail << "products.json and report.json compared";
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Result&)>>> criteria{
        {"path capture oracle", path_oracle},
        {"command capture oracle", command_oracle},
        {"worked examples", worked_examples},
        {"workflow guarantees", workflow_guarantees},
        {"grading oracle", grading_oracle},
        {"metrics fixture", metrics_fixture},
        {"synthetic end-to-end", end_to_end},
        {"ablation direction", ablation_direction},
        {"reproducibility", reproducibility},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Result r;
        const auto start = std::chrono::steady_clock::now();
        try {
            criteria[i].second(r);
        } catch (const std::exception& e) {
            r.expect(false, std::string("exception: ") + e.what() + "; ");
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const double limit = kLimit[i + 1];
        if (limit > 0) r.expect(secs < limit, "over time limit; ");
        if (!r.ok) ++failed;
        std::cout << (r.ok ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << " (" << std::fixed
                  << std::setprecision(3) << secs << "s";
        if (limit > 0) std::cout << " < " << std::setprecision(0) << limit << "s";
        std::cout << "): " << r.detail.str() << "\n";
    }
    return failed ? 1 : 0;
}
