#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "iocregex/generation.hpp"
#include "iocregex/regex.hpp"
#include "iocregex/text.hpp"
#include "paths.hpp"

using namespace iocregex;

namespace {

const Normalizer& normalizer() {
    static const Normalizer n(testing_paths::starter_store());
    return n;
}

GroupAnnotation annotate(std::string_view ioc) {
    return find_groups(normalizer().make_record(ioc), testing_paths::starter_store());
}

const GroupAnnotation& users_public() {
    static const auto a = annotate("C:\\Users\\Public\\11.bat");
    return a;
}

constexpr const char* kGood = "(?i).*Users\\\\Public\\\\.*";

/// Compares against tests/fixtures/prompts/<name>; rewrites the file when
/// IOCREGEX_UPDATE_GOLDEN is set.
void check_golden(const std::string& name, const std::string& actual) {
    const auto path = testing_paths::fixture("prompts/" + name);
    if (std::getenv("IOCREGEX_UPDATE_GOLDEN")) {
        std::ofstream(path, std::ios::binary) << actual;
        return;
    }
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing golden " << path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() == actual);
}

std::size_t count(const WorkflowTrace& t, Stage stage, Verdict verdict) {
    return static_cast<std::size_t>(std::count_if(t.attempts.begin(), t.attempts.end(), [&](const Attempt& a) {
        return a.stage == stage && a.verdict == verdict;
    }));
}

/// Backend that answers from a fixed pool using a per-run RNG, for bound
/// checks. Thread-compatible only; the tests call it from one thread.
class RandomBackend final : public GeneratorBackend {
public:
    explicit RandomBackend(std::uint64_t seed) : rng_(seed) {}
    std::string_view kind() const override { return "random"; }
    std::string propose(const GenerationRequest&) const override {
        static const std::vector<std::string> pool{
            "(unclosed", ".*", "(?i).*Users\\\\Public\\\\11\\.bat", "(?i).*Publik.*", "(?i).*(Users\\\\Public)?.*",
            "(?i).*Users\\\\Public.*", "Users/Public", "ERROR"};
        const auto& p = pool[rng_() % pool.size()];
        if (p == "ERROR") throw BackendError("simulated outage");
        return p;
    }

private:
    mutable std::mt19937_64 rng_;
};

}  // namespace

TEST_SUITE("generation") {

TEST_CASE("debug check") {
    const std::string target = "C:\\Users\\Public\\11.bat";
    CHECK(debug_check("(?i).*Users\\\\Public.*", target).pass);

    auto d = debug_check("Users/Public", target);
    CHECK_FALSE(d.pass);
    CHECK(d.failing_token == "/");
    CHECK(d.failing_token_offset == 5);
    CHECK(d.matched_prefix == "Users");
    CHECK(d.target_offset == 8);
    CHECK(d.diagnostic.find("\"Users\"") != std::string::npos);
    CHECK(d.diagnostic.find("token \"/\"") != std::string::npos);

    auto s = debug_check("(unclosed", target);
    CHECK_FALSE(s.pass);
    CHECK(s.syntax_offset == std::optional<std::size_t>(0));
    CHECK(s.diagnostic.rfind("syntax error at offset 0", 0) == 0);
}

TEST_CASE("debug verdict agrees with the engine") {
    std::mt19937_64 rng(5);
    const std::vector<std::string> pieces{"a", "b", "\\\\", ".", ".*", "[ab]+", "(?:a|b)", "b?", "\\d", "x"};
    const std::string alphabet = "ab\\1x";
    for (int i = 0; i < 2000; ++i) {
        std::string p = rng() % 2 ? "(?i)" : "";
        for (std::size_t k = 0, n = 1 + rng() % 5; k < n; ++k) p += pieces[rng() % pieces.size()];
        std::string t(rng() % 10, ' ');
        for (auto& c : t) c = alphabet[rng() % alphabet.size()];
        CAPTURE(p);
        CAPTURE(t);
        CHECK(debug_check(p, t).pass == rx::Regex::compile(p).search(t));
    }
}

TEST_CASE("noncapture check") {
    const auto& a = users_public();
    CHECK(noncapture_check(kGood, a).pass);

    auto bad = noncapture_check("(?i).*Users\\\\Public\\\\11\\.bat", a);
    CHECK_FALSE(bad.pass);
    CHECK(bad.present_discard == std::vector<std::string>{"11.bat"});
    CHECK(bad.missing_keep.empty());

    auto missing = noncapture_check("(?i).*Public.*", a);
    CHECK(missing.missing_keep == std::vector<std::string>{"users"});
    CHECK(missing.diagnostic.find("\"users\"") != std::string::npos);

    CHECK(noncapture_check("(?i).*USERS\\\\public.*", a).pass);

    GroupAnnotation none = a;
    none.capture_sequences.clear();
    none.labels.assign(none.labels.size(), GroupLabel::discard);
    CHECK_THROWS_AS(noncapture_check(kGood, none), std::invalid_argument);
}

TEST_CASE("discard inside a keep component is tolerated") {
    auto a = annotate("C:\\Windows\\System32\\sys.dll");
    REQUIRE(a.kept());
    GroupAnnotation b = a;
    b.record.components.push_back("System");
    b.labels.push_back(GroupLabel::discard);
    CHECK(noncapture_check("(?i).*Windows\\\\System32\\\\.*", b).pass);
    CHECK_FALSE(noncapture_check("(?i).*Windows\\\\System32\\\\.*System\\b.*", b).pass);
}

TEST_CASE("probe strings") {
    const std::vector<std::string> keep{"Users", "Public"};
    auto s = random_probe_strings(0, keep);
    REQUIRE(s.size() == kOvergenSamples);
    for (const auto& x : s) {
        CHECK(x.size() >= 8);
        CHECK(x.size() <= 64);
        for (char c : x) {
            CHECK(c >= 33);
            CHECK(c <= 126);
        }
        for (const auto& k : keep) CHECK_FALSE(text::icontains(x, k));
    }
    CHECK(random_probe_strings(0, keep) == s);
    CHECK(random_probe_strings(1, keep) != s);
}

TEST_CASE("overgen check") {
    auto universal = overgen_check(".*", 0);
    CHECK_FALSE(universal.pass);
    CHECK(universal.matched.size() == 10);

    auto specific = overgen_check("(?i).*Users\\\\Public.*", 0, {"Users", "Public"});
    CHECK(specific.pass);
    CHECK(specific.matched.empty());

    const auto samples = random_probe_strings(7, {});
    std::string nine;
    for (std::size_t i = 0; i < 9; ++i) nine += (i ? "|" : "") + rx::escape(samples[i]);
    auto r = overgen_check("^(?:" + nine + ")$", 7);
    CHECK(r.matched.size() == 9);
    CHECK(r.pass);
}

TEST_CASE("template backend") {
    CHECK(TemplateBackend::render(users_public()) == kGood);
    auto [final, trace] = generate(users_public(), TemplateBackend{}, 0);
    REQUIRE(final.has_value());
    CHECK(*final == kGood);
    CHECK(trace.restarts == 0);
    CHECK(trace.backend_calls == 1);
    CHECK(count(trace, Stage::overgen, Verdict::pass) == 1);

    auto cmd = annotate("cmd.exe /c curl --get http://x");
    CHECK(TemplateBackend::render(cmd) == "(?i).*cmd\\s+/c.*curl\\s+--get.*");
    auto reg = annotate("HKEY_CURRENT_USER\\Software\\Microsoft\\Windows\\CurrentVersion\\Run");
    CHECK(TemplateBackend::render(reg) == "(?i).*HKCU\\\\Software\\\\Microsoft\\\\Windows\\\\CurrentVersion\\\\Run.*");
}

TEST_CASE("broken pattern then a fixed one") {
    auto backend = ScriptedBackend::of({"(?i).*Users\\\\Publik.*", kGood});
    auto [final, trace] = generate(users_public(), backend, 0);
    REQUIRE(final.has_value());
    CHECK(*final == kGood);
    CHECK(count(trace, Stage::debug, Verdict::fail) == 1);
    CHECK(trace.restarts == 0);
    CHECK(trace.backend_calls == 2);
}

TEST_CASE("universal pattern never becomes final") {
    // ".*" lacks the keep literals, so it is stopped by the noncapture loop.
    auto [none, t1] = generate(users_public(), ScriptedBackend::of({".*"}), 0);
    CHECK_FALSE(none.has_value());
    CHECK(t1.restarts == 4);
    CHECK(count(t1, Stage::noncapture, Verdict::pass) == 0);

    // With the keep literals in an optional group it reaches overgen and
    // fails there on every pass.
    auto [none2, t2] = generate(users_public(), ScriptedBackend::of({"(?i).*(Users\\\\Public)?.*"}), 0);
    CHECK_FALSE(none2.has_value());
    CHECK(t2.restarts == 4);
    CHECK(count(t2, Stage::overgen, Verdict::fail) == 5);
    CHECK(count(t2, Stage::overgen, Verdict::pass) == 0);
    CHECK(t2.backend_calls == 5);
}

TEST_CASE("eventually correct within one pass") {
    std::vector<std::string> script(9, "Users/Public");
    script.push_back(kGood);
    auto [final, trace] = generate(users_public(), ScriptedBackend::of(script), 0);
    REQUIRE(final.has_value());
    CHECK(trace.restarts == 0);
    CHECK(count(trace, Stage::debug, Verdict::fail) == 9);
}

TEST_CASE("ten failed debug rounds force a restart") {
    std::vector<std::string> script(10, "Users/Public");
    script.push_back(kGood);
    auto [final, trace] = generate(users_public(), ScriptedBackend::of(script), 0);
    REQUIRE(final.has_value());
    CHECK(trace.restarts == 1);
    CHECK(count(trace, Stage::debug, Verdict::fail) == 10);
    for (const auto& a : trace.attempts)
        if (a.verdict == Verdict::fail) CHECK(a.restart == 0);
}

TEST_CASE("noncapture loop is capped too") {
    std::vector<std::string> script(10, "(?i).*Users\\\\Public\\\\11\\.bat");
    script.push_back(kGood);
    auto [final, trace] = generate(users_public(), ScriptedBackend::of(script), 0);
    REQUIRE(final.has_value());
    CHECK(trace.restarts == 1);
    CHECK(count(trace, Stage::noncapture, Verdict::fail) == 10);
}

TEST_CASE("backend errors are recorded and bounded") {
    auto backend = ScriptedBackend::from_json(nlohmann::json::array({{{"error", "connection refused"}}}));
    auto [final, trace] = generate(users_public(), backend, 0);
    CHECK_FALSE(final.has_value());
    CHECK(trace.backend_calls == 5);
    CHECK(count(trace, Stage::debug, Verdict::error) == 5);
    CHECK(trace.attempts[0].diagnostic.find("connection refused") != std::string::npos);

    auto flaky = ScriptedBackend::from_json(nlohmann::json::array({{{"error", "timeout"}}, kGood}));
    auto [ok, t2] = generate(users_public(), flaky, 0);
    CHECK(ok == std::optional<std::string>(kGood));
    CHECK(t2.restarts == 1);
}

TEST_CASE("single shot") {
    WorkflowOptions opt;
    opt.single_shot = true;
    auto [a, t1] = generate(users_public(), ScriptedBackend::of({"(unclosed", kGood}), 0, opt);
    CHECK_FALSE(a.has_value());
    CHECK(t1.backend_calls == 1);
    auto [b, t2] = generate(users_public(), ScriptedBackend::of({"nothing\\.like\\.it"}), 0, opt);
    CHECK(b == std::optional<std::string>("nothing\\.like\\.it"));
}

TEST_CASE("scripted runs and directives") {
    auto backend = ScriptedBackend::from_json({{"runs", {{"{{template}}"}, {"{{exact}}"}}}});
    WorkflowOptions opt;
    opt.run_index = 0;
    CHECK(generate(users_public(), backend, 0, opt).first == std::optional<std::string>(kGood));
    opt.run_index = 1;
    GenerationRequest req;
    req.annotation = &users_public();
    req.run_index = 1;
    CHECK(backend.propose(req) == "(?i)" + rx::escape("C:\\Users\\Public\\11.bat"));
    req.run_index = 7;  // clamps to the last run
    CHECK(backend.propose(req) == backend.propose([&] {
              auto r = req;
              r.run_index = 1;
              return r;
          }()));
    CHECK_THROWS(ScriptedBackend::from_json({{"emissions", nlohmann::json::array()}}));
    BackendConfig bad;
    bad.kind = "nope";
    CHECK_THROWS(make_backend(bad));
}

TEST_CASE("reply parsing") {
    CHECK(extract_pattern("```regex\n(?i).*a.*\n```\nsome words") == "(?i).*a.*");
    CHECK(extract_pattern("\n\n  (?i).*b.*  \nmore") == "(?i).*b.*");
    CHECK(extract_pattern("`x+`") == "x+");
    CHECK(extract_pattern("").empty());
}

TEST_CASE("workflow bounds and final guarantees under random backends") {
    const std::vector<GroupAnnotation> inputs{users_public(), annotate("C:\\Windows\\System32\\evil.dll")};
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const auto& a = inputs[seed % inputs.size()];
        RandomBackend backend(seed);
        auto [final, trace] = generate(a, backend, seed);
        CHECK(trace.restarts <= 4);
        CHECK(trace.backend_calls <= 5 * (1 + 10 + 10) + 5);
        std::map<std::pair<std::size_t, Stage>, std::size_t> per_loop;
        for (const auto& at : trace.attempts) ++per_loop[{at.restart, at.stage}];
        for (const auto& [key, n] : per_loop) CHECK(n <= 10);
        CHECK(final.has_value() ==
              (!trace.attempts.empty() && trace.attempts.back().stage == Stage::overgen &&
               trace.attempts.back().verdict == Verdict::pass));
        if (final) {
            CHECK(rx::Regex::compile(*final).search(a.record.normalized));
            CHECK(noncapture_check(*final, a).pass);
            CHECK(overgen_check(*final, splitmix64(seed + trace.restarts), a.keep_components()).matched.size() < 10);
        }
    }
}

TEST_CASE("generation is reproducible") {
    const auto a = annotate("C:\\Windows\\System32\\evil.dll");
    RandomBackend b1(42), b2(42);
    auto r1 = generate(a, b1, 9);
    auto r2 = generate(a, b2, 9);
    CHECK(trace_to_json(r1.second) == trace_to_json(r2.second));
    CHECK(r1.first == r2.first);
}

TEST_CASE("prompts") {
    const auto& a = users_public();
    const auto first = build_prompt(a, {});
    CHECK(first == build_prompt(a, {}));
    CHECK(first.find("C:\\Users\\Public\\11.bat") != std::string::npos);
    CHECK(first.find("Diagnostic") == std::string::npos);
    check_golden("initial.txt", first);

    const auto d = debug_check("Users/Public", a.record.normalized);
    Attempt fail_debug{"Users/Public", Stage::debug, Verdict::fail, d.diagnostic, 0};
    const auto after_debug = build_prompt(a, {fail_debug});
    CHECK(after_debug.find(d.diagnostic) != std::string::npos);
    check_golden("after_debug.txt", after_debug);

    const auto nc = noncapture_check("(?i).*Users\\\\Public\\\\11\\.bat", a);
    Attempt fail_nc{"(?i).*Users\\\\Public\\\\11\\.bat", Stage::noncapture, Verdict::fail, nc.diagnostic, 0};
    const auto after_nc = build_prompt(a, {fail_debug, fail_nc});
    CHECK(after_nc.find("\"11.bat\"") != std::string::npos);
    CHECK(after_nc.find(d.diagnostic) == std::string::npos);
    check_golden("after_noncapture.txt", after_nc);

    check_golden("restart.txt", build_prompt(a, {}, 2));
}

}
