#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "iocregex/knowledge_store.hpp"
#include "oracles.hpp"
#include "paths.hpp"

using namespace iocregex;
using nlohmann::json;

namespace {

KnowledgeStore from(const json& doc) { return KnowledgeStore::from_documents({doc}, {"test"}); }

/// Every name and every ordered name pair drawn from the union of the
/// stores' forests.
void require_query_equivalent(const KnowledgeStore& a, const KnowledgeStore& b) {
    for (auto f : {Forest::path, Forest::registry, Forest::command}) {
        auto names = a.names(f);
        auto more = b.names(f);
        names.insert(more.begin(), more.end());
        for (const auto& x : names) {
            REQUIRE(a.contains(f, x) == b.contains(f, x));
            if (f == Forest::command) REQUIRE(a.label_of(x) == b.label_of(x));
            for (const auto& y : names) REQUIRE(a.adjacent(f, x, y) == b.adjacent(f, x, y));
        }
    }
}

}  // namespace

TEST_SUITE("knowledge_store") {

TEST_CASE("path entry builds a parent-child chain with folded names") {
    auto s = from({{"paths", {"Users/Public"}}});
    CHECK(s.contains(Forest::path, "users"));
    CHECK(s.contains(Forest::path, "public"));
    CHECK(s.adjacent(Forest::path, "users", "public"));
    CHECK_FALSE(s.adjacent(Forest::path, "public", "users"));
    CHECK_FALSE(s.contains(Forest::registry, "users"));
}

TEST_CASE("empty file list gives an empty store") {
    auto s = KnowledgeStore::ingest({});
    CHECK(s.empty());
    CHECK_FALSE(s.contains(Forest::path, "users"));
    CHECK_FALSE(s.adjacent(Forest::path, "users", "public"));
    CHECK_FALSE(s.label_of("schtasks").has_value());
}

TEST_CASE("command with parameters") {
    auto s = from({{"commands", {{{"name", "curl"}, {"parameters", {"--get", "--request", "--data"}}}}}});
    CHECK(s.label_of("curl") == NodeLabel::command);
    for (auto p : {"--get", "--request", "--data"}) {
        CHECK(s.label_of(p) == NodeLabel::parameter);
        CHECK(s.adjacent(Forest::command, "curl", p));
    }
    const auto nodes = s.nodes(Forest::command);
    REQUIRE(nodes.size() == 4);
    CHECK(nodes.front().name == "curl");
    CHECK(nodes.front().children.size() == 3);
}

TEST_CASE("starter store answers the worked-example queries") {
    const auto& s = testing_paths::starter_store();
    CHECK(s.contains(Forest::path, "users"));
    CHECK_FALSE(s.contains(Forest::path, "11.bat"));
    CHECK(s.adjacent(Forest::path, "users", "public"));
    CHECK_FALSE(s.adjacent(Forest::path, "public", "users"));
    CHECK(s.adjacent(Forest::command, "schtasks", "/create"));
    CHECK(s.label_of("schtasks") == NodeLabel::command);
    CHECK(s.label_of("/create") == NodeLabel::parameter);
    CHECK_FALSE(s.label_of("<remote_host>").has_value());
    CHECK(s.adjacent(Forest::registry, "hkcu", "software"));
    for (auto c : {"cmd", "wmic", "curl", "schtasks"}) CHECK(s.label_of(c) == NodeLabel::command);
    CHECK(s.adjacent(Forest::path, "windows", "system32"));
}

TEST_CASE("queries ignore case") {
    const auto& s = testing_paths::starter_store();
    CHECK(s.contains(Forest::path, "USERS"));
    CHECK(s.adjacent(Forest::path, "UsErS", "PUBLIC"));
    CHECK(s.label_of("SchTasks") == NodeLabel::command);
    CHECK(s.adjacent(Forest::command, "SCHTASKS", "/CREATE"));
}

TEST_CASE("duplicate declarations merge") {
    auto s = from({{"paths", {"Users/Public", "users/public/Documents", "USERS/Public"}}});
    CHECK(s.node_count(Forest::path) == 3);
}

TEST_CASE("node names have no delimiters and labels sit in the right forest") {
    const auto& s = testing_paths::starter_store();
    for (auto f : {Forest::path, Forest::registry, Forest::command}) {
        for (const auto& n : s.nodes(f)) {
            CHECK_FALSE(n.name.empty());
            // Switches such as "/create" are parameter names, so only the
            // hierarchy forests are delimiter-free.
            if (f != Forest::command) CHECK(n.name.find_first_of("\\/") == std::string::npos);
            if (f == Forest::path) CHECK(n.label == NodeLabel::directory);
            if (f == Forest::registry) CHECK(n.label == NodeLabel::registry_component);
            if (f == Forest::command) {
                CHECK((n.label == NodeLabel::command || n.label == NodeLabel::parameter));
                for (const auto& child : n.children) CHECK(n.label == NodeLabel::command);
            }
            for (const auto& child : n.children) {
                CHECK(s.adjacent(f, n.name, child));
                CHECK(s.contains(f, child));
            }
        }
    }
}

TEST_CASE("schema errors") {
    CHECK_THROWS_WITH_AS(from({{"parameters", {"/c"}}}), doctest::Contains("parameters must be declared under a command"),
                         KnowledgeBaseError);
    CHECK_THROWS_WITH_AS(from({{"commands", {{{"parameters", {"/c"}}}}}}),
                         doctest::Contains("parameter declared without a parent command"), KnowledgeBaseError);
    CHECK_THROWS_AS(from({{"paths", "Users"}}), KnowledgeBaseError);
    CHECK_THROWS_AS(from({{"colors", json::array()}}), KnowledgeBaseError);
    CHECK_THROWS_AS(from({{"commands", {{{"name", "bad name"}}}}}), KnowledgeBaseError);
}

TEST_CASE("malformed file reports file and line") {
    const auto path = std::filesystem::temp_directory_path() / "iocregex_bad_kb.json";
    {
        std::ofstream out(path);
        out << "{\n  \"paths\": [\n    \"Users/Public\",\n    oops\n  ]\n}\n";
    }
    try {
        KnowledgeStore::ingest({path});
        FAIL("expected an error");
    } catch (const KnowledgeBaseError& e) {
        CHECK(e.file() == path.string());
        CHECK(e.line() == 4);
    }
    std::filesystem::remove(path);
}

TEST_CASE("round trip through export") {
    const auto& s = testing_paths::starter_store();
    auto again = from(s.export_json());
    require_query_equivalent(s, again);
    CHECK(again.export_json() == s.export_json());
    for (auto f : {Forest::path, Forest::registry, Forest::command}) {
        const auto a = s.nodes(f);
        const auto b = again.nodes(f);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].versions == b[i].versions);
    }
}

TEST_CASE("version tags are tracked per node") {
    json a = {{"versions", {"win10"}}, {"paths", {"Windows/System32"}}};
    json b = {{"versions", {"win11"}}, {"paths", {"Windows/SysWOW64"}}};
    auto s = KnowledgeStore::from_documents({a, b}, {"a", "b"});
    for (const auto& n : s.nodes(Forest::path)) {
        if (n.name == "windows") CHECK(n.versions == std::set<std::string>{"win10", "win11"});
        if (n.name == "system32") CHECK(n.versions == std::set<std::string>{"win10"});
    }
    REQUIRE(s.source_manifest().size() == 2);
    CHECK(s.source_manifest()[1].file == "b");
    require_query_equivalent(s, from(s.export_json()));
}

TEST_CASE("ingestion order does not matter") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        auto p = oracle::random_path_instance(rng);
        auto c = oracle::random_command_instance(rng);
        json reg = {{"registry", p.doc["paths"]}};
        auto forward = KnowledgeStore::from_documents({p.doc, c.doc, reg}, {"p", "c", "r"});
        auto backward = KnowledgeStore::from_documents({reg, c.doc, p.doc}, {"r", "c", "p"});
        require_query_equivalent(forward, backward);
        require_query_equivalent(forward, from(forward.export_json()));
    }
}

TEST_CASE("adjacency implies membership on random stores") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        auto p = oracle::random_path_instance(rng);
        auto s = from(p.doc);
        for (const auto& x : p.names) {
            CHECK(s.contains(Forest::path, x));
            for (const auto& y : p.names) {
                const bool adj = s.adjacent(Forest::path, x, y);
                CHECK(adj == (p.edges.count({x, y}) > 0));
                if (adj) CHECK((s.contains(Forest::path, x) && s.contains(Forest::path, y)));
            }
        }
    }
}

}
