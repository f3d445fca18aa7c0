#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "iocregex/knowledge_store.hpp"

namespace iocregex {

enum class IocKind { file_path, registry_key, command_line, other };

std::string_view to_string(IocKind kind);
std::optional<IocKind> parse_ioc_kind(std::string_view name);

class ClassificationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TokenizeError : public std::runtime_error {
public:
    TokenizeError(std::size_t offset, const std::string& detail);
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

struct IocRecord {
    std::string raw;
    IocKind kind = IocKind::other;
    std::string normalized;
    std::vector<std::string> components;
    std::string source_id;
    std::vector<std::string> warnings;
};

/// Data-driven parts of preprocessing. Keys of `environment` and
/// `registry_roots` are upper-case; lookups are case-insensitive.
struct NormalizationTables {
    std::map<std::string, std::string> environment;
    std::map<std::string, std::string> registry_roots;
    std::vector<std::string> command_extensions;
    std::vector<std::string> username_placeholders;
    std::vector<std::string> profile_containers;

    static NormalizationTables defaults();

    /// Overlays the entries of a table document on top of `this`.
    void merge(const nlohmann::json& doc, const std::string& source);
    void merge_file(const std::filesystem::path& file);

    nlohmann::json to_json() const;
};

/// One whitespace/semicolon separated token of a command line. `begin`/`end`
/// delimit the raw span (quotes included); `text` has quotes removed.
struct CommandToken {
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;
    bool fully_quoted = false;
    bool has_quotes = false;
};

/// Splits on whitespace and ';'; double-quoted spans stay inside one token.
/// Throws TokenizeError naming the opening quote's offset when unterminated.
std::vector<CommandToken> tokenize_command(std::string_view line);

class Normalizer {
public:
    explicit Normalizer(const KnowledgeStore& store, NormalizationTables tables = NormalizationTables::defaults());

    /// Rule order: registry root, then command invocation, then file path.
    IocKind classify(std::string_view raw) const;

    struct Preprocessed {
        std::string text;
        std::vector<std::string> warnings;
    };

    /// Environment expansion, username normalization, registry root
    /// abbreviation and command extension stripping. Idempotent.
    Preprocessed preprocess(std::string_view raw, IocKind kind) const;

    std::vector<std::string> segment(std::string_view normalized, IocKind kind) const;

    /// classify + preprocess + segment. Kind `other` yields no components.
    IocRecord make_record(std::string_view raw, std::string source_id = {}) const;

    /// Same as make_record but with the kind supplied by the caller.
    IocRecord make_record(std::string_view raw, IocKind kind, std::string source_id = {}) const;

    const KnowledgeStore& store() const noexcept { return *store_; }
    const NormalizationTables& tables() const noexcept { return tables_; }

    /// Name with a known executable extension removed, when what remains is
    /// a command in the store.
    std::optional<std::string> command_name(std::string_view token) const;

private:
    std::string expand_environment(std::string_view s, std::vector<std::string>& warnings) const;
    std::string normalize_path(std::string_view s) const;
    std::string normalize_registry(std::string_view s) const;
    std::string normalize_command(std::string_view s) const;
    bool is_registry_root(std::string_view component) const;
    bool is_placeholder(std::string_view component) const;

    const KnowledgeStore* store_;
    NormalizationTables tables_;
};

}  // namespace iocregex
