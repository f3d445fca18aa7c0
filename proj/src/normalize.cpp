#include "iocregex/normalize.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "iocregex/text.hpp"

namespace iocregex {

using nlohmann::json;

std::string_view to_string(IocKind kind) {
    switch (kind) {
    case IocKind::file_path: return "file_path";
    case IocKind::registry_key: return "registry_key";
    case IocKind::command_line: return "command_line";
    case IocKind::other: return "other";
    }
    return "other";
}

std::optional<IocKind> parse_ioc_kind(std::string_view name) {
    for (auto k : {IocKind::file_path, IocKind::registry_key, IocKind::command_line, IocKind::other})
        if (name == to_string(k)) return k;
    return std::nullopt;
}

TokenizeError::TokenizeError(std::size_t offset, const std::string& detail)
    : std::runtime_error("tokenization error at offset " + std::to_string(offset) + ": " + detail), offset_(offset) {}

namespace {

std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split_components(std::string_view s) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : s) {
        if (text::is_path_delimiter(c)) {
            if (!current.empty()) parts.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) parts.push_back(std::move(current));
    return parts;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

std::string_view basename(std::string_view token) {
    auto pos = token.find_last_of("\\/");
    return pos == std::string_view::npos ? token : token.substr(pos + 1);
}

bool has_delimiter(std::string_view s) { return s.find_first_of("\\/") != std::string_view::npos; }

// Switches ("/c", "--data") and URLs are not paths even though they contain
// a slash.
bool path_like_argument(std::string_view s) {
    if (s.empty() || s.front() == '/' || s.front() == '-') return false;
    if (s.find("://") != std::string_view::npos) return false;
    return has_delimiter(s);
}

/// Backslash-only delimiters, no repeats except a leading UNC pair, no
/// trailing delimiter. Returns the leading delimiters separately.
std::pair<std::string, std::vector<std::string>> canonical_path(std::string_view s) {
    std::size_t lead = 0;
    while (lead < s.size() && text::is_path_delimiter(s[lead])) ++lead;
    std::string prefix(std::min<std::size_t>(lead, 2), '\\');
    auto parts = split_components(s.substr(lead));
    if (parts.empty()) prefix.clear();
    return {prefix, parts};
}

}  // namespace

NormalizationTables NormalizationTables::defaults() {
    NormalizationTables t;
    t.environment = {
        {"ALLUSERSPROFILE", "C:\\ProgramData"},
        {"APPDATA", "C:\\Users\\user\\AppData\\Roaming"},
        {"COMMONPROGRAMFILES", "C:\\Program Files\\Common Files"},
        {"COMSPEC", "C:\\Windows\\System32\\cmd.exe"},
        {"HOMEDRIVE", "C:"},
        {"HOMEPATH", "\\Users\\user"},
        {"LOCALAPPDATA", "C:\\Users\\user\\AppData\\Local"},
        {"PROGRAMDATA", "C:\\ProgramData"},
        {"PROGRAMFILES", "C:\\Program Files"},
        {"PROGRAMFILES(X86)", "C:\\Program Files (x86)"},
        {"PUBLIC", "C:\\Users\\Public"},
        {"SYSTEMDRIVE", "C:"},
        {"SYSTEMROOT", "C:\\Windows"},
        {"TEMP", "C:\\Users\\user\\AppData\\Local\\Temp"},
        {"TMP", "C:\\Users\\user\\AppData\\Local\\Temp"},
        {"USERNAME", "user"},
        {"USERPROFILE", "C:\\Users\\user"},
        {"WINDIR", "C:\\Windows"},
    };
    t.registry_roots = {
        {"HKEY_CURRENT_USER", "HKCU"},  {"HKEY_LOCAL_MACHINE", "HKLM"}, {"HKEY_CLASSES_ROOT", "HKCR"},
        {"HKEY_USERS", "HKU"},          {"HKEY_CURRENT_CONFIG", "HKCC"}, {"HKCU", "HKCU"},
        {"HKLM", "HKLM"},               {"HKCR", "HKCR"},                {"HKU", "HKU"},
        {"HKCC", "HKCC"},
    };
    t.command_extensions = {".exe", ".com", ".bat", ".cmd", ".ps1"};
    t.username_placeholders = {"<username>", "<user>", "<user_name>", "%username%", "{username}"};
    t.profile_containers = {"users", "documents and settings"};
    return t;
}

void NormalizationTables::merge(const json& doc, const std::string& source) {
    auto bad = [&](const std::string& what) { throw std::runtime_error(source + ": " + what); };
    if (!doc.is_object()) bad("top level must be an object");
    for (const auto& [key, value] : doc.items()) {
        if (key == "format") continue;
        if (key == "environment" || key == "registry_roots") {
            if (!value.is_object()) bad(key + " must be an object of strings");
            auto& target = key == "environment" ? environment : registry_roots;
            for (const auto& [name, expansion] : value.items()) {
                if (!expansion.is_string()) bad(key + "/" + name + " must be a string");
                target[upper(name)] = expansion.get<std::string>();
            }
        } else if (key == "command_extensions" || key == "username_placeholders" || key == "profile_containers") {
            if (!value.is_array()) bad(key + " must be an array of strings");
            auto& target = key == "command_extensions" ? command_extensions
                           : key == "username_placeholders" ? username_placeholders
                                                            : profile_containers;
            for (const auto& v : value) {
                if (!v.is_string()) bad(key + " must be an array of strings");
                auto s = text::folded(v.get<std::string>());
                if (std::find(target.begin(), target.end(), s) == target.end()) target.push_back(s);
            }
        } else {
            bad("unknown field \"" + key + "\"");
        }
    }
}

void NormalizationTables::merge_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error(file.string() + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw std::runtime_error(file.string() + ": " + e.what());
    }
    merge(doc, file.string());
}

json NormalizationTables::to_json() const {
    return json{{"format", "iocregex-tables/1"},
                {"environment", environment},
                {"registry_roots", registry_roots},
                {"command_extensions", command_extensions},
                {"username_placeholders", username_placeholders},
                {"profile_containers", profile_containers}};
}

std::vector<CommandToken> tokenize_command(std::string_view line) {
    std::vector<CommandToken> tokens;
    CommandToken current;
    bool in_token = false;
    bool in_quote = false;
    std::size_t quote_start = 0;

    auto finish = [&](std::size_t end) {
        if (in_token) {
            current.end = end;
            const auto raw = line.substr(current.begin, end - current.begin);
            current.fully_quoted = raw.size() >= 2 && raw.front() == '"' && raw.back() == '"' &&
                                   std::count(raw.begin(), raw.end(), '"') == 2;
            if (!current.text.empty()) tokens.push_back(current);
        }
        current = CommandToken{};
        in_token = false;
    };

    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quote) {
            if (c == '"') in_quote = false;
            else current.text.push_back(c);
            continue;
        }
        if (text::is_space(c) || c == ';') {
            finish(i);
            continue;
        }
        if (!in_token) {
            in_token = true;
            current.begin = i;
        }
        if (c == '"') {
            in_quote = true;
            quote_start = i;
            current.has_quotes = true;
        } else {
            current.text.push_back(c);
        }
    }
    if (in_quote) throw TokenizeError(quote_start, "unterminated quote");
    finish(line.size());
    return tokens;
}

Normalizer::Normalizer(const KnowledgeStore& store, NormalizationTables tables)
    : store_(&store), tables_(std::move(tables)) {}

bool Normalizer::is_registry_root(std::string_view component) const {
    std::string key = upper(component);
    if (!key.empty() && key.back() == ':') key.pop_back();
    return key == "REGISTRY" || tables_.registry_roots.count(key) > 0;
}

bool Normalizer::is_placeholder(std::string_view component) const {
    const auto f = text::folded(component);
    return std::find(tables_.username_placeholders.begin(), tables_.username_placeholders.end(), f) !=
           tables_.username_placeholders.end();
}

std::optional<std::string> Normalizer::command_name(std::string_view token) const {
    // "/sc" is a switch, not a path ending in the command "sc".
    if (!token.empty() && (token.front() == '-' || (token.front() == '/' && token.find_first_of("\\/", 1) == std::string_view::npos)))
        return std::nullopt;
    std::string_view base = basename(token);
    if (base.empty()) return std::nullopt;
    if (store_->label_of(base) == NodeLabel::command) return std::string(base);
    for (const auto& ext : tables_.command_extensions) {
        if (base.size() > ext.size() && text::iequals(base.substr(base.size() - ext.size()), ext)) {
            auto stem = base.substr(0, base.size() - ext.size());
            if (store_->label_of(stem) == NodeLabel::command) return std::string(stem);
        }
    }
    return std::nullopt;
}

IocKind Normalizer::classify(std::string_view raw) const {
    const auto s = text::trim(raw);
    if (s.empty()) throw ClassificationError("cannot classify an empty indicator");

    const auto components = split_components(s);
    if (!components.empty()) {
        // "HKCU\..." and "HKCU:\..." but not a first token like "HKCU\x /v".
        std::string first = components.front();
        if (auto ws = first.find_first_of(" \t"); ws != std::string::npos) first = first.substr(0, ws);
        if (is_registry_root(first) && !text::is_path_delimiter(s.front())) return IocKind::registry_key;
        if (is_registry_root(first) && text::iequals(first, "REGISTRY")) return IocKind::registry_key;
    }

    std::vector<CommandToken> tokens;
    try {
        tokens = tokenize_command(s);
    } catch (const TokenizeError&) {
        tokens = tokenize_command(std::string(s) + "\"");
    }
    if (!tokens.empty()) {
        const auto& first = tokens.front().text;
        if (command_name(first) && (tokens.size() > 1 || !has_delimiter(first))) return IocKind::command_line;
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            const auto& t = tokens[i].text;
            if (!t.empty() && (t[0] == '/' || t[0] == '-')) return IocKind::command_line;
        }
    }

    if (has_delimiter(s)) {
        const bool drive = s.size() >= 2 && std::isalpha(static_cast<unsigned char>(s[0])) && s[1] == ':';
        const auto pct = s.find('%');
        const bool env = pct != std::string_view::npos && s.find('%', pct + 1) != std::string_view::npos;
        if (drive || env || components.size() >= 2) return IocKind::file_path;
    }
    return IocKind::other;
}

std::string Normalizer::expand_environment(std::string_view s, std::vector<std::string>& warnings) const {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '%') {
            const auto close = s.find('%', i + 1);
            if (close != std::string_view::npos && close > i + 1) {
                const auto name = s.substr(i + 1, close - i - 1);
                const bool plausible = std::all_of(name.begin(), name.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '(' || c == ')';
                });
                if (plausible) {
                    if (auto it = tables_.environment.find(upper(name)); it != tables_.environment.end()) {
                        out.append(it->second);
                    } else {
                        out.append(s.substr(i, close - i + 1));
                        warnings.push_back("unknown environment variable %" + std::string(name) + "%");
                    }
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

std::string Normalizer::normalize_path(std::string_view s) const {
    auto [prefix, parts] = canonical_path(s);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (is_placeholder(parts[i])) {
            parts[i] = "user";
            continue;
        }
        if (i == 0) continue;
        const auto container = text::folded(parts[i - 1]);
        const bool after_container = std::find(tables_.profile_containers.begin(), tables_.profile_containers.end(),
                                               container) != tables_.profile_containers.end();
        if (after_container && !store_->adjacent(Forest::path, parts[i - 1], parts[i])) parts[i] = "user";
    }
    return prefix + join(parts, "\\");
}

std::string Normalizer::normalize_registry(std::string_view s) const {
    auto [prefix, parts] = canonical_path(s);
    if (parts.empty()) return {};
    std::string root = upper(parts.front());
    if (!root.empty() && root.back() == ':') root.pop_back();
    if (root == "REGISTRY") {
        parts.erase(parts.begin());
        if (!parts.empty()) {
            const auto hive = upper(parts.front());
            if (hive == "MACHINE") parts.front() = "HKLM";
            else if (hive == "USER") parts.front() = "HKU";
        }
    } else if (auto it = tables_.registry_roots.find(root); it != tables_.registry_roots.end()) {
        parts.front() = it->second;
    }
    return join(parts, "\\");
}

std::string Normalizer::normalize_command(std::string_view s) const {
    std::vector<CommandToken> tokens;
    try {
        tokens = tokenize_command(s);
    } catch (const TokenizeError&) {
        return std::string(s);  // left for segment() to report
    }
    std::string out(s);
    for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
        if (it->has_quotes && !it->fully_quoted) continue;
        std::string replacement = it->text;
        if (auto name = command_name(it->text)) {
            replacement = *name;
        } else if (path_like_argument(it->text)) {
            replacement = normalize_path(it->text);
        }
        if (replacement == it->text) continue;
        const std::size_t begin = it->fully_quoted ? it->begin + 1 : it->begin;
        const std::size_t end = it->fully_quoted ? it->end - 1 : it->end;
        out.replace(begin, end - begin, replacement);
    }
    return out;
}

Normalizer::Preprocessed Normalizer::preprocess(std::string_view raw, IocKind kind) const {
    if (kind == IocKind::other) throw ClassificationError("cannot preprocess an indicator of kind other");
    Preprocessed result;
    const std::string expanded = expand_environment(text::trim(raw), result.warnings);
    switch (kind) {
    case IocKind::file_path: result.text = normalize_path(expanded); break;
    case IocKind::registry_key: result.text = normalize_registry(expanded); break;
    case IocKind::command_line: result.text = normalize_command(expanded); break;
    case IocKind::other: break;
    }
    return result;
}

std::vector<std::string> Normalizer::segment(std::string_view normalized, IocKind kind) const {
    switch (kind) {
    case IocKind::file_path:
    case IocKind::registry_key: return split_components(normalized);
    case IocKind::command_line: {
        std::vector<std::string> out;
        for (auto& t : tokenize_command(normalized)) out.push_back(std::move(t.text));
        return out;
    }
    case IocKind::other: return {};
    }
    return {};
}

IocRecord Normalizer::make_record(std::string_view raw, std::string source_id) const {
    return make_record(raw, classify(raw), std::move(source_id));
}

IocRecord Normalizer::make_record(std::string_view raw, IocKind kind, std::string source_id) const {
    IocRecord record;
    record.raw = std::string(raw);
    record.kind = kind;
    record.source_id = std::move(source_id);
    if (kind == IocKind::other) {
        record.normalized = std::string(text::trim(raw));
        return record;
    }
    auto pre = preprocess(raw, kind);
    record.normalized = std::move(pre.text);
    record.warnings = std::move(pre.warnings);
    record.components = segment(record.normalized, kind);
    return record;
}

}  // namespace iocregex
