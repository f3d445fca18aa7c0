#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace iocregex {

enum class Forest { path, registry, command };
enum class NodeLabel { directory, registry_component, command, parameter };

std::string_view to_string(Forest forest);
std::string_view to_string(NodeLabel label);
std::optional<Forest> parse_forest(std::string_view name);

/// Raised for unreadable or malformed knowledge-base files. `line` is 0 when
/// the problem is structural rather than syntactic (the message then carries
/// a JSON pointer to the offending value).
class KnowledgeBaseError : public std::runtime_error {
public:
    KnowledgeBaseError(std::string file, std::size_t line, const std::string& detail);

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

struct KnowledgeNode {
    std::string name;  // case-folded
    NodeLabel label;
    std::set<std::string> children;
    std::set<std::string> versions;
};

struct SourceEntry {
    std::string file;
    std::vector<std::string> versions;
};

/// In-process replacement for the OS-component graph: three forests of
/// case-folded names with O(1) membership and parent->child adjacency
/// queries. Immutable once built; concurrent reads need no locking.
class KnowledgeStore {
public:
    KnowledgeStore() = default;

    static KnowledgeStore ingest(const std::vector<std::filesystem::path>& files);

    /// Ingest already-parsed documents; `sources` names each document in errors.
    static KnowledgeStore from_documents(const std::vector<nlohmann::json>& documents,
                                         const std::vector<std::string>& sources);

    bool contains(Forest forest, std::string_view name) const;
    bool adjacent(Forest forest, std::string_view parent, std::string_view child) const;

    /// Label of `name` in the command forest; command wins when a name is both.
    std::optional<NodeLabel> label_of(std::string_view name) const;

    /// Serializes using the same schema `ingest` reads.
    nlohmann::json export_json() const;

    /// Every node in a forest, depth-first from sorted roots.
    std::vector<KnowledgeNode> nodes(Forest forest) const;
    std::set<std::string> names(Forest forest) const;
    std::size_t node_count(Forest forest) const;
    bool empty() const;

    const std::vector<SourceEntry>& source_manifest() const noexcept { return manifest_; }

private:
    struct TreeNode {
        std::string name;
        NodeLabel label;
        std::map<std::string, std::size_t> children;
        std::set<std::string> versions;
    };

    struct ForestData {
        std::vector<TreeNode> arena;
        std::map<std::string, std::size_t> roots;
        std::unordered_set<std::string> names;
        std::unordered_set<std::string> edges;
    };

    class Builder;

    const ForestData& data(Forest forest) const;

    ForestData paths_;
    ForestData registry_;
    ForestData commands_;
    std::unordered_map<std::string, NodeLabel> command_labels_;
    std::vector<SourceEntry> manifest_;
};

}  // namespace iocregex
