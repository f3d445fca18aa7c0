#include "iocregex/knowledge_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "iocregex/text.hpp"

namespace iocregex {

using nlohmann::json;

std::string_view to_string(Forest forest) {
    switch (forest) {
    case Forest::path: return "path";
    case Forest::registry: return "registry";
    case Forest::command: return "command";
    }
    return "?";
}

std::string_view to_string(NodeLabel label) {
    switch (label) {
    case NodeLabel::directory: return "directory";
    case NodeLabel::registry_component: return "registry_component";
    case NodeLabel::command: return "command";
    case NodeLabel::parameter: return "parameter";
    }
    return "?";
}

std::optional<Forest> parse_forest(std::string_view name) {
    if (name == "path" || name == "paths") return Forest::path;
    if (name == "registry") return Forest::registry;
    if (name == "command" || name == "commands") return Forest::command;
    return std::nullopt;
}

KnowledgeBaseError::KnowledgeBaseError(std::string file, std::size_t line, const std::string& detail)
    : std::runtime_error(file + (line ? ":" + std::to_string(line) : std::string()) + ": " + detail),
      file_(std::move(file)),
      line_(line) {}

namespace {

std::string edge_key(std::string_view parent, std::string_view child) {
    std::string key;
    key.reserve(parent.size() + child.size() + 1);
    key.append(parent).push_back('\0');
    key.append(child);
    return key;
}

std::vector<std::string> split_hierarchy(std::string_view entry) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : entry) {
        if (text::is_path_delimiter(c)) {
            auto t = text::trim(current);
            if (!t.empty()) parts.push_back(text::folded(t));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    auto t = text::trim(current);
    if (!t.empty()) parts.push_back(text::folded(t));
    return parts;
}

std::size_t line_of_offset(const std::string& content, std::size_t offset) {
    offset = std::min(offset, content.size());
    return 1 + static_cast<std::size_t>(std::count(content.begin(), content.begin() + offset, '\n'));
}

}  // namespace

class KnowledgeStore::Builder {
public:
    explicit Builder(KnowledgeStore& store) : store_(store) {}

    void add_document(const json& doc, const std::string& source) {
        source_ = source;
        if (!doc.is_object()) fail("", "top level must be an object");

        std::vector<std::string> file_versions;
        for (const auto& [key, value] : doc.items()) {
            if (key == "format") {
                if (!value.is_string()) fail("/format", "must be a string");
            } else if (key == "versions") {
                file_versions = string_list(value, "/versions");
            } else if (key != "paths" && key != "registry" && key != "commands") {
                if (key == "parameters") fail("/parameters", "parameters must be declared under a command");
                fail("/" + key, "unknown field");
            }
        }
        store_.manifest_.push_back({source, file_versions});

        if (auto it = doc.find("paths"); it != doc.end())
            add_hierarchies(*it, "/paths", Forest::path, file_versions);
        if (auto it = doc.find("registry"); it != doc.end())
            add_hierarchies(*it, "/registry", Forest::registry, file_versions);
        if (auto it = doc.find("commands"); it != doc.end()) add_commands(*it, file_versions);
    }

private:
    [[noreturn]] void fail(const std::string& pointer, const std::string& detail) const {
        throw KnowledgeBaseError(source_, 0, (pointer.empty() ? "" : pointer + ": ") + detail);
    }

    std::vector<std::string> string_list(const json& value, const std::string& pointer) const {
        if (!value.is_array()) fail(pointer, "must be an array of strings");
        std::vector<std::string> out;
        for (std::size_t i = 0; i < value.size(); ++i) {
            if (!value[i].is_string()) fail(pointer + "/" + std::to_string(i), "must be a string");
            out.push_back(value[i].get<std::string>());
        }
        return out;
    }

    ForestData& forest(Forest f) {
        switch (f) {
        case Forest::path: return store_.paths_;
        case Forest::registry: return store_.registry_;
        case Forest::command: return store_.commands_;
        }
        return store_.paths_;
    }

    std::size_t add_node(ForestData& fd, std::optional<std::size_t> parent, const std::string& name,
                         NodeLabel label, const std::vector<std::string>& versions) {
        auto& siblings = parent ? fd.arena[*parent].children : fd.roots;
        std::size_t index;
        if (auto it = siblings.find(name); it != siblings.end()) {
            index = it->second;
        } else {
            index = fd.arena.size();
            fd.arena.push_back(TreeNode{name, label, {}, {}});
            // `siblings` may dangle after push_back when it refers into the arena.
            (parent ? fd.arena[*parent].children : fd.roots).emplace(name, index);
        }
        fd.arena[index].versions.insert(versions.begin(), versions.end());
        fd.names.insert(name);
        if (parent) fd.edges.insert(edge_key(fd.arena[*parent].name, name));
        return index;
    }

    void add_hierarchies(const json& list, const std::string& pointer, Forest f,
                         const std::vector<std::string>& file_versions) {
        if (!list.is_array()) fail(pointer, "must be an array");
        const NodeLabel label = f == Forest::path ? NodeLabel::directory : NodeLabel::registry_component;
        auto& fd = forest(f);
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string where = pointer + "/" + std::to_string(i);
            const auto& entry = list[i];
            std::string hierarchy;
            std::vector<std::string> versions = file_versions;
            if (entry.is_string()) {
                hierarchy = entry.get<std::string>();
            } else if (entry.is_object()) {
                auto p = entry.find("path");
                if (p == entry.end() || !p->is_string()) fail(where, "object entry needs a string \"path\"");
                hierarchy = p->get<std::string>();
                if (auto v = entry.find("versions"); v != entry.end()) {
                    auto extra = string_list(*v, where + "/versions");
                    versions.insert(versions.end(), extra.begin(), extra.end());
                }
                for (const auto& [key, _] : entry.items())
                    if (key != "path" && key != "versions") fail(where + "/" + key, "unknown field");
            } else {
                fail(where, "entry must be a string or an object");
            }
            auto parts = split_hierarchy(hierarchy);
            if (parts.empty()) fail(where, "empty hierarchy");
            std::optional<std::size_t> parent;
            for (const auto& part : parts) parent = add_node(fd, parent, part, label, versions);
        }
    }

    void add_commands(const json& list, const std::vector<std::string>& file_versions) {
        if (!list.is_array()) fail("/commands", "must be an array");
        auto& fd = forest(Forest::command);
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string where = "/commands/" + std::to_string(i);
            const auto& entry = list[i];
            if (!entry.is_object()) fail(where, "command entry must be an object");
            auto name_it = entry.find("name");
            if (name_it == entry.end() || !name_it->is_string()) {
                if (entry.contains("parameters")) fail(where, "parameter declared without a parent command");
                fail(where, "command entry needs a string \"name\"");
            }
            std::vector<std::string> versions = file_versions;
            if (auto v = entry.find("versions"); v != entry.end()) {
                auto extra = string_list(*v, where + "/versions");
                versions.insert(versions.end(), extra.begin(), extra.end());
            }
            for (const auto& [key, _] : entry.items())
                if (key != "name" && key != "parameters" && key != "versions")
                    fail(where + "/" + key, "unknown field");

            const std::string name = text::folded(text::trim(name_it->get<std::string>()));
            check_token(name, where + "/name");
            const std::size_t cmd = add_node(fd, std::nullopt, name, NodeLabel::command, versions);
            label(name, NodeLabel::command);

            auto params = entry.find("parameters");
            if (params == entry.end()) continue;
            if (!params->is_array()) fail(where + "/parameters", "must be an array");
            for (std::size_t j = 0; j < params->size(); ++j) {
                const std::string pwhere = where + "/parameters/" + std::to_string(j);
                const auto& p = (*params)[j];
                std::string pname;
                std::vector<std::string> pversions = versions;
                if (p.is_string()) {
                    pname = p.get<std::string>();
                } else if (p.is_object() && p.contains("name") && p["name"].is_string()) {
                    pname = p["name"].get<std::string>();
                    if (auto v = p.find("versions"); v != p.end()) {
                        auto extra = string_list(*v, pwhere + "/versions");
                        pversions.insert(pversions.end(), extra.begin(), extra.end());
                    }
                } else {
                    fail(pwhere, "parameter must be a string or {\"name\": ...}");
                }
                pname = text::folded(text::trim(pname));
                check_token(pname, pwhere);
                add_node(fd, cmd, pname, NodeLabel::parameter, pversions);
                label(pname, NodeLabel::parameter);
            }
        }
    }

    void check_token(const std::string& name, const std::string& pointer) const {
        if (name.empty()) fail(pointer, "empty name");
        if (std::any_of(name.begin(), name.end(), text::is_space)) fail(pointer, "name contains whitespace");
    }

    void label(const std::string& name, NodeLabel l) {
        auto [it, inserted] = store_.command_labels_.emplace(name, l);
        if (!inserted && l == NodeLabel::command) it->second = NodeLabel::command;
    }

    KnowledgeStore& store_;
    std::string source_;
};

KnowledgeStore KnowledgeStore::from_documents(const std::vector<json>& documents,
                                              const std::vector<std::string>& sources) {
    KnowledgeStore store;
    Builder builder(store);
    for (std::size_t i = 0; i < documents.size(); ++i)
        builder.add_document(documents[i], i < sources.size() ? sources[i] : "<document " + std::to_string(i) + ">");
    return store;
}

KnowledgeStore KnowledgeStore::ingest(const std::vector<std::filesystem::path>& files) {
    std::vector<json> docs;
    std::vector<std::string> sources;
    for (const auto& file : files) {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw KnowledgeBaseError(file.string(), 0, "cannot open file");
        std::ostringstream buf;
        buf << in.rdbuf();
        const std::string content = buf.str();
        try {
            docs.push_back(json::parse(content));
        } catch (const json::parse_error& e) {
            throw KnowledgeBaseError(file.string(), line_of_offset(content, e.byte ? e.byte - 1 : 0), e.what());
        }
        sources.push_back(file.string());
    }
    return from_documents(docs, sources);
}

const KnowledgeStore::ForestData& KnowledgeStore::data(Forest forest) const {
    switch (forest) {
    case Forest::path: return paths_;
    case Forest::registry: return registry_;
    case Forest::command: return commands_;
    }
    return paths_;
}

bool KnowledgeStore::contains(Forest forest, std::string_view name) const {
    const auto& fd = data(forest);
    return !fd.names.empty() && fd.names.count(text::folded(name)) > 0;
}

bool KnowledgeStore::adjacent(Forest forest, std::string_view parent, std::string_view child) const {
    const auto& fd = data(forest);
    return !fd.edges.empty() && fd.edges.count(edge_key(text::folded(parent), text::folded(child))) > 0;
}

std::optional<NodeLabel> KnowledgeStore::label_of(std::string_view name) const {
    auto it = command_labels_.find(text::folded(name));
    if (it == command_labels_.end()) return std::nullopt;
    return it->second;
}

std::vector<KnowledgeNode> KnowledgeStore::nodes(Forest forest) const {
    const auto& fd = data(forest);
    std::vector<KnowledgeNode> out;
    auto visit = [&](auto&& self, std::size_t index) -> void {
        const auto& n = fd.arena[index];
        KnowledgeNode node{n.name, n.label, {}, n.versions};
        for (const auto& [child, _] : n.children) node.children.insert(child);
        out.push_back(std::move(node));
        for (const auto& [_, c] : n.children) self(self, c);
    };
    for (const auto& [_, root] : fd.roots) visit(visit, root);
    return out;
}

std::set<std::string> KnowledgeStore::names(Forest forest) const {
    const auto& fd = data(forest);
    return {fd.names.begin(), fd.names.end()};
}

std::size_t KnowledgeStore::node_count(Forest forest) const { return data(forest).arena.size(); }

bool KnowledgeStore::empty() const {
    return paths_.arena.empty() && registry_.arena.empty() && commands_.arena.empty();
}

json KnowledgeStore::export_json() const {
    auto versions_json = [](const std::set<std::string>& v) { return json(std::vector<std::string>(v.begin(), v.end())); };

    // Ingest gives every node the union of the versions of all entries passing
    // through it, so an entry is only needed where that union would fall short.
    auto export_hierarchy = [&](const ForestData& fd) {
        json list = json::array();
        auto visit = [&](auto&& self, std::size_t index, const std::string& prefix) -> void {
            const auto& n = fd.arena[index];
            const std::string path = prefix.empty() ? n.name : prefix + "/" + n.name;
            std::set<std::string> from_children;
            for (const auto& [_, c] : n.children)
                from_children.insert(fd.arena[c].versions.begin(), fd.arena[c].versions.end());
            if (n.children.empty() || from_children != n.versions) {
                if (n.versions.empty())
                    list.push_back(path);
                else
                    list.push_back({{"path", path}, {"versions", versions_json(n.versions)}});
            }
            for (const auto& [_, c] : n.children) self(self, c, path);
        };
        for (const auto& [_, root] : fd.roots) visit(visit, root, "");
        return list;
    };

    json commands = json::array();
    for (const auto& [name, index] : commands_.roots) {
        const auto& n = commands_.arena[index];
        const bool uniform = std::all_of(n.children.begin(), n.children.end(), [&](const auto& kv) {
            return commands_.arena[kv.second].versions == n.versions;
        });
        json params = json::array();
        for (const auto& [pname, pindex] : n.children) {
            const auto& p = commands_.arena[pindex];
            if (uniform || p.versions.empty())
                params.push_back(pname);
            else
                params.push_back({{"name", pname}, {"versions", versions_json(p.versions)}});
        }
        if (uniform) {
            json entry = {{"name", name}, {"parameters", std::move(params)}};
            if (!n.versions.empty()) entry["versions"] = versions_json(n.versions);
            commands.push_back(std::move(entry));
        } else {
            // Split so the command's own tags do not leak onto its parameters.
            commands.push_back({{"name", name}, {"versions", versions_json(n.versions)}});
            commands.push_back({{"name", name}, {"parameters", std::move(params)}});
        }
    }

    return json{{"format", "iocregex-kb/1"},
                {"paths", export_hierarchy(paths_)},
                {"registry", export_hierarchy(registry_)},
                {"commands", std::move(commands)}};
}

}  // namespace iocregex
