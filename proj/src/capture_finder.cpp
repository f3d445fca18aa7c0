#include "iocregex/capture_finder.hpp"

#include <nlohmann/json.hpp>

#include "iocregex/text.hpp"

namespace iocregex {

std::string_view to_string(GroupLabel label) { return label == GroupLabel::keep ? "keep" : "discard"; }

std::vector<std::vector<std::string>> GroupAnnotation::sequence_texts() const {
    std::vector<std::vector<std::string>> out;
    for (const auto& seq : capture_sequences) {
        auto& texts = out.emplace_back();
        for (auto i : seq) texts.push_back(record.components[i]);
    }
    return out;
}

std::vector<std::string> GroupAnnotation::keep_components() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == GroupLabel::keep) out.push_back(record.components[i]);
    return out;
}

std::vector<std::string> GroupAnnotation::discard_components() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == GroupLabel::discard) out.push_back(record.components[i]);
    return out;
}

namespace {

GroupAnnotation start(const IocRecord& record) {
    GroupAnnotation a;
    a.record = record;
    a.labels.assign(record.components.size(), GroupLabel::discard);
    return a;
}

void mark(GroupAnnotation& a) {
    for (const auto& seq : a.capture_sequences)
        for (auto i : seq) a.labels[i] = GroupLabel::keep;
}

}  // namespace

GroupAnnotation find_path_groups(const IocRecord& record, const KnowledgeStore& store) {
    auto a = start(record);
    const Forest forest = record.kind == IocKind::registry_key ? Forest::registry : Forest::path;
    const auto& s = record.components;

    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!text::is_drive_letter(s[i]) && store.contains(forest, s[i])) v.push_back(i);

    std::vector<std::size_t> best;
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::vector<std::size_t> run{v[i]};
        std::size_t j = i;
        while (j + 1 < v.size() && store.adjacent(forest, s[v[j]], s[v[j + 1]])) {
            run.push_back(v[j + 1]);
            ++j;
        }
        if (run.size() > best.size()) best = std::move(run);
    }
    if (!best.empty()) a.capture_sequences.push_back(std::move(best));
    mark(a);
    return a;
}

GroupAnnotation find_command_groups(const IocRecord& record, const KnowledgeStore& store) {
    auto a = start(record);
    const auto& s = record.components;

    std::vector<std::size_t> current;
    std::optional<std::size_t> command;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!store.contains(Forest::command, s[i])) continue;
        if (store.label_of(s[i]) == NodeLabel::command) {
            if (!current.empty()) a.capture_sequences.push_back(std::move(current));
            current = {i};
            command = i;
        } else if (command && store.adjacent(Forest::command, s[*command], s[i])) {
            current.push_back(i);
        }
    }
    if (!current.empty()) a.capture_sequences.push_back(std::move(current));
    mark(a);
    return a;
}

GroupAnnotation find_groups(const IocRecord& record, const KnowledgeStore& store) {
    switch (record.kind) {
    case IocKind::file_path:
    case IocKind::registry_key: return find_path_groups(record, store);
    case IocKind::command_line: return find_command_groups(record, store);
    case IocKind::other: break;
    }
    return start(record);
}

GroupAnnotation bypass_groups(const IocRecord& record) {
    auto a = start(record);
    a.groups_known = false;
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < record.components.size(); ++i) {
        if (record.kind != IocKind::command_line && text::is_drive_letter(record.components[i])) continue;
        all.push_back(i);
    }
    if (!all.empty()) a.capture_sequences.push_back(std::move(all));
    mark(a);
    return a;
}

FilterResult filter_false_positives(std::vector<GroupAnnotation> annotations) {
    FilterResult result;
    for (auto& a : annotations) {
        if (a.kept()) result.kept.push_back(std::move(a));
        else result.rejected.push_back({std::move(a), kNoCaptureGroup});
    }
    return result;
}

nlohmann::json annotation_to_json(const GroupAnnotation& a) {
    nlohmann::json labels = nlohmann::json::array();
    for (auto l : a.labels) labels.push_back(to_string(l));
    return {{"raw", a.record.raw},
            {"normalized", a.record.normalized},
            {"kind", to_string(a.record.kind)},
            {"components", a.record.components},
            {"labels", labels},
            {"sequences", a.sequence_texts()},
            {"groups_known", a.groups_known}};
}

}  // namespace iocregex
