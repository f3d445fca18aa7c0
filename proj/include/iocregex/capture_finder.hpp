#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "iocregex/knowledge_store.hpp"
#include "iocregex/normalize.hpp"

namespace iocregex {

enum class GroupLabel { keep, discard };

std::string_view to_string(GroupLabel label);

/// Keep/discard decision for every component of one record. Sequences are
/// stored as component indices so repeated names stay distinguishable.
struct GroupAnnotation {
    IocRecord record;
    std::vector<GroupLabel> labels;
    std::vector<std::vector<std::size_t>> capture_sequences;

    /// False when capture finding was bypassed: every component is then
    /// provisionally keep and the noncapture check has nothing to enforce.
    bool groups_known = true;

    std::vector<std::vector<std::string>> sequence_texts() const;
    std::vector<std::string> keep_components() const;
    std::vector<std::string> discard_components() const;
    bool kept() const { return !capture_sequences.empty(); }
};

/// Longest run of consecutive in-store components that are pairwise
/// parent->child adjacent, scanning the compacted list exactly as indexed.
GroupAnnotation find_path_groups(const IocRecord& record, const KnowledgeStore& store);

/// Command/parameter sequences: a command opens a sequence, a parameter of
/// that command extends it, anything else is discarded.
GroupAnnotation find_command_groups(const IocRecord& record, const KnowledgeStore& store);

/// Dispatches on record.kind. Records of kind `other` get an empty annotation.
GroupAnnotation find_groups(const IocRecord& record, const KnowledgeStore& store);

/// Every component provisionally keep, one sequence holding all of them.
GroupAnnotation bypass_groups(const IocRecord& record);

struct Rejection {
    GroupAnnotation annotation;
    std::string reason;
};

struct FilterResult {
    std::vector<GroupAnnotation> kept;
    std::vector<Rejection> rejected;
};

inline constexpr const char* kNoCaptureGroup = "no capture group";

FilterResult filter_false_positives(std::vector<GroupAnnotation> annotations);

/// {raw, normalized, kind, components, labels, sequences, groups_known}.
nlohmann::json annotation_to_json(const GroupAnnotation& annotation);

}  // namespace iocregex
