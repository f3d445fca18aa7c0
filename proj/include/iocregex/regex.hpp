#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// The regex dialect generated patterns must live in: an optional leading
// "(?i)" flag, literals and escapes, character classes and the \d \w \s
// shorthands, quantifiers (* + ? {m,n}, optionally lazy), alternation,
// capturing and "(?:...)" groups, anchors (^ $ \A \Z \b \B) and ".".
// Matching is a Pike-VM simulation, so run time is linear in the subject
// for a fixed pattern and there is no catastrophic backtracking.
namespace iocregex::rx {

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(std::size_t offset, const std::string& message);
    std::size_t offset() const noexcept { return offset_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::size_t offset_;
    std::string message_;
};

enum class TokenKind {
    flag,             // (?i)
    group_open,       // (
    noncapture_open,  // (?:
    group_close,      // )
    alternation,      // |
    quantifier,       // * + ? {m,n} with optional lazy '?'
    dot,
    anchor,           // ^ $ \A \Z \b \B
    char_class,       // [...]
    shorthand_class,  // \d \D \w \W \s \S
    escaped_literal,  // \. \\ \t ...
    literal,
};

struct Token {
    TokenKind kind;
    std::size_t offset;
    std::string text;
};

/// Lexical tokens of a pattern. Throws SyntaxError for lexical problems
/// (dangling backslash, unterminated class, bad escape); structural checks
/// such as paren balance are left to compile().
std::vector<Token> tokenize(std::string_view pattern);

enum class AssertKind { line_start, line_end, text_start, text_end, word_boundary, not_word_boundary };

using CharSet = std::bitset<256>;

struct Node {
    enum class Kind { empty, literal, any, set, assertion, group, concat, alternation, repeat };

    Kind kind = Kind::empty;
    char ch = 0;                 // literal
    CharSet set;                 // set
    bool negated = false;        // set written as [^...]
    AssertKind assertion{};      // assertion
    bool capturing = false;      // group
    int min = 1;                 // repeat
    int max = 1;                 // repeat; -1 = unbounded
    bool lazy = false;           // repeat
    std::vector<Node> children;  // group (1), concat, alternation, repeat (1)
    std::size_t offset = 0;
};

inline constexpr int kUnbounded = -1;
inline constexpr int kMaxRepeat = 1000;

class Regex {
public:
    /// Throws SyntaxError.
    static Regex compile(std::string_view pattern);

    /// Unanchored search.
    bool search(std::string_view subject) const;

    /// Largest end offset over all matches anywhere in `subject`, if any.
    std::optional<std::size_t> furthest_match_end(std::string_view subject) const;

    bool case_insensitive() const noexcept { return icase_; }
    const Node& ast() const noexcept { return ast_; }
    const std::string& pattern() const noexcept { return pattern_; }

private:
    enum class Op : std::uint8_t { character, set, any, split, jump, assertion, match };
    struct Inst {
        Op op;
        char ch = 0;
        std::uint32_t x = 0;  // set index / jump target / first split branch
        std::uint32_t y = 0;  // second split branch
        AssertKind assertion{};
    };

    void emit(const Node& node);
    std::uint32_t push(Inst inst);
    std::optional<std::size_t> run(std::string_view subject, bool first_only) const;

    std::string pattern_;
    bool icase_ = false;
    Node ast_;
    std::vector<Inst> program_;
    std::vector<CharSet> sets_;
};

/// Compiles and reports the syntax error, if any, without throwing.
std::optional<SyntaxError> syntax_error(std::string_view pattern);

/// Escapes every dialect metacharacter in `literal`.
std::string escape(std::string_view literal);

/// A maximal stretch of literal characters in a pattern's unescaped
/// character stream. Plain groups are transparent; alternation, wildcards,
/// classes and non-trivial quantifiers break runs. `optional` is set when
/// some enclosing construct may match zero times.
struct LiteralRun {
    std::string text;
    bool optional = false;
};

std::vector<LiteralRun> literal_runs(const Node& ast);

/// Wildcard units: every ".", plus every quantified character class
/// (\w+, \S*, [a-z]{2,} ...). A quantified "." counts once. When
/// `exempt_frame` is set, one leading and one trailing bare ".*" at the
/// top level are not counted.
int count_wildcard_units(const Node& ast, bool exempt_frame);

/// Fixed-order structural features: groups, classes, wildcards, anchors,
/// quantifiers, alternations, escapes.
struct StructuralFeatures {
    static constexpr std::size_t kBins = 7;
    std::array<double, kBins> counts{};
};

StructuralFeatures structural_features(std::string_view pattern);

}  // namespace iocregex::rx
