#include "iocregex/regex.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

#include "iocregex/text.hpp"

namespace iocregex::rx {

SyntaxError::SyntaxError(std::size_t offset, const std::string& message)
    : std::runtime_error("syntax error at offset " + std::to_string(offset) + ": " + message),
      offset_(offset),
      message_(message) {}

namespace {

bool is_word(unsigned char c) { return std::isalnum(c) || c == '_'; }

CharSet shorthand_set(char code) {
    CharSet s;
    switch (std::tolower(static_cast<unsigned char>(code))) {
    case 'd':
        for (int c = '0'; c <= '9'; ++c) s.set(c);
        break;
    case 'w':
        for (int c = 0; c < 256; ++c)
            if (is_word(static_cast<unsigned char>(c)) && c < 128) s.set(c);
        break;
    case 's':
        for (char c : std::string_view(" \t\n\r\f\v")) s.set(static_cast<unsigned char>(c));
        break;
    default: break;
    }
    if (std::isupper(static_cast<unsigned char>(code))) s.flip();
    return s;
}

bool is_shorthand(char c) { return std::string_view("dDwWsS").find(c) != std::string_view::npos; }

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

/// Decodes a single-character escape starting at the backslash at `i`.
/// Returns the character and the escape's length. `in_class` selects the
/// meaning of \b (backspace inside a class).
std::pair<char, std::size_t> decode_escape(std::string_view p, std::size_t i, bool in_class) {
    if (i + 1 >= p.size()) throw SyntaxError(i, "bad escape (end of pattern)");
    const char e = p[i + 1];
    switch (e) {
    case 't': return {'\t', 2};
    case 'n': return {'\n', 2};
    case 'r': return {'\r', 2};
    case 'f': return {'\f', 2};
    case 'v': return {'\v', 2};
    case '0': return {'\0', 2};
    case 'x': {
        if (i + 3 >= p.size() || hex_value(p[i + 2]) < 0 || hex_value(p[i + 3]) < 0)
            throw SyntaxError(i, "incomplete escape \\x");
        return {static_cast<char>(hex_value(p[i + 2]) * 16 + hex_value(p[i + 3])), 4};
    }
    default: break;
    }
    if (in_class && e == 'b') return {'\b', 2};
    if (std::isdigit(static_cast<unsigned char>(e))) throw SyntaxError(i, "backreferences are not supported");
    if (std::isalpha(static_cast<unsigned char>(e))) throw SyntaxError(i, std::string("bad escape \\") + e);
    return {e, 2};
}

/// Parses a bracket expression starting at '[' (offset `i`). Returns the set
/// and the offset one past the closing ']'.
std::pair<CharSet, std::size_t> parse_class(std::string_view p, std::size_t i) {
    CharSet set;
    std::size_t j = i + 1;
    bool negate = false;
    if (j < p.size() && p[j] == '^') {
        negate = true;
        ++j;
    }
    bool first = true;
    while (true) {
        if (j >= p.size()) throw SyntaxError(i, "unterminated character set");
        const char c = p[j];
        if (c == ']' && !first) {
            ++j;
            break;
        }
        first = false;
        const std::size_t elem_offset = j;
        char lo;
        if (c == '\\') {
            if (j + 1 < p.size() && is_shorthand(p[j + 1])) {
                set |= shorthand_set(p[j + 1]);
                j += 2;
                continue;
            }
            auto [ch, len] = decode_escape(p, j, true);
            lo = ch;
            j += len;
        } else {
            lo = c;
            ++j;
        }
        if (j + 1 < p.size() && p[j] == '-' && p[j + 1] != ']') {
            std::size_t k = j + 1;
            char hi;
            if (p[k] == '\\') {
                if (k + 1 < p.size() && is_shorthand(p[k + 1]))
                    throw SyntaxError(elem_offset, "bad character range");
                auto [ch, len] = decode_escape(p, k, true);
                hi = ch;
                k += len;
            } else {
                hi = p[k];
                ++k;
            }
            const auto ulo = static_cast<unsigned char>(lo);
            const auto uhi = static_cast<unsigned char>(hi);
            if (uhi < ulo) throw SyntaxError(elem_offset, "bad character range");
            for (unsigned c2 = ulo; c2 <= uhi; ++c2) set.set(c2);
            j = k;
        } else {
            set.set(static_cast<unsigned char>(lo));
        }
    }
    if (negate) set.flip();
    return {set, j};
}

struct QuantifierBounds {
    int min;
    int max;
    std::size_t length;  // without the lazy marker
};

/// Recognizes {m}, {m,}, {m,n}, {,n} at `i`; anything else is a literal '{'.
std::optional<QuantifierBounds> parse_braces(std::string_view p, std::size_t i) {
    std::size_t j = i + 1;
    auto digits = [&](std::size_t& k) -> std::optional<long> {
        const std::size_t start = k;
        long v = 0;
        while (k < p.size() && std::isdigit(static_cast<unsigned char>(p[k]))) {
            v = std::min<long>(v * 10 + (p[k] - '0'), 1'000'000);
            ++k;
        }
        if (k == start) return std::nullopt;
        return v;
    };
    auto lo = digits(j);
    if (j < p.size() && p[j] == '}') {
        if (!lo) return std::nullopt;
        return QuantifierBounds{static_cast<int>(*lo), static_cast<int>(*lo), j + 1 - i};
    }
    if (j >= p.size() || p[j] != ',') return std::nullopt;
    ++j;
    auto hi = digits(j);
    if (j >= p.size() || p[j] != '}') return std::nullopt;
    if (!lo && !hi) return std::nullopt;
    return QuantifierBounds{lo ? static_cast<int>(*lo) : 0, hi ? static_cast<int>(*hi) : kUnbounded, j + 1 - i};
}

QuantifierBounds quantifier_bounds(const Token& t) {
    switch (t.text[0]) {
    case '*': return {0, kUnbounded, 1};
    case '+': return {1, kUnbounded, 1};
    case '?': return {0, 1, 1};
    default: return *parse_braces(t.text, 0);
    }
}

class Parser {
public:
    Parser(std::string_view pattern, std::vector<Token> tokens) : pattern_(pattern), tokens_(std::move(tokens)) {}

    Node parse(bool& icase) {
        if (!tokens_.empty() && tokens_[0].kind == TokenKind::flag) {
            icase = true;
            pos_ = 1;
        }
        Node root = parse_alternation();
        if (pos_ < tokens_.size()) throw SyntaxError(tokens_[pos_].offset, "unbalanced parenthesis");
        return root;
    }

private:
    const Token* peek() const { return pos_ < tokens_.size() ? &tokens_[pos_] : nullptr; }

    Node parse_alternation() {
        const std::size_t offset = peek() ? peek()->offset : pattern_.size();
        std::vector<Node> branches;
        branches.push_back(parse_concat());
        while (peek() && peek()->kind == TokenKind::alternation) {
            ++pos_;
            branches.push_back(parse_concat());
        }
        if (branches.size() == 1) return std::move(branches[0]);
        Node alt;
        alt.kind = Node::Kind::alternation;
        alt.children = std::move(branches);
        alt.offset = offset;
        return alt;
    }

    Node parse_concat() {
        Node concat;
        concat.kind = Node::Kind::concat;
        concat.offset = peek() ? peek()->offset : pattern_.size();
        while (const Token* t = peek()) {
            if (t->kind == TokenKind::alternation || t->kind == TokenKind::group_close) break;
            Node atom = parse_atom();
            bool quantified = false;
            while (peek() && peek()->kind == TokenKind::quantifier) {
                const Token& q = *peek();
                if (quantified) throw SyntaxError(q.offset, "multiple repeat");
                if (atom.kind == Node::Kind::assertion) throw SyntaxError(q.offset, "nothing to repeat");
                auto bounds = quantifier_bounds(q);
                if (bounds.max != kUnbounded && bounds.min > bounds.max)
                    throw SyntaxError(q.offset, "min repeat greater than max repeat");
                if (bounds.min > kMaxRepeat || bounds.max > kMaxRepeat)
                    throw SyntaxError(q.offset, "repeat count too large");
                Node rep;
                rep.kind = Node::Kind::repeat;
                rep.min = bounds.min;
                rep.max = bounds.max;
                rep.lazy = q.text.size() > bounds.length;
                rep.offset = atom.offset;
                rep.children.push_back(std::move(atom));
                atom = std::move(rep);
                quantified = true;
                ++pos_;
            }
            concat.children.push_back(std::move(atom));
        }
        if (concat.children.size() == 1) return std::move(concat.children[0]);
        if (concat.children.empty()) concat.kind = Node::Kind::empty;
        return concat;
    }

    Node parse_atom() {
        const Token& t = tokens_[pos_];
        Node n;
        n.offset = t.offset;
        switch (t.kind) {
        case TokenKind::literal:
            n.kind = Node::Kind::literal;
            n.ch = t.text[0];
            ++pos_;
            return n;
        case TokenKind::escaped_literal:
            n.kind = Node::Kind::literal;
            n.ch = decode_escape(t.text, 0, false).first;
            ++pos_;
            return n;
        case TokenKind::dot:
            n.kind = Node::Kind::any;
            ++pos_;
            return n;
        case TokenKind::anchor:
            n.kind = Node::Kind::assertion;
            if (t.text == "^") n.assertion = AssertKind::line_start;
            else if (t.text == "$") n.assertion = AssertKind::line_end;
            else if (t.text == "\\A") n.assertion = AssertKind::text_start;
            else if (t.text == "\\Z") n.assertion = AssertKind::text_end;
            else if (t.text == "\\b") n.assertion = AssertKind::word_boundary;
            else n.assertion = AssertKind::not_word_boundary;
            ++pos_;
            return n;
        case TokenKind::char_class:
            n.kind = Node::Kind::set;
            n.set = parse_class(t.text, 0).first;
            n.negated = t.text.size() > 1 && t.text[1] == '^';
            ++pos_;
            return n;
        case TokenKind::shorthand_class:
            n.kind = Node::Kind::set;
            n.set = shorthand_set(t.text[1]);
            ++pos_;
            return n;
        case TokenKind::group_open:
        case TokenKind::noncapture_open: {
            ++pos_;
            Node inner = parse_alternation();
            if (!peek() || peek()->kind != TokenKind::group_close)
                throw SyntaxError(t.offset, "missing ), unterminated subpattern");
            ++pos_;
            n.kind = Node::Kind::group;
            n.capturing = t.kind == TokenKind::group_open;
            n.children.push_back(std::move(inner));
            return n;
        }
        case TokenKind::quantifier: throw SyntaxError(t.offset, "nothing to repeat");
        case TokenKind::flag: throw SyntaxError(t.offset, "global flags not at the start of the expression");
        case TokenKind::alternation:
        case TokenKind::group_close: break;
        }
        throw SyntaxError(t.offset, "unexpected token");
    }

    std::string_view pattern_;
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

constexpr std::size_t kMaxProgram = 200'000;

}  // namespace

std::vector<Token> tokenize(std::string_view p) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto add = [&](TokenKind kind, std::size_t len) {
        out.push_back(Token{kind, i, std::string(p.substr(i, len))});
        i += len;
    };
    auto lazy_suffix = [&](std::size_t len) { return (i + len < p.size() && p[i + len] == '?') ? len + 1 : len; };

    while (i < p.size()) {
        const char c = p[i];
        switch (c) {
        case '(':
            if (p.substr(i, 4) == "(?i)") add(TokenKind::flag, 4);
            else if (p.substr(i, 3) == "(?:") add(TokenKind::noncapture_open, 3);
            else if (i + 1 < p.size() && p[i + 1] == '?')
                throw SyntaxError(i, "unknown extension (?" + std::string(p.substr(i + 2, 1)));
            else add(TokenKind::group_open, 1);
            break;
        case ')': add(TokenKind::group_close, 1); break;
        case '|': add(TokenKind::alternation, 1); break;
        case '*':
        case '+':
        case '?': add(TokenKind::quantifier, lazy_suffix(1)); break;
        case '{':
            if (auto q = parse_braces(p, i)) add(TokenKind::quantifier, lazy_suffix(q->length));
            else add(TokenKind::literal, 1);
            break;
        case '.': add(TokenKind::dot, 1); break;
        case '^':
        case '$': add(TokenKind::anchor, 1); break;
        case '[': add(TokenKind::char_class, parse_class(p, i).second - i); break;
        case '\\': {
            if (i + 1 >= p.size()) throw SyntaxError(i, "bad escape (end of pattern)");
            const char e = p[i + 1];
            if (is_shorthand(e)) add(TokenKind::shorthand_class, 2);
            else if (e == 'A' || e == 'Z' || e == 'b' || e == 'B') add(TokenKind::anchor, 2);
            else add(TokenKind::escaped_literal, decode_escape(p, i, false).second);
            break;
        }
        default: add(TokenKind::literal, 1); break;
        }
    }
    return out;
}

Regex Regex::compile(std::string_view pattern) {
    Regex re;
    re.pattern_ = std::string(pattern);
    Parser parser(pattern, tokenize(pattern));
    re.ast_ = parser.parse(re.icase_);
    re.emit(re.ast_);
    re.push(Inst{Op::match});
    return re;
}

std::uint32_t Regex::push(Inst inst) {
    if (program_.size() >= kMaxProgram) throw SyntaxError(0, "pattern too large");
    program_.push_back(inst);
    return static_cast<std::uint32_t>(program_.size() - 1);
}

void Regex::emit(const Node& node) {
    auto here = [&] { return static_cast<std::uint32_t>(program_.size()); };
    switch (node.kind) {
    case Node::Kind::empty: break;
    case Node::Kind::literal: push(Inst{Op::character, icase_ ? text::fold(node.ch) : node.ch}); break;
    case Node::Kind::any: push(Inst{Op::any}); break;
    case Node::Kind::assertion: {
        Inst inst{Op::assertion};
        inst.assertion = node.assertion;
        push(inst);
        break;
    }
    case Node::Kind::set: {
        CharSet s = node.set;
        if (icase_) {
            // Close the positive set under case, then complement.
            const CharSet positive = node.negated ? ~node.set : node.set;
            s = positive;
            for (int c = 0; c < 256; ++c) {
                if (!positive.test(c)) continue;
                s.set(static_cast<unsigned char>(std::tolower(c)));
                s.set(static_cast<unsigned char>(std::toupper(c)));
            }
            if (node.negated) s.flip();
        }
        sets_.push_back(s);
        Inst inst{Op::set};
        inst.x = static_cast<std::uint32_t>(sets_.size() - 1);
        push(inst);
        break;
    }
    case Node::Kind::group: emit(node.children[0]); break;
    case Node::Kind::concat:
        for (const auto& c : node.children) emit(c);
        break;
    case Node::Kind::alternation: {
        std::vector<std::uint32_t> jumps;
        for (std::size_t b = 0; b + 1 < node.children.size(); ++b) {
            const auto split = push(Inst{Op::split});
            program_[split].x = here();
            emit(node.children[b]);
            jumps.push_back(push(Inst{Op::jump}));
            program_[split].y = here();
        }
        emit(node.children.back());
        for (auto j : jumps) program_[j].x = here();
        break;
    }
    case Node::Kind::repeat: {
        const Node& child = node.children[0];
        for (int i = 0; i < node.min; ++i) emit(child);
        if (node.max == kUnbounded) {
            const auto split = push(Inst{Op::split});
            program_[split].x = here();
            emit(child);
            Inst back{Op::jump};
            back.x = split;
            push(back);
            program_[split].y = here();
            if (node.lazy) std::swap(program_[split].x, program_[split].y);
        } else {
            std::vector<std::uint32_t> splits;
            for (int i = node.min; i < node.max; ++i) {
                const auto split = push(Inst{Op::split});
                program_[split].x = here();
                emit(child);
                splits.push_back(split);
            }
            for (auto s : splits) {
                program_[s].y = here();
                if (node.lazy) std::swap(program_[s].x, program_[s].y);
            }
        }
        break;
    }
    }
}

std::optional<std::size_t> Regex::run(std::string_view subject, bool first_only) const {
    const std::size_t n = subject.size();
    const std::size_t size = program_.size();
    std::vector<std::uint32_t> current, next, stack;
    std::vector<std::size_t> seen(size, std::numeric_limits<std::size_t>::max());
    current.reserve(size);
    next.reserve(size);

    auto assertion_holds = [&](AssertKind kind, std::size_t pos) {
        const bool before = pos > 0 && is_word(static_cast<unsigned char>(subject[pos - 1]));
        const bool after = pos < n && is_word(static_cast<unsigned char>(subject[pos]));
        switch (kind) {
        case AssertKind::line_start:
        case AssertKind::text_start: return pos == 0;
        case AssertKind::line_end: return pos == n || (pos + 1 == n && subject[pos] == '\n');
        case AssertKind::text_end: return pos == n;
        case AssertKind::word_boundary: return before != after;
        case AssertKind::not_word_boundary: return before == after;
        }
        return false;
    };

    auto add = [&](std::vector<std::uint32_t>& list, std::uint32_t start, std::size_t pos) {
        stack.push_back(start);
        while (!stack.empty()) {
            const auto pc = stack.back();
            stack.pop_back();
            if (seen[pc] == pos) continue;
            seen[pc] = pos;
            const Inst& inst = program_[pc];
            switch (inst.op) {
            case Op::jump: stack.push_back(inst.x); break;
            case Op::split:
                stack.push_back(inst.y);
                stack.push_back(inst.x);
                break;
            case Op::assertion:
                if (assertion_holds(inst.assertion, pos)) stack.push_back(pc + 1);
                break;
            default: list.push_back(pc); break;
            }
        }
    };

    std::optional<std::size_t> best;
    for (std::size_t pos = 0; pos <= n; ++pos) {
        add(current, 0, pos);
        for (const auto pc : current) {
            const Inst& inst = program_[pc];
            bool advance = false;
            if (pos < n) {
                const char c = subject[pos];
                switch (inst.op) {
                case Op::character: advance = (icase_ ? text::fold(c) : c) == inst.ch; break;
                case Op::set: advance = sets_[inst.x].test(static_cast<unsigned char>(c)); break;
                case Op::any: advance = c != '\n'; break;
                default: break;
                }
            }
            if (inst.op == Op::match) {
                best = pos;
                if (first_only) return best;
            }
            if (advance) add(next, pc + 1, pos + 1);
        }
        current.swap(next);
        next.clear();
    }
    return best;
}

bool Regex::search(std::string_view subject) const { return run(subject, true).has_value(); }

std::optional<std::size_t> Regex::furthest_match_end(std::string_view subject) const {
    return run(subject, false);
}

std::optional<SyntaxError> syntax_error(std::string_view pattern) {
    try {
        Regex::compile(pattern);
    } catch (const SyntaxError& e) {
        return e;
    }
    return std::nullopt;
}

std::string escape(std::string_view literal) {
    static constexpr std::string_view kMeta = "\\.^$*+?()[]{}|";
    std::string out;
    out.reserve(literal.size() * 2);
    for (char c : literal) {
        if (kMeta.find(c) != std::string_view::npos) out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

namespace {

/// A set that admits exactly one character (or one letter in both cases)
/// reads as that literal: "[.]" is how people often spell "\.".
std::optional<char> single_char(const CharSet& s) {
    const auto count = s.count();
    if (count == 0 || count > 2) return std::nullopt;
    int first = -1, second = -1;
    for (int c = 0; c < 256; ++c) {
        if (!s.test(c)) continue;
        (first < 0 ? first : second) = c;
    }
    if (count == 1) return static_cast<char>(first);
    if (std::tolower(first) == std::tolower(second) && first != second) return static_cast<char>(std::tolower(first));
    return std::nullopt;
}

class RunCollector {
public:
    std::vector<LiteralRun> collect(const Node& root) {
        walk(root, false);
        flush();
        return std::move(runs_);
    }

private:
    void flush() {
        if (!current_.text.empty()) runs_.push_back(current_);
        current_ = LiteralRun{};
    }

    void append(char c, bool optional) {
        if (!current_.text.empty() && current_.optional != optional) flush();
        current_.optional = optional;
        current_.text.push_back(c);
    }

    void walk(const Node& n, bool optional) {
        switch (n.kind) {
        case Node::Kind::literal: append(n.ch, optional); break;
        case Node::Kind::set:
            if (auto c = single_char(n.set)) append(*c, optional);
            else flush();
            break;
        case Node::Kind::concat:
            for (const auto& c : n.children) walk(c, optional);
            break;
        case Node::Kind::group: walk(n.children[0], optional); break;
        case Node::Kind::alternation:
            flush();
            for (const auto& c : n.children) {
                walk(c, optional);
                flush();
            }
            break;
        case Node::Kind::repeat:
            if (n.min == 1 && n.max == 1) {
                walk(n.children[0], optional);
                break;
            }
            flush();
            walk(n.children[0], optional || n.min == 0);
            flush();
            break;
        case Node::Kind::any:
        case Node::Kind::assertion:
        case Node::Kind::empty: flush(); break;
        }
    }

    std::vector<LiteralRun> runs_;
    LiteralRun current_;
};

bool is_bare_dot_star(const Node& n) {
    return n.kind == Node::Kind::repeat && n.min == 0 && n.max == kUnbounded &&
           n.children[0].kind == Node::Kind::any;
}

int wildcard_units(const Node& n) {
    switch (n.kind) {
    case Node::Kind::any: return 1;
    case Node::Kind::repeat: {
        const Node& child = n.children[0];
        if (child.kind == Node::Kind::any) return 1;
        if (child.kind == Node::Kind::set && !single_char(child.set)) return (n.min == 1 && n.max == 1) ? 0 : 1;
        return wildcard_units(child);
    }
    case Node::Kind::group:
    case Node::Kind::concat:
    case Node::Kind::alternation: {
        int total = 0;
        for (const auto& c : n.children) total += wildcard_units(c);
        return total;
    }
    default: return 0;
    }
}

}  // namespace

std::vector<LiteralRun> literal_runs(const Node& ast) { return RunCollector{}.collect(ast); }

int count_wildcard_units(const Node& ast, bool exempt_frame) {
    int total = wildcard_units(ast);
    if (!exempt_frame) return total;
    if (is_bare_dot_star(ast)) return total - 1;
    if (ast.kind == Node::Kind::concat && !ast.children.empty()) {
        if (is_bare_dot_star(ast.children.front())) --total;
        if (ast.children.size() > 1 && is_bare_dot_star(ast.children.back())) --total;
    }
    return total;
}

StructuralFeatures structural_features(std::string_view pattern) {
    StructuralFeatures f;
    for (const auto& t : tokenize(pattern)) {
        switch (t.kind) {
        case TokenKind::group_open:
        case TokenKind::noncapture_open: f.counts[0] += 1; break;
        case TokenKind::char_class:
        case TokenKind::shorthand_class: f.counts[1] += 1; break;
        case TokenKind::dot: f.counts[2] += 1; break;
        case TokenKind::anchor: f.counts[3] += 1; break;
        case TokenKind::quantifier: f.counts[4] += 1; break;
        case TokenKind::alternation: f.counts[5] += 1; break;
        case TokenKind::escaped_literal: f.counts[6] += 1; break;
        default: break;
        }
    }
    return f;
}

}  // namespace iocregex::rx
