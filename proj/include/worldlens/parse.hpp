#pragma once

#include <cctype>
#include <string>
#include <string_view>

#include "worldlens/goal.hpp"
#include "worldlens/world.hpp"

namespace worldlens {

/// Syntax error with the offending position in the source text.
struct GoalParseError : GoalError {
    GoalParseError(std::size_t pos, const std::string& what)
        : GoalError("at position " + std::to_string(pos) + ": " + what), position(pos) {}
    std::size_t position;
};

namespace detail {

class GoalParser {
public:
    GoalParser(std::string_view text, const World& world) : text_(text), world_(world) {}

    Goal parse() {
        std::vector<SequentialGoal> disjuncts;
        disjuncts.push_back(parse_seq());
        while (peek() == '|') {
            ++pos_;
            disjuncts.push_back(parse_seq());
        }
        skip_ws();
        if (pos_ != text_.size()) fail("trailing input");
        return Goal(std::move(disjuncts));
    }

private:
    SequentialGoal parse_seq() {
        expect('<');
        SequentialGoal seq;
        seq.parts.push_back(parse_basic());
        while (peek() == ',') {
            ++pos_;
            seq.parts.push_back(parse_basic());
        }
        expect('>');
        return seq;
    }

    BasicGoal parse_basic() {
        std::string op = parse_word();
        BasicGoal g;
        if (op == "NOW") g.op = TemporalOp::Now;
        else if (op == "NEXT") g.op = TemporalOp::Next;
        else if (op == "EV") g.op = TemporalOp::Eventually;
        else fail("expected NOW, NEXT or EV, got '" + op + "'");
        expect('[');
        g.pred = parse_pred();
        expect(']');
        return g;
    }

    PairPred parse_pred() {
        if (peek() == '{') {
            ++pos_;
            PairPred p;
            p.explicit_set = true;
            p.pairs.push_back(parse_pair());
            while (peek() == ',') {
                ++pos_;
                p.pairs.push_back(parse_pair());
            }
            expect('}');
            return p;
        }
        PairPred p;
        p.atoms.push_back(parse_atom());
        while (peek() == ',') {
            ++pos_;
            p.atoms.push_back(parse_atom());
        }
        return p;
    }

    std::pair<int, int> parse_pair() {
        expect('(');
        int s = resolve_state(parse_word());
        expect(',');
        int a = resolve_action(parse_word());
        expect(')');
        return {s, a};
    }

    PairPred::Atom parse_atom() {
        std::string kind = parse_word();
        PairPred::Atom atom;
        if (kind == "S") atom.on_state = true;
        else if (kind == "A") atom.on_state = false;
        else fail("expected S or A, got '" + kind + "'");
        if (peek() == '!') {
            ++pos_;
            expect('=');
            atom.negate = true;
        } else {
            expect('=');
        }
        std::string name = parse_word();
        atom.id = atom.on_state ? resolve_state(name) : resolve_action(name);
        return atom;
    }

    int resolve_state(const std::string& name) {
        if (auto idx = world_.state_index(name)) return *idx;
        int raw;
        if (parse_int(name, raw) && raw >= 0 && raw < world_.num_states()) return raw;
        fail("unknown state '" + name + "'");
        return -1;
    }

    int resolve_action(const std::string& name) {
        if (auto idx = world_.action_index(name)) return *idx;
        int raw;
        if (parse_int(name, raw) && raw >= 0 && raw < world_.num_actions()) return raw;
        fail("unknown action '" + name + "'");
        return -1;
    }

    static bool parse_int(const std::string& tok, int& out) {
        if (tok.empty()) return false;
        out = 0;
        for (char c : tok) {
            if (!std::isdigit(static_cast<unsigned char>(c))) return false;
            out = out * 10 + (c - '0');
        }
        return true;
    }

    static bool word_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
    }

    std::string parse_word() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() && word_char(text_[pos_])) ++pos_;
        if (pos_ == start) fail("expected a name");
        return std::string(text_.substr(start, pos_ - start));
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    [[noreturn]] void fail(const std::string& what) { throw GoalParseError(pos_, what); }

    std::string_view text_;
    const World& world_;
    std::size_t pos_ = 0;
};

} // namespace detail

/// Parses the goal DSL. Grammar:
///   goal  := seq ("|" seq)*
///   seq   := "<" basic ("," basic)* ">"
///   basic := ("NOW"|"NEXT"|"EV") "[" pred "]"
///   pred  := atom ("," atom)* | "{" "(" s "," a ")" ("," "(" s "," a ")")* "}"
///   atom  := ("S"|"A") ("="|"!=") name
/// Whitespace-insensitive; names resolve against the world's name table, raw
/// indices are accepted as a fallback.
inline Goal parse_goal(std::string_view text, const World& world) {
    return detail::GoalParser(text, world).parse();
}

inline std::string format_pred(const PairPred& p, const World& world) {
    std::string out;
    if (p.explicit_set) {
        out += "{";
        for (std::size_t i = 0; i < p.pairs.size(); ++i) {
            if (i) out += ", ";
            out += "(" + world.state_name(p.pairs[i].first) + ", " +
                   world.action_name(p.pairs[i].second) + ")";
        }
        out += "}";
        return out;
    }
    for (std::size_t i = 0; i < p.atoms.size(); ++i) {
        const auto& a = p.atoms[i];
        if (i) out += ", ";
        out += a.on_state ? "S" : "A";
        out += a.negate ? "!=" : "=";
        out += a.on_state ? world.state_name(a.id) : world.action_name(a.id);
    }
    return out;
}

inline std::string format_goal(const Goal& goal, const World& world) {
    const Goal expanded = goal.materialize();
    std::string out;
    bool first_seq = true;
    for (const SequentialGoal& seq : expanded.disjuncts()) {
        if (!first_seq) out += " | ";
        first_seq = false;
        out += "<";
        for (std::size_t i = 0; i < seq.parts.size(); ++i) {
            if (i) out += ", ";
            const BasicGoal& g = seq.parts[i];
            switch (g.op) {
            case TemporalOp::Now: out += "NOW["; break;
            case TemporalOp::Next: out += "NEXT["; break;
            case TemporalOp::Eventually: out += "EV["; break;
            }
            out += format_pred(g.pred, world);
            out += "]";
        }
        out += ">";
    }
    return out;
}

} // namespace worldlens
