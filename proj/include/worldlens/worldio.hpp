#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "worldlens/world.hpp"

namespace worldlens {

struct WorldFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline bool parse_int(const std::string& tok, int& out) {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline bool parse_double(const std::string& tok, double& out) {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline int resolve_id(const std::string& tok, const std::vector<std::string>& names,
                      int count, const char* kind, int line_no) {
    for (int i = 0; i < static_cast<int>(names.size()); ++i)
        if (names[i] == tok) return i;
    int idx;
    if (parse_int(tok, idx) && idx >= 0 && idx < count) return idx;
    throw WorldFormatError("line " + std::to_string(line_no) + ": unknown " + kind + " '" +
                           tok + "'");
}

/// Shortest round-tripping decimal for a double, locale-independent.
inline std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        double back;
        std::string s(buf);
        if (parse_double(s, back) && back == v) return s;
    }
    return buf;
}

} // namespace detail

/// Line-oriented world file:
///   states N / actions M / observations K headers,
///   optional name table lines `sname i name`, `aname i name`, `oname i name`,
///   transitions `t s a s' prob`, observation rows `o s obs prob`,
///   `#` comments. Identifier fields accept a declared name or a raw index.
inline WorldData read_world_data(std::istream& in) {
    WorldData d;
    bool have_states = false, have_actions = false;
    std::string line;
    int line_no = 0;
    auto need_dims = [&](int ln) {
        if (!have_states || !have_actions)
            throw WorldFormatError("line " + std::to_string(ln) +
                                   ": states/actions headers must come first");
    };
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        auto next_tok = [&](const char* what) {
            std::string tok;
            if (!(ls >> tok))
                throw WorldFormatError("line " + std::to_string(line_no) + ": missing " +
                                       std::string(what));
            return tok;
        };
        if (key == "states") {
            if (!detail::parse_int(next_tok("count"), d.num_states) || d.num_states < 1)
                throw WorldFormatError("line " + std::to_string(line_no) + ": bad state count");
            have_states = true;
        } else if (key == "actions") {
            if (!detail::parse_int(next_tok("count"), d.num_actions) || d.num_actions < 1)
                throw WorldFormatError("line " + std::to_string(line_no) + ": bad action count");
            have_actions = true;
        } else if (key == "observations") {
            if (!detail::parse_int(next_tok("count"), d.num_observations) ||
                d.num_observations < 1)
                throw WorldFormatError("line " + std::to_string(line_no) +
                                       ": bad observation count");
        } else if (key == "sname" || key == "aname" || key == "oname") {
            need_dims(line_no);
            int idx;
            if (!detail::parse_int(next_tok("index"), idx))
                throw WorldFormatError("line " + std::to_string(line_no) + ": bad name index");
            std::string name = next_tok("name");
            auto assign = [&](std::vector<std::string>& names, int count) {
                if (idx < 0 || idx >= count)
                    throw WorldFormatError("line " + std::to_string(line_no) +
                                           ": name index out of range");
                names.resize(count);
                names[idx] = name;
            };
            if (key == "sname") assign(d.state_names, d.num_states);
            else if (key == "aname") assign(d.action_names, d.num_actions);
            else assign(d.observation_names, d.num_observations);
        } else if (key == "t") {
            need_dims(line_no);
            if (d.kernel.empty())
                d.kernel.assign(static_cast<std::size_t>(d.num_states) * d.num_actions *
                                    d.num_states,
                                0.0);
            int s = detail::resolve_id(next_tok("state"), d.state_names, d.num_states,
                                       "state", line_no);
            int a = detail::resolve_id(next_tok("action"), d.action_names, d.num_actions,
                                       "action", line_no);
            int s2 = detail::resolve_id(next_tok("state"), d.state_names, d.num_states,
                                        "state", line_no);
            double p;
            if (!detail::parse_double(next_tok("probability"), p))
                throw WorldFormatError("line " + std::to_string(line_no) + ": bad probability");
            d.kernel[(static_cast<std::size_t>(s) * d.num_actions + a) * d.num_states + s2] += p;
        } else if (key == "o") {
            need_dims(line_no);
            if (d.num_observations < 1)
                throw WorldFormatError("line " + std::to_string(line_no) +
                                       ": observation row without observations header");
            if (d.obs_kernel.empty())
                d.obs_kernel.assign(
                    static_cast<std::size_t>(d.num_states) * d.num_observations, 0.0);
            int s = detail::resolve_id(next_tok("state"), d.state_names, d.num_states,
                                       "state", line_no);
            int o = detail::resolve_id(next_tok("observation"), d.observation_names,
                                       d.num_observations, "observation", line_no);
            double p;
            if (!detail::parse_double(next_tok("probability"), p))
                throw WorldFormatError("line " + std::to_string(line_no) + ": bad probability");
            d.obs_kernel[static_cast<std::size_t>(s) * d.num_observations + o] += p;
        } else {
            throw WorldFormatError("line " + std::to_string(line_no) + ": unknown directive '" +
                                   key + "'");
        }
    }
    if (!have_states || !have_actions)
        throw WorldFormatError("missing states/actions headers");
    if (d.kernel.empty())
        d.kernel.assign(static_cast<std::size_t>(d.num_states) * d.num_actions * d.num_states,
                        0.0);
    return d;
}

inline WorldData read_world_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw WorldFormatError("cannot open world file '" + path + "'");
    return read_world_data(in);
}

inline void write_world_data(std::ostream& out, const WorldData& d) {
    out << "states " << d.num_states << "\n";
    out << "actions " << d.num_actions << "\n";
    if (d.num_observations > 0) out << "observations " << d.num_observations << "\n";
    for (int s = 0; s < static_cast<int>(d.state_names.size()); ++s)
        if (!d.state_names[s].empty()) out << "sname " << s << " " << d.state_names[s] << "\n";
    for (int a = 0; a < static_cast<int>(d.action_names.size()); ++a)
        if (!d.action_names[a].empty()) out << "aname " << a << " " << d.action_names[a] << "\n";
    for (int o = 0; o < static_cast<int>(d.observation_names.size()); ++o)
        if (!d.observation_names[o].empty())
            out << "oname " << o << " " << d.observation_names[o] << "\n";
    for (int s = 0; s < d.num_states; ++s)
        for (int a = 0; a < d.num_actions; ++a)
            for (int s2 = 0; s2 < d.num_states; ++s2) {
                double p = d.kernel[(static_cast<std::size_t>(s) * d.num_actions + a) *
                                        d.num_states +
                                    s2];
                if (p != 0.0)
                    out << "t " << s << " " << a << " " << s2 << " "
                        << detail::format_double(p) << "\n";
            }
    for (int s = 0; s < d.num_states && d.num_observations > 0; ++s)
        for (int o = 0; o < d.num_observations; ++o) {
            double p = d.obs_kernel[static_cast<std::size_t>(s) * d.num_observations + o];
            if (p != 0.0)
                out << "o " << s << " " << o << " " << detail::format_double(p) << "\n";
        }
}

inline void write_world_file(const std::string& path, const WorldData& d) {
    std::ofstream out(path, std::ios::binary); // "\n" endings on every platform
    if (!out) throw WorldFormatError("cannot open '" + path + "' for writing");
    write_world_data(out, d);
}

} // namespace worldlens
