#ifndef SPILLOVER_IV_DATASET_HPP
#define SPILLOVER_IV_DATASET_HPP

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "population.hpp"

namespace spiv {

struct Row {
    std::int64_t group_id = 0;
    std::int64_t unit_id = 0;
    int z = 0;
    int d = 0;
    double y = 0.0;
    friend bool operator==(const Row&, const Row&) = default;
};

struct Sidecar {
    std::uint64_t seed = 0;
    std::string spec_digest;
    friend bool operator==(const Sidecar&, const Sidecar&) = default;
};

/// Rows stored group by group, each group contiguous with m+1 members.
struct Dataset {
    int m = 1;
    std::vector<Row> rows;
    std::vector<double> group_weights;  // empty: every group weighs 1
    std::optional<Sidecar> sidecar;

    [[nodiscard]] int group_size() const noexcept { return m + 1; }
    [[nodiscard]] std::size_t n_groups() const noexcept { return rows.size() / static_cast<std::size_t>(m + 1); }
    [[nodiscard]] const Row* group(std::size_t g) const noexcept { return rows.data() + g * (m + 1); }
    [[nodiscard]] double weight(std::size_t g) const noexcept {
        return group_weights.empty() ? 1.0 : group_weights[g];
    }
    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Parse failure carrying the 1-based CSV line (0 when not tied to a line).
class ParseError : public InputError {
public:
    ParseError(std::size_t line, const std::string& msg)
        : InputError(line ? "row " + std::to_string(line) + ": " + msg : msg), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline constexpr std::string_view kCsvHeader = "group_id,unit_id,z,d,y";

namespace detail {
/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}
}  // namespace detail

inline void write_csv(const Dataset& data, std::ostream& out) {
    std::string line;
    out << kCsvHeader << '\n';
    for (const auto& r : data.rows) {
        line.clear();
        line += std::to_string(r.group_id);
        line += ',';
        line += std::to_string(r.unit_id);
        line += ',';
        line += static_cast<char>('0' + r.z);
        line += ',';
        line += static_cast<char>('0' + r.d);
        line += ',';
        line += detail::format_double(r.y);
        line += '\n';
        out << line;
    }
}

inline void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open " + path + " for writing");
    write_csv(data, out);
    if (!out) throw InputError("write failed: " + path);
}

/// Reads the CSV layout written by write_csv. Groups may appear in any order but each
/// group's rows are kept in file order.
inline Dataset read_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError(0, "empty input");
    ++lineno;
    if (detail::trim(line) != kCsvHeader)
        throw ParseError(lineno, "expected header '" + std::string(kCsvHeader) + "'");

    std::vector<std::vector<Row>> groups;
    std::vector<std::size_t> first_line;
    std::unordered_map<std::int64_t, std::size_t> index;
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = detail::trim(line);
        if (text.empty()) continue;
        std::string_view fields[5];
        std::size_t nf = 0, start = 0;
        for (std::size_t i = 0; i <= text.size(); ++i) {
            if (i == text.size() || text[i] == ',') {
                if (nf == 5) throw ParseError(lineno, "expected 5 fields");
                fields[nf++] = detail::trim(text.substr(start, i - start));
                start = i + 1;
            }
        }
        if (nf != 5) throw ParseError(lineno, "expected 5 fields, found " + std::to_string(nf));
        Row r;
        if (!detail::parse_number(fields[0], r.group_id)) throw ParseError(lineno, "group_id is not an integer");
        if (!detail::parse_number(fields[1], r.unit_id)) throw ParseError(lineno, "unit_id is not an integer");
        if (!detail::parse_number(fields[2], r.z) || (r.z != 0 && r.z != 1))
            throw ParseError(lineno, "z must be 0 or 1, got '" + std::string(fields[2]) + "'");
        if (!detail::parse_number(fields[3], r.d) || (r.d != 0 && r.d != 1))
            throw ParseError(lineno, "d must be 0 or 1, got '" + std::string(fields[3]) + "'");
        if (!detail::parse_number(fields[4], r.y) || !std::isfinite(r.y))
            throw ParseError(lineno, "y is not a finite number: '" + std::string(fields[4]) + "'");
        auto [it, fresh] = index.try_emplace(r.group_id, groups.size());
        if (fresh) {
            groups.emplace_back();
            first_line.push_back(lineno);
        }
        for (const auto& other : groups[it->second])
            if (other.unit_id == r.unit_id)
                throw ParseError(lineno, "duplicate unit_id " + std::to_string(r.unit_id) + " in group " +
                                             std::to_string(r.group_id));
        groups[it->second].push_back(r);
    }
    if (groups.empty()) throw ParseError(lineno, "no data rows");
    const std::size_t g = groups.front().size();
    if (g < 2) throw ParseError(first_line.front(), "groups need at least two members");
    Dataset data;
    data.m = static_cast<int>(g) - 1;
    data.rows.reserve(groups.size() * g);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (groups[i].size() != g)
            throw ParseError(first_line[i], "inconsistent group size: group " + std::to_string(groups[i].front().group_id) +
                                                " has " + std::to_string(groups[i].size()) + " members, expected " +
                                                std::to_string(g));
        data.rows.insert(data.rows.end(), groups[i].begin(), groups[i].end());
    }
    return data;
}

inline Dataset read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    return read_csv(in);
}

inline Dataset read_csv_text(const std::string& text) {
    std::istringstream in(text);
    return read_csv(in);
}

inline nlohmann::json to_json_value(const Sidecar& s) { return {{"seed", s.seed}, {"spec_digest", s.spec_digest}}; }

}  // namespace spiv

#endif  // SPILLOVER_IV_DATASET_HPP
