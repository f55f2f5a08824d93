#ifndef SPILLOVER_IV_POPULATION_HPP
#define SPILLOVER_IV_POPULATION_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "compliance.hpp"

namespace spiv {

using json = nlohmann::json;

/// Malformed or inconsistent input (config, CSV, flags). Maps to CLI exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OutcomeSupport {
    double lo = 0.0;
    double hi = 1.0;
    friend bool operator==(const OutcomeSupport&, const OutcomeSupport&) = default;
};

/// Mean potential outcome E[Y(d_own, d_peers) | type], exchangeable in peers:
/// the peer treatments enter only through the treated-peer count k in 0..m.
class OutcomeMeanFunction {
public:
    struct Row {
        std::vector<double> untreated;  // indexed by k
        std::vector<double> treated;
        friend bool operator==(const Row&, const Row&) = default;
    };

    OutcomeMeanFunction() = default;

    void set(ComplianceType t, std::vector<double> untreated, std::vector<double> treated) {
        rows_[index_of(t)] = Row{std::move(untreated), std::move(treated)};
    }
    [[nodiscard]] bool defined(ComplianceType t) const noexcept { return rows_[index_of(t)].has_value(); }
    [[nodiscard]] const std::optional<Row>& row(ComplianceType t) const noexcept { return rows_[index_of(t)]; }

    [[nodiscard]] double operator()(ComplianceType t, int d_own, int treated_peers) const {
        const auto& r = rows_[index_of(t)];
        if (!r) throw std::out_of_range(std::string("outcome mean undefined for type ") + type_letter(t));
        const auto& v = d_own ? r->treated : r->untreated;
        if (treated_peers < 0 || treated_peers >= static_cast<int>(v.size()))
            throw std::out_of_range("outcome mean: treated-peer count out of range");
        return v[treated_peers];
    }

    friend bool operator==(const OutcomeMeanFunction&, const OutcomeMeanFunction&) = default;

private:
    std::array<std::optional<Row>, 6> rows_{};
};

struct WeightedProfile {
    GroupProfile profile;
    double prob = 0.0;
    friend bool operator==(const WeightedProfile&, const WeightedProfile&) = default;
};

struct PopulationSpec {
    int m = 1;
    std::vector<WeightedProfile> profiles;
    OutcomeMeanFunction mu;
    OutcomeSupport support;
    double p_z = 0.5;
    double noise_sd = 0.0;

    [[nodiscard]] int group_size() const noexcept { return m + 1; }

    /// Share of members of each type, each member of a profile weighted prob / group size.
    [[nodiscard]] std::array<double, 6> type_marginals() const {
        std::array<double, 6> w{};
        for (const auto& wp : profiles)
            for (auto t : wp.profile.types) w[index_of(t)] += wp.prob / static_cast<double>(wp.profile.size());
        return w;
    }
    [[nodiscard]] bool has_type(ComplianceType t) const noexcept {
        for (const auto& wp : profiles)
            if (wp.prob > 0.0 && wp.profile.contains(t)) return true;
        return false;
    }
    friend bool operator==(const PopulationSpec&, const PopulationSpec&) = default;
};

struct ValidationReport {
    std::vector<std::string> violations;
    [[nodiscard]] bool ok() const noexcept { return violations.empty(); }
};

namespace detail {
inline std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}
}  // namespace detail

inline ValidationReport validate_spec(const PopulationSpec& spec) {
    ValidationReport r;
    auto add = [&r](std::string s) { r.violations.push_back(std::move(s)); };

    if (spec.m < 1) add("m must be at least 1, got " + std::to_string(spec.m));
    if (!std::isfinite(spec.p_z) || spec.p_z <= 0.0 || spec.p_z >= 1.0)
        add("p_z must lie strictly inside (0,1), got " + detail::fmt_g(spec.p_z));
    if (!std::isfinite(spec.support.lo) || !std::isfinite(spec.support.hi))
        add("y_support must be finite");
    else if (spec.support.lo > spec.support.hi)
        add("y_support lower end exceeds upper end");
    if (!std::isfinite(spec.noise_sd) || spec.noise_sd < 0.0)
        add("noise_sd must be finite and nonnegative, got " + detail::fmt_g(spec.noise_sd));
    if (spec.profiles.empty()) add("profile_dist is empty");

    double total = 0.0;
    std::array<bool, 6> used{};
    for (std::size_t i = 0; i < spec.profiles.size(); ++i) {
        const auto& wp = spec.profiles[i];
        if (!std::isfinite(wp.prob) || wp.prob < 0.0)
            add("profile " + std::to_string(i) + " has invalid probability " + detail::fmt_g(wp.prob));
        else
            total += wp.prob;
        if (wp.profile.size() != spec.m + 1)
            add("profile " + std::to_string(i) + " (" + wp.profile.letters() + ") has length " +
                std::to_string(wp.profile.size()) + ", expected m+1 = " + std::to_string(spec.m + 1));
        for (auto t : wp.profile.types) used[index_of(t)] = true;
    }
    if (std::abs(total - 1.0) > 1e-12) add("profile_dist sums to " + detail::fmt_g(total));

    for (auto t : kAllTypes) {
        const auto& row = spec.mu.row(t);
        if (!row) {
            if (used[index_of(t)]) add(std::string("mu missing for type ") + type_letter(t));
            continue;
        }
        for (int d = 0; d < 2; ++d) {
            const auto& v = d ? row->treated : row->untreated;
            const std::string tag = std::string("mu[") + type_letter(t) + "].d" + std::to_string(d);
            if (spec.m >= 1 && static_cast<int>(v.size()) != spec.m + 1)
                add(tag + " has " + std::to_string(v.size()) + " entries, expected m+1 = " + std::to_string(spec.m + 1));
            for (std::size_t k = 0; k < v.size(); ++k) {
                if (!std::isfinite(v[k]))
                    add(tag + "[" + std::to_string(k) + "] is not finite");
                else if (v[k] < spec.support.lo || v[k] > spec.support.hi)
                    add(tag + "[" + std::to_string(k) + "] = " + detail::fmt_g(v[k]) + " lies outside y_support");
            }
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json_value(const PopulationSpec& s) {
    json j;
    j["m"] = s.m;
    j["p_z"] = s.p_z;
    j["y_support"] = {s.support.lo, s.support.hi};
    j["noise_sd"] = s.noise_sd;
    json profiles = json::array();
    for (const auto& wp : s.profiles) {
        json types = json::array();
        for (auto t : wp.profile.types) types.push_back(std::string(1, type_letter(t)));
        profiles.push_back({{"types", types}, {"prob", wp.prob}});
    }
    j["profiles"] = profiles;
    json mu = json::object();
    for (auto t : kAllTypes) {
        const auto& row = s.mu.row(t);
        if (!row) continue;
        mu[std::string(1, type_letter(t))] = {{"d0", row->untreated}, {"d1", row->treated}};
    }
    j["mu"] = mu;
    return j;
}

inline PopulationSpec spec_from_json(const json& j) {
    try {
        PopulationSpec s;
        s.m = j.at("m").get<int>();
        s.p_z = j.at("p_z").get<double>();
        const auto& sup = j.at("y_support");
        if (!sup.is_array() || sup.size() != 2) throw InputError("y_support must be a two-element array");
        s.support = {sup[0].get<double>(), sup[1].get<double>()};
        s.noise_sd = j.value("noise_sd", 0.0);
        for (const auto& p : j.at("profiles")) {
            WeightedProfile wp;
            for (const auto& t : p.at("types")) {
                auto parsed = parse_type_letter(t.get<std::string>());
                if (!parsed) throw InputError("unknown compliance type letter '" + t.get<std::string>() + "'");
                wp.profile.types.push_back(*parsed);
            }
            wp.prob = p.at("prob").get<double>();
            s.profiles.push_back(std::move(wp));
        }
        for (const auto& [key, val] : j.at("mu").items()) {
            auto parsed = parse_type_letter(key);
            if (!parsed) throw InputError("unknown compliance type letter '" + key + "' in mu");
            s.mu.set(*parsed, val.at("d0").get<std::vector<double>>(), val.at("d1").get<std::vector<double>>());
        }
        return s;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed population spec: ") + e.what());
    }
}

inline PopulationSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError("config is not valid JSON: " + std::string(e.what()));
    }
    return spec_from_json(j);
}

/// FNV-1a over the canonical JSON text; identifies a spec in reports and dataset sidecars.
inline std::string spec_digest(const PopulationSpec& s) {
    const std::string text = to_json_value(s).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace spiv

#endif  // SPILLOVER_IV_POPULATION_HPP
