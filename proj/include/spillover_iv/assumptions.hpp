#ifndef SPILLOVER_IV_ASSUMPTIONS_HPP
#define SPILLOVER_IV_ASSUMPTIONS_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "compliance.hpp"
#include "enumeration.hpp"
#include "estimand.hpp"
#include "population.hpp"

namespace spiv {

struct NamedValue {
    std::string name;
    double value = 0.0;
};

struct AssumptionReport {
    std::string assumption;
    bool pass = true;
    bool vacuous = false;
    std::vector<nlohmann::json> witnesses;
    std::vector<NamedValue> values;

    void fail(nlohmann::json witness) {
        pass = false;
        witnesses.push_back(std::move(witness));
    }
};

inline nlohmann::json to_json_value(const AssumptionReport& r) {
    nlohmann::json j;
    j["assumption"] = r.assumption;
    j["pass"] = r.pass;
    j["vacuous"] = r.vacuous;
    j["witnesses"] = r.witnesses;
    nlohmann::json vals = nlohmann::json::object();
    for (const auto& v : r.values) vals[v.name] = v.value;
    j["values"] = vals;
    return j;
}

// ---------------------------------------------------------------------------
// Irrelevance

/// Largest group the exhaustive check will enumerate (2^g assignments).
inline constexpr int kMaxEnumeratedGroup = 12;

/// If flipping a member's own assignment leaves its own treatment unchanged, no other
/// member's treatment may change. Exhaustive over all assignments; refuses large groups.
inline AssumptionReport check_irrelevance(const GroupProfile& profile) {
    AssumptionReport r;
    r.assumption = "irrelevance";
    const int g = profile.size();
    if (g > kMaxEnumeratedGroup)
        throw std::length_error("check_irrelevance: group size " + std::to_string(g) +
                                " exceeds the enumeration budget of " + std::to_string(kMaxEnumeratedGroup));
    if (g < 2) throw std::invalid_argument("check_irrelevance: a group needs at least two members");

    std::vector<int> z(g), z_flip(g);
    for (std::uint32_t mask = 0; mask < (1u << g); ++mask) {
        for (int j = 0; j < g; ++j) z[j] = (mask >> j) & 1u;
        const auto d = group_treatments(profile, z);
        for (int i = 0; i < g; ++i) {
            if (z[i] == 1) continue;
            z_flip = z;
            z_flip[i] = 1;
            const auto d_flip = group_treatments(profile, z_flip);
            if (d_flip[i] != d[i]) continue;
            for (int j = 0; j < g; ++j) {
                if (j == i || d_flip[j] == d[j]) continue;
                r.fail({{"profile", profile.letters()},
                        {"member", i},
                        {"z", z},
                        {"moved_member", j},
                        {"d_before", d},
                        {"d_after", d_flip}});
                return r;
            }
        }
    }
    return r;
}

/// excluded[own][peer] for every ordered pair of types.
using PairTable = std::array<std::array<bool, 6>, 6>;

inline PairTable check_pair_exclusion_table() {
    PairTable t{};
    for (auto a : kAllTypes)
        for (auto b : kAllTypes) t[index_of(a)][index_of(b)] = !check_irrelevance(GroupProfile{{a, b}}).pass;
    return t;
}

/// First positive-probability profile violating irrelevance, if any.
inline AssumptionReport check_spec_irrelevance(const PopulationSpec& spec) {
    AssumptionReport r;
    r.assumption = "irrelevance";
    for (const auto& wp : spec.profiles) {
        if (wp.prob <= 0.0) continue;
        auto pr = check_irrelevance(wp.profile);
        if (!pr.pass) {
            for (auto& w : pr.witnesses) r.fail(std::move(w));
            return r;
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// One-sided noncompliance

inline AssumptionReport check_osnc(const PopulationSpec& spec) {
    AssumptionReport r;
    r.assumption = "one_sided_noncompliance";
    for (const auto& wp : spec.profiles) {
        if (wp.prob <= 0.0) continue;
        for (auto t : {ComplianceType::AlwaysTaker, ComplianceType::SocialComplier, ComplianceType::PeerComplier})
            if (wp.profile.contains(t)) {
                r.fail({{"profile", wp.profile.letters()}, {"prob", wp.prob}, {"type", std::string(1, type_letter(t))}});
                break;
            }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Effect populations and existence events

/// Members for whom the estimand is defined (its conditioning event).
inline bool in_effect_population(const MemberPotentials& mp, Estimand e) {
    switch (e) {
        case Estimand::tauD0: return mp.d(1, 0) > mp.d(0, 0) && mp.peers_none(0, 0);
        case Estimand::tauD1: return mp.d(1, 1) > mp.d(0, 1) && mp.peers_all(1, 1);
        case Estimand::tauS0: return mp.d(0, 0) == 0 && mp.peers_leave_zero(0, 1, 0, 0);
        case Estimand::tauS1: return mp.d(1, 1) == 1 && mp.peers_leave_zero(1, 1, 1, 0);
        case Estimand::late: return mp.d(1, 0) > mp.d(0, 0);
    }
    return false;
}

namespace event {
/// Untreated member whose peers stay untreated when everyone is assigned.
inline bool never_group(const MemberPotentials& mp) { return mp.d(1, 1) == 0 && mp.peers_none(1, 1); }
/// Treated member whose peers are all treated when nobody is assigned.
inline bool always_group(const MemberPotentials& mp) { return mp.d(0, 0) == 1 && mp.peers_all(0, 0); }
/// Always treated at own z = 0, with peers moved off zero by their own assignment.
inline bool taker_with_induced_peers(const MemberPotentials& mp) {
    return mp.d(0, 1) == 1 && mp.d(0, 0) == 1 && mp.peers_leave_zero(0, 1, 0, 0);
}
/// Untreated at full assignment, with peers moved to all treated by their assignment.
inline bool refuser_with_induced_peers(const MemberPotentials& mp) {
    return mp.d(1, 1) == 0 && mp.peers_reach_all(1, 1, 1, 0);
}
/// Treated at own z = 1 regardless of peers, with peers moved off zero by their assignment.
inline bool own_responder_with_induced_peers(const MemberPotentials& mp) {
    return mp.d(1, 1) == 1 && mp.d(1, 0) == 1 && mp.peers_leave_zero(1, 1, 1, 0);
}
}  // namespace event

/// Existence probabilities: the effect population and the shares behind each bound's
/// secondary denominators. pass iff the effect population has positive mass.
inline AssumptionReport check_relevance(const PopulationSpec& spec, Estimand e, BoundMode mode) {
    AssumptionReport r;
    r.assumption = std::string("relevance_") + std::string(estimand_name(e));
    const double primary = member_probability(spec, [e](const MemberPotentials& mp) { return in_effect_population(mp, e); });
    r.values.push_back({"effect_population", primary});

    auto secondary = [&](const char* name, auto pred) { r.values.push_back({name, member_probability(spec, pred)}); };
    switch (e) {
        case Estimand::tauD0:
            secondary("lower_never_group", event::never_group);
            secondary("upper_taker_with_induced_peers", event::taker_with_induced_peers);
            break;
        case Estimand::tauD1:
            secondary("lower_always_group", event::always_group);
            secondary("upper_refuser_with_induced_peers", event::refuser_with_induced_peers);
            break;
        case Estimand::tauS0:
            if (mode == BoundMode::pairs) {
                secondary("lower_refuser_with_induced_peers", event::refuser_with_induced_peers);
                secondary("upper_always_group", event::always_group);
            }
            break;
        case Estimand::tauS1:
            if (mode == BoundMode::pairs)
                secondary("lower_taker_with_induced_peers", event::taker_with_induced_peers);
            else
                secondary("lower_own_responder_with_induced_peers", event::own_responder_with_induced_peers);
            secondary("upper_never_group", event::never_group);
            break;
        case Estimand::late: break;
    }
    if (!(primary > 0.0)) r.fail({{"effect_population", primary}});
    return r;
}

// ---------------------------------------------------------------------------
// Monotone treatment response / selection

/// Peers untreated (k = 0) or all treated (k = m).
enum class PeerLevel : std::uint8_t { none, all };

struct OutcomeTerm {
    int d = 0;
    PeerLevel level = PeerLevel::none;
    [[nodiscard]] int k(int m) const noexcept { return level == PeerLevel::none ? 0 : m; }
    [[nodiscard]] std::string label() const {
        return "Y(" + std::to_string(d) + "," + (level == PeerLevel::none ? "0" : "1") + ")";
    }
};

/// E[left_term | left types] >= E[right_term | right types]. For MTR the type sets coincide.
struct Link {
    bool response = false;  // MTR when true, MTS otherwise
    std::vector<ComplianceType> left;
    OutcomeTerm left_term;
    std::vector<ComplianceType> right;
    OutcomeTerm right_term;
};

namespace detail {
inline std::string type_set(const std::vector<ComplianceType>& ts) {
    std::string s;
    for (auto t : ts) {
        if (!s.empty()) s += ",";
        s += type_letter(t);
    }
    return s;
}
inline std::string link_label(const Link& l) {
    return "E[" + l.left_term.label() + "|" + type_set(l.left) + "] >= E[" + l.right_term.label() + "|" +
           type_set(l.right) + "]";
}
}  // namespace detail

/// The inequalities a single bound relies on.
inline std::vector<Link> cited_links(Estimand e, Side side, BoundMode mode) {
    using CT = ComplianceType;
    constexpr CT A = CT::AlwaysTaker, S = CT::SocialComplier, C = CT::Complier, P = CT::PeerComplier,
                 G = CT::GroupComplier, N = CT::NeverTaker;
    const OutcomeTerm y00{0, PeerLevel::none}, y10{1, PeerLevel::none}, y01{0, PeerLevel::all},
        y11{1, PeerLevel::all};
    const bool lo = side == Side::lower;
    switch (e) {
        case Estimand::tauD0:
            if (lo) return {{true, {S, C}, y10, {S, C}, y00}, {false, {S, C}, y00, {N}, y00}};
            return {{false, {A}, y10, {S, C}, y10}};
        case Estimand::tauD1:
            if (lo) return {{true, {A}, y11, {A}, y01}, {false, {A}, y01, {C, G}, y01}};
            return {{false, {C, G}, y01, {N}, y01}};
        case Estimand::tauS0:
            if (mode == BoundMode::multi) return {};
            if (lo) return {{false, {S, P}, y01, {N}, y01}};
            return {{true, {A}, y11, {A}, y01}, {false, {A}, y01, {S, P}, y01}};
        case Estimand::tauS1:
            if (mode == BoundMode::multi) {
                if (lo) return {{false, {C}, y10, {G}, y10}};
                return {{true, {G}, y10, {G}, y00}, {false, {G}, y00, {N}, y00}};
            }
            if (lo) return {{false, {A}, y10, {P, G}, y10}};
            return {{true, {P, G}, y10, {P, G}, y00}, {false, {P, G}, y00, {N}, y00}};
        case Estimand::late: return {};
    }
    return {};
}

struct MtrMtsOptions {
    BoundMode mode = BoundMode::pairs;
    /// Compare type by type and add the full selection ordering A >= {S,C,P} >= G >= N.
    bool strict = false;
};

inline constexpr double kInequalityTolerance = 1e-12;

inline AssumptionReport check_mtr_mts(const PopulationSpec& spec, Estimand e, Side side, MtrMtsOptions opt = {}) {
    AssumptionReport r;
    r.assumption = "mtr_mts_" + std::string(estimand_name(e)) + "_" + std::string(side_name(side)) +
                   (opt.strict ? "_strict" : "");
    const auto w = spec.type_marginals();
    const int m = spec.m;
    auto mu = [&](ComplianceType t, const OutcomeTerm& term) { return spec.mu(t, term.d, term.k(m)); };
    auto present = [&](ComplianceType t) { return w[index_of(t)] > 0.0; };

    bool any_vacuous = false;
    for (const auto& link : cited_links(e, side, opt.mode)) {
        const std::string label = detail::link_label(link);
        if (!opt.strict) {
            double wl = 0, sl = 0, wr = 0, sr = 0;
            for (auto t : link.left)
                if (present(t)) wl += w[index_of(t)], sl += w[index_of(t)] * mu(t, link.left_term);
            for (auto t : link.right)
                if (present(t)) wr += w[index_of(t)], sr += w[index_of(t)] * mu(t, link.right_term);
            if (wl <= 0.0 || wr <= 0.0) {
                any_vacuous = true;
                continue;
            }
            const double lhs = sl / wl, rhs = sr / wr;
            r.values.push_back({label + " lhs", lhs});
            r.values.push_back({label + " rhs", rhs});
            if (lhs < rhs - kInequalityTolerance) r.fail({{"inequality", label}, {"lhs", lhs}, {"rhs", rhs}});
            continue;
        }
        bool evaluated = false;
        for (auto tl : link.left) {
            if (!present(tl)) continue;
            for (auto tr : link.right) {
                if (!present(tr)) continue;
                if (link.response && tl != tr) continue;
                evaluated = true;
                const double lhs = mu(tl, link.left_term), rhs = mu(tr, link.right_term);
                if (lhs < rhs - kInequalityTolerance)
                    r.fail({{"inequality", label},
                            {"left_type", std::string(1, type_letter(tl))},
                            {"right_type", std::string(1, type_letter(tr))},
                            {"lhs", lhs},
                            {"rhs", rhs}});
            }
        }
        if (!evaluated) any_vacuous = true;
    }

    if (opt.strict) {
        using CT = ComplianceType;
        const std::array<std::vector<CT>, 4> tiers = {
            std::vector<CT>{CT::AlwaysTaker},
            std::vector<CT>{CT::SocialComplier, CT::Complier, CT::PeerComplier},
            std::vector<CT>{CT::GroupComplier},
            std::vector<CT>{CT::NeverTaker}};
        for (int d = 0; d < 2; ++d)
            for (int k = 0; k <= m; ++k)
                for (std::size_t hi = 0; hi < tiers.size(); ++hi)
                    for (std::size_t lo = hi + 1; lo < tiers.size(); ++lo)
                        for (auto th : tiers[hi])
                            for (auto tl : tiers[lo]) {
                                if (!present(th) || !present(tl)) continue;
                                const double a = spec.mu(th, d, k), b = spec.mu(tl, d, k);
                                if (a < b - kInequalityTolerance)
                                    r.fail({{"inequality", "selection ordering"},
                                            {"d", d},
                                            {"k", k},
                                            {"left_type", std::string(1, type_letter(th))},
                                            {"right_type", std::string(1, type_letter(tl))},
                                            {"lhs", a},
                                            {"rhs", b}});
                            }
    }
    r.vacuous = r.pass && any_vacuous;
    return r;
}

/// Both sides of an estimand's bound.
inline AssumptionReport check_mtr_mts(const PopulationSpec& spec, Estimand e, MtrMtsOptions opt = {}) {
    auto lo = check_mtr_mts(spec, e, Side::lower, opt);
    auto up = check_mtr_mts(spec, e, Side::upper, opt);
    AssumptionReport r;
    r.assumption = "mtr_mts_" + std::string(estimand_name(e)) + (opt.strict ? "_strict" : "");
    r.pass = lo.pass && up.pass;
    r.vacuous = r.pass && (lo.vacuous || up.vacuous);
    for (auto* part : {&lo, &up}) {
        for (auto& wt : part->witnesses) r.witnesses.push_back(std::move(wt));
        for (auto& v : part->values) r.values.push_back(std::move(v));
    }
    return r;
}

}  // namespace spiv

#endif  // SPILLOVER_IV_ASSUMPTIONS_HPP
