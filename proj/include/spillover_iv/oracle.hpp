#ifndef SPILLOVER_IV_ORACLE_HPP
#define SPILLOVER_IV_ORACLE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "assumptions.hpp"
#include "bounds.hpp"
#include "enumeration.hpp"
#include "moments.hpp"
#include "population.hpp"

namespace spiv {

inline void require_valid(const PopulationSpec& spec) {
    const auto rep = validate_spec(spec);
    if (!rep.ok()) throw InputError("invalid population spec: " + rep.violations.front());
}

/// Probability that every one of m peers has assignment b.
inline double peer_cell_probability(const PopulationSpec& spec, int b) {
    return std::pow(b ? spec.p_z : 1.0 - spec.p_z, spec.m);
}

/// Exact cell-conditional moments by enumeration of profiles and members.
inline MomentSet population_moments(const PopulationSpec& spec) {
    require_valid(spec);
    MomentAccumulator acc;
    for_each_member(spec, [&](const MemberPotentials& mp, double w) {
        for (auto c : kAllCells) {
            const int d = mp.d(c.z_own, c.z_peers);
            const int k = mp.treated_peers(c.z_own, c.z_peers);
            acc.add(c, d, k == 0, k == mp.m, spec.mu(mp.type, d, k), w);
        }
    });
    MomentSet ms = acc.finish(spec.m, true);
    for (auto c : kAllCells) {
        auto& cm = ms.cells[c.index()];
        cm.weight = (c.z_own ? spec.p_z : 1.0 - spec.p_z) * peer_cell_probability(spec, c.z_peers);
    }
    return ms;
}

// ---------------------------------------------------------------------------
// True effects

struct TruthValue {
    double value = std::numeric_limits<double>::quiet_NaN();
    double mass = 0.0;
    bool exists = false;
};

struct ShareValue {
    std::string name;
    std::string moment;
    std::string scope;
    double value = 0.0;
};

struct TruthReport {
    TruthValue tauD0, tauD1, tauS0, tauS1;
    std::optional<double> late;
    std::vector<ShareValue> type_shares;

    [[nodiscard]] const TruthValue& at(Estimand e) const {
        switch (e) {
            case Estimand::tauD0: return tauD0;
            case Estimand::tauD1: return tauD1;
            case Estimand::tauS0: return tauS0;
            case Estimand::tauS1: return tauS1;
            case Estimand::late: break;
        }
        throw std::invalid_argument("TruthReport::at: no enumerated truth for late");
    }
};

/// Outcome contrast defining each effect for a member of its effect population.
inline double effect_contrast(const PopulationSpec& spec, const MemberPotentials& mp, Estimand e) {
    const auto t = mp.type;
    const int m = mp.m;
    switch (e) {
        case Estimand::tauD0: return spec.mu(t, 1, 0) - spec.mu(t, 0, 0);
        case Estimand::tauD1: return spec.mu(t, 1, m) - spec.mu(t, 0, m);
        case Estimand::tauS0: return spec.mu(t, 0, mp.treated_peers(0, 1)) - spec.mu(t, 0, 0);
        case Estimand::tauS1: return spec.mu(t, 1, mp.treated_peers(1, 1)) - spec.mu(t, 1, 0);
        case Estimand::late: return spec.mu(t, 1, 0) - spec.mu(t, 0, 0);
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Share catalog: compliance-share expressions recoverable from cell moments.

enum class Scope : std::uint8_t { general, pairs, osnc, pairs_or_osnc };

constexpr std::string_view scope_name(Scope s) noexcept {
    switch (s) {
        case Scope::general: return "general";
        case Scope::pairs: return "pairs";
        case Scope::osnc: return "osnc";
        case Scope::pairs_or_osnc: return "pairs_or_osnc";
    }
    return "?";
}

inline bool scope_applies(Scope s, int m, bool osnc) {
    switch (s) {
        case Scope::general: return true;
        case Scope::pairs: return m == 1;
        case Scope::osnc: return osnc;
        case Scope::pairs_or_osnc: return m == 1 || osnc;
    }
    return false;
}

struct ShareDefinition {
    std::string name;
    std::string moment;
    Scope scope = Scope::general;
    std::function<double(const MomentSet&)> from_moments;
    std::function<bool(const MemberPotentials&)> event;
};

inline const std::vector<ShareDefinition>& share_catalog() {
    using namespace cells;
    static const std::vector<ShareDefinition> catalog = {
        {"nobody_treated_at_full_assignment", "E[(1-D)NoPeer|11]", Scope::general,
         [](const MomentSet& ms) { return ms.expect(q::nobody, c11); }, event::never_group},
        {"everybody_treated_at_no_assignment", "E[DAllPeers|00]", Scope::general,
         [](const MomentSet& ms) { return ms.expect(q::everybody, c00); }, event::always_group},
        {"taker_with_peers_induced_from_none", "-(E[DNoPeer|01]-E[DNoPeer|00])", Scope::general,
         [](const MomentSet& ms) { return -delta(ms, q::treated_peers_none, c01, c00); },
         event::taker_with_induced_peers},
        {"refuser_with_peers_induced_to_all", "E[(1-D)AllPeers|11]-E[(1-D)AllPeers|10]", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::untreated_peers_all, c11, c10); },
         event::refuser_with_induced_peers},
        {"own_responder_with_untreated_peers", "-(E[(1-D)NoPeer|10]-E[(1-D)NoPeer|00])", Scope::general,
         [](const MomentSet& ms) { return -delta(ms, q::nobody, c10, c00); },
         [](const MemberPotentials& mp) { return in_effect_population(mp, Estimand::tauD0); }},
        {"own_responder_with_treated_peers", "E[DAllPeers|11]-E[DAllPeers|01]", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::everybody, c11, c01); },
         [](const MemberPotentials& mp) { return in_effect_population(mp, Estimand::tauD1); }},
        {"taker_with_never_treated_peers", "E[DNoPeer|01]", Scope::general,
         [](const MomentSet& ms) { return ms.expect(q::treated_peers_none, c01); },
         [](const MemberPotentials& mp) { return mp.d(0, 0) == 1 && mp.peers_none(1, 1); }},
        {"refuser_with_always_treated_peers", "E[(1-D)AllPeers|10]", Scope::general,
         [](const MomentSet& ms) { return ms.expect(q::untreated_peers_all, c10); },
         [](const MemberPotentials& mp) { return mp.d(1, 1) == 0 && mp.peers_all(0, 0); }},
        {"moved_by_peer_assignment_when_unassigned", "E[D|01]-E[D|00]", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::own_treated, c01, c00); },
         [](const MemberPotentials& mp) { return mp.d(0, 1) > mp.d(0, 0); }},
        {"moved_by_peer_assignment_when_assigned", "E[D|11]-E[D|10]", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::own_treated, c11, c10); },
         [](const MemberPotentials& mp) { return mp.d(1, 1) > mp.d(1, 0); }},
        {"treated_when_unassigned", "E[D|01]", Scope::general,
         [](const MomentSet& ms) { return ms.expect(q::own_treated, c01); },
         [](const MemberPotentials& mp) { return mp.d(0, 1) == 1; }},
        {"untreated_with_peers_induced_at_own_zero", "-(E[(1-D)NoPeer|01]-E[(1-D)NoPeer|00])", Scope::general,
         [](const MomentSet& ms) { return -delta(ms, q::nobody, c01, c00); },
         [](const MemberPotentials& mp) {
             return mp.d(0, 0) == 0 && mp.peers_none(0, 0) && (mp.d(0, 1) == 1 || !mp.peers_none(0, 1));
         }},
        {"treated_with_peers_induced_at_own_one", "(E[D|11]-E[D|10])-(E[DNoPeer|11]-E[DNoPeer|10])",
         Scope::pairs_or_osnc,
         [](const MomentSet& ms) {
             return delta(ms, q::own_treated, c11, c10) - delta(ms, q::treated_peers_none, c11, c10);
         },
         [](const MemberPotentials& mp) { return in_effect_population(mp, Estimand::tauS1); }},
        {"own_taker_with_peers_induced_at_own_one", "-(E[DNoPeer|11]-E[DNoPeer|10])", Scope::pairs_or_osnc,
         [](const MomentSet& ms) { return -delta(ms, q::treated_peers_none, c11, c10); },
         event::own_responder_with_induced_peers},
    };
    return catalog;
}

inline TruthReport true_estimands(const PopulationSpec& spec) {
    require_valid(spec);
    TruthReport tr;
    for (auto e : kEffectEstimands) {
        CompensatedSum mass, value;
        for_each_member(spec, [&](const MemberPotentials& mp, double w) {
            if (!in_effect_population(mp, e)) return;
            mass.add(w);
            value.add(w * effect_contrast(spec, mp, e));
        });
        TruthValue tv;
        tv.mass = mass.value();
        tv.exists = tv.mass > 0.0;
        if (tv.exists) tv.value = value.value() / tv.mass;
        switch (e) {
            case Estimand::tauD0: tr.tauD0 = tv; break;
            case Estimand::tauD1: tr.tauD1 = tv; break;
            case Estimand::tauS0: tr.tauS0 = tv; break;
            case Estimand::tauS1: tr.tauS1 = tv; break;
            default: break;
        }
    }
    const auto ms = population_moments(spec);
    try {
        tr.late = iv_estimand(ms);
    } catch (const std::domain_error&) {
        tr.late.reset();
    }
    const bool osnc = check_osnc(spec).pass;
    for (const auto& def : share_catalog()) {
        if (!scope_applies(def.scope, spec.m, osnc)) continue;
        tr.type_shares.push_back({def.name, def.moment, std::string(scope_name(def.scope)),
                                  member_probability(spec, def.event)});
    }
    return tr;
}

inline nlohmann::json to_json_value(const TruthValue& t) {
    return {{"value", json_number(t.value)}, {"mass", t.mass}, {"exists", t.exists}};
}

inline nlohmann::json to_json_value(const TruthReport& tr) {
    nlohmann::json j;
    j["tauD0"] = to_json_value(tr.tauD0);
    j["tauD1"] = to_json_value(tr.tauD1);
    j["tauS0"] = to_json_value(tr.tauS0);
    j["tauS1"] = to_json_value(tr.tauS1);
    j["late"] = tr.late ? nlohmann::json(*tr.late) : nlohmann::json(nullptr);
    nlohmann::json shares = nlohmann::json::array();
    for (const auto& s : tr.type_shares)
        shares.push_back({{"name", s.name}, {"moment", s.moment}, {"scope", s.scope}, {"value", s.value}});
    j["type_shares"] = shares;
    return j;
}

// ---------------------------------------------------------------------------
// Identity suite: each cell-moment contrast against its enumerated decomposition.

struct IdentityDefinition {
    std::string name;
    Scope scope = Scope::general;
    std::function<double(const MomentSet&)> moment_side;
    /// Per-member contribution (before the member weight).
    std::function<double(const PopulationSpec&, const MemberPotentials&)> member_term;
};

struct IdentityResult {
    std::string name;
    Scope scope = Scope::general;
    double moment_side = 0.0;
    double enumeration_side = 0.0;
    bool pass = false;
};

struct IdentityReport {
    std::vector<IdentityResult> results;
    [[nodiscard]] bool ok() const noexcept {
        for (const auto& r : results)
            if (!r.pass) return false;
        return true;
    }
    [[nodiscard]] std::size_t failures() const noexcept {
        std::size_t n = 0;
        for (const auto& r : results) n += r.pass ? 0 : 1;
        return n;
    }
};

inline const std::vector<IdentityDefinition>& identity_catalog() {
    using namespace cells;
    using MP = MemberPotentials;
    using PS = PopulationSpec;
    auto ind = [](bool b) { return b ? 1.0 : 0.0; };
    auto y = [](const PS& s, const MP& mp, int d, int k) { return s.mu(mp.type, d, k); };

    // Recurrent events.
    auto d0_shift = [](const MP& mp) { return mp.d(1, 0) > mp.d(0, 0) && mp.peers_leave_zero(1, 0, 0, 0); };
    auto d0_stay = [](const MP& mp) { return mp.d(1, 0) > mp.d(0, 0) && mp.peers_none(1, 0) && mp.peers_none(0, 0); };
    auto d1_shift = [](const MP& mp) { return mp.d(1, 1) > mp.d(0, 1) && mp.peers_reach_all(1, 1, 0, 1); };
    auto d1_stay = [](const MP& mp) { return mp.d(1, 1) > mp.d(0, 1) && mp.peers_all(1, 1) && mp.peers_all(0, 1); };
    auto s0_nt = [](const MP& mp) { return mp.d(0, 1) == 0 && mp.d(0, 0) == 0 && !mp.peers_same(0, 1, 0, 0); };
    auto s0_sp = [](const MP& mp) { return mp.d(0, 1) > mp.d(0, 0) && !mp.peers_same(0, 1, 0, 0); };
    auto s1_at = [](const MP& mp) { return mp.d(1, 1) == 1 && mp.d(1, 0) == 1 && !mp.peers_same(1, 1, 1, 0); };
    auto s1_pg = [](const MP& mp) { return mp.d(1, 1) > mp.d(1, 0) && !mp.peers_same(1, 1, 1, 0); };
    auto o0 = [](const MP& mp) { return mp.d(0, 1) == 0 && mp.d(0, 0) == 0 && mp.peers_leave_zero(0, 1, 0, 0); };
    auto o1_pg = [](const MP& mp) { return mp.d(1, 1) > mp.d(1, 0) && mp.peers_leave_zero(1, 1, 1, 0); };
    auto taker_never = [](const MP& mp) { return mp.d(0, 0) == 1 && mp.peers_none(1, 1); };
    auto refuser_always = [](const MP& mp) { return mp.d(1, 1) == 0 && mp.peers_all(0, 0); };

    // Generic decompositions of E[D*NoPeer] and E[(1-D)*AllPeers] contrasts between an
    // upper cell (a) and a lower cell (b), monotone in both factors.
    auto dn_contrast = [ind](Cell a, Cell b) {
        return [=](const PS&, const MP& mp) {
            const int da = mp.d(a.z_own, a.z_peers), db = mp.d(b.z_own, b.z_peers);
            const bool na = mp.peers_none(a.z_own, a.z_peers), nb = mp.peers_none(b.z_own, b.z_peers);
            return ind(da > db && na && nb) - ind(da == 1 && db == 1 && nb && !na);
        };
    };
    auto ua_contrast = [ind](Cell a, Cell b) {
        return [=](const PS&, const MP& mp) {
            const int da = mp.d(a.z_own, a.z_peers), db = mp.d(b.z_own, b.z_peers);
            const bool aa = mp.peers_all(a.z_own, a.z_peers), ab = mp.peers_all(b.z_own, b.z_peers);
            return ind(da == 0 && db == 0 && aa && !ab) - ind(da > db && aa && ab);
        };
    };

    static const std::vector<IdentityDefinition> catalog = {
        // Direct effect, peers untreated.
        {"direct0.first_stage.peers_none", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::peers_none, c10, c00); },
         [=](const PS&, const MP& mp) { return -ind(d0_shift(mp)); }},
        {"direct0.first_stage.nobody", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::nobody, c10, c00); },
         [=](const PS&, const MP& mp) { return -ind(d0_stay(mp)) - ind(d0_shift(mp)); }},
        {"direct0.first_stage.taker_peers_none", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::treated_peers_none, c01, c00); },
         [=](const PS&, const MP& mp) { return -ind(event::taker_with_induced_peers(mp)); }},
        {"direct0.first_stage.nobody_at_full", Scope::general,
         [](const MomentSet& ms) { return ms.expect(q::nobody, c11); },
         [=](const PS&, const MP& mp) { return ind(event::never_group(mp)); }},
        {"direct0.reduced_form.peers_none", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::peers_none.with_y(), c10, c00); },
         [=](const PS& s, const MP& mp) {
             return ind(d0_stay(mp)) * (y(s, mp, 1, 0) - y(s, mp, 0, 0)) - ind(d0_shift(mp)) * y(s, mp, 0, 0);
         }},
        {"direct0.reduced_form.taker_peers_none", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::treated_peers_none.with_y(), c01, c00); },
         [=](const PS& s, const MP& mp) { return -ind(event::taker_with_induced_peers(mp)) * y(s, mp, 1, 0); }},
        {"direct0.reduced_form.nobody_at_full", Scope::general,
         [](const MomentSet& ms) { return ms.expect(q::nobody.with_y(), c11); },
         [=](const PS& s, const MP& mp) { return ind(event::never_group(mp)) * y(s, mp, 0, 0); }},
        // Direct effect, peers treated.
        {"direct1.first_stage.peers_all", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::peers_all, c11, c01); },
         [=](const PS&, const MP& mp) { return ind(d1_shift(mp)); }},
        {"direct1.first_stage.everybody", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::everybody, c11, c01); },
         [=](const PS&, const MP& mp) { return ind(d1_stay(mp)) + ind(d1_shift(mp)); }},
        {"direct1.first_stage.refuser_peers_all", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::untreated_peers_all, c11, c10); },
         [=](const PS&, const MP& mp) { return ind(event::refuser_with_induced_peers(mp)); }},
        {"direct1.first_stage.everybody_at_none", Scope::general,
         [](const MomentSet& ms) { return ms.expect(q::everybody, c00); },
         [=](const PS&, const MP& mp) { return ind(event::always_group(mp)); }},
        {"direct1.reduced_form.peers_all", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::peers_all.with_y(), c11, c01); },
         [=](const PS& s, const MP& mp) {
             const int m = mp.m;
             return ind(d1_stay(mp)) * (y(s, mp, 1, m) - y(s, mp, 0, m)) + ind(d1_shift(mp)) * y(s, mp, 1, m);
         }},
        {"direct1.reduced_form.refuser_peers_all", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::untreated_peers_all.with_y(), c11, c10); },
         [=](const PS& s, const MP& mp) { return ind(event::refuser_with_induced_peers(mp)) * y(s, mp, 0, mp.m); }},
        {"direct1.reduced_form.everybody_at_none", Scope::general,
         [](const MomentSet& ms) { return ms.expect(q::everybody.with_y(), c00); },
         [=](const PS& s, const MP& mp) { return ind(event::always_group(mp)) * y(s, mp, 1, mp.m); }},
        // Spillovers with one peer.
        {"spill0.first_stage.own", Scope::pairs,
         [](const MomentSet& ms) { return delta(ms, q::own_treated, c01, c00); },
         [=](const PS&, const MP& mp) { return ind(s0_sp(mp)); }},
        {"spill0.first_stage.nobody", Scope::pairs,
         [](const MomentSet& ms) { return delta(ms, q::nobody, c01, c00); },
         [=](const PS&, const MP& mp) { return -ind(s0_nt(mp)) - ind(s0_sp(mp)); }},
        {"spill0.reduced_form.own_untreated", Scope::pairs,
         [](const MomentSet& ms) { return delta(ms, q::own_untreated.with_y(), c01, c00); },
         [=](const PS& s, const MP& mp) {
             return ind(s0_nt(mp)) * (y(s, mp, 0, 1) - y(s, mp, 0, 0)) - ind(s0_sp(mp)) * y(s, mp, 0, 0);
         }},
        {"spill1.first_stage.own", Scope::pairs,
         [](const MomentSet& ms) { return delta(ms, q::own_treated, c11, c10); },
         [=](const PS&, const MP& mp) { return ind(s1_pg(mp)); }},
        {"spill1.first_stage.everybody", Scope::pairs,
         [](const MomentSet& ms) { return delta(ms, q::everybody, c11, c10); },
         [=](const PS&, const MP& mp) { return ind(s1_at(mp)) + ind(s1_pg(mp)); }},
        {"spill1.reduced_form.own_treated", Scope::pairs,
         [](const MomentSet& ms) { return delta(ms, q::own_treated.with_y(), c11, c10); },
         [=](const PS& s, const MP& mp) {
             return ind(s1_at(mp)) * (y(s, mp, 1, 1) - y(s, mp, 1, 0)) + ind(s1_pg(mp)) * y(s, mp, 1, 1);
         }},
        // Spillovers under one-sided noncompliance, any group size.
        {"osnc.spill0.first_stage.nobody", Scope::osnc,
         [](const MomentSet& ms) { return delta(ms, q::nobody, c01, c00); },
         [=](const PS&, const MP& mp) { return -ind(o0(mp)); }},
        {"osnc.spill0.reduced_form.own_untreated", Scope::osnc,
         [](const MomentSet& ms) { return delta(ms, q::own_untreated.with_y(), c01, c00); },
         [=](const PS& s, const MP& mp) {
             return ind(o0(mp)) * (y(s, mp, 0, mp.treated_peers(0, 1)) - y(s, mp, 0, 0));
         }},
        {"osnc.spill1.first_stage.own", Scope::osnc,
         [](const MomentSet& ms) { return delta(ms, q::own_treated, c11, c10); },
         [=](const PS&, const MP& mp) { return ind(o1_pg(mp)); }},
        {"osnc.spill1.first_stage.taker_peers_none", Scope::osnc,
         [](const MomentSet& ms) { return delta(ms, q::treated_peers_none, c11, c10); },
         [=](const PS&, const MP& mp) { return -ind(event::own_responder_with_induced_peers(mp)); }},
        {"osnc.spill1.reduced_form.own_treated", Scope::osnc,
         [](const MomentSet& ms) { return delta(ms, q::own_treated.with_y(), c11, c10); },
         [=](const PS& s, const MP& mp) {
             const int k = mp.treated_peers(1, 1);
             const bool stay = mp.d(1, 1) == 1 && mp.d(1, 0) == 1 && mp.peers_none(1, 0);
             return ind(stay) * (y(s, mp, 1, k) - y(s, mp, 1, 0)) + ind(o1_pg(mp)) * y(s, mp, 1, k);
         }},
        {"osnc.spill1.reduced_form.taker_peers_none", Scope::osnc,
         [](const MomentSet& ms) { return delta(ms, q::treated_peers_none.with_y(), c11, c10); },
         [=](const PS& s, const MP& mp) { return -ind(event::own_responder_with_induced_peers(mp)) * y(s, mp, 1, 0); }},
        // Alternative-pair moments used by the fallbacks.
        {"auxiliary.taker_never_treated_peers", Scope::general,
         [](const MomentSet& ms) { return ms.expect(q::treated_peers_none, c01); },
         [=](const PS&, const MP& mp) { return ind(taker_never(mp)); }},
        {"auxiliary.taker_never_treated_peers.outcome", Scope::general,
         [](const MomentSet& ms) { return ms.expect(q::treated_peers_none.with_y(), c01); },
         [=](const PS& s, const MP& mp) { return ind(taker_never(mp)) * y(s, mp, 1, 0); }},
        {"auxiliary.refuser_always_treated_peers", Scope::general,
         [](const MomentSet& ms) { return ms.expect(q::untreated_peers_all, c10); },
         [=](const PS&, const MP& mp) { return ind(refuser_always(mp)); }},
        {"auxiliary.refuser_always_treated_peers.outcome", Scope::general,
         [](const MomentSet& ms) { return ms.expect(q::untreated_peers_all.with_y(), c10); },
         [=](const PS& s, const MP& mp) { return ind(refuser_always(mp)) * y(s, mp, 0, mp.m); }},
        // Sign-condition decompositions.
        {"sign.own_shift_peers_untreated.taker_none", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::treated_peers_none, c10, c00); }, dn_contrast(c10, c00)},
        {"sign.own_shift_peers_untreated.refuser_all", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::untreated_peers_all, c10, c00); }, ua_contrast(c10, c00)},
        {"sign.own_shift_peers_treated.taker_none", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::treated_peers_none, c11, c01); }, dn_contrast(c11, c01)},
        {"sign.own_shift_peers_treated.refuser_all", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::untreated_peers_all, c11, c01); }, ua_contrast(c11, c01)},
        {"sign.peer_shift_own_unassigned.taker_none", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::treated_peers_none, c01, c00); }, dn_contrast(c01, c00)},
        {"sign.peer_shift_own_unassigned.refuser_all", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::untreated_peers_all, c01, c00); }, ua_contrast(c01, c00)},
        {"sign.peer_shift_own_assigned.taker_none", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::treated_peers_none, c11, c10); }, dn_contrast(c11, c10)},
        {"sign.peer_shift_own_assigned.refuser_all", Scope::general,
         [](const MomentSet& ms) { return delta(ms, q::untreated_peers_all, c11, c10); }, ua_contrast(c11, c10)},
    };
    return catalog;
}

inline constexpr double kIdentityTolerance = 1e-12;

/// Evaluates every applicable identity. Assumes the population passes irrelevance.
inline IdentityReport verify_identities(const PopulationSpec& spec, const MomentSet& ms) {
    IdentityReport rep;
    const bool osnc = check_osnc(spec).pass;
    for (const auto& def : identity_catalog()) {
        if (!scope_applies(def.scope, spec.m, osnc)) continue;
        CompensatedSum acc;
        for_each_member(spec, [&](const MemberPotentials& mp, double w) {
            const double t = def.member_term(spec, mp);
            if (t != 0.0) acc.add(w * t);
        });
        IdentityResult r;
        r.name = def.name;
        r.scope = def.scope;
        r.moment_side = def.moment_side(ms);
        r.enumeration_side = acc.value();
        r.pass = std::abs(r.moment_side - r.enumeration_side) <= kIdentityTolerance;
        rep.results.push_back(std::move(r));
    }
    for (const auto& def : share_catalog()) {
        if (!scope_applies(def.scope, spec.m, osnc)) continue;
        IdentityResult r;
        r.name = "share." + def.name;
        r.scope = def.scope;
        r.moment_side = def.from_moments(ms);
        r.enumeration_side = member_probability(spec, def.event);
        r.pass = std::abs(r.moment_side - r.enumeration_side) <= kIdentityTolerance;
        rep.results.push_back(std::move(r));
    }
    return rep;
}

inline IdentityReport verify_identities(const PopulationSpec& spec) {
    return verify_identities(spec, population_moments(spec));
}

inline nlohmann::json to_json_value(const IdentityReport& rep) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rep.results)
        arr.push_back({{"identity", r.name},
                       {"scope", scope_name(r.scope)},
                       {"moment_side", r.moment_side},
                       {"enumeration_side", r.enumeration_side},
                       {"pass", r.pass}});
    return {{"ok", rep.ok()}, {"failures", rep.failures()}, {"identities", arr}};
}

// ---------------------------------------------------------------------------
// Bound validity

inline constexpr double kBracketTolerance = 1e-10;

struct BracketCheck {
    Estimand estimand = Estimand::tauD0;
    FallbackPolicy policy = FallbackPolicy::support_bounds;
    IntervalResult interval;
    TruthValue truth;
    bool existence_agrees = true;
    bool lower_checked = false, upper_checked = false;
    bool lower_ok = true, upper_ok = true;
    [[nodiscard]] bool pass() const noexcept { return existence_agrees && lower_ok && upper_ok; }
};

struct CollapseCheck {
    std::string claim;
    Estimand estimand = Estimand::tauD0;
    bool pass = true;
    std::string detail;
};

struct BoundValidityReport {
    BoundMode mode = BoundMode::pairs;
    bool osnc = false;
    std::vector<BracketCheck> brackets;
    std::vector<CollapseCheck> collapses;
    [[nodiscard]] bool ok() const noexcept {
        for (const auto& b : brackets)
            if (!b.pass()) return false;
        for (const auto& c : collapses)
            if (!c.pass) return false;
        return true;
    }
    [[nodiscard]] std::size_t violations() const noexcept {
        std::size_t n = 0;
        for (const auto& b : brackets) n += b.pass() ? 0 : 1;
        for (const auto& c : collapses) n += c.pass ? 0 : 1;
        return n;
    }
};

namespace detail {
inline bool side_is_support_substitute(Fallback f) { return f == Fallback::ymin || f == Fallback::ymax; }

inline bool mu_constant_in_peers(const PopulationSpec& spec) {
    for (auto t : kAllTypes) {
        if (!spec.has_type(t)) continue;
        for (int d = 0; d < 2; ++d)
            for (int k = 1; k <= spec.m; ++k)
                if (spec.mu(t, d, k) != spec.mu(t, d, 0)) return false;
    }
    return true;
}
}  // namespace detail

/// Bounds from exact moments against enumerated truths. Each side is checked when the
/// side's per-type MTR/MTS conditions hold, or when it rests on a support substitute.
inline BoundValidityReport verify_bounds(const PopulationSpec& spec, const MomentSet& ms, const TruthReport& truth) {
    BoundValidityReport rep;
    rep.mode = mode_for(spec.m);
    rep.osnc = check_osnc(spec).pass;
    const MtrMtsOptions strict{rep.mode, true};

    for (auto policy : {FallbackPolicy::support_bounds, FallbackPolicy::alt_pairs_then_support}) {
        BoundOptions opt;
        opt.mode = rep.mode;
        opt.osnc = rep.osnc;
        opt.fallback_policy = policy;
        for (auto e : kEffectEstimands) {
            BracketCheck bc;
            bc.estimand = e;
            bc.policy = policy;
            bc.interval = compute_bound(e, ms, spec.support, opt);
            bc.truth = truth.at(e);
            if (bc.interval.refused) {
                rep.brackets.push_back(std::move(bc));
                continue;
            }
            bc.existence_agrees = bc.interval.exists == bc.truth.exists;
            if (bc.interval.exists && bc.truth.exists) {
                const double tau = bc.truth.value;
                const bool lo_gate = bc.interval.point_identified ||
                                     detail::side_is_support_substitute(bc.interval.lower_fallback) ||
                                     check_mtr_mts(spec, e, Side::lower, strict).pass;
                const bool up_gate = bc.interval.point_identified ||
                                     detail::side_is_support_substitute(bc.interval.upper_fallback) ||
                                     check_mtr_mts(spec, e, Side::upper, strict).pass;
                if (lo_gate) {
                    bc.lower_checked = true;
                    bc.lower_ok = bc.interval.lower - kBracketTolerance <= tau;
                }
                if (up_gate) {
                    bc.upper_checked = true;
                    bc.upper_ok = tau <= bc.interval.upper + kBracketTolerance;
                }
            }
            rep.brackets.push_back(std::move(bc));
        }
    }

    // Point-identification claims.
    BoundOptions opt;
    opt.mode = rep.mode;
    opt.osnc = rep.osnc;
    auto point_equals_truth = [&](const std::string& claim, Estimand e, std::optional<double> target) {
        const auto iv = compute_bound(e, ms, spec.support, opt);
        CollapseCheck cc;
        cc.claim = claim;
        cc.estimand = e;
        const auto& tv = truth.at(e);
        if (!iv.exists && !tv.exists) {
            cc.detail = "effect population empty";
            rep.collapses.push_back(cc);
            return;
        }
        const double want = target ? *target : tv.value;
        cc.pass = iv.exists && iv.point_identified && std::abs(iv.lower - want) <= kBracketTolerance &&
                  std::abs(iv.upper - want) <= kBracketTolerance;
        cc.detail = "lower=" + detail::fmt_g(iv.lower) + " upper=" + detail::fmt_g(iv.upper) +
                    " target=" + detail::fmt_g(want);
        rep.collapses.push_back(cc);
    };
    using CT = ComplianceType;
    const bool has_s = spec.has_type(CT::SocialComplier), has_p = spec.has_type(CT::PeerComplier),
               has_g = spec.has_type(CT::GroupComplier);
    if (!has_s && !has_p && !has_g && detail::mu_constant_in_peers(spec) && truth.late) {
        point_equals_truth("no_interference_direct_equals_late", Estimand::tauD0, truth.late);
        point_equals_truth("no_interference_direct_equals_late", Estimand::tauD1, truth.late);
    }
    if (!has_s && !has_p) point_equals_truth("direct0_point_without_social_or_peer_compliers", Estimand::tauD0, {});
    if (!has_p && !has_g) point_equals_truth("direct1_point_without_peer_or_group_compliers", Estimand::tauD1, {});
    if (rep.osnc) point_equals_truth("spill0_point_under_one_sided_noncompliance", Estimand::tauS0, {});
    return rep;
}

inline BoundValidityReport verify_bounds(const PopulationSpec& spec) {
    const auto ms = population_moments(spec);
    return verify_bounds(spec, ms, true_estimands(spec));
}

inline nlohmann::json to_json_value(const BoundValidityReport& rep) {
    nlohmann::json br = nlohmann::json::array();
    for (const auto& b : rep.brackets)
        br.push_back({{"estimand", estimand_name(b.estimand)},
                      {"policy", policy_name(b.policy)},
                      {"interval", to_json_value(b.interval)},
                      {"truth", to_json_value(b.truth)},
                      {"existence_agrees", b.existence_agrees},
                      {"lower_checked", b.lower_checked},
                      {"upper_checked", b.upper_checked},
                      {"lower_ok", b.lower_ok},
                      {"upper_ok", b.upper_ok},
                      {"pass", b.pass()}});
    nlohmann::json co = nlohmann::json::array();
    for (const auto& c : rep.collapses)
        co.push_back({{"claim", c.claim}, {"estimand", estimand_name(c.estimand)}, {"pass", c.pass}, {"detail", c.detail}});
    return {{"mode", mode_name(rep.mode)},
            {"osnc", rep.osnc},
            {"ok", rep.ok()},
            {"violations", rep.violations()},
            {"brackets", br},
            {"collapses", co}};
}

}  // namespace spiv

#endif  // SPILLOVER_IV_ORACLE_HPP
