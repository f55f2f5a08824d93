#ifndef SPILLOVER_IV_ENUMERATION_HPP
#define SPILLOVER_IV_ENUMERATION_HPP

#include <algorithm>
#include <array>
#include <vector>

#include "compliance.hpp"
#include "moments.hpp"
#include "population.hpp"

namespace spiv {

/// Potential treatments of one focal member and its peers at the four focal
/// assignments (own z = a, every peer z = b).
struct MemberPotentials {
    ComplianceType type{};
    int m = 1;
    std::array<int, 4> own{};                  // indexed 2*a + b
    std::array<std::vector<int>, 4> peers{};   // peer treatments, same indexing

    [[nodiscard]] int d(int a, int b) const { return own[2 * a + b]; }
    [[nodiscard]] const std::vector<int>& dp(int a, int b) const { return peers[2 * a + b]; }

    [[nodiscard]] int treated_peers(int a, int b) const {
        const auto& v = dp(a, b);
        return static_cast<int>(std::count(v.begin(), v.end(), 1));
    }
    [[nodiscard]] bool peers_none(int a, int b) const { return treated_peers(a, b) == 0; }
    [[nodiscard]] bool peers_all(int a, int b) const { return treated_peers(a, b) == m; }
    [[nodiscard]] bool peers_same(int a, int b, int c, int e) const { return dp(a, b) == dp(c, e); }
    /// Peers at (a,b) differ from peers at (c,e), which are all untreated.
    [[nodiscard]] bool peers_leave_zero(int a, int b, int c, int e) const {
        return peers_none(c, e) && !peers_same(a, b, c, e);
    }
    /// Peers at (a,b) are all treated and differ from peers at (c,e).
    [[nodiscard]] bool peers_reach_all(int a, int b, int c, int e) const {
        return peers_all(a, b) && !peers_same(a, b, c, e);
    }
};

inline MemberPotentials member_potentials(const GroupProfile& profile, int focus) {
    MemberPotentials mp;
    mp.type = profile.types[focus];
    mp.m = profile.peer_count();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const auto z = focal_assignment(profile.size(), focus, a, b);
            const auto d = group_treatments(profile, z);
            mp.own[2 * a + b] = d[focus];
            auto& pv = mp.peers[2 * a + b];
            pv.clear();
            for (int j = 0; j < profile.size(); ++j)
                if (j != focus) pv.push_back(d[j]);
        }
    return mp;
}

/// Calls fn(member_potentials, weight) for every member of every positive-probability
/// profile; weight = profile probability / group size.
template <class Fn>
void for_each_member(const PopulationSpec& spec, Fn&& fn) {
    for (const auto& wp : spec.profiles) {
        if (wp.prob <= 0.0) continue;
        const double w = wp.prob / static_cast<double>(wp.profile.size());
        for (int i = 0; i < wp.profile.size(); ++i) fn(member_potentials(wp.profile, i), w);
    }
}

/// Member-weighted probability of an event on MemberPotentials.
template <class Pred>
double member_probability(const PopulationSpec& spec, Pred&& pred) {
    CompensatedSum acc;
    for_each_member(spec, [&](const MemberPotentials& mp, double w) {
        if (pred(mp)) acc.add(w);
    });
    return acc.value();
}

}  // namespace spiv

#endif  // SPILLOVER_IV_ENUMERATION_HPP
