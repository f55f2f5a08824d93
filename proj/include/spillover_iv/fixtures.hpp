#ifndef SPILLOVER_IV_FIXTURES_HPP
#define SPILLOVER_IV_FIXTURES_HPP

#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "compliance.hpp"
#include "population.hpp"

namespace spiv::fixtures {

// Baseline outcome level per type.
inline constexpr double kBaseAlways = 1.0;
inline constexpr double kBaseComplier = 0.6;
inline constexpr double kBaseGroup = 0.5;
inline constexpr double kBaseNever = 0.2;

inline GroupProfile profile(std::string_view letters) {
    GroupProfile p;
    for (char c : letters) {
        auto t = parse_type_letter(std::string(1, c));
        if (!t) throw InputError("bad type letter in fixture");
        p.types.push_back(*t);
    }
    return p;
}

/// mu(t, d, k) = base(t) + d + slope * k for the listed types.
inline OutcomeMeanFunction linear_mu(int m, double slope,
                                     std::initializer_list<std::pair<ComplianceType, double>> bases) {
    OutcomeMeanFunction mu;
    for (const auto& [t, b] : bases) {
        std::vector<double> d0, d1;
        for (int k = 0; k <= m; ++k) {
            d0.push_back(b + slope * k);
            d1.push_back(b + 1.0 + slope * k);
        }
        mu.set(t, d0, d1);
    }
    return mu;
}

inline PopulationSpec make(int m, std::initializer_list<std::pair<const char*, double>> dist, double slope) {
    using CT = ComplianceType;
    PopulationSpec s;
    s.m = m;
    s.p_z = 0.5;
    s.support = {-1.0, 4.0};
    s.noise_sd = 0.1;
    for (const auto& [letters, prob] : dist) s.profiles.push_back({profile(letters), prob});
    s.mu = linear_mu(m, slope,
                     {{CT::AlwaysTaker, kBaseAlways}, {CT::Complier, kBaseComplier},
                      {CT::GroupComplier, kBaseGroup}, {CT::NeverTaker, kBaseNever}});
    return s;
}

/// Pairs without interference: compliers, never-takers and always-takers, unit effect.
inline PopulationSpec p0() {
    return make(1, {{"CC", 0.4}, {"CN", 0.1}, {"NC", 0.1}, {"NN", 0.2}, {"AA", 0.2}}, 0.0);
}

/// Pairs with two-sided noncompliance and group compliers; peer effect 0.3 per treated peer.
inline PopulationSpec p1() {
    return make(1,
                {{"CC", 0.3}, {"AA", 0.1}, {"NN", 0.2}, {"AC", 0.1}, {"CA", 0.1}, {"NC", 0.05}, {"CN", 0.05},
                 {"GC", 0.05}, {"CG", 0.05}},
                0.3);
}

/// Triples under one-sided noncompliance; peer effect 0.25 per treated peer.
inline PopulationSpec p2() {
    return make(2, {{"CCC", 0.4}, {"CCG", 0.1}, {"CGC", 0.1}, {"GCC", 0.1}, {"GGG", 0.1}, {"NNN", 0.2}}, 0.25);
}

/// P1 with mass eps moved from (C,C) to (G,C) and (C,G) in equal halves.
inline PopulationSpec p1_shifted(double eps) {
    auto s = p1();
    for (auto& wp : s.profiles) {
        const auto l = wp.profile.letters();
        if (l == "CC") wp.prob -= eps;
        if (l == "GC" || l == "CG") wp.prob += eps / 2.0;
    }
    return s;
}

/// P1 with the (N,N) mass given to (C,C).
inline PopulationSpec p1_without_never_pairs() {
    auto s = p1();
    double moved = 0.0;
    for (auto& wp : s.profiles)
        if (wp.profile.letters() == "NN") moved = wp.prob, wp.prob = 0.0;
    for (auto& wp : s.profiles)
        if (wp.profile.letters() == "CC") wp.prob += moved;
    return s;
}

}  // namespace spiv::fixtures

#endif  // SPILLOVER_IV_FIXTURES_HPP
