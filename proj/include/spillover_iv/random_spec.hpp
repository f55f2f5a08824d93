#ifndef SPILLOVER_IV_RANDOM_SPEC_HPP
#define SPILLOVER_IV_RANDOM_SPEC_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include "assumptions.hpp"
#include "compliance.hpp"
#include "population.hpp"
#include "rng.hpp"

namespace spiv {

/// Which profiles a random spec may draw from.
enum class SpecFamily : std::uint8_t {
    pairs,      // one peer, any irrelevance-admissible pair
    osnc,       // types C, G, N only
    two_sided,  // any type, any group size
};

constexpr std::string_view family_name(SpecFamily f) noexcept {
    switch (f) {
        case SpecFamily::pairs: return "pairs";
        case SpecFamily::osnc: return "osnc";
        case SpecFamily::two_sided: return "two_sided";
    }
    return "?";
}

inline std::optional<SpecFamily> parse_family(std::string_view s) noexcept {
    for (auto f : {SpecFamily::pairs, SpecFamily::osnc, SpecFamily::two_sided})
        if (family_name(f) == s) return f;
    return std::nullopt;
}

/// Every ordered profile of the family's types that passes irrelevance.
inline std::vector<GroupProfile> admissible_profiles(SpecFamily family, int m) {
    if (family == SpecFamily::pairs && m != 1) throw InputError("the pairs family has exactly one peer");
    if (m < 1 || m + 1 > kMaxEnumeratedGroup) throw InputError("peer count out of range for random specs");
    std::vector<ComplianceType> alphabet;
    if (family == SpecFamily::osnc)
        alphabet = {ComplianceType::Complier, ComplianceType::GroupComplier, ComplianceType::NeverTaker};
    else
        alphabet.assign(kAllTypes.begin(), kAllTypes.end());
    const int g = m + 1;
    const std::size_t base = alphabet.size();
    std::size_t total = 1;
    for (int i = 0; i < g; ++i) total *= base;
    std::vector<GroupProfile> out;
    for (std::size_t code = 0; code < total; ++code) {
        GroupProfile p;
        std::size_t c = code;
        for (int i = 0; i < g; ++i, c /= base) p.types.push_back(alphabet[c % base]);
        if (check_irrelevance(p).pass) out.push_back(std::move(p));
    }
    return out;
}

/// Cached per (family, m); safe to call from workers.
inline const std::vector<GroupProfile>& cached_profiles(SpecFamily family, int m) {
    static std::mutex mtx;
    static std::map<std::pair<int, int>, std::vector<GroupProfile>> cache;
    std::lock_guard lock(mtx);
    auto key = std::make_pair(static_cast<int>(family), m);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, admissible_profiles(family, m)).first;
    return it->second;
}

enum class MuStyle : std::uint8_t {
    ordered,         // type-ordered and monotone in own treatment
    ordered_coarse,  // same, drawn from a three-point grid so ties (sharp bounds) are common
    flat,            // every type shares each (d, k) value; the selection inequalities bind
    free,            // i.i.d. uniform; only gated sides are checked
};

struct RandomSpecOptions {
    SpecFamily family = SpecFamily::pairs;
    int m = 1;
    std::size_t max_support = 8;
    OutcomeSupport support{-1.0, 3.0};
    MuStyle mu_style = MuStyle::ordered;
};

/// Deterministic in (seed, index).
inline PopulationSpec random_spec(const RandomSpecOptions& opt, std::uint64_t seed, std::uint64_t index) {
    CounterRng rng(seed, index, 0, StreamTag::trial);
    const auto& pool = cached_profiles(opt.family, opt.m);
    PopulationSpec s;
    s.m = opt.m;
    s.support = opt.support;
    s.noise_sd = 0.0;
    s.p_z = 0.2 + 0.6 * rng.uniform();

    // Random subset of profiles with Dirichlet(1) weights.
    const std::size_t k = 1 + static_cast<std::size_t>(rng.below(std::min(opt.max_support, pool.size())));
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    std::vector<double> w(k);
    double total = 0.0;
    for (auto& x : w) total += (x = -std::log(1.0 - rng.uniform()));
    double assigned = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double p = i + 1 == k ? 1.0 - assigned : w[i] / total;
        assigned += p;
        s.profiles.push_back({pool[idx[i]], p});
    }

    const double lo = opt.support.lo, span = opt.support.hi - opt.support.lo;
    std::array<std::vector<double>, 6> d0, d1;
    for (auto& v : d0) v.assign(opt.m + 1, 0.0);
    for (auto& v : d1) v.assign(opt.m + 1, 0.0);
    for (int kk = 0; kk <= opt.m; ++kk) {
        std::array<double, 6> c0, c1;
        auto draw = [&] {
            if (opt.mu_style == MuStyle::ordered_coarse) return lo + span * static_cast<double>(rng.below(3)) / 2.0;
            return lo + span * rng.uniform();
        };
        for (auto& x : c0) x = draw();
        for (auto& x : c1) x = draw();
        if (opt.mu_style == MuStyle::flat) {
            c0.fill(c0[0]);
            c1.fill(rng.below(2) ? c0[0] : c1[0]);
        }
        if (opt.mu_style != MuStyle::free) {
            // Descending columns assigned A, S, C, P, G, N; the elementwise max keeps the order.
            std::sort(c0.begin(), c0.end(), std::greater<>());
            std::sort(c1.begin(), c1.end(), std::greater<>());
            for (int t = 0; t < 6; ++t) c1[t] = std::max(c1[t], c0[t]);
        }
        for (int t = 0; t < 6; ++t) {
            d0[t][kk] = c0[t];
            d1[t][kk] = c1[t];
        }
    }
    for (auto t : kAllTypes) s.mu.set(t, d0[index_of(t)], d1[index_of(t)]);
    return s;
}

}  // namespace spiv

#endif  // SPILLOVER_IV_RANDOM_SPEC_HPP
