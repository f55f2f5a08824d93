#ifndef SPILLOVER_IV_BOUNDS_HPP
#define SPILLOVER_IV_BOUNDS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "estimand.hpp"
#include "moments.hpp"
#include "population.hpp"

namespace spiv {

enum class FallbackPolicy : std::uint8_t { refuse, support_bounds, alt_pairs_then_support };

constexpr std::string_view policy_name(FallbackPolicy p) noexcept {
    switch (p) {
        case FallbackPolicy::refuse: return "refuse";
        case FallbackPolicy::support_bounds: return "support_bounds";
        case FallbackPolicy::alt_pairs_then_support: return "alt_pairs_then_support";
    }
    return "?";
}

inline std::optional<FallbackPolicy> parse_policy(std::string_view s) noexcept {
    for (auto p : {FallbackPolicy::refuse, FallbackPolicy::support_bounds, FallbackPolicy::alt_pairs_then_support})
        if (policy_name(p) == s) return p;
    return std::nullopt;
}

enum class Fallback : std::uint8_t { none, ymin, ymax, alt_AN_pair, alt_NA_pair, refused };

constexpr std::string_view fallback_name(Fallback f) noexcept {
    switch (f) {
        case Fallback::none: return "none";
        case Fallback::ymin: return "ymin";
        case Fallback::ymax: return "ymax";
        case Fallback::alt_AN_pair: return "alt_AN_pair";
        case Fallback::alt_NA_pair: return "alt_NA_pair";
        case Fallback::refused: return "refused";
    }
    return "?";
}

inline constexpr double kPopulationTolerance = 1e-9;

struct BoundOptions {
    BoundMode mode = BoundMode::pairs;
    bool osnc = false;
    double denominator_tolerance = kPopulationTolerance;
    FallbackPolicy fallback_policy = FallbackPolicy::support_bounds;
};

struct IntervalResult {
    Estimand estimand = Estimand::tauD0;
    double lower = std::numeric_limits<double>::quiet_NaN();
    double upper = std::numeric_limits<double>::quiet_NaN();
    bool exists = false;
    bool point_identified = false;
    bool refused = false;  // configuration has no bound (not a data problem)
    bool crossed = false;  // lower > upper beyond tolerance; reported as computed
    Fallback lower_fallback = Fallback::none;
    Fallback upper_fallback = Fallback::none;
    std::map<std::string, double> denominators;
    std::string note;

    [[nodiscard]] std::vector<Fallback> fallbacks_used() const {
        std::vector<Fallback> v;
        if (lower_fallback != Fallback::none) v.push_back(lower_fallback);
        if (upper_fallback != Fallback::none && upper_fallback != lower_fallback) v.push_back(upper_fallback);
        if (v.empty()) v.push_back(Fallback::none);
        return v;
    }
    [[nodiscard]] double width() const { return upper - lower; }
    [[nodiscard]] bool contains(double v, double tol) const { return exists && lower - tol <= v && v <= upper + tol; }
};

inline nlohmann::json json_number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return nullptr;
    return v > 0 ? "inf" : "-inf";
}

inline nlohmann::json to_json_value(const IntervalResult& r) {
    nlohmann::json j;
    j["estimand"] = estimand_name(r.estimand);
    j["lower"] = json_number(r.lower);
    j["upper"] = json_number(r.upper);
    j["exists"] = r.exists;
    j["point_identified"] = r.point_identified;
    j["refused"] = r.refused;
    j["crossed"] = r.crossed;
    nlohmann::json fb = nlohmann::json::array();
    for (auto f : r.fallbacks_used()) fb.push_back(fallback_name(f));
    j["fallbacks"] = fb;
    j["lower_fallback"] = fallback_name(r.lower_fallback);
    j["upper_fallback"] = fallback_name(r.upper_fallback);
    nlohmann::json dens = nlohmann::json::object();
    for (const auto& [k, v] : r.denominators) dens[k] = json_number(v);
    j["denominators"] = dens;
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

namespace detail {

/// Conditional outcome mean num/den when den clears tolerance.
struct OutcomeRatio {
    double num = 0.0;
    double den = 0.0;
    [[nodiscard]] std::optional<double> value(double tol) const {
        if (std::abs(den) <= tol) return std::nullopt;
        return num / den;
    }
};

/// Substitute for a missing conditional mean according to the fallback policy.
/// `extreme` is the support end that keeps the bound conservative.
struct Substitution {
    std::optional<double> value;
    Fallback used = Fallback::none;
};

inline Substitution substitute(const OutcomeRatio& primary, const std::optional<OutcomeRatio>& alternative,
                               Fallback alternative_tag, double extreme, Fallback extreme_tag,
                               const BoundOptions& opt) {
    if (auto v = primary.value(opt.denominator_tolerance)) return {v, Fallback::none};
    switch (opt.fallback_policy) {
        case FallbackPolicy::refuse: return {std::nullopt, Fallback::refused};
        case FallbackPolicy::alt_pairs_then_support:
            if (alternative)
                if (auto v = alternative->value(opt.denominator_tolerance)) return {v, alternative_tag};
            [[fallthrough]];
        case FallbackPolicy::support_bounds: return {extreme, extreme_tag};
    }
    return {std::nullopt, Fallback::refused};
}

/// Shared assembly: endpoint = base + sign * y * ratio, where each side's y is a conditional
/// outcome mean (or its substitute). Point identification when the ratio numerator vanishes.
struct Assembly {
    Estimand estimand = Estimand::tauD0;
    double den1 = 0.0;
    double base_num = 0.0;
    double ratio_num = 0.0;
    double sign = 1.0;
    OutcomeRatio lower_y, upper_y;
    std::optional<OutcomeRatio> lower_alt, upper_alt;
    Fallback lower_alt_tag = Fallback::none, upper_alt_tag = Fallback::none;
    double lower_extreme = 0.0, upper_extreme = 0.0;
    Fallback lower_extreme_tag = Fallback::none, upper_extreme_tag = Fallback::none;
};

inline IntervalResult assemble(const Assembly& a, const BoundOptions& opt, IntervalResult r) {
    r.estimand = a.estimand;
    r.denominators["primary"] = a.den1;
    r.denominators["lower_term"] = a.lower_y.den;
    r.denominators["upper_term"] = a.upper_y.den;
    if (a.lower_alt) r.denominators["lower_alt_term"] = a.lower_alt->den;
    if (a.upper_alt) r.denominators["upper_alt_term"] = a.upper_alt->den;
    r.denominators["ratio_numerator"] = a.ratio_num;
    if (std::abs(a.den1) <= opt.denominator_tolerance) {
        r.exists = false;
        r.note = "primary denominator within tolerance of zero";
        return r;
    }
    r.exists = true;
    const double base = a.base_num / a.den1;
    if (std::abs(a.ratio_num) <= opt.denominator_tolerance) {
        r.lower = r.upper = base;
        r.point_identified = true;
        return r;
    }
    const double ratio = a.ratio_num / a.den1;
    const auto lo = substitute(a.lower_y, a.lower_alt, a.lower_alt_tag, a.lower_extreme, a.lower_extreme_tag, opt);
    const auto up = substitute(a.upper_y, a.upper_alt, a.upper_alt_tag, a.upper_extreme, a.upper_extreme_tag, opt);
    r.lower_fallback = lo.used;
    r.upper_fallback = up.used;
    constexpr double inf = std::numeric_limits<double>::infinity();
    r.lower = lo.value ? base + a.sign * *lo.value * ratio : -inf;
    r.upper = up.value ? base + a.sign * *up.value * ratio : inf;
    r.crossed = r.lower > r.upper + opt.denominator_tolerance;
    return r;
}

inline IntervalResult missing_cells(Estimand e, const std::exception& ex) {
    IntervalResult r;
    r.estimand = e;
    r.exists = false;
    r.note = ex.what();
    return r;
}

}  // namespace detail

/// Direct effect with peers untreated.
inline IntervalResult bound_direct_0(const MomentSet& ms, const OutcomeSupport& sup, const BoundOptions& opt) {
    using namespace cells;
    try {
        detail::Assembly a;
        a.estimand = Estimand::tauD0;
        a.den1 = delta(ms, q::nobody, c10, c00);
        a.base_num = -delta(ms, q::peers_none.with_y(), c10, c00);
        a.ratio_num = delta(ms, q::peers_none, c10, c00);
        a.sign = 1.0;
        a.lower_y = {ms.expect(q::nobody.with_y(), c11), ms.expect(q::nobody, c11)};
        a.upper_y = {delta(ms, q::treated_peers_none.with_y(), c01, c00), delta(ms, q::treated_peers_none, c01, c00)};
        a.upper_alt = detail::OutcomeRatio{ms.expect(q::treated_peers_none.with_y(), c01),
                                           ms.expect(q::treated_peers_none, c01)};
        a.upper_alt_tag = Fallback::alt_AN_pair;
        a.lower_extreme = sup.lo, a.lower_extreme_tag = Fallback::ymin;
        a.upper_extreme = sup.hi, a.upper_extreme_tag = Fallback::ymax;
        return detail::assemble(a, opt, {});
    } catch (const std::domain_error& ex) {
        return detail::missing_cells(Estimand::tauD0, ex);
    }
}

/// Direct effect with peers treated.
inline IntervalResult bound_direct_1(const MomentSet& ms, const OutcomeSupport& sup, const BoundOptions& opt) {
    using namespace cells;
    try {
        detail::Assembly a;
        a.estimand = Estimand::tauD1;
        a.den1 = delta(ms, q::everybody, c11, c01);
        a.base_num = delta(ms, q::peers_all.with_y(), c11, c01);
        a.ratio_num = delta(ms, q::peers_all, c11, c01);
        a.sign = -1.0;
        a.lower_y = {ms.expect(q::everybody.with_y(), c00), ms.expect(q::everybody, c00)};
        a.upper_y = {delta(ms, q::untreated_peers_all.with_y(), c11, c10), delta(ms, q::untreated_peers_all, c11, c10)};
        a.upper_alt = detail::OutcomeRatio{ms.expect(q::untreated_peers_all.with_y(), c10),
                                           ms.expect(q::untreated_peers_all, c10)};
        a.upper_alt_tag = Fallback::alt_NA_pair;
        a.lower_extreme = sup.hi, a.lower_extreme_tag = Fallback::ymax;
        a.upper_extreme = sup.lo, a.upper_extreme_tag = Fallback::ymin;
        return detail::assemble(a, opt, {});
    } catch (const std::domain_error& ex) {
        return detail::missing_cells(Estimand::tauD1, ex);
    }
}

namespace detail {
inline IntervalResult refused(Estimand e, std::string why) {
    IntervalResult r;
    r.estimand = e;
    r.exists = false;
    r.refused = true;
    r.note = std::move(why);
    return r;
}
}  // namespace detail

/// Spillover effect on untreated members.
inline IntervalResult bound_spill_0(const MomentSet& ms, const OutcomeSupport& sup, const BoundOptions& opt) {
    using namespace cells;
    if (opt.mode == BoundMode::pairs && ms.m != 1)
        return detail::refused(Estimand::tauS0, "pairs formulas require exactly one peer");
    if (opt.mode == BoundMode::multi && !opt.osnc)
        return detail::refused(Estimand::tauS0, "no bound without one-sided noncompliance for several peers");
    try {
        if (opt.mode == BoundMode::multi) {
            IntervalResult r;
            r.estimand = Estimand::tauS0;
            const double den = delta(ms, q::nobody, c01, c00);
            r.denominators["primary"] = den;
            if (std::abs(den) <= opt.denominator_tolerance) {
                r.note = "primary denominator within tolerance of zero";
                return r;
            }
            r.exists = true;
            r.point_identified = true;
            r.lower = r.upper = -delta(ms, q::own_untreated.with_y(), c01, c00) / den;
            return r;
        }
        detail::Assembly a;
        a.estimand = Estimand::tauS0;
        a.den1 = delta(ms, q::nobody, c01, c00);
        a.base_num = -delta(ms, q::own_untreated.with_y(), c01, c00);
        a.ratio_num = delta(ms, q::own_treated, c01, c00);
        a.sign = -1.0;
        a.lower_y = {delta(ms, q::untreated_peers_all.with_y(), c11, c10), delta(ms, q::untreated_peers_all, c11, c10)};
        a.lower_alt = detail::OutcomeRatio{ms.expect(q::untreated_peers_all.with_y(), c10),
                                           ms.expect(q::untreated_peers_all, c10)};
        a.lower_alt_tag = Fallback::alt_NA_pair;
        a.upper_y = {ms.expect(q::everybody.with_y(), c00), ms.expect(q::everybody, c00)};
        a.lower_extreme = sup.lo, a.lower_extreme_tag = Fallback::ymin;
        a.upper_extreme = sup.hi, a.upper_extreme_tag = Fallback::ymax;
        return detail::assemble(a, opt, {});
    } catch (const std::domain_error& ex) {
        return detail::missing_cells(Estimand::tauS0, ex);
    }
}

/// Spillover effect on treated members.
inline IntervalResult bound_spill_1(const MomentSet& ms, const OutcomeSupport& sup, const BoundOptions& opt) {
    using namespace cells;
    if (opt.mode == BoundMode::pairs && ms.m != 1)
        return detail::refused(Estimand::tauS1, "pairs formulas require exactly one peer");
    if (opt.mode == BoundMode::multi && !opt.osnc)
        return detail::refused(Estimand::tauS1, "no bound without one-sided noncompliance for several peers");
    try {
        detail::Assembly a;
        a.estimand = Estimand::tauS1;
        a.sign = -1.0;
        a.base_num = delta(ms, q::own_treated.with_y(), c11, c10);
        a.ratio_num = delta(ms, q::own_treated, c11, c10);
        a.upper_y = {ms.expect(q::nobody.with_y(), c11), ms.expect(q::nobody, c11)};
        a.lower_extreme = sup.hi, a.lower_extreme_tag = Fallback::ymax;
        a.upper_extreme = sup.lo, a.upper_extreme_tag = Fallback::ymin;
        if (opt.mode == BoundMode::pairs) {
            a.den1 = delta(ms, q::everybody, c11, c10);
            a.lower_y = {delta(ms, q::treated_peers_none.with_y(), c01, c00), delta(ms, q::treated_peers_none, c01, c00)};
            a.lower_alt = detail::OutcomeRatio{ms.expect(q::treated_peers_none.with_y(), c01),
                                               ms.expect(q::treated_peers_none, c01)};
            a.lower_alt_tag = Fallback::alt_AN_pair;
        } else {
            a.den1 = delta(ms, q::own_treated, c11, c10) - delta(ms, q::treated_peers_none, c11, c10);
            a.lower_y = {delta(ms, q::treated_peers_none.with_y(), c11, c10), delta(ms, q::treated_peers_none, c11, c10)};
        }
        return detail::assemble(a, opt, {});
    } catch (const std::domain_error& ex) {
        return detail::missing_cells(Estimand::tauS1, ex);
    }
}

/// Wald ratio ignoring interference: cells pooled by own assignment, weighted by cell mass.
inline double iv_estimand(const MomentSet& ms, double tol = 1e-12) {
    auto pooled = [&](Quantity qty, int a) {
        const auto& c0 = ms.at(Cell{a, 0});
        const auto& c1 = ms.at(Cell{a, 1});
        const double w = (c0.populated ? c0.weight : 0.0) + (c1.populated ? c1.weight : 0.0);
        if (w <= 0.0) throw std::domain_error("iv_estimand: no observations with own assignment " + std::to_string(a));
        double s = 0.0;
        if (c0.populated) s += c0.weight * ms.expect(qty, Cell{a, 0});
        if (c1.populated) s += c1.weight * ms.expect(qty, Cell{a, 1});
        return s / w;
    };
    const double fs = pooled(q::own_treated, 1) - pooled(q::own_treated, 0);
    if (std::abs(fs) <= tol) throw std::domain_error("iv_estimand: first stage is zero");
    return (pooled(q::one.with_y(), 1) - pooled(q::one.with_y(), 0)) / fs;
}

inline IntervalResult late_interval(const MomentSet& ms, double tol = 1e-12) {
    IntervalResult r;
    r.estimand = Estimand::late;
    try {
        r.lower = r.upper = iv_estimand(ms, tol);
        r.exists = true;
        r.point_identified = true;
    } catch (const std::domain_error& ex) {
        r.note = ex.what();
    }
    return r;
}

inline IntervalResult compute_bound(Estimand e, const MomentSet& ms, const OutcomeSupport& sup,
                                    const BoundOptions& opt) {
    switch (e) {
        case Estimand::tauD0: return bound_direct_0(ms, sup, opt);
        case Estimand::tauD1: return bound_direct_1(ms, sup, opt);
        case Estimand::tauS0: return bound_spill_0(ms, sup, opt);
        case Estimand::tauS1: return bound_spill_1(ms, sup, opt);
        case Estimand::late: return late_interval(ms);
    }
    throw std::logic_error("compute_bound: unknown estimand");
}

/// Mode implied by group size.
inline BoundMode mode_for(int m) noexcept { return m == 1 ? BoundMode::pairs : BoundMode::multi; }

}  // namespace spiv

#endif  // SPILLOVER_IV_BOUNDS_HPP
