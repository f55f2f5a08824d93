#ifndef SPILLOVER_IV_ESTIMATE_HPP
#define SPILLOVER_IV_ESTIMATE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bounds.hpp"
#include "compliance.hpp"
#include "dataset.hpp"
#include "moments.hpp"
#include "parallel.hpp"
#include "population.hpp"
#include "rng.hpp"

namespace spiv {

namespace detail {
/// Adds one group's members to the cells they condition on. Members whose peers
/// have mixed instruments belong to no cell.
inline void accumulate_group(MomentAccumulator& acc, const Row* rows, int size, double w) {
    int z_sum = 0, d_sum = 0;
    for (int i = 0; i < size; ++i) {
        z_sum += rows[i].z;
        d_sum += rows[i].d;
    }
    const int m = size - 1;
    for (int i = 0; i < size; ++i) {
        const int zp = z_sum - rows[i].z;
        if (zp != 0 && zp != m) continue;
        const int k = d_sum - rows[i].d;
        acc.add(Cell{rows[i].z, zp == m ? 1 : 0}, rows[i].d, k == 0, k == m, rows[i].y, w);
    }
}
}  // namespace detail

/// Cell means of the moment basis. Groups are processed in fixed blocks merged in
/// order, so the result does not depend on the worker count.
inline MomentSet sample_moments(const Dataset& data) {
    const int size = data.group_size();
    const Blocks blocks{data.n_groups(), 8192};
    std::vector<MomentAccumulator> parts(blocks.count());
    parallel_for(blocks.count(), [&](std::size_t b) {
        for (std::size_t g = blocks.begin(b); g < blocks.end(b); ++g)
            detail::accumulate_group(parts[b], data.group(g), size, data.weight(g));
    });
    MomentAccumulator total;
    for (const auto& p : parts) total.merge(p);
    return total.finish(data.m, false);
}

/// Every profile crossed with every instrument vector, one group each, weighted by
/// profile probability times assignment probability.
inline Dataset population_as_weighted_dataset(const PopulationSpec& spec) {
    const int size = spec.group_size();
    if (size > 16) throw std::length_error("population_as_weighted_dataset: group too large to enumerate");
    Dataset data;
    data.m = spec.m;
    std::int64_t gid = 0;
    for (const auto& wp : spec.profiles) {
        if (wp.prob <= 0.0) continue;
        for (std::uint32_t mask = 0; mask < (1u << size); ++mask) {
            std::vector<int> z(size);
            double pz = 1.0;
            for (int i = 0; i < size; ++i) {
                z[i] = (mask >> i) & 1u;
                pz *= z[i] ? spec.p_z : 1.0 - spec.p_z;
            }
            const auto d = group_treatments(wp.profile, z);
            int treated = 0;
            for (int v : d) treated += v;
            for (int i = 0; i < size; ++i)
                data.rows.push_back(Row{gid, i, z[i], d[i], spec.mu(wp.profile.types[i], d[i], treated - d[i])});
            data.group_weights.push_back(wp.prob * pz);
            ++gid;
        }
    }
    return data;
}

/// Denominator tolerance for sample moments: max(1e-9, 1 / smallest cell count).
inline double sample_tolerance(const MomentSet& ms) {
    const double units = ms.min_cell_units();
    return units > 0.0 ? std::max(kPopulationTolerance, 1.0 / units) : kPopulationTolerance;
}

struct PluginOptions {
    std::optional<BoundMode> mode;  // must agree with the group size when given
    bool osnc = false;
    FallbackPolicy fallback_policy = FallbackPolicy::support_bounds;
    std::optional<double> denominator_tolerance;  // default: sample_tolerance
    std::optional<OutcomeSupport> support;        // default: observed outcome range
};

struct PluginEstimate {
    MomentSet moments;
    OutcomeSupport support;
    BoundOptions options;
    double osnc_screen = std::numeric_limits<double>::quiet_NaN();  // E[D | own 0, peers 1]
    bool osnc_screen_pass = false;
    std::vector<IntervalResult> intervals;  // tauD0, tauD1, tauS0, tauS1, late
};

inline OutcomeSupport observed_support(const Dataset& data) {
    if (data.rows.empty()) throw InputError("empty dataset");
    OutcomeSupport s{data.rows.front().y, data.rows.front().y};
    for (const auto& r : data.rows) {
        s.lo = std::min(s.lo, r.y);
        s.hi = std::max(s.hi, r.y);
    }
    return s;
}

inline BoundMode resolve_mode(int m, const std::optional<BoundMode>& requested) {
    const BoundMode implied = mode_for(m);
    if (requested && *requested != implied)
        throw InputError(std::string("bound mode ") + std::string(mode_name(*requested)) + " does not fit group size " +
                         std::to_string(m + 1) + "; use " + std::string(mode_name(implied)));
    return implied;
}

inline PluginEstimate plugin_bounds(const MomentSet& ms, const OutcomeSupport& support, const PluginOptions& po) {
    PluginEstimate pe;
    pe.moments = ms;
    pe.support = support;
    pe.options.mode = resolve_mode(ms.m, po.mode);
    pe.options.fallback_policy = po.fallback_policy;
    pe.options.denominator_tolerance = po.denominator_tolerance.value_or(sample_tolerance(ms));
    if (ms.at(kCell01).populated) {
        pe.osnc_screen = ms.expect(q::own_treated, kCell01);
        pe.osnc_screen_pass = pe.osnc_screen <= pe.options.denominator_tolerance;
    }
    pe.options.osnc = po.osnc && pe.osnc_screen_pass;
    for (auto e : {Estimand::tauD0, Estimand::tauD1, Estimand::tauS0, Estimand::tauS1}) {
        auto r = compute_bound(e, ms, support, pe.options);
        if (po.osnc && !pe.osnc_screen_pass && pe.options.mode == BoundMode::multi &&
            (e == Estimand::tauS0 || e == Estimand::tauS1))
            r.note = "one-sided noncompliance screen failed: E[D | own 0, peers 1] = " + detail::fmt_g(pe.osnc_screen);
        pe.intervals.push_back(std::move(r));
    }
    pe.intervals.push_back(late_interval(ms));
    return pe;
}

inline PluginEstimate plugin_bounds(const Dataset& data, const PluginOptions& po) {
    return plugin_bounds(sample_moments(data), po.support.value_or(observed_support(data)), po);
}

// ---------------------------------------------------------------------------
// Group bootstrap

struct EndpointBand {
    double lo = std::numeric_limits<double>::quiet_NaN();
    double hi = std::numeric_limits<double>::quiet_NaN();
};

struct BootstrapSummary {
    Estimand estimand = Estimand::tauD0;
    EndpointBand lower_ci, upper_ci;
    double lower_se = std::numeric_limits<double>::quiet_NaN();
    double upper_se = std::numeric_limits<double>::quiet_NaN();
    double fail_rate = 0.0;
    std::size_t replicates = 0;
};

/// Type-7 sample quantile of sorted values.
inline double quantile_sorted(const std::vector<double>& v, double p) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    if (v[lo] == v[hi]) return v[lo];
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double std_dev(const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Resamples whole groups B times. The support and tolerance are fixed at their
/// full-sample values so every replicate applies the same rules.
inline std::vector<BootstrapSummary> bootstrap(const Dataset& data, const PluginOptions& po, std::size_t B,
                                               std::uint64_t seed) {
    if (B < 2) throw InputError("bootstrap needs at least 2 replicates");
    const auto full = plugin_bounds(data, po);
    PluginOptions fixed = po;
    fixed.support = full.support;
    fixed.denominator_tolerance = full.options.denominator_tolerance;

    const std::size_t n = data.n_groups();
    const int size = data.group_size();
    std::vector<std::vector<IntervalResult>> reps(B);
    parallel_for(B, [&](std::size_t b) {
        CounterRng rng(seed, b, 0, StreamTag::bootstrap);
        MomentAccumulator acc;
        for (std::size_t i = 0; i < n; ++i) {
            const auto g = static_cast<std::size_t>(rng.below(n));
            detail::accumulate_group(acc, data.group(g), size, data.weight(g));
        }
        reps[b] = plugin_bounds(acc.finish(data.m, false), full.support, fixed).intervals;
    });

    std::vector<BootstrapSummary> out;
    for (std::size_t e = 0; e < full.intervals.size(); ++e) {
        BootstrapSummary s;
        s.estimand = full.intervals[e].estimand;
        s.replicates = B;
        std::vector<double> lo, hi;
        std::size_t fails = 0;
        for (const auto& r : reps) {
            const auto& iv = r[e];
            if (!iv.exists || iv.refused) {
                ++fails;
                continue;
            }
            lo.push_back(iv.lower);
            hi.push_back(iv.upper);
        }
        std::sort(lo.begin(), lo.end());
        std::sort(hi.begin(), hi.end());
        s.lower_ci = {quantile_sorted(lo, 0.025), quantile_sorted(lo, 0.975)};
        s.upper_ci = {quantile_sorted(hi, 0.025), quantile_sorted(hi, 0.975)};
        s.lower_se = std_dev(lo);
        s.upper_se = std_dev(hi);
        s.fail_rate = static_cast<double>(fails) / static_cast<double>(B);
        out.push_back(s);
    }
    return out;
}

inline nlohmann::json estimate_json(const PluginEstimate& pe, const std::vector<BootstrapSummary>* boot = nullptr) {
    nlohmann::json n_cells = nlohmann::json::object();
    for (auto c : kAllCells) n_cells[c.label()] = pe.moments.at(c).units;
    nlohmann::json results = nlohmann::json::array();
    for (std::size_t i = 0; i < pe.intervals.size(); ++i) {
        auto j = to_json_value(pe.intervals[i]);
        j["n_cells"] = n_cells;
        if (boot && i < boot->size()) {
            const auto& b = (*boot)[i];
            j["bootstrap"] = {{"lower_ci", {json_number(b.lower_ci.lo), json_number(b.lower_ci.hi)}},
                              {"upper_ci", {json_number(b.upper_ci.lo), json_number(b.upper_ci.hi)}},
                              {"lower_se", json_number(b.lower_se)},
                              {"upper_se", json_number(b.upper_se)},
                              {"fail_rate", b.fail_rate},
                              {"replicates", b.replicates}};
        }
        results.push_back(j);
    }
    return {{"m", pe.moments.m},
            {"mode", mode_name(pe.options.mode)},
            {"osnc", pe.options.osnc},
            {"osnc_screen", {{"value", json_number(pe.osnc_screen)}, {"pass", pe.osnc_screen_pass}}},
            {"fallback_policy", policy_name(pe.options.fallback_policy)},
            {"denominator_tolerance", pe.options.denominator_tolerance},
            {"y_support", {pe.support.lo, pe.support.hi}},
            {"results", results}};
}

}  // namespace spiv

#endif  // SPILLOVER_IV_ESTIMATE_HPP
