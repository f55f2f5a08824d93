#ifndef SPILLOVER_IV_SEARCH_HPP
#define SPILLOVER_IV_SEARCH_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "bounds.hpp"
#include "diagnostics.hpp"
#include "estimate.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "random_spec.hpp"
#include "simulate.hpp"

namespace spiv {

// ---------------------------------------------------------------------------
// Randomized falsification search

/// Full oracle verification of one spec.
struct TrialResult {
    IdentityReport identities;
    BoundValidityReport bounds;
    IrrelevanceReport signs;
    std::size_t lower_checked = 0, upper_checked = 0;
    [[nodiscard]] bool ok() const { return identities.ok() && bounds.ok() && !signs.reject; }
};

inline TrialResult run_trial(const PopulationSpec& spec) {
    TrialResult r;
    const auto ms = population_moments(spec);
    r.identities = verify_identities(spec, ms);
    r.bounds = verify_bounds(spec, ms, true_estimands(spec));
    r.signs = irrelevance_test(ms);
    for (const auto& b : r.bounds.brackets) {
        r.lower_checked += b.lower_checked ? 1 : 0;
        r.upper_checked += b.upper_checked ? 1 : 0;
    }
    return r;
}

inline nlohmann::json failures_json(const TrialResult& r) {
    nlohmann::json f = nlohmann::json::array();
    for (const auto& i : r.identities.results)
        if (!i.pass)
            f.push_back({{"kind", "identity"},
                         {"identity", i.name},
                         {"moment_side", i.moment_side},
                         {"enumeration_side", i.enumeration_side}});
    for (const auto& b : r.bounds.brackets)
        if (!b.pass())
            f.push_back({{"kind", "bracketing"},
                         {"estimand", estimand_name(b.estimand)},
                         {"policy", policy_name(b.policy)},
                         {"interval", to_json_value(b.interval)},
                         {"truth", to_json_value(b.truth)},
                         {"existence_agrees", b.existence_agrees}});
    for (const auto& c : r.bounds.collapses)
        if (!c.pass) f.push_back({{"kind", "collapse"}, {"claim", c.claim}, {"detail", c.detail}});
    for (const auto& c : r.signs.conditions)
        if (!c.pass) f.push_back({{"kind", "sign_condition"}, {"condition", c.condition}, {"value", c.value}});
    return f;
}

/// Drops profiles one at a time (renormalizing) while the population still fails.
inline PopulationSpec shrink_counterexample(PopulationSpec spec) {
    bool changed = true;
    while (changed && spec.profiles.size() > 1) {
        changed = false;
        for (std::size_t i = 0; i < spec.profiles.size(); ++i) {
            PopulationSpec cand = spec;
            cand.profiles.erase(cand.profiles.begin() + static_cast<std::ptrdiff_t>(i));
            double total = 0.0;
            for (const auto& wp : cand.profiles) total += wp.prob;
            if (!(total > 0.0)) continue;
            for (auto& wp : cand.profiles) wp.prob /= total;
            if (!run_trial(cand).ok()) {
                spec = std::move(cand);
                changed = true;
                break;
            }
        }
    }
    return spec;
}

struct SearchOptions {
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    int m = 1;
    SpecFamily family = SpecFamily::pairs;
    std::size_t max_counterexamples = 5;
};

struct SearchReport {
    SearchOptions options;
    std::size_t identities_checked = 0;
    std::size_t lower_checked = 0, upper_checked = 0;
    std::size_t collapses_checked = 0;
    std::size_t failing_trials = 0;
    nlohmann::json counterexamples = nlohmann::json::array();
    [[nodiscard]] bool ok() const noexcept { return failing_trials == 0; }
};

/// Trials cycle through the outcome-mean styles.
inline PopulationSpec search_spec(const SearchOptions& opt, std::size_t t) {
    RandomSpecOptions ro;
    ro.family = opt.family;
    ro.m = opt.m;
    ro.mu_style = static_cast<MuStyle>(t % 4);
    return random_spec(ro, opt.seed, t);
}

inline SearchReport run_search(const SearchOptions& opt) {
    if (opt.trials < 1) throw InputError("trials must be at least 1");
    cached_profiles(opt.family, opt.m);  // validates family and m before spawning workers
    std::vector<TrialResult> results(opt.trials);
    parallel_for(opt.trials, [&](std::size_t t) { results[t] = run_trial(search_spec(opt, t)); });
    SearchReport rep;
    rep.options = opt;
    for (std::size_t t = 0; t < opt.trials; ++t) {
        const auto& r = results[t];
        rep.identities_checked += r.identities.results.size();
        rep.lower_checked += r.lower_checked;
        rep.upper_checked += r.upper_checked;
        rep.collapses_checked += r.bounds.collapses.size();
        if (r.ok()) continue;
        ++rep.failing_trials;
        if (rep.counterexamples.size() >= opt.max_counterexamples) continue;
        const auto spec = search_spec(opt, t);
        const auto minimal = shrink_counterexample(spec);
        rep.counterexamples.push_back({{"trial", t},
                                       {"spec", to_json_value(spec)},
                                       {"failures", failures_json(r)},
                                       {"minimal_spec", to_json_value(minimal)},
                                       {"minimal_failures", failures_json(run_trial(minimal))}});
    }
    return rep;
}

inline nlohmann::json to_json_value(const SearchReport& r) {
    return {{"family", family_name(r.options.family)},
            {"m", r.options.m},
            {"trials", r.options.trials},
            {"seed", r.options.seed},
            {"identities_checked", r.identities_checked},
            {"lower_endpoints_checked", r.lower_checked},
            {"upper_endpoints_checked", r.upper_checked},
            {"collapse_claims_checked", r.collapses_checked},
            {"failing_trials", r.failing_trials},
            {"ok", r.ok()},
            {"counterexamples", r.counterexamples}};
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct MonteCarloOptions {
    std::size_t n_groups = 1000;
    std::size_t reps = 1;
    std::uint64_t seed = 0;
    FallbackPolicy fallback_policy = FallbackPolicy::support_bounds;
};

struct EndpointStats {
    std::size_t n = 0;
    double bias = std::numeric_limits<double>::quiet_NaN();
    double rmse = std::numeric_limits<double>::quiet_NaN();
};

struct MonteCarloRow {
    Estimand estimand = Estimand::tauD0;
    IntervalResult population;
    double truth = std::numeric_limits<double>::quiet_NaN();
    bool truth_exists = false;
    std::size_t existing = 0;
    double fail_rate = 0.0;
    EndpointStats lower, upper;
    double bracket_frequency = std::numeric_limits<double>::quiet_NaN();
};

struct MonteCarloReport {
    MonteCarloOptions options;
    std::string spec_digest;
    std::vector<MonteCarloRow> rows;
};

inline std::uint64_t rep_seed(std::uint64_t seed, std::size_t r) {
    return CounterRng(seed, r, 0, StreamTag::rep).next_u64();
}

inline MonteCarloReport run_montecarlo(const PopulationSpec& spec, const MonteCarloOptions& opt) {
    if (opt.reps < 1) throw InputError("reps must be at least 1");
    require_valid(spec);
    const auto truth = true_estimands(spec);
    const auto pop = population_moments(spec);
    BoundOptions bo;
    bo.mode = mode_for(spec.m);
    bo.osnc = check_osnc(spec).pass;
    bo.fallback_policy = opt.fallback_policy;

    PluginOptions po;
    po.osnc = bo.osnc;
    po.fallback_policy = opt.fallback_policy;
    po.support = spec.support;

    std::vector<std::vector<IntervalResult>> reps(opt.reps);
    parallel_for(opt.reps, [&](std::size_t r) {
        SimulationConfig cfg{opt.n_groups, rep_seed(opt.seed, r), spec};
        reps[r] = plugin_bounds(draw_dataset(cfg), po).intervals;
    });

    MonteCarloReport rep;
    rep.options = opt;
    rep.spec_digest = spec_digest(spec);
    const Estimand order[] = {Estimand::tauD0, Estimand::tauD1, Estimand::tauS0, Estimand::tauS1, Estimand::late};
    for (std::size_t e = 0; e < 5; ++e) {
        MonteCarloRow row;
        row.estimand = order[e];
        row.population = compute_bound(order[e], pop, spec.support, bo);
        if (order[e] == Estimand::late) {
            row.truth_exists = truth.late.has_value();
            if (truth.late) row.truth = *truth.late;
        } else {
            row.truth_exists = truth.at(order[e]).exists;
            row.truth = truth.at(order[e]).value;
        }
        double sl = 0, sl2 = 0, su = 0, su2 = 0;
        std::size_t bracketed = 0;
        for (const auto& r : reps) {
            const auto& iv = r[e];
            if (!iv.exists || iv.refused) continue;
            ++row.existing;
            if (row.population.exists) {
                const double el = iv.lower - row.population.lower, eu = iv.upper - row.population.upper;
                if (std::isfinite(el)) sl += el, sl2 += el * el, ++row.lower.n;
                if (std::isfinite(eu)) su += eu, su2 += eu * eu, ++row.upper.n;
            }
            if (row.truth_exists && iv.lower <= row.truth && row.truth <= iv.upper) ++bracketed;
        }
        if (row.lower.n) {
            row.lower.bias = sl / row.lower.n;
            row.lower.rmse = std::sqrt(sl2 / row.lower.n);
        }
        if (row.upper.n) {
            row.upper.bias = su / row.upper.n;
            row.upper.rmse = std::sqrt(su2 / row.upper.n);
        }
        row.fail_rate = 1.0 - static_cast<double>(row.existing) / static_cast<double>(opt.reps);
        if (row.existing && row.truth_exists)
            row.bracket_frequency = static_cast<double>(bracketed) / static_cast<double>(row.existing);
        rep.rows.push_back(row);
    }
    return rep;
}

inline nlohmann::json to_json_value(const MonteCarloReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& x : r.rows)
        rows.push_back({{"estimand", estimand_name(x.estimand)},
                        {"population", to_json_value(x.population)},
                        {"truth", json_number(x.truth)},
                        {"truth_exists", x.truth_exists},
                        {"reps_existing", x.existing},
                        {"fail_rate", x.fail_rate},
                        {"lower", {{"n", x.lower.n}, {"bias", json_number(x.lower.bias)}, {"rmse", json_number(x.lower.rmse)}}},
                        {"upper", {{"n", x.upper.n}, {"bias", json_number(x.upper.bias)}, {"rmse", json_number(x.upper.rmse)}}},
                        {"bracket_frequency", json_number(x.bracket_frequency)}});
    return {{"spec_digest", r.spec_digest},
            {"n_groups", r.options.n_groups},
            {"reps", r.options.reps},
            {"seed", r.options.seed},
            {"fallback_policy", policy_name(r.options.fallback_policy)},
            {"rows", rows}};
}

}  // namespace spiv

#endif  // SPILLOVER_IV_SEARCH_HPP
