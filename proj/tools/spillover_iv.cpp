// Command-line front end: simulate, oracle, bounds, diagnose, search, montecarlo.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "spillover_iv.hpp"

namespace {

using nlohmann::json;
using namespace spiv;

enum Exit : int { kOk = 0, kInput = 2, kVerification = 3, kCounterexample = 4 };

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw InputError("write failed: " + path);
}

int input_error(const std::string& msg, const json& extra = json::object()) {
    json j = {{"error", msg}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    std::cerr << j.dump() << '\n';
    return kInput;
}

struct InvalidSpec : InputError {
    std::vector<std::string> violations;
    explicit InvalidSpec(std::vector<std::string> v) : InputError("invalid population spec"), violations(std::move(v)) {}
};

PopulationSpec load_valid_spec(const std::string& path) {
    auto spec = load_spec(path);
    auto rep = validate_spec(spec);
    if (!rep.ok()) throw InvalidSpec(std::move(rep.violations));
    return spec;
}

json assumption_summary(const PopulationSpec& spec) {
    json j;
    j["irrelevance"] = to_json_value(check_spec_irrelevance(spec));
    j["one_sided_noncompliance"] = check_osnc(spec).pass;
    const MtrMtsOptions strict{mode_for(spec.m), true};
    json mtr = json::object();
    for (auto e : kEffectEstimands) {
        const auto lo = check_mtr_mts(spec, e, Side::lower, strict);
        const auto up = check_mtr_mts(spec, e, Side::upper, strict);
        mtr[std::string(estimand_name(e))] = {{"lower", lo.pass}, {"upper", up.pass}};
    }
    j["mtr_mts_strict"] = mtr;
    json rel = json::object();
    for (auto e : kEffectEstimands) rel[std::string(estimand_name(e))] = check_relevance(spec, e, mode_for(spec.m)).pass;
    j["relevance"] = rel;
    return j;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void print_interval_table(const std::vector<IntervalResult>& rows) {
    std::printf("%-8s %12s %12s %-7s %-6s %s\n", "estimand", "lower", "upper", "exists", "point", "fallbacks");
    for (const auto& r : rows) {
        std::string fb;
        for (auto f : r.fallbacks_used()) fb += (fb.empty() ? "" : ",") + std::string(fallback_name(f));
        if (r.refused) fb = "refused: " + r.note;
        std::printf("%-8s %12s %12s %-7s %-6s %s\n", std::string(estimand_name(r.estimand)).c_str(),
                    fmt(r.lower).c_str(), fmt(r.upper).c_str(), r.exists ? "yes" : "no",
                    r.point_identified ? "yes" : "no", fb.c_str());
    }
}

// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& config, std::size_t n_groups, std::uint64_t seed, const std::string& out) {
    const auto spec = load_valid_spec(config);
    const auto data = draw_dataset({n_groups, seed, spec});
    write_csv(data, out);
    write_json(out + ".meta.json", {{"seed", seed}, {"spec_digest", spec_digest(spec)}, {"n_groups", n_groups},
                                    {"m", spec.m}, {"rows", data.rows.size()}});
    json summary = {{"spec_digest", spec_digest(spec)}, {"rows", data.rows.size()},
                    {"assumptions", assumption_summary(spec)}};
    std::cout << summary.dump(2) << '\n';
    return kOk;
}

int cmd_oracle(const std::string& config, const std::string& out) {
    const auto spec = load_valid_spec(config);
    const auto irr = check_spec_irrelevance(spec);
    if (!irr.pass)
        return input_error("profile violates irrelevance; oracle identities do not apply",
                           {{"witness", irr.witnesses.front()}});
    const auto ms = population_moments(spec);
    const auto truth = true_estimands(spec);
    const auto ids = verify_identities(spec, ms);
    const auto bv = verify_bounds(spec, ms, truth);
    json report = {{"spec_digest", spec_digest(spec)},
                   {"assumptions", assumption_summary(spec)},
                   {"moments", to_json_value(ms)},
                   {"truth", to_json_value(truth)},
                   {"identities", to_json_value(ids)},
                   {"bounds", to_json_value(bv)}};
    write_json(out, report);
    for (const auto& r : ids.results)
        if (!r.pass)
            std::cerr << "identity " << r.name << " failed: moment side " << r.moment_side << ", enumeration side "
                      << r.enumeration_side << '\n';
    for (const auto& b : bv.brackets)
        if (!b.pass())
            std::cerr << "bracketing failed: " << estimand_name(b.estimand) << " (" << policy_name(b.policy)
                      << ") truth " << b.truth.value << " interval [" << b.interval.lower << ", " << b.interval.upper
                      << "]\n";
    for (const auto& c : bv.collapses)
        if (!c.pass) std::cerr << "collapse claim failed: " << c.claim << " " << c.detail << '\n';
    std::cout << "identities " << ids.results.size() - ids.failures() << "/" << ids.results.size() << " hold; bound checks "
              << (bv.ok() ? "pass" : "FAIL") << '\n';
    return ids.ok() && bv.ok() ? kOk : kVerification;
}

struct BoundsArgs {
    std::string data, out;
    bool pairs = false, multi = false, osnc = false;
    std::string fallback = "support_bounds";
    std::optional<double> y_min, y_max;
    std::size_t bootstrap = 0;
    std::uint64_t seed = 0;
};

int cmd_bounds(const BoundsArgs& a) {
    const auto data = read_csv(a.data);
    PluginOptions po;
    if (a.pairs) po.mode = BoundMode::pairs;
    if (a.multi) po.mode = BoundMode::multi;
    po.osnc = a.osnc;
    const auto policy = parse_policy(a.fallback);
    if (!policy) return input_error("unknown fallback policy '" + a.fallback + "'");
    po.fallback_policy = *policy;
    if (a.y_min || a.y_max) {
        auto sup = observed_support(data);
        if (a.y_min) sup.lo = *a.y_min;
        if (a.y_max) sup.hi = *a.y_max;
        if (sup.lo > sup.hi) return input_error("y-min exceeds y-max");
        po.support = sup;
    }
    const auto pe = plugin_bounds(data, po);
    std::vector<BootstrapSummary> boot;
    if (a.bootstrap) boot = bootstrap(data, po, a.bootstrap, a.seed);
    write_json(a.out, estimate_json(pe, a.bootstrap ? &boot : nullptr));
    print_interval_table(pe.intervals);
    return kOk;
}

int cmd_diagnose(const std::string& path, const std::string& out, double level) {
    const auto data = read_csv(path);
    const auto sutva = sutva_test(data, level);
    const auto irr = irrelevance_test(data, level);
    const auto shares = type_shares(data);
    write_json(out, {{"m", data.m},
                     {"groups", data.n_groups()},
                     {"note", "tests are normal approximations with group-clustered variance"},
                     {"sutva", to_json_value(sutva)},
                     {"irrelevance", to_json_value(irr)},
                     {"type_shares", to_json_value(shares)}});
    std::printf("SUTVA necessary conditions: %s (p = %s, %s)\n", sutva.reject ? "rejected" : "not rejected",
                fmt(sutva.p_value).c_str(), sutva.method.c_str());
    std::printf("irrelevance sign conditions: %s\n", irr.reject ? "violated" : "not violated");
    return kOk;
}

int cmd_search(const SearchOptions& opt, const std::string& out) {
    const auto rep = run_search(opt);
    write_json(out, to_json_value(rep));
    std::printf("%zu trials (%s, m=%d): %zu identities, %zu lower and %zu upper endpoints checked; %zu failing trials\n",
                opt.trials, std::string(family_name(opt.family)).c_str(), opt.m, rep.identities_checked,
                rep.lower_checked, rep.upper_checked, rep.failing_trials);
    if (!rep.ok()) {
        std::cerr << rep.counterexamples.front()["minimal_spec"].dump() << '\n';
        return kCounterexample;
    }
    return kOk;
}

int cmd_montecarlo(const std::string& config, const MonteCarloOptions& opt, const std::string& out) {
    const auto spec = load_valid_spec(config);
    const auto rep = run_montecarlo(spec, opt);
    write_json(out, to_json_value(rep));
    std::printf("%-8s %10s %10s %10s %10s %10s\n", "estimand", "lo_bias", "lo_rmse", "up_bias", "up_rmse", "bracket");
    for (const auto& r : rep.rows)
        std::printf("%-8s %10s %10s %10s %10s %10s\n", std::string(estimand_name(r.estimand)).c_str(),
                    fmt(r.lower.bias).c_str(), fmt(r.lower.rmse).c_str(), fmt(r.upper.bias).c_str(),
                    fmt(r.upper.rmse).c_str(), fmt(r.bracket_frequency).c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Direct and spillover effects under instrument interference in peer groups"};
    app.require_subcommand(1);

    std::string config, data, out;
    std::size_t n_groups = 0, reps = 0, trials = 0;
    std::uint64_t seed = 0;

    auto* sim = app.add_subcommand("simulate", "Draw a dataset from a population spec");
    sim->add_option("--config", config, "Population spec JSON")->required();
    sim->add_option("--n-groups", n_groups, "Number of groups")->required()->check(CLI::PositiveNumber);
    sim->add_option("--seed", seed, "Random seed")->required();
    sim->add_option("--out", out, "CSV output path")->required();

    auto* orc = app.add_subcommand("oracle", "Exact truths, identities and bound validity for a spec");
    orc->add_option("--config", config, "Population spec JSON")->required();
    orc->add_option("--out", out, "Report JSON path")->required();

    BoundsArgs ba;
    auto* bnd = app.add_subcommand("bounds", "Plug-in bounds from a dataset");
    bnd->add_option("--data", ba.data, "Dataset CSV")->required();
    auto* f_pairs = bnd->add_flag("--pairs", ba.pairs, "One-peer formulas (requires groups of two)");
    bnd->add_flag("--multi", ba.multi, "Any-group-size formulas")->excludes(f_pairs);
    bnd->add_flag("--osnc", ba.osnc, "Assume one-sided noncompliance (screened against the data)");
    bnd->add_option("--fallback", ba.fallback, "refuse | support_bounds | alt_pairs_then_support");
    bnd->add_option("--y-min", ba.y_min, "Outcome support lower end (default: observed minimum)");
    bnd->add_option("--y-max", ba.y_max, "Outcome support upper end (default: observed maximum)");
    bnd->add_option("--bootstrap", ba.bootstrap, "Group bootstrap replicates (0 = none)");
    bnd->add_option("--seed", ba.seed, "Bootstrap seed");
    bnd->add_option("--out", ba.out, "Results JSON path")->required();

    double level = 0.01;
    auto* dia = app.add_subcommand("diagnose", "Falsification tests and compliance shares");
    dia->add_option("--data", data, "Dataset CSV")->required();
    dia->add_option("--level", level, "Test level")->check(CLI::Range(1e-12, 0.5));
    dia->add_option("--out", out, "Report JSON path")->required();

    SearchOptions so;
    std::string family;
    auto* sea = app.add_subcommand("search", "Randomized falsification search over valid specs");
    sea->add_option("--trials", trials, "Number of random specs")->required();
    sea->add_option("--seed", seed, "Random seed")->required();
    sea->add_option("--m", so.m, "Peers per member")->check(CLI::Range(1, kMaxEnumeratedGroup - 1));
    sea->add_option("--family", family, "pairs | osnc | two_sided (default: pairs for m=1, osnc otherwise)");
    sea->add_option("--out", out, "Report JSON path")->required();

    MonteCarloOptions mo;
    std::string mc_fallback = "support_bounds";
    auto* mc = app.add_subcommand("montecarlo", "Repeated simulate-then-estimate cycles");
    mc->add_option("--config", config, "Population spec JSON")->required();
    mc->add_option("--n-groups", n_groups, "Groups per replicate")->required()->check(CLI::PositiveNumber);
    mc->add_option("--reps", reps, "Replicates")->required()->check(CLI::PositiveNumber);
    mc->add_option("--seed", seed, "Random seed")->required();
    mc->add_option("--fallback", mc_fallback, "refuse | support_bounds | alt_pairs_then_support");
    mc->add_option("--out", out, "Report JSON path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInput;
    }

    try {
        if (*sim) return cmd_simulate(config, n_groups, seed, out);
        if (*orc) return cmd_oracle(config, out);
        if (*bnd) return cmd_bounds(ba);
        if (*dia) return cmd_diagnose(data, out, level);
        if (*sea) {
            if (trials < 1) return input_error("--trials must be at least 1");
            so.trials = trials;
            so.seed = seed;
            if (family.empty()) {
                so.family = so.m == 1 ? SpecFamily::pairs : SpecFamily::osnc;
            } else {
                const auto f = parse_family(family);
                if (!f) return input_error("unknown family '" + family + "'");
                so.family = *f;
            }
            return cmd_search(so, out);
        }
        if (*mc) {
            const auto p = parse_policy(mc_fallback);
            if (!p) return input_error("unknown fallback policy '" + mc_fallback + "'");
            mo.n_groups = n_groups;
            mo.reps = reps;
            mo.seed = seed;
            mo.fallback_policy = *p;
            return cmd_montecarlo(config, mo, out);
        }
    } catch (const InvalidSpec& e) {
        return input_error(e.what(), {{"violations", e.violations}});
    } catch (const InputError& e) {
        return input_error(e.what());
    } catch (const std::length_error& e) {
        return input_error(e.what());
    }
    return kInput;
}
