#ifndef SPILLOVER_IV_DIAGNOSTICS_HPP
#define SPILLOVER_IV_DIAGNOSTICS_HPP

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "bounds.hpp"
#include "dataset.hpp"
#include "estimate.hpp"
#include "moments.hpp"
#include "oracle.hpp"

namespace spiv {

// ---------------------------------------------------------------------------
// Normal distribution helpers

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

/// Upper-tail quantile: returns z with normal_sf(z) = p.
inline double normal_upper_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_upper_quantile: p outside (0,1)");
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_sf(mid) > p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Clustered standard errors for linear functionals of cell means

using MomentFunctional = std::function<double(const MomentSet&)>;

/// Partial derivatives with respect to each cell mean; slots 0-8 indicators, 9-17 outcomes.
using MomentGradient = std::array<std::array<double, 18>, 4>;

/// Exact for functionals that are linear in the cell means, which every
/// condition and share here is.
inline MomentGradient gradient(const MomentFunctional& f, const MomentSet& ms) {
    MomentGradient g{};
    const double base = f(ms);
    for (int c = 0; c < 4; ++c)
        for (int s = 0; s < 18; ++s) {
            MomentSet bumped = ms;
            auto& cell = bumped.cells[c];
            (s < 9 ? cell.indicator[s] : cell.outcome[s - 9]) += 1.0;
            g[c][s] = f(bumped) - base;
        }
    return g;
}

namespace detail {
inline std::array<double, 9> basis_row(int d, bool none, bool all) {
    const std::array<double, 3> own = {1.0, static_cast<double>(d), static_cast<double>(1 - d)};
    const std::array<double, 3> peer = {1.0, none ? 1.0 : 0.0, all ? 1.0 : 0.0};
    std::array<double, 9> v{};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) v[3 * a + b] = own[a] * peer[b];
    return v;
}
}  // namespace detail

/// Group-clustered covariance of several functionals from their influence functions.
inline std::vector<std::vector<double>> clustered_covariance(const std::vector<MomentFunctional>& fs,
                                                            const Dataset& data, const MomentSet& ms) {
    const std::size_t k = fs.size();
    std::vector<MomentGradient> grads;
    for (const auto& f : fs) grads.push_back(gradient(f, ms));
    std::vector<std::vector<double>> cov(k, std::vector<double>(k, 0.0));
    const int size = data.group_size();
    const int m = data.m;
    std::vector<double> psi(k);
    const std::size_t n = data.n_groups();
    for (std::size_t g = 0; g < n; ++g) {
        const Row* rows = data.group(g);
        const double w = data.weight(g);
        int z_sum = 0, d_sum = 0;
        for (int i = 0; i < size; ++i) z_sum += rows[i].z, d_sum += rows[i].d;
        std::fill(psi.begin(), psi.end(), 0.0);
        for (int i = 0; i < size; ++i) {
            const int zp = z_sum - rows[i].z;
            if (zp != 0 && zp != m) continue;
            const Cell c{rows[i].z, zp == m ? 1 : 0};
            const auto& cm = ms.at(c);
            const int kp = d_sum - rows[i].d;
            const auto x = detail::basis_row(rows[i].d, kp == 0, kp == m);
            for (std::size_t j = 0; j < k; ++j) {
                const auto& gr = grads[j][c.index()];
                double v = 0.0;
                for (int s = 0; s < 9; ++s) {
                    v += gr[s] * (x[s] - cm.indicator[s]);
                    v += gr[9 + s] * (x[s] * rows[i].y - cm.outcome[s]);
                }
                psi[j] += w * v / cm.weight;
            }
        }
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) cov[a][b] += psi[a] * psi[b];
    }
    if (n > 1) {
        const double scale = static_cast<double>(n) / static_cast<double>(n - 1);
        for (auto& row : cov)
            for (auto& v : row) v *= scale;
    }
    return cov;
}

// ---------------------------------------------------------------------------
// Reports

struct ConditionResult {
    std::string condition;
    std::string moment;
    double value = 0.0;
    double stderr_ = std::numeric_limits<double>::quiet_NaN();
    double z = std::numeric_limits<double>::quiet_NaN();
    bool pass = true;
};

inline nlohmann::json to_json_value(const ConditionResult& c) {
    return {{"condition", c.condition},
            {"moment", c.moment},
            {"value", c.value},
            {"stderr", json_number(c.stderr_)},
            {"z", json_number(c.z)},
            {"pass", c.pass}};
}

struct SutvaReport {
    bool population = false;
    double level = 0.01;
    std::string method;  // exact, wald_chi2_2, bonferroni
    double statistic = std::numeric_limits<double>::quiet_NaN();
    double p_value = std::numeric_limits<double>::quiet_NaN();
    bool reject = false;
    std::string mapping;
    std::vector<ConditionResult> conditions;
};

struct IrrelevanceReport {
    bool population = false;
    double level = 0.01;
    bool reject = false;
    std::vector<ConditionResult> conditions;
};

struct ShareReport {
    bool osnc_screen_pass = false;
    std::vector<ConditionResult> shares;
};

inline constexpr double kExactTolerance = 1e-12;

namespace detail {
struct SignCondition {
    std::string name;
    std::string moment;
    MomentFunctional f;
    int sign;  // +1: should be >= 0, -1: should be <= 0, 0: should equal 0
};

inline std::vector<SignCondition> sutva_conditions() {
    using namespace cells;
    return {
        {"peer_assignment_moves_own_treatment_when_unassigned", "E[D|01]-E[D|00]",
         [](const MomentSet& ms) { return delta(ms, q::own_treated, c01, c00); }, 0},
        {"peer_assignment_moves_own_treatment_when_assigned", "E[D|11]-E[D|10]",
         [](const MomentSet& ms) { return delta(ms, q::own_treated, c11, c10); }, 0},
    };
}

inline std::vector<SignCondition> irrelevance_conditions() {
    using namespace cells;
    std::vector<SignCondition> out;
    struct Flip {
        const char* name;
        Cell a, b;
        bool own;
    };
    const Flip flips[] = {{"own_flip_peers_unassigned", c10, c00, true},
                          {"own_flip_peers_assigned", c11, c01, true},
                          {"peer_flip_own_unassigned", c01, c00, false},
                          {"peer_flip_own_assigned", c11, c10, false}};
    for (const auto& fl : flips) {
        const Cell a = fl.a, b = fl.b;
        out.push_back({std::string(fl.name) + ".treated_with_no_peer_treated",
                       "E[DNoPeer|" + a.label() + "]-E[DNoPeer|" + b.label() + "]",
                       [a, b](const MomentSet& ms) { return delta(ms, q::treated_peers_none, a, b); },
                       fl.own ? 1 : -1});
        out.push_back({std::string(fl.name) + ".untreated_with_all_peers_treated",
                       "E[(1-D)AllPeers|" + a.label() + "]-E[(1-D)AllPeers|" + b.label() + "]",
                       [a, b](const MomentSet& ms) { return delta(ms, q::untreated_peers_all, a, b); },
                       fl.own ? -1 : 1});
    }
    return out;
}

inline void require_cells(const MomentSet& ms) {
    for (auto c : kAllCells)
        if (!ms.at(c).populated) throw InputError("diagnostics need all four instrument cells; cell " + c.label() + " is empty");
}

inline std::string sutva_mapping(int m) {
    return m == 1 ? "deltas equal the social-plus-peer complier share and the peer-plus-group complier share"
                  : "deltas only; type-share mapping is stated for one peer";
}
}  // namespace detail

/// Exact check on population moments: both deltas must vanish.
inline SutvaReport sutva_test(const MomentSet& ms) {
    detail::require_cells(ms);
    SutvaReport r;
    r.population = true;
    r.method = "exact";
    r.mapping = detail::sutva_mapping(ms.m);
    for (const auto& c : detail::sutva_conditions()) {
        ConditionResult cr{c.name, c.moment, c.f(ms)};
        cr.pass = std::abs(cr.value) <= kExactTolerance;
        r.reject = r.reject || !cr.pass;
        r.conditions.push_back(cr);
    }
    return r;
}

/// Joint Wald test of both deltas at the given level with clustered variance; falls
/// back to Bonferroni-adjusted z tests when the covariance is singular.
inline SutvaReport sutva_test(const Dataset& data, double level = 0.01) {
    const auto ms = sample_moments(data);
    detail::require_cells(ms);
    SutvaReport r;
    r.level = level;
    r.mapping = detail::sutva_mapping(ms.m);
    const auto conds = detail::sutva_conditions();
    std::vector<MomentFunctional> fs;
    for (const auto& c : conds) fs.push_back(c.f);
    const auto cov = clustered_covariance(fs, data, ms);
    std::array<double, 2> v{};
    for (std::size_t i = 0; i < 2; ++i) {
        ConditionResult cr{conds[i].name, conds[i].moment, conds[i].f(ms)};
        v[i] = cr.value;
        cr.stderr_ = std::sqrt(cov[i][i]);
        cr.z = cr.stderr_ > 0.0 ? cr.value / cr.stderr_ : (cr.value == 0.0 ? 0.0 : std::copysign(INFINITY, cr.value));
        r.conditions.push_back(cr);
    }
    const double det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    const double scale = cov[0][0] * cov[1][1];
    if (scale > 0.0 && det > 1e-10 * scale) {
        r.method = "wald_chi2_2";
        r.statistic = (v[0] * v[0] * cov[1][1] - 2.0 * v[0] * v[1] * cov[0][1] + v[1] * v[1] * cov[0][0]) / det;
        r.p_value = std::exp(-0.5 * r.statistic);
        r.reject = r.p_value < level;
        for (auto& cr : r.conditions) cr.pass = !r.reject;
    } else {
        r.method = "bonferroni";
        const double crit = normal_upper_quantile(level / 4.0);
        double pmin = 1.0;
        for (auto& cr : r.conditions) {
            cr.pass = std::abs(cr.z) <= crit;
            pmin = std::min(pmin, 2.0 * normal_sf(std::abs(cr.z)));
            r.reject = r.reject || !cr.pass;
        }
        r.p_value = std::min(1.0, 2.0 * pmin);
    }
    return r;
}

inline IrrelevanceReport irrelevance_test(const MomentSet& ms) {
    detail::require_cells(ms);
    IrrelevanceReport r;
    r.population = true;
    for (const auto& c : detail::irrelevance_conditions()) {
        ConditionResult cr{c.name, c.moment, c.f(ms)};
        cr.pass = c.sign * cr.value >= -kExactTolerance;
        r.reject = r.reject || !cr.pass;
        r.conditions.push_back(cr);
    }
    return r;
}

/// One-sided z tests, Bonferroni over the eight conditions.
inline IrrelevanceReport irrelevance_test(const Dataset& data, double level = 0.01) {
    const auto ms = sample_moments(data);
    detail::require_cells(ms);
    IrrelevanceReport r;
    r.level = level;
    const auto conds = detail::irrelevance_conditions();
    std::vector<MomentFunctional> fs;
    for (const auto& c : conds) fs.push_back(c.f);
    const auto cov = clustered_covariance(fs, data, ms);
    const double crit = normal_upper_quantile(level / static_cast<double>(conds.size()));
    for (std::size_t i = 0; i < conds.size(); ++i) {
        ConditionResult cr{conds[i].name, conds[i].moment, conds[i].f(ms)};
        cr.stderr_ = std::sqrt(cov[i][i]);
        const double signed_value = conds[i].sign * cr.value;
        cr.z = cr.stderr_ > 0.0 ? signed_value / cr.stderr_
                                : (signed_value >= 0.0 ? 0.0 : -INFINITY);
        cr.pass = cr.z >= -crit;
        r.reject = r.reject || !cr.pass;
        r.conditions.push_back(cr);
    }
    return r;
}

namespace detail {
inline ShareReport shares_from(const MomentSet& ms, double tol) {
    require_cells(ms);
    ShareReport r;
    r.osnc_screen_pass = ms.expect(q::own_treated, kCell01) <= tol;
    for (const auto& def : share_catalog()) {
        if (!scope_applies(def.scope, ms.m, r.osnc_screen_pass)) continue;
        ConditionResult cr{def.name, def.moment, def.from_moments(ms)};
        r.shares.push_back(cr);
    }
    return r;
}
}  // namespace detail

/// Compliance shares recoverable from the cell moments, with their identifying moments.
inline ShareReport type_shares(const MomentSet& ms) {
    return detail::shares_from(ms, ms.population ? kExactTolerance : sample_tolerance(ms));
}

inline ShareReport type_shares(const Dataset& data) {
    const auto ms = sample_moments(data);
    auto r = type_shares(ms);
    std::vector<MomentFunctional> fs;
    std::vector<std::size_t> pos;
    for (const auto& def : share_catalog())
        for (std::size_t i = 0; i < r.shares.size(); ++i)
            if (r.shares[i].condition == def.name) {
                fs.push_back(def.from_moments);
                pos.push_back(i);
            }
    const auto cov = clustered_covariance(fs, data, ms);
    for (std::size_t j = 0; j < pos.size(); ++j) r.shares[pos[j]].stderr_ = std::sqrt(cov[j][j]);
    return r;
}

inline nlohmann::json to_json_value(const SutvaReport& r) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& x : r.conditions) c.push_back(to_json_value(x));
    return {{"population", r.population}, {"level", r.level},
            {"method", r.population ? "exact" : r.method + " (normal approximation, group-clustered)"},
            {"statistic", json_number(r.statistic)}, {"p_value", json_number(r.p_value)},
            {"reject", r.reject}, {"mapping", r.mapping}, {"conditions", c}};
}

inline nlohmann::json to_json_value(const IrrelevanceReport& r) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& x : r.conditions) c.push_back(to_json_value(x));
    return {{"population", r.population}, {"level", r.level}, {"reject", r.reject}, {"conditions", c}};
}

inline nlohmann::json to_json_value(const ShareReport& r) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& x : r.shares) c.push_back(to_json_value(x));
    return {{"osnc_screen_pass", r.osnc_screen_pass}, {"shares", c}};
}

}  // namespace spiv

#endif  // SPILLOVER_IV_DIAGNOSTICS_HPP
