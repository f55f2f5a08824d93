#include <catch_amalgamated.hpp>

#include <cmath>

#include "support.hpp"

using namespace spiv;
using namespace spiv::cells;
using Catch::Approx;

namespace {

double share(const ShareReport& r, const std::string& name) {
    for (const auto& s : r.shares)
        if (s.condition == name) return s.value;
    FAIL("missing share " << name);
    return 0.0;
}

bool has_share(const ShareReport& r, const std::string& name) {
    for (const auto& s : r.shares)
        if (s.condition == name) return true;
    return false;
}

/// An always-taker paired with a social complier among never-takers, skipping validation.
/// The social complier's untreated-with-treated-peer indicator falls from 1 to 0 when its
/// peer is assigned, the wrong sign for a peer flip.
PopulationSpec with_excluded_pair() {
    auto spec = fixtures::p1();
    spec.profiles = {{fixtures::profile("AS"), 0.1}, {fixtures::profile("SA"), 0.1}, {fixtures::profile("NN"), 0.8}};
    spec.mu.set(ComplianceType::SocialComplier, {0.8, 1.1}, {1.8, 2.1});
    return spec;
}

}  // namespace

TEST_CASE("normal helpers", "[diagnostics]") {
    CHECK(normal_sf(0.0) == Approx(0.5));
    CHECK(normal_sf(1.959963984540054) == Approx(0.025).epsilon(1e-9));
    CHECK(normal_upper_quantile(0.025) == Approx(1.959963984540054).epsilon(1e-9));
    CHECK(normal_upper_quantile(0.01 / 8) == Approx(3.023341).epsilon(1e-6));
}

TEST_CASE("no-interference conditions on population moments", "[diagnostics]") {
    const auto p0 = sutva_test(population_moments(fixtures::p0()));
    CHECK_FALSE(p0.reject);
    for (const auto& c : p0.conditions) CHECK(c.value == 0.0);

    // Group compliers respond to peer assignment when assigned themselves: 0.05 of members.
    const auto p1 = sutva_test(population_moments(fixtures::p1()));
    CHECK(p1.reject);
    CHECK(p1.conditions[0].value == Approx(0.0).margin(1e-12));
    CHECK(p1.conditions[1].value == Approx(0.05).margin(1e-12));

    // Any population of always-takers, compliers and never-takers with peer-free outcomes.
    RandomSpecOptions ro;
    for (std::size_t i = 0; i < 200; ++i) {
        auto spec = random_spec(ro, 61, i);
        bool sutva = true;
        for (const auto& wp : spec.profiles)
            for (auto t : wp.profile.types)
                sutva = sutva && (t == ComplianceType::AlwaysTaker || t == ComplianceType::Complier ||
                                  t == ComplianceType::NeverTaker);
        if (!sutva) continue;
        const auto r = sutva_test(population_moments(spec));
        for (const auto& c : r.conditions) CHECK(c.value == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("no-interference test on samples", "[diagnostics]") {
    const auto p1 = sutva_test(draw_dataset({200000, 7, fixtures::p1()}), 0.01);
    CHECK(p1.reject);
    CHECK(p1.method == "wald_chi2_2");
    CHECK(p1.p_value < 0.01);

    const auto p0 = sutva_test(draw_dataset({200000, 7, fixtures::p0()}), 0.01);
    CHECK_FALSE(p0.reject);
    CHECK(p0.p_value >= 0.01);
}

TEST_CASE("singular covariance falls back to separate tests", "[diagnostics]") {
    // Nobody responds to peers and nobody's treatment varies within a cell: both deltas are exactly 0.
    auto spec = test::pair_spec({{"CC", 1.0}});
    const auto r = sutva_test(draw_dataset({2000, 3, spec}), 0.01);
    CHECK(r.method == "bonferroni");
    CHECK_FALSE(r.reject);
}

TEST_CASE("irrelevance sign conditions", "[diagnostics]") {
    const auto p1 = irrelevance_test(population_moments(fixtures::p1()));
    CHECK_FALSE(p1.reject);
    CHECK(p1.conditions.size() == 8);
    bool found = false;
    for (const auto& c : p1.conditions)
        if (c.condition == "peer_flip_own_unassigned.treated_with_no_peer_treated") {
            CHECK(c.value == Approx(-0.1).margin(1e-12));
            found = true;
        }
    CHECK(found);

    for (const auto& spec : {fixtures::p0(), fixtures::p2()}) CHECK_FALSE(irrelevance_test(population_moments(spec)).reject);

    const auto broken = irrelevance_test(population_moments(with_excluded_pair()));
    CHECK(broken.reject);
    for (const auto& c : broken.conditions)
        if (c.condition == "peer_flip_own_unassigned.untreated_with_all_peers_treated") {
            CHECK(c.value == Approx(-0.1).margin(1e-12));
            CHECK_FALSE(c.pass);
        }
}

TEST_CASE("irrelevance sign conditions hold on every admissible population", "[diagnostics]") {
    for (auto [family, m] : {std::pair{SpecFamily::pairs, 1}, std::pair{SpecFamily::two_sided, 2},
                             std::pair{SpecFamily::osnc, 3}}) {
        RandomSpecOptions ro;
        ro.family = family;
        ro.m = m;
        for (std::size_t i = 0; i < 150; ++i) CHECK_FALSE(irrelevance_test(population_moments(random_spec(ro, 67, i))).reject);
    }
}

TEST_CASE("irrelevance test on samples", "[diagnostics]") {
    CHECK_FALSE(irrelevance_test(draw_dataset({100000, 5, fixtures::p1()}), 0.01).reject);
    const auto broken = irrelevance_test(draw_dataset({100000, 5, with_excluded_pair()}), 0.01);
    CHECK(broken.reject);
}

TEST_CASE("compliance shares", "[diagnostics]") {
    const auto p1 = type_shares(population_moments(fixtures::p1()));
    CHECK(share(p1, "nobody_treated_at_full_assignment") == Approx(0.2).margin(1e-12));
    CHECK(share(p1, "taker_with_peers_induced_from_none") == Approx(0.1).margin(1e-12));
    CHECK(share(p1, "everybody_treated_at_no_assignment") == Approx(0.1).margin(1e-12));

    const auto p2 = type_shares(population_moments(fixtures::p2()));
    CHECK(p2.osnc_screen_pass);
    CHECK(share(p2, "treated_when_unassigned") == 0.0);
    CHECK(has_share(p2, "treated_with_peers_induced_at_own_one"));
    CHECK_FALSE(type_shares(population_moments(fixtures::p1())).osnc_screen_pass);

    auto never = fixtures::p1();
    never.profiles = {{fixtures::profile("NN"), 1.0}};
    for (const auto& s : type_shares(population_moments(never)).shares) {
        INFO(s.condition);
        CHECK(s.value == Approx(s.condition == "nobody_treated_at_full_assignment" ? 1.0 : 0.0).margin(1e-12));
    }
}

TEST_CASE("shares equal enumerated probabilities", "[diagnostics]") {
    for (auto [family, m] : {std::pair{SpecFamily::pairs, 1}, std::pair{SpecFamily::osnc, 2}}) {
        RandomSpecOptions ro;
        ro.family = family;
        ro.m = m;
        for (std::size_t i = 0; i < 100; ++i) {
            const auto spec = random_spec(ro, 71, i);
            const auto truth = true_estimands(spec);
            const auto got = type_shares(population_moments(spec));
            REQUIRE(got.shares.size() == truth.type_shares.size());
            for (std::size_t k = 0; k < got.shares.size(); ++k) {
                CHECK(got.shares[k].condition == truth.type_shares[k].name);
                CHECK(std::abs(got.shares[k].value - truth.type_shares[k].value) <= 1e-12);
            }
        }
    }
}

TEST_CASE("sample shares carry clustered standard errors", "[diagnostics]") {
    const auto spec = fixtures::p1();
    const auto r = type_shares(draw_dataset({100000, 13, spec}));
    const auto truth = true_estimands(spec);
    for (const auto& s : r.shares) {
        INFO(s.condition);
        REQUIRE(std::isfinite(s.stderr_));
        double want = 0.0;
        for (const auto& t : truth.type_shares)
            if (t.name == s.condition) want = t.value;
        CHECK(std::abs(s.value - want) <= 4 * s.stderr_ + 1e-12);
    }
}

TEST_CASE("diagnostics need every cell", "[diagnostics]") {
    auto data = draw_dataset({100, 1, fixtures::p1()});
    for (auto& r : data.rows) r.z = 1;
    CHECK_THROWS_AS(sutva_test(data), InputError);
    CHECK_THROWS_AS(irrelevance_test(data), InputError);
    CHECK_THROWS_AS(type_shares(data), InputError);
}

TEST_CASE("reports serialize", "[diagnostics]") {
    const auto j = to_json_value(sutva_test(draw_dataset({5000, 1, fixtures::p1()})));
    CHECK(j.at("method").get<std::string>().find("normal approximation") != std::string::npos);
    for (const auto& c : j.at("conditions"))
        for (const char* key : {"condition", "value", "stderr", "pass"}) CHECK(c.contains(key));
    CHECK(nlohmann::json::parse(j.dump()) == j);
}
