#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "support.hpp"

using namespace spiv;
using namespace spiv::cells;
using Catch::Approx;

namespace {

std::string message_of(const std::string& csv) {
    try {
        read_csv_text(csv);
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

BoundOptions population_options(const PopulationSpec& spec) {
    BoundOptions bo;
    bo.mode = mode_for(spec.m);
    bo.osnc = check_osnc(spec).pass;
    return bo;
}

}  // namespace

TEST_CASE("CSV round trip", "[estimate]") {
    const auto data = draw_dataset({500, 4, fixtures::p2()});
    std::ostringstream out;
    write_csv(data, out);
    const auto back = read_csv_text(out.str());
    CHECK(back.m == data.m);
    CHECK(back.rows == data.rows);
}

TEST_CASE("CSV errors name the row", "[estimate]") {
    const std::string header = "group_id,unit_id,z,d,y\n";
    CHECK(message_of(header + "0,0,1,1,1.0\n0,1,0,0,0.5\n0,2,0,0,0.5\n1,0,1,1,2\n1,1,1,1,2\n")
              .find("inconsistent group size") != std::string::npos);
    CHECK(message_of(header + "0,0,1,1,1.0\n0,1,2,0,0.5\n") == "row 3: z must be 0 or 1, got '2'");
    CHECK(message_of(header + "0,0,1,1,abc\n0,1,0,0,0.5\n").rfind("row 2: y is not a finite number", 0) == 0);
    CHECK(message_of(header + "0,0,1,1,1\n0,0,0,0,0.5\n").find("duplicate unit_id") != std::string::npos);
    CHECK(message_of(header + "0,0,1,3,1\n0,1,0,0,0.5\n").rfind("row 2: d must be 0 or 1", 0) == 0);
    CHECK(message_of("a,b,c\n").find("expected header") != std::string::npos);
    CHECK(message_of(header).find("no data rows") != std::string::npos);
}

TEST_CASE("groups keep first-appearance order", "[estimate]") {
    const auto d = read_csv_text("group_id,unit_id,z,d,y\n7,0,1,1,1\n3,0,0,0,0\n7,1,0,0,2\n3,1,1,1,3\n");
    REQUIRE(d.n_groups() == 2);
    CHECK(d.group(0)[0].group_id == 7);
    CHECK(d.group(0)[1].y == 2.0);
    CHECK(d.group(1)[1].y == 3.0);
}

TEST_CASE("empty cells are flagged", "[estimate]") {
    auto data = draw_dataset({200, 1, fixtures::p1()});
    for (auto& r : data.rows) r.z = 1;
    const auto ms = sample_moments(data);
    CHECK(ms.at(c11).populated);
    CHECK_FALSE(ms.at(c00).populated);
    CHECK_FALSE(ms.at(c01).populated);
    CHECK_FALSE(ms.at(c10).populated);
    const auto pe = plugin_bounds(data, {});
    for (const auto& iv : pe.intervals) CHECK_FALSE(iv.exists);
}

TEST_CASE("members with mixed peer instruments join no cell", "[estimate]") {
    const auto d = read_csv_text("group_id,unit_id,z,d,y\n0,0,1,1,1\n0,1,1,1,1\n0,2,0,0,0\n");
    const auto ms = sample_moments(d);
    CHECK(ms.at(c01).units == 1.0);
    CHECK(ms.at(c11).units == 0.0);
    CHECK(ms.at(c10).units == 0.0);
    CHECK(ms.at(c00).units == 0.0);
    CHECK(ms.expect(q::peers_all, c01) == 1.0);
}

TEST_CASE("weighted population dataset reproduces the population bounds", "[estimate]") {
    for (const auto& spec : {fixtures::p0(), fixtures::p1(), fixtures::p2()}) {
        PluginOptions po;
        po.osnc = check_osnc(spec).pass;
        po.support = spec.support;
        po.denominator_tolerance = kPopulationTolerance;
        const auto pe = plugin_bounds(population_as_weighted_dataset(spec), po);
        const auto pop = population_moments(spec);
        for (std::size_t i = 0; i < kEffectEstimands.size(); ++i) {
            const auto want = compute_bound(kEffectEstimands[i], pop, spec.support, population_options(spec));
            CHECK(pe.intervals[i].exists == want.exists);
            if (!want.exists) continue;
            CHECK(pe.intervals[i].lower == Approx(want.lower).margin(1e-10));
            CHECK(pe.intervals[i].upper == Approx(want.upper).margin(1e-10));
        }
    }
}

TEST_CASE("plug-in bounds approach the population bounds", "[estimate]") {
    const auto spec = fixtures::p1();
    const auto data = draw_dataset({200000, 7, spec});
    PluginOptions po;
    po.support = spec.support;
    const auto pe = plugin_bounds(data, po);
    const auto pop = population_moments(spec);
    for (std::size_t i = 0; i < kEffectEstimands.size(); ++i) {
        const auto want = compute_bound(kEffectEstimands[i], pop, spec.support, population_options(spec));
        INFO(estimand_name(kEffectEstimands[i]));
        REQUIRE(pe.intervals[i].exists);
        CHECK(std::abs(pe.intervals[i].lower - want.lower) <= 0.02);
        CHECK(std::abs(pe.intervals[i].upper - want.upper) <= 0.02);
    }
}

TEST_CASE("mode and one-sided noncompliance gating", "[estimate]") {
    const auto p2 = draw_dataset({5000, 8, fixtures::p2()});
    const auto plain = plugin_bounds(p2, {});
    CHECK(plain.intervals[3].refused);
    CHECK(plain.intervals[2].refused);
    PluginOptions with;
    with.osnc = true;
    const auto gated = plugin_bounds(p2, with);
    CHECK(gated.osnc_screen_pass);
    CHECK(gated.osnc_screen == 0.0);
    CHECK(gated.intervals[2].point_identified);

    // Two-sided triples fail the screen; the flag is then ignored and noted.
    RandomSpecOptions ro;
    ro.family = SpecFamily::two_sided;
    ro.m = 2;
    PopulationSpec two_sided;
    for (std::uint64_t i = 0;; ++i) {
        two_sided = random_spec(ro, 3, i);
        if (population_moments(two_sided).expect(q::own_treated, c01) > 0.2) break;
    }
    const auto fails = plugin_bounds(draw_dataset({5000, 8, two_sided}), with);
    CHECK_FALSE(fails.osnc_screen_pass);
    CHECK(fails.intervals[2].refused);
    CHECK(fails.intervals[2].note.find("screen failed") != std::string::npos);

    PluginOptions wrong;
    wrong.mode = BoundMode::pairs;
    CHECK_THROWS_AS(plugin_bounds(p2, wrong), InputError);
}

TEST_CASE("spillover point estimate within three bootstrap standard errors", "[estimate]") {
    const auto spec = fixtures::p2();
    const auto data = draw_dataset({50000, 12, spec});
    PluginOptions po;
    po.osnc = true;
    const auto pe = plugin_bounds(data, po);
    const auto boot = bootstrap(data, po, 200, 77);
    const double truth = true_estimands(spec).tauS0.value;
    REQUIRE(boot[2].estimand == Estimand::tauS0);
    REQUIRE(boot[2].lower_se > 0.0);
    CHECK(std::abs(pe.intervals[2].lower - truth) <= 3 * boot[2].lower_se);
}

TEST_CASE("bootstrap bands", "[estimate]") {
    const auto spec = fixtures::p1();
    const auto data = draw_dataset({20000, 21, spec});
    PluginOptions po;
    po.support = spec.support;

    const auto two = bootstrap(data, po, 2, 1);
    for (const auto& b : two) {
        CHECK(b.replicates == 2);
        CHECK(std::isfinite(b.lower_ci.lo));
        CHECK(b.lower_ci.lo <= b.lower_ci.hi);
    }
    CHECK_THROWS_AS(bootstrap(data, po, 1, 1), InputError);

    const auto a = bootstrap(data, po, 500, 9);
    const auto b = bootstrap(data, po, 500, 9);
    CHECK(estimate_json(plugin_bounds(data, po), &a).dump() == estimate_json(plugin_bounds(data, po), &b).dump());

    const auto pop = population_moments(spec);
    for (const auto& s : a) {
        const auto want = compute_bound(s.estimand, pop, spec.support, population_options(spec));
        INFO(estimand_name(s.estimand) << " lower band [" << s.lower_ci.lo << ", " << s.lower_ci.hi << "] upper band ["
                                       << s.upper_ci.lo << ", " << s.upper_ci.hi << "] population [" << want.lower
                                       << ", " << want.upper << "]");
        CHECK(s.fail_rate == 0.0);
        CHECK(s.lower_ci.lo <= want.lower);
        CHECK(want.lower <= s.lower_ci.hi);
        CHECK(s.upper_ci.lo <= want.upper);
        CHECK(want.upper <= s.upper_ci.hi);
    }
}

TEST_CASE("results JSON layout", "[estimate]") {
    const auto data = draw_dataset({2000, 2, fixtures::p1()});
    const auto pe = plugin_bounds(data, {});
    const auto boot = bootstrap(data, {}, 20, 3);
    const auto j = estimate_json(pe, &boot);
    REQUIRE(j.at("results").size() == 5);
    for (const auto& r : j.at("results")) {
        for (const char* key : {"estimand", "lower", "upper", "exists", "fallbacks", "n_cells", "bootstrap"})
            CHECK(r.contains(key));
        for (const char* key : {"lower_ci", "upper_ci", "fail_rate"}) CHECK(r.at("bootstrap").contains(key));
    }
    CHECK(j.at("y_support").at(0) == Approx(observed_support(data).lo));
    CHECK(nlohmann::json::parse(j.dump()) == j);
}

TEST_CASE("quantiles and spread", "[estimate]") {
    const std::vector<double> v{1, 2, 3, 4};
    CHECK(quantile_sorted(v, 0.0) == 1.0);
    CHECK(quantile_sorted(v, 1.0) == 4.0);
    CHECK(quantile_sorted(v, 0.5) == 2.5);
    CHECK(quantile_sorted(v, 0.025) == Approx(1.075));
    CHECK(std_dev(v) == Approx(std::sqrt(5.0 / 3.0)));
    CHECK(std::isnan(quantile_sorted({}, 0.5)));
}
