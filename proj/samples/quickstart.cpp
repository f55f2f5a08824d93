// Simulates a pairs population, then compares the sample bounds with the
// population bounds and the true effects.
#include <iostream>

#include <spillover_iv.hpp>

int main() {
    using namespace spiv;
    const PopulationSpec spec = fixtures::p1();
    const auto truth = true_estimands(spec);
    const auto pop = population_moments(spec);

    BoundOptions bo;
    bo.mode = mode_for(spec.m);

    const Dataset data = draw_dataset({50000, 7, spec});
    PluginOptions po;
    po.support = spec.support;
    const auto est = plugin_bounds(data, po);

    std::cout << "estimand  truth     population            sample\n";
    for (std::size_t i = 0; i < kEffectEstimands.size(); ++i) {
        const Estimand e = kEffectEstimands[i];
        const auto p = compute_bound(e, pop, spec.support, bo);
        const auto& s = est.intervals[i];
        std::cout << estimand_name(e) << "\t" << truth.at(e).value << "\t[" << p.lower << ", " << p.upper << "]\t["
                  << s.lower << ", " << s.upper << "]\n";
    }
    std::cout << "iv estimand " << est.intervals.back().lower << "\n";

    const auto sutva = sutva_test(data);
    std::cout << "no-interference test p = " << sutva.p_value << (sutva.reject ? " (rejected)" : "") << "\n";
}
