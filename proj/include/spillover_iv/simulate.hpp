#ifndef SPILLOVER_IV_SIMULATE_HPP
#define SPILLOVER_IV_SIMULATE_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "compliance.hpp"
#include "dataset.hpp"
#include "parallel.hpp"
#include "population.hpp"
#include "rng.hpp"

namespace spiv {

struct SimulationConfig {
    std::size_t n_groups = 1;
    std::uint64_t seed = 0;
    PopulationSpec spec;
};

/// Profile drawn for group g; a pure function of (seed, g).
inline std::size_t draw_profile_index(const PopulationSpec& spec, std::uint64_t seed, std::size_t g) {
    CounterRng rng(seed, g, 0, StreamTag::profile);
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < spec.profiles.size(); ++i) {
        if (spec.profiles[i].prob <= 0.0) continue;
        last = i;
        cum += spec.profiles[i].prob;
        if (u < cum) return i;
    }
    return last;  // rounding slack at the top of the cumulative sum
}

inline std::vector<std::size_t> drawn_profiles(const SimulationConfig& cfg) {
    std::vector<std::size_t> out(cfg.n_groups);
    for (std::size_t g = 0; g < cfg.n_groups; ++g) out[g] = draw_profile_index(cfg.spec, cfg.seed, g);
    return out;
}

/// Writes group g's m+1 rows into out.
inline void draw_group(const PopulationSpec& spec, std::uint64_t seed, std::size_t g, Row* out) {
    const auto& profile = spec.profiles[draw_profile_index(spec, seed, g)].profile;
    const int size = profile.size();
    std::vector<int> z(size);
    for (int i = 0; i < size; ++i) {
        CounterRng rng(seed, g, static_cast<std::uint64_t>(i), StreamTag::instrument);
        z[i] = rng.bernoulli(spec.p_z) ? 1 : 0;
    }
    const auto d = group_treatments(profile, z);
    int treated = 0;
    for (int v : d) treated += v;
    for (int i = 0; i < size; ++i) {
        double y = spec.mu(profile.types[i], d[i], treated - d[i]);
        if (spec.noise_sd > 0.0) {
            CounterRng rng(seed, g, static_cast<std::uint64_t>(i), StreamTag::noise);
            y = std::clamp(y + spec.noise_sd * rng.normal(), spec.support.lo, spec.support.hi);
        }
        out[i] = Row{static_cast<std::int64_t>(g), i, z[i], d[i], y};
    }
}

/// Same seed gives the same dataset regardless of worker count.
inline Dataset draw_dataset(const SimulationConfig& cfg) {
    if (cfg.n_groups < 1) throw InputError("n_groups must be at least 1");
    const auto rep = validate_spec(cfg.spec);
    if (!rep.ok()) throw InputError("invalid population spec: " + rep.violations.front());
    Dataset data;
    data.m = cfg.spec.m;
    data.rows.resize(cfg.n_groups * static_cast<std::size_t>(cfg.spec.group_size()));
    const Blocks blocks{cfg.n_groups, 2048};
    parallel_for(blocks.count(), [&](std::size_t b) {
        for (std::size_t g = blocks.begin(b); g < blocks.end(b); ++g)
            draw_group(cfg.spec, cfg.seed, g, data.rows.data() + g * cfg.spec.group_size());
    });
    data.sidecar = Sidecar{cfg.seed, spec_digest(cfg.spec)};
    return data;
}

}  // namespace spiv

#endif  // SPILLOVER_IV_SIMULATE_HPP
