#ifndef SPILLOVER_IV_TEST_SUPPORT_HPP
#define SPILLOVER_IV_TEST_SUPPORT_HPP

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <spillover_iv.hpp>

namespace test {

inline std::string fixture_path(const std::string& name) { return std::string(SPIV_FIXTURE_DIR) + "/" + name; }

inline spiv::PopulationSpec load_fixture(const std::string& name) { return spiv::load_spec(fixture_path(name)); }

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Exit status of a shell command.
inline int run(const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    if (rc == -1) return -1;
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

/// Pairs spec over the given profiles with a linear outcome table for every type.
inline spiv::PopulationSpec pair_spec(std::initializer_list<std::pair<const char*, double>> dist, double slope = 0.3) {
    using CT = spiv::ComplianceType;
    spiv::PopulationSpec s;
    s.m = 1;
    s.p_z = 0.5;
    s.support = {-1.0, 4.0};
    for (const auto& [letters, prob] : dist) s.profiles.push_back({spiv::fixtures::profile(letters), prob});
    s.mu = spiv::fixtures::linear_mu(1, slope,
                                     {{CT::AlwaysTaker, 1.0}, {CT::SocialComplier, 0.8}, {CT::Complier, 0.6},
                                      {CT::PeerComplier, 0.55}, {CT::GroupComplier, 0.5}, {CT::NeverTaker, 0.2}});
    return s;
}

}  // namespace test

#endif
