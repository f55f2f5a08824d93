#ifndef SPILLOVER_IV_COMPLIANCE_HPP
#define SPILLOVER_IV_COMPLIANCE_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spiv {

/// Potential-treatment response of a unit to its own and its peers' assignment.
///
/// With one peer the six labels enumerate every map (z_own, z_peer) -> D that is
/// monotone in both arguments. With several peers, social and peer compliers react
/// to *any* assigned peer and group compliers need *all* peers assigned
/// (see kPeerAggregator).
enum class ComplianceType : std::uint8_t {
    AlwaysTaker,
    SocialComplier,
    Complier,
    PeerComplier,
    GroupComplier,
    NeverTaker,
};

inline constexpr std::array<ComplianceType, 6> kAllTypes = {
    ComplianceType::AlwaysTaker,  ComplianceType::SocialComplier, ComplianceType::Complier,
    ComplianceType::PeerComplier, ComplianceType::GroupComplier,  ComplianceType::NeverTaker,
};

/// How multi-peer assignments reach S/P/G types. S and P use any(z_peers), G uses all(z_peers).
/// Other admissible aggregators exist; this one keeps both monotonicity conditions by construction.
inline constexpr std::string_view kPeerAggregator = "S,P: any(z_peers); G: all(z_peers)";

constexpr std::size_t index_of(ComplianceType t) noexcept { return static_cast<std::size_t>(t); }

constexpr char type_letter(ComplianceType t) noexcept {
    constexpr std::array<char, 6> letters = {'A', 'S', 'C', 'P', 'G', 'N'};
    return letters[index_of(t)];
}

constexpr std::string_view type_name(ComplianceType t) noexcept {
    constexpr std::array<std::string_view, 6> names = {
        "AlwaysTaker", "SocialComplier", "Complier", "PeerComplier", "GroupComplier", "NeverTaker"};
    return names[index_of(t)];
}

inline std::optional<ComplianceType> parse_type_letter(std::string_view s) noexcept {
    if (s.size() != 1) return std::nullopt;
    for (auto t : kAllTypes)
        if (type_letter(t) == s[0]) return t;
    return std::nullopt;
}

/// D(z_own, z_peers). z_peers must be non-empty.
inline int potential_treatment(ComplianceType type, int z_own, std::span<const int> z_peers) {
    if (z_peers.empty()) throw std::invalid_argument("potential_treatment: peer assignment list is empty");
    const bool any_peer = std::any_of(z_peers.begin(), z_peers.end(), [](int z) { return z != 0; });
    const bool all_peers = std::all_of(z_peers.begin(), z_peers.end(), [](int z) { return z != 0; });
    const bool own = z_own != 0;
    switch (type) {
        case ComplianceType::AlwaysTaker: return 1;
        case ComplianceType::SocialComplier: return (own || any_peer) ? 1 : 0;
        case ComplianceType::Complier: return own ? 1 : 0;
        case ComplianceType::PeerComplier: return any_peer ? 1 : 0;
        case ComplianceType::GroupComplier: return (own && all_peers) ? 1 : 0;
        case ComplianceType::NeverTaker: return 0;
    }
    return 0;
}

/// Checked overload: the peer list must have exactly m entries.
inline int potential_treatment(ComplianceType type, int z_own, std::span<const int> z_peers, int m) {
    if (m < 1 || static_cast<int>(z_peers.size()) != m)
        throw std::invalid_argument("potential_treatment: expected " + std::to_string(m) +
                                    " peer assignments, got " + std::to_string(z_peers.size()));
    return potential_treatment(type, z_own, z_peers);
}

/// Members of a fully connected peer group. Every member's peers are the other members.
struct GroupProfile {
    std::vector<ComplianceType> types;

    [[nodiscard]] int size() const noexcept { return static_cast<int>(types.size()); }
    [[nodiscard]] int peer_count() const noexcept { return size() - 1; }
    [[nodiscard]] bool contains(ComplianceType t) const noexcept {
        return std::find(types.begin(), types.end(), t) != types.end();
    }
    [[nodiscard]] std::string letters() const {
        std::string s;
        for (auto t : types) s.push_back(type_letter(t));
        return s;
    }
    friend bool operator==(const GroupProfile&, const GroupProfile&) = default;
};

/// Treatment of every member at the group assignment z.
inline std::vector<int> group_treatments(const GroupProfile& profile, std::span<const int> z) {
    const int g = profile.size();
    if (g < 2) throw std::invalid_argument("group_treatments: a group needs at least two members");
    if (static_cast<int>(z.size()) != g)
        throw std::invalid_argument("group_treatments: assignment length " + std::to_string(z.size()) +
                                    " does not match group size " + std::to_string(g));
    std::vector<int> d(g);
    std::vector<int> peers(g - 1);
    for (int i = 0; i < g; ++i) {
        int p = 0;
        for (int j = 0; j < g; ++j)
            if (j != i) peers[p++] = z[j];
        d[i] = potential_treatment(profile.types[i], z[i], peers);
    }
    return d;
}

/// Assignment with member `focus` at `z_own` and every other member at `z_peers`.
inline std::vector<int> focal_assignment(int group_size, int focus, int z_own, int z_peers) {
    std::vector<int> z(group_size, z_peers);
    z[focus] = z_own;
    return z;
}

}  // namespace spiv

#endif  // SPILLOVER_IV_COMPLIANCE_HPP
