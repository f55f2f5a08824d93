#ifndef SPILLOVER_IV_ESTIMAND_HPP
#define SPILLOVER_IV_ESTIMAND_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace spiv {

enum class Estimand : std::uint8_t { tauD0, tauD1, tauS0, tauS1, late };

inline constexpr std::array<Estimand, 4> kEffectEstimands = {Estimand::tauD0, Estimand::tauD1, Estimand::tauS0,
                                                             Estimand::tauS1};

constexpr std::string_view estimand_name(Estimand e) noexcept {
    switch (e) {
        case Estimand::tauD0: return "tauD0";
        case Estimand::tauD1: return "tauD1";
        case Estimand::tauS0: return "tauS0";
        case Estimand::tauS1: return "tauS1";
        case Estimand::late: return "late";
    }
    return "?";
}

inline std::optional<Estimand> parse_estimand(std::string_view s) noexcept {
    for (auto e : {Estimand::tauD0, Estimand::tauD1, Estimand::tauS0, Estimand::tauS1, Estimand::late})
        if (estimand_name(e) == s) return e;
    return std::nullopt;
}

/// Pairs formulas are for one peer; multi formulas for any group size.
enum class BoundMode : std::uint8_t { pairs, multi };

constexpr std::string_view mode_name(BoundMode m) noexcept { return m == BoundMode::pairs ? "pairs" : "multi"; }

enum class Side : std::uint8_t { lower, upper };

constexpr std::string_view side_name(Side s) noexcept { return s == Side::lower ? "lower" : "upper"; }

}  // namespace spiv

#endif  // SPILLOVER_IV_ESTIMAND_HPP
