#ifndef SPILLOVER_IV_MOMENTS_HPP
#define SPILLOVER_IV_MOMENTS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace spiv {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Instrument cell: own assignment and the common assignment of all peers.
struct Cell {
    int z_own = 0;
    int z_peers = 0;
    [[nodiscard]] constexpr int index() const noexcept { return 2 * z_own + z_peers; }
    [[nodiscard]] std::string label() const { return std::to_string(z_own) + std::to_string(z_peers); }
    friend constexpr bool operator==(Cell, Cell) = default;
};

inline constexpr Cell kCell00{0, 0};
inline constexpr Cell kCell01{0, 1};
inline constexpr Cell kCell10{1, 0};
inline constexpr Cell kCell11{1, 1};
inline constexpr std::array<Cell, 4> kAllCells = {kCell00, kCell01, kCell10, kCell11};

namespace cells {
inline constexpr Cell c00 = kCell00, c01 = kCell01, c10 = kCell10, c11 = kCell11;
}

enum class OwnFactor : std::uint8_t { one, treated, untreated };
enum class PeerFactor : std::uint8_t { any, none_treated, all_treated };

/// One element of the moment basis {1, D, 1-D} x {1, no peer treated, all peers treated},
/// optionally multiplied by the outcome.
struct Quantity {
    OwnFactor own = OwnFactor::one;
    PeerFactor peer = PeerFactor::any;
    bool times_y = false;

    [[nodiscard]] constexpr int slot() const noexcept {
        return 3 * static_cast<int>(own) + static_cast<int>(peer);
    }
    [[nodiscard]] constexpr Quantity with_y() const noexcept { return {own, peer, true}; }
    [[nodiscard]] std::string label() const {
        static constexpr const char* own_names[] = {"", "D", "(1-D)"};
        static constexpr const char* peer_names[] = {"", "NoPeer", "AllPeers"};
        std::string s = times_y ? "Y" : "";
        s += own_names[static_cast<int>(own)];
        s += peer_names[static_cast<int>(peer)];
        return s.empty() ? "1" : s;
    }
};

namespace q {
inline constexpr Quantity one{OwnFactor::one, PeerFactor::any, false};
inline constexpr Quantity own_treated{OwnFactor::treated, PeerFactor::any, false};
inline constexpr Quantity own_untreated{OwnFactor::untreated, PeerFactor::any, false};
/// No peer treated.
inline constexpr Quantity peers_none{OwnFactor::one, PeerFactor::none_treated, false};
/// All peers treated.
inline constexpr Quantity peers_all{OwnFactor::one, PeerFactor::all_treated, false};
/// Nobody in the group treated, self included.
inline constexpr Quantity nobody{OwnFactor::untreated, PeerFactor::none_treated, false};
/// Everybody in the group treated, self included.
inline constexpr Quantity everybody{OwnFactor::treated, PeerFactor::all_treated, false};
inline constexpr Quantity treated_peers_none{OwnFactor::treated, PeerFactor::none_treated, false};
inline constexpr Quantity untreated_peers_all{OwnFactor::untreated, PeerFactor::all_treated, false};
}  // namespace q

struct CellMoments {
    std::array<double, 9> indicator{};
    std::array<double, 9> outcome{};
    double weight = 0.0;  // probability mass (population) or summed unit weight (sample)
    double units = 0.0;   // number of contributing rows; equals weight for unweighted samples
    bool populated = false;
};

/// Conditional expectations of the moment basis in each of the four instrument cells.
struct MomentSet {
    int m = 1;
    bool population = false;
    std::array<CellMoments, 4> cells{};

    [[nodiscard]] const CellMoments& at(Cell c) const { return cells[c.index()]; }

    [[nodiscard]] double expect(Quantity qty, Cell c) const {
        const auto& cm = at(c);
        if (!cm.populated) throw std::domain_error("moment requested from empty cell " + c.label());
        return qty.times_y ? cm.outcome[qty.slot()] : cm.indicator[qty.slot()];
    }
    [[nodiscard]] bool all_populated() const noexcept {
        for (const auto& c : cells)
            if (!c.populated) return false;
        return true;
    }
    [[nodiscard]] double min_cell_units() const noexcept {
        double lo = cells[0].units;
        for (const auto& c : cells) lo = std::min(lo, c.units);
        return lo;
    }
};

/// E[qty | a] - E[qty | b].
inline double delta(const MomentSet& ms, Quantity qty, Cell a, Cell b) {
    return ms.expect(qty, a) - ms.expect(qty, b);
}

/// Accumulates weighted unit contributions into the nine-by-two basis per cell.
class MomentAccumulator {
public:
    void add(Cell c, int d_own, bool none_treated, bool all_treated, double y, double w) {
        auto& acc = cells_[c.index()];
        acc.weight.add(w);
        acc.units += 1.0;
        const std::array<double, 3> own = {1.0, static_cast<double>(d_own), static_cast<double>(1 - d_own)};
        const std::array<double, 3> peer = {1.0, none_treated ? 1.0 : 0.0, all_treated ? 1.0 : 0.0};
        for (int a = 0; a < 3; ++a) {
            if (own[a] == 0.0) continue;
            for (int b = 0; b < 3; ++b) {
                if (peer[b] == 0.0) continue;
                acc.indicator[3 * a + b].add(w);
                acc.outcome[3 * a + b].add(w * y);
            }
        }
    }

    /// Folds another accumulator in; merging fixed chunks in a fixed order keeps sums reproducible.
    void merge(const MomentAccumulator& other) {
        for (int c = 0; c < 4; ++c) {
            auto& a = cells_[c];
            const auto& b = other.cells_[c];
            a.weight.add(b.weight.value());
            a.units += b.units;
            for (int s = 0; s < 9; ++s) {
                a.indicator[s].add(b.indicator[s].value());
                a.outcome[s].add(b.outcome[s].value());
            }
        }
    }

    [[nodiscard]] MomentSet finish(int m, bool population) const {
        MomentSet ms;
        ms.m = m;
        ms.population = population;
        for (int c = 0; c < 4; ++c) {
            const auto& acc = cells_[c];
            auto& out = ms.cells[c];
            out.weight = acc.weight.value();
            out.units = acc.units;
            out.populated = out.weight > 0.0;
            if (!out.populated) continue;
            for (int s = 0; s < 9; ++s) {
                out.indicator[s] = acc.indicator[s].value() / out.weight;
                out.outcome[s] = acc.outcome[s].value() / out.weight;
            }
        }
        return ms;
    }

private:
    struct Acc {
        std::array<CompensatedSum, 9> indicator{};
        std::array<CompensatedSum, 9> outcome{};
        CompensatedSum weight;
        double units = 0.0;
    };
    std::array<Acc, 4> cells_{};
};

inline nlohmann::json to_json_value(const MomentSet& ms) {
    nlohmann::json j;
    j["m"] = ms.m;
    j["population"] = ms.population;
    for (auto c : kAllCells) {
        const auto& cm = ms.at(c);
        nlohmann::json cj;
        cj["weight"] = cm.weight;
        cj["units"] = cm.units;
        cj["populated"] = cm.populated;
        for (int own = 0; own < 3; ++own)
            for (int peer = 0; peer < 3; ++peer) {
                const Quantity qty{static_cast<OwnFactor>(own), static_cast<PeerFactor>(peer), false};
                cj["E[" + qty.label() + "]"] = cm.indicator[qty.slot()];
                cj["E[" + qty.with_y().label() + "]"] = cm.outcome[qty.slot()];
            }
        j["cells"][c.label()] = cj;
    }
    return j;
}

}  // namespace spiv

#endif  // SPILLOVER_IV_MOMENTS_HPP
