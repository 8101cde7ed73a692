#pragma once

#include <compare>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nve/types.hpp"

namespace nve {

enum class Cell : std::uint8_t { Free = 0, Wall = 1 };

struct Position {
    std::uint64_t x = 0;
    std::uint64_t y = 0;
    auto operator<=>(const Position&) const = default;
};

struct RegionId {
    std::uint64_t rx = 0;
    std::uint64_t ry = 0;
    auto operator<=>(const RegionId&) const = default;
};

// Rectangular cell map partitioned into square regions of edge `block`.
// Cells are the concrete world; regions are the abstract one.
class CellGrid {
public:
    // Throws std::invalid_argument if block does not divide both dimensions
    // or either dimension is smaller than block.
    CellGrid(std::uint64_t width, std::uint64_t height, std::uint64_t block,
             std::vector<Cell> cells);

    // '#' = Wall, '.' = Free, one string per row.
    static CellGrid from_rows(const std::vector<std::string>& rows, std::uint64_t block);

    std::uint64_t width() const { return width_; }
    std::uint64_t height() const { return height_; }
    std::uint64_t block() const { return block_; }
    std::uint64_t regions_x() const { return width_ / block_; }
    std::uint64_t regions_y() const { return height_ / block_; }

    bool in_bounds(Position p) const { return p.x < width_ && p.y < height_; }
    bool region_in_bounds(RegionId r) const { return r.rx < regions_x() && r.ry < regions_y(); }
    Cell at(Position p) const;
    bool is_free(Position p) const { return in_bounds(p) && at(p) == Cell::Free; }

    // Free cells of a region in row-major order (the canonical tie-break
    // order for every placement policy).
    std::vector<Position> free_cells_in(RegionId r) const;

    const std::vector<Cell>& cells() const { return cells_; }
    bool operator==(const CellGrid&) const = default;

private:
    std::uint64_t width_;
    std::uint64_t height_;
    std::uint64_t block_;
    std::vector<Cell> cells_; // row-major
};

using GridPtr = std::shared_ptr<const CellGrid>;

struct ConcreteState {
    GridPtr grid;
    std::map<ClientId, Position> avatars;
    Cycle cycle = 0;
};

bool operator==(const ConcreteState& a, const ConcreteState& b);

struct AbstractState {
    std::map<ClientId, RegionId> avatars;
    Cycle cycle = 0;
    bool operator==(const AbstractState&) const = default;
};

// Diffs carry absolute targets, not deltas, so their abstraction is
// state-independent and application is idempotent per entry.
struct ConcreteDiff {
    std::map<ClientId, Position> moves;
    bool operator==(const ConcreteDiff&) const = default;
};

struct AbstractDiff {
    std::map<ClientId, RegionId> moves;
    bool operator==(const AbstractDiff&) const = default;
};

std::uint64_t manhattan(Position a, Position b);

// Region containing p. Throws std::out_of_range when p is out of bounds.
RegionId region_of(const CellGrid& grid, Position p);

// Abstraction of a full state: every avatar mapped through region_of,
// cycle preserved.
AbstractState abstract_state(const ConcreteState& s);

// Abstraction of a diff. Throws std::invalid_argument when the diff is
// empty or moves a client unknown to s, std::out_of_range for out-of-bounds
// targets.
AbstractDiff abstract_diff(const ConcreteState& s, const ConcreteDiff& d);

// Applies a diff: listed avatars move to (or spawn at) their absolute
// targets, others stay, cycle increments. Deliberately does NOT check
// movement rules; cheating states must be representable. Throws on empty
// diffs and out-of-bounds targets.
ConcreteState apply_diff(const ConcreteState& s, const ConcreteDiff& d);

// Region-level counterpart of apply_diff.
AbstractState apply_abstract(const AbstractState& a, const AbstractDiff& d);

// One concrete state per abstract one: every avatar placed on a free cell
// of its region, uniformly at random but deterministic given the seed.
// Empty when some region has no free cell.
std::optional<ConcreteState> concretize_state(const AbstractState& a, GridPtr grid,
                                              std::uint64_t seed);

// Membership of a concrete diff in the concretization set of an abstract
// diff relative to s: same client set and every target lands in its stated
// region. Mismatched client sets yield false, never an error.
bool gamma_contains(const ConcreteState& s, const AbstractDiff& ad, const ConcreteDiff& d);

// Picks a rule-compliant concretization of an abstract diff:
//   - the client's own entry keeps `intended` when it lands in the stated
//     region and is a legal move, otherwise the nearest free cell of the
//     stated region reachable in one step;
//   - every other avatar goes to the free cell of its stated region nearest
//     its previous known position (row-major tie-break; first free cell
//     when the avatar is new).
// Empty when no rule-compliant choice exists.
std::optional<ConcreteDiff> concretize_diff(const ConcreteState& s, const AbstractDiff& ad,
                                            ClientId self, std::optional<Position> intended,
                                            std::uint64_t seed);

// Concrete movement rules: the client's own move must be a Manhattan step
// of at most 1 onto a free cell; other avatars' targets need only be free
// cells (their paths are unknown to this client); everything in bounds.
bool concrete_rules_ok(const ConcreteState& s, const ConcreteDiff& d, ClientId self);

// The server-side admission check, deliberately permissive: the requester
// may move to its own region or an edge-adjacent one as long as the target
// region has at least one free cell. Wall layout inside and between regions
// is invisible at this granularity.
bool abstract_rules_ok(const AbstractState& a, const AbstractDiff& d, ClientId requester,
                       const CellGrid& grid);

} // namespace nve
