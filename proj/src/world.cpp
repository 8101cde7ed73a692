#include "nve/world.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace nve {

CellGrid::CellGrid(std::uint64_t width, std::uint64_t height, std::uint64_t block,
                   std::vector<Cell> cells)
    : width_(width), height_(height), block_(block), cells_(std::move(cells)) {
    if (block_ == 0 || width_ < block_ || height_ < block_)
        throw std::invalid_argument("grid: need width >= block >= 1 and height >= block >= 1");
    if (width_ % block_ != 0 || height_ % block_ != 0)
        throw std::invalid_argument("grid: block must divide width and height");
    if (cells_.size() != width_ * height_)
        throw std::invalid_argument("grid: cell count does not match dimensions");
}

CellGrid CellGrid::from_rows(const std::vector<std::string>& rows, std::uint64_t block) {
    if (rows.empty()) throw std::invalid_argument("grid: no rows");
    const std::uint64_t width = rows.front().size();
    std::vector<Cell> cells;
    cells.reserve(width * rows.size());
    for (const auto& row : rows) {
        if (row.size() != width) throw std::invalid_argument("grid: ragged rows");
        for (char c : row) {
            if (c == '#') cells.push_back(Cell::Wall);
            else if (c == '.') cells.push_back(Cell::Free);
            else throw std::invalid_argument("grid: unexpected map character");
        }
    }
    return CellGrid(width, rows.size(), block, std::move(cells));
}

Cell CellGrid::at(Position p) const {
    if (!in_bounds(p)) throw std::out_of_range("grid: position out of bounds");
    return cells_[p.y * width_ + p.x];
}

std::vector<Position> CellGrid::free_cells_in(RegionId r) const {
    if (!region_in_bounds(r)) throw std::out_of_range("grid: region out of bounds");
    std::vector<Position> out;
    for (std::uint64_t y = r.ry * block_; y < (r.ry + 1) * block_; ++y)
        for (std::uint64_t x = r.rx * block_; x < (r.rx + 1) * block_; ++x)
            if (cells_[y * width_ + x] == Cell::Free) out.push_back({x, y});
    return out;
}

bool operator==(const ConcreteState& a, const ConcreteState& b) {
    if (a.cycle != b.cycle || a.avatars != b.avatars) return false;
    if (a.grid == b.grid) return true;
    if (!a.grid || !b.grid) return false;
    return *a.grid == *b.grid;
}

std::uint64_t manhattan(Position a, Position b) {
    const std::uint64_t dx = a.x > b.x ? a.x - b.x : b.x - a.x;
    const std::uint64_t dy = a.y > b.y ? a.y - b.y : b.y - a.y;
    return dx + dy;
}

RegionId region_of(const CellGrid& grid, Position p) {
    if (!grid.in_bounds(p)) throw std::out_of_range("region_of: position out of bounds");
    return {p.x / grid.block(), p.y / grid.block()};
}

AbstractState abstract_state(const ConcreteState& s) {
    AbstractState a;
    a.cycle = s.cycle;
    for (const auto& [id, pos] : s.avatars) a.avatars[id] = region_of(*s.grid, pos);
    return a;
}

AbstractDiff abstract_diff(const ConcreteState& s, const ConcreteDiff& d) {
    if (d.moves.empty()) throw std::invalid_argument("abstract_diff: empty diff");
    AbstractDiff a;
    for (const auto& [id, pos] : d.moves) {
        if (!s.avatars.contains(id)) throw std::invalid_argument("abstract_diff: unknown client");
        a.moves[id] = region_of(*s.grid, pos);
    }
    return a;
}

ConcreteState apply_diff(const ConcreteState& s, const ConcreteDiff& d) {
    if (d.moves.empty()) throw std::invalid_argument("apply_diff: empty diff");
    ConcreteState next = s;
    for (const auto& [id, pos] : d.moves) {
        if (!s.grid->in_bounds(pos)) throw std::out_of_range("apply_diff: target out of bounds");
        next.avatars[id] = pos; // inserts newly announced avatars
    }
    next.cycle = s.cycle + 1;
    return next;
}

AbstractState apply_abstract(const AbstractState& a, const AbstractDiff& d) {
    if (d.moves.empty()) throw std::invalid_argument("apply_abstract: empty diff");
    AbstractState next = a;
    for (const auto& [id, r] : d.moves) next.avatars[id] = r;
    next.cycle = a.cycle + 1;
    return next;
}

std::optional<ConcreteState> concretize_state(const AbstractState& a, GridPtr grid,
                                              std::uint64_t seed) {
    Rng rng(seed);
    ConcreteState s;
    s.grid = std::move(grid);
    s.cycle = a.cycle;
    for (const auto& [id, r] : a.avatars) {
        if (!s.grid->region_in_bounds(r)) return std::nullopt;
        const auto frees = s.grid->free_cells_in(r);
        if (frees.empty()) return std::nullopt;
        s.avatars[id] = frees[rng.below(frees.size())];
    }
    return s;
}

bool gamma_contains(const ConcreteState& s, const AbstractDiff& ad, const ConcreteDiff& d) {
    if (ad.moves.size() != d.moves.size()) return false;
    for (const auto& [id, pos] : d.moves) {
        auto it = ad.moves.find(id);
        if (it == ad.moves.end()) return false;
        if (!s.grid->in_bounds(pos)) return false;
        if (region_of(*s.grid, pos) != it->second) return false;
    }
    return true;
}

namespace {

bool own_move_ok(const ConcreteState& s, ClientId self, Position target) {
    auto it = s.avatars.find(self);
    if (it == s.avatars.end()) return false;
    return s.grid->is_free(target) && manhattan(it->second, target) <= 1;
}

// Free cell of `r` nearest to `from`, row-major tie-break; first free cell
// when there is no reference position.
std::optional<Position> nearest_free(const CellGrid& grid, RegionId r,
                                     std::optional<Position> from) {
    const auto frees = grid.free_cells_in(r);
    if (frees.empty()) return std::nullopt;
    if (!from) return frees.front();
    Position best = frees.front();
    std::uint64_t best_d = manhattan(*from, best);
    for (const Position& p : frees) {
        const std::uint64_t d = manhattan(*from, p);
        if (d < best_d) { best = p; best_d = d; }
    }
    return best;
}

} // namespace

std::optional<ConcreteDiff> concretize_diff(const ConcreteState& s, const AbstractDiff& ad,
                                            ClientId self, std::optional<Position> intended,
                                            std::uint64_t seed) {
    (void)seed; // the placement policy is fully deterministic; seed reserved
    if (ad.moves.empty()) return std::nullopt;
    ConcreteDiff d;
    for (const auto& [id, r] : ad.moves) {
        if (!s.grid->region_in_bounds(r)) return std::nullopt;
        if (id == self) {
            if (intended && s.grid->in_bounds(*intended) &&
                region_of(*s.grid, *intended) == r && own_move_ok(s, self, *intended)) {
                d.moves[id] = *intended;
                continue;
            }
            auto it = s.avatars.find(self);
            if (it == s.avatars.end()) return std::nullopt;
            std::optional<Position> pick;
            std::uint64_t best_d = std::numeric_limits<std::uint64_t>::max();
            for (const Position& p : s.grid->free_cells_in(r)) {
                const std::uint64_t dist = manhattan(it->second, p);
                if (dist <= 1 && dist < best_d) { pick = p; best_d = dist; }
            }
            if (!pick) return std::nullopt; // no legal own move realizes the region
            d.moves[id] = *pick;
        } else {
            std::optional<Position> prev;
            if (auto it = s.avatars.find(id); it != s.avatars.end()) prev = it->second;
            auto pick = nearest_free(*s.grid, r, prev);
            if (!pick) return std::nullopt;
            d.moves[id] = *pick;
        }
    }
    return d;
}

bool concrete_rules_ok(const ConcreteState& s, const ConcreteDiff& d, ClientId self) {
    for (const auto& [id, pos] : d.moves) {
        if (!s.grid->is_free(pos)) return false;
        if (id == self && !own_move_ok(s, self, pos)) return false;
    }
    return true;
}

bool abstract_rules_ok(const AbstractState& a, const AbstractDiff& d, ClientId requester,
                       const CellGrid& grid) {
    if (d.moves.size() != 1 || !d.moves.contains(requester)) return false;
    auto cur = a.avatars.find(requester);
    if (cur == a.avatars.end()) return false;
    const RegionId target = d.moves.at(requester);
    if (!grid.region_in_bounds(target)) return false;
    const std::uint64_t dr = (cur->second.rx > target.rx ? cur->second.rx - target.rx
                                                         : target.rx - cur->second.rx) +
                             (cur->second.ry > target.ry ? cur->second.ry - target.ry
                                                         : target.ry - cur->second.ry);
    if (dr > 1) return false; // same region or edge-adjacent only
    return !grid.free_cells_in(target).empty();
}

} // namespace nve
