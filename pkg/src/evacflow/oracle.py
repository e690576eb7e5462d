"""Grid-based evacuation simulator producing cumulative-occupancy heatmaps.

Movement model: discrete floor-field descent. Every walkable cell knows
its geodesic distance to the nearest exit (multi-source Dijkstra over
the 8-neighborhood). Each tick an occupant earns ``max_speed * dt``
meters of movement credit; when the credit covers the edge to its
descent target and that cell is below capacity, the occupant hops and
pays the edge cost. An occupant whose target is full queues with its
credit held at the edge cost, so waiting never banks speed. Every
active occupant deposits ``dt`` person-seconds into the cell it
occupies each tick, which is what the heatmap accumulates. Occupants
standing on an exit cell are absorbed at the end of the tick.

The per-tick advance along the path never exceeds ``max_speed * dt``;
a hop simply realizes credit earned over previous ticks (the config
guard ``max_speed * dt <= cell_size`` keeps leftover credit below one
edge, so a hop can never be skipped).
"""

from __future__ import annotations

import heapq
import math
import time as _time
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ConfigError, OverCapacityError, UnreachableOccupantError
from .layout import Layout, occupants_in_room

_NEIGHBORS = [
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
]


@dataclass(frozen=True)
class SimConfig:
    max_speed_mps: float = 1.19
    time_step_s: float = 0.4
    jam_density: float = 4.0  # persons/m^2 -> per-cell capacity
    max_sim_time_s: float = 1800.0
    seed: int = 0

    def validate(self, cell_size_m: float) -> None:
        if self.max_speed_mps <= 0:
            raise ConfigError("max_speed must be positive")
        if self.time_step_s <= 0:
            raise ConfigError("time_step must be positive")
        if self.time_step_s * self.max_speed_mps > cell_size_m + 1e-12:
            raise ConfigError(
                f"time_step*max_speed = {self.time_step_s * self.max_speed_mps:.4f} m "
                f"exceeds cell size {cell_size_m} m (cell skipping)"
            )


@dataclass
class DistanceField:
    """Geodesic distance to the nearest exit, meters; +inf when unreachable."""

    meters: np.ndarray


def distance_field(layout: Layout) -> DistanceField:
    """Multi-source Dijkstra from all exit cells over walkable cells.

    Diagonal steps cost sqrt(2) * cell_size, straight steps cell_size.
    """
    layout.validate()
    walk = layout.walkable_mask()
    rows, cols = walk.shape
    dist = np.full((rows, cols), np.inf)
    heap = []
    for r, c in layout.exit_cells():
        dist[r, c] = 0.0
        heapq.heappush(heap, (0.0, r, c))
    straight = layout.cell_size_m
    diagonal = math.sqrt(2.0) * layout.cell_size_m
    while heap:
        d, r, c = heapq.heappop(heap)
        if d > dist[r, c]:
            continue
        for dr, dc in _NEIGHBORS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < rows and 0 <= nc < cols) or not walk[nr, nc]:
                continue
            nd = d + (diagonal if dr and dc else straight)
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                heapq.heappush(heap, (nd, nr, nc))
    return DistanceField(dist)


@dataclass(frozen=True)
class Occupant:
    cell: tuple
    room_index: int


def seed_occupants(layout: Layout, seed: int) -> list[Occupant]:
    """Place each room's head count on distinct cells of that room.

    Uniform random placement, deterministic for a fixed seed. A room
    whose head count exceeds its cell count is an error.
    """
    layout.validate()
    rng = np.random.default_rng(seed)
    occupants = []
    for i, room in enumerate(layout.rooms):
        count = occupants_in_room(room.area_m2(layout.cell_size_m), room.function)
        if count == 0:
            continue
        cells = sorted(room.cells)
        if count > len(cells):
            raise OverCapacityError(
                f"room {i}: {count} occupants for {len(cells)} cells"
            )
        picks = rng.choice(len(cells), size=count, replace=False)
        occupants.extend(Occupant(cells[j], i) for j in sorted(picks))
    return occupants


@dataclass
class Heatmap:
    """8-bit single-channel cumulative-occupancy image."""

    pixels: np.ndarray
    provenance: str  # "oracle" | "surrogate"

    def save_png(self, path) -> None:
        Image.fromarray(self.pixels, mode="L").save(path)


def load_heatmap_png(path) -> np.ndarray:
    img = Image.open(path).convert("L")
    return np.asarray(img, dtype=np.uint8)


def normalize_heatmap(accumulator: np.ndarray, provenance: str = "oracle") -> Heatmap:
    """Min-max map to 0..255, rounded half-up.

    All-zero stays all-zero; a constant nonzero field maps to 255 so the
    darker-is-busier reading survives the degenerate range.
    """
    acc = np.asarray(accumulator, dtype=np.float64)
    lo, hi = acc.min(), acc.max()
    if hi == 0.0:
        pixels = np.zeros(acc.shape, dtype=np.uint8)
    elif lo == hi:
        pixels = np.full(acc.shape, 255, dtype=np.uint8)
    else:
        scaled = (acc - lo) / (hi - lo) * 255.0
        pixels = np.floor(scaled + 0.5).astype(np.uint8)
    return Heatmap(pixels=pixels, provenance=provenance)


@dataclass
class EvacStats:
    total_occupants: int
    evac_times_s: tuple  # per occupant; None when not out by max_sim_time
    sim_time_s: float
    wall_clock_s: float
    completed: bool


@dataclass
class SimState:
    """Mutable state advanced by :func:`step`. Build with :func:`init_state`."""

    layout: Layout
    dist: np.ndarray  # flat float64 per cell
    capacity: np.ndarray  # flat int per cell
    occupancy: np.ndarray  # flat int per cell
    target: np.ndarray  # flat descent target index, -1 = none
    move_cost: np.ndarray  # flat edge length to target, meters
    positions: np.ndarray  # per occupant, flat cell index
    credit: np.ndarray  # per occupant, meters of banked movement
    active: np.ndarray  # per occupant, bool
    evac_time: np.ndarray  # per occupant, seconds (nan until absorbed)
    accumulator: np.ndarray  # flat person-seconds per cell
    time_s: float
    rng: np.random.Generator
    last_tick_advance: float = 0.0  # max per-occupant path advance, for audits

    @property
    def active_count(self) -> int:
        return int(self.active.sum())


def _descent_targets(layout: Layout, dist: np.ndarray):
    """Per-cell best strictly-descending neighbor (static given the field).

    Ties on distance break toward the lowest (row, col) index, which the
    flat index ordering encodes directly.
    """
    rows, cols = dist.shape
    target = np.full(rows * cols, -1, dtype=np.int64)
    cost = np.zeros(rows * cols)
    walk = layout.walkable_mask()
    straight = layout.cell_size_m
    diagonal = math.sqrt(2.0) * layout.cell_size_m
    for r in range(rows):
        for c in range(cols):
            if not walk[r, c] or not np.isfinite(dist[r, c]) or dist[r, c] == 0.0:
                continue
            best = None
            for dr, dc in _NEIGHBORS:
                nr, nc = r + dr, c + dc
                if not (0 <= nr < rows and 0 <= nc < cols) or not walk[nr, nc]:
                    continue
                d = dist[nr, nc]
                if d >= dist[r, c]:
                    continue
                key = (d, nr * cols + nc)
                if best is None or key < best[0]:
                    best = (key, nr * cols + nc, diagonal if dr and dc else straight)
            if best is not None:
                target[r * cols + c] = best[1]
                cost[r * cols + c] = best[2]
    return target, cost


def init_state(
    layout: Layout,
    config: SimConfig,
    occupants: list[Occupant] | None = None,
    dist: DistanceField | None = None,
) -> SimState:
    layout.validate()
    config.validate(layout.cell_size_m)
    if dist is None:
        dist = distance_field(layout)
    if occupants is None:
        occupants = seed_occupants(layout, config.seed)
    rows, cols = layout.grid_shape
    flat_dist = dist.meters.ravel()

    positions = np.array(
        [r * cols + c for (r, c) in (o.cell for o in occupants)], dtype=np.int64
    )
    for occ in occupants:
        if not np.isfinite(dist.meters[occ.cell]):
            raise UnreachableOccupantError(
                f"occupant in room {occ.room_index} at {occ.cell} cannot reach an exit"
            )

    cell_area = layout.cell_size_m**2
    cap = max(1, int(config.jam_density * cell_area))
    capacity = np.full(rows * cols, cap, dtype=np.int64)
    occupancy = np.zeros(rows * cols, dtype=np.int64)
    for p in positions:
        occupancy[p] += 1

    target, move_cost = _descent_targets(layout, dist.meters)
    return SimState(
        layout=layout,
        dist=flat_dist,
        capacity=capacity,
        occupancy=occupancy,
        target=target,
        move_cost=move_cost,
        positions=positions,
        credit=np.zeros(len(positions)),
        active=np.ones(len(positions), dtype=bool),
        evac_time=np.full(len(positions), np.nan),
        accumulator=np.zeros(rows * cols),
        time_s=0.0,
        rng=np.random.default_rng(config.seed),
    )


def step(state: SimState, config: SimConfig) -> SimState:
    """Advance the simulation by one tick. Mutates and returns ``state``."""
    dt = config.time_step_s
    gain = config.max_speed_mps * dt
    order = state.rng.permutation(np.flatnonzero(state.active))
    max_advance = 0.0
    for i in order:
        pos = state.positions[i]
        state.accumulator[pos] += dt
        before = state.credit[i]
        tgt = state.target[pos]
        if tgt < 0:
            # on an exit (absorbed below) or stuck: nothing to walk toward
            state.credit[i] = 0.0
            continue
        cost = state.move_cost[pos]
        credit = before + gain
        spent = 0.0
        if credit >= cost - 1e-12:
            if state.occupancy[tgt] < state.capacity[tgt]:
                spent = cost
                credit -= cost
                state.occupancy[pos] -= 1
                state.occupancy[tgt] += 1
                state.positions[i] = tgt
            else:
                credit = min(credit, cost)  # queueing holds at the doorstep
        state.credit[i] = credit
        max_advance = max(max_advance, credit - before + spent)
    state.time_s += dt
    # absorb occupants standing on an exit cell
    for i in np.flatnonzero(state.active):
        if state.dist[state.positions[i]] == 0.0:
            state.active[i] = False
            state.evac_time[i] = state.time_s
            state.occupancy[state.positions[i]] -= 1
    state.last_tick_advance = max_advance
    return state


def simulate(
    layout: Layout,
    config: SimConfig | None = None,
    occupants: list[Occupant] | None = None,
):
    """Run the evacuation to completion (or ``max_sim_time``).

    Returns ``(heatmap, stats, accumulator)`` where the accumulator is
    the raw per-cell person-seconds grid.
    """
    config = config or SimConfig()
    t0 = _time.perf_counter()
    state = init_state(layout, config, occupants=occupants)
    while state.active_count > 0 and state.time_s < config.max_sim_time_s - 1e-9:
        step(state, config)
    wall = _time.perf_counter() - t0
    evac_times = tuple(
        None if math.isnan(t) else float(t) for t in state.evac_time
    )
    stats = EvacStats(
        total_occupants=len(state.positions),
        evac_times_s=evac_times,
        sim_time_s=state.time_s,
        wall_clock_s=wall,
        completed=state.active_count == 0,
    )
    accumulator = state.accumulator.reshape(layout.grid_shape).copy()
    return normalize_heatmap(accumulator), stats, accumulator
