"""Bundled demo assets: the plan-optimization case layout and benchmark tiers.

The case layout is a cross-corridor office floor whose single exit sits
at the bottom of the central corridor, so the whole right wing funnels
through it. The optimized variant adds a second exit at the right end
of the horizontal corridor; the pressure on the central corridor
segment should drop sharply.
"""

from __future__ import annotations

import numpy as np

from .dataset import ShapeClass, generate_layout
from .layout import ExitRun, Layout, Room, RoomFunction
from .oracle import seed_occupants


def _case_walls(rows, cols):
    walls = set()
    for c in range(cols):
        walls.add((0, c))
        walls.add((rows - 1, c))
    for r in range(rows):
        walls.add((r, 0))
        walls.add((r, cols - 1))
    # horizontal corridor walls (rows 11 and 14), crossing kept open
    for c in range(1, cols - 1):
        if c not in (17, 18):
            walls.add((11, c))
            walls.add((14, c))
    # vertical corridor walls (cols 16 and 19), crossing kept open
    for r in range(1, rows - 1):
        if r not in (12, 13):
            walls.add((r, 16))
            walls.add((r, 19))
    # quadrant split walls
    for r in list(range(1, 11)) + list(range(15, rows - 1)):
        walls.add((r, 8))
        walls.add((r, 27))
    # one door per room onto the horizontal corridor
    for door in [(11, 4), (11, 12), (11, 23), (11, 31),
                 (14, 4), (14, 12), (14, 23), (14, 31)]:
        walls.discard(door)
    return walls


def _rect(r0, r1, c0, c1):
    return frozenset((r, c) for r in range(r0, r1 + 1) for c in range(c0, c1 + 1))


def case_study_layouts() -> tuple[Layout, Layout, frozenset]:
    """(before, after, central_corridor_region).

    ``before`` has one exit at the bottom of the central corridor;
    ``after`` adds a right-side exit on the horizontal corridor. The
    region is the central corridor segment between the crossing and the
    bottom exit, where congestion should drop after the change.
    """
    rows, cols = 26, 36
    cell = 0.5
    walls = _case_walls(rows, cols)
    bottom_exit = ExitRun(cells=((25, 17), (25, 18)))
    for r, c in bottom_exit.cells:
        walls.discard((r, c))

    rooms = (
        Room(_rect(1, 10, 1, 7), RoomFunction.ORDINARY_OFFICE),
        Room(_rect(1, 10, 9, 15), RoomFunction.MEETING_WITH_TABLE),
        Room(_rect(1, 10, 20, 26), RoomFunction.EXHIBITION_HALL),
        Room(_rect(1, 10, 28, 34), RoomFunction.MEETING_NO_TABLE),
        Room(_rect(15, 24, 1, 7), RoomFunction.ORDINARY_OFFICE),
        Room(_rect(15, 24, 9, 15), RoomFunction.OTHER_REGION),
        Room(_rect(15, 24, 20, 26), RoomFunction.EXHIBITION_HALL),
        Room(_rect(15, 24, 28, 34), RoomFunction.MEETING_WITH_TABLE),
    )
    before = Layout(
        width_m=cols * cell,
        height_m=rows * cell,
        cell_size_m=cell,
        wall_cells=frozenset(walls),
        rooms=rooms,
        exits=(bottom_exit,),
    )
    before.validate()

    right_exit = ExitRun(cells=((12, 35), (13, 35)))
    walls_after = set(walls)
    for r, c in right_exit.cells:
        walls_after.discard((r, c))
    after = Layout(
        width_m=cols * cell,
        height_m=rows * cell,
        cell_size_m=cell,
        wall_cells=frozenset(walls_after),
        rooms=rooms,
        exits=(bottom_exit, right_exit),
    )
    after.validate()

    region = frozenset((r, c) for r in range(14, 25) for c in (17, 18))
    return before, after, region


def region_person_seconds(accumulator: np.ndarray, region) -> float:
    return float(sum(accumulator[r, c] for r, c in region))


def dense_demo_layout(blocks: int = 12) -> Layout:
    """Large exhibition floor: a lattice of packed halls around corridor
    bands with a single double-door exit.

    This is the reference case for the oracle-vs-surrogate timing
    contrast: thousands of occupants force a long, congested oracle run
    while surrogate sampling cost stays fixed.
    """
    pitch = 15  # block plus one corridor band
    corridor_w = 2
    block_span = pitch - corridor_w  # 13 cells: 1 wall + 11 room + 1 wall
    rows = cols = 1 + blocks * pitch + 1
    cell = 0.5

    corridor_axes = set()
    for k in range(1, blocks):
        for off in range(corridor_w):
            corridor_axes.add(1 + k * pitch - corridor_w + off)

    def is_corridor(r, c):
        return r in corridor_axes or c in corridor_axes

    walls = set()
    for c in range(cols):
        walls.add((0, c))
        walls.add((rows - 1, c))
    for r in range(rows):
        walls.add((r, 0))
        walls.add((r, cols - 1))

    rooms = []
    for bi in range(blocks):
        for bj in range(blocks):
            r0 = 1 + bi * pitch
            c0 = 1 + bj * pitch
            r1 = r0 + block_span - 1
            c1 = c0 + block_span - 1
            # block border is wall except one door onto a corridor band
            for r in range(r0, r1 + 1):
                walls.add((r, c0))
                walls.add((r, c1))
            for c in range(c0, c1 + 1):
                walls.add((r0, c))
                walls.add((r1, c))
            door_col = (c0 + c1) // 2
            if r1 + 1 < rows - 1 and is_corridor(r1 + 1, door_col):
                walls.discard((r1, door_col))
            else:
                walls.discard((r0, door_col))
            rooms.append(
                Room(_rect(r0 + 1, r1 - 1, c0 + 1, c1 - 1),
                     RoomFunction.MEETING_NO_TABLE)
            )

    mid_band = 1 + (blocks // 2) * pitch - corridor_w
    exit_run = ExitRun(cells=((rows - 1, mid_band), (rows - 1, mid_band + 1)))
    for cell_ in exit_run.cells:
        walls.discard(cell_)

    layout = Layout(
        width_m=cols * cell,
        height_m=rows * cell,
        cell_size_m=cell,
        wall_cells=frozenset(walls),
        rooms=tuple(rooms),
        exits=(exit_run,),
    )
    layout.validate()
    return layout


_TIER_SHAPES = [
    ShapeClass.RECTANGULAR,
    ShapeClass.L_SHAPE,
    ShapeClass.T_SHAPE,
    ShapeClass.U_SHAPE,
    ShapeClass.IRREGULAR,
]


def benchmark_tiers(seed: int = 0, tiers: int = 5) -> list[Layout]:
    """Layouts of strictly increasing occupant count, one per shape class.

    Occupant targets double per tier; room counts scale to match, and
    candidate seeds are scanned until each tier carries at least 50%
    more occupants than the previous one, keeping oracle wall-clock
    monotone in practice.
    """
    layouts = []
    previous = 0
    for tier in range(tiers):
        shape = _TIER_SHAPES[tier % len(_TIER_SHAPES)]
        target = 30 * (2**tier)
        rooms = max(4, round(target / 7))
        chosen = None
        for candidate in range(40):
            layout = generate_layout(
                shape, rooms=rooms, exits=1 + tier % 2,
                seed=int(np.int64(seed) * 97 + tier * 13 + candidate),
            )
            occupants = len(seed_occupants(layout, seed=seed))
            if occupants > previous * 1.5:
                chosen = (layout, occupants)
                break
        if chosen is None:
            raise RuntimeError(f"no tier-{tier} layout exceeded {previous} occupants")
        layouts.append(chosen[0])
        previous = chosen[1]
    return layouts
