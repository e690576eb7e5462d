"""Metric floor-plan model and its raster encodings.

A layout lives on a grid of square cells (``cell_size_m`` per side).
Cells fall into one of a few kinds: outside the building envelope
(background), wall, corridor (walkable, unassigned), exit openings, or
room cells carrying a :class:`RoomFunction`. Two raster encodings are
produced from the same per-cell map:

* an RGB drawing using a versioned :class:`Palette`, and
* a 3-channel feature tensor splitting obstacles, occupant density and
  exits into separate planes.

Data augmentation reassigns room functions while leaving geometry
(walls, exits) untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    AugmentationUnavailableError,
    InvalidLayoutError,
    LayoutSchemaError,
)

Cell = tuple[int, int]  # (row, col)

SCHEMA_VERSION = 1


class RoomFunction(Enum):
    ORDINARY_OFFICE = "ordinary_office"
    MEETING_WITH_TABLE = "meeting_with_table"
    MEETING_NO_TABLE = "meeting_no_table"
    EXHIBITION_HALL = "exhibition_hall"
    OTHER_REGION = "other_region"
    CORRIDOR_RESTROOM = "corridor_restroom"
    EXIT_STAIRS = "exit_stairs"
    EXIT_DOOR = "exit_door"


# m^2 per person by room function; 0 means unoccupied.
_DENSITY_M2_PER_PERSON = {
    RoomFunction.ORDINARY_OFFICE: 6.0,
    RoomFunction.MEETING_WITH_TABLE: 2.0,
    RoomFunction.MEETING_NO_TABLE: 1.0,
    RoomFunction.EXHIBITION_HALL: 1.43,
    RoomFunction.OTHER_REGION: 9.0,
    RoomFunction.CORRIDOR_RESTROOM: 0.0,
    RoomFunction.EXIT_STAIRS: 0.0,
    RoomFunction.EXIT_DOOR: 0.0,
}

# Functions that may be (re)assigned to a room and that hold occupants.
OCCUPIABLE_FUNCTIONS = (
    RoomFunction.ORDINARY_OFFICE,
    RoomFunction.MEETING_WITH_TABLE,
    RoomFunction.MEETING_NO_TABLE,
    RoomFunction.EXHIBITION_HALL,
    RoomFunction.OTHER_REGION,
)


def density_of(function: RoomFunction) -> float:
    """Occupant allocation in m^2 per person for a room function."""
    return _DENSITY_M2_PER_PERSON[function]


def occupants_in_room(area_m2: float, function: RoomFunction) -> int:
    """Head count for a room: floor(area / density), at least 1 if occupied at all."""
    if area_m2 < 0:
        raise ValueError(f"negative area: {area_m2}")
    density = density_of(function)
    if density == 0.0:
        return 0
    return max(1, int(area_m2 / density))


# Per-cell paint codes. Codes 0..7 match RoomFunction order; plain corridor
# cells share the corridor/restroom code, exit openings the exit-door code.
_FUNCTION_ORDER = list(RoomFunction)
CODE_WALL = 8
CODE_BACKGROUND = 9

_CODE_OF_FUNCTION = {fn: i for i, fn in enumerate(_FUNCTION_ORDER)}
CODE_CORRIDOR = _CODE_OF_FUNCTION[RoomFunction.CORRIDOR_RESTROOM]
CODE_EXIT_DOOR = _CODE_OF_FUNCTION[RoomFunction.EXIT_DOOR]
CODE_EXIT_STAIRS = _CODE_OF_FUNCTION[RoomFunction.EXIT_STAIRS]


@dataclass(frozen=True)
class Palette:
    """Injective map from paint codes to 8-bit RGB. Versioned: never mutate
    a released palette, add a new version instead."""

    version: int
    colors: dict[int, tuple[int, int, int]]

    def __post_init__(self):
        seen = set(self.colors.values())
        if len(seen) != len(self.colors):
            raise ValueError("palette colors must be injective")
        missing = set(range(10)) - set(self.colors)
        if missing:
            raise ValueError(f"palette missing codes: {sorted(missing)}")

    def color_of_function(self, function: RoomFunction) -> tuple[int, int, int]:
        return self.colors[_CODE_OF_FUNCTION[function]]

    @property
    def wall_color(self) -> tuple[int, int, int]:
        return self.colors[CODE_WALL]

    @property
    def background_color(self) -> tuple[int, int, int]:
        return self.colors[CODE_BACKGROUND]


PALETTE_V1 = Palette(
    version=1,
    colors={
        _CODE_OF_FUNCTION[RoomFunction.ORDINARY_OFFICE]: (244, 180, 0),
        _CODE_OF_FUNCTION[RoomFunction.MEETING_WITH_TABLE]: (66, 133, 244),
        _CODE_OF_FUNCTION[RoomFunction.MEETING_NO_TABLE]: (219, 68, 55),
        _CODE_OF_FUNCTION[RoomFunction.EXHIBITION_HALL]: (156, 39, 176),
        _CODE_OF_FUNCTION[RoomFunction.OTHER_REGION]: (15, 157, 88),
        _CODE_OF_FUNCTION[RoomFunction.CORRIDOR_RESTROOM]: (224, 224, 224),
        _CODE_OF_FUNCTION[RoomFunction.EXIT_STAIRS]: (0, 188, 212),
        _CODE_OF_FUNCTION[RoomFunction.EXIT_DOOR]: (255, 235, 59),
        CODE_WALL: (0, 0, 0),
        CODE_BACKGROUND: (255, 255, 255),
    },
)


@dataclass(frozen=True)
class Room:
    cells: frozenset
    function: RoomFunction

    def area_m2(self, cell_size_m: float) -> float:
        return len(self.cells) * cell_size_m * cell_size_m


@dataclass(frozen=True)
class ExitRun:
    """A contiguous run of walkable opening cells (door or stair access)."""

    cells: tuple


@dataclass(frozen=True)
class Layout:
    """Immutable metric floor plan on a square-cell grid.

    ``footprint`` is the set of cells belonging to the building (walls
    included); ``None`` means the full rectangle. Walkable cells are the
    footprint minus walls.
    """

    width_m: float
    height_m: float
    cell_size_m: float
    wall_cells: frozenset
    rooms: tuple
    exits: tuple
    footprint: frozenset | None = None

    @property
    def n_rows(self) -> int:
        return int(round(self.height_m / self.cell_size_m))

    @property
    def n_cols(self) -> int:
        return int(round(self.width_m / self.cell_size_m))

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def footprint_mask(self) -> np.ndarray:
        mask = np.zeros(self.grid_shape, dtype=bool)
        if self.footprint is None:
            mask[:] = True
        else:
            for r, c in self.footprint:
                mask[r, c] = True
        return mask

    def wall_mask(self) -> np.ndarray:
        mask = np.zeros(self.grid_shape, dtype=bool)
        for r, c in self.wall_cells:
            mask[r, c] = True
        return mask

    def walkable_mask(self) -> np.ndarray:
        return self.footprint_mask() & ~self.wall_mask()

    def exit_cells(self) -> frozenset:
        return frozenset(cell for run in self.exits for cell in run.cells)

    def cell_kind_grid(self) -> np.ndarray:
        """Per-cell paint code grid (uint8, shape (n_rows, n_cols))."""
        grid = np.full(self.grid_shape, CODE_BACKGROUND, dtype=np.uint8)
        grid[self.footprint_mask()] = CODE_CORRIDOR
        for r, c in self.wall_cells:
            grid[r, c] = CODE_WALL
        for room in self.rooms:
            code = _CODE_OF_FUNCTION[room.function]
            for r, c in room.cells:
                grid[r, c] = code
        for run in self.exits:
            for r, c in run.cells:
                grid[r, c] = CODE_EXIT_DOOR
        return grid

    def total_occupants(self) -> int:
        return sum(
            occupants_in_room(room.area_m2(self.cell_size_m), room.function)
            for room in self.rooms
        )

    def validate(self) -> None:
        """Raise InvalidLayoutError on any structural violation."""
        if self.width_m <= 0 or self.height_m <= 0 or self.cell_size_m <= 0:
            raise InvalidLayoutError("dimensions must be positive")
        rows, cols = self.grid_shape
        if rows < 3 or cols < 3:
            raise InvalidLayoutError(f"grid {rows}x{cols} too small")

        def in_bounds(cell):
            r, c = cell
            return 0 <= r < rows and 0 <= c < cols

        fp = self.footprint_mask()
        for cell in self.wall_cells:
            if not in_bounds(cell):
                raise InvalidLayoutError(f"wall cell out of bounds: {cell}")
            if not fp[cell]:
                raise InvalidLayoutError(f"wall cell outside footprint: {cell}")

        walk = self.walkable_mask()
        if not walk.any():
            raise InvalidLayoutError("layout has zero walkable cells")

        seen = set()
        for room in self.rooms:
            if not room.cells:
                raise InvalidLayoutError("empty room region")
            for cell in room.cells:
                if not in_bounds(cell):
                    raise InvalidLayoutError(f"room cell out of bounds: {cell}")
                if not walk[cell]:
                    raise InvalidLayoutError(f"room cell not walkable: {cell}")
                if cell in seen:
                    raise InvalidLayoutError(f"rooms overlap at {cell}")
                seen.add(cell)

        if not self.exits:
            raise InvalidLayoutError("layout needs at least one exit")
        stair_cells = set()
        for room in self.rooms:
            if room.function is RoomFunction.EXIT_STAIRS:
                stair_cells.update(room.cells)
        for run in self.exits:
            if not run.cells:
                raise InvalidLayoutError("empty exit run")
            for cell in run.cells:
                if not in_bounds(cell):
                    raise InvalidLayoutError(f"exit cell out of bounds: {cell}")
                if not walk[cell]:
                    raise InvalidLayoutError(f"exit cell not walkable: {cell}")
                if cell in seen and cell not in stair_cells:
                    raise InvalidLayoutError(f"exit cell inside a room: {cell}")
                if not self._touches_exterior(cell, fp) and not _adjacent_to(
                    cell, stair_cells
                ):
                    raise InvalidLayoutError(
                        f"exit cell {cell} not on the building boundary"
                    )

    def _touches_exterior(self, cell: Cell, fp: np.ndarray) -> bool:
        r, c = cell
        rows, cols = fp.shape
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nr, nc = r + dr, c + dc
            if not (0 <= nr < rows and 0 <= nc < cols):
                return True
            if not fp[nr, nc]:
                return True
        return False


def _adjacent_to(cell: Cell, targets: set) -> bool:
    r, c = cell
    return any(
        (r + dr, c + dc) in targets
        for dr in (-1, 0, 1)
        for dc in (-1, 0, 1)
        if (dr, dc) != (0, 0)
    )


@dataclass(frozen=True)
class FeatureTensor:
    """Decoupled 3-plane encoding: obstacle / density / exit.

    ``data`` has shape (3, H, W) float32. Plane 0 and 2 are binary,
    plane 1 holds persons per m^2 capped at 1.0.
    """

    data: np.ndarray

    OBSTACLE = 0
    DENSITY = 1
    EXIT = 2

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[0] != 3:
            raise ValueError(f"expected (3, H, W), got {self.data.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    def validate(self) -> None:
        c0, c1, c2 = self.data
        for name, plane in (("obstacle", c0), ("exit", c2)):
            if not np.isin(plane, (0.0, 1.0)).all():
                raise ValueError(f"{name} plane must be binary")
        if ((c0 == 1) & (c2 == 1)).any():
            raise ValueError("a cell cannot be both obstacle and exit")
        if c1.min() < 0 or c1.max() > 1.0:
            raise ValueError("density plane must lie in [0, 1]")
        if (c1[c0 == 1] != 0).any() or (c1[c2 == 1] != 0).any():
            raise ValueError("density must be zero on obstacle and exit cells")

    def save(self, path) -> None:
        from .container import write_tensor

        write_tensor(path, self.data)

    @classmethod
    def load(cls, path) -> "FeatureTensor":
        from .container import read_tensor

        data = read_tensor(path)
        if data.shape[0] != 3:
            raise ValueError(f"expected 3 channels, found {data.shape[0]}")
        return cls(data)


def _nearest_index_map(n_cells: int, n_pixels: int) -> np.ndarray:
    # pixel i covers [i, i+1) of the raster; sample the cell under its center
    return np.minimum(
        ((np.arange(n_pixels) + 0.5) * n_cells / n_pixels).astype(np.int64),
        n_cells - 1,
    )


def rasterize_codes(layout: Layout, height: int, width: int) -> np.ndarray:
    """Paint-code grid resampled to (height, width) by nearest neighbor.

    Nearest-neighbor keeps runs of equal values contiguous, so feature
    sizes survive rescaling.
    """
    grid = layout.cell_kind_grid()
    rows = _nearest_index_map(layout.n_rows, height)
    cols = _nearest_index_map(layout.n_cols, width)
    return grid[np.ix_(rows, cols)]


# persons/m^2 per paint code, capped at 1.0 (the densest function is
# one person per m^2 already, so the cap only guards config overrides)
def _density_plane_lut(density_overrides=None) -> np.ndarray:
    lut = np.zeros(10, dtype=np.float32)
    for fn in OCCUPIABLE_FUNCTIONS:
        density = density_of(fn)
        if density_overrides and fn in density_overrides:
            density = density_overrides[fn]
        lut[_CODE_OF_FUNCTION[fn]] = min(1.0, 1.0 / density)
    return lut


def encode_features(
    layout: Layout, height: int, width: int, density_overrides=None
) -> FeatureTensor:
    """Rasterize a layout into the 3-plane obstacle/density/exit tensor.

    The obstacle plane marks both walls and cells outside the building
    envelope: neither is usable floor area. ``density_overrides`` maps a
    RoomFunction to a replacement m^2-per-person value for non-standard
    room types.
    """
    if height < 32 or width < 32:
        raise ValueError("feature raster must be at least 32x32")
    layout.validate()
    codes = rasterize_codes(layout, height, width)
    obstacle = ((codes == CODE_WALL) | (codes == CODE_BACKGROUND)).astype(np.float32)
    density = _density_plane_lut(density_overrides)[codes]
    exits = ((codes == CODE_EXIT_DOOR) | (codes == CODE_EXIT_STAIRS)).astype(
        np.float32
    )
    return FeatureTensor(np.stack([obstacle, density, exits]))


def rasterize_rgb(
    layout: Layout, height: int, width: int, palette: Palette = PALETTE_V1
) -> np.ndarray:
    """RGB drawing of the layout, (height, width, 3) uint8."""
    layout.validate()
    codes = rasterize_codes(layout, height, width)
    lut = np.zeros((10, 3), dtype=np.uint8)
    for code, rgb in palette.colors.items():
        lut[code] = rgb
    return lut[codes]


def decode_rgb(image: np.ndarray, palette: Palette = PALETTE_V1) -> np.ndarray:
    """Inverse of :func:`rasterize_rgb`: RGB image back to paint codes."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3), got {image.shape}")
    packed = (
        image[..., 0].astype(np.int32) << 16
        | image[..., 1].astype(np.int32) << 8
        | image[..., 2].astype(np.int32)
    )
    out = np.full(image.shape[:2], 255, dtype=np.uint8)
    for code, (r, g, b) in palette.colors.items():
        out[packed == (r << 16 | g << 8 | b)] = code
    if (out == 255).any():
        bad = image[out == 255][0]
        raise ValueError(f"pixel {tuple(bad)} not in palette v{palette.version}")
    return out


def reassignable_rooms(layout: Layout) -> list[int]:
    """Indices of rooms whose function may be swapped by augmentation."""
    return [
        i
        for i, room in enumerate(layout.rooms)
        if room.function in OCCUPIABLE_FUNCTIONS
    ]


def augment(layout: Layout, variants: int, seed: int) -> list[Layout]:
    """Produce function-reassignment variants of a layout.

    Each variant alters the function of at least two rooms; walls and
    exits are untouched, so only the density plane of the feature
    encoding changes. Deterministic for a fixed seed.
    """
    if not 1 <= variants <= 8:
        raise ValueError(f"variants must be in [1, 8], got {variants}")
    candidates = reassignable_rooms(layout)
    if len(candidates) < 2:
        raise AugmentationUnavailableError(
            f"need at least 2 reassignable rooms, found {len(candidates)}"
        )
    out = []
    for v in range(variants):
        rng = np.random.default_rng([seed, v])
        k = int(rng.integers(2, min(len(candidates), 4) + 1))
        chosen = rng.choice(len(candidates), size=k, replace=False)
        rooms = list(layout.rooms)
        for idx in chosen:
            room_i = candidates[idx]
            current = rooms[room_i].function
            others = [fn for fn in OCCUPIABLE_FUNCTIONS if fn is not current]
            new_fn = others[int(rng.integers(len(others)))]
            rooms[room_i] = replace(rooms[room_i], function=new_fn)
        out.append(replace(layout, rooms=tuple(rooms)))
    return out


# ---------------------------------------------------------------------------
# JSON schema (versioned). Cell sets are stored as per-row run-length
# triples [row, col_start, length].


def _cells_to_rle(cells) -> list:
    runs = []
    by_row: dict[int, list[int]] = {}
    for r, c in cells:
        by_row.setdefault(r, []).append(c)
    for r in sorted(by_row):
        cols = sorted(by_row[r])
        start = prev = cols[0]
        for c in cols[1:]:
            if c == prev + 1:
                prev = c
                continue
            runs.append([r, start, prev - start + 1])
            start = prev = c
        runs.append([r, start, prev - start + 1])
    return runs


def _rle_to_cells(runs) -> frozenset:
    cells = set()
    for r, start, length in runs:
        for c in range(start, start + length):
            cells.add((int(r), int(c)))
    return frozenset(cells)


def layout_to_json(layout: Layout) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "width_m": layout.width_m,
        "height_m": layout.height_m,
        "cell_size_m": layout.cell_size_m,
        "walls_rle": _cells_to_rle(layout.wall_cells),
        "footprint_rle": (
            None if layout.footprint is None else _cells_to_rle(layout.footprint)
        ),
        "rooms": [
            {"function": room.function.value, "cells_rle": _cells_to_rle(room.cells)}
            for room in layout.rooms
        ],
        "exits": [{"cells": [list(c) for c in run.cells]} for run in layout.exits],
    }


def layout_from_json(doc: dict) -> Layout:
    """Parse and validate a layout document. Raises LayoutSchemaError."""
    if not isinstance(doc, dict):
        raise LayoutSchemaError("layout document must be an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise LayoutSchemaError(f"unsupported schema_version: {version!r}")
    try:
        rooms = []
        for entry in doc.get("rooms", []):
            rooms.append(
                Room(
                    cells=_rle_to_cells(entry["cells_rle"]),
                    function=RoomFunction(entry["function"]),
                )
            )
        exits = []
        for entry in doc.get("exits", []):
            exits.append(ExitRun(cells=tuple((int(r), int(c)) for r, c in entry["cells"])))
        fp = doc.get("footprint_rle")
        layout = Layout(
            width_m=float(doc["width_m"]),
            height_m=float(doc["height_m"]),
            cell_size_m=float(doc["cell_size_m"]),
            wall_cells=_rle_to_cells(doc["walls_rle"]),
            rooms=tuple(rooms),
            exits=tuple(exits),
            footprint=None if fp is None else _rle_to_cells(fp),
        )
    except LayoutSchemaError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise LayoutSchemaError(f"malformed layout document: {exc}") from exc
    try:
        layout.validate()
    except InvalidLayoutError as exc:
        raise LayoutSchemaError(str(exc)) from exc
    return layout


def save_layout(layout: Layout, path) -> None:
    Path(path).write_text(json.dumps(layout_to_json(layout), indent=1))


def load_layout(path) -> Layout:
    return layout_from_json(json.loads(Path(path).read_text()))
