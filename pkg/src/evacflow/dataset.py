"""Synthetic layout generation, image alignment, and dataset assembly.

Layouts are generated from a corridor-band skeleton: a footprint mask is
built per shape class, 2-cell-wide corridor bands are laid through each
wing, the leftover interior splits into strips, and strips are
partitioned into rooms by cross walls. Every room gets a door onto a
corridor and every exit is carved into the outer ring next to a
corridor, so reachability holds by construction (and is re-checked).

Dataset assembly runs the oracle per augmented variant, aligns the
drawing/heatmap pair, resizes everything to the training resolution and
writes a manifest with content hashes. Splits are grouped by base
layout by default so augmented near-duplicates never straddle splits.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import cv2
import numpy as np

from .container import write_tensor
from .errors import AlignmentError, EvacflowError, GenerationError
from .layout import (
    ExitRun,
    Layout,
    OCCUPIABLE_FUNCTIONS,
    Room,
    augment,
    encode_features,
    rasterize_rgb,
    save_layout,
)
from .oracle import SimConfig, distance_field, normalize_heatmap, simulate

STRIP_DEPTH = 5  # room cells between corridor wall and outer ring
CORRIDOR_WIDTH = 2
ROOM_PITCH = 7  # nominal along-corridor cells per room (incl. split wall)
MIN_ROOM_SPAN = 3


class ShapeClass(Enum):
    RECTANGULAR = "rectangular"
    L_SHAPE = "l_shape"
    T_SHAPE = "t_shape"
    U_SHAPE = "u_shape"
    IRREGULAR = "irregular"


def _wing_thickness() -> int:
    # ring + strip + wall + corridor + wall + strip + ring
    return 2 * (STRIP_DEPTH + 1) + CORRIDOR_WIDTH + 2


@dataclass
class _Skeleton:
    rows: int
    cols: int
    footprint: np.ndarray  # bool
    band: np.ndarray  # bool, corridor cells


def _rect_mask(rows, cols, r0, r1, c0, c1):
    mask = np.zeros((rows, cols), dtype=bool)
    mask[r0 : r1 + 1, c0 : c1 + 1] = True
    return mask


def _h_band(rows, cols, footprint, row0, c0, c1):
    band = np.zeros((rows, cols), dtype=bool)
    band[row0 : row0 + CORRIDOR_WIDTH, c0 : c1 + 1] = True
    return band & footprint


def _v_band(rows, cols, footprint, col0, r0, r1):
    band = np.zeros((rows, cols), dtype=bool)
    band[r0 : r1 + 1, col0 : col0 + CORRIDOR_WIDTH] = True
    return band & footprint


def _skeleton(shape: ShapeClass, rooms: int, rng: np.random.Generator) -> _Skeleton:
    thick = _wing_thickness()
    mid = 1 + STRIP_DEPTH + 1  # band offset inside a wing
    per_side = max(2, -(-rooms // 2))  # ceil
    length = 2 + per_side * ROOM_PITCH + int(rng.integers(0, 4))

    if shape is ShapeClass.RECTANGULAR:
        rows, cols = thick, length
        footprint = _rect_mask(rows, cols, 0, rows - 1, 0, cols - 1)
        band = _h_band(rows, cols, footprint, mid, 1, cols - 2)
        return _Skeleton(rows, cols, footprint, band)

    if shape is ShapeClass.L_SHAPE:
        leg_len = thick + int(rng.integers(2, 8))
        rows, cols = thick + leg_len, max(length, 2 * thick)
        footprint = _rect_mask(rows, cols, 0, thick - 1, 0, cols - 1)
        footprint |= _rect_mask(rows, cols, thick, rows - 1, 0, thick - 1)
        band = _h_band(rows, cols, footprint, mid, 1, cols - 2)
        band |= _v_band(rows, cols, footprint, mid, mid, rows - 2)
        return _Skeleton(rows, cols, footprint, band)

    if shape is ShapeClass.T_SHAPE:
        stem_len = thick + int(rng.integers(2, 8))
        rows, cols = thick + stem_len, max(length, 2 * thick + 6)
        stem_c0 = (cols - thick) // 2
        footprint = _rect_mask(rows, cols, 0, thick - 1, 0, cols - 1)
        footprint |= _rect_mask(rows, cols, thick, rows - 1, stem_c0, stem_c0 + thick - 1)
        band = _h_band(rows, cols, footprint, mid, 1, cols - 2)
        band |= _v_band(rows, cols, footprint, stem_c0 + mid, mid, rows - 2)
        return _Skeleton(rows, cols, footprint, band)

    if shape is ShapeClass.U_SHAPE:
        leg_len = thick + int(rng.integers(2, 8))
        rows, cols = thick + leg_len, max(length, 2 * thick + 8)
        footprint = _rect_mask(rows, cols, leg_len, rows - 1, 0, cols - 1)  # bottom bar
        footprint |= _rect_mask(rows, cols, 0, leg_len - 1, 0, thick - 1)
        footprint |= _rect_mask(rows, cols, 0, leg_len - 1, cols - thick, cols - 1)
        band = _h_band(rows, cols, footprint, leg_len + mid, 1, cols - 2)
        band |= _v_band(rows, cols, footprint, mid, 1, leg_len + mid)
        band |= _v_band(rows, cols, footprint, cols - thick + mid, 1, leg_len + mid)
        return _Skeleton(rows, cols, footprint, band)

    # irregular: rectangle with corner bites that keep clear of the corridor
    rows, cols = thick + int(rng.integers(0, 5)), length + int(rng.integers(0, 6))
    footprint = _rect_mask(rows, cols, 0, rows - 1, 0, cols - 1)
    band_row = rows // 2 - CORRIDOR_WIDTH // 2
    n_bites = int(rng.integers(1, 4))
    corners = rng.permutation(4)[:n_bites]
    for corner in corners:
        bite_h = int(rng.integers(2, max(3, band_row - 2)))
        bite_w = int(rng.integers(3, max(4, cols // 4)))
        if corner == 0:
            footprint[:bite_h, :bite_w] = False
        elif corner == 1:
            footprint[:bite_h, cols - bite_w :] = False
        elif corner == 2:
            footprint[rows - bite_h :, :bite_w] = False
        else:
            footprint[rows - bite_h :, cols - bite_w :] = False
    band = _h_band(rows, cols, footprint, band_row, 1, cols - 2)
    return _Skeleton(rows, cols, footprint, band)


def _boundary_ring(footprint: np.ndarray) -> np.ndarray:
    rows, cols = footprint.shape
    ring = np.zeros_like(footprint)
    for r in range(rows):
        for c in range(cols):
            if not footprint[r, c]:
                continue
            if r in (0, rows - 1) or c in (0, cols - 1):
                ring[r, c] = True
                continue
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                if not footprint[r + dr, c + dc]:
                    ring[r, c] = True
                    break
    return ring


def _adjacent4(mask: np.ndarray) -> np.ndarray:
    out = np.zeros_like(mask)
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    return out


def _components(mask: np.ndarray) -> list[np.ndarray]:
    n, labels = cv2.connectedComponents(mask.astype(np.uint8), connectivity=4)
    return [labels == i for i in range(1, n)]


def _bisect_region(region: np.ndarray, rng) -> list[tuple[list[np.ndarray], np.ndarray]]:
    """Candidate single-wall cuts of a region, ordered by piece count.

    Non-convex regions can fall apart into more than two pieces for some
    cut positions, so several positions are offered and the caller picks
    one that fits its room budget.
    """
    rs, cs = np.nonzero(region)
    by_row = rs.max() - rs.min() >= cs.max() - cs.min()
    lo, hi = (rs.min(), rs.max()) if by_row else (cs.min(), cs.max())
    if hi - lo + 1 < 2 * MIN_ROOM_SPAN + 1:
        return []
    mid = (lo + hi) // 2
    options = []
    candidates = {mid, mid + int(rng.integers(-2, 3)), lo + MIN_ROOM_SPAN, hi - MIN_ROOM_SPAN}
    for pos in candidates:
        pos = min(max(pos, lo + MIN_ROOM_SPAN), hi - MIN_ROOM_SPAN)
        walls = np.zeros_like(region)
        if by_row:
            walls[pos, :] = region[pos, :]
        else:
            walls[:, pos] = region[:, pos]
        parts = [p for p in _components(region & ~walls) if p.sum() >= MIN_ROOM_SPAN]
        if len(parts) >= 2:
            options.append((parts, walls))
    options.sort(key=lambda item: len(item[0]))
    return options


def generate_layout(
    shape: ShapeClass,
    rooms: int,
    exits: int,
    seed: int,
    cell_size_m: float = 0.5,
) -> Layout:
    """Deterministic synthetic office layout of the requested shape.

    Raises GenerationError when the room or exit count cannot be placed
    on the footprint (too many rooms for the skeleton, or fewer corridor
    ends than requested exits).
    """
    if rooms < 2:
        raise GenerationError("need at least 2 rooms")
    if exits < 1:
        raise GenerationError("need at least 1 exit")
    last_error = None
    for attempt in range(8):
        rng = np.random.default_rng([seed, attempt, 9173])
        try:
            return _generate_once(shape, rooms, exits, rng, cell_size_m)
        except GenerationError as exc:
            last_error = exc
    raise GenerationError(
        f"could not generate {shape.value} layout with {rooms} rooms, "
        f"{exits} exits (seed {seed}): {last_error}"
    )


def _generate_once(shape, rooms, exits, rng, cell_size_m) -> Layout:
    sk = _skeleton(shape, rooms, rng)
    ring = _boundary_ring(sk.footprint)
    band = sk.band & ~ring
    if not band.any():
        raise GenerationError("corridor band collapsed")
    interior = sk.footprint & ~ring
    band_walls = _adjacent4(band) & interior & ~band

    strips = [s for s in _components(interior & ~band & ~band_walls) if s.sum() >= 4]
    if not strips:
        raise GenerationError("no room strips")
    if len(strips) > rooms:
        raise GenerationError(
            f"footprint yields {len(strips)} strips, more than {rooms} rooms"
        )

    # greedy bisection of the largest region until the room count is met
    regions = list(strips)
    split_walls = np.zeros_like(interior)
    frozen: list[np.ndarray] = []  # regions that cannot or must not be cut
    guard = 0
    while len(regions) + len(frozen) < rooms:
        guard += 1
        if guard > 200 or not regions:
            raise GenerationError("partition stalled before reaching room count")
        regions.sort(key=lambda m: int(m.sum()))
        region = regions.pop()
        budget = rooms - (len(regions) + len(frozen) + 1)
        chosen = None
        for parts, walls in _bisect_region(region, rng):
            if len(parts) - 1 <= budget + 1 and len(parts) - 1 >= 1:
                chosen = (parts, walls)
                break
        if chosen is None:
            frozen.append(region)
            continue
        parts, walls = chosen
        if len(parts) - 1 > rooms - (len(regions) + len(frozen) + 1):
            # cutting would overshoot; leave the region whole
            frozen.append(region)
            continue
        split_walls |= walls
        regions.extend(parts)
    room_masks = regions + frozen
    if len(room_masks) != rooms:
        raise GenerationError(
            f"partition produced {len(room_masks)} rooms, wanted {rooms}"
        )

    wall_mask = ring | band_walls | split_walls

    # one door per room: a wall cell touching both the room and the corridor
    door_cells = set()
    for mask in room_masks:
        candidates = np.nonzero(_adjacent4(mask) & wall_mask & _adjacent4(band))
        cells = list(zip(candidates[0].tolist(), candidates[1].tolist()))
        if not cells:
            raise GenerationError("room without corridor access")
        door_cells.add(cells[int(rng.integers(len(cells)))])
    for cell in door_cells:
        wall_mask[cell] = False

    # exits: ring cells adjacent to the corridor band, grouped into runs
    exit_candidates = ring & _adjacent4(band)
    runs = _components(exit_candidates)
    if len(runs) < exits:
        raise GenerationError(f"only {len(runs)} corridor ends for {exits} exits")
    chosen = rng.permutation(len(runs))[:exits]
    exit_runs = []
    for i in chosen:
        cells = tuple(sorted(zip(*np.nonzero(runs[i]))))
        exit_runs.append(ExitRun(cells=tuple((int(r), int(c)) for r, c in cells)))
        for r, c in cells:
            wall_mask[r, c] = False

    functions = [
        OCCUPIABLE_FUNCTIONS[int(rng.integers(len(OCCUPIABLE_FUNCTIONS)))]
        for _ in room_masks
    ]
    def cells_of(mask: np.ndarray) -> frozenset:
        return frozenset((int(r), int(c)) for r, c in zip(*np.nonzero(mask)))

    layout = Layout(
        width_m=sk.cols * cell_size_m,
        height_m=sk.rows * cell_size_m,
        cell_size_m=cell_size_m,
        wall_cells=cells_of(wall_mask),
        rooms=tuple(
            Room(cells=cells_of(mask), function=fn)
            for mask, fn in zip(room_masks, functions)
        ),
        exits=tuple(exit_runs),
        footprint=cells_of(sk.footprint),
    )
    layout.validate()

    # reachability preflight: every room cell must reach an exit
    dist = distance_field(layout).meters
    for room in layout.rooms:
        for cell in room.cells:
            if not np.isfinite(dist[cell]):
                raise GenerationError(f"room cell {cell} unreachable")
    if layout.total_occupants() == 0:
        raise GenerationError("layout has no occupants")
    return layout


# ---------------------------------------------------------------------------
# Alignment


@dataclass
class AlignResult:
    aligned_a: np.ndarray
    aligned_b: np.ndarray
    scale: float
    offset_xy: tuple[float, float]
    residual_px: float


def _foreground_mask(image: np.ndarray) -> np.ndarray:
    if image.ndim == 3:
        gray = cv2.cvtColor(image, cv2.COLOR_RGB2GRAY)
    else:
        gray = image
    border = np.concatenate([gray[0], gray[-1], gray[:, 0], gray[:, -1]])
    background = np.median(border)
    mask = (np.abs(gray.astype(np.int32) - background) > 16).astype(np.uint8)
    kernel = np.ones((3, 3), np.uint8)
    # dilation followed by erosion closes pinholes in the outline
    return cv2.morphologyEx(mask, cv2.MORPH_CLOSE, kernel)


def _main_contour_stats(mask: np.ndarray):
    contours, _ = cv2.findContours(mask, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
    if not contours:
        raise AlignmentError("no foreground contour found")
    contour = max(contours, key=cv2.contourArea)
    x, y, w, h = cv2.boundingRect(contour)
    moments = cv2.moments(contour)
    if moments["m00"] == 0:
        raise AlignmentError("degenerate contour")
    cx = moments["m10"] / moments["m00"]
    cy = moments["m01"] / moments["m00"]
    return (x, y, w, h), (cx, cy)


def align(image_a: np.ndarray, image_b: np.ndarray) -> AlignResult:
    """Bring ``image_b`` into pixel correspondence with ``image_a``.

    Both images must show one dominant foreground region. The transform
    is restricted to uniform scale plus translation, estimated from the
    outer contours after morphological cleanup.
    """
    bbox_a, centroid_a = _main_contour_stats(_foreground_mask(image_a))
    bbox_b, centroid_b = _main_contour_stats(_foreground_mask(image_b))
    scale = 0.5 * (bbox_a[2] / bbox_b[2] + bbox_a[3] / bbox_b[3])
    tx = centroid_a[0] - scale * centroid_b[0]
    ty = centroid_a[1] - scale * centroid_b[1]
    matrix = np.array([[scale, 0.0, tx], [0.0, scale, ty]], dtype=np.float64)
    h_a, w_a = image_a.shape[:2]
    aligned_b = cv2.warpAffine(
        image_b,
        matrix,
        (w_a, h_a),
        flags=cv2.INTER_NEAREST,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=0,
    )
    try:
        _, centroid_after = _main_contour_stats(_foreground_mask(aligned_b))
        residual = float(
            np.hypot(
                centroid_after[0] - centroid_a[0], centroid_after[1] - centroid_a[1]
            )
        )
    except AlignmentError:
        residual = float("inf")
    return AlignResult(
        aligned_a=image_a,
        aligned_b=aligned_b,
        scale=float(scale),
        offset_xy=(float(tx), float(ty)),
        residual_px=residual,
    )


# ---------------------------------------------------------------------------
# Dataset assembly


@dataclass
class ManifestEntry:
    entry_id: str
    base_layout_id: str
    variant_id: int
    layout_path: str
    feature_path: str
    rgb_path: str
    heatmap_path: str
    split: str
    file_sha256: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_json(cls, doc: dict) -> "ManifestEntry":
        return cls(**doc)


@dataclass
class DatasetManifest:
    root: str
    seed: int
    image_size: int
    n_base: int
    augment_factor: int
    group_by_base: bool
    config_hash: str
    entries: list = field(default_factory=list)
    omissions: list = field(default_factory=list)

    def manifest_hash(self) -> str:
        payload = json.dumps(
            {
                "config": self.config_hash,
                "entries": [e.to_json() for e in self.entries],
                "omissions": self.omissions,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def split_entries(self, split: str) -> list:
        return [e for e in self.entries if e.split == split]

    def resolve(self, rel_path: str) -> Path:
        return Path(self.root) / rel_path

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "image_size": self.image_size,
            "n_base": self.n_base,
            "augment_factor": self.augment_factor,
            "group_by_base": self.group_by_base,
            "config_hash": self.config_hash,
            "manifest_hash": self.manifest_hash(),
            "entries": [e.to_json() for e in self.entries],
            "omissions": self.omissions,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        doc = json.loads(Path(path).read_text())
        manifest = cls(
            root=str(Path(path).parent),
            seed=doc["seed"],
            image_size=doc["image_size"],
            n_base=doc["n_base"],
            augment_factor=doc["augment_factor"],
            group_by_base=doc["group_by_base"],
            config_hash=doc["config_hash"],
            entries=[ManifestEntry.from_json(e) for e in doc["entries"]],
            omissions=doc["omissions"],
        )
        return manifest


def _entry_seed(seed: int, base: int, variant: int) -> int:
    digest = hashlib.sha256(f"{seed}/{base}/{variant}".encode()).digest()
    return int.from_bytes(digest[:6], "big")


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def resize_heatmap(pixels: np.ndarray, size: int) -> np.ndarray:
    """Resize and re-normalize a heatmap so the 0/255 endpoints survive."""
    resized = cv2.resize(
        pixels.astype(np.float32), (size, size), interpolation=cv2.INTER_AREA
    )
    return normalize_heatmap(resized).pixels


def oracle_heatmap_for(
    layout: Layout, size: int, config: SimConfig | None = None
) -> np.ndarray:
    """Oracle heatmap for a layout, resampled to size x size."""
    heatmap, _, _ = simulate(layout, config)
    return resize_heatmap(heatmap.pixels, size)


def assign_splits(ids: list[str], seed: int) -> dict[str, str]:
    """Shuffle ids and cut 8:1:1 (val/test get at least one id each)."""
    rng = np.random.default_rng([seed, 777])
    order = [ids[i] for i in rng.permutation(len(ids))]
    n = len(order)
    n_val = max(1, round(0.1 * n))
    n_test = max(1, round(0.1 * n))
    splits = {}
    for i, id_ in enumerate(order):
        if i < n_val:
            splits[id_] = "val"
        elif i < n_val + n_test:
            splits[id_] = "test"
        else:
            splits[id_] = "train"
    return splits


_SHAPE_CYCLE = list(ShapeClass)


def build_dataset(
    out_dir,
    n_base: int,
    augment_factor: int,
    image_size: int,
    seed: int,
    group_by_base: bool = True,
    sim_config: SimConfig | None = None,
    run_alignment: bool = True,
    min_bases: int = 10,
) -> DatasetManifest:
    """Generate layouts, simulate, and write the full training dataset.

    Returns the manifest (also written to ``out_dir/manifest.json``).
    Oracle failures skip the affected entry and are recorded under
    ``omissions``.
    """
    if n_base < min_bases:
        raise ValueError(f"n_base must be at least {min_bases}")
    if not 1 <= augment_factor <= 9:
        raise ValueError("augment_factor must be in [1, 9]")
    out = Path(out_dir)
    for sub in ("layouts", "features", "rgb", "heatmaps"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    config_doc = {
        "n_base": n_base,
        "augment_factor": augment_factor,
        "image_size": image_size,
        "seed": seed,
        "group_by_base": group_by_base,
        "schema": 1,
    }
    config_hash = hashlib.sha256(
        json.dumps(config_doc, sort_keys=True).encode()
    ).hexdigest()
    manifest = DatasetManifest(
        root=str(out),
        seed=seed,
        image_size=image_size,
        n_base=n_base,
        augment_factor=augment_factor,
        group_by_base=group_by_base,
        config_hash=config_hash,
    )

    rng = np.random.default_rng([seed, 31415])
    pending = []  # (base_id, variant_id, layout)
    base_ids = []
    for b in range(n_base):
        base_id = f"b{b:04d}"
        shape = _SHAPE_CYCLE[b % len(_SHAPE_CYCLE)]
        rooms = int(rng.integers(4, 9))
        n_exits = int(rng.integers(1, 3))
        try:
            base = generate_layout(shape, rooms, n_exits, seed=_entry_seed(seed, b, -1))
        except GenerationError as exc:
            manifest.omissions.append({"base": base_id, "error": str(exc)})
            continue
        base_ids.append(base_id)
        variants = [base]
        if augment_factor > 1:
            variants += augment(base, augment_factor - 1, seed=_entry_seed(seed, b, -2))
        pending.extend((base_id, v, layout) for v, layout in enumerate(variants))

    written = []
    for base_id, variant_id, layout in pending:
        entry_id = f"{base_id}_v{variant_id}"
        try:
            entry = _write_entry(
                out,
                entry_id,
                base_id,
                variant_id,
                layout,
                image_size,
                sim_config
                or SimConfig(seed=_entry_seed(seed, int(base_id[1:]), variant_id)),
                run_alignment,
            )
        except EvacflowError as exc:
            manifest.omissions.append({"entry": entry_id, "error": str(exc)})
            continue
        written.append(entry)

    if group_by_base:
        split_of_base = assign_splits(base_ids, seed)
        for entry in written:
            entry.split = split_of_base[entry.base_layout_id]
    else:
        split_of_entry = assign_splits([e.entry_id for e in written], seed)
        for entry in written:
            entry.split = split_of_entry[entry.entry_id]

    manifest.entries = sorted(written, key=lambda e: e.entry_id)
    manifest.save(out / "manifest.json")
    return manifest


def _write_entry(
    out: Path,
    entry_id: str,
    base_id: str,
    variant_id: int,
    layout: Layout,
    image_size: int,
    sim_config: SimConfig,
    run_alignment: bool,
) -> ManifestEntry:
    heatmap, stats, _ = simulate(layout, sim_config)
    native = heatmap.pixels

    if run_alignment and native.any():
        rgb_native = rasterize_rgb(layout, layout.n_rows, layout.n_cols)
        native = align(rgb_native, native).aligned_b

    final_heat = resize_heatmap(native, image_size)
    features = encode_features(layout, image_size, image_size)
    rgb = rasterize_rgb(layout, image_size, image_size)

    layout_path = Path("layouts") / f"{entry_id}.json"
    feature_path = Path("features") / f"{entry_id}.bin"
    rgb_path = Path("rgb") / f"{entry_id}.png"
    heatmap_path = Path("heatmaps") / f"{entry_id}.png"

    save_layout(layout, out / layout_path)
    write_tensor(out / feature_path, features.data)
    cv2.imwrite(str(out / rgb_path), cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))
    cv2.imwrite(str(out / heatmap_path), final_heat)

    entry = ManifestEntry(
        entry_id=entry_id,
        base_layout_id=base_id,
        variant_id=variant_id,
        layout_path=str(layout_path),
        feature_path=str(feature_path),
        rgb_path=str(rgb_path),
        heatmap_path=str(heatmap_path),
        split="train",
    )
    for key, rel in (
        ("features", feature_path),
        ("rgb", rgb_path),
        ("heatmap", heatmap_path),
    ):
        entry.file_sha256[key] = _sha256_file(out / rel)
    return entry
